//! Discretized test class `C_beta` and the linear program behind `A_beta`.
//!
//! A test function is the continuous piecewise-linear (tensor-linear in two
//! dimensions) interpolant of its node values. The LP objective is the exact
//! integral of the piecewise-constant `f` against those hats, so constants
//! are annihilated to rounding and dilations act exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::lpsolve::{LinearProgram, LpStatus};

/// Parameters that identify a test-class discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestClassParams {
    pub n: usize,
    pub beta: f64,
    /// One dimension: nodes on `[-1, 1]` including both endpoints.
    /// Two dimensions: lattice nodes per unit length.
    pub nodes: usize,
    /// Refine around the image of `supp f` when fewer than this many base
    /// nodes fall inside it (0 disables; one dimension only).
    pub window_min: usize,
    pub window_nodes: usize,
}

impl TestClassParams {
    pub fn default_for(n: usize, beta: f64) -> Self {
        match n {
            1 => Self {
                n,
                beta,
                nodes: 33,
                window_min: 16,
                window_nodes: 17,
            },
            _ => Self { n, beta, nodes: 4, window_min: 0, window_nodes: 0 },
        }
    }
}

#[derive(Debug, Clone)]
enum Layout {
    /// Sorted nodes including the endpoints `-1` and `1`, which are fixed at 0.
    Line(Vec<f64>),
    /// Square lattice `z = k / nodes`; only `|z| < 1` carries a variable.
    Lattice { per_unit: usize, vars: Vec<[i32; 2]>, lookup: Vec<Option<usize>> },
}

impl Layout {
    fn uniform_line(count: usize) -> Self {
        let m = count - 1;
        Layout::Line((0..=m).map(|k| -1.0 + 2.0 * k as f64 / m as f64).collect())
    }

    fn lattice(per_unit: usize) -> Self {
        let k = per_unit as i32;
        let side = (2 * k + 1) as usize;
        let mut vars = Vec::new();
        let mut lookup = vec![None; side * side];
        for a in -k..=k {
            for b in -k..=k {
                if a * a + b * b < k * k {
                    lookup[((a + k) as usize) * side + (b + k) as usize] = Some(vars.len());
                    vars.push([a, b]);
                }
            }
        }
        Layout::Lattice { per_unit, vars, lookup }
    }

    fn num_vars(&self) -> usize {
        match self {
            Layout::Line(z) => z.len() - 2,
            Layout::Lattice { vars, .. } => vars.len(),
        }
    }

    fn var_point(&self, i: usize) -> [f64; 2] {
        match self {
            Layout::Line(z) => [z[i + 1], 0.0],
            Layout::Lattice { per_unit, vars, .. } => {
                let s = 1.0 / *per_unit as f64;
                [vars[i][0] as f64 * s, vars[i][1] as f64 * s]
            }
        }
    }

    fn mean_weights(&self) -> Vec<f64> {
        match self {
            Layout::Line(z) => (1..z.len() - 1).map(|i| 0.5 * (z[i + 1] - z[i - 1])).collect(),
            Layout::Lattice { per_unit, vars, .. } => {
                let s = 1.0 / *per_unit as f64;
                vec![s * s; vars.len()]
            }
        }
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.var_point(a), self.var_point(b));
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    fn radius(&self, i: usize) -> f64 {
        let p = self.var_point(i);
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    /// Pairs carrying a Hölder row.
    fn holder_pairs(&self, beta: f64) -> Vec<(usize, usize)> {
        let m = self.num_vars();
        match self {
            // neighbors suffice on a line when beta = 1 (triangle inequality)
            Layout::Line(_) if beta == 1.0 => (1..m).map(|i| (i - 1, i)).collect(),
            _ => (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect(),
        }
    }

    fn build_lp(&self, beta: f64) -> LinearProgram {
        let m = self.num_vars();
        let mut lp = LinearProgram::new(m);
        for i in 0..m {
            let b = (1.0 - self.radius(i)).max(0.0).powf(beta);
            lp.set_bounds(i, -b, b);
        }
        let mut row = vec![0.0; m];
        for (i, j) in self.holder_pairs(beta) {
            let d = self.distance(i, j).powf(beta);
            row[i] = 1.0;
            row[j] = -1.0;
            lp.add_range(&row, -d, d);
            row[i] = 0.0;
            row[j] = 0.0;
        }
        lp.add_eq(&self.mean_weights(), 0.0);
        lp
    }
}

/// `int_a^b` of the hat with nodes `zl < zc < zr`, via its antiderivative.
fn hat_integral(zl: f64, zc: f64, zr: f64, a: f64, b: f64) -> f64 {
    let cdf = |u: f64| {
        if u <= zl {
            0.0
        } else if u <= zc {
            (u - zl) * (u - zl) / (2.0 * (zc - zl))
        } else if u < zr {
            0.5 * (zc - zl) + ((zr - zc) * (zr - zc) - (zr - u) * (zr - u)) / (2.0 * (zr - zc))
        } else {
            0.5 * (zr - zl)
        }
    };
    cdf(b) - cdf(a)
}

#[derive(Debug, Clone)]
pub struct TestClassGrid {
    params: TestClassParams,
    base: Layout,
    template: LinearProgram,
}

/// One `A_beta` evaluation with its diagnostics.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    /// `1e-8 * sum |c_i|`: values below this are indistinguishable from 0.
    pub noise_floor: f64,
    pub windowed: bool,
}

impl TestClassGrid {
    pub fn new(params: TestClassParams) -> Result<Self> {
        if !(params.beta > 0.0 && params.beta <= 1.0) {
            return invalid("beta must lie in (0, 1]");
        }
        let base = match params.n {
            1 if params.nodes >= 3 => Layout::uniform_line(params.nodes),
            2 if params.nodes >= 2 => Layout::lattice(params.nodes),
            1 | 2 => return invalid("test-class grid too coarse"),
            _ => return invalid("only n = 1 and n = 2 are supported"),
        };
        if params.n == 1 && params.window_min > 0 && params.window_nodes < 3 {
            return invalid("refinement window needs at least 3 nodes");
        }
        let template = base.build_lp(params.beta);
        Ok(Self { params, base, template })
    }

    pub fn default_for(n: usize, beta: f64) -> Result<Self> {
        Self::new(TestClassParams::default_for(n, beta))
    }

    pub fn params(&self) -> &TestClassParams {
        &self.params
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    /// The LP over the base grid with a zero objective.
    pub fn base_lp(&self) -> &LinearProgram {
        &self.template
    }

    pub fn num_vars(&self) -> usize {
        self.base.num_vars()
    }

    /// Base-grid variable nodes.
    pub fn var_points(&self) -> Vec<Vec<f64>> {
        (0..self.num_vars())
            .map(|i| self.base.var_point(i)[..self.params.n].to_vec())
            .collect()
    }

    pub fn mean_weights(&self) -> Vec<f64> {
        self.base.mean_weights()
    }

    /// The largest slack ratio of `v` against the Hölder and boundary rows
    /// (all pairs, whatever `beta`); `v` is feasible iff this is `<= 1` and
    /// the weighted mean vanishes.
    pub fn constraint_ratio(&self, v: &[f64]) -> f64 {
        let beta = self.params.beta;
        let m = self.num_vars();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let b = (1.0 - self.base.radius(i)).max(0.0).powf(beta);
            worst = worst.max(if b > 0.0 { v[i].abs() / b } else if v[i] != 0.0 { f64::INFINITY } else { 0.0 });
            for j in i + 1..m {
                worst = worst.max((v[i] - v[j]).abs() / self.base.distance(i, j).powf(beta));
            }
        }
        worst
    }

    /// A feasible vector: eight random lattice bumps, mean removed against a
    /// fixed reference bump, then scaled until the tightest row is active.
    pub fn sample_feasible(&self, rng: &mut impl Rng) -> Vec<f64> {
        let pts = self.var_points();
        let m = pts.len();
        let bump = |x: &[f64], c: &[f64], r: f64| {
            let d: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (1.0 - d / r).max(0.0)
        };
        let mut psi = vec![0.0; m];
        for _ in 0..8 {
            let c = &pts[rng.gen_range(0..m)];
            let room = 1.0 - c.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = rng.gen_range(0.1..1.0) * room.max(1e-3);
            let a: f64 = rng.gen_range(-1.0..1.0);
            for (p, s) in pts.iter().zip(psi.iter_mut()) {
                *s += a * bump(p, c, r);
            }
        }
        let origin = vec![0.0; self.params.n];
        let rho: Vec<f64> = pts.iter().map(|p| bump(p, &origin, 0.5)).collect();
        let w = self.mean_weights();
        let dot = |u: &[f64]| u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let shift = dot(&psi) / dot(&rho);
        for (s, r) in psi.iter_mut().zip(&rho) {
            *s -= shift * r;
        }
        let ratio = self.constraint_ratio(&psi);
        if ratio > 0.0 {
            psi.iter_mut().for_each(|s| *s /= ratio);
        }
        psi
    }

    /// Node layout for `(f, y, t)`: the base grid, or in one dimension the
    /// base grid with the image of `supp f` refined when it is too narrow.
    fn layout_for(&self, f: &GridFunction, y: &[f64], t: f64) -> Option<Layout> {
        let p = &self.params;
        if p.n != 1 || p.window_min == 0 {
            return None;
        }
        let Layout::Line(z) = &self.base else { return None };
        let [(lo, hi), _] = f.nonzero_box()?;
        let s_lo = f.axis_coord(lo) - 0.5 * f.spacing();
        let s_hi = f.axis_coord(hi) + 0.5 * f.spacing();
        let w_lo = ((y[0] - s_hi) / t).max(-1.0);
        let w_hi = ((y[0] - s_lo) / t).min(1.0);
        if w_lo >= w_hi {
            return None;
        }
        let inside = z.iter().filter(|v| **v > w_lo && **v < w_hi).count();
        if inside >= p.window_min {
            return None;
        }
        let k = p.window_nodes - 1;
        let step = (w_hi - w_lo) / k as f64;
        let mut nodes: Vec<f64> = z.iter().copied().filter(|v| *v < w_lo || *v > w_hi).collect();
        nodes.extend((0..=k).map(|i| if i == k { w_hi } else { w_lo + i as f64 * step }));
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
        Some(Layout::Line(nodes))
    }

    fn coefficients(&self, layout: &Layout, f: &GridFunction, y: &[f64], t: f64) -> Vec<f64> {
        let mut c = vec![0.0; layout.num_vars()];
        let Some(bx) = f.nonzero_box() else { return c };
        let h = f.spacing();
        let l = f.extent();
        // cells whose z-image meets [-1, 1]
        let range = |d: usize| {
            let lo = ((y[d] - t + l) / h - 1.5).floor().max(bx[d].0 as f64) as usize;
            let hi = ((y[d] + t + l) / h + 0.5).ceil().min(bx[d].1 as f64) as usize;
            (lo, hi)
        };
        let zint = |d: usize, j: usize| {
            let x = f.axis_coord(j);
            let a = ((y[d] - x - 0.5 * h) / t).max(-1.0);
            let b = ((y[d] - x + 0.5 * h) / t).min(1.0);
            (a, b)
        };
        let samples = f.samples();
        match layout {
            Layout::Line(z) => {
                let (lo, hi) = range(0);
                if lo > hi {
                    return c;
                }
                let top = z.len() - 1;
                for j in lo..=hi {
                    let v = samples[j];
                    if v == 0.0 {
                        continue;
                    }
                    let (a, b) = zint(0, j);
                    if a >= b {
                        continue;
                    }
                    let u = z.partition_point(|q| *q <= a);
                    let mut i = u.saturating_sub(1).max(1);
                    while i < top && z[i - 1] < b {
                        c[i - 1] += v * hat_integral(z[i - 1], z[i], z[i + 1], a, b);
                        i += 1;
                    }
                }
            }
            Layout::Lattice { per_unit, lookup, .. } => {
                let k = *per_unit as i32;
                let side = (2 * k + 1) as usize;
                let s = 1.0 / k as f64;
                let axis_hats = |a: f64, b: f64| {
                    let first = ((a / s).floor() as i32 - 1).max(-k);
                    let last = ((b / s).ceil() as i32 + 1).min(k);
                    (first..=last)
                        .filter_map(|m| {
                            let zc = m as f64 * s;
                            let v = hat_integral(zc - s, zc, zc + s, a, b);
                            (v != 0.0).then_some((m, v))
                        })
                        .collect::<Vec<_>>()
                };
                let (lo0, hi0) = range(0);
                let (lo1, hi1) = range(1);
                if lo0 > hi0 || lo1 > hi1 {
                    return c;
                }
                for j0 in lo0..=hi0 {
                    let (a0, b0) = zint(0, j0);
                    if a0 >= b0 {
                        continue;
                    }
                    let hats0 = axis_hats(a0, b0);
                    for j1 in lo1..=hi1 {
                        let v = samples[f.flat_index(&[j0, j1])];
                        if v == 0.0 {
                            continue;
                        }
                        let (a1, b1) = zint(1, j1);
                        if a1 >= b1 {
                            continue;
                        }
                        let hats1 = axis_hats(a1, b1);
                        for &(m0, i0) in &hats0 {
                            for &(m1, i1) in &hats1 {
                                let key = ((m0 + k) as usize) * side + (m1 + k) as usize;
                                if let Some(var) = lookup[key] {
                                    c[var] += v * i0 * i1;
                                }
                            }
                        }
                    }
                }
            }
        }
        c
    }

    /// The LP whose optimum is `A_beta(f)(y, t)`.
    pub fn lp_for(&self, f: &GridFunction, y: &[f64], t: f64) -> LinearProgram {
        match self.layout_for(f, y, t) {
            Some(layout) => {
                let mut lp = layout.build_lp(self.params.beta);
                lp.set_objective(&self.coefficients(&layout, f, y, t));
                lp
            }
            None => {
                let mut lp = self.template.clone();
                lp.set_objective(&self.coefficients(&self.base, f, y, t));
                lp
            }
        }
    }

    /// Objective coefficients on the base grid.
    pub fn base_coefficients(&self, f: &GridFunction, y: &[f64], t: f64) -> Vec<f64> {
        self.coefficients(&self.base, f, y, t)
    }

    pub fn evaluate(&self, f: &GridFunction, y: &[f64], t: f64) -> Result<Evaluation> {
        if f.dim() != self.params.n || y.len() != self.params.n {
            return invalid("dimension mismatch between f, y and the test class");
        }
        if !(t > 0.0) {
            return invalid("t must be positive");
        }
        let layout = self.layout_for(f, y, t);
        let windowed = layout.is_some();
        let layout = layout.as_ref().unwrap_or(&self.base);
        let c = self.coefficients(layout, f, y, t);
        let scale: f64 = c.iter().map(|v| v.abs()).sum();
        if scale == 0.0 {
            return Ok(Evaluation { value: 0.0, noise_floor: 0.0, windowed });
        }
        let mut lp = if windowed { layout.build_lp(self.params.beta) } else { self.template.clone() };
        lp.set_objective(&c);
        let sol = lp.solve()?;
        match sol.status {
            LpStatus::Optimal => Ok(Evaluation {
                value: sol.value.max(0.0),
                noise_floor: 1e-8 * scale,
                windowed,
            }),
            LpStatus::Unbounded => Err(Error::LpStatus("unbounded")),
            LpStatus::Infeasible => Err(Error::LpStatus("infeasible")),
        }
    }
}
