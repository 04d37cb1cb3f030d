//! The `(y, t) -> A_beta(f)(y, t)` table and the square functions read from it.
//!
//! Levels are log-spaced, `t_k = t_min 2^{(k + 1/2)/m}`, each standing for a
//! log-interval of width `ln 2 / m`. At level `k` the `y` nodes form a lattice
//! of step `delta(t) = h 2^{max(0, floor(log2(t / (Y h))))}` anchored at the
//! middle of `supp f`; only nodes with `B(y, t)` meeting `supp f` are stored,
//! every other value is zero.
//!
//! In one dimension `A_beta` is piecewise constant in `y` on the lattice
//! cells for the cone and kernel integrals, and piecewise linear for `g`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::testclass::{TestClassGrid, TestClassParams};
use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub levels_per_octave: usize,
    /// Target number of `y` steps per `t` before the lattice coarsens.
    pub y_per_t: f64,
}

impl ConeQuadrature {
    /// `t` from `h` to `16 L`, eight levels per octave.
    pub fn for_grid(f: &GridFunction) -> Self {
        Self {
            t_min: f.spacing(),
            t_max: 16.0 * f.extent(),
            levels_per_octave: 8,
            y_per_t: 8.0,
        }
    }

    pub fn validate(&self, f: &GridFunction) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return invalid("need 0 < t_min < t_max");
        }
        if self.t_min < f.spacing() * (1.0 - 1e-12) {
            return invalid("t_min must not undercut the grid spacing");
        }
        if self.levels_per_octave == 0 || !(self.y_per_t >= 1.0) {
            return invalid("need at least one level per octave and y_per_t >= 1");
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        (self.levels_per_octave as f64 * (self.t_max / self.t_min).log2()).ceil() as usize
    }

    pub fn level_t(&self, k: usize) -> f64 {
        self.t_min * ((k as f64 + 0.5) / self.levels_per_octave as f64).exp2()
    }

    /// `ln 2 / m`, the `dt / t` measure of one level.
    pub fn dlog(&self) -> f64 {
        std::f64::consts::LN_2 / self.levels_per_octave as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.num_levels()).map(|k| self.level_t(k)).collect()
    }

    /// Lattice step (in grid nodes) at scale `t`.
    pub fn y_step_nodes(&self, h: f64, t: f64) -> i64 {
        let e = (t / (self.y_per_t * h)).log2().floor();
        if e <= 0.0 {
            1
        } else {
            1i64 << (e as u32).min(40)
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    t: f64,
    /// lattice step in grid nodes
    step: i64,
    /// first lattice index per axis (in steps from the anchor)
    first: [i64; 2],
    count: [usize; 2],
    values: Vec<f64>,
    /// one dimension: cumulative sums of `A^2` over lattice cells (missing
    /// entries count as zero) and of missing entries
    prefix: Vec<f64>,
    missing: Vec<u32>,
}

impl Level {
    fn len(&self) -> usize {
        self.values.len()
    }
}

/// Header of a persisted cache.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheHeader {
    pub hash: String,
    pub beta: f64,
    pub test_class: TestClassParams,
    pub quadrature: ConeQuadrature,
    pub anchor: Vec<f64>,
}

/// Closed-form constants for the truncated `t` tails.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailConstants {
    /// `|int f|`
    pub mass: f64,
    /// `int |f(x)| |x - c|^beta dx`
    pub moment: f64,
    /// largest jump of `f` across a cell face (including into the zero exterior)
    pub jump: f64,
    /// bound on `int |phi|` over the test class
    pub phi_l1: f64,
    /// number of cell faces carrying a jump
    pub jump_faces: usize,
}

pub struct ABetaCache {
    f: GridFunction,
    tc: TestClassGrid,
    quad: ConeQuadrature,
    anchor: [i64; 2],
    levels: Vec<Level>,
    hash: String,
    frozen: bool,
    jump_points: Vec<Vec<f64>>,
    tails: TailConstants,
}

/// SHA-256 of the lattice description and samples.
pub fn grid_hash(f: &GridFunction) -> String {
    let mut h = Sha256::new();
    h.update((f.dim() as u64).to_le_bytes());
    h.update(f.spacing().to_le_bytes());
    h.update(f.extent().to_le_bytes());
    for v in f.samples() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl ABetaCache {
    /// Empty cache whose `y` lattice is anchored at the middle of `supp f`.
    pub fn new(f: &GridFunction, tc: &TestClassGrid, quad: ConeQuadrature) -> Result<Self> {
        Self::build(f, tc, quad, None)
    }

    /// Empty cache whose `y` lattice passes through the node `anchor`, so
    /// caches of different functions share lattice points.
    pub fn with_anchor(f: &GridFunction, tc: &TestClassGrid, quad: ConeQuadrature, anchor: &[f64]) -> Result<Self> {
        let mut units = [0i64; 2];
        for d in 0..f.dim() {
            let p = anchor[d] / (0.5 * f.spacing());
            if p.fract() != 0.0 || (p as i64 + f.nodes_per_axis() as i64 - 1) % 2 != 0 {
                return invalid("cache anchor must be a grid node");
            }
            units[d] = p as i64;
        }
        Self::build(f, tc, quad, Some(units))
    }

    fn build(f: &GridFunction, tc: &TestClassGrid, quad: ConeQuadrature, fixed: Option<[i64; 2]>) -> Result<Self> {
        quad.validate(f)?;
        if f.dim() != tc.dim() {
            return invalid("grid and test-class dimensions differ");
        }
        let n = f.dim();
        let bx = f.nonzero_box();
        let h = f.spacing();
        let mut anchor = fixed.unwrap_or([0; 2]);
        let mut lo_x = [0.0; 2];
        let mut hi_x = [0.0; 2];
        if let Some(b) = bx {
            for d in 0..n {
                let mid = (b[d].0 + b[d].1) / 2;
                if fixed.is_none() {
                    anchor[d] = f.half_unit(mid);
                }
                lo_x[d] = f.axis_coord(b[d].0) - 0.5 * h;
                hi_x[d] = f.axis_coord(b[d].1) + 0.5 * h;
            }
        }
        let mut levels = Vec::new();
        for t in quad.levels() {
            let step = quad.y_step_nodes(h, t);
            let delta = step as f64 * h;
            let mut first = [0i64; 2];
            let mut count = [1usize; 2];
            for d in 0..n {
                if bx.is_none() {
                    count[d] = 0;
                    continue;
                }
                let a = anchor[d] as f64 * 0.5 * h;
                let lo = ((lo_x[d] - t - a) / delta).ceil() as i64;
                let hi = ((hi_x[d] + t - a) / delta).floor() as i64;
                first[d] = lo;
                count[d] = (hi - lo + 1).max(0) as usize;
            }
            let len = count[0] * if n == 2 { count[1] } else { 1 };
            levels.push(Level {
                t,
                step,
                first,
                count,
                values: vec![f64::NAN; len],
                prefix: Vec::new(),
                missing: Vec::new(),
            });
        }
        let (jump_points, tails) = tail_constants(f, tc.beta());
        Ok(Self {
            f: f.clone(),
            tc: tc.clone(),
            quad,
            anchor,
            levels,
            hash: grid_hash(f),
            frozen: false,
            jump_points,
            tails,
        })
    }

    pub fn function(&self) -> &GridFunction {
        &self.f
    }

    pub fn test_class(&self) -> &TestClassGrid {
        &self.tc
    }

    pub fn quadrature(&self) -> &ConeQuadrature {
        &self.quad
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn tail_constants(&self) -> TailConstants {
        self.tails
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_t(&self, k: usize) -> f64 {
        self.levels[k].t
    }

    pub fn num_entries(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    pub fn num_filled(&self) -> usize {
        self.levels
            .iter()
            .map(|l| l.values.iter().filter(|v| !v.is_nan()).count())
            .sum()
    }

    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn h(&self) -> f64 {
        self.f.spacing()
    }

    /// Coordinate of lattice index `j` along axis `d` at level `k`.
    fn y_coord(&self, k: usize, d: usize, j: i64) -> f64 {
        let lv = &self.levels[k];
        (self.anchor[d] + 2 * lv.step * (lv.first[d] + j)) as f64 * 0.5 * self.h()
    }

    fn entry_point(&self, k: usize, idx: usize) -> [f64; 2] {
        let lv = &self.levels[k];
        match self.dim() {
            1 => [self.y_coord(k, 0, idx as i64), 0.0],
            _ => {
                let (a, b) = (idx / lv.count[1], idx % lv.count[1]);
                [self.y_coord(k, 0, a as i64), self.y_coord(k, 1, b as i64)]
            }
        }
    }

    /// Compute every missing entry accepted by `want(level, y)`.
    pub fn fill_where(&mut self, want: impl Fn(usize, &[f64]) -> bool + Sync) -> Result<usize> {
        if self.frozen {
            return invalid("cache is frozen");
        }
        let n = self.dim();
        let mut tasks = Vec::new();
        for k in 0..self.levels.len() {
            for idx in 0..self.levels[k].len() {
                if self.levels[k].values[idx].is_nan() {
                    let y = self.entry_point(k, idx);
                    if want(k, &y[..n]) {
                        tasks.push((k, idx, y));
                    }
                }
            }
        }
        // a cropped copy keeps support scans short on large grids
        let small = self.f.cropped();
        let f = small.as_ref().unwrap_or(&self.f);
        let tc = &self.tc;
        let levels = &self.levels;
        let results: Vec<Result<f64>> = tasks
            .par_iter()
            .map(|(k, _, y)| tc.evaluate(f, &y[..n], levels[*k].t).map(|e| e.value))
            .collect();
        for ((k, idx, _), r) in tasks.iter().zip(results) {
            self.levels[*k].values[*idx] = r?;
        }
        Ok(tasks.len())
    }

    pub fn fill_all(&mut self) -> Result<usize> {
        self.fill_where(|_, _| true)
    }

    /// Entries inside the cones of aperture `gamma` over the points `xs`.
    pub fn fill_cones(&mut self, xs: &[Vec<f64>], gamma: f64) -> Result<usize> {
        let h = self.h();
        let steps: Vec<f64> = self.levels.iter().map(|l| l.step as f64 * h).collect();
        let ts: Vec<f64> = self.levels.iter().map(|l| l.t).collect();
        self.fill_where(move |k, y| {
            // cell half-diagonal slack so partial cells are included
            let slack = 0.5 * steps[k] * (y.len() as f64).sqrt();
            xs.iter().any(|x| dist(x, y) < gamma * ts[k] + slack)
        })
    }

    /// Entries needed to interpolate `A_beta(f)(x, t)` for every level.
    pub fn fill_lines(&mut self, xs: &[Vec<f64>]) -> Result<usize> {
        let h = self.h();
        let steps: Vec<f64> = self.levels.iter().map(|l| l.step as f64 * h).collect();
        self.fill_where(move |k, y| {
            xs.iter().any(|x| x.iter().zip(y).all(|(a, b)| (a - b).abs() <= steps[k] * (1.0 + 1e-12)))
        })
    }

    /// Build the prefix sums; no further filling is allowed.
    pub fn freeze(&mut self) {
        if self.dim() == 1 {
            for lv in &mut self.levels {
                let (mut acc, mut gaps) = (0.0, 0u32);
                lv.prefix = vec![0.0];
                lv.missing = vec![0];
                for v in &lv.values {
                    if v.is_nan() {
                        gaps += 1;
                    } else {
                        acc += v * v;
                    }
                    lv.prefix.push(acc);
                    lv.missing.push(gaps);
                }
            }
        }
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// `A_beta(f)(y_j, t_k)`; zero off the stored range.
    pub fn value(&self, k: usize, j: &[i64]) -> Result<f64> {
        let lv = &self.levels[k];
        let mut idx = 0usize;
        for d in 0..self.dim() {
            let i = j[d] - lv.first[d];
            if i < 0 || i as usize >= lv.count[d] {
                return Ok(0.0);
            }
            idx = idx * lv.count[d] + i as usize;
        }
        let v = lv.values[idx];
        if v.is_nan() {
            return Err(Error::MissingCacheEntry { level: k, index: idx as i64 });
        }
        Ok(v)
    }

    /// All stored `(t, y, value)` triples, in storage order.
    pub fn entries(&self) -> Vec<(f64, Vec<f64>, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.num_entries());
        for k in 0..self.levels.len() {
            for idx in 0..self.levels[k].len() {
                let y = self.entry_point(k, idx);
                out.push((self.levels[k].t, y[..n].to_vec(), self.levels[k].values[idx]));
            }
        }
        out
    }

    /// Same cache for `c f` (homogeneity of `A_beta`).
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.scaled(c);
        let mut levels = self.levels.clone();
        for lv in &mut levels {
            lv.values.iter_mut().for_each(|v| *v *= c.abs());
            lv.prefix.iter_mut().for_each(|v| *v *= c * c);
        }
        let mut tails = self.tails;
        tails.mass *= c.abs();
        tails.moment *= c.abs();
        tails.jump *= c.abs();
        Self {
            hash: grid_hash(&f),
            f,
            tc: self.tc.clone(),
            quad: self.quad,
            anchor: self.anchor,
            levels,
            frozen: self.frozen,
            jump_points: self.jump_points.clone(),
            tails,
        }
    }

    fn check_missing(&self, v: f64, k: usize) -> Result<f64> {
        if v.is_nan() {
            Err(Error::MissingCacheEntry { level: k, index: -1 })
        } else {
            Ok(v)
        }
    }

    /// Lattice position of `x` along axis `d` at level `k`, in steps.
    fn lattice_pos(&self, k: usize, d: usize, x: f64) -> f64 {
        let lv = &self.levels[k];
        let a = self.anchor[d] as f64 * 0.5 * self.h();
        (x - a) / (lv.step as f64 * self.h()) - lv.first[d] as f64
    }

    /// `int_{-inf}^{s} A^2` over lattice cells, `s` in cell units (cell `j`
    /// covers `[j - 1/2, j + 1/2)`).
    fn cumulative(&self, k: usize, s: f64) -> f64 {
        let lv = &self.levels[k];
        let u = s + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        let n = lv.values.len();
        if u >= n as f64 {
            return lv.prefix[n];
        }
        let i = u.floor() as usize;
        let v = lv.values[i];
        let part = if v.is_nan() { 0.0 } else { (u - i as f64) * v * v };
        lv.prefix[i] + part
    }

    /// Whether any lattice cell meeting `(lo, hi)` (cell units) is missing.
    fn missing_between(&self, k: usize, lo: f64, hi: f64) -> bool {
        let lv = &self.levels[k];
        let n = lv.values.len() as f64;
        let a = (lo + 0.5).floor().clamp(0.0, n) as usize;
        let b = (hi + 0.5).ceil().clamp(0.0, n) as usize;
        a < b && lv.missing[b] > lv.missing[a]
    }

    fn require_frozen(&self) -> Result<()> {
        if self.frozen {
            Ok(())
        } else {
            invalid("freeze the cache before evaluating square functions")
        }
    }

    /// `S_{beta,gamma}(f)(x)`.
    pub fn s_gamma(&self, x: &[f64], gamma: f64) -> Result<f64> {
        self.require_frozen()?;
        if !(gamma > 0.0) {
            return invalid("aperture must be positive");
        }
        let dlog = self.quad.dlog();
        let h = self.h();
        let mut total = 0.0;
        for k in 0..self.levels.len() {
            let lv = &self.levels[k];
            if lv.values.is_empty() {
                continue;
            }
            let t = lv.t;
            let delta = lv.step as f64 * h;
            let s = match self.dim() {
                1 => {
                    let lo = self.lattice_pos(k, 0, x[0] - gamma * t);
                    let hi = self.lattice_pos(k, 0, x[0] + gamma * t);
                    if self.missing_between(k, lo, hi) {
                        return Err(Error::MissingCacheEntry { level: k, index: -1 });
                    }
                    (self.cumulative(k, hi) - self.cumulative(k, lo)) * delta / t
                }
                _ => {
                    let mut acc = 0.0;
                    for idx in 0..lv.len() {
                        let y = self.entry_point(k, idx);
                        if dist(x, &y) < gamma * t {
                            acc += lv.values[idx] * lv.values[idx];
                        }
                    }
                    self.check_missing(acc, k)? * delta * delta / (t * t)
                }
            };
            total += s;
        }
        Ok((total * dlog).sqrt())
    }

    pub fn s_beta(&self, x: &[f64]) -> Result<f64> {
        self.s_gamma(x, 1.0)
    }

    /// `A_beta(f)(x, t_k)` by linear (bilinear) interpolation in `y`.
    pub fn interpolate(&self, k: usize, x: &[f64]) -> Result<f64> {
        let lv = &self.levels[k];
        if lv.values.is_empty() {
            return Ok(0.0);
        }
        let n = self.dim();
        let mut base = [0i64; 2];
        let mut frac = [0.0; 2];
        for d in 0..n {
            let p = self.lattice_pos(k, d, x[d]);
            let fl = p.floor();
            base[d] = fl as i64 + lv.first[d];
            frac[d] = p - fl;
        }
        match n {
            1 => {
                let a = self.value(k, &[base[0]])?;
                let b = self.value(k, &[base[0] + 1])?;
                Ok((1.0 - frac[0]) * a + frac[0] * b)
            }
            _ => {
                let mut v = 0.0;
                for (da, wa) in [(0, 1.0 - frac[0]), (1, frac[0])] {
                    for (db, wb) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                        if wa * wb != 0.0 {
                            v += wa * wb * self.value(k, &[base[0] + da, base[1] + db])?;
                        }
                    }
                }
                Ok(v)
            }
        }
    }

    /// `g_beta(f)(x)`.
    pub fn g_beta(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.levels.len() {
            let a = self.interpolate(k, x)?;
            total += a * a;
        }
        Ok((total * self.quad.dlog()).sqrt())
    }

    /// `g*_{lambda,beta}(f)(x)`, with the kernel integrated exactly over
    /// each lattice cell in one dimension.
    pub fn g_star(&self, x: &[f64], lambda: f64) -> Result<f64> {
        self.require_frozen()?;
        let n = self.dim() as f64;
        if !(lambda > 1.0) {
            return invalid("g* needs lambda > 1");
        }
        let e = lambda * n;
        let h = self.h();
        let mut total = 0.0;
        for k in 0..self.levels.len() {
            let lv = &self.levels[k];
            if lv.values.is_empty() {
                continue;
            }
            let t = lv.t;
            let delta = lv.step as f64 * h;
            let mut acc = 0.0;
            match self.dim() {
                1 => {
                    // antiderivative of (t / (t + |u|))^e, odd in u
                    let kint = |u: f64| u.signum() * t / (e - 1.0) * (1.0 - (t / (t + u.abs())).powf(e - 1.0));
                    let y0 = self.y_coord(k, 0, 0) - 0.5 * delta;
                    let mut left = kint(y0 - x[0]);
                    for (i, v) in lv.values.iter().enumerate() {
                        let right = kint(y0 + (i + 1) as f64 * delta - x[0]);
                        acc += v * v * (right - left);
                        left = right;
                    }
                    acc /= t;
                }
                _ => {
                    for idx in 0..lv.len() {
                        let y = self.entry_point(k, idx);
                        let kern = (t / (t + dist(x, &y))).powf(e);
                        acc += lv.values[idx] * lv.values[idx] * kern;
                    }
                    acc *= delta * delta / (t * t);
                }
            }
            total += self.check_missing(acc, k)?;
        }
        Ok((total * self.quad.dlog()).sqrt())
    }

    /// `int int A^2 dy dt / t^{n+1}` over the whole table: with the kernel
    /// bounded by `2^{-j lambda n}` beyond the annulus `j`, this bounds the
    /// part of `g*^2` not covered by apertures up to `2^j`.
    pub fn total_energy(&self) -> Result<f64> {
        let h = self.h();
        let n = self.dim() as i32;
        let mut total = 0.0;
        for (k, lv) in self.levels.iter().enumerate() {
            let delta = (lv.step as f64 * h).powi(n);
            let s: f64 = lv.values.iter().map(|v| v * v).sum();
            total += self.check_missing(s, k)? * delta / lv.t.powi(n);
        }
        Ok(total * self.quad.dlog())
    }

    /// Estimates of the `t < t_min` and `t > t_max` contributions to the
    /// square of each operator at `x`.
    pub fn tail_estimate(&self, x: &[f64], op: TailOp) -> TailEstimate {
        let n = self.dim();
        let nf = n as f64;
        let beta = self.tc.beta();
        let tc = &self.tails;
        let (a, b) = (tc.mass, tc.moment);
        let tmax = self.quad.t_max;
        let tmin = self.quad.t_min;
        // int_T^inf (a t^-n + b t^-n-beta)^2 dt / t
        let big = a * a / (2.0 * nf) * tmax.powf(-2.0 * nf)
            + 2.0 * a * b / (2.0 * nf + beta) * tmax.powf(-2.0 * nf - beta)
            + b * b / (2.0 * nf + 2.0 * beta) * tmax.powf(-2.0 * nf - 2.0 * beta);
        let ball = unit_ball_volume(n);
        let d = self
            .jump_points
            .iter()
            .map(|p| dist(x, p))
            .fold(f64::INFINITY, f64::min);
        let amp = (tc.jump * tc.phi_l1).powi(2);
        let lnp = |r: f64| if r > 1.0 { r.ln() } else { 0.0 };
        let (large, small) = match op {
            TailOp::S { gamma } => {
                let v = ball * gamma.powf(nf);
                (v * big, if d == 0.0 { f64::INFINITY } else { amp * v * lnp(tmin * (1.0 + gamma) / d) })
            }
            TailOp::G => (big, if d == 0.0 { f64::INFINITY } else { amp * lnp(tmin / d) }),
            TailOp::GStar { lambda } => {
                let e = lambda * nf;
                let c = kernel_mass(n, lambda);
                let small = if d == 0.0 {
                    f64::INFINITY
                } else if d >= 2.0 * tmin {
                    (2.0 * tmin / d).powf(e) / e
                } else {
                    1.0 / e + lnp(2.0 * tmin / d)
                };
                (c * big, amp * tc.jump_faces as f64 * ball * small)
            }
        };
        TailEstimate { small_t: small, large_t: large }
    }

    pub fn header(&self) -> CacheHeader {
        let n = self.dim();
        CacheHeader {
            hash: self.hash.clone(),
            beta: self.tc.beta(),
            test_class: *self.tc.params(),
            quadrature: self.quad,
            anchor: (0..n).map(|d| self.anchor[d] as f64 * 0.5 * self.h()).collect(),
        }
    }

    /// CSV of filled entries (`level, t, y..., value`) behind a JSON header line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.dim();
        let mut out = String::new();
        writeln!(out, "# {}", serde_json::to_string(&self.header())?).unwrap();
        out.push_str(if n == 1 { "level,t,y,value\n" } else { "level,t,y0,y1,value\n" });
        for k in 0..self.levels.len() {
            for idx in 0..self.levels[k].len() {
                let v = self.levels[k].values[idx];
                if v.is_nan() {
                    continue;
                }
                let y = self.entry_point(k, idx);
                write!(out, "{k},{:e},", self.levels[k].t).unwrap();
                for c in &y[..n] {
                    write!(out, "{c},").unwrap();
                }
                writeln!(out, "{v:e}").unwrap();
            }
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reload a cache for `f`; the stored hash and parameters must match.
    pub fn load(path: &Path, f: &GridFunction, tc: &TestClassGrid) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty cache file".into()))??;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse("missing cache header".into()))?;
        let header: CacheHeader = serde_json::from_str(json)?;
        let found = grid_hash(f);
        if header.hash != found {
            return Err(Error::HashMismatch { expected: header.hash, found });
        }
        if header.test_class != *tc.params() {
            return Err(Error::Parse("cache was built with a different test class".into()));
        }
        let mut cache = if header.anchor.len() == f.dim() {
            Self::with_anchor(f, tc, header.quadrature, &header.anchor)?
        } else {
            Self::new(f, tc, header.quadrature)?
        };
        let n = f.dim();
        lines.next();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != n + 3 {
                return Err(Error::Parse(format!("wrong column count: {line}")));
            }
            let k: usize = cols[0].parse().map_err(|_| Error::Parse(line.clone()))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(line.clone()));
            let value = parse(cols[n + 2])?;
            if k >= cache.levels.len() {
                return Err(Error::Parse(format!("level out of range: {line}")));
            }
            let mut idx = 0usize;
            for d in 0..n {
                let y = parse(cols[2 + d])?;
                let j = cache.lattice_pos(k, d, y).round() as i64;
                let lv = &cache.levels[k];
                if j < 0 || j as usize >= lv.count[d] {
                    return Err(Error::Parse(format!("entry off the lattice: {line}")));
                }
                idx = idx * lv.count[d] + j as usize;
            }
            cache.levels[k].values[idx] = value;
        }
        Ok(cache)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailOp {
    S { gamma: f64 },
    G,
    GStar { lambda: f64 },
}

/// Squared-operator contributions outside `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
pub struct TailEstimate {
    pub small_t: f64,
    pub large_t: f64,
}

impl TailEstimate {
    pub fn total(&self) -> f64 {
        self.small_t + self.large_t
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        _ => std::f64::consts::PI,
    }
}

/// `int_{R^n} (1 + |u|)^{-lambda n} du`.
fn kernel_mass(n: usize, lambda: f64) -> f64 {
    let e = lambda * n as f64;
    match n {
        1 => 2.0 / (e - 1.0),
        _ => 2.0 * std::f64::consts::PI / ((e - 1.0) * (e - 2.0)).max(1e-300),
    }
}

fn tail_constants(f: &GridFunction, beta: f64) -> (Vec<Vec<f64>>, TailConstants) {
    let n = f.dim();
    let h = f.spacing();
    let vol = f.cell_volume();
    let mut center = vec![0.0; n];
    if let Some(b) = f.nonzero_box() {
        for d in 0..n {
            center[d] = 0.5 * (f.axis_coord(b[d].0) + f.axis_coord(b[d].1));
        }
    }
    let mut moment = 0.0;
    let mut jump: f64 = 0.0;
    let mut points = Vec::new();
    let samples = f.samples();
    let per = f.nodes_per_axis();
    for idx in 0..f.len() {
        let v = samples[idx];
        let x = f.coords(idx);
        if v != 0.0 {
            // farthest point of the cell from the center bounds |x - c| on it
            let r = dist(&x, &center) + 0.5 * h * (n as f64).sqrt();
            moment += v.abs() * r.powf(beta) * vol;
        }
        let m = f.multi_index(idx);
        for d in 0..n {
            // face between this cell and its successor along axis d
            let next = if m[d] + 1 < per {
                let mut mm = m;
                mm[d] += 1;
                samples[f.flat_index(&mm[..n])]
            } else {
                0.0
            };
            let prev_edge = m[d] == 0 && v != 0.0;
            if next != v {
                jump = jump.max((next - v).abs());
                let mut p = x.clone();
                p[d] += 0.5 * h;
                points.push(p);
            }
            if prev_edge {
                jump = jump.max(v.abs());
                let mut p = x.clone();
                p[d] -= 0.5 * h;
                points.push(p);
            }
        }
    }
    let phi_l1 = match n {
        1 => 2.0 / (1.0 + beta),
        _ => 2.0 * std::f64::consts::PI / ((1.0 + beta) * (2.0 + beta)),
    };
    let faces = points.len();
    (
        points,
        TailConstants { mass: f.integral().abs(), moment, jump, phi_l1, jump_faces: faces },
    )
}
