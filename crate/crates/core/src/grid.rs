//! Uniform midpoint grids on `[-L, L]^n`, dyadic shells and weighted norms.
//!
//! Node `i` along an axis sits at `x_i = -L + (i + 1/2) h`. Coordinates are
//! also kept as integer half-units `p = 2i + 1 - N` (so `x = p h / 2`) which
//! makes translations, dilations and shell membership exact.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::ceil_log2;
use crate::weights::{norm, PowerWeight};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    h: f64,
    extent: f64,
    nodes: usize,
    samples: Vec<f64>,
}

/// Header written in front of the CSV sample listing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridHeader {
    pub n: usize,
    pub h: f64,
    #[serde(rename = "L")]
    pub extent: f64,
    pub support_radius: f64,
}

impl GridFunction {
    /// The zero function. `2L / h` must be a whole number.
    pub fn zeros(n: usize, h: f64, extent: f64) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return invalid("only n = 1 and n = 2 are supported");
        }
        if !(h > 0.0 && extent > 0.0) {
            return invalid("spacing and extent must be positive");
        }
        let count = 2.0 * extent / h;
        let nodes = count.round();
        if (count - nodes).abs() > 1e-9 * count || nodes < 1.0 {
            return invalid(format!("h = {h} does not divide 2L = {}", 2.0 * extent));
        }
        let nodes = nodes as usize;
        let len = nodes.checked_pow(n as u32).ok_or_else(|| {
            Error::InvalidParameter("grid too large".into())
        })?;
        Ok(Self { n, h, extent, nodes, samples: vec![0.0; len] })
    }

    pub fn from_fn(n: usize, h: f64, extent: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut g = Self::zeros(n, h, extent)?;
        let mut x = vec![0.0; n];
        for idx in 0..g.samples.len() {
            g.coords_into(idx, &mut x);
            g.samples[idx] = f(&x);
        }
        Ok(g)
    }

    pub fn from_samples(n: usize, h: f64, extent: f64, samples: Vec<f64>) -> Result<Self> {
        let mut g = Self::zeros(n, h, extent)?;
        if samples.len() != g.samples.len() {
            return invalid(format!(
                "expected {} samples, got {}",
                g.samples.len(),
                samples.len()
            ));
        }
        g.samples = samples;
        Ok(g)
    }

    /// Same lattice, all samples zero.
    pub fn zeros_like(&self) -> Self {
        Self { samples: vec![0.0; self.samples.len()], ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    /// Half-unit coordinate of axis index `i`.
    pub fn half_unit(&self, i: usize) -> i64 {
        2 * i as i64 + 1 - self.nodes as i64
    }

    /// Axis index of a half-unit coordinate, if it is a node.
    pub fn axis_index(&self, p: i64) -> Option<usize> {
        let twice = p + self.nodes as i64 - 1;
        if twice < 0 || twice % 2 != 0 {
            return None;
        }
        let i = (twice / 2) as usize;
        (i < self.nodes).then_some(i)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        self.half_unit(i) as f64 * 0.5 * self.h
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        match self.n {
            1 => [idx, 0],
            _ => [idx / self.nodes, idx % self.nodes],
        }
    }

    pub fn flat_index(&self, ix: &[usize]) -> usize {
        match self.n {
            1 => ix[0],
            _ => ix[0] * self.nodes + ix[1],
        }
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.coords_into(idx, &mut x);
        x
    }

    pub fn coords_into(&self, idx: usize, x: &mut [f64]) {
        let m = self.multi_index(idx);
        for d in 0..self.n {
            x[d] = self.axis_coord(m[d]);
        }
    }

    /// Euclidean norm of node `idx`.
    pub fn radius(&self, idx: usize) -> f64 {
        let m = self.multi_index(idx);
        let hh = 0.5 * self.h;
        let mut s = 0.0;
        for d in 0..self.n {
            let x = self.half_unit(m[d]) as f64 * hh;
            s += x * x;
        }
        s.sqrt()
    }

    /// Index of the node at `x`, if `x` is exactly a node.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut ix = [0usize; 2];
        for d in 0..self.n {
            let p = x[d] / (0.5 * self.h);
            if p.fract() != 0.0 {
                return None;
            }
            ix[d] = self.axis_index(p as i64)?;
        }
        Some(self.flat_index(&ix[..self.n]))
    }

    /// Value of the piecewise-constant interpolant at an arbitrary point
    /// (zero outside the domain).
    pub fn value_at(&self, x: &[f64]) -> f64 {
        let mut ix = [0usize; 2];
        for d in 0..self.n {
            let c = ((x[d] + self.extent) / self.h).floor();
            if c < 0.0 || c >= self.nodes as f64 {
                return 0.0;
            }
            ix[d] = c as usize;
        }
        self.samples[self.flat_index(&ix[..self.n])]
    }

    pub fn cell_bounds(&self, idx: usize) -> (Vec<f64>, Vec<f64>) {
        let x = self.coords(idx);
        let lo = x.iter().map(|c| c - 0.5 * self.h).collect();
        let hi = x.iter().map(|c| c + 0.5 * self.h).collect();
        (lo, hi)
    }

    /// Smallest radius `r` such that every nonzero cell lies in `B(0, r)`.
    pub fn support_radius(&self) -> f64 {
        let hh = 0.5 * self.h;
        let mut r: f64 = 0.0;
        for (idx, v) in self.samples.iter().enumerate() {
            if *v != 0.0 {
                let m = self.multi_index(idx);
                let mut s = 0.0;
                for d in 0..self.n {
                    let far = (self.half_unit(m[d]).abs() + 1) as f64 * hh;
                    s += far * far;
                }
                r = r.max(s.sqrt());
            }
        }
        r
    }

    /// Per-axis inclusive index ranges of the nonzero samples.
    pub fn nonzero_box(&self) -> Option<[(usize, usize); 2]> {
        let mut b = [(usize::MAX, 0usize); 2];
        let mut any = false;
        for (idx, v) in self.samples.iter().enumerate() {
            if *v != 0.0 {
                any = true;
                let m = self.multi_index(idx);
                for d in 0..self.n {
                    b[d].0 = b[d].0.min(m[d]);
                    b[d].1 = b[d].1.max(m[d]);
                }
            }
        }
        any.then_some(b)
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            n: self.n,
            h: self.h,
            extent: self.extent,
            support_radius: self.support_radius(),
        }
    }

    pub fn same_lattice(&self, other: &GridFunction) -> bool {
        self.n == other.n && self.h == other.h && self.nodes == other.nodes
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut g = self.clone();
        g.samples.iter_mut().for_each(|v| *v *= c);
        g
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut g = self.clone();
        g.samples.iter_mut().for_each(|v| *v = f(*v));
        g
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Result<Self> {
        if !self.same_lattice(other) {
            return invalid("grid functions live on different lattices");
        }
        let mut g = self.clone();
        for (a, b) in g.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
        Ok(g)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum f_i h^n`.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.cell_volume()
    }

    /// Same samples on the smallest centred grid with the same nodes that
    /// still holds the support; `None` if no smaller aligned grid exists.
    pub fn cropped(&self) -> Option<Self> {
        let b = self.nonzero_box()?;
        let half = self.nodes / 2;
        // number of nodes kept on each side of the centre
        let mut keep = 1usize;
        for d in 0..self.n {
            let (lo, hi) = b[d];
            keep = keep.max(half.saturating_sub(lo)).max((hi + 1).saturating_sub(half));
        }
        if self.nodes % 2 != 0 || 2 * keep >= self.nodes {
            return None;
        }
        let off = half - keep;
        let extent = keep as f64 * self.h;
        let mut out = Self::zeros(self.n, self.h, extent).ok()?;
        let m = out.nodes;
        for idx in 0..out.samples.len() {
            let ix = out.multi_index(idx);
            let src: Vec<usize> = (0..self.n).map(|d| ix[d] + off).collect();
            out.samples[idx] = self.samples[self.flat_index(&src)];
        }
        debug_assert_eq!(m, 2 * keep);
        Some(out)
    }

    /// Shift by `x0`, which must be a lattice vector.
    pub fn translate(&self, x0: &[f64]) -> Result<Self> {
        let mut shift = [0i64; 2];
        for d in 0..self.n {
            let s = x0[d] / self.h;
            if s.fract() != 0.0 {
                return invalid("translation is not a lattice vector");
            }
            shift[d] = s as i64;
        }
        let mut out = self.zeros_like();
        for (idx, v) in self.samples.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let m = self.multi_index(idx);
            let mut ix = [0usize; 2];
            for d in 0..self.n {
                let j = m[d] as i64 + shift[d];
                if j < 0 || j >= self.nodes as i64 {
                    return Err(Error::DomainOverflow { extent: self.extent });
                }
                ix[d] = j as usize;
            }
            out.samples[self.flat_index(&ix[..self.n])] = *v;
        }
        Ok(out)
    }

    /// `x -> f(x / s)` for a power of two `s`; every new cell lies inside an
    /// old one, so the relocation is exact.
    pub fn dilate(&self, s: u32) -> Result<Self> {
        if !s.is_power_of_two() {
            return invalid("dilation factor must be a power of two");
        }
        let mut out = self.zeros_like();
        let sf = s as f64;
        let mut x = vec![0.0; self.n];
        for idx in 0..out.samples.len() {
            out.coords_into(idx, &mut x);
            x.iter_mut().for_each(|c| *c /= sf);
            out.samples[idx] = self.value_at(&x);
        }
        // anything that fell off the domain?
        let before = self.l1_norm() * sf.powi(self.n as i32);
        let after = out.l1_norm();
        if (before - after).abs() > 1e-12 * before.max(1e-300) {
            return Err(Error::DomainOverflow { extent: self.extent });
        }
        Ok(out)
    }

    /// Weight mass of every cell.
    pub fn cell_masses(&self, w: &PowerWeight) -> Vec<f64> {
        let mut lo = vec![0.0; self.n];
        let mut hi = vec![0.0; self.n];
        let hh = 0.5 * self.h;
        (0..self.samples.len())
            .map(|idx| {
                self.coords_into(idx, &mut lo);
                for d in 0..self.n {
                    hi[d] = lo[d] + hh;
                    lo[d] -= hh;
                }
                w.cell_mass(&lo, &hi)
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "# {}", serde_json::to_string(&self.header())?).unwrap();
        out.push_str(if self.n == 1 { "x,value\n" } else { "x,y,value\n" });
        for (idx, v) in self.samples.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let x = self.coords(idx);
            for c in &x {
                write!(out, "{c},").unwrap();
            }
            writeln!(out, "{v:e}").unwrap();
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty file".into()))??;
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse("missing JSON header".into()))?;
        let header: GridHeader = serde_json::from_str(json)?;
        let mut g = Self::zeros(header.n, header.h, header.extent)?;
        lines.next();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("{e}: {line}")))?;
            if vals.len() != g.n + 1 {
                return Err(Error::Parse(format!("wrong column count: {line}")));
            }
            let idx = g
                .node_at(&vals[..g.n])
                .ok_or_else(|| Error::Parse(format!("not a node: {line}")))?;
            g.samples[idx] = vals[g.n];
        }
        Ok(g)
    }
}

/// Where a node falls relative to the shells `k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShellSlot {
    /// `|x| <= 2^{k_min - 1}`
    Inner,
    Shell(i32),
    /// `|x| > 2^{k_max}`
    Outer,
}

/// Node-to-shell assignment, decided by the cell midpoint.
#[derive(Debug, Clone)]
pub struct ShellMap {
    pub k_min: i32,
    pub k_max: i32,
    pub assignment: Vec<ShellSlot>,
}

/// Shell index `k` with `2^{k-1} < r <= 2^k`.
pub fn shell_index(r: f64) -> i32 {
    ceil_log2(r)
}

impl ShellMap {
    pub fn new(grid: &GridFunction, k_min: i32, k_max: i32) -> Result<Self> {
        if k_min > k_max {
            return invalid("k_min must not exceed k_max");
        }
        let assignment = (0..grid.len())
            .map(|idx| Self::slot(grid.radius(idx), k_min, k_max))
            .collect();
        Ok(Self { k_min, k_max, assignment })
    }

    fn slot(r: f64, k_min: i32, k_max: i32) -> ShellSlot {
        if r == 0.0 {
            return ShellSlot::Inner;
        }
        let k = shell_index(r);
        if k < k_min {
            ShellSlot::Inner
        } else if k > k_max {
            ShellSlot::Outer
        } else {
            ShellSlot::Shell(k)
        }
    }

    pub fn shell_nodes(&self, k: i32) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, s)| **s == ShellSlot::Shell(k))
            .map(|(i, _)| i)
    }
}

/// Integration region for weighted norms.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Domain,
    Shell(i32),
    /// Nodes with `|x| <= 2^k` (the ball `B_k`).
    DyadicBall(i32),
    /// Nodes whose midpoint lies in the closed ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    fn contains(&self, grid: &GridFunction, idx: usize) -> bool {
        match self {
            Region::Domain => true,
            Region::Shell(k) => {
                let r = grid.radius(idx);
                r > 0.0 && shell_index(r) == *k
            }
            Region::DyadicBall(k) => grid.radius(idx) <= 2f64.powi(*k),
            Region::Ball { center, radius } => {
                let x = grid.coords(idx);
                let d: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                norm(&d) <= *radius
            }
        }
    }
}

/// `(sum |f_i|^q w(cell_i))^{1/q}` over the nodes of `region`. Cell masses
/// are exact interval masses in one dimension and analytic near the origin
/// in two.
pub fn weighted_lq_norm(f: &GridFunction, w: &PowerWeight, q: f64, region: &Region) -> Result<f64> {
    if !(q > 1.0) {
        return invalid("q must exceed 1");
    }
    if w.dim() != f.dim() {
        return invalid("weight and grid dimensions differ");
    }
    let hh = 0.5 * f.h;
    let mut lo = vec![0.0; f.n];
    let mut hi = vec![0.0; f.n];
    let mut s = 0.0;
    for (idx, v) in f.samples.iter().enumerate() {
        if *v == 0.0 || !region.contains(f, idx) {
            continue;
        }
        f.coords_into(idx, &mut lo);
        for d in 0..f.n {
            hi[d] = lo[d] + hh;
            lo[d] -= hh;
        }
        s += v.abs().powf(q) * w.cell_mass(&lo, &hi);
    }
    Ok(s.powf(1.0 / q))
}

/// `q`-th powers of the shell norms in one pass: `(inner, shells, outer)`.
pub fn shell_power_sums(
    f: &GridFunction,
    w: &PowerWeight,
    q: f64,
    map: &ShellMap,
) -> (f64, Vec<f64>, f64) {
    let masses = f.cell_masses(w);
    let mut inner = 0.0;
    let mut outer = 0.0;
    let mut shells = vec![0.0; (map.k_max - map.k_min + 1) as usize];
    for (idx, v) in f.samples.iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let c = v.abs().powf(q) * masses[idx];
        match map.assignment[idx] {
            ShellSlot::Inner => inner += c,
            ShellSlot::Outer => outer += c,
            ShellSlot::Shell(k) => shells[(k - map.k_min) as usize] += c,
        }
    }
    (inner, shells, outer)
}
