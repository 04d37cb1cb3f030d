//! Dense bounded-variable primal simplex.
//!
//! Every constraint row gets a logical variable `r_i = a_i . x` carrying the
//! row bounds, so the problem becomes `max c.x` subject to `lo <= (x, r) <= hi`.
//! The solver keeps the condensed tableau `x_B = T x_N`; nonbasic variables
//! may rest at a bound or anywhere in between (free variables start at 0).

use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

/// `maximize c.x` subject to ranged rows `lo_i <= a_i.x <= hi_i` and
/// column bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    cols: usize,
    objective: Vec<f64>,
    rows: Vec<f64>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    col_lo: Vec<f64>,
    col_hi: Vec<f64>,
    max_iter: Option<usize>,
}

impl LinearProgram {
    /// `cols` variables, each in `[0, inf)` until bounds are set.
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            objective: vec![0.0; cols],
            rows: Vec::new(),
            row_lo: Vec::new(),
            row_hi: Vec::new(),
            col_lo: vec![0.0; cols],
            col_hi: vec![f64::INFINITY; cols],
            max_iter: None,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn num_rows(&self) -> usize {
        self.row_lo.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.cols);
        self.objective.copy_from_slice(c);
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.col_lo[j] = lo;
        self.col_hi[j] = hi;
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.col_lo[j], self.col_hi[j])
    }

    pub fn set_iteration_limit(&mut self, limit: usize) {
        self.max_iter = Some(limit);
    }

    /// `lo <= a.x <= hi`.
    pub fn add_range(&mut self, a: &[f64], lo: f64, hi: f64) {
        assert_eq!(a.len(), self.cols);
        self.rows.extend_from_slice(a);
        self.row_lo.push(lo);
        self.row_hi.push(hi);
    }

    pub fn add_leq(&mut self, a: &[f64], b: f64) {
        self.add_range(a, f64::NEG_INFINITY, b);
    }

    pub fn add_geq(&mut self, a: &[f64], b: f64) {
        self.add_range(a, b, f64::INFINITY);
    }

    pub fn add_eq(&mut self, a: &[f64], d: f64) {
        self.add_range(a, d, d);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_bounds(&self, i: usize) -> (f64, f64) {
        (self.row_lo[i], self.row_hi[i])
    }

    /// Largest violation of any row or column bound at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            worst = worst.max(self.col_lo[j] - x[j]).max(x[j] - self.col_hi[j]);
        }
        for i in 0..self.num_rows() {
            let act: f64 = self.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max(self.row_lo[i] - act).max(act - self.row_hi[i]);
        }
        worst
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &f64| !v.is_nan();
        if !self.objective.iter().all(|v| v.is_finite()) || !self.rows.iter().all(|v| v.is_finite()) {
            return invalid("LP data must be finite");
        }
        for (lo, hi) in self.col_lo.iter().zip(&self.col_hi).chain(self.row_lo.iter().zip(&self.row_hi)) {
            if !finite(lo) || !finite(hi) || lo > hi {
                return invalid("LP bounds must satisfy lo <= hi");
            }
        }
        Ok(())
    }

    /// Plain-text listing in the row-bound form used by the solver.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "maximize").unwrap();
        writeln!(s, "  {}", fmt_row(&self.objective)).unwrap();
        writeln!(s, "subject to").unwrap();
        for i in 0..self.num_rows() {
            writeln!(s, "  {} <= {} <= {}", self.row_lo[i], fmt_row(self.row(i)), self.row_hi[i]).unwrap();
        }
        writeln!(s, "bounds").unwrap();
        for j in 0..self.cols {
            writeln!(s, "  {} <= x{} <= {}", self.col_lo[j], j, self.col_hi[j]).unwrap();
        }
        s
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.validate()?;
        Simplex::new(self).run()
    }
}

fn fmt_row(a: &[f64]) -> String {
    let terms: Vec<String> = a
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| format!("{v:+} x{j}"))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" ")
    }
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    /// `m x n`, row-major
    t: Vec<f64>,
    /// reduced costs of the nonbasic columns
    d: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    value: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    scale: f64,
    iterations: usize,
    degenerate: usize,
    bland: bool,
    max_iter: usize,
}

enum Step {
    Moved,
    Unbounded,
    Done,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.num_rows();
        let n = lp.cols;
        let mut lo = lp.col_lo.clone();
        lo.extend_from_slice(&lp.row_lo);
        let mut hi = lp.col_hi.clone();
        hi.extend_from_slice(&lp.row_hi);
        let mut value = vec![0.0; n + m];
        for j in 0..n {
            value[j] = 0.0f64.clamp(lo[j], hi[j]);
        }
        let scale = lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let mut cost = vec![0.0; n + m];
        if scale > 0.0 {
            for j in 0..n {
                cost[j] = lp.objective[j] / scale;
            }
        }
        let mut s = Self {
            lp,
            m,
            n,
            t: lp.rows.clone(),
            d: vec![0.0; n],
            basis: (n..n + m).collect(),
            nonbasic: (0..n).collect(),
            value,
            lo,
            hi,
            cost,
            scale,
            iterations: 0,
            degenerate: 0,
            bland: false,
            max_iter: lp.max_iter.unwrap_or(50 * (m + n) + 1000),
        };
        s.recompute_basics();
        s
    }

    fn recompute_basics(&mut self) {
        let n = self.n;
        for r in 0..self.m {
            let row = &self.t[r * n..(r + 1) * n];
            let v: f64 = row.iter().zip(&self.nonbasic).map(|(a, &j)| a * self.value[j]).sum();
            self.value[self.basis[r]] = v;
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| (self.lo[b] - self.value[b]).max(self.value[b] - self.hi[b]).max(0.0))
            .sum()
    }

    fn phase2_costs(&mut self) {
        let n = self.n;
        for k in 0..n {
            self.d[k] = self.cost[self.nonbasic[k]];
        }
        for r in 0..self.m {
            let c = self.cost[self.basis[r]];
            if c != 0.0 {
                let row = &self.t[r * n..(r + 1) * n];
                for (d, a) in self.d.iter_mut().zip(row) {
                    *d += c * a;
                }
            }
        }
    }

    fn phase1_costs(&mut self) {
        let n = self.n;
        self.d.iter_mut().for_each(|d| *d = 0.0);
        for r in 0..self.m {
            let b = self.basis[r];
            let g = if self.value[b] < self.lo[b] - FEAS_TOL {
                1.0
            } else if self.value[b] > self.hi[b] + FEAS_TOL {
                -1.0
            } else {
                continue;
            };
            let row = &self.t[r * n..(r + 1) * n];
            for (d, a) in self.d.iter_mut().zip(row) {
                *d += g * a;
            }
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for k in 0..self.n {
            let j = self.nonbasic[k];
            let d = self.d[k];
            let dir = if d > OPT_TOL && self.value[j] < self.hi[j] - FEAS_TOL {
                1.0
            } else if d < -OPT_TOL && self.value[j] > self.lo[j] + FEAS_TOL {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                // smallest variable index
                if best.map_or(true, |(bk, _)| j < self.nonbasic[bk]) {
                    best = Some((k, dir));
                }
            } else if d.abs() > best_score {
                best_score = d.abs();
                best = Some((k, dir));
            }
        }
        best
    }

    /// One simplex step; `phase1` relaxes bounds on infeasible basics.
    fn step(&mut self, phase1: bool) -> Step {
        let Some((k, dir)) = self.choose_entering() else {
            return Step::Done;
        };
        let n = self.n;
        let j = self.nonbasic[k];
        let own = if dir > 0.0 { self.hi[j] - self.value[j] } else { self.value[j] - self.lo[j] };
        let mut theta = own;
        let mut leave: Option<(usize, f64)> = None;
        let mut leave_piv = 0.0;
        for r in 0..self.m {
            let a = self.t[r * n + k] * dir;
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let x = self.value[b];
            let (lim, target) = if a > 0.0 {
                if phase1 && x < self.lo[b] - FEAS_TOL {
                    ((self.lo[b] - x) / a, self.lo[b])
                } else if phase1 && x > self.hi[b] + FEAS_TOL {
                    continue;
                } else {
                    (((self.hi[b] - x) / a).max(0.0), self.hi[b])
                }
            } else if phase1 && x > self.hi[b] + FEAS_TOL {
                ((x - self.hi[b]) / -a, self.hi[b])
            } else if phase1 && x < self.lo[b] - FEAS_TOL {
                continue;
            } else {
                (((x - self.lo[b]) / -a).max(0.0), self.lo[b])
            };
            if !lim.is_finite() {
                continue;
            }
            let better = match leave {
                None => lim < theta,
                Some((lr, _)) => {
                    let tie = (lim - theta).abs() <= 1e-12 * (1.0 + theta.abs());
                    if tie {
                        if self.bland {
                            b < self.basis[lr]
                        } else {
                            a.abs() > leave_piv
                        }
                    } else {
                        lim < theta
                    }
                }
            };
            if better {
                theta = lim;
                leave = Some((r, target));
                leave_piv = a.abs();
            }
        }
        if theta.is_infinite() {
            return Step::Unbounded;
        }
        self.iterations += 1;
        if theta <= 1e-12 {
            self.degenerate += 1;
            if self.degenerate > 5 * (self.m + self.n) {
                self.bland = true;
            }
        }
        // move along the edge
        if theta > 0.0 {
            self.value[j] += dir * theta;
            for r in 0..self.m {
                let a = self.t[r * n + k];
                if a != 0.0 {
                    self.value[self.basis[r]] += a * dir * theta;
                }
            }
        }
        match leave {
            None => {
                // bound flip
                self.value[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
            Some((r, target)) => {
                let b = self.basis[r];
                self.pivot(r, k);
                self.value[b] = target;
            }
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let n = self.n;
        let p = self.t[r * n + k];
        let inv = 1.0 / p;
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v *= -inv;
            }
            row[k] = inv;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            let f = row[k];
            if f == 0.0 {
                continue;
            }
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v += f * pr;
            }
            row[k] = f * inv;
        }
        let f = self.d[k];
        if f != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(&pivot_row) {
                *v += f * pr;
            }
            self.d[k] = f * inv;
        }
        std::mem::swap(&mut self.basis[r], &mut self.nonbasic[k]);
    }

    fn objective_value(&self) -> f64 {
        self.lp.value_at(&self.value[..self.n])
    }

    fn run(mut self) -> Result<LpSolution> {
        // phase 1
        loop {
            if self.infeasibility() <= FEAS_TOL {
                break;
            }
            if self.iterations >= self.max_iter {
                return Err(Error::IterationLimit { best_value: f64::NEG_INFINITY });
            }
            self.phase1_costs();
            match self.step(true) {
                Step::Moved => {}
                Step::Done | Step::Unbounded => {
                    self.recompute_basics();
                    if self.infeasibility() <= FEAS_TOL {
                        break;
                    }
                    return Ok(LpSolution {
                        status: LpStatus::Infeasible,
                        value: f64::NAN,
                        point: self.value[..self.n].to_vec(),
                        iterations: self.iterations,
                    });
                }
            }
        }
        self.recompute_basics();
        self.degenerate = 0;
        self.bland = false;
        if self.scale > 0.0 {
            self.phase2_costs();
            loop {
                if self.iterations >= self.max_iter {
                    self.recompute_basics();
                    return Err(Error::IterationLimit { best_value: self.objective_value() });
                }
                match self.step(false) {
                    Step::Moved => {}
                    Step::Done => break,
                    Step::Unbounded => {
                        return Ok(LpSolution {
                            status: LpStatus::Unbounded,
                            value: f64::INFINITY,
                            point: self.value[..self.n].to_vec(),
                            iterations: self.iterations,
                        });
                    }
                }
            }
            self.recompute_basics();
        }
        let point = self.value[..self.n].to_vec();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value: self.lp.value_at(&point),
            point,
            iterations: self.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_variable() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[1.0]);
        lp.add_leq(&[1.0], 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_variables() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 1.0]);
        lp.add_leq(&[1.0, 0.0], 1.0);
        lp.add_leq(&[0.0, 1.0], 2.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn detects_unbounded_and_infeasible() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 0.0]);
        lp.add_leq(&[0.0, 1.0], 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);

        let mut lp = LinearProgram::new(1);
        lp.set_objective(&[1.0]);
        lp.add_geq(&[1.0], 2.0);
        lp.add_leq(&[1.0], 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn phase_one_finds_a_start() {
        // x + y >= 2, x - y = 0.5, x,y in [0, 3]; maximize -x - 2y
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[-1.0, -2.0]);
        lp.add_geq(&[1.0, 1.0], 2.0);
        lp.add_eq(&[1.0, -1.0], 0.5);
        lp.set_bounds(0, 0.0, 3.0);
        lp.set_bounds(1, 0.0, 3.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.point[0] - 1.25).abs() < 1e-9 && (s.point[1] - 0.75).abs() < 1e-9);
        assert!(lp.violation(&s.point) < 1e-9);
    }

    #[test]
    fn free_variables_and_ranges() {
        // max x - y with |x - y| <= 1, x,y free, x + y = 0
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, -1.0]);
        for j in 0..2 {
            lp.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
        }
        lp.add_range(&[1.0, -1.0], -1.0, 1.0);
        lp.add_eq(&[1.0, 1.0], 0.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.point[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_reports_lower_bound() {
        let mut lp = LinearProgram::new(3);
        lp.set_objective(&[1.0, 1.0, 1.0]);
        for j in 0..3 {
            lp.set_bounds(j, 0.0, 1.0);
            let mut a = [0.0; 3];
            a[j] = 1.0;
            lp.add_leq(&a, 0.5);
        }
        lp.set_iteration_limit(1);
        match lp.solve() {
            Err(Error::IterationLimit { best_value }) => assert!(best_value <= 1.5 + 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dump_lists_every_row() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(&[1.0, 0.0]);
        lp.add_leq(&[1.0, 2.0], 3.0);
        let text = lp.dump();
        assert!(text.contains("+1 x0 +2 x1 <= 3"));
        assert!(text.contains("0 <= x1 <= inf"));
    }

    #[test]
    fn degenerate_cycle_prone_problem_terminates() {
        // Beale's example
        let mut lp = LinearProgram::new(4);
        lp.set_objective(&[0.75, -150.0, 0.02, -6.0]);
        lp.add_leq(&[0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_leq(&[0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_leq(&[0.0, 0.0, 1.0, 0.0], 1.0);
        let s = lp.solve().unwrap();
        assert!((s.value - 0.05).abs() < 1e-9, "{}", s.value);
    }

    #[test]
    fn scaling_objective_scales_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lp = LinearProgram::new(5);
        for j in 0..5 {
            lp.set_bounds(j, -1.0, 1.0);
        }
        for _ in 0..8 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            lp.add_leq(&a, rng.gen_range(0.1..1.0));
        }
        let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        lp.set_objective(&c);
        let base = lp.solve().unwrap().value;
        for s in [0.001, 3.0, 1e4] {
            let cs: Vec<f64> = c.iter().map(|v| v * s).collect();
            lp.set_objective(&cs);
            let v = lp.solve().unwrap().value;
            assert!((v - s * base).abs() <= 1e-10 * s.max(1.0) * base.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Boxes cut by ranged rows around the origin: the optimum is feasible
        /// and beats every feasible probe point.
        #[test]
        fn optimum_dominates_feasible_points(
            seed in 0u64..10_000,
            m in 2usize..7,
            rows in 1usize..6,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut lp = LinearProgram::new(m);
            for j in 0..m {
                lp.set_bounds(j, -rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0));
            }
            for _ in 0..rows {
                let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                lp.add_range(&a, -rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0));
            }
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            lp.set_objective(&c);
            let sol = lp.solve().unwrap();
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!(lp.violation(&sol.point) <= 1e-9);
            prop_assert!((lp.value_at(&sol.point) - sol.value).abs() <= 1e-9);
            for _ in 0..200 {
                let x: Vec<f64> = (0..m).map(|j| {
                    let (lo, hi) = lp.bounds(j);
                    rng.gen_range(lo..hi)
                }).collect();
                if lp.violation(&x) == 0.0 {
                    prop_assert!(lp.value_at(&x) <= sol.value + 1e-9);
                }
            }
        }
    }
}
