//! Weighted Herz norms from per-shell `L^q_{w2}` norms.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{shell_power_sums, weighted_lq_norm, GridFunction, Region, ShellMap, ShellSlot};
use crate::numerics::linear_fit;
use crate::weights::PowerWeight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerzParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub w1: PowerWeight,
    pub w2: PowerWeight,
    pub k_min: i32,
    pub k_max: i32,
    /// `true` for the homogeneous space, `false` for the version built on `B_0`
    pub homogeneous: bool,
}

impl HerzParams {
    pub fn check(&self, f: &GridFunction) -> Result<()> {
        if !(self.p > 0.0) || !(self.q > 1.0) {
            return invalid("Herz norms need p > 0 and q > 1");
        }
        if self.w1.dim() != f.dim() || self.w2.dim() != f.dim() {
            return invalid("weight and grid dimensions differ");
        }
        if self.k_min >= self.k_max {
            return invalid("k_min must be below k_max");
        }
        if !self.homogeneous && (self.k_min > 1 || self.k_max < 1) {
            return invalid("the non-homogeneous norm needs k_min <= 1 <= k_max");
        }
        if 2f64.powi(self.k_max) > f.extent() * (1.0 + 1e-12) {
            return Err(Error::DomainOverflow { extent: 2f64.powi(self.k_max) });
        }
        Ok(())
    }

    /// `w1(B_k)^{alpha/n}`.
    pub fn ball_factor(&self, k: i32) -> f64 {
        self.w1.ball_mass(2f64.powi(k)).powf(self.alpha / self.w1.dim() as f64)
    }

    /// Exponent `e` with `w1(B_k)^{alpha/n} w2(C_k)^{1/q} ~ 2^{k e}`.
    pub fn size_exponent(&self) -> f64 {
        let n = self.w1.dim() as f64;
        (n + self.w1.exponent()) * self.alpha / n + (n + self.w2.exponent()) / self.q
    }

    /// First shell index carrying its own term.
    pub fn first_shell(&self) -> i32 {
        if self.homogeneous {
            self.k_min
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShellTerm {
    pub k: i32,
    /// `w1(B_k)^{alpha/n} ||f chi_k||_{L^q_{w2}}`; for `k = 0` in the
    /// non-homogeneous norm the ball `B_0` replaces the shell.
    pub term: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HerzNormReport {
    pub params: HerzParams,
    pub per_shell: Vec<ShellTerm>,
    pub total: f64,
    pub inner_tail_bound: f64,
    pub outer_tail_bound: f64,
}

impl HerzNormReport {
    pub const CSV_HEADER: &'static str = "k,term,noise";

    pub fn csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for t in &self.per_shell {
            s.push_str(&format!("{},{:e},{:e}\n", t.k, t.term, t.noise));
        }
        s
    }

    /// Multiply every term by `|c|`; Herz norms are absolutely homogeneous.
    pub fn scaled(&self, c: f64) -> Self {
        let c = c.abs();
        let mut out = self.clone();
        for t in &mut out.per_shell {
            t.term *= c;
            t.noise *= c;
        }
        out.total *= c;
        out.inner_tail_bound *= c;
        out.outer_tail_bound *= c;
        out
    }

    pub fn term(&self, k: i32) -> Option<f64> {
        self.per_shell.iter().find(|t| t.k == k).map(|t| t.term)
    }

    /// Upper bound on the truncation error relative to the total.
    pub fn relative_tail(&self) -> f64 {
        (self.inner_tail_bound + self.outer_tail_bound) / self.total
    }
}

/// Sum of `p`-th powers of a geometric sequence `r * 2^{-s j}`, `j >= 1`,
/// returned as a `p`-th root; infinite when `s <= 0`.
fn geometric_tail(r: f64, s: f64, p: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = 2f64.powf(-s * p);
    r * (ratio / (1.0 - ratio)).powf(1.0 / p)
}

/// Herz norm of `f` with shells `k_min..=k_max`. `noise`, when present, is a
/// per-node error bound propagated to per-shell terms.
pub fn herz_norm(f: &GridFunction, params: &HerzParams, noise: Option<&GridFunction>) -> Result<HerzNormReport> {
    params.check(f)?;
    if let Some(e) = noise {
        if !e.same_lattice(f) {
            return invalid("noise field lives on a different lattice");
        }
    }
    let first = params.first_shell();
    let map = ShellMap::new(f, first.max(params.k_min), params.k_max)?;
    let (_, sums, _) = shell_power_sums(f, &params.w2, params.q, &map);
    let noise_sums = noise.map(|e| shell_power_sums(e, &params.w2, params.q, &map).1);
    let mut per_shell = Vec::new();
    for k in map.k_min..=map.k_max {
        let i = (k - map.k_min) as usize;
        if !params.homogeneous && k <= 0 {
            continue;
        }
        let c = params.ball_factor(k);
        per_shell.push(ShellTerm {
            k,
            term: c * sums[i].powf(1.0 / params.q),
            noise: noise_sums.as_ref().map_or(0.0, |s| c * s[i].powf(1.0 / params.q)),
        });
    }
    let inner_tail_bound = if params.homogeneous {
        inner_tail(f, params, &map)
    } else {
        let c = params.ball_factor(0);
        let b0 = weighted_lq_norm(f, &params.w2, params.q, &Region::DyadicBall(0))?;
        let e0 = match noise {
            Some(e) => weighted_lq_norm(e, &params.w2, params.q, &Region::DyadicBall(0))?,
            None => 0.0,
        };
        per_shell.insert(0, ShellTerm { k: 0, term: c * b0, noise: c * e0 });
        0.0
    };
    let total = per_shell.iter().map(|t| t.term.powf(params.p)).sum::<f64>().powf(1.0 / params.p);
    let outer_tail_bound = outer_tail(&per_shell, params.p);
    Ok(HerzNormReport { params: *params, per_shell, total, inner_tail_bound, outer_tail_bound })
}

/// Shells below `k_min` bounded by the sup of `|f|` near the origin times the
/// exact shell sizes, summed in closed form.
fn inner_tail(f: &GridFunction, params: &HerzParams, map: &ShellMap) -> f64 {
    let sup = f
        .samples()
        .iter()
        .zip(&map.assignment)
        .filter(|(_, s)| **s == ShellSlot::Inner)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    let k = params.k_min - 1;
    let r = params.ball_factor(k) * sup * params.w2.shell_mass(k).powf(1.0 / params.q);
    // the k_min - 1 term itself plus the geometric series below it
    let s = params.size_exponent();
    if s <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = 2f64.powf(-s * params.p);
    r * (1.0 / (1.0 - ratio)).powf(1.0 / params.p)
}

/// Extrapolate the last four shells geometrically.
fn outer_tail(terms: &[ShellTerm], p: f64) -> f64 {
    let last: Vec<&ShellTerm> = terms.iter().rev().take(4).filter(|t| t.term > 0.0).collect();
    let Some(top) = last.first() else { return 0.0 };
    if last.len() < 2 {
        return f64::INFINITY;
    }
    let ks: Vec<f64> = last.iter().map(|t| t.k as f64).collect();
    let ls: Vec<f64> = last.iter().map(|t| t.term.log2()).collect();
    let (slope, _) = linear_fit(&ks, &ls).expect("distinct shells");
    geometric_tail(top.term, -slope, p)
}

/// Least-squares slope of `log2 term` against `k` over shells `k > k_from`
/// whose term clears ten times its noise.
pub fn shell_decay_fit(report: &HerzNormReport, k_from: i32) -> Result<f64> {
    let (ks, ls): (Vec<f64>, Vec<f64>) = report
        .per_shell
        .iter()
        .filter(|t| t.k > k_from && t.term > 0.0 && t.term > 10.0 * t.noise)
        .map(|t| (t.k as f64, t.term.log2()))
        .unzip();
    if ks.len() < 4 {
        return Err(Error::InsufficientShells { needed: 4, found: ks.len() });
    }
    Ok(linear_fit(&ks, &ls).expect("distinct shells").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn leb(n: usize) -> PowerWeight {
        PowerWeight::lebesgue(n)
    }

    fn params(alpha: f64, p: f64) -> HerzParams {
        HerzParams { alpha, p, q: 2.0, w1: leb(1), w2: leb(1), k_min: -4, k_max: 5, homogeneous: true }
    }

    #[test]
    fn indicator_of_unit_ball() {
        // chi_{B(0,1)}: only shells k <= 0 carry mass; shell k has length 2^k
        let f = GridFunction::from_fn(1, 1.0 / 64.0, 32.0, |x| f64::from(x[0].abs() < 1.0)).unwrap();
        let p = params(0.25, 1.0);
        let r = herz_norm(&f, &p, None).unwrap();
        let mut expect = 0.0;
        for k in -4..=0 {
            let b = 2f64.powf(k as f64 + 1.0).powf(0.25);
            expect += b * 2f64.powf(k as f64).sqrt();
        }
        assert!((r.total - expect).abs() < 1e-12 * expect, "{} vs {expect}", r.total);
        assert_eq!(r.term(3), Some(0.0));
        assert!(r.outer_tail_bound == 0.0);
        // inner: sup 1, shell -5 term, geometric ratio 2^{-(0.25+0.5)}
        let e = 0.75f64;
        let r5 = 2f64.powf(-4.0).powf(0.25) * 2f64.powf(-5.0).sqrt();
        let expect_tail = r5 / (1.0 - 2f64.powf(-e));
        assert!((r.inner_tail_bound - expect_tail).abs() < 1e-12);
    }

    #[test]
    fn power_law_decay_is_recovered() {
        let f = GridFunction::from_fn(1, 1.0 / 16.0, 256.0, |x| {
            let r = x[0].abs();
            if r > 1.0 {
                r.powf(-2.0)
            } else {
                0.0
            }
        })
        .unwrap();
        let mut p = params(0.5, 2.0);
        p.k_min = -2;
        p.k_max = 8;
        let r = herz_norm(&f, &p, None).unwrap();
        // alpha - 2 + 1/q = -1
        let s = shell_decay_fit(&r, 2).unwrap();
        assert!((s + 1.0).abs() < 0.01, "{s}");
        // tail extrapolation is of the order of the last term
        let last = r.per_shell.last().unwrap().term;
        assert!(r.outer_tail_bound > 0.5 * last && r.outer_tail_bound < 2.0 * last);
    }

    #[test]
    fn weighted_decay_exponent() {
        let w = PowerWeight::new(-0.5, 1).unwrap();
        let f = GridFunction::from_fn(1, 1.0 / 16.0, 256.0, |x| {
            let r = x[0].abs();
            if r > 1.0 {
                r.powf(-2.0)
            } else {
                0.0
            }
        })
        .unwrap();
        let p = HerzParams { w1: w, w2: w, k_min: -2, k_max: 8, ..params(0.5, 1.0) };
        assert!((p.size_exponent() - 0.5).abs() < 1e-15);
        let r = herz_norm(&f, &p, None).unwrap();
        let s = shell_decay_fit(&r, 2).unwrap();
        assert!((s - (p.size_exponent() - 2.0)).abs() < 0.01, "{s}");
    }

    #[test]
    fn non_homogeneous_uses_the_unit_ball() {
        let f = GridFunction::from_fn(1, 1.0 / 16.0, 16.0, |x| f64::from(x[0].abs() < 3.0)).unwrap();
        let p = HerzParams { homogeneous: false, k_min: 0, k_max: 4, ..params(0.5, 1.0) };
        let r = herz_norm(&f, &p, None).unwrap();
        assert_eq!(r.per_shell[0].k, 0);
        // B_0 = [-1, 1]: |B_0|^{1/2} * sqrt(2)
        assert!((r.per_shell[0].term - 2.0).abs() < 1e-12);
        assert_eq!(r.inner_tail_bound, 0.0);
        // shell 1: length 2, |B_1| = 4
        assert!((r.term(1).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn first_shell_indicator_is_the_same_in_both_variants() {
        let f = GridFunction::from_fn(1, 1.0 / 16.0, 16.0, |x| f64::from(x[0].abs() > 1.0 && x[0].abs() < 2.0)).unwrap();
        for alpha in [0.5, 0.75] {
            let expect = 4f64.powf(alpha) * 2f64.sqrt();
            let hom = herz_norm(&f, &HerzParams { k_min: -3, k_max: 4, ..params(alpha, 1.0) }, None).unwrap();
            let non = herz_norm(&f, &HerzParams { homogeneous: false, k_min: 0, k_max: 4, ..params(alpha, 2.0) }, None)
                .unwrap();
            assert!((hom.total - expect).abs() < 1e-12 * expect, "{}", hom.total);
            assert!((non.total - expect).abs() < 1e-12 * expect, "{}", non.total);
        }
    }

    #[test]
    fn insufficient_shells() {
        let f = GridFunction::from_fn(1, 0.25, 16.0, |x| f64::from(x[0].abs() < 1.0)).unwrap();
        let r = herz_norm(&f, &params(0.5, 1.0).clone_with_kmax(4), None).unwrap();
        assert!(matches!(shell_decay_fit(&r, 0), Err(Error::InsufficientShells { .. })));
    }

    #[test]
    fn noise_filters_shells() {
        let f = GridFunction::from_fn(1, 0.25, 16.0, |x| 1.0 / (1.0 + x[0].abs())).unwrap();
        let noise = f.scaled(0.5);
        let r = herz_norm(&f, &params(0.5, 1.0).clone_with_kmax(4), Some(&noise)).unwrap();
        assert!(r.per_shell.iter().all(|t| (t.noise - 0.5 * t.term).abs() <= 1e-12 * t.term));
        assert!(shell_decay_fit(&r, -10).is_err());
    }

    #[test]
    fn overflowing_shells_are_rejected() {
        let f = GridFunction::zeros(1, 0.25, 8.0).unwrap();
        assert!(matches!(herz_norm(&f, &params(0.5, 1.0), None), Err(Error::DomainOverflow { .. })));
    }

    impl HerzParams {
        fn clone_with_kmax(mut self, k: i32) -> Self {
            self.k_max = k;
            self
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn p_triangle_inequality(
            a in proptest::collection::vec(-1.0f64..1.0, 128),
            b in proptest::collection::vec(-1.0f64..1.0, 128),
            p in 0.3f64..1.0,
        ) {
            let f = GridFunction::from_samples(1, 0.25, 16.0, a).unwrap();
            let g = GridFunction::from_samples(1, 0.25, 16.0, b).unwrap();
            let hp = HerzParams { p, k_min: -2, k_max: 4, ..params(0.5, p) };
            let nf = herz_norm(&f, &hp, None).unwrap().total;
            let ng = herz_norm(&g, &hp, None).unwrap().total;
            let ns = herz_norm(&f.axpy(1.0, &g).unwrap(), &hp, None).unwrap().total;
            prop_assert!(ns.powf(p) <= (nf.powf(p) + ng.powf(p)) * (1.0 + 1e-12));
        }

        #[test]
        fn truncation_is_monotone(a in proptest::collection::vec(-1.0f64..1.0, 128), p in 0.5f64..3.0) {
            let f = GridFunction::from_samples(1, 0.25, 16.0, a).unwrap();
            let mut last = 0.0;
            for k_max in 0..=4 {
                let hp = HerzParams { k_min: -2, k_max, ..params(0.5, p) };
                let t = herz_norm(&f, &hp, None).unwrap().total;
                prop_assert!(t >= last);
                last = t;
            }
        }

        #[test]
        fn homogeneity(c in -5.0f64..5.0, seed in 0u64..100) {
            let f = GridFunction::from_fn(1, 0.25, 16.0, |x| ((x[0] + seed as f64) * 1.3).sin()).unwrap();
            let hp = HerzParams { k_min: -2, k_max: 4, ..params(0.5, 1.5) };
            let r = herz_norm(&f, &hp, None).unwrap();
            let rc = herz_norm(&f.scaled(c), &hp, None).unwrap();
            prop_assert!((rc.total - c.abs() * r.total).abs() <= 1e-12 * (1.0 + r.total));
            prop_assert!((r.scaled(c).total - rc.total).abs() <= 1e-12 * (1.0 + r.total));
        }
    }
}
