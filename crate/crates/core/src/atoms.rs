//! Central `(alpha, q, 0; w1, w2)`-atoms and restricted-type atoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{weighted_lq_norm, GridFunction, Region};
use crate::numerics::ceil_log2;
use crate::weights::PowerWeight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomParams {
    pub alpha: f64,
    pub q: f64,
    pub radius: f64,
    pub w1: PowerWeight,
    pub w2: PowerWeight,
    pub restricted: bool,
    /// vanishing-moment order; only 0 is supported
    #[serde(default)]
    pub s: u32,
}

impl AtomParams {
    pub fn dim(&self) -> usize {
        self.w1.dim()
    }

    /// Hypotheses of the boundedness theorems for smoothness `beta`:
    /// `n(1 - 1/q) <= alpha < n(1 - 1/q) + beta`, `q > 1`, `s = 0`.
    pub fn check(&self, beta: f64) -> Result<()> {
        let n = self.dim() as f64;
        if self.w1.dim() != self.w2.dim() {
            return invalid("w1 and w2 live in different dimensions");
        }
        if !(self.q > 1.0) {
            return Err(Error::ConfigViolation(format!("q = {} must exceed 1", self.q)));
        }
        let lo = n * (1.0 - 1.0 / self.q);
        if self.alpha < lo - 1e-12 || self.alpha >= lo + beta {
            return Err(Error::ConfigViolation(format!(
                "alpha = {} outside [{lo}, {}) for beta = {beta}",
                self.alpha,
                lo + beta
            )));
        }
        if self.s != 0 {
            return invalid("only s = 0 atoms are supported");
        }
        if !(self.radius > 0.0) {
            return invalid("atom radius must be positive");
        }
        if self.restricted && self.radius <= 1.0 {
            return invalid("restricted-type atoms need R > 1");
        }
        Ok(())
    }

    /// `w1(B(0, R))^{-alpha/n}`, the saturated size bound.
    pub fn target_norm(&self) -> f64 {
        self.w1.ball_mass(self.radius).powf(-self.alpha / self.dim() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub f: GridFunction,
    pub params: AtomParams,
    pub achieved_norm: f64,
    pub mean_residual: f64,
}

/// Certification values written next to an atom's samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSidecar {
    pub params: AtomParams,
    pub achieved_norm: f64,
    pub target_norm: f64,
    pub mean_residual: f64,
    pub support_radius: f64,
    pub k0: i32,
}

impl Atom {
    pub fn sidecar(&self) -> AtomSidecar {
        AtomSidecar {
            params: self.params,
            achieved_norm: self.achieved_norm,
            target_norm: self.params.target_norm(),
            mean_residual: self.mean_residual,
            support_radius: self.f.support_radius(),
            k0: k0_of(self.params.radius),
        }
    }
}

/// Cells lying entirely inside the closed ball `B(0, R)`.
fn support_cells(f: &GridFunction, radius: f64) -> Vec<usize> {
    let hh = 0.5 * f.spacing();
    let tol = 1e-12 * radius.max(1.0);
    (0..f.len())
        .filter(|&i| {
            let m = f.multi_index(i);
            // farthest point of the cell from the origin
            let far: f64 = (0..f.dim())
                .map(|d| {
                    let x = f.axis_coord(m[d]).abs() + hh;
                    x * x
                })
                .sum::<f64>()
                .sqrt();
            far <= radius + tol
        })
        .collect()
}

/// Remove the mean over the cells of `B(0, R)` by a uniform shift there.
pub fn remove_mean(profile: &GridFunction, radius: f64) -> Result<GridFunction> {
    if profile.support_radius() > radius * (1.0 + 1e-12) {
        return invalid(format!(
            "profile support radius {} exceeds R = {radius}",
            profile.support_radius()
        ));
    }
    let cells = support_cells(profile, radius);
    if cells.is_empty() {
        return invalid("no grid cell fits inside B(0, R)");
    }
    let s = profile.samples();
    let mean = cells.iter().map(|&i| s[i]).sum::<f64>() / cells.len() as f64;
    let mut out = profile.clone();
    {
        let o = out.samples_mut();
        for &i in &cells {
            o[i] -= mean;
        }
    }
    let scale = profile.max_abs();
    if out.max_abs() <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::DegenerateProfile);
    }
    Ok(out)
}

/// Mean-subtract and rescale so `||a||_{L^q_{w2}} = w1(B(0, R))^{-alpha/n}`.
pub fn make_atom(profile: &GridFunction, params: AtomParams) -> Result<Atom> {
    if params.dim() != profile.dim() {
        return invalid("atom weights and profile dimensions differ");
    }
    if params.restricted && params.radius <= 1.0 {
        return invalid("restricted-type atoms need R > 1");
    }
    let centered = remove_mean(profile, params.radius)?;
    let norm = weighted_lq_norm(&centered, &params.w2, params.q, &Region::Domain)?;
    let f = centered.scaled(params.target_norm() / norm);
    let achieved_norm = weighted_lq_norm(&f, &params.w2, params.q, &Region::Domain)?;
    Ok(Atom { mean_residual: f.integral(), achieved_norm, f, params })
}

/// Check support, vanishing mean and the saturated size condition.
pub fn validate_atom(atom: &Atom) -> Result<()> {
    let p = &atom.params;
    if atom.f.support_radius() > p.radius * (1.0 + 1e-12) {
        return invalid("atom support exceeds B(0, R)");
    }
    let l1 = atom.f.l1_norm();
    if atom.mean_residual.abs() > 1e-10 * l1 || atom.f.integral().abs() > 1e-10 * l1 {
        return invalid("atom mean does not vanish");
    }
    let target = p.target_norm();
    if ((atom.achieved_norm - target) / target).abs() > 1e-8 {
        return invalid("atom norm does not saturate the size bound");
    }
    if p.restricted && p.radius <= 1.0 {
        return invalid("restricted-type atoms need R > 1");
    }
    Ok(())
}

/// The `k0` with `2^{k0 - 2} < R <= 2^{k0 - 1}`.
pub fn k0_of(radius: f64) -> i32 {
    ceil_log2(radius) + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// two smooth bumps of opposite sign
    DoubleBump,
    /// cubic polynomial times a bump filling the ball
    PolyBump,
}

/// Smooth bump `(1 - r^2)^2` on the unit ball.
fn bump(r: f64) -> f64 {
    if r < 1.0 {
        let u = 1.0 - r * r;
        u * u
    } else {
        0.0
    }
}

/// Random profile supported in `B(0, R)`, before normalization.
pub fn random_profile(
    seed: u64,
    radius: f64,
    generator: Generator,
    n: usize,
    h: f64,
    extent: f64,
) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // nodes at distance >= inner vanish, so every support cell fits in B(0, R);
    // the shape does not depend on h once h is small against R
    let inner = (0.875 * radius).min(radius - 0.5 * h * (n as f64).sqrt());
    if inner <= 0.0 {
        return invalid("atom radius is below the grid resolution");
    }
    let profile = match generator {
        Generator::DoubleBump => {
            let mut bumps = Vec::new();
            for sign in [1.0, -1.0] {
                let r = rng.gen_range(0.5..0.8) * inner;
                let room = inner - r;
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * room / (n as f64).sqrt()).collect();
                let amp = sign * rng.gen_range(0.5..1.5);
                bumps.push((c, r, amp));
            }
            GridFunction::from_fn(n, h, extent, |x| {
                bumps
                    .iter()
                    .map(|(c, r, a)| {
                        let d = x.iter().zip(c).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
                        a * bump(d / r)
                    })
                    .sum()
            })?
        }
        Generator::PolyBump => {
            let coef: Vec<f64> = (0..4 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            GridFunction::from_fn(n, h, extent, |x| {
                let r = x.iter().map(|u| u * u).sum::<f64>().sqrt() / inner;
                if r >= 1.0 {
                    return 0.0;
                }
                let mut p = 0.0;
                for d in 0..n {
                    let u = x[d] / inner;
                    let c = &coef[4 * d..4 * d + 4];
                    p += c[0] + u * (c[1] + u * (c[2] + u * c[3]));
                }
                p * bump(r)
            })?
        }
    };
    Ok(profile)
}

/// Deterministic atom from a seed.
pub fn random_atom(
    seed: u64,
    params: AtomParams,
    generator: Generator,
    h: f64,
    extent: f64,
) -> Result<Atom> {
    let profile = random_profile(seed, params.radius, generator, params.dim(), h, extent)?;
    make_atom(&profile, params)
}
