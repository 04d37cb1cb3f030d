//! Operator images of atoms on whole grids, and atom families.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Operator};
use super::report::Timings;
use crate::atoms::{random_profile, remove_mean, Generator};
use crate::error::Result;
use crate::grid::{shell_index, weighted_lq_norm, GridFunction, Region};
use crate::herz::{herz_norm, HerzNormReport, HerzParams};
use crate::intrinsic::{ABetaCache, ConeQuadrature, TailOp, TestClassGrid};
use crate::weights::PowerWeight;

/// A mean-zero profile supported in `B(0, R)`; atoms are its multiples.
#[derive(Debug, Clone)]
pub struct Profile {
    pub f: GridFunction,
    pub radius: f64,
    pub generator: Generator,
    pub seed: u64,
}

impl Profile {
    /// Factor turning the profile into the atom for `(alpha, q; w1, w2)`.
    pub fn atom_scale(&self, alpha: f64, q: f64, w1: &PowerWeight, w2: &PowerWeight) -> Result<f64> {
        let n = self.f.dim() as f64;
        let target = w1.ball_mass(self.radius).powf(-alpha / n);
        Ok(target / weighted_lq_norm(&self.f, w2, q, &Region::Domain)?)
    }
}

/// Radii `2^e` for the configured exponent range, optionally only `R > 1`.
pub fn family_radii(cfg: &ExperimentConfig, restricted: bool) -> Vec<f64> {
    (cfg.atoms.r_min_exp..=cfg.atoms.r_max_exp)
        .filter(|e| !restricted || *e >= 1)
        .map(|e| 2f64.powi(e))
        .collect()
}

/// Atom `i` cycles generators fastest, then radii.
pub fn atom_family(cfg: &ExperimentConfig, h: f64, extent: f64, restricted: bool) -> Result<Vec<Profile>> {
    let radii = family_radii(cfg, restricted);
    let gens = &cfg.atoms.generators;
    let (count, offset) = if restricted {
        (cfg.atoms.restricted_count, 1000)
    } else {
        (cfg.atoms.count, 0)
    };
    if radii.is_empty() || gens.is_empty() {
        return crate::error::invalid("empty atom family specification");
    }
    (0..count)
        .map(|i| {
            let generator = gens[i % gens.len()];
            let radius = radii[(i / gens.len()) % radii.len()];
            let seed = cfg.seed.wrapping_add(offset + i as u64);
            let raw = random_profile(seed, radius, generator, cfg.n, h, extent)?;
            Ok(Profile { f: remove_mean(&raw, radius)?, radius, generator, seed })
        })
        .collect()
}

pub fn quadrature_for(cfg: &ExperimentConfig, f: &GridFunction) -> ConeQuadrature {
    ConeQuadrature {
        t_min: f.spacing(),
        t_max: cfg.quadrature.t_max_factor * f.extent(),
        levels_per_octave: cfg.quadrature.levels_per_octave,
        y_per_t: cfg.quadrature.y_per_t,
    }
}

/// A frozen cache with every entry filled.
pub fn full_cache(cfg: &ExperimentConfig, f: &GridFunction, tc: &TestClassGrid) -> Result<ABetaCache> {
    let mut cache = ABetaCache::new(f, tc, quadrature_for(cfg, f))?;
    cache.fill_all()?;
    cache.freeze();
    Ok(cache)
}

/// Evaluate one operator at `x`.
pub fn apply(cache: &ABetaCache, op: Operator, lambda: f64, x: &[f64]) -> Result<f64> {
    match op {
        Operator::G => cache.g_beta(x),
        Operator::S => cache.s_beta(x),
        Operator::GStar => cache.g_star(x, lambda),
    }
}

pub fn tail_op(op: Operator, lambda: f64) -> TailOp {
    match op {
        Operator::G => TailOp::G,
        Operator::S => TailOp::S { gamma: 1.0 },
        Operator::GStar => TailOp::GStar { lambda },
    }
}

/// Node indices where an operator is evaluated exactly: everything in one
/// dimension up to `per_side` nodes per shell side, evenly strided beyond.
/// Two-dimensional grids use every node.
pub fn sample_nodes(grid: &GridFunction, per_side: usize) -> Vec<usize> {
    if grid.dim() == 2 || per_side < 2 {
        return (0..grid.len()).collect();
    }
    let mut groups: BTreeMap<(i32, bool), Vec<usize>> = BTreeMap::new();
    for i in 0..grid.len() {
        let x = grid.axis_coord(i);
        groups.entry((shell_index(x.abs()), x > 0.0)).or_default().push(i);
    }
    let mut out = Vec::new();
    for nodes in groups.values() {
        if nodes.len() <= per_side {
            out.extend_from_slice(nodes);
        } else {
            let last = nodes.len() - 1;
            for s in 0..per_side {
                out.push(nodes[(s * last + (per_side - 1) / 2) / (per_side - 1)]);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    if out.first() != Some(&0) {
        out.insert(0, 0);
    }
    if out.last() != Some(&(grid.len() - 1)) {
        out.push(grid.len() - 1);
    }
    out
}

/// Linear interpolation of samples at sorted `nodes` onto the whole grid.
fn interpolate_onto(template: &GridFunction, nodes: &[usize], values: &[f64]) -> GridFunction {
    let mut out = template.zeros_like();
    if nodes.len() == template.len() {
        out.samples_mut().copy_from_slice(values);
        return out;
    }
    let s = out.samples_mut();
    for w in 0..nodes.len() - 1 {
        let (a, b) = (nodes[w], nodes[w + 1]);
        for (i, slot) in s.iter_mut().enumerate().take(b + 1).skip(a) {
            let u = (i - a) as f64 / (b - a).max(1) as f64;
            *slot = (1.0 - u) * values[w] + u * values[w + 1];
        }
    }
    out
}

/// Operator image and a per-node bound on its truncation error.
#[derive(Debug, Clone)]
pub struct OperatorField {
    pub op: Operator,
    pub lambda: f64,
    pub values: GridFunction,
    pub noise: GridFunction,
}

pub fn operator_field(cache: &ABetaCache, op: Operator, lambda: f64, per_side: usize) -> Result<OperatorField> {
    let grid = cache.function();
    let nodes = sample_nodes(grid, per_side);
    let tail = tail_op(op, lambda);
    let evals: Vec<Result<(f64, f64)>> = nodes
        .par_iter()
        .map(|&i| {
            let x = grid.coords(i);
            let v = apply(cache, op, lambda, &x)?;
            Ok((v, cache.tail_estimate(&x, tail).total().sqrt()))
        })
        .collect();
    let mut values = Vec::with_capacity(nodes.len());
    let mut noise = Vec::with_capacity(nodes.len());
    for e in evals {
        let (v, t) = e?;
        values.push(v);
        noise.push(t);
    }
    Ok(OperatorField {
        op,
        lambda,
        values: interpolate_onto(grid, &nodes, &values),
        noise: interpolate_onto(grid, &nodes, &noise),
    })
}

/// Key of one Herz evaluation inside a family run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub op: Operator,
    pub weight: usize,
    pub triple: usize,
}

/// Per-atom results of a family run: Herz reports of the operator images
/// of the unnormalized profile.
#[derive(Debug, Clone)]
pub struct MemberResult {
    pub radius: f64,
    pub generator: Generator,
    pub seed: u64,
    /// atom scale per `(weight, triple)`
    pub scales: BTreeMap<(usize, usize), f64>,
    pub reports: BTreeMap<RunKey, HerzNormReport>,
}

impl MemberResult {
    /// Herz report of the operator image of the normalized atom.
    pub fn atom_report(&self, key: RunKey) -> Option<HerzNormReport> {
        let c = self.scales.get(&(key.weight, key.triple))?;
        Some(self.reports.get(&key)?.scaled(*c))
    }
}

#[derive(Debug, Clone)]
pub struct FamilyRun {
    pub beta: f64,
    pub lambda: f64,
    pub restricted: bool,
    pub ops: Vec<Operator>,
    pub members: Vec<MemberResult>,
}

impl FamilyRun {
    pub fn herz_params(cfg: &ExperimentConfig, weight: usize, triple: usize, homogeneous: bool) -> Result<HerzParams> {
        let [a1, a2] = cfg.weights[weight];
        let t = cfg.herz[triple];
        Ok(HerzParams {
            alpha: t.alpha,
            p: t.p,
            q: t.q,
            w1: PowerWeight::new(a1, cfg.n)?,
            w2: PowerWeight::new(a2, cfg.n)?,
            k_min: if homogeneous { cfg.k_min } else { 0 },
            k_max: cfg.theorem_k_max(),
            homogeneous,
        })
    }

    /// Build caches for every atom on the theorem grid, evaluate the
    /// operator fields and reduce them to Herz reports.
    pub fn build(
        cfg: &ExperimentConfig,
        beta: f64,
        ops: &[Operator],
        restricted: bool,
        timings: &mut Timings,
    ) -> Result<Self> {
        cfg.check_basic()?;
        cfg.check_herz(beta)?;
        let lambda = cfg.lambdas.first().copied().unwrap_or(0.0);
        if ops.contains(&Operator::GStar) {
            cfg.check_lambdas(beta)?;
        }
        let tc = TestClassGrid::new(cfg.test_class_params(beta))?;
        let profiles = atom_family(cfg, cfg.h, cfg.theorem_extent, restricted)?;
        let mut members = Vec::with_capacity(profiles.len());
        for prof in &profiles {
            let start = Instant::now();
            let cache = full_cache(cfg, &prof.f, &tc)?;
            timings.record(&format!("cache_beta{beta}"), start.elapsed().as_secs_f64());
            let start = Instant::now();
            let mut scales = BTreeMap::new();
            for wi in 0..cfg.weights.len() {
                for ti in 0..cfg.herz.len() {
                    let hp = Self::herz_params(cfg, wi, ti, !restricted)?;
                    scales.insert((wi, ti), prof.atom_scale(hp.alpha, hp.q, &hp.w1, &hp.w2)?);
                }
            }
            let mut reports = BTreeMap::new();
            for &op in ops {
                let field = operator_field(&cache, op, lambda, cfg.samples_per_shell)?;
                for wi in 0..cfg.weights.len() {
                    for ti in 0..cfg.herz.len() {
                        let hp = Self::herz_params(cfg, wi, ti, !restricted)?;
                        let r = herz_norm(&field.values, &hp, Some(&field.noise))?;
                        reports.insert(RunKey { op, weight: wi, triple: ti }, r);
                    }
                }
            }
            timings.record(&format!("fields_beta{beta}"), start.elapsed().as_secs_f64());
            members.push(MemberResult {
                radius: prof.radius,
                generator: prof.generator,
                seed: prof.seed,
                scales,
                reports,
            });
        }
        Ok(Self { beta, lambda, restricted, ops: ops.to_vec(), members })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_nodes_cover_small_shells() {
        let g = GridFunction::zeros(1, 0.25, 64.0).unwrap();
        let nodes = sample_nodes(&g, 8);
        // shells up to 8 nodes per side are complete
        for i in 0..g.len() {
            if g.axis_coord(i).abs() <= 2.0 {
                assert!(nodes.contains(&i));
            }
        }
        assert!(nodes.len() < g.len());
        assert_eq!(nodes[0], 0);
        assert_eq!(*nodes.last().unwrap(), g.len() - 1);
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = GridFunction::zeros(1, 0.25, 64.0).unwrap();
        let nodes = sample_nodes(&g, 4);
        let vals: Vec<f64> = nodes.iter().map(|&i| 3.0 * g.axis_coord(i) - 1.0).collect();
        let f = interpolate_onto(&g, &nodes, &vals);
        for i in 0..g.len() {
            assert!((f.samples()[i] - (3.0 * g.axis_coord(i) - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn families_cycle_generators_and_radii() {
        let cfg = ExperimentConfig::default();
        let fam = atom_family(&cfg, 1.0 / 16.0, 16.0, false).unwrap();
        assert_eq!(fam.len(), 20);
        assert_eq!(fam[0].radius, 0.125);
        assert_eq!(fam[1].radius, 0.125);
        assert_ne!(fam[0].generator, fam[1].generator);
        assert_eq!(fam[13].radius, 8.0);
        assert_eq!(fam[14].radius, 0.125);
        for p in &fam {
            assert!(p.f.support_radius() <= p.radius);
            assert!(p.f.integral().abs() < 1e-12 * p.f.l1_norm());
        }
        let res = atom_family(&cfg, 1.0 / 16.0, 16.0, true).unwrap();
        assert!(res.iter().all(|p| p.radius > 1.0));
    }
}
