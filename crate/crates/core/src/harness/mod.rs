//! Experiment engine: each check turns a statement about the square
//! functions into measured numbers with pass/fail assertions.

mod checks;
mod config;
mod fields;
mod report;

pub use checks::{
    verify_aperture, verify_decay, verify_decomposition16, verify_series, verify_theorem, verify_theorem_d,
    verify_weights,
};
pub use config::{AtomFamilySpec, ExperimentConfig, HerzTriple, Operator, QuadratureSpec, Tolerances};
pub use fields::{
    atom_family, family_radii, full_cache, operator_field, quadrature_for, sample_nodes, FamilyRun, MemberResult,
    OperatorField, Profile, RunKey,
};
pub use report::{fmt, Measurement, Table, Timings, VerificationReport};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Decay,
    Theorem1,
    Theorem2,
    Theorem3,
    Aperture,
    Decomp16,
    TheoremD,
    Weights,
    Series,
}

impl Check {
    pub const ALL: [Check; 9] = [
        Check::Weights,
        Check::Decay,
        Check::Aperture,
        Check::Decomp16,
        Check::TheoremD,
        Check::Series,
        Check::Theorem1,
        Check::Theorem2,
        Check::Theorem3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Decay => "decay",
            Check::Theorem1 => "theorem1",
            Check::Theorem2 => "theorem2",
            Check::Theorem3 => "theorem3",
            Check::Aperture => "aperture",
            Check::Decomp16 => "decomp16",
            Check::TheoremD => "theoremD",
            Check::Weights => "weights",
            Check::Series => "series",
        }
    }

    fn operator(&self) -> Option<Operator> {
        match self {
            Check::Theorem1 => Some(Operator::G),
            Check::Theorem2 => Some(Operator::S),
            Check::Theorem3 => Some(Operator::GStar),
            _ => None,
        }
    }
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("unknown check {s}")))
    }
}

/// Reject hypothesis violations before any computation starts.
pub fn validate(cfg: &ExperimentConfig, checks: &[Check]) -> Result<()> {
    cfg.check_basic()?;
    for c in checks {
        match c {
            Check::Theorem1 | Check::Theorem2 | Check::Decay | Check::Series => cfg.check_herz(cfg.beta)?,
            Check::Theorem3 => {
                cfg.check_herz(cfg.theorem3_beta())?;
                cfg.check_lambdas(cfg.theorem3_beta())?;
            }
            Check::Decomp16 => {
                if !cfg.lambdas.first().is_some_and(|l| *l > 3.0) {
                    return Err(Error::ConfigViolation("decomposition needs lambda > 3".into()));
                }
            }
            Check::Aperture | Check::TheoremD | Check::Weights => {}
        }
    }
    Ok(())
}

/// Run the requested checks; theorem runs share one family computation per
/// smoothness value.
pub fn run_checks(cfg: &ExperimentConfig, checks: &[Check], timings: &mut Timings) -> Result<Vec<VerificationReport>> {
    validate(cfg, checks)?;
    let mut by_beta: BTreeMap<u64, (f64, Vec<Operator>)> = BTreeMap::new();
    for c in checks {
        if let Some(op) = c.operator() {
            let beta = if op == Operator::GStar { cfg.theorem3_beta() } else { cfg.beta };
            let e = by_beta.entry(beta.to_bits()).or_insert((beta, Vec::new()));
            if !e.1.contains(&op) {
                e.1.push(op);
            }
        }
    }
    let mut runs = BTreeMap::new();
    for (key, (beta, mut ops)) in by_beta {
        ops.sort();
        let hom = FamilyRun::build(cfg, beta, &ops, false, timings)?;
        let res = FamilyRun::build(cfg, beta, &ops, true, timings)?;
        runs.insert(key, (hom, res));
    }
    let mut out = Vec::new();
    for c in checks {
        let rep = match c {
            Check::Decay => verify_decay(cfg, timings)?,
            Check::Aperture => verify_aperture(cfg, timings)?,
            Check::Decomp16 => verify_decomposition16(cfg, timings)?,
            Check::TheoremD => verify_theorem_d(cfg, timings)?,
            Check::Weights => verify_weights(cfg, timings)?,
            Check::Series => verify_series(cfg, Operator::G, timings)?,
            Check::Theorem1 | Check::Theorem2 | Check::Theorem3 => {
                let op = c.operator().expect("theorem check");
                let beta = if op == Operator::GStar { cfg.theorem3_beta() } else { cfg.beta };
                let (hom, res) = &runs[&beta.to_bits()];
                verify_theorem(cfg, op, hom, Some(res))?
            }
        };
        out.push(rep);
    }
    Ok(out)
}
