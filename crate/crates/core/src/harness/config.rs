use serde::{Deserialize, Serialize};

use crate::atoms::Generator;
use crate::error::{invalid, Error, Result};
use crate::intrinsic::TestClassParams;

/// Operators under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    G,
    S,
    GStar,
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::G => "g",
            Operator::S => "s",
            Operator::GStar => "gstar",
        }
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" | "g-beta" => Ok(Operator::G),
            "s" | "s-beta" => Ok(Operator::S),
            "gstar" | "g-star" => Ok(Operator::GStar),
            other => Err(Error::InvalidParameter(format!("unknown operator {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerzTriple {
    pub q: f64,
    pub alpha: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomFamilySpec {
    pub count: usize,
    /// radii `2^e` for `e` in `[r_min_exp, r_max_exp]`
    pub r_min_exp: i32,
    pub r_max_exp: i32,
    pub generators: Vec<Generator>,
    /// size of the restricted-type family (`R > 1`) for the non-homogeneous runs
    pub restricted_count: usize,
}

impl Default for AtomFamilySpec {
    fn default() -> Self {
        Self {
            count: 20,
            r_min_exp: -3,
            r_max_exp: 3,
            generators: vec![Generator::DoubleBump, Generator::PolyBump],
            restricted_count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    pub levels_per_octave: usize,
    pub y_per_t: f64,
    /// `t_max = t_max_factor * L`
    pub t_max_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { levels_per_octave: 8, y_per_t: 8.0, t_max_factor: 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub decay_slope_rel: f64,
    pub prefactor_spread: f64,
    pub h_shift_rel: f64,
    pub herz_slope_rel: f64,
    pub outer_tail: f64,
    pub family_spread: f64,
    pub operator_spread: f64,
    pub aperture_slack: f64,
    pub series_factor: f64,
    pub theorem_d_spread: f64,
    pub dilation_rel: f64,
    pub weights_abs: f64,
    pub doubling_abs: f64,
    pub pointwise_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            decay_slope_rel: 0.10,
            prefactor_spread: 5.0,
            h_shift_rel: 0.03,
            herz_slope_rel: 0.20,
            outer_tail: 0.05,
            family_spread: 10.0,
            operator_spread: 4.0,
            aperture_slack: 0.15,
            series_factor: 10.0,
            theorem_d_spread: 10.0,
            dilation_rel: 0.05,
            weights_abs: 1e-9,
            doubling_abs: 1e-6,
            pointwise_rel: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub beta: f64,
    /// smoothness used by the `g*` runs; `None` means `beta`
    pub theorem3_beta: Option<f64>,
    pub h: f64,
    /// half-width of the grid for component checks
    pub extent: f64,
    /// half-width of the grid for the Herz-norm theorem runs
    pub theorem_extent: f64,
    /// `(a1, a2)` pairs
    pub weights: Vec<[f64; 2]>,
    pub herz: Vec<HerzTriple>,
    pub k_min: i32,
    pub quadrature: QuadratureSpec,
    /// overrides the default test-class layout
    pub test_class: Option<TestClassParams>,
    pub atoms: AtomFamilySpec,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub js: Vec<u32>,
    pub aperture_qs: Vec<f64>,
    pub decomposition_j_max: u32,
    pub series_ps: Vec<f64>,
    pub series_len: usize,
    pub theorem_d_ps: Vec<f64>,
    pub theorem_d_scales: Vec<u32>,
    /// on-lattice shifts, multiples of `h`
    pub theorem_d_shifts: Vec<f64>,
    /// operator field samples per shell side before interpolation
    pub samples_per_shell: usize,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            beta: 1.0,
            theorem3_beta: Some(0.5),
            h: 1.0 / 16.0,
            extent: 64.0,
            theorem_extent: 16384.0,
            weights: vec![[0.0, 0.0], [-0.5, -0.5]],
            herz: vec![HerzTriple { q: 2.0, alpha: 0.5, p: 1.0 }, HerzTriple { q: 2.0, alpha: 0.5, p: 2.0 }],
            k_min: -6,
            quadrature: QuadratureSpec::default(),
            test_class: None,
            atoms: AtomFamilySpec::default(),
            seed: 20240601,
            lambdas: vec![5.0],
            js: vec![1, 2, 3],
            aperture_qs: vec![1.5, 2.0, 3.0],
            decomposition_j_max: 4,
            series_ps: vec![1.0, 2.0],
            series_len: 5,
            theorem_d_ps: vec![1.5, 2.0, 3.0],
            theorem_d_scales: vec![1, 2, 4],
            theorem_d_shifts: vec![0.0, 3.0, -5.0, 10.0],
            samples_per_shell: 64,
            tolerances: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn theorem3_beta(&self) -> f64 {
        self.theorem3_beta.unwrap_or(self.beta)
    }

    /// Largest shell fully inside the theorem grid.
    pub fn theorem_k_max(&self) -> i32 {
        self.theorem_extent.log2().floor() as i32
    }

    /// Generic consistency checks shared by all runs.
    pub fn check_basic(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return invalid("dimension must be 1 or 2");
        }
        for b in [self.beta, self.theorem3_beta()] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::ConfigViolation(format!("beta = {b} outside (0, 1]")));
            }
        }
        if !(self.h > 0.0) || !(self.extent > 0.0) || !(self.theorem_extent > 0.0) {
            return invalid("h and the extents must be positive");
        }
        for [a1, a2] in &self.weights {
            for a in [a1, a2] {
                if !(*a > -(self.n as f64) && *a <= 0.0) {
                    return Err(Error::ConfigViolation(format!(
                        "weight exponent {a} is not an A_1 power weight"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Herz-parameter hypotheses for smoothness `beta`.
    pub fn check_herz(&self, beta: f64) -> Result<()> {
        let n = self.n as f64;
        for t in &self.herz {
            if !(t.q > 1.0) {
                return Err(Error::ConfigViolation(format!("q = {} must exceed 1", t.q)));
            }
            if !(t.p > 0.0) {
                return Err(Error::ConfigViolation(format!("p = {} must be positive", t.p)));
            }
            let lo = n * (1.0 - 1.0 / t.q);
            if t.alpha < lo - 1e-12 || t.alpha >= lo + beta {
                return Err(Error::ConfigViolation(format!(
                    "alpha = {} outside [{lo}, {}) for beta = {beta}",
                    t.alpha,
                    lo + beta
                )));
            }
        }
        if self.k_min >= self.theorem_k_max() {
            return invalid("k_min must lie below the largest shell");
        }
        Ok(())
    }

    /// `lambda > 3 + 2 beta / n` for every configured `lambda`.
    pub fn check_lambdas(&self, beta: f64) -> Result<()> {
        let bound = 3.0 + 2.0 * beta / self.n as f64;
        if self.lambdas.is_empty() {
            return invalid("no lambda configured");
        }
        for l in &self.lambdas {
            if !(*l > bound) {
                return Err(Error::ConfigViolation(format!("lambda = {l} must exceed {bound}")));
            }
        }
        Ok(())
    }

    pub fn test_class_params(&self, beta: f64) -> TestClassParams {
        match self.test_class {
            Some(tc) => TestClassParams { beta, ..tc },
            None => TestClassParams::default_for(self.n, beta),
        }
    }
}
