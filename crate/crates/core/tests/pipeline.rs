//! End-to-end paths through the public API: atoms on disk, cached square
//! functions, Herz norms of the images and config validation.

use herzsq_core::atoms::{k0_of, random_atom, validate_atom, AtomSidecar};
use herzsq_core::harness::{full_cache, validate, Check, ExperimentConfig, Operator, Timings};
use herzsq_core::herz::herz_norm;
use herzsq_core::intrinsic::{ABetaCache, ConeQuadrature, TestClassGrid};
use herzsq_core::{AtomParams, Error, Generator, GridFunction, HerzParams, PowerWeight};

fn params(radius: f64, a: f64) -> AtomParams {
    let w = PowerWeight::new(a, 1).unwrap();
    AtomParams { alpha: 0.5, q: 2.0, radius, w1: w, w2: w, restricted: false, s: 0 }
}

#[test]
fn atom_survives_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let atom = random_atom(7, params(2.0, -0.5), Generator::DoubleBump, 1.0 / 16.0, 16.0).unwrap();
    validate_atom(&atom).unwrap();
    let path = dir.path().join("atom.csv");
    atom.f.write_csv(&path).unwrap();
    let back = GridFunction::read_csv(&path).unwrap();
    assert_eq!(back.samples(), atom.f.samples());

    let side = serde_json::to_string(&atom.sidecar()).unwrap();
    let parsed: AtomSidecar = serde_json::from_str(&side).unwrap();
    assert_eq!(parsed.k0, k0_of(2.0));
    assert!((parsed.achieved_norm - parsed.target_norm).abs() <= 1e-9 * parsed.target_norm);
    assert!(parsed.support_radius <= 2.0);
}

#[test]
fn cached_square_function_reloads_and_rejects_other_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let atom = random_atom(3, params(1.0, 0.0), Generator::PolyBump, 1.0 / 8.0, 16.0).unwrap();
    let tc = TestClassGrid::default_for(1, 1.0).unwrap();
    let mut cache = ABetaCache::new(&atom.f, &tc, ConeQuadrature::for_grid(&atom.f)).unwrap();
    cache.fill_all().unwrap();
    let path = dir.path().join("abeta.csv");
    cache.save(&path).unwrap();
    cache.freeze();

    let mut again = ABetaCache::load(&path, &atom.f, &tc).unwrap();
    assert_eq!(again.fill_all().unwrap(), 0);
    again.freeze();
    for x in [0.0625, 3.0625, -9.9375] {
        assert_eq!(again.s_beta(&[x]).unwrap(), cache.s_beta(&[x]).unwrap());
    }

    let other = atom.f.scaled(0.5);
    assert!(matches!(ABetaCache::load(&path, &other, &tc), Err(Error::HashMismatch { .. })));
}

#[test]
fn herz_norm_of_a_square_function_image_is_finite() {
    let cfg = ExperimentConfig { h: 1.0 / 8.0, extent: 64.0, ..Default::default() };
    let atom = random_atom(11, params(1.0, 0.0), Generator::DoubleBump, cfg.h, cfg.extent).unwrap();
    let tc = TestClassGrid::default_for(1, 1.0).unwrap();
    let cache = full_cache(&cfg, &atom.f, &tc).unwrap();
    let g = GridFunction::from_fn(1, cfg.h, cfg.extent, |x| cache.g_beta(x).unwrap()).unwrap();
    let hp = HerzParams {
        alpha: 0.5,
        p: 1.0,
        q: 2.0,
        w1: PowerWeight::lebesgue(1),
        w2: PowerWeight::lebesgue(1),
        k_min: -3,
        k_max: 6,
        homogeneous: true,
    };
    let r = herz_norm(&g, &hp, None).unwrap();
    assert!(r.total.is_finite() && r.total > 0.0);
    // far shells decay: the last term is well below the peak
    let peak = r.per_shell.iter().map(|t| t.term).fold(0.0, f64::max);
    assert!(r.per_shell.last().unwrap().term < 0.2 * peak);
}

#[test]
fn hypotheses_are_checked_before_running() {
    let mut cfg = ExperimentConfig { theorem3_beta: Some(1.0), ..Default::default() };
    // lambda = 5 does not exceed 3 + 2 beta / n at beta = 1
    assert!(matches!(validate(&cfg, &[Check::Theorem3]), Err(Error::ConfigViolation(_))));
    cfg.theorem3_beta = Some(0.5);
    validate(&cfg, &[Check::Theorem3]).unwrap();
    cfg.herz[0].alpha = 0.0;
    assert!(matches!(validate(&cfg, &[Check::Theorem1]), Err(Error::ConfigViolation(_))));
    assert!("theoremd".parse::<Check>().is_ok());
    assert!("gstar".parse::<Operator>().is_ok());
}

#[test]
fn weight_check_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    let mut timings = Timings::default();
    let rep = herzsq_core::harness::verify_weights(&cfg, &mut timings).unwrap();
    assert!(rep.pass);
    rep.write(dir.path()).unwrap();
    let json = std::fs::read_to_string(dir.path().join("weights.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["check"], "weights");
    assert_eq!(v["pass"], true);
    assert_eq!(v["inputs_hash"].as_str().unwrap().len(), 64);
}
