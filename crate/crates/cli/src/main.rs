use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use herzsq_core::atoms::{make_atom, AtomParams};
use herzsq_core::harness::{atom_family, quadrature_for, run_checks, Check, ExperimentConfig, Timings};
use herzsq_core::intrinsic::{ABetaCache, TestClassGrid};
use herzsq_core::weights::{ap_constant, doubling_ratio, dyadic_radii, BallFamily};
use herzsq_core::{ApReport, GridFunction, PowerWeight};

#[derive(Parser)]
#[command(name = "herzsq", version, about = "Square functions of atoms in weighted Herz spaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// experiment configuration (JSON); missing fields take defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    dim: Option<u8>,
    /// smoothness of the test class; also used for the g* runs
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// grid nodes per unit length (h = 1 / resolution)
    #[arg(long, global = true)]
    resolution: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// A_p constants and doubling ratios of |x|^a
    CheckWeight {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        p: Vec<f64>,
    },
    /// Generate and certify the configured atom family
    MakeAtoms,
    /// Evaluate g, S or g* of a grid function
    SquareFunction {
        /// grid function CSV
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "s")]
        op: OpArg,
        #[arg(long, default_value_t = 5.0)]
        lambda: f64,
        /// cone aperture for S
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// A_beta cache file, reused when its hash matches the input
        #[arg(long)]
        cache: Option<PathBuf>,
        /// evaluation points (first coordinate); every node when omitted
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    /// Run verification checks
    Verify {
        #[arg(value_enum, required = true)]
        checks: Vec<CheckArg>,
    },
    /// Run every check and write a summary
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    G,
    S,
    Gstar,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Decay,
    Theorem1,
    Theorem2,
    Theorem3,
    Aperture,
    Decomp16,
    #[value(name = "theoremD", alias = "theoremd")]
    TheoremD,
    Weights,
    Series,
}

impl From<CheckArg> for Check {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Decay => Check::Decay,
            CheckArg::Theorem1 => Check::Theorem1,
            CheckArg::Theorem2 => Check::Theorem2,
            CheckArg::Theorem3 => Check::Theorem3,
            CheckArg::Aperture => Check::Aperture,
            CheckArg::Decomp16 => Check::Decomp16,
            CheckArg::TheoremD => Check::TheoremD,
            CheckArg::Weights => Check::Weights,
            CheckArg::Series => Check::Series,
        }
    }
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(n) = g.dim {
        cfg.n = n as usize;
    }
    if let Some(b) = g.beta {
        cfg.beta = b;
        cfg.theorem3_beta = Some(b);
    }
    if let Some(r) = g.resolution {
        if r == 0 {
            bail!("resolution must be positive");
        }
        cfg.h = 1.0 / r as f64;
    }
    Ok(cfg)
}

fn check_weight(cfg: &ExperimentConfig, a: f64, ps: &[f64], out: &Path) -> Result<bool> {
    let w = PowerWeight::new(a, cfg.n)?;
    let family = BallFamily::default_for(cfg.n, cfg.extent)?;
    let mut csv = format!("{}\n", ApReport::CSV_HEADER);
    for &p in ps {
        let r = ap_constant(&w, p, &family, family.resolution)?;
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let origin = BallFamily::origin_centered(cfg.n, cfg.extent, &dyadic_radii(-3, 2))?;
    let d = doubling_ratio(&w, 2.0, 1.0, &origin)?;
    fs::create_dir_all(out)?;
    let path = out.join(format!("weight_a{a}.csv"));
    fs::write(&path, &csv)?;
    print!("{csv}");
    println!("doubling ratio w(2B)/(2^n w(B)) = {d}");
    Ok(true)
}

fn make_atoms(cfg: &ExperimentConfig, out: &Path) -> Result<bool> {
    let [a1, a2] = *cfg.weights.first().context("no weights configured")?;
    let t = *cfg.herz.first().context("no Herz parameters configured")?;
    let (w1, w2) = (PowerWeight::new(a1, cfg.n)?, PowerWeight::new(a2, cfg.n)?);
    fs::create_dir_all(out)?;
    let fam = atom_family(cfg, cfg.h, cfg.extent, false)?;
    for (i, prof) in fam.iter().enumerate() {
        let params = AtomParams { alpha: t.alpha, q: t.q, radius: prof.radius, w1, w2, restricted: false, s: 0 };
        params.check(cfg.beta)?;
        let atom = make_atom(&prof.f, params)?;
        herzsq_core::atoms::validate_atom(&atom)?;
        atom.f.write_csv(&out.join(format!("atom_{i:02}.csv")))?;
        let side = serde_json::to_string_pretty(&atom.sidecar())?;
        fs::write(out.join(format!("atom_{i:02}.json")), side)?;
        println!(
            "atom {i:02}: R = {}, {:?}, norm = {:.6e}, mean residual = {:.1e}",
            prof.radius, prof.generator, atom.achieved_norm, atom.mean_residual
        );
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn square_function(
    cfg: &ExperimentConfig,
    input: &Path,
    op: OpArg,
    lambda: f64,
    gamma: f64,
    cache_path: Option<&Path>,
    xs: &[f64],
    out: &Path,
) -> Result<bool> {
    let f = GridFunction::read_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let tc = TestClassGrid::new(cfg.test_class_params(cfg.beta))?;
    let mut cache = match cache_path {
        Some(p) if p.exists() => {
            let c = ABetaCache::load(p, &f, &tc).with_context(|| format!("loading cache {}", p.display()))?;
            eprintln!("reusing cache {}", p.display());
            c
        }
        _ => ABetaCache::new(&f, &tc, quadrature_for(cfg, &f))?,
    };
    let filled = cache.fill_all()?;
    if let Some(p) = cache_path {
        if filled > 0 {
            cache.save(p)?;
        }
    }
    cache.freeze();
    let points: Vec<Vec<f64>> = if xs.is_empty() {
        (0..f.len()).map(|i| f.coords(i)).collect()
    } else {
        xs.iter()
            .map(|&x| {
                let mut p = vec![0.0; f.dim()];
                p[0] = x;
                p
            })
            .collect()
    };
    let name = match op {
        OpArg::G => "g",
        OpArg::S => "s",
        OpArg::Gstar => "gstar",
    };
    let mut csv = if f.dim() == 1 { String::from("x,value\n") } else { String::from("x0,x1,value\n") };
    for x in &points {
        let v = match op {
            OpArg::G => cache.g_beta(x)?,
            OpArg::S => cache.s_gamma(x, gamma)?,
            OpArg::Gstar => cache.g_star(x, lambda)?,
        };
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        csv.push_str(&format!("{},{v:e}\n", coords.join(",")));
    }
    fs::create_dir_all(out)?;
    fs::write(out.join(format!("{name}.csv")), &csv)?;
    if !xs.is_empty() {
        print!("{csv}");
    }
    Ok(true)
}

fn verify(cfg: &ExperimentConfig, checks: &[Check], out: &Path, summary: bool) -> Result<bool> {
    let mut timings = Timings::default();
    let reports = run_checks(cfg, checks, &mut timings)?;
    fs::create_dir_all(out)?;
    let mut all = true;
    let mut flags = serde_json::Map::new();
    for r in &reports {
        r.write(out)?;
        println!("{:<10} {}", r.check, if r.pass { "pass" } else { "FAIL" });
        for m in r.failures() {
            println!("    {} = {} (bounds {:?} .. {:?})", m.name, m.value, m.lower, m.upper);
        }
        flags.insert(r.check.clone(), serde_json::Value::Bool(r.pass));
        all &= r.pass;
    }
    timings.write(out)?;
    if summary {
        let text = serde_json::to_string_pretty(&serde_json::json!({ "pass": all, "checks": flags }))?;
        fs::write(out.join("summary.json"), text)?;
    }
    Ok(all)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.global)?;
    let out = &cli.global.out;
    match cli.command {
        Command::CheckWeight { a, p } => check_weight(&cfg, a, &p, out),
        Command::MakeAtoms => make_atoms(&cfg, out),
        Command::SquareFunction { input, op, lambda, gamma, cache, x } => {
            square_function(&cfg, &input, op, lambda, gamma, cache.as_deref(), &x, out)
        }
        Command::Verify { checks } => {
            let checks: Vec<Check> = checks.into_iter().map(Check::from).collect();
            verify(&cfg, &checks, out, false)
        }
        Command::Report => verify(&cfg, &Check::ALL, out, true),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use herzsq_core::harness::Operator;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_override_config() {
        let cli = Cli::parse_from(["herzsq", "--beta", "0.5", "--resolution", "32", "--seed", "9", "verify", "weights"]);
        let cfg = load_config(&cli.global).unwrap();
        assert_eq!(cfg.beta, 0.5);
        assert_eq!(cfg.theorem3_beta(), 0.5);
        assert_eq!(cfg.h, 1.0 / 32.0);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn operator_names_match_core() {
        for (arg, op) in [(OpArg::G, Operator::G), (OpArg::S, Operator::S), (OpArg::Gstar, Operator::GStar)] {
            let v = arg.to_possible_value().unwrap();
            assert_eq!(v.get_name().parse::<Operator>().unwrap(), op);
        }
    }
}
