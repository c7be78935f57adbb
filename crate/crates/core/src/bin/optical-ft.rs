use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optical_ft::analysis::{degree_basis, Monomial, ThresholdConfig};
use optical_ft::css::{validate, CodeName, CssCode};
use optical_ft::harness::{fit_models, run_grid, write_threshold, CodeModels, FitBases, Mode, RunConfig, TallyTable};
use optical_ft::selftest::run_selftest;
use optical_ft::Error;

#[derive(Parser)]
#[command(name = "optical-ft", version, about = "Threshold estimation for optical cluster-state error correction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the cluster-layer grid of a JSON config.
    SimulateCluster(SimArgs),
    /// Runs the deterministic-layer grid of a JSON config.
    SimulateDet(SimArgs),
    /// Fits the cluster and deterministic rate maps of one code.
    Fit(FitArgs),
    /// Traces threshold curves from fitted models.
    Threshold(ThresholdArgs),
    /// Checks both bundled codes.
    ValidateCodes,
    /// Runs a quick invariant suite.
    Selftest,
}

#[derive(Args)]
struct SimArgs {
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the worker count of the config.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    code: CodeName,
    /// Cluster-layer tally CSV.
    #[arg(long)]
    cluster: PathBuf,
    /// Deterministic-layer tally CSV.
    #[arg(long)]
    det: PathBuf,
    /// Output directory for the model CSVs.
    #[arg(long)]
    out: PathBuf,
    /// Degree range of the cluster unlocated basis, as LO..HI.
    #[arg(long)]
    f_unlocated: Option<String>,
    #[arg(long)]
    f_located: Option<String>,
    #[arg(long)]
    g_unlocated: Option<String>,
    #[arg(long)]
    g_located: Option<String>,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Directory holding the model CSVs.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "steane7,golay23")]
    codes: Vec<CodeName>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    rays: usize,
    #[arg(long, default_value_t = 1e-4)]
    s_eps: f64,
    #[arg(long, default_value_t = 1e-2)]
    s_gamma: f64,
    /// Largest radius examined, in units of the axis scales.
    #[arg(long, default_value_t = 100.0)]
    r_max: f64,
    #[arg(long, default_value_t = 30)]
    k_max: u32,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

fn degrees(arg: &Option<String>, default: Vec<Monomial>) -> Result<Vec<Monomial>, Error> {
    let Some(text) = arg else { return Ok(default) };
    let bad = || Error::Config { field: "basis".into(), reason: format!("{text:?} is not LO..HI") };
    let (lo, hi) = text.split_once("..").ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(degree_basis(lo, hi))
}

fn simulate(args: &SimArgs, mode: Mode) -> Result<(), Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if cfg.mode != mode {
        return Err(Error::Config { field: "mode".into(), reason: format!("{:?} config given to the {mode:?} command", cfg.mode) });
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
        cfg.validate()?;
    }
    let table = run_grid(&cfg)?;
    for ((x, y), t) in &table.rows {
        println!("{x:e} {y:e} trials={} N_U={} N_L={} N_N={} discarded={} stalls={}", t.trials, t.n_u, t.n_l, t.n_n, t.discarded, t.stalls);
    }
    println!("wrote {}", cfg.output.display());
    Ok(())
}

fn fit(args: &FitArgs) -> Result<(), Error> {
    let d = FitBases::defaults(args.code);
    let bases = FitBases {
        f_unlocated: degrees(&args.f_unlocated, d.f_unlocated)?,
        f_located: degrees(&args.f_located, d.f_located)?,
        g_unlocated: degrees(&args.g_unlocated, d.g_unlocated)?,
        g_located: degrees(&args.g_located, d.g_located)?,
    };
    let cluster = TallyTable::load(&args.cluster)?;
    let det = TallyTable::load(&args.det)?;
    let models = fit_models(args.code, &cluster, &det, &bases)?;
    models.save(&args.out)?;
    for (name, m) in [("f E", &models.f.e), ("f Gamma", &models.f.gamma), ("g Q", &models.g.e), ("g P", &models.g.gamma)] {
        println!("{} {name}: {} terms, weighted residual {:.4e}", args.code, m.basis.len(), m.residual);
    }
    println!("wrote models to {}", args.out.display());
    Ok(())
}

fn threshold(args: &ThresholdArgs) -> Result<(), Error> {
    if args.rays < 2 {
        return Err(Error::Config { field: "rays".into(), reason: "need at least 2".into() });
    }
    let cfg = ThresholdConfig {
        rays: args.rays,
        tol: args.tol,
        k_max: args.k_max,
        s_eps: args.s_eps,
        s_gamma: args.s_gamma,
        r_max: args.r_max,
        ..ThresholdConfig::default()
    };
    let models: Vec<CodeModels> =
        args.codes.iter().map(|&c| CodeModels::load(&args.models, c)).collect::<Result<_, _>>()?;
    for c in write_threshold(&models, &cfg, &args.out)? {
        let b = c.boundary();
        let (eps_axis, gamma_axis) = (b[0].0, b[b.len() - 1].1);
        println!(
            "{}: eps intercept {eps_axis:.3e}, gamma intercept {gamma_axis:.3e}, non-monotone rays {:?}, rays at the data edge {:?}",
            c.code, c.non_monotone, c.domain_edge
        );
    }
    println!("wrote curves to {}", args.out.display());
    Ok(())
}

fn validate_codes() -> Result<bool, Error> {
    let mut ok = true;
    for name in [CodeName::Steane7, CodeName::Golay23] {
        let report = validate(&CssCode::load(name)?);
        print!("{report}");
        ok &= report.passed();
    }
    Ok(ok)
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Config { .. } | Error::UnknownCode(_) | Error::Usage(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::SimulateCluster(a) => simulate(a, Mode::Cluster),
        Command::SimulateDet(a) => simulate(a, Mode::Deterministic),
        Command::Fit(a) => fit(a),
        Command::Threshold(a) => threshold(a),
        Command::ValidateCodes => match validate_codes() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Selftest => {
            let results = run_selftest();
            for (name, passed) in &results {
                println!("{} {name}", if *passed { "PASS" } else { "FAIL" });
            }
            return if results.iter().all(|r| r.1) { ExitCode::SUCCESS } else { ExitCode::from(3) };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
