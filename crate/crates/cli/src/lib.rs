//! Command-line front end for simulation, sweeps, BMSB estimation and bounds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nlsysid_core::bmsb::{estimate_bmsb, BmsbEstimate};
use nlsysid_core::bounds::{
    lse_burn_in, lse_error_bound, sme_diameter_bound, sme_failure_prob, sme_m_choice, BoundInputs,
};
use nlsysid_core::experiments::{
    canned, run_sweep, thread_pool, to_json, trajectory_csv, write_sweep, Estimator,
    ExperimentConfig, Format, ModelSummary, MAX_FAILED_FRACTION,
};
use nlsysid_core::model::simulate;
use nlsysid_core::stochastics::SeedStream;
use nlsysid_core::CoreError;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nlsysid", version, about = "Identification of linearly parameterized nonlinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML, schema version 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one trajectory.
    Simulate,
    /// Least-squares error sweep over the configured horizons.
    LseSweep,
    /// Set-membership diameter sweep over the configured horizons.
    SmeSweep,
    /// Monte-Carlo estimate of the small-ball constants.
    BmsbEstimate,
    /// Evaluate the theoretical curves from a saved estimate.
    Bounds,
    /// Run a canned figure configuration.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(nlsysid_core::experiments::FIGURE_IDS))]
        figure: String,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(CliError::Config(m)) => {
            eprintln!("config error: {m}");
            EXIT_CONFIG
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<(ExperimentConfig, PathBuf)> {
    let path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Config("--config: this command needs a configuration file".into()))?;
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn load_bmsb(path: &Path, base: &Path) -> CliResult<BmsbEstimate> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    let text = fs::read_to_string(&full).map_err(|e| {
        CliError::Config(format!("bounds.bmsb_file: cannot read {}: {e}", full.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("bounds.bmsb_file: {} is not a BMSB estimate: {e}", full.display()))
    })
}

fn dispatch(cli: &Cli) -> CliResult<Vec<String>> {
    let fmt: Format = cli.format.into();
    match &cli.command {
        Command::Simulate => cmd_simulate(cli, fmt),
        Command::LseSweep => {
            let (mut cfg, base) = load_config(cli)?;
            cfg.sweep.estimators = vec![Estimator::Lse];
            sweep(cli, cfg, &base, "lse-sweep", fmt)
        }
        Command::SmeSweep => {
            let (mut cfg, base) = load_config(cli)?;
            cfg.sweep.estimators = vec![Estimator::Sme];
            sweep(cli, cfg, &base, "sme-sweep", fmt)
        }
        Command::BmsbEstimate => cmd_bmsb(cli),
        Command::Bounds => cmd_bounds(cli, fmt),
        Command::Reproduce { figure } => {
            let mut cfg = canned(figure)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            sweep(cli, cfg, Path::new("."), figure, fmt)
        }
    }
}

fn sweep(cli: &Cli, cfg: ExperimentConfig, base: &Path, default_id: &str, fmt: Format) -> CliResult<Vec<String>> {
    let id = cfg.name.clone().unwrap_or_else(|| default_id.to_string());
    let bmsb = match &cfg.bounds.bmsb_file {
        Some(p) => Some(load_bmsb(p, base)?),
        None => None,
    };
    let model = cfg.build_model()?;
    let result = run_sweep(&cfg, bmsb)?;
    let files = write_sweep(&cli.out, &id, &cfg, &model, &result, fmt)?;
    let mut lines: Vec<String> = files.iter().map(|f| format!("wrote {}", f.display())).collect();
    if let Some(s) = result.lse_slope {
        lines.push(format!("lse log-log slope: {s:.4}"));
    }
    if let Some(s) = result.sme_slope {
        lines.push(format!("sme log-log slope: {s:.4}"));
    }
    let frac = result.failed_fraction(cfg.sweep.trials);
    if frac > MAX_FAILED_FRACTION {
        for l in &lines {
            println!("{l}");
        }
        let first = &result.failed_trials[0];
        return Err(CliError::Runtime(format!(
            "{} of {} trials failed (first: trial {}: {})",
            result.failed_trials.len(),
            cfg.sweep.trials,
            first.0,
            first.1
        )));
    }
    Ok(lines)
}

fn cmd_simulate(cli: &Cli, fmt: Format) -> CliResult<Vec<String>> {
    let (cfg, _) = load_config(cli)?;
    let model = cfg.build_model()?;
    let policy = cfg.build_policy()?;
    let stream = SeedStream::new(cfg.seed).child("simulate");
    let traj = simulate(&model, &policy, &cfg.noise.disturbance, cfg.simulate.horizon, &stream)?;
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let (path, body) = match fmt {
        Format::Csv => (cli.out.join("trajectory.csv"), trajectory_csv(&traj)),
        Format::Json => (cli.out.join("trajectory.json"), to_json(&traj)?),
    };
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    let mut lines = vec![format!("wrote {}", path.display())];
    if traj.guard_tripped {
        lines.push(format!(
            "state norm exceeded the guard {} at t = {}",
            model.guard,
            traj.guard_step.unwrap_or_default()
        ));
    }
    Ok(lines)
}

fn cmd_bmsb(cli: &Cli) -> CliResult<Vec<String>> {
    let (cfg, _) = load_config(cli)?;
    let model = cfg.build_model()?;
    let policy = cfg.build_policy()?;
    let est = estimate_bmsb(
        &model,
        &policy,
        &cfg.noise.disturbance,
        &cfg.bmsb.to_config(),
        &SeedStream::new(cfg.seed).child("bmsb"),
    )?;
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let path = cli.out.join("bmsb.json");
    fs::write(&path, to_json(&est)?).map_err(|e| io_err(&path, e))?;
    Ok(vec![
        format!("wrote {}", path.display()),
        format!(
            "s_phi = {}, p_phi = {}, b_phi = {}, b_bar_phi = {}",
            est.s_phi, est.p_phi, est.b_phi, est.b_bar_phi
        ),
    ])
}

#[derive(Serialize)]
struct BoundRow {
    t: usize,
    lse_bound: Option<f64>,
    lse_bound_norm: Option<f64>,
    sme_m: Option<u64>,
    sme_diameter_bound: Option<f64>,
    sme_diameter_bound_norm: Option<f64>,
    sme_failure_prob: Option<f64>,
}

#[derive(Serialize)]
struct BoundsMeta<'a> {
    config_hash: String,
    config: &'a ExperimentConfig,
    model: ModelSummary,
    bmsb: &'a BmsbEstimate,
    inputs_lse: BoundInputs,
    inputs_sme: BoundInputs,
    lse_burn_in: u64,
}

fn cmd_bounds(cli: &Cli, fmt: Format) -> CliResult<Vec<String>> {
    let (cfg, base) = load_config(cli)?;
    let file = cfg.bounds.bmsb_file.clone().ok_or_else(|| {
        CliError::Config("bounds.bmsb_file: missing; point it at the output of bmsb-estimate".into())
    })?;
    let est = load_bmsb(&file, &base)?;
    let model = cfg.build_model()?;
    let d = model.dims();
    let w = &cfg.noise.disturbance;
    let lse_in = BoundInputs::from_estimate(d.n_x, d.n_phi, w.std_dev(), cfg.bounds.delta, w.tightness_coefficient(), &est);
    let sme_in = BoundInputs {
        confidence: cfg.bounds.epsilon,
        ..lse_in
    };
    let burn = lse_burn_in(&lse_in)?;
    let (sn, fnorm) = (model.theta.spectral_norm(), model.theta.frobenius_norm());
    let rows: Vec<BoundRow> = cfg
        .sweep
        .t_grid
        .iter()
        .map(|&t| {
            let t64 = t as u64;
            let lse = lse_error_bound(&lse_in, t64).ok();
            let m = sme_m_choice(&sme_in, t64).ok();
            let diam = m.and_then(|m| sme_diameter_bound(&sme_in, t64, m).ok());
            let fail = match (m, diam) {
                (Some(m), Some(dm)) => sme_failure_prob(&sme_in, t64, m, dm).ok(),
                _ => None,
            };
            BoundRow {
                t,
                lse_bound: lse,
                lse_bound_norm: lse.map(|b| b / sn),
                sme_m: m,
                sme_diameter_bound: diam,
                sme_diameter_bound_norm: diam.map(|b| b / fnorm),
                sme_failure_prob: fail,
            }
        })
        .collect();
    fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let data = match fmt {
        Format::Csv => {
            let mut s = String::from("T,lse_bound,lse_bound_norm,sme_m,sme_diameter_bound,sme_diameter_bound_norm,sme_failure_prob\n");
            let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.t,
                    o(r.lse_bound),
                    o(r.lse_bound_norm),
                    r.sme_m.map(|m| m.to_string()).unwrap_or_default(),
                    o(r.sme_diameter_bound),
                    o(r.sme_diameter_bound_norm),
                    o(r.sme_failure_prob)
                );
            }
            (cli.out.join("bounds.csv"), s)
        }
        Format::Json => (cli.out.join("bounds.json"), to_json(&rows)?),
    };
    fs::write(&data.0, data.1).map_err(|e| io_err(&data.0, e))?;
    let meta = BoundsMeta {
        config_hash: cfg.hash(),
        config: &cfg,
        model: ModelSummary::of(&model),
        bmsb: &est,
        inputs_lse: lse_in,
        inputs_sme: sme_in,
        lse_burn_in: burn,
    };
    let mp = cli.out.join("bounds.meta.json");
    fs::write(&mp, to_json(&meta)?).map_err(|e| io_err(&mp, e))?;
    Ok(vec![
        format!("wrote {}", data.0.display()),
        format!("wrote {}", mp.display()),
        format!("least-squares burn-in: {burn}"),
    ])
}
