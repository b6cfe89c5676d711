use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fadecap::config::{OutputFormat, SweepConfig};
use fadecap::direct::SchemeParams;
use fadecap::oracle::{self, CheckReport, SuiteBudget};
use fadecap::sweep::{self, Which};
use fadecap::{par, Error, Result};

#[derive(Parser)]
#[command(name = "fadecap", version, about = "Capacity bounds for noncoherent multipath fading channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate upper and lower bounds over the SNR grid.
    Sweep(SweepArgs),
    /// Run the Monte Carlo oracle suite; exits nonzero if any check fails.
    Verify(VerifyArgs),
    /// Print path statistics for a config.
    Stats(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config; the built-in demo config is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundFlags {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "eps-const")]
    eps_const: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    tau: Option<usize>,
    #[arg(long = "tau-max")]
    tau_max: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    bounds: BoundFlags,
    /// Output file; a `<output>.meta.json` sidecar is written next to it.
    /// Points go to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also print pre-loglog slope fits to stderr.
    #[arg(long)]
    fit: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Block length of the test scheme.
    #[arg(long, default_value_t = 4)]
    tau: usize,
    #[arg(long = "mi-samples", default_value_t = 100_000)]
    mi_samples: usize,
    #[arg(long = "moment-samples", default_value_t = 1_000_000)]
    moment_samples: usize,
    /// Report file (JSON); stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn load(common: &CommonArgs) -> Result<SweepConfig> {
    let mut cfg = match &common.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::demo(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_bound_flags(cfg: &mut SweepConfig, flags: &BoundFlags) -> Result<()> {
    let b = &mut cfg.bounds;
    if let Some(v) = flags.delta {
        b.delta = v;
    }
    if let Some(v) = flags.eta {
        b.eta = v;
    }
    if let Some(v) = flags.eps_const {
        b.eps_const = v;
    }
    if let Some(v) = flags.xi {
        b.xi = Some(v);
        b.optimize_xi = false;
    }
    if flags.tau.is_some() {
        cfg.tau = flags.tau;
    }
    if let Some(v) = flags.tau_max {
        cfg.tau_max = v;
    }
    cfg.validate()
}

fn write_or_print(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let mut cfg = load(&args.common)?;
    apply_bound_flags(&mut cfg, &args.bounds)?;
    if let Some(f) = args.format {
        cfg.output_format = f.into();
    }
    let out = sweep::run_sweep(&cfg)?;
    match &args.output {
        Some(path) => sweep::write_output(&out, path, cfg.output_format)?,
        None => write_or_print(None, &sweep::emit(&out.points, cfg.output_format)?)?,
    }
    if !out.metadata.upper_below_lower.is_empty() {
        eprintln!(
            "warning: upper < lower at grid indices {:?} (constants_certified = {})",
            out.metadata.upper_below_lower, out.metadata.constants_certified
        );
    }
    if args.fit && out.points.len() >= 3 {
        for which in [Which::Upper, Which::Lower] {
            let fit = sweep::fit_preloglog_slope(&out.points, which)?;
            eprintln!(
                "{which:?}: slope {:.6} intercept {:.6} rms residual {:.3e}",
                fit.slope, fit.intercept, fit.residual
            );
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    workers: usize,
    tau: usize,
    schedule_valid: bool,
    budget: SuiteBudget,
    checks: Vec<CheckReport>,
    pass: bool,
}

fn cmd_verify(args: VerifyArgs, workers: usize) -> Result<bool> {
    let cfg = load(&args.common)?;
    let channel = &cfg.channel;
    let scheme = SchemeParams::default_schedule_unchecked(args.tau, channel.log_power(), channel.num_paths())?;
    let budget = SuiteBudget {
        mi_samples: args.mi_samples,
        moment_samples: args.moment_samples,
    };
    let checks = oracle::run_suite(channel, &scheme, budget, cfg.seed)?;
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!(
            "{} {:<40} lhs {:>14.6e} rhs {:>14.6e} se {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.lhs,
            c.rhs,
            c.std_error
        );
    }
    let report = VerifyReport {
        seed: cfg.seed,
        workers,
        tau: args.tau,
        schedule_valid: scheme.is_valid(),
        budget,
        checks,
        pass,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_or_print(args.output.as_ref(), text.as_bytes())?;
    Ok(pass)
}

#[derive(Serialize)]
struct PathRow {
    path: usize,
    alpha: f64,
    entropy_rate: f64,
    mean_log_gain: f64,
}

fn cmd_stats(args: CommonArgs) -> Result<bool> {
    let cfg = load(&args)?;
    let rows: Vec<PathRow> = cfg
        .channel
        .path_stats()
        .into_iter()
        .map(|(path, s)| PathRow {
            path,
            alpha: s.alpha,
            entropy_rate: s.entropy_rate,
            mean_log_gain: s.mean_log_gain,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows)?;
    text.push('\n');
    write_or_print(None, text.as_bytes())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = par::init_from_env();
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a, workers),
        Command::Stats(a) => cmd_stats(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
