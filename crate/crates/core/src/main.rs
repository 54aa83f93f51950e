use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use kplane_audit::audit::{
    default_seed, emit_report, exit_code, run_suite, write_report, AuditRecord, ReportFormat, Suite, SuiteConfig,
};
use kplane_audit::constants::DimPair;
use kplane_audit::weight::{calibrate, Calibration, DEFAULT_CALIBRATION_PATH};
use kplane_audit::{AuditError, Result};

#[derive(Parser)]
#[command(name = "kplane-audit", version, about = "Numerical audits of sharp k-plane Strichartz estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run audit suites and emit a report.
    Run(RunArgs),
    /// Fit the constant of the quadratic weight form and write a calibration file.
    Calibrate(CalibrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

#[derive(Args)]
struct RunArgs {
    /// Suite name, comma-separated names, or `all`; reports follow the fixed suite order.
    #[arg(long)]
    suite: String,
    /// Ambient dimension; restricts pair-indexed suites to (d, k).
    #[arg(long)]
    d: Option<usize>,
    /// Plane dimension; must be given with --d.
    #[arg(long)]
    k: Option<usize>,
    /// Monte Carlo sample count (per-suite default when omitted).
    #[arg(long)]
    samples: Option<usize>,
    /// Root seed [default: $KPLANE_AUDIT_SEED, else 20240917].
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance for exact-identity checks (per-check default when omitted).
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Calibration file for the quadratic weight constants.
    #[arg(long, default_value = DEFAULT_CALIBRATION_PATH)]
    calibration: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Pairs to fit, as `d,k`.
    #[arg(long = "pair", value_parser = parse_pair, default_values = ["3,1", "6,5"])]
    pairs: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 100)]
    configs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = DEFAULT_CALIBRATION_PATH)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (d, k) = s.split_once(',').ok_or("expected d,k")?;
    let d = d.trim().parse().map_err(|e| format!("{e}"))?;
    let k = k.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((d, k))
}

fn run(args: RunArgs) -> Result<i32> {
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Markdown => ReportFormat::Markdown,
    };
    let names: Vec<String> = if args.suite == "all" {
        Suite::ALL.iter().map(|s| s.name().to_string()).collect()
    } else {
        let mut listed = args
            .suite
            .split(',')
            .map(|n| n.trim().parse::<Suite>())
            .collect::<Result<Vec<_>>>()?;
        listed.sort_by_key(|s| Suite::ALL.iter().position(|a| a == s));
        listed.dedup();
        listed.iter().map(|s| s.name().to_string()).collect()
    };
    let configs: Vec<SuiteConfig> = names
        .iter()
        .map(|name| SuiteConfig {
            suite: name.clone(),
            d: args.d,
            k: args.k,
            samples: args.samples,
            seed,
            tol: args.tol,
            out: args.out.clone(),
            format,
            calibration: args.calibration.clone(),
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let results: Vec<Result<Vec<AuditRecord>>> = configs.par_iter().map(run_suite).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let doc = emit_report(&records, format)?;
    match &args.out {
        Some(path) => write_report(path, &doc)?,
        None => print!("{doc}"),
    }
    Ok(exit_code(&records))
}

fn run_calibrate(args: CalibrateArgs) -> Result<i32> {
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let mut cal = Calibration::default();
    for (d, k) in args.pairs {
        let pair = DimPair::new(d, k).map_err(|e| AuditError::Config(e.to_string()))?;
        let fit = calibrate(pair, args.configs, args.samples, seed)?;
        eprintln!(
            "{pair}: kappa = {:.10e} ± {:.2e}, max relative residual {:.3e}",
            fit.entry.kappa, fit.entry.stderr, fit.entry.max_rel_residual
        );
        cal.insert(pair, fit.entry);
    }
    write_report(&args.out, &cal.render())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Calibrate(a) => run_calibrate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                AuditError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
