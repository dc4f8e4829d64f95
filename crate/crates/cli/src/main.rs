use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use qtriplet::pipeline::{self, AnalysisConfig, EXIT_CONFIG};
use qtriplet::synthgen::{self, SynthKind, SynthParams};
use qtriplet::timeseries;
use qtriplet::validate::{self, Status, ValidateOptions};

#[derive(Parser)]
#[command(name = "qtriplet", version, about = "Tsallis q-triplet, GHE and Q-metric analysis of daily close prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the per-market analysis described by a JSON config.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed (overrides the config's seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in oracle suite.
    Validate {
        /// Only items whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Write a synthetic price series as `date,close` CSV.
    Synth {
        /// fbm, gaussian, qgaussian-returns or cascade.
        #[arg(long)]
        kind: String,
        /// Generator parameters as key=value, comma separated or repeated
        /// (e.g. hurst=0.7,n=16384).
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_params(raw: &[String]) -> anyhow::Result<Vec<(String, f64)>> {
    raw.iter()
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').with_context(|| format!("parameter '{kv}' is not key=value"))?;
            let v: f64 = v.trim().parse().with_context(|| format!("parameter '{k}' is not a number"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn analyze(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<i32> {
    let mut cfg = AnalysisConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let out_dir = out
        .or_else(|| cfg.output_dir.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) }))
        .unwrap_or_else(|| PathBuf::from("qtriplet-out"));
    let result = pipeline::analyze(&cfg, base)?;
    pipeline::write_bundle(&result, &out_dir)?;
    for m in &result.report.markets {
        for w in &m.warnings {
            eprintln!("warning [{}]: {w}", m.market);
        }
        let failed = m.periods.iter().filter(|p| !p.errors.is_empty()).count();
        println!("{}: {} periods, {failed} with estimator errors", m.market, m.periods.len());
    }
    println!("report written to {}", out_dir.display());
    Ok(result.exit_code)
}

fn run_validate(filter: Option<&str>) -> anyhow::Result<i32> {
    let items = validate::run(filter, &ValidateOptions::default());
    if items.is_empty() {
        bail!(
            "no validation item matches '{}' (items: {})",
            filter.unwrap_or_default(),
            validate::item_names().join(", ")
        );
    }
    for it in &items {
        let tag = match it.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        };
        println!("{tag} {:<24} measured: {}  expected: {}", it.name, it.measured, it.expected);
    }
    let failed = items.iter().filter(|i| i.status == Status::Fail).count();
    println!("{} items, {failed} failed", items.len());
    Ok(0)
}

fn synth(kind: &str, params: &[String], out: &Path) -> anyhow::Result<i32> {
    let kind: SynthKind = kind.parse()?;
    let params = parse_params(params)?;
    let series = synthgen::synthesize(kind, &SynthParams(&params))?;
    timeseries::write_price_csv(&series, out)?;
    println!("wrote {} closes to {}", series.len(), out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { config, out, seed } => analyze(&config, out, seed),
        Command::Validate { filter } => run_validate(filter.as_deref()),
        Command::Synth { kind, params, out } => synth(&kind, &params, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
