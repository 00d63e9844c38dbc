//! `driftlab`: run one experiment from a flat config file.
//!
//! ```text
//! driftlab <classify|simulate|verify|sweep|urn> --config <path> [--seed N] [--out DIR] [--svg] [--threads N]
//! ```
//!
//! The master seed comes from `--seed`, else the config's `master_seed`, else
//! `DRIFTLAB_SEED`, else 0. Passing a `manifest.json` as `--config` reruns
//! the recorded experiment.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when `verify` finds a
//! violation, 1 on any other failure.

mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use commands::{Context, Subcommand};
use config::Config;
use error::{CliError, Result};
use manifest::{RunManifest, MANIFEST_FILE};

pub const SEED_ENV: &str = "DRIFTLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "driftlab", version, about = "Time-inhomogeneous random walk experiments")]
struct Args {
    /// Subcommand to run.
    #[arg(value_enum)]
    command: Subcommand,

    /// Flat `key = value` config, or a manifest.json to rerun.
    #[arg(long)]
    config: PathBuf,

    /// Master seed; overrides the config and the environment.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "driftlab-out")]
    out: PathBuf,

    /// Also write an SVG heatmap (sweep only).
    #[arg(long)]
    svg: bool,

    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

struct Loaded {
    config: Config,
    seed: Option<u64>,
    svg: bool,
}

fn load(args: &Args) -> Result<Loaded> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    if text.trim_start().starts_with('{') {
        let m = RunManifest::parse(&text)?;
        if Subcommand::from_name(&m.subcommand) != Some(args.command) {
            return Err(CliError::Manifest(format!(
                "manifest records subcommand `{}`, not `{}`",
                m.subcommand,
                args.command.name()
            )));
        }
        return Ok(Loaded {
            config: Config::from_map(m.config),
            seed: Some(m.master_seed),
            svg: m.svg,
        });
    }
    let mut config = Config::parse(&text)?;
    let seed = config
        .remove("master_seed")
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::Config(format!("cannot parse `{v}` for key `master_seed`")))
        })
        .transpose()?;
    Ok(Loaded {
        config,
        seed,
        svg: false,
    })
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Returns the process exit status.
fn execute(args: &Args) -> Result<u8> {
    let started = Instant::now();
    let loaded = load(args)?;
    let seed = match args.seed.or(loaded.seed) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let ctx = Context {
        seed,
        threads: args.threads,
        svg: args.svg || loaded.svg,
    };
    let result = commands::run(args.command, &loaded.config, &ctx)?;

    let written = result.outputs.write_all(&args.out)?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: args.command.name().to_string(),
        master_seed: seed,
        svg: ctx.svg,
        config: loaded.config.entries().clone(),
        outputs: result.outputs.checksums(),
        exclusions: result.exclusions,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_manifest(&args.out, &manifest) {
        manifest::remove_all(&written);
        return Err(e);
    }

    for line in &result.summary {
        println!("{line}");
    }
    for name in result.outputs.names() {
        println!("wrote {}", args.out.join(name).display());
    }
    match result.failure {
        Some(msg) => {
            eprintln!("verify failed: {msg}");
            Ok(3)
        }
        None => Ok(0),
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(m).map_err(|e| CliError::Manifest(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, json + "\n").map_err(|e| CliError::io(path, e))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
