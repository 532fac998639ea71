//! The `frlab` command-line surface: sweep / preset / bounds / check.

use std::path::{Path, PathBuf};

use crate::error::Error;

use super::acceptance;
use super::config::{Design, ExperimentConfig};
use super::output::{emit_bounds_csv, emit_csv};
use super::svg::{emit_svg_plot, PlotOptions};
use super::sweep::{bound_rows_for_point, run_sweep};

const USAGE: &str = "\
frlab - minimum-norm interpolation laboratory for factor regression

USAGE:
  frlab sweep  --config <path> --out <dir> [--seed N] [--threads N]
  frlab preset <figure1|figure2|figure4|nullrisk> [--scale F] [--out <dir>]
               [--seed N] [--threads N]
  frlab bounds --config <path> --out <dir> [--seed N] [--threads N]
  frlab check  [--threads N]

SUBCOMMANDS:
  sweep    Run the sweep described by a JSON config; writes sweep.csv,
           bounds.csv, sweep.svg, and the echoed config.json to --out.
  preset   Run a built-in design. --scale F multiplies the top of the
           gamma = p/n range (0 < F <= 1).
  bounds   Evaluate every bound calculator on the config's grid only.
  check    Run the acceptance suite; prints one pass/fail line per
           criterion and exits 0 iff all pass.

FLAGS:
  --config PATH   JSON experiment config
  --out DIR       Output directory
  --scale F       Preset gamma-range scale (default 1.0)
  --seed N        Override the config's master_seed
  --threads N     Cap worker threads (default: all cores, or FRLAB_THREADS)
";

struct Flags {
    config: Option<String>,
    out: Option<String>,
    scale: f64,
    seed: Option<u64>,
    threads: Option<usize>,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        config: None,
        out: None,
        scale: 1.0,
        seed: None,
        threads: None,
        positional: Vec::new(),
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut grab = |name: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("flag {name} needs a value"))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(grab("--config")?),
            "--out" => flags.out = Some(grab("--out")?),
            "--scale" => {
                flags.scale = grab("--scale")?
                    .parse()
                    .map_err(|e| format!("bad --scale: {e}"))?
            }
            "--seed" => {
                flags.seed = Some(
                    grab("--seed")?
                        .parse()
                        .map_err(|e| format!("bad --seed: {e}"))?,
                )
            }
            "--threads" => {
                flags.threads = Some(
                    grab("--threads")?
                        .parse()
                        .map_err(|e| format!("bad --threads: {e}"))?,
                )
            }
            "--help" | "-h" => return Err(String::new()),
            other if other.starts_with('-') => return Err(format!("unknown flag {other}")),
            other => flags.positional.push(other.into()),
        }
    }
    Ok(flags)
}

fn thread_cap(flags: &Flags) -> Option<usize> {
    flags.threads.or_else(|| {
        std::env::var("FRLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

fn load_config(path: &str) -> Result<ExperimentConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read config {path}: {e}");
        2
    })?;
    ExperimentConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        2
    })
}

fn run_and_emit(config: &ExperimentConfig, out_dir: &Path) -> Result<(), Error> {
    for warning in config.grid.warnings() {
        eprintln!("warning: {warning}");
    }
    let result = run_sweep(config)?;
    emit_csv(&result, &out_dir.join("sweep.csv"))?;
    emit_bounds_csv(&result.bounds, &out_dir.join("bounds.csv"))?;
    if !result.rows.is_empty() {
        emit_svg_plot(&result, &out_dir.join("sweep.svg"), &PlotOptions::default())?;
    }
    std::fs::write(out_dir.join("config.json"), config.to_json()).map_err(|e| Error::Io {
        path: out_dir.join("config.json").display().to_string(),
        source: e,
    })?;
    println!(
        "wrote {} sweep rows and {} bound rows to {}",
        result.rows.len(),
        result.bounds.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn run(args: &[String]) -> i32 {
    let Some((command, rest)) = args.split_first() else {
        eprint!("{USAGE}");
        return 2;
    };
    let flags = match parse_flags(rest) {
        Ok(f) => f,
        Err(msg) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            eprint!("{USAGE}");
            return 2;
        }
    };

    match command.as_str() {
        "sweep" => {
            let (Some(config_path), Some(out)) = (&flags.config, &flags.out) else {
                eprintln!("error: sweep needs --config and --out");
                return 2;
            };
            let mut config = match load_config(config_path) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(seed) = flags.seed {
                config.master_seed = seed;
            }
            let out_dir = PathBuf::from(out);
            match with_pool(thread_cap(&flags), || run_and_emit(&config, &out_dir)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        "preset" => {
            let Some(name) = flags.positional.first() else {
                eprintln!("error: preset needs a design name");
                return 2;
            };
            let design = match name.as_str() {
                "figure1" => Design::Figure1,
                "figure2" => Design::Figure2,
                "figure4" => Design::Figure4,
                "nullrisk" => Design::NullRisk,
                other => {
                    eprintln!("error: unknown preset {other}");
                    return 2;
                }
            };
            let mut config = match ExperimentConfig::preset_scaled(design, flags.scale) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return 2;
                }
            };
            if let Some(seed) = flags.seed {
                config.master_seed = seed;
            }
            if let Some(out) = &flags.out {
                config.output_dir = out.clone();
            }
            let out_dir = PathBuf::from(&config.output_dir);
            match with_pool(thread_cap(&flags), || run_and_emit(&config, &out_dir)) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        "bounds" => {
            let (Some(config_path), Some(out)) = (&flags.config, &flags.out) else {
                eprintln!("error: bounds needs --config and --out");
                return 2;
            };
            let mut config = match load_config(config_path) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(seed) = flags.seed {
                config.master_seed = seed;
            }
            let out_dir = PathBuf::from(out);
            let job = || -> Result<usize, Error> {
                let grid = config.grid.resolve()?;
                let mut rows = Vec::new();
                for (gi, gp) in grid.iter().enumerate() {
                    rows.extend(bound_rows_for_point(&config, gp, gi as u64)?);
                }
                emit_bounds_csv(&rows, &out_dir.join("bounds.csv"))?;
                std::fs::write(out_dir.join("config.json"), config.to_json()).map_err(|e| {
                    Error::Io {
                        path: out_dir.join("config.json").display().to_string(),
                        source: e,
                    }
                })?;
                Ok(rows.len())
            };
            match with_pool(thread_cap(&flags), job) {
                Ok(count) => {
                    println!("wrote {count} bound rows to {}", out_dir.display());
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        "check" => {
            let outcomes = with_pool(thread_cap(&flags), acceptance::run_all);
            let mut all_pass = true;
            for outcome in &outcomes {
                println!("{}", outcome.line());
                all_pass &= outcome.passed;
            }
            if all_pass {
                println!("all {} criteria passed", outcomes.len());
                0
            } else {
                println!("acceptance failed");
                1
            }
        }
        _ => {
            eprint!("{USAGE}");
            2
        }
    }
}
