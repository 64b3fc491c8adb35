use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cpadetect::detector::DetectorMode;
use cpadetect::error::Result;
use cpadetect::harness::accuracy::{accuracy, AccuracyConfig};
use cpadetect::harness::bench::{bench, memory_footprint};
use cpadetect::harness::calibrate::{calibrate, CalibrationConfig};
use cpadetect::harness::chart::render_all;
use cpadetect::harness::complexity::complexity;
use cpadetect::harness::run::{run_scenario, write_artifacts, RunOptions};
use cpadetect::harness::sweep::{sweep, write_sweep};
use cpadetect::harness::{write_csv, write_json};
use cpadetect::lfm::SketchConfig;
use cpadetect::scenario::{builtin, builtin_names, ScenarioSpec};

#[derive(Parser)]
#[command(name = "cpadetect", version, about = "Cache-pollution attack detection experiments")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Divide traffic rates, store sizes and catalog by this factor.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, global = true, value_enum, default_value_t = DetectorMode::Elda)]
    detector: DetectorMode,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (built-in name or TOML file).
    Run { scenario: String },
    /// Run every attack scenario and no-attack control.
    Sweep {
        /// Restrict to these scenarios.
        #[arg(long, value_delimiter = ',')]
        scenarios: Vec<String>,
        /// Repeat the sweep under each seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Also write per-run artifact directories.
        #[arg(long)]
        per_run: bool,
    },
    /// Estimation accuracy against an exact counter.
    Accuracy {
        #[arg(long, value_delimiter = ',', default_values_t = [256usize, 1024])]
        bitmaps: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1_000, 10_000, 100_000])]
        cardinalities: Vec<u64>,
        #[arg(long, default_value_t = 30)]
        trials: u64,
    },
    /// Hash and scan counts per insert.
    Complexity {
        #[arg(long, default_value_t = 1_000_000)]
        inserts: u64,
    },
    /// Fit the estimator constants.
    Calibrate {
        #[arg(long, default_value_t = 50)]
        trials: u64,
    },
    /// Insert-path throughput and memory footprint.
    Bench {
        #[arg(long, default_value_t = 1_000_000)]
        interests: usize,
        #[arg(long, default_value_t = 256)]
        bitmaps: usize,
        #[arg(long, default_value_t = 3)]
        rounds: usize,
    },
    /// Render SVG charts from sweep and bench outputs.
    Chart {
        /// Directory holding sweep_series.csv and friends; defaults to --out.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// List built-in scenarios and write them as TOML files.
    Scenarios,
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(1);
    let opts = RunOptions {
        seed: cli.seed,
        scale: cli.scale,
        detector: cli.detector,
        record_trace: true,
    };
    let out = cli.out.as_path();
    match cli.command {
        Command::Run { scenario } => {
            let spec = ScenarioSpec::resolve(&scenario)?;
            let result = run_scenario(&spec, &opts)?;
            write_artifacts(&result, &out.join(&result.summary.scenario))?;
            print_json(&result.summary)?;
        }
        Command::Sweep {
            scenarios,
            seeds,
            per_run,
        } => {
            let o = sweep(&scenarios, &seeds, &RunOptions {
                record_trace: per_run,
                ..opts
            })?;
            write_sweep(&o, out, per_run)?;
            for r in &o.rows {
                print_json(r)?;
            }
        }
        Command::Accuracy {
            bitmaps,
            cardinalities,
            trials,
        } => {
            let rows = accuracy(&AccuracyConfig {
                bitmaps,
                cardinalities,
                trials,
                seed,
                ..Default::default()
            })?;
            write_csv(&out.join("accuracy.csv"), &rows)?;
            for r in &rows {
                print_json(r)?;
            }
        }
        Command::Complexity { inserts } => {
            let r = complexity(SketchConfig::default(), inserts, seed)?;
            write_json(&out.join("complexity.json"), &r)?;
            print_json(&r)?;
        }
        Command::Calibrate { trials } => {
            let r = calibrate(&CalibrationConfig {
                trials,
                seed,
                ..Default::default()
            })?;
            write_json(&out.join("calibration.json"), &r)?;
            print_json(&r)?;
        }
        Command::Bench {
            interests,
            bitmaps,
            rounds,
        } => {
            let r = bench(bitmaps, interests, rounds, seed)?;
            write_json(&out.join("bench.json"), &r)?;
            let sketch = SketchConfig::new(32, 8, bitmaps)?;
            let memory = [1_000, 10_000]
                .into_iter()
                .map(|n| memory_footprint(n, sketch))
                .collect::<Result<Vec<_>>>()?;
            write_csv(&out.join("memory.csv"), &memory)?;
            print_json(&r)?;
            for m in &memory {
                print_json(m)?;
            }
        }
        Command::Chart { input } => {
            let input = input.as_deref().unwrap_or(out);
            for p in render_all(input, out)? {
                println!("{}", p.display());
            }
        }
        Command::Scenarios => export_scenarios(out)?,
    }
    Ok(())
}

fn export_scenarios(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for name in builtin_names() {
        let spec = builtin(&name)?;
        let path = dir.join(format!("{name}.toml"));
        std::fs::write(&path, spec.to_toml()?)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

