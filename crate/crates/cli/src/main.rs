use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ergocov::cga::KinematicChain;
use ergocov::fixtures::wavy_sheet;
use ergocov::harness::{
    benchmark, control_demo, demo_csv, parse_runs_csv, parse_trace_csv, prepare, rows_json,
    run_scenario, run_sweep, BenchMode, DemoConfig, ScenarioConfig, SweepSpec,
};
use ergocov::laplacian::LaplacianParams;
use ergocov::pointcloud::PointCloud;
use ergocov::Error;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "ergocov", version, about = "Ergodic coverage on point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the Laplacian and spectral basis of a cloud and report them.
    Preprocess {
        cloud: PathBuf,
        #[arg(long = "n-m", default_value_t = 100)]
        n_modes: usize,
        #[arg(long, default_value_t = LaplacianParams::default().k)]
        k: usize,
        #[arg(long, default_value_t = LaplacianParams::default().mollify)]
        mollify: f64,
    },
    /// Run one scenario from a JSON config.
    Simulate {
        config: PathBuf,
        /// Override a config field, `key=value` (value parsed as JSON when possible).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a parameter sweep.
    Sweep {
        config: PathBuf,
        /// Grid axis, `key=v1,v2,...` or `key=[json values]`. Replaces the file's axis.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time preprocessing or one diffusion step for both solution routes.
    Benchmark {
        #[arg(long, value_delimiter = ',', default_values_t = [2000, 4000])]
        sizes: Vec<usize>,
        #[arg(long, default_value = "diffuse")]
        mode: String,
        #[arg(long = "n-m", default_value_t = 100)]
        n_modes: usize,
        /// Cloud to downsample; a generated 10k-point wavy sheet by default.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Step the toy joint integrator under the line-tracking controller and
    /// print a CSV. Not a dynamics simulation.
    ControlDemo {
        /// JSON file with demo settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Desired normal force.
        #[arg(long)]
        force: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert a run directory (trace.csv) or sweep directory (runs.csv).
    Export {
        dir: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            Error::Phase { ref source, .. } if matches!(**source, Error::Config(_)) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn read_config(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| config_error(path, e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn split_pair(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .ok_or_else(|| Failure::Config(format!("expected key=value, got {s:?}")))
}

fn grid_values(raw: &str) -> Result<Vec<Value>, Failure> {
    if raw.trim_start().starts_with('[') {
        return serde_json::from_str(raw).map_err(|e| Failure::Config(format!("{raw}: {e}")));
    }
    Ok(raw
        .split(',')
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
        .collect())
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            std::fs::write(path, text).map_err(|e| Failure::Runtime(e.to_string()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Preprocess {
            cloud,
            n_modes,
            k,
            mollify,
        } => {
            let params = LaplacianParams { k, mollify };
            if n_modes == 0 || k < 6 || !(mollify >= 0.0) {
                return Err(Failure::Config(
                    "need n-m ≥ 1, k ≥ 6 and a nonnegative mollification".into(),
                ));
            }
            let points = PointCloud::load(&cloud)?;
            let prep = prepare(points, &params, Some(n_modes))?;
            let basis = prep.basis.as_ref().expect("basis was requested");
            let report = json!({
                "n_points": prep.cloud.len(),
                "spacing": prep.spacing,
                "n_modes": basis.len(),
                "orthonormality_error": basis.orthonormality_error(),
                "eigenvalues": basis.eigenvalues(),
                "seconds": prep.seconds,
            });
            emit(&pretty(&report), None)
        }
        Command::Simulate {
            config,
            overrides,
            output,
        } => {
            let mut cfg = ScenarioConfig::from_json(&read_config(&config)?)
                .map_err(|e| config_error(&config, e))?;
            for o in &overrides {
                let (key, value) = split_pair(o)?;
                cfg.apply_override(key, value)?;
            }
            let base = base_dir(&config);
            if let Some(out) = output {
                // relative to the working directory, unlike paths in the file
                cfg.output = Some(std::env::current_dir().map_or(out.clone(), |d| d.join(out)));
            }
            let trace = run_scenario(&cfg, &base)?;
            emit(&pretty(&json!(trace.summary)), None)
        }
        Command::Sweep {
            config,
            grid,
            workers,
            output,
        } => {
            let mut spec = SweepSpec::from_json(&read_config(&config)?)
                .map_err(|e| config_error(&config, e))?;
            for g in &grid {
                let (key, raw) = split_pair(g)?;
                spec.grid.insert(key.to_string(), grid_values(raw)?);
            }
            if workers.is_some() {
                spec.workers = workers;
            }
            let report = run_sweep(&spec, &base_dir(&config))?;
            if let Some(dir) = &output {
                report.write(dir)?;
            }
            emit(&pretty(&json!(report.cells)), None)
        }
        Command::Benchmark {
            sizes,
            mode,
            n_modes,
            cloud,
        } => {
            let mode: BenchMode = mode.parse()?;
            let base = match cloud {
                Some(p) => PointCloud::load(&p)?,
                None => wavy_sheet(100, 100, 1.0, 3.0, 1),
            };
            let rows = benchmark(&base, &sizes, n_modes, mode, &LaplacianParams::default())?;
            emit(&(rows_json(&rows) + "\n"), None)
        }
        Command::ControlDemo {
            config,
            steps,
            force,
            output,
        } => {
            let mut cfg = match &config {
                Some(path) => serde_json::from_str::<DemoConfig>(&read_config(path)?)
                    .map_err(|e| config_error(path, e))?,
                None => DemoConfig::default(),
            };
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(f) = force {
                cfg.force = f;
            }
            let records = control_demo(&KinematicChain::panda_like(), &cfg)?;
            emit(&demo_csv(&records), output.as_deref())
        }
        Command::Export {
            dir,
            format,
            output,
        } => export(&dir, format, output.as_deref()),
    }
}

fn export(dir: &Path, format: Format, output: Option<&Path>) -> Result<(), Failure> {
    let read = |name: &str| std::fs::read_to_string(dir.join(name));
    if let Ok(text) = read("trace.csv") {
        let records = parse_trace_csv(&text)?;
        return match format {
            Format::Csv => emit(&text, output),
            Format::Json => {
                let rows: Vec<Value> = records
                    .iter()
                    .map(|r| {
                        json!({
                            "step": r.step,
                            "position": [r.position.x, r.position.y, r.position.z],
                            "speed": r.speed,
                            "ergodicity": r.ergodicity,
                            "source_l1": r.source_l1,
                        })
                    })
                    .collect();
                emit(&pretty(&Value::Array(rows)), output)
            }
        };
    }
    if let Ok(text) = read("runs.csv") {
        let runs = parse_runs_csv(&text)?;
        return match format {
            Format::Csv => emit(&text, output),
            Format::Json => emit(&pretty(&json!(runs)), output),
        };
    }
    Err(Failure::Config(format!(
        "{} holds neither trace.csv nor runs.csv",
        dir.display()
    )))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("ergocov: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("ergocov: {msg}");
            ExitCode::from(3)
        }
    }
}
