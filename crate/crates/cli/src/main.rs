//! `bubblesim`: run single simulations or parameter sweeps from a JSON config.
//!
//! Exit codes: 0 on success, 1 for configuration problems (including an
//! unreadable config file), 2 when outputs cannot be written.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use bubblesim::report::{surface_summary, write_results_csv, write_summary_csv, LATE_WINDOW};
use bubblesim::{run_simulation, run_sweep, Error, SimConfig, SweepOptions};
use clap::{Parser, Subcommand};
use serde::Serialize;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "bubblesim", version, about = "Filter-bubble simulation driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its per-iteration metrics.
    Run {
        /// JSON config; missing keys take their defaults.
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Results CSV; the manifest is written next to it.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Run the (p_core, p_peripheral) grid and write merged results plus a surface summary.
    Sweep {
        config: PathBuf,
        /// Spacing of both grid axes; must divide 1.
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        /// Simulations run concurrently (default: available cores).
        #[arg(long)]
        parallelism: Option<usize>,
        /// Independent worlds per grid point.
        #[arg(long, default_value_t = 1)]
        seeds_per_point: usize,
        #[arg(long, default_value = "sweep")]
        out_dir: PathBuf,
    },
    /// Check a config and print it with all defaults filled in.
    Validate { config: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Failure {
        Failure::Io(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        match err {
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, &out),
        Command::Sweep {
            config,
            grid_step,
            parallelism,
            seeds_per_point,
            out_dir,
        } => {
            let parallelism =
                parallelism.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let options = SweepOptions {
                grid_step,
                parallelism,
                seeds_per_point,
            };
            sweep(&config, options, &out_dir)
        }
        Command::Validate { config } => validate(&config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config = SimConfig::from_json_str(&text)
        .map_err(|e| Failure::Config(format!("invalid config {}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| Failure::Config(format!("invalid config {}: {e}", path.display())))?;
    Ok(config)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load_config(path)?;
    println!("{}", config.to_json_pretty());
    Ok(())
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    seed: u64,
    config_hash: &'a str,
    config: &'a SimConfig,
    results: String,
    rows: usize,
    wall_time_seconds: f64,
}

fn run(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let started = Instant::now();
    let series = run_simulation(config)?;
    let wall_time_seconds = started.elapsed().as_secs_f64();

    let manifest_path = sibling_manifest(out);
    let manifest = RunManifest {
        tool_version: VERSION,
        seed: series.seed(),
        config_hash: &series.config_hash,
        config: &series.config,
        results: file_name(out),
        rows: series.records.len(),
        wall_time_seconds,
    };
    let mut outputs = Outputs::default();
    outputs.write(out, |w| write_results_csv(w, &series.records))?;
    outputs.write(&manifest_path, |w| write_json(w, &manifest))?;
    outputs.keep();
    eprintln!(
        "wrote {} rows to {} in {wall_time_seconds:.1}s",
        series.records.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    tool_version: &'static str,
    base_config_hash: String,
    base_config: &'a SimConfig,
    grid_step: f64,
    parallelism: usize,
    seeds_per_point: usize,
    /// How each surface-summary value is computed.
    surface_statistic: String,
    runs: Vec<SweepRunEntry>,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct SweepRunEntry {
    p_core: f64,
    p_peripheral: f64,
    replicate: usize,
    seed: u64,
    config_hash: String,
}

fn sweep(config_path: &Path, options: SweepOptions, out_dir: &Path) -> Result<(), Failure> {
    let config = load_config(config_path)?;
    let started = Instant::now();
    let result = run_sweep(&config, options)?;
    let wall_time_seconds = started.elapsed().as_secs_f64();

    let records = result.records();
    let cells = surface_summary(&records);
    let manifest = SweepManifest {
        tool_version: VERSION,
        base_config_hash: config.config_hash(),
        base_config: &config,
        grid_step: options.grid_step,
        parallelism: options.parallelism,
        seeds_per_point: options.seeds_per_point,
        surface_statistic: format!("mean over the final {LATE_WINDOW} iterations of each run, then over its seeds"),
        runs: result
            .runs
            .iter()
            .map(|(run, series)| SweepRunEntry {
                p_core: run.point.p_core,
                p_peripheral: run.point.p_peripheral,
                replicate: run.replicate,
                seed: run.seed,
                config_hash: series.config_hash.clone(),
            })
            .collect(),
        wall_time_seconds,
    };

    fs::create_dir_all(out_dir).map_err(|e| Failure::io(out_dir, e))?;
    let mut outputs = Outputs::default();
    outputs.write(&out_dir.join("results.csv"), |w| write_results_csv(w, &records))?;
    outputs.write(&out_dir.join("surface_summary.csv"), |w| write_summary_csv(w, &cells))?;
    outputs.write(&out_dir.join("manifest.json"), |w| write_json(w, &manifest))?;
    outputs.keep();
    eprintln!(
        "{} runs, {} rows, {} surface cells written to {} in {wall_time_seconds:.1}s",
        result.runs.len(),
        records.len(),
        cells.len(),
        out_dir.display()
    );
    Ok(())
}

/// Files written so far by one command; removed again unless the command
/// completes and calls [`Outputs::keep`].
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(
        &mut self,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), Failure> {
        let file = File::create(path).map_err(|e| Failure::io(path, e))?;
        self.written.push(path.to_path_buf());
        let mut writer = BufWriter::new(file);
        body(&mut writer)
            .and_then(|()| writer.flush())
            .map_err(|e| Failure::io(path, e))
    }

    fn keep(mut self) {
        self.written.clear();
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}

/// `out/results.csv` -> `out/results.manifest.json`
fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}
