use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctms_core::error::{Error, ScenarioError};
use ctms_core::metrics::{peak, pi_index};
use ctms_core::report::{read_delta_column, write_sweep_csv, write_trajectory_csv, RunSummary};
use ctms_core::scenario::{parse_document, preset_document, Scenario, ScenarioDoc, PRESETS};
use ctms_core::sim::simulate;
use ctms_core::sweep::{sweep, SweepGrid};

#[derive(Parser)]
#[command(
    name = "ctms",
    version,
    about = "Highway traffic simulator with service stations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory CSV.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Trajectory CSV; `-` for stdout.
        #[arg(long)]
        out: PathBuf,
        /// `auto` runs the station-free baseline, `none` skips it, anything
        /// else is read as a trajectory CSV.
        #[arg(long, default_value = "auto")]
        baseline: String,
        /// Also write the summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run a grid over split ratio, dwell and mainstream priority.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Inline `beta_s=..;delta_min=..;p_ms=..`, a JSON object, or a path to one.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Run grid points one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Peak reduction of a scenario against a baseline.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "auto")]
        baseline: String,
    },
    /// Print the resolved document of a preset.
    Preset { name: String },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Scenario(_) => 2,
        Error::Model(_) => 3,
        _ => 1,
    }
}

fn load_doc(path: &Path) -> Result<ScenarioDoc, Error> {
    let text = std::fs::read_to_string(path).map_err(ScenarioError::Io)?;
    Ok(parse_document(&text)?)
}

fn open_out(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

/// Baseline peak delay: from a station-free run or a trajectory CSV.
fn baseline_series(scenario: &Scenario, source: &str) -> Result<Option<Vec<f64>>, Error> {
    match source {
        "none" => Ok(None),
        "auto" => {
            if scenario.topology.stations.is_empty() {
                return Ok(None);
            }
            let base = scenario.baseline();
            Ok(Some(simulate(&base)?.delta_series()))
        }
        path => {
            let file = File::open(path).map_err(ScenarioError::Io)?;
            Ok(Some(read_delta_column(file)?))
        }
    }
}

fn run(
    scenario_path: &Path,
    out: &Path,
    baseline: &str,
    summary_path: Option<&Path>,
) -> Result<(), Error> {
    let scenario = load_doc(scenario_path)?.resolve()?;
    let trajectory = simulate(&scenario)?;
    write_trajectory_csv(open_out(out)?, &scenario, &trajectory)?;

    let mut summary = RunSummary::new(&scenario, &trajectory);
    if let Some(base) = baseline_series(&scenario, baseline)? {
        let pi = pi_index(&base, &trajectory.delta_series())?;
        summary = summary.with_pi(peak(&base)?, pi);
    }
    if let Some(path) = summary_path {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(path, json + "\n")?;
    }
    eprint!("{}", summary.to_text());
    Ok(())
}

fn run_sweep(scenario_path: &Path, grid: &str, out: &Path, serial: bool) -> Result<(), Error> {
    let doc = load_doc(scenario_path)?;
    let grid_text = if !grid.trim_start().starts_with('{') && Path::new(grid).is_file() {
        std::fs::read_to_string(grid)?
    } else {
        grid.to_string()
    };
    let grid = SweepGrid::parse(&grid_text)?;
    let rows = sweep(&doc, &grid, !serial)?;
    write_sweep_csv(open_out(out)?, &rows)?;
    eprintln!("{} grid points", rows.len());
    Ok(())
}

fn run_compare(scenario_path: &Path, baseline: &str) -> Result<(), Error> {
    let scenario = load_doc(scenario_path)?.resolve()?;
    let base = baseline_series(&scenario, baseline)?.ok_or_else(|| {
        ScenarioError::Invalid(vec![
            "nothing to compare against: the scenario has no stations; pass --baseline <csv>"
                .into(),
        ])
    })?;
    let trajectory = simulate(&scenario)?;
    let variant = trajectory.delta_series();
    println!(
        "baseline_delta_max_s={}",
        ctms_core::report::fmt_sig(peak(&base)?)
    );
    println!(
        "delta_max_s={}",
        ctms_core::report::fmt_sig(peak(&variant)?)
    );
    println!(
        "pi={}",
        ctms_core::report::fmt_sig(pi_index(&base, &variant)?)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            out,
            baseline,
            summary,
        } => run(scenario, out, baseline, summary.as_deref()),
        Command::Sweep {
            scenario,
            grid,
            out,
            serial,
        } => run_sweep(scenario, grid, out, *serial),
        Command::Compare { scenario, baseline } => run_compare(scenario, baseline),
        Command::Preset { name } => preset_document(name)
            .map(|doc| {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&doc).expect("serializes")
                )
            })
            .map_err(|e| {
                eprintln!("known presets: {}", PRESETS.join(", "));
                Error::from(e)
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
