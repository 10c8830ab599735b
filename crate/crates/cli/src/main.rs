use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use h2grid::analytics::{self, StorageCostParams};
use h2grid::io::{self, IoError};
use h2grid::{run_rolling, synth, Mode, ModelError, RollingOptions, RollingRun, Scenario};

/// Resilience-driven dispatch of hydrogen systems in a feeder coupled to a
/// transmission market.
#[derive(Parser)]
#[command(name = "h2dispatch", version)]
struct Cli {
    /// output directory
    #[arg(long, global = true, env = "H2DISPATCH_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// relative MIP gap per window
    #[arg(long, default_value_t = 1e-3)]
    gap: f64,
    /// seconds per window
    #[arg(long)]
    time_limit: Option<u64>,
    /// solver threads (results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the whole horizon at once with every event known
    Solve {
        bundle: String,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Plan window by window, committing the first hours of each
    Roll {
        bundle: String,
        #[arg(long, default_value_t = 48)]
        window: usize,
        #[arg(long, default_value_t = 24)]
        commit: usize,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Replace the hydrogen systems with batteries of each duration
    CompareBatteries {
        bundle: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0, 4.0, 6.0, 8.0])]
        durations: Vec<f64>,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Solve and write the selected report tables
    Report {
        bundle: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![Table::Ri, Table::H2cost, Table::Dlmp])]
        tables: Vec<Table>,
        #[arg(long, value_enum, default_value_t = ModeArg::Rolling)]
        mode: ModeArg,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Check a bundle without solving it
    Validate { bundle: String },
    /// Write a bundled synthetic scenario to a directory
    Generate {
        #[arg(value_enum, default_value_t = Case::Case33_24)]
        case: Case,
        /// target directory (defaults to <out>/<case>)
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Table {
    Ri,
    H2cost,
    Dlmp,
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Table::Ri => "ri",
            Table::H2cost => "h2cost",
            Table::Dlmp => "dlmp",
        })
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Rolling,
    Perfect,
}

#[derive(ValueEnum, Clone, Copy)]
enum Case {
    #[value(name = "case33_24")]
    Case33_24,
    Tutorial,
}

/// A bundle that cannot be read or does not validate.
#[derive(Debug)]
struct BadInput(IoError);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for BadInput {}

/// Exit code 2 for bad input, 1 for anything that fails later.
struct Failure {
    code: u8,
    record: serde_json::Value,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if let Some(BadInput(io)) = e.downcast_ref::<BadInput>() {
            return Failure {
                code: 2,
                record: io.to_record(),
            };
        }
        if let Some(io) = e.downcast_ref::<IoError>() {
            return Failure {
                code: 1,
                record: io.to_record(),
            };
        }
        let mut record = serde_json::json!({ "error": format!("{e:#}") });
        if let Some(ModelError::WindowFailed { window, start, end, status, detail }) = e.downcast_ref::<ModelError>() {
            record["window"] = (*window).into();
            record["start"] = (*start).into();
            record["end"] = (*end).into();
            record["status"] = status.clone().into();
            record["detail"] = detail.clone().into();
        }
        Failure { code: 1, record }
    }
}

/// A bundle directory, `data/<name>`, or the name of a built-in scenario.
fn load(bundle: &str) -> Result<Scenario, BadInput> {
    let direct = Path::new(bundle);
    let in_data = Path::new("data").join(bundle);
    for dir in [direct, in_data.as_path()] {
        if dir.join("manifest.json").is_file() {
            return io::load_bundle(dir).map_err(BadInput);
        }
    }
    match bundle {
        "case33_24" => Ok(synth::case33_24()),
        "tutorial" => Ok(synth::tutorial()),
        _ => Err(BadInput(IoError::Io {
            file: direct.join("manifest.json"),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no bundle manifest"),
        })),
    }
}

fn options(flags: &SolveFlags, mode: Mode, window: usize, commit: usize) -> RollingOptions {
    let mut o = RollingOptions {
        window,
        commit,
        mode,
        ..RollingOptions::default()
    };
    o.solve.gap = flags.gap;
    o.solve.time_limit = flags.time_limit.map(Duration::from_secs);
    if let Some(t) = flags.threads {
        o.solve.threads = t.max(1);
    }
    o
}

fn write_logs(dir: &Path, run: &RollingRun) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = String::new();
    for l in run.logs() {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    std::fs::write(dir.join("windows.log.jsonl"), text)?;
    Ok(())
}

/// Runs, re-validates every window's schedule against its model and writes
/// the committed schedule.
fn run_and_write(s: &Scenario, opts: &RollingOptions, dir: &Path) -> Result<RollingRun> {
    let run = run_rolling(s, opts)?;
    let bad = run.revalidate(1e-5)?;
    if let Some((w, v)) = bad.first() {
        bail!("window {w}: schedule violates {} by {:.3e} ({} violations)", v.name, v.amount, bad.len());
    }
    io::write_schedule(dir, &run.solution)?;
    write_logs(dir, &run)?;
    Ok(run)
}

fn execute(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Solve { bundle, flags } => {
            let s = load(&bundle)?;
            let run = run_and_write(&s, &options(&flags, Mode::Perfect, 0, 0), &out.join(&s.name).join("solve"))?;
            println!("{}", summary(&run));
        }
        Command::Roll {
            bundle,
            window,
            commit,
            flags,
        } => {
            let s = load(&bundle)?;
            let opts = options(&flags, Mode::Rolling, window, commit);
            let run = run_and_write(&s, &opts, &out.join(&s.name).join("roll"))?;
            println!("{}", summary(&run));
        }
        Command::CompareBatteries {
            bundle,
            durations,
            flags,
        } => {
            let s = load(&bundle)?;
            let rows = analytics::run_battery_comparison(&s, &durations, &options(&flags, Mode::Rolling, 48, 24))?;
            let dir = out.join(&s.name).join("compare-batteries");
            io::write_comparison(&dir, &rows)?;
            for r in &rows {
                println!("{:<12} ENS {:>8.3} MWh  RI {:>6.2}%", r.storage, r.total_ens, r.ri);
            }
        }
        Command::Report {
            bundle,
            tables,
            mode,
            flags,
        } => {
            let s = load(&bundle)?;
            let mode = match mode {
                ModeArg::Rolling => Mode::Rolling,
                ModeArg::Perfect => Mode::Perfect,
            };
            let opts = options(&flags, mode, 48, 24);
            let dir = out.join(&s.name).join("report");
            let needs_run = tables.iter().any(|t| *t != Table::H2cost);
            let run = if needs_run { Some(run_and_write(&s, &opts, &dir)?) } else { None };
            for t in &tables {
                match t {
                    Table::Ri => {
                        let run = run.as_ref().expect("solved above");
                        let r = analytics::compute_resilience_index(&s, &run.solution, analytics::outage_hours(&s))?;
                        io::write_resilience(&dir, &r)?;
                        println!("RI {:.2}% (ENS {:.3} of {:.3} MWh)", r.ri, r.total_ens, r.total_load);
                    }
                    Table::Dlmp => {
                        let run = run.as_ref().expect("solved above");
                        io::write_dlmp(&dir, &analytics::dlmp_of_run(&s, run)?)?;
                    }
                    Table::H2cost => {
                        let rows = analytics::run_h2_cost_table(&s, &opts, &StorageCostParams::default())?;
                        io::write_h2_costs(&dir, &rows)?;
                        for r in &rows {
                            println!(
                                "{:<9} {:<4} CF {:>6.2}%  {:.2} + {:.2} = {:.2} $/kg",
                                r.mode,
                                r.report.h2_id,
                                r.report.capacity_factor * 100.0,
                                r.report.electrolysis_cost,
                                r.report.storage_cost,
                                r.report.production_cost
                            );
                        }
                    }
                }
            }
        }
        Command::Validate { bundle } => {
            let s = load(&bundle)?;
            println!(
                "{}",
                serde_json::json!({ "scenario": s.name, "valid": true, "hours": s.horizon() })
            );
        }
        Command::Generate { case, to } => {
            let s = match case {
                Case::Case33_24 => synth::case33_24(),
                Case::Tutorial => synth::tutorial(),
            };
            let dir = to.unwrap_or_else(|| out.join(&s.name));
            io::write_bundle(&dir, &s).with_context(|| format!("writing {}", dir.display()))?;
            println!("{}", dir.display());
        }
    }
    Ok(())
}

fn summary(run: &RollingRun) -> String {
    let s = &run.solution;
    format!(
        "{} hours, {} windows, objective {:.4}, gap {:.2e}, status {}",
        s.hours.len(),
        run.windows.len(),
        s.objective,
        s.mip_gap,
        serde_json::to_value(s.status).unwrap_or_default()
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let f = Failure::from(e);
            eprintln!("{}", f.record);
            ExitCode::from(f.code)
        }
    }
}
