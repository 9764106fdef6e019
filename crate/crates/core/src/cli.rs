//! The `bbma` command line.
//!
//! Every run resolves its configuration (flag, then file, then default),
//! writes one CSV and a `.meta` TOML manifest next to it, and exits 0 on
//! success, 1 on usage or config errors and 2 when a weight solve fails
//! numerically.

use chrono::{SecondsFormat, Utc};
use clap::{Parser, Subcommand};
use itertools::Itertools;
use serde::Serialize;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Profile};
use crate::experiments::{self, write_csv};
use crate::null_steering::Solver;
use crate::scheduler::{apply, dynamic_assign, static_assign, worked_example, MovePlan};
use crate::{Error, Result};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Environment variable capping the worker count; 0 or unset means one
/// worker per core.
pub const THREADS_ENV: &str = "BBMA_THREADS";

const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Parser)]
#[command(name = "bbma", version, about = "Symbol-class broadcast power allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output CSV path, or an existing directory for a timestamped name.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Also write per-trial rows to `<name>.trials.csv`.
    #[arg(long, global = true)]
    raw: bool,

    /// Array profile: paper (64 x 64) or desk (16 x 16).
    #[arg(long, global = true, value_name = "paper|desk")]
    profile: Option<Profile>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Transmit power against number of terminals.
    Fig3,
    /// Bit error rate against number of terminals for both weight solvers.
    Fig4,
    /// Error rate against spectral efficiency for the point-to-point link.
    Fig5,
    /// Null-steering residuals on uniform drops.
    CheckWeights,
    /// Eleven-terminal, two-class scheduling walk-through.
    Table1Demo,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Fig5 => "fig5",
            Command::CheckWeights => "check-weights",
            Command::Table1Demo => "table1-demo",
        }
    }
}

#[derive(Debug, Serialize)]
struct Outputs {
    csv: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<String>,
}

/// Sidecar written next to every CSV. Together with the binary version it
/// is enough to regenerate the CSV.
#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: String,
    version: String,
    seed: u64,
    profile: Profile,
    started: String,
    finished: String,
    outputs: Outputs,
    config: ExperimentConfig,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bbma: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(profile) = cli.profile {
        cfg.profile = profile;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

struct OutputPaths {
    csv: PathBuf,
    raw: PathBuf,
    meta: PathBuf,
}

fn output_paths(out: Option<&Path>, subcommand: &str, stamp: &str) -> Result<OutputPaths> {
    let timestamped = |dir: &Path| dir.join(format!("{subcommand}-{stamp}.csv"));
    let csv = match out {
        Some(p) if p.is_dir() => timestamped(p),
        Some(p) => p.to_path_buf(),
        None => timestamped(Path::new(DEFAULT_OUT_DIR)),
    };
    if let Some(parent) = csv.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(OutputPaths {
        raw: csv.with_file_name(format!("{stem}.trials.csv")),
        meta: csv.with_extension("meta"),
        csv,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let pool = thread_pool()?;
    let started = Utc::now();
    let stamp = started.format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let paths = output_paths(cli.out.as_deref(), cli.command.name(), &stamp)?;
    let mut wrote_raw = false;

    pool.install(|| -> Result<()> {
        match cli.command {
            Command::Fig3 => {
                let (rows, raw) = experiments::fig3(&cfg)?;
                write_rows(&paths.csv, &rows)?;
                if cli.raw {
                    write_rows(&paths.raw, &raw)?;
                    wrote_raw = true;
                }
            }
            Command::Fig4 => {
                let (rows, raw) = experiments::fig4(&cfg)?;
                write_rows(&paths.csv, &rows)?;
                if cli.raw {
                    write_rows(&paths.raw, &raw)?;
                    wrote_raw = true;
                }
            }
            Command::Fig5 => {
                write_rows(&paths.csv, &experiments::fig5(&cfg)?)?;
            }
            Command::CheckWeights => {
                let rows = experiments::check_weights(&cfg)?;
                for solver in Solver::ALL {
                    let worst = rows
                        .iter()
                        .filter(|r| r.solver == solver)
                        .map(|r| r.max_in_class_error.max(r.max_null_residual))
                        .fold(0.0, f64::max);
                    println!("{solver}: max |w^H a - D| = {worst:.3e}");
                }
                write_rows(&paths.csv, &rows)?;
            }
            Command::Table1Demo => {
                let (text, rows) = table1_demo()?;
                print!("{text}");
                write_rows(&paths.csv, &rows)?;
            }
        }
        Ok(())
    })?;

    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        version: VERSION.to_string(),
        seed: cfg.seed,
        profile: cfg.profile,
        started: started.to_rfc3339_opts(SecondsFormat::Millis, true),
        finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        outputs: Outputs { csv: file_name(&paths.csv), raw: wrote_raw.then(|| file_name(&paths.raw)) },
        config: cfg.resolved(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&paths.meta, text)?;
    eprintln!("wrote {}", paths.csv.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct MoveRow {
    terminal: String,
    from_class: String,
    to_class: String,
}

fn move_summary(plan: &MovePlan) -> String {
    plan.moves
        .iter()
        .into_group_map_by(|m| m.to)
        .into_iter()
        .sorted_by_key(|(to, _)| *to)
        .map(|(to, moves)| {
            let names = moves.iter().map(|m| format!("T{}", m.terminal + 1)).join(", ");
            format!("{names} -> Class{}", to + 1)
        })
        .join("; ")
}

/// The eleven-terminal scheduling walk-through as printed text plus CSV rows
/// of the dynamic moves, all 1-based.
pub fn table1_demo() -> Result<(String, Vec<impl Serialize>)> {
    let (state, demand) = worked_example();
    let dynamic = dynamic_assign(&state, &demand)?;
    let stat = static_assign(&state, &demand)?;
    let next = apply(&state, &dynamic)?;
    let binding = dynamic
        .symbol_of_class
        .iter()
        .enumerate()
        .map(|(c, s)| format!("S{} -> Class{}", s + 1, c + 1))
        .join(", ");
    let members = (0..next.order())
        .map(|c| {
            let ts = next.members(c).iter().map(|t| format!("T{}", t + 1)).join(", ");
            format!("Class{}: {{{ts}}}\n", c + 1)
        })
        .collect::<String>();
    let text = format!(
        "Dynamic allocation: {binding}\n\
         Moves: {}\n\
         Total moves: {}\n\
         {members}\
         Static allocation would move {} terminals\n",
        move_summary(&dynamic),
        dynamic.move_count(),
        stat.move_count(),
    );
    let rows = dynamic
        .moves
        .iter()
        .map(|m| MoveRow {
            terminal: format!("T{}", m.terminal + 1),
            from_class: format!("Class{}", m.from + 1),
            to_class: format!("Class{}", m.to + 1),
        })
        .collect();
    Ok((text, rows))
}
