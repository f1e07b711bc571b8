//! `lmba` command-line front-end: phase-offset sweeps, load trajectories,
//! phase-shifter alignment, graph dumps and Touchstone validation.

pub mod config;
mod error;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lmba_core::lmba::{
    align_phase_shifter, build_graph, phase_offset, phase_offset_from_graph, trajectory_sweep, LmbaTopology,
};
use lmba_core::netcore::FrequencyGrid;
use lmba_core::touchstone::{read_file, serialize};

pub use config::{parse_config, LoadedConfig, TopologyConfig};
pub use error::CliError;

/// Offset window the alignment is judged against, in degrees.
pub const OFFSET_LIMIT_DEG: f64 = 30.0;

#[derive(Debug, Parser)]
#[command(
    name = "lmba",
    version,
    about = "Signal-flow analysis of load-modulated balanced amplifiers"
)]
pub struct Cli {
    /// Topology description (JSON). Defaults to the built-in decade-band fixture.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the number of grid points.
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Suppress the summary.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BA-minus-CA path phase per frequency (CSV: freq_hz,offset_deg).
    Offset,
    /// BA load reflection per frequency and drive level
    /// (CSV: freq_hz,drive,re_gamma,im_gamma).
    Trajectory,
    /// Search the phase-shifter length; `--out` receives the updated config.
    Align,
    /// DOT dump of the flow graph.
    Graph {
        /// Grid index whose branch gains label the edges (default: middle).
        #[arg(long)]
        freq_index: Option<usize>,
    },
    /// Validate a Touchstone file; `--out` receives its canonical form.
    Parse { file: PathBuf },
}

/// Data for `--out` (or stdout) plus the human-readable summary.
struct Report {
    data: String,
    summary: Vec<String>,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let shown = match &cli.out {
                Some(path) => write_atomic(path, &report.data).map(|_| true),
                None => stdout
                    .write_all(report.data.as_bytes())
                    .map(|_| false)
                    .map_err(|source| CliError::Output {
                        path: "<stdout>".into(),
                        source,
                    }),
            };
            match shown {
                Ok(to_file) => {
                    if !cli.quiet {
                        let sink: &mut dyn Write = if to_file { stdout } else { stderr };
                        for line in &report.summary {
                            let _ = writeln!(sink, "{line}");
                        }
                    }
                    0
                }
                Err(e) => {
                    let _ = writeln!(stderr, "lmba: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "lmba: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    if let Command::Parse { file } = &cli.command {
        return cmd_parse(file);
    }
    let loaded = match &cli.config {
        Some(path) => LoadedConfig::read(path)?,
        None => LoadedConfig::builtin(),
    };
    let grid = loaded.grid(cli.grid_points)?;
    let topology = loaded.topology(&grid)?;
    match &cli.command {
        Command::Offset => cmd_offset(&topology),
        Command::Trajectory => cmd_trajectory(&loaded, &topology),
        Command::Align => cmd_align(&loaded, &topology, &grid, cli.out.is_some()),
        Command::Graph { freq_index } => cmd_graph(&topology, &grid, *freq_index),
        Command::Parse { .. } => unreachable!("handled above"),
    }
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn cmd_offset(t: &LmbaTopology) -> Result<Report, CliError> {
    let offsets = phase_offset(t);
    let from_graph = phase_offset_from_graph(t).map_err(CliError::compute)?;
    let mut data = String::from("freq_hz,offset_deg\n");
    for (f, o) in t.grid().iter().zip(&offsets) {
        let _ = writeln!(data, "{},{}", num(f), num(*o));
    }
    let worst = max_abs(&offsets);
    let verdict = if worst <= OFFSET_LIMIT_DEG { "PASS" } else { "FAIL" };
    Ok(Report {
        data,
        summary: vec![
            format!(
                "max |offset| = {worst:.3} deg over {} points: {verdict} (limit {OFFSET_LIMIT_DEG} deg)",
                offsets.len()
            ),
            format!("graph-derived max |offset| = {:.3} deg", max_abs(&from_graph)),
        ],
    })
}

fn cmd_trajectory(loaded: &LoadedConfig, t: &LmbaTopology) -> Result<Report, CliError> {
    let profile = loaded.drive_profile()?;
    let traj = trajectory_sweep(t, &profile).map_err(CliError::compute)?;
    let mut data = String::from("freq_hz,drive,re_gamma,im_gamma\n");
    for (f, trace) in traj.frequencies.iter().zip(&traj.traces) {
        for p in trace {
            let _ = writeln!(
                data,
                "{},{},{},{}",
                num(*f),
                num(p.drive),
                num(p.gamma.re),
                num(p.gamma.im)
            );
        }
    }
    Ok(Report {
        data,
        summary: vec![
            format!(
                "{} frequencies x {} drive levels, back-off {} dB",
                traj.frequencies.len(),
                profile.levels.len(),
                profile.obo_target_db
            ),
            format!("max trajectory spread |dGamma| = {:.3e}", traj.max_spread()),
        ],
    })
}

fn cmd_align(loaded: &LoadedConfig, t: &LmbaTopology, grid: &FrequencyGrid, rewrite: bool) -> Result<Report, CliError> {
    let sweep = loaded.length_sweep(grid);
    let a = align_phase_shifter(t, &sweep).map_err(|e| match e {
        lmba_core::lmba::LmbaError::SearchRange(m) => CliError::Config(format!("align: {m}")),
        other => CliError::compute(other),
    })?;
    let verdict = if a.max_offset_deg <= OFFSET_LIMIT_DEG {
        "PASS"
    } else {
        "FAIL"
    };
    let summary = vec![
        format!(
            "best phase-shifter length = {:.3} deg at {} Hz",
            a.best_length_deg,
            num(a.f0)
        ),
        format!(
            "max |offset| = {:.3} deg: {verdict} (limit {OFFSET_LIMIT_DEG} deg)",
            a.max_offset_deg
        ),
    ];
    let data = if rewrite {
        let mut updated = loaded.config.clone();
        updated.blocks.phase_shifter = config::BlockConfig::Line {
            length_deg: a.best_length_deg,
            f0_hz: a.f0,
        };
        let mut text = serde_json::to_string_pretty(&updated).expect("config serializes");
        text.push('\n');
        text
    } else {
        format!("{},{},{}\n", num(a.best_length_deg), num(a.f0), num(a.max_offset_deg))
    };
    Ok(Report { data, summary })
}

fn cmd_graph(t: &LmbaTopology, grid: &FrequencyGrid, freq_index: Option<usize>) -> Result<Report, CliError> {
    let k = freq_index.unwrap_or(grid.len() / 2);
    if k >= grid.len() {
        return Err(CliError::Config(format!(
            "frequency index {k} is outside the {}-point grid",
            grid.len()
        )));
    }
    let g = build_graph(t).map_err(CliError::compute)?;
    Ok(Report {
        data: g.to_dot(k),
        summary: vec![format!(
            "{} nodes, {} branches, gains at {} Hz",
            g.n_nodes(),
            g.branches().len(),
            num(grid.points()[k])
        )],
    })
}

fn cmd_parse(file: &Path) -> Result<Report, CliError> {
    let shown = file.display();
    let doc = read_file(file).map_err(|e| CliError::Input(format!("{shown}: {e}")))?;
    let freqs = doc.frequencies();
    let span = match (freqs.first(), freqs.last()) {
        (Some(a), Some(b)) => format!("{} to {} Hz", num(*a), num(*b)),
        _ => "no data".to_string(),
    };
    Ok(Report {
        data: serialize(&doc),
        summary: vec![format!(
            "{shown}: {}-port, {} records, {span}, format {} R {}",
            doc.n_ports,
            doc.records.len(),
            doc.format,
            doc.z_ref
        )],
    })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |source| CliError::Output {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
