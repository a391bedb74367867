//! `tscale`: eigenstructure analysis, conditioned simulation and gain sweeps
//! for two-timescale closed loops.

mod format;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tscale::params::{parse_number_list, ParamError, ParamMap};
use tscale::plants::{buck_closedloop, BuckParams, LinearPlant, PlantError};
use tscale::senscond::{auto_mode, error_bound_estimate, CondError};
use tscale::simkit::{
    gain_sweep, integrate, metrics, write_csv, ModeRequest, PlantKind, ReferenceSchedule, ScenarioConfig, SimError,
};
use tscale::sptheory::{eigen_report, SpError};
use tscale::{PartitionedLinearSystem, SensitivityMode};

#[derive(Debug, Parser)]
#[command(name = "tscale", version, about = "Two-timescale analysis and sensitivity-conditioned simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print closed-loop eigenvalues with and without conditioning, the
    /// timescale gap ratio and the least-squares error estimate.
    Analyze {
        /// Parameter file (`key = value` lines).
        params: PathBuf,
        #[arg(long, value_enum, default_value_t = AnalyzePlant::Buck)]
        plant: AnalyzePlant,
        /// Override the buck PI gains: `kp_v,ki_v,kp_i,ki_i`.
        #[arg(long, value_parser = parse_gains, allow_hyphen_values = true)]
        gains: Option<[f64; 4]>,
    },
    /// Integrate a scenario, print tracking metrics and optionally write the
    /// trajectory as CSV.
    Simulate {
        /// Scenario file.
        scenario: PathBuf,
        /// Override the scenario's conditioning mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Write the trajectory to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze the buck loop for each gain set in a file, one row per set.
    Sweep {
        /// Base buck parameter file.
        params: PathBuf,
        /// File with one `kp_v, ki_v, kp_i, ki_i` line per gain set.
        #[arg(long)]
        tests: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AnalyzePlant {
    Buck,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    None,
    Exact,
    Approx,
    Auto,
}

impl From<ModeArg> for ModeRequest {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => ModeRequest::None,
            ModeArg::Exact => ModeRequest::Exact,
            ModeArg::Approx => ModeRequest::Approx,
            ModeArg::Auto => ModeRequest::Auto,
        }
    }
}

fn parse_gains(s: &str) -> Result<[f64; 4], String> {
    let values = parse_number_list(s)?;
    <[f64; 4]>::try_from(values.as_slice())
        .map_err(|_| format!("expected 4 comma-separated gains, got {}", values.len()))
}

/// Failures split by exit status: bad input (2) versus model or runtime
/// problems (1).
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    /// Standard output was closed early (e.g. piped into `head`).
    #[error("broken pipe")]
    ClosedOutput,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
            CliError::ClosedOutput => 0,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<PlantError> for CliError {
    fn from(e: PlantError) -> Self {
        match e {
            PlantError::Params(p) => p.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<CondError> for CliError {
    fn from(e: CondError) -> Self {
        match e {
            CondError::Plant(p) => p.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SpError> for CliError {
    fn from(e: SpError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Params(p) => p.into(),
            SimError::Plant(p) => p.into(),
            SimError::Conditioning(c) => c.into(),
            SimError::InvalidScenario(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::ClosedOutput
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_params(path: &Path) -> Result<ParamMap, CliError> {
    ParamMap::parse(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn mode_note(sys: &PartitionedLinearSystem) -> String {
    let (rows, cols) = (sys.n_z(), sys.m());
    let choice = match auto_mode(&sys.b()) {
        SensitivityMode::ExactSquare => "square, exact conditioning (B⁻¹)",
        SensitivityMode::ExactWide { .. } => "wide, exact conditioning (right pseudoinverse)",
        _ => "tall, approximate conditioning (left pseudoinverse, residual bounded by the estimate)",
    };
    format!("B is {rows}x{cols}: {choice}")
}

fn analyze(out: &mut impl Write, params: &Path, plant: AnalyzePlant, gains: Option<[f64; 4]>) -> Result<(), CliError> {
    let map = read_params(params)?;
    let sys = match plant {
        AnalyzePlant::Buck => {
            let mut p = BuckParams::from_params(&map)?;
            if let Some(g) = gains {
                p = p.with_gains(g);
            }
            let g = p.gains();
            writeln!(
                out,
                "plant: buck, gains kp_v = {}, ki_v = {}, kp_i = {}, ki_i = {}",
                g[0], g[1], g[2], g[3]
            )?;
            buck_closedloop(&p)?.system
        }
        AnalyzePlant::Linear => {
            if gains.is_some() {
                return Err(CliError::Usage("--gains only applies to --plant buck".into()));
            }
            let sys = LinearPlant::from_params(&map)?.system().clone();
            writeln!(out, "plant: linear, n_x = {}, n_z = {}, m = {}", sys.n_x(), sys.n_z(), sys.m())?;
            sys
        }
    };
    let report = eigen_report(&sys)?;
    let bound = error_bound_estimate(&sys)?;
    format::eigen_section(out, "eigenvalues without conditioning", &report.full_no_sc)?;
    format::eigen_section(out, "eigenvalues with conditioning", &report.full_with_sc)?;
    format::eigen_section(out, "reduced slow ∪ fast boundary layer", &report.reduced_union)?;
    writeln!(out, "gap ratio: {}", format::sig6(report.gap_ratio))?;
    writeln!(out, "spectral displacement: {}", format::sig6(report.displacement()))?;
    writeln!(out, "error-bound estimate: {}", format::sig6(bound))?;
    writeln!(out, "mode: {}", mode_note(&sys))?;
    Ok(())
}

fn simulate(out: &mut impl Write, scenario: &Path, mode: Option<ModeArg>, csv: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = ScenarioConfig::parse(&read_text(scenario)?, scenario.parent())?;
    if let Some(m) = mode {
        cfg.mode = m.into();
    }
    let traj = integrate(&cfg)?;
    if let Some(path) = csv {
        let file = fs::File::create(path)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_csv(&traj, &mut w)?;
        w.flush()?;
    }

    // Converters track their first exogenous input; a generic linear plant
    // has no reference, so it is measured against its own terminal value.
    let (reference, against) = match cfg.plant {
        PlantKind::Buck | PlantKind::Pmsm => (
            ReferenceSchedule::from_exogenous(&traj, 0),
            traj.exogenous_names[0].clone(),
        ),
        PlantKind::CustomLinear => (
            ReferenceSchedule::constant(traj.final_state().first().copied().unwrap_or(0.0)),
            "its final value".to_string(),
        ),
    };
    let m = metrics(&traj, 0, &reference);
    let tracked = &traj.state_names[0];
    let max_residual = traj.residual_norms.iter().copied().fold(0.0, f64::max);
    writeln!(out, "samples: {}, final time: {} s", traj.len(), format::sig6(*traj.times.last().unwrap_or(&0.0)))?;
    writeln!(out, "tracking: {tracked} against {against}")?;
    writeln!(out, "ise: {}", format::sig6(m.ise))?;
    writeln!(out, "overshoot: {} %", format::sig6(m.overshoot_pct))?;
    match m.settling_time {
        Some(t) => writeln!(out, "settling time (2 %): {} s", format::sig6(t))?,
        None => writeln!(out, "settling time (2 %): unsettled")?,
    }
    writeln!(out, "max residual norm: {}", format::sig6(max_residual))?;
    Ok(())
}

fn read_gain_sets(path: &Path) -> Result<Vec<[f64; 4]>, CliError> {
    let mut sets = Vec::new();
    for (i, raw) in read_text(path)?.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let gains = parse_gains(line).map_err(|m| CliError::Usage(format!("{}: line {}: {m}", path.display(), i + 1)))?;
        sets.push(gains);
    }
    if sets.is_empty() {
        return Err(CliError::Usage(format!("{}: no gain sets", path.display())));
    }
    Ok(sets)
}

fn sweep(out: &mut impl Write, err: &mut impl Write, params: &Path, tests: &Path) -> Result<(), CliError> {
    let base = BuckParams::from_params(&read_params(params)?)?;
    let sets = read_gain_sets(tests)?;
    let mut failed = 0;
    for (i, (gains, row)) in sets.iter().zip(gain_sweep(&base, &sets)).enumerate() {
        let label = format!("test {}: gains ({})", i + 1, gains.map(format::sig6).join(", "));
        match row {
            Ok(row) => {
                writeln!(out, "{label}")?;
                writeln!(out, "  no-sc:   {}", format::eigen_list(row.no_sc()))?;
                writeln!(out, "  with-sc: {}", format::eigen_list(row.with_sc()))?;
                writeln!(
                    out,
                    "  gap ratio {}, displacement {}, error bound {}",
                    format::sig6(row.report.gap_ratio),
                    format::sig6(row.displacement()),
                    format::sig6(row.error_bound)
                )?;
            }
            Err(e) => {
                failed += 1;
                writeln!(out, "{label}")?;
                writeln!(out, "  failed")?;
                writeln!(err, "error: test {}: {}", i + 1, CliError::from(e))?;
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} gain sets failed", sets.len())));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Analyze { params, plant, gains } => analyze(&mut out, &params, plant, gains),
        Command::Simulate { scenario, mode, out: csv } => simulate(&mut out, &scenario, mode, csv.as_deref()),
        Command::Sweep { params, tests } => sweep(&mut out, &mut io::stderr(), &params, &tests),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.kind().to_string();
            let detail = e.to_string();
            let first = detail
                .lines()
                .next()
                .unwrap_or(&rendered)
                .trim_start_matches("error: ")
                .to_string();
            eprintln!("error: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) | Err(CliError::ClosedOutput) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
