//! qcap: channel capacity reports and figure data from the command line.
//!
//! * `capacity` solves one channel spec and prints the report,
//! * `contour` extracts relative-entropy level sets in a plane (CSV),
//! * `scan` sweeps D around the channel image in a plane (CSV),
//! * `sweep` tabulates the capacity curve of a named family (CSV).
//!
//! Exit codes: 0 on success, 2 when a spec or request is invalid, 3
//! when a solver fails; error messages name the violated invariant.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bloch_core::BlochVector;
use capacity_solvers::{
    capacity_sweep, iterative_capacity, linear_capacity, solve_auto, unital_capacity,
    CapacityResult, IterConfig,
};
use channel_model::{parse_channel_spec, ChannelParams, NamedKind};
use clap::{Parser, Subcommand, ValueEnum};
use cli_report::{
    angular_scan, capacity_json, capacity_report, contour_csv, contour_polylines, scan_csv,
    sweep_csv, AngularScanRequest, ContourRequest, Plane,
};
use oracle_optimizer::brute_force_capacity;
use thiserror::Error;

#[derive(Parser)]
#[command(name = "qcap", version, about = "Classical capacity of qubit channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a channel spec and report C1 with its optimal ensemble.
    Capacity {
        /// Channel spec JSON file.
        #[arg(long)]
        channel: PathBuf,
        /// Solver to run; auto picks the cheapest applicable one.
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Seed for randomized solver stages.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit a machine-readable report at full precision.
        #[arg(long)]
        json: bool,
        /// Re-check the result against the brute-force ensemble search.
        #[arg(long)]
        verify: bool,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract constant relative-entropy contours in a coordinate plane.
    Contour {
        /// Fixed second argument of D, as "x,y,z".
        #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
        v: [f64; 3],
        /// Contour heights in bits, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long, value_enum, default_value_t = PlaneArg::Xy)]
        plane: PlaneArg,
        /// Grid points per axis for the marching squares.
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep D(point || v) around the channel image in a plane.
    Scan {
        /// Channel spec JSON file.
        #[arg(long)]
        channel: PathBuf,
        /// Fixed second argument of D, as "x,y,z"; defaults to the
        /// channel's optimal output.
        #[arg(long, value_parser = parse_vec3)]
        v: Option<[f64; 3]>,
        #[arg(long, value_enum, default_value_t = PlaneArg::Xy)]
        plane: PlaneArg,
        #[arg(long, default_value_t = 720)]
        samples: usize,
        /// Seed for the solver run that locates the optimal output.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the capacity curve of a named channel family.
    Sweep {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Grid points on x in [0, 1], endpoints included.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Verify the two-Pauli pairing C1(x) = C1(1 - 2x) on the grid.
        #[arg(long)]
        check_symmetry: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Unital,
    Linear,
    Iterative,
    Brute,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlaneArg {
    Xy,
    Xz,
    Yz,
}

impl From<PlaneArg> for Plane {
    fn from(p: PlaneArg) -> Self {
        match p {
            PlaneArg::Xy => Plane::XY,
            PlaneArg::Xz => Plane::XZ,
            PlaneArg::Yz => Plane::YZ,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Depolarizing,
    TwoPauli,
    AmplitudeDamping,
}

impl From<KindArg> for NamedKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Depolarizing => NamedKind::Depolarizing,
            KindArg::TwoPauli => NamedKind::TwoPauli,
            KindArg::AmplitudeDamping => NamedKind::AmplitudeDamping,
        }
    }
}

/// Failures split by exit code: invalid specs and requests exit with 2,
/// runtime failures (solvers, output writes) with 3.
#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Spec(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut a = [0.0; 3];
    for (slot, part) in a.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {part:?}: {e}"))?;
    }
    Ok(a)
}

fn load_channel(path: &Path) -> Result<ChannelParams, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Spec(format!("cannot read channel spec {}: {e}", path.display())))?;
    parse_channel_spec(&text).map_err(|e| CliError::Spec(e.to_string()))
}

fn solve(params: &ChannelParams, method: Method, seed: u64) -> Result<CapacityResult, CliError> {
    let cfg = IterConfig { seed, ..IterConfig::default() };
    let result = match method {
        Method::Auto => solve_auto(params, &cfg),
        Method::Unital => unital_capacity(params),
        Method::Linear => linear_capacity(params),
        Method::Iterative => iterative_capacity(params, &cfg),
        Method::Brute => {
            return brute_force_capacity(params, 4, 20, seed)
                .map_err(|e| CliError::Run(e.to_string()));
        }
    };
    result.map_err(|e| CliError::Run(e.to_string()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// The two-Pauli scalings at x <= 1/3 and at 1 - 2x have the same
/// largest magnitude, so those capacities agree exactly; a uniform grid
/// over [0, 1] pairs its own points up to float round-off.
fn check_two_pauli_symmetry(kind: NamedKind, rows: &[(f64, f64)]) -> Result<(), CliError> {
    if kind != NamedKind::TwoPauli {
        return Err(CliError::Spec(
            "--check-symmetry applies to the two-pauli family".into(),
        ));
    }
    let mut pairs = 0;
    let mut worst = 0.0f64;
    for &(x, c) in rows {
        if x > 1.0 / 3.0 + 1e-12 {
            continue;
        }
        let partner = 1.0 - 2.0 * x;
        if let Some(&(_, cp)) = rows.iter().find(|(xp, _)| (xp - partner).abs() <= 1e-12) {
            pairs += 1;
            worst = worst.max((c - cp).abs());
        }
    }
    eprintln!("symmetry check: {pairs} paired points, max defect {worst:.2e}");
    if worst > 1e-12 {
        return Err(CliError::Run(format!(
            "two-Pauli symmetry violated: capacity defect {worst:.2e}"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Capacity { channel, method, seed, json, verify, out } => {
            let params = load_channel(&channel)?;
            let result = solve(&params, method, seed)?;
            let oracle = if verify {
                Some(
                    brute_force_capacity(&params, 4, 20, seed)
                        .map_err(|e| CliError::Run(e.to_string()))?,
                )
            } else {
                None
            };
            let text = if json {
                capacity_json(&result, oracle.as_ref())
            } else {
                capacity_report(&result, oracle.as_ref())
            };
            emit(out.as_deref(), &text)
        }
        Command::Contour { v, levels, plane, resolution, out } => {
            let req = ContourRequest {
                v: BlochVector::from_array(v),
                levels,
                plane: plane.into(),
                resolution,
            };
            let polylines = contour_polylines(&req).map_err(|e| CliError::Spec(e.to_string()))?;
            for &level in &req.levels {
                if !polylines.iter().any(|p| p.level == level) {
                    eprintln!("note: level {level} has no contour inside the unit disk");
                }
            }
            emit(out.as_deref(), &contour_csv(&polylines))
        }
        Command::Scan { channel, v, plane, samples, seed, out } => {
            let params = load_channel(&channel)?;
            let v = match v {
                Some(a) => BlochVector::from_array(a),
                None => solve(&params, Method::Auto, seed)?.average_output,
            };
            let req = AngularScanRequest { channel: params, v, plane: plane.into(), samples };
            let rows = angular_scan(&req).map_err(|e| CliError::Spec(e.to_string()))?;
            emit(out.as_deref(), &scan_csv(&rows))
        }
        Command::Sweep { kind, points, check_symmetry, out } => {
            if points < 2 {
                return Err(CliError::Spec("sweep needs at least 2 grid points".into()));
            }
            let xs: Vec<f64> = (0..points)
                .map(|i| i as f64 / (points - 1) as f64)
                .collect();
            let kind = NamedKind::from(kind);
            let rows = capacity_sweep(kind, &xs).map_err(|e| CliError::Run(e.to_string()))?;
            if check_symmetry {
                check_two_pauli_symmetry(kind, &rows)?;
            }
            emit(out.as_deref(), &sweep_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
