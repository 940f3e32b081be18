//! Command-line front end: `design`, `spectrum`, `verify`, `tune-chain`,
//! `extension` and `rp-norms`.
//!
//! Exit codes: 0 success, 1 other failure, 2 target set without zero,
//! 3 malformed target set, 4 usage error, 5 count mismatch, 6 failed
//! verification. Errors are also written to standard error as one JSON
//! object.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cell_spectrum;
use crate::extension_lab::{self, ClusterTable, ExtensionError, ExtensionModel};
use crate::linalg::Matrix;
use crate::mivt::{self, ChainTuneSpec};
use crate::operator_assembly::{self, Schedule};
use crate::rooms_passages;
use crate::target_set::{self, AccumulationDistance, TargetSet, TargetSetError};
use crate::truncated_spectrum::{self, SpectrumError, TruncatedOperator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_ZERO_NOT_INCLUDED: i32 = 2;
pub const EXIT_MALFORMED_SET: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_COUNT_MISMATCH: i32 = 5;
pub const EXIT_VERIFY_FAILED: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "essdesign",
    version,
    about = "Design δ′-interaction operators with a prescribed essential spectrum"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a schedule whose cells are tuned to samples of a target set.
    Design(DesignArgs),
    /// Eigenvalues of a truncated schedule below a cutoff, as CSV.
    Spectrum(SpectrumArgs),
    /// Check that every tuned cell value has a nearby truncated eigenvalue.
    Verify(VerifyArgs),
    /// Place eigenvalues m+1..2m of an m-cell chain at given targets.
    TuneChain(TuneChainArgs),
    /// Resolvent-formula extension model and clustering table.
    Extension(ExtensionArgs),
    /// Test-function norms for the rooms-and-passages domain, as CSV.
    RpNorms(RpNormsArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Target set JSON.
    #[arg(long)]
    pub target: PathBuf,
    /// Number of cells K.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub cells: u64,
    /// Schedule JSON output.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional design report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    /// Number of cells N kept in the truncation.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub truncate: u64,
    /// Cutoff Λ.
    #[arg(long)]
    pub lambda_max: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Append finite-difference eigenvalues and a max-deviation line.
    #[arg(long)]
    pub oracle: bool,
    /// Replace every coupling by ∞.
    #[arg(long)]
    pub decouple: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub truncate: u64,
    #[arg(long)]
    pub lambda_max: f64,
    /// Pass threshold τ.
    #[arg(long)]
    pub threshold: f64,
    /// First cell index k₀ included in the pass rule.
    #[arg(long, default_value_t = 1)]
    pub skip_head: usize,
    #[arg(long)]
    pub decouple: bool,
    /// Report JSON output (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneChainArgs {
    /// Comma-separated increasing targets ν.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<f64>,
    /// Junction strength p.
    #[arg(long)]
    pub coupling: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Comma-separated cell lengths (default: uniform).
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtensionArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Comma-separated accumulation points of Ξ.
    #[arg(long, value_delimiter = ',', default_value = "1,4")]
    pub xi_clusters: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RpNormsArgs {
    /// Largest k in the table.
    #[arg(long, default_value_t = 200)]
    pub k_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    TargetSet(#[from] TargetSetError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("verification failed: max distance {max_distance:e} exceeds {threshold:e}")]
    VerifyFailed { max_distance: f64, threshold: f64 },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::TargetSet(TargetSetError::ZeroNotIncluded) => EXIT_ZERO_NOT_INCLUDED,
            CliError::TargetSet(_) => EXIT_MALFORMED_SET,
            CliError::Spectrum(SpectrumError::CountMismatch { .. }) => EXIT_COUNT_MISMATCH,
            CliError::Spectrum(
                SpectrumError::InvalidTruncation { .. } | SpectrumError::InvalidCutoff(_),
            ) => EXIT_USAGE,
            CliError::VerifyFailed { .. } => EXIT_VERIFY_FAILED,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::TargetSet(TargetSetError::ZeroNotIncluded) => "ZeroNotIncluded",
            CliError::TargetSet(_) => "MalformedSet",
            CliError::Spectrum(SpectrumError::CountMismatch { .. }) => "CountMismatch",
            CliError::Spectrum(_) => "InvalidTruncation",
            CliError::VerifyFailed { .. } => "VerifyFailed",
            CliError::Other(_) => "Error",
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let body = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}

/// `SPECFORGE_THREADS` caps the worker pool; `0` or unset means automatic.
fn configure_threads() {
    if let Some(n) = std::env::var("SPECFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Design(a) => cmd_design(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::TuneChain(a) => cmd_tune_chain(&a),
        Command::Extension(a) => cmd_extension(&a),
        Command::RpNorms(a) => cmd_rp_norms(&a),
    }
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(other)?;
    tmp.write_all(contents.as_bytes()).map_err(other)?;
    tmp.persist(path).map_err(|e| other(e.error))?;
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn read_target(path: &Path) -> Result<TargetSet, CliError> {
    Ok(TargetSet::from_json(&read(path)?)?)
}

fn read_schedule(path: &Path) -> Result<Schedule, CliError> {
    Schedule::from_json(&read(path)?).map_err(other)
}

fn cmd_design(a: &DesignArgs) -> Result<(), CliError> {
    let set = read_target(&a.target)?;
    let (schedule, report) =
        operator_assembly::design(&set, a.cells as usize).map_err(|e| match e {
            operator_assembly::AssemblyError::TargetSet(t) => CliError::TargetSet(t),
            e => other(e),
        })?;
    write_atomic(&a.out, &schedule.to_json())?;
    if let Some(path) = &a.report {
        write_atomic(path, &serde_json::to_string_pretty(&report).map_err(other)?)?;
    }
    let worst = report.cells.iter().map(|c| c.residual).fold(0.0, f64::max);
    println!(
        "cells={} b={:.16e} max_rho={:.16e} max_residual={:.3e}",
        report.cells.len(),
        report.sum_d,
        report.max_rho,
        worst
    );
    Ok(())
}

fn truncation(schedule: Schedule, n: u64, decouple: bool) -> Result<TruncatedOperator, CliError> {
    let op = TruncatedOperator::new(schedule, n as usize)?;
    Ok(if decouple { op.decoupled() } else { op })
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<(), CliError> {
    let op = truncation(read_schedule(&a.schedule)?, a.truncate, a.decouple)?;
    let spectrum = truncated_spectrum::eigenvalues_below(&op, a.lambda_max)?;
    let mut csv = spectrum.to_csv();
    if a.oracle && a.lambda_max > 0.0 {
        let chain = op.chain();
        let h = crate::fd_oracle::step_for_cutoff(a.lambda_max, 0.01);
        let fd = truncated_spectrum::fd_spectrum(&chain, a.lambda_max, h);
        fd.write_rows(&mut csv);
        let deviation = spectrum
            .eigenvalues
            .iter()
            .zip(&fd.eigenvalues)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        csv.push_str(&format!(
            "# max_deviation={deviation:.16e} shooting_count={} fd_count={}\n",
            spectrum.count, fd.count
        ));
        if fd.count != spectrum.count {
            write_atomic(&a.out, &csv)?;
            return Err(SpectrumError::CountMismatch {
                probe: a.lambda_max,
                shooting: spectrum.count,
                fd: fd.count,
            }
            .into());
        }
    }
    write_atomic(&a.out, &csv)?;
    println!("count={} fd_check={:?}", spectrum.count, spectrum.fd_count);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyCell {
    pub k: usize,
    /// `λ₂` of the isolated cell, the value it was tuned to.
    pub s: f64,
    /// Nearest eigenvalue of the truncated operator.
    pub nearest: Option<f64>,
    /// Distance from `s` to the truncated spectrum.
    pub spectral_distance: f64,
    /// Distance from `s` to the target set.
    pub target_distance: f64,
    /// The larger of the two.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub truncate: usize,
    pub lambda_max: f64,
    pub threshold: f64,
    pub skip_head: usize,
    pub decoupled: bool,
    pub eigenvalue_count: usize,
    pub cells: Vec<VerifyCell>,
    /// Coverage of `S ∩ [0, Λ]` by the nonzero truncated eigenvalues.
    pub coverage: Option<AccumulationDistance>,
    /// Maximum `distance` over cells `k₀ ≤ k ≤ N` with `s ≤ Λ`.
    pub max_distance: f64,
    pub pass: bool,
}

/// Compares each cell's tuned `λ₂` with the truncated spectrum and with `S`.
pub fn verify(
    schedule: &Schedule,
    set: &TargetSet,
    truncate: usize,
    lambda_max: f64,
    threshold: f64,
    skip_head: usize,
    decouple: bool,
) -> Result<VerifyReport, CliError> {
    let op = TruncatedOperator::new(schedule.clone(), truncate)?;
    let op = if decouple { op.decoupled() } else { op };
    let spectrum = truncated_spectrum::eigenvalues_below(&op, lambda_max)?;
    let values = &spectrum.eigenvalues;
    let mut cells = Vec::with_capacity(truncate);
    for (i, cell) in schedule.cells.iter().take(truncate).enumerate() {
        let s = cell_spectrum::second_eigenvalue(cell.d, cell.q).map_err(other)?;
        let idx = values.partition_point(|&v| v < s);
        let nearest = [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|j| values.get(j).copied())
            .min_by(|x, y| (x - s).abs().total_cmp(&(y - s).abs()));
        let spectral_distance = nearest.map_or(f64::INFINITY, |v| (v - s).abs());
        let target_distance = set.distance(s);
        cells.push(VerifyCell {
            k: i + 1,
            s,
            nearest,
            spectral_distance,
            target_distance,
            distance: spectral_distance.max(target_distance),
        });
    }
    let max_distance = cells
        .iter()
        .filter(|c| c.k >= skip_head && c.s <= lambda_max)
        .map(|c| c.distance)
        .fold(0.0, f64::max);
    let nonzero: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let coverage = if nonzero.is_empty() {
        None
    } else {
        Some(target_set::accumulation_distance(
            set, &nonzero, lambda_max,
        )?)
    };
    Ok(VerifyReport {
        truncate,
        lambda_max,
        threshold,
        skip_head,
        decoupled: decouple,
        eigenvalue_count: spectrum.count,
        cells,
        coverage,
        pass: max_distance <= threshold,
        max_distance,
    })
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let schedule = read_schedule(&a.schedule)?;
    let set = read_target(&a.target)?;
    let report = verify(
        &schedule,
        &set,
        a.truncate as usize,
        a.lambda_max,
        a.threshold,
        a.skip_head,
        a.decouple,
    )?;
    let text = serde_json::to_string_pretty(&report).map_err(other)?;
    match &a.out {
        Some(path) => write_atomic(path, &text)?,
        None => println!("{text}"),
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::VerifyFailed {
            max_distance: report.max_distance,
            threshold: report.threshold,
        })
    }
}

fn cmd_tune_chain(a: &TuneChainArgs) -> Result<(), CliError> {
    let mut spec = ChainTuneSpec::with_default_lengths(a.targets.clone(), a.coupling);
    if let Some(lengths) = &a.lengths {
        spec.lengths = lengths.clone();
    }
    let tuned = mivt::tune_chain(&spec, a.tol).map_err(|e| match e {
        mivt::MivtError::InvalidSpec(m) => CliError::Usage(m),
        e => other(e),
    })?;
    write_atomic(&a.out, &tuned.schedule.to_json())?;
    let m = a.targets.len();
    println!(
        "sweeps={} residual={:.3e} eigenvalues={:?}",
        tuned.solution.sweeps,
        tuned.solution.residual,
        &tuned.eigenvalues[m..2 * m]
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub n: usize,
    pub m: usize,
    pub mu: f64,
    pub seed: u64,
    pub symmetry_defect: f64,
    pub resolvent_symmetry_defect: f64,
    pub weyl_defect: f64,
    pub boundary_defect: f64,
    pub clustering: ClusterTable,
}

fn cmd_extension(a: &ExtensionArgs) -> Result<(), CliError> {
    if a.n == 0 || a.m > a.n || a.xi_clusters.is_empty() {
        return Err(CliError::Usage(
            "need n ≥ 1, m ≤ n and at least one cluster".into(),
        ));
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(a.seed);
    let a0 = Matrix::diagonal(
        &(1..=a.n)
            .map(|j| j as f64 * extension_lab::DEFAULT_SPREAD)
            .collect::<Vec<_>>(),
    );
    let xi = extension_lab::clustered_xi(&a.xi_clusters, a.m, &mut rng);
    let mut mu = a.mu;
    let mut built = None;
    for _ in 0..extension_lab::MAX_REPICKS {
        match ExtensionModel::new(a0.clone(), xi.clone(), mu)
            .and_then(|model| extension_lab::build_extension(&model).map(|r| (model, r)))
        {
            Ok(pair) => {
                built = Some(pair);
                break;
            }
            Err(ExtensionError::SingularRmu { .. } | ExtensionError::NotSeparated { .. }) => {
                mu += extension_lab::GOLDEN_STEP;
            }
            Err(e) => return Err(other(e)),
        }
    }
    let (model, result) =
        built.ok_or_else(|| other(ExtensionError::NoAdmissibleMu(extension_lab::MAX_REPICKS)))?;
    let sizes: Vec<(usize, usize)> = [4, 2, 1]
        .iter()
        .map(|f| (a.n / f, a.m / f))
        .filter(|&(n, _)| n > 0)
        .collect();
    let clustering = extension_lab::clustering_experiment(&a.xi_clusters, &sizes, a.mu, a.seed)
        .map_err(other)?;
    let report = ExtensionReport {
        n: a.n,
        m: a.m,
        mu: model.mu,
        seed: a.seed,
        symmetry_defect: result.symmetry_defect,
        resolvent_symmetry_defect: result.resolvent_symmetry_defect,
        weyl_defect: extension_lab::weyl_identity_check(&model, &result),
        boundary_defect: extension_lab::boundary_condition_check(&model, &result, 100, a.seed),
        clustering,
    };
    write_atomic(
        &a.out,
        &serde_json::to_string_pretty(&report).map_err(other)?,
    )?;
    println!(
        "weyl_defect={:.3e} boundary_defect={:.3e} final_distance={:.3e}",
        report.weyl_defect,
        report.boundary_defect,
        report
            .clustering
            .rows
            .last()
            .map_or(f64::NAN, |r| r.distance)
    );
    Ok(())
}

fn cmd_rp_norms(a: &RpNormsArgs) -> Result<(), CliError> {
    let seq = rooms_passages::default_sequences(a.k_max + 1)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let scan =
        rooms_passages::gamma_lower_bound_scan(&seq).map_err(|e| CliError::Usage(e.to_string()))?;
    write_atomic(&a.out, &rooms_passages::scan_csv(&scan))?;
    let last = scan.rows.last().expect("at least two rows");
    println!(
        "k={} ratio={:.16e} monotone_from={}",
        last.k, last.ratio, scan.monotone_from
    );
    Ok(())
}
