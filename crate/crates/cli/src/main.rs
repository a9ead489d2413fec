//! Command-line front end: theta sums, shifted sums, subspace decisions,
//! distance intervals, discrete Gaussian sampling and the verify suites.
//!
//! All randomness flows from `--seed`; identical invocations on identical
//! files produce byte-identical output. Exit codes: 0 success, 2 validation
//! failure, 3 unsupported regime, 4 non-convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use lattice_theta::error::Error;
use lattice_theta::integrator::Backend;
use lattice_theta::lattice::{
    distance_interval_with, short_vector_test_with, subspace_theta_with, LatticeBasis,
    SubspaceInstance,
};
use lattice_theta::sampler::{sample_indexed, DrawDiagnostics, SamplerConfig};
use lattice_theta::theta::{compute, compute_forced, select_regime, ThetaInstance, ThetaOptions};
use lattice_theta::verify;
use lattice_theta::SymMatrix;

const EXIT_VALIDATION: u8 = 2;
const EXIT_REGIME: u8 = 3;
const EXIT_NONCONVERGENCE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "lattice-theta",
    about = "Theta sums over integer lattices and their lattice applications",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Target relative error in (0, 1].
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smooth-range exponent γ > 1.
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Σ exp(−⟨Bx,x⟩)·cos⟨b,x⟩ for a positive definite matrix B.
    Theta {
        /// Matrix JSON: {"n": int, "entries": [row-major reals]}.
        matrix: PathBuf,
        /// Optional phase vector JSON: [reals].
        #[arg(long)]
        b: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
        /// Only report the selected regime, without computing.
        #[arg(long)]
        regime_only: bool,
        /// Override the automatic regime selection
        /// (INTEGRAL | SMOOTH | DIRECT_ORACLE).
        #[arg(long)]
        regime: Option<String>,
        /// Force an integrator backend (direct | walk).
        #[arg(long)]
        backend: Option<String>,
        /// Accept inputs in the exact-admissibility slack of the window.
        #[arg(long)]
        exact_admissibility: bool,
    },
    /// Compute Σ exp(−⟨B(x−y),x−y⟩) through the reciprocity relation.
    ThetaShifted {
        matrix: PathBuf,
        /// Shift vector JSON: [reals].
        #[arg(long)]
        y: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Short-vector decision for the lattice ker A ∩ Zⁿ.
    Subspace {
        /// Subspace JSON: {"A": [[ints]], "s": real?, "t": real?}.
        a: PathBuf,
        /// Scale exponent δ: uses s = (½+δ)ln n, t = e^s/5 and decides.
        /// Without it, the file's s and t are used and only the theta
        /// estimate with its additive bound is reported.
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Certified interval for dist(v, Λ), for lattices containing Zⁿ.
    Distance {
        /// Basis JSON: {"basis": [[reals], ...]} (rows are basis vectors).
        basis: PathBuf,
        #[arg(long)]
        v: PathBuf,
        /// Scale τ in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Draw from the discrete Gaussian on Λ centered at v.
    Sample {
        basis: PathBuf,
        #[arg(long)]
        v: PathBuf,
        /// Number of draws (CSV rows on stdout).
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Where to write the JSON diagnostics sidecar.
        #[arg(long, default_value = "sample.diag.json")]
        diagnostics: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a named invariant suite (jacobi, linalg, integrand, integrator,
    /// theta, lattice, sampler, oracle, all).
    Verify { suite: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = exit_code_for(&err);
            let diag = json!({ "error": err.to_string(), "exit_code": code });
            eprintln!("{}", serde_json::to_string_pretty(&diag).unwrap());
            ExitCode::from(code)
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::RegimeUnsupported(_) => EXIT_REGIME,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Theta { matrix, b, common, regime_only, regime, backend, exact_admissibility } => {
            let form = load_sym_matrix(&matrix)?;
            let phase = b.map(|p| load_vector(&p)).transpose()?;
            let inst = ThetaInstance::new(form, phase, None, common.eps, common.seed)?;
            let mut opts = theta_opts(&common);
            opts.allow_exact_admissibility = exact_admissibility;
            opts.backend = match backend.as_deref() {
                None => None,
                Some("direct") => Some(Backend::Direct),
                Some("walk") => Some(Backend::Walk),
                Some(other) => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown backend '{other}' (expected direct or walk)"
                    )))
                }
            };
            if regime_only {
                let report = select_regime(&inst, &opts)?;
                emit(&report);
                return Ok(ExitCode::SUCCESS);
            }
            if let Some(name) = regime {
                let forced = match name.as_str() {
                    "INTEGRAL" => lattice_theta::Regime::Integral,
                    "SMOOTH" => lattice_theta::Regime::Smooth,
                    "DIRECT_ORACLE" => lattice_theta::Regime::DirectOracle,
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown regime override '{other}'"
                        )))
                    }
                };
                let result = compute_forced(&inst, &opts, forced)?;
                emit(&theta_payload(&result, "regime forced by --regime"));
                return converged_exit(result.converged);
            }
            let (result, report) = compute(&inst, &opts)?;
            emit(&theta_payload(&result, &report.detail));
            converged_exit(result.converged)
        }
        Command::ThetaShifted { matrix, y, common } => {
            let form = load_sym_matrix(&matrix)?;
            let shift = load_vector(&y)?;
            let inst = ThetaInstance::new(form, None, Some(shift), common.eps, common.seed)?;
            let opts = theta_opts(&common);
            let (result, report) = compute(&inst, &opts)?;
            emit(&theta_payload(&result, &report.detail));
            converged_exit(result.converged)
        }
        Command::Subspace { a, delta, common } => {
            let spec: SubspaceFile = load_json(&a)?;
            let opts = theta_opts(&common);
            match delta {
                Some(delta) => {
                    let report =
                        short_vector_test_with(spec.a, delta, common.eps, common.seed, &opts)?;
                    let converged = report.theta.converged;
                    emit(&report);
                    converged_exit(converged)
                }
                None => {
                    let (s, t) = match (spec.s, spec.t) {
                        (Some(s), Some(t)) => (s, t),
                        _ => {
                            return Err(Error::InvalidParameter(
                                "subspace file needs both s and t when --delta is absent".into(),
                            ))
                        }
                    };
                    let inst = SubspaceInstance::new(spec.a, s, t)?;
                    let (theta, bound) =
                        subspace_theta_with(&inst, common.eps, common.seed, &opts)?;
                    let converged = theta.converged;
                    let payload = json!({
                        "theta": theta,
                        "bound": bound,
                        "s": s,
                        "t": t,
                        "gamma_norm": inst.gamma_norm(),
                    });
                    emit(&payload);
                    converged_exit(converged)
                }
            }
        }
        Command::Distance { basis, v, tau, common } => {
            let basis = load_basis(&basis)?;
            let point = load_vector(&v)?;
            let opts = theta_opts(&common);
            let bounds =
                distance_interval_with(&basis, &point, tau, common.eps, common.seed, &opts)?;
            emit(&bounds);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample { basis, v, count, diagnostics, common } => {
            let basis = load_basis(&basis)?;
            let point = load_vector(&v)?;
            let config = SamplerConfig::new(basis, point, common.eps, common.seed)?;
            let draws = run_draws(&config, count)?;
            let mut stdout = String::new();
            for draw in &draws {
                let row: Vec<String> = draw.coords.iter().map(|c| c.to_string()).collect();
                stdout.push_str(&row.join(","));
                stdout.push('\n');
            }
            print!("{stdout}");
            let sidecar = json!({
                "count": count,
                "seed": common.seed,
                "eps": common.eps,
                "window_radius": config.window_radius(),
                "s_witness": config.s_witness(),
                "draws": draws.iter().map(|d| &d.diagnostics).collect::<Vec<&DrawDiagnostics>>(),
            });
            fs::write(&diagnostics, serde_json::to_string_pretty(&sidecar).unwrap() + "\n")
                .map_err(|e| Error::InvalidParameter(format!("cannot write sidecar: {e}")))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let checks = verify::run_suite(&suite)?;
            let mut all_pass = true;
            for check in &checks {
                let status = if check.pass { "PASS" } else { "FAIL" };
                println!("{status} {} — {}", check.name, check.measured);
                all_pass &= check.pass;
            }
            if all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn theta_opts(common: &CommonOpts) -> ThetaOptions {
    ThetaOptions { gamma: common.gamma, ..Default::default() }
}

fn theta_payload(result: &lattice_theta::ThetaResult, detail: &str) -> serde_json::Value {
    json!({
        "value": result.value,
        "rel_stderr": result.rel_stderr,
        "regime": result.regime,
        "s": result.s,
        "K": result.k,
        "n_evals": result.n_evals,
        "seed": result.seed,
        "converged": result.converged,
        "exact": result.exact,
        "detail": detail,
    })
}

fn converged_exit(converged: bool) -> Result<ExitCode, Error> {
    if converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_NONCONVERGENCE))
    }
}

/// Runs `count` draws, in parallel when THETA_THREADS allows, merged in draw
/// order so the CSV is independent of scheduling.
fn run_draws(
    config: &SamplerConfig,
    count: u64,
) -> Result<Vec<lattice_theta::sampler::SampleDraw>, Error> {
    use rayon::prelude::*;
    let threads = std::env::var("THETA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| sample_indexed(config, i))
            .collect::<Result<Vec<_>, _>>()
    })
}

fn emit<T: serde::Serialize>(payload: &T) {
    println!("{}", serde_json::to_string_pretty(payload).unwrap());
}

#[derive(Deserialize)]
struct SubspaceFile {
    #[serde(rename = "A")]
    a: Vec<Vec<i64>>,
    s: Option<f64>,
    t: Option<f64>,
}

#[derive(Deserialize)]
struct BasisFile {
    basis: Vec<Vec<f64>>,
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("invalid JSON in {}: {e}", path.display())))
}

fn load_sym_matrix(path: &Path) -> Result<SymMatrix, Error> {
    load_json(path)
}

fn load_vector(path: &Path) -> Result<Vec<f64>, Error> {
    load_json(path)
}

fn load_basis(path: &Path) -> Result<LatticeBasis, Error> {
    let file: BasisFile = load_json(path)?;
    LatticeBasis::new(file.basis)
}
