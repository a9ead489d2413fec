//! Discrete Gaussian sampling on a lattice, coordinate by coordinate.
//!
//! A draw fixes the basis coordinates `ξ_n, ξ_{n−1}, …, ξ_1` in turn. At each
//! stage the conditional law of the outermost free coordinate is
//! `P(ξ_d = α) ∝ exp(−‖v−v_α‖²) · Θ_{Λ_α}(v_α)`, where `v_α` is the
//! orthogonal projection of the current target onto the hyperplane
//! `{ξ_d = α}` and `Λ_α` is the prefix sublattice living in it. The distance
//! factor is `γ_d (η_d − α)²` with `γ_d` the squared Gram–Schmidt length of
//! `u_d`, and the theta factor is a shifted theta over the prefix Gram —
//! computed through the reciprocity route, whose admissibility persists for
//! every prefix because principal-submatrix spectra interlace.
//!
//! Coordinates outside a window of radius `l` around `η_d` are dropped; `l`
//! is chosen once so the union of all discarded tails stays below
//! `eps/10`. Per-step theta errors are held to `eps/(10n)`. Everything is
//! seeded: one RNG stream per draw, with theta sub-seeds derived by counter.

use serde::Serialize;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeBasis;
use crate::linalg::{self, SymMatrix};
use crate::theta::{self, window, ThetaInstance};

/// A validated sampling request.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    basis: LatticeBasis,
    v: Vec<f64>,
    coords: Vec<f64>,
    eps: f64,
    seed: u64,
    /// Witness scale of the spectral window.
    s_witness: f64,
    window_radius: u32,
}

impl SamplerConfig {
    /// Validates the spectral window: some `s ≥ 1` must satisfy
    /// `λ_max ≤ π²/s` and `λ_min ≥ π²/(s + window(s))`, which keeps every
    /// per-step shifted theta inside the reciprocity regime.
    pub fn new(basis: LatticeBasis, v: Vec<f64>, eps: f64, seed: u64) -> Result<Self> {
        if v.len() != basis.n() {
            return Err(Error::DimensionMismatch("target point dimension".into()));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
        }
        let bounds = basis.bounds();
        let s_witness = sampler_window_witness(bounds.lambda_min, bounds.lambda_max)?;
        let coords = basis.coords_of(&v)?;
        let n = basis.n();
        let window_radius = window_radius(n, bounds.lambda_min, bounds.lambda_max, eps)?;
        Ok(SamplerConfig { basis, v, coords, eps, seed, s_witness, window_radius })
    }

    pub fn basis(&self) -> &LatticeBasis {
        &self.basis
    }

    pub fn target(&self) -> &[f64] {
        &self.v
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn s_witness(&self) -> f64 {
        self.s_witness
    }

    pub fn window_radius(&self) -> u32 {
        self.window_radius
    }
}

fn sampler_window_witness(lambda_min: f64, lambda_max: f64) -> Result<f64> {
    if lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: lambda_min });
    }
    let pi_sq = std::f64::consts::PI.powi(2);
    let s = pi_sq / lambda_max;
    if s < 1.0 - 1e-12 {
        return Err(Error::RegimeUnsupported(format!(
            "λ_max = {lambda_max} exceeds π² (needs λ_max ≤ π²/s for some s ≥ 1)"
        )));
    }
    let floor = pi_sq / (s + window(s));
    if lambda_min < floor * (1.0 - 1e-9) {
        return Err(Error::RegimeUnsupported(format!(
            "λ_min = {lambda_min} below the admissible floor {floor:.6e} at s = {s:.4}"
        )));
    }
    Ok(s)
}

/// Smallest `l ≥ 1` with `(2l+3)·exp(nλ_max/4 − λ_min l²) ≤ eps/(10n)`: the
/// union-bounded tail mass of all out-of-window coordinates per step.
pub fn window_radius(n: usize, lambda_min: f64, lambda_max: f64, eps: f64) -> Result<u32> {
    if !(lambda_min > 0.0 && lambda_max >= lambda_min && eps > 0.0) {
        return Err(Error::InvalidParameter("window_radius needs positive inputs".into()));
    }
    let budget = eps / (10.0 * n as f64);
    let nf = n as f64;
    let mut l = 1u32;
    loop {
        let lf = l as f64;
        let mass = (2.0 * lf + 3.0) * (nf * lambda_max / 4.0 - lambda_min * lf * lf).exp();
        if mass <= budget {
            return Ok(l);
        }
        l += 1;
        if l > 1_000_000 {
            return Err(Error::Internal("window radius search ran away".into()));
        }
    }
}

/// The conditional distribution of the outermost coordinate at one stage.
#[derive(Debug, Clone)]
pub struct CoordinateDistribution {
    /// (α, probability) over the window, normalized.
    pub support: Vec<(i64, f64)>,
    /// Projected target coordinates `η'` for each α, ready for the next stage.
    pub projected: Vec<Vec<f64>>,
    pub theta_evals: u64,
    pub all_converged: bool,
}

/// Computes `P(ξ_d = α) ∝ exp(−γ_d (η_d − α)²)·Θ_{Λ_α}(v_α)` over the window
/// `[⌊η_d⌋ − l, ⌈η_d⌉ + l]`, normalized.
///
/// `gram` is the current prefix Gram (d×d), `eta` the current target
/// coordinates, `gamma_d` the squared Gram–Schmidt length of the last basis
/// vector. The per-α theta goes through the reciprocity route at relative
/// error `eps_local`.
pub fn coordinate_distribution(
    gram: &SymMatrix,
    eta: &[f64],
    gamma_d: f64,
    l: u32,
    eps_local: f64,
    theta_seed: u64,
) -> Result<CoordinateDistribution> {
    let d = gram.n();
    assert_eq!(eta.len(), d);
    let eta_last = eta[d - 1];
    let lo = eta_last.floor() as i64 - l as i64;
    let hi = eta_last.ceil() as i64 + l as i64;

    let mut log_weights = Vec::with_capacity((hi - lo + 1) as usize);
    let mut projected = Vec::with_capacity((hi - lo + 1) as usize);
    let mut theta_evals = 0u64;
    let mut all_converged = true;

    for (idx, alpha) in (lo..=hi).enumerate() {
        let af = alpha as f64;
        let dist_sq = gamma_d * (eta_last - af) * (eta_last - af);
        let (log_theta, eta_next) = if d == 1 {
            (0.0, Vec::new())
        } else {
            // Solve G' η' = (⟨u_i, v⟩ − α⟨u_i, u_d⟩)_{i<d} for the projected
            // target in the prefix basis.
            let sub = gram.leading_block(d - 1);
            let mut rhs = vec![0.0; d - 1];
            for i in 0..d - 1 {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += gram.get(i, j) * eta[j];
                }
                rhs[i] = acc - af * gram.get(i, d - 1);
            }
            let eta_next = linalg::solve_spd(&sub, &rhs)?;
            let inst = ThetaInstance::new(
                sub,
                None,
                Some(eta_next.clone()),
                eps_local,
                derive_seed(theta_seed, idx as u64),
            )?;
            let result = theta::theta_shifted(&inst).map_err(|e| match e {
                Error::RegimeUnsupported(msg) => Error::Internal(format!(
                    "prefix theta left the admissible regime, which the config invariant rules out: {msg}"
                )),
                other => other,
            })?;
            theta_evals += result.n_evals;
            all_converged &= result.converged;
            (result.value.ln(), eta_next)
        };
        log_weights.push(-dist_sq + log_theta);
        projected.push(eta_next);
    }

    // Normalize in log space.
    let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|&lw| (lw - max_lw).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Internal("coordinate weights sum to zero".into()));
    }
    let support: Vec<(i64, f64)> =
        (lo..=hi).zip(weights.iter().map(|&w| w / total)).collect();
    Ok(CoordinateDistribution { support, projected, theta_evals, all_converged })
}

/// Per-stage diagnostics of a single draw.
#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub dim: usize,
    pub window_lo: i64,
    pub window_hi: i64,
    pub gamma: f64,
    pub theta_evals: u64,
    pub theta_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DrawDiagnostics {
    pub l: u32,
    pub per_step_eps: f64,
    pub steps: Vec<StepDiagnostics>,
}

/// One draw from the discrete Gaussian on Λ centered at `v`.
#[derive(Debug, Clone, Serialize)]
pub struct SampleDraw {
    /// Integer coordinates ξ₁…ξ_n in the given basis.
    pub coords: Vec<i64>,
    pub diagnostics: DrawDiagnostics,
}

/// Runs the full coordinate-by-coordinate draw. A failed stage aborts the
/// draw; there is no partial output.
pub fn sample(config: &SamplerConfig) -> Result<SampleDraw> {
    sample_indexed(config, 0)
}

/// Draw number `index` of a reproducible batch: the per-draw RNG stream and
/// the per-step theta seeds derive from (seed, index) by counter, so batches
/// can run in parallel and still agree with the sequential order.
pub fn sample_indexed(config: &SamplerConfig, index: u64) -> Result<SampleDraw> {
    let n = config.basis.n();
    let full_gram = config.basis.gram();
    let full_bounds = config.basis.bounds();
    let chol = linalg::cholesky(full_gram)?;
    let l = config.window_radius;
    let eps_local = config.eps / (10.0 * n as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index.wrapping_add(1));

    let mut eta: Vec<f64> = config.coords.clone();
    let mut fixed_rev: Vec<i64> = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);

    for stage in 0..n {
        let d = n - stage;
        let prefix = if d == n { full_gram.clone() } else { full_gram.leading_block(d) };
        // Spectral persistence: principal submatrices keep both bounds.
        let sub_bounds = linalg::spectral_bounds(&prefix, 1e-10)?;
        if sub_bounds.lambda_min < full_bounds.lambda_min - 1e-8
            || sub_bounds.lambda_max > full_bounds.lambda_max + 1e-8
        {
            return Err(Error::Internal(format!(
                "prefix spectrum [{}, {}] escaped the full-basis bounds [{}, {}]",
                sub_bounds.lambda_min,
                sub_bounds.lambda_max,
                full_bounds.lambda_min,
                full_bounds.lambda_max
            )));
        }
        let gamma_d = chol[(d - 1) * n + (d - 1)].powi(2);
        let theta_seed = derive_seed(config.seed ^ index.rotate_left(17), stage as u64);
        let dist = coordinate_distribution(&prefix, &eta, gamma_d, l, eps_local, theta_seed)?;

        let u: f64 = rng.random();
        let mut chosen = dist.support.len() - 1;
        let mut acc = 0.0;
        for (i, &(_, p)) in dist.support.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let (alpha, _) = dist.support[chosen];
        steps.push(StepDiagnostics {
            dim: d,
            window_lo: dist.support[0].0,
            window_hi: dist.support[dist.support.len() - 1].0,
            gamma: gamma_d,
            theta_evals: dist.theta_evals,
            theta_converged: dist.all_converged,
        });
        fixed_rev.push(alpha);
        eta = dist.projected[chosen].clone();
    }

    fixed_rev.reverse();
    Ok(SampleDraw {
        coords: fixed_rev,
        diagnostics: DrawDiagnostics { l, per_step_eps: eps_local, steps },
    })
}

fn derive_seed(base: u64, counter: u64) -> u64 {
    // splitmix64 step over (base, counter).
    let mut z = base ^ counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
