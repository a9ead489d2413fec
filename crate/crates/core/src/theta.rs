//! User-facing theta computations and regime selection.
//!
//! `theta_sum` evaluates `Σ_{x∈Zⁿ} e^{−⟨Bx,x⟩} cos⟨b,x⟩` through the factored
//! integral representation: with `s = λ_min(B)` and `C = B − sI = ½AᵀA`, the
//! sum equals a prefactor times the Gaussian expectation of an explicit
//! log-concave product, which the integrator estimates to `eps/3` while two
//! `eps/3` shares cover the product truncations. `theta_shifted` reduces
//! `Θ(B, y) = Σ e^{−⟨B(x−y),x−y⟩}` to a `theta_sum` on `π²B⁻¹` with phase
//! `2πy` through the reciprocity relation. `theta_smooth` handles the regime
//! `B ⪰ (γ ln n)·I` by enumerating a small ball. Diagonal forms short-circuit
//! to exact scalar products.
//!
//! The oscillatory sum is real by the x ↔ −x symmetry, so every value here is
//! a plain f64.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrand::{admissibility_series, FactoredForm};
use crate::integrator::{self, Backend, IntegralRequest};
use crate::jacobi::{self, truncation_order};
use crate::linalg::{self, SymMatrix};
use crate::oracle::{self, OracleCaps, ThetaKind};

/// Which computational route a theta instance falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Integral,
    Reciprocal,
    Smooth,
    DirectOracle,
    Unsupported,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// The witness scale: λ_min(B) in b-mode, λ_min(π²B⁻¹) in y-mode.
    pub s: f64,
    pub detail: String,
}

/// A theta computation request. Exactly one of the oscillatory phase `b`
/// (possibly zero) and the shift `y` is active.
#[derive(Debug, Clone)]
pub struct ThetaInstance {
    pub form: SymMatrix,
    pub phase: Vec<f64>,
    pub shift: Option<Vec<f64>>,
    pub eps: f64,
    pub seed: u64,
}

impl ThetaInstance {
    pub fn new(
        form: SymMatrix,
        phase: Option<Vec<f64>>,
        shift: Option<Vec<f64>>,
        eps: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = form.n();
        let phase = phase.unwrap_or_else(|| vec![0.0; n]);
        if phase.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "phase vector length {} vs n = {n}",
                phase.len()
            )));
        }
        if let Some(y) = &shift {
            if y.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "shift vector length {} vs n = {n}",
                    y.len()
                )));
            }
            if phase.iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidParameter(
                    "phase and shift modes are mutually exclusive".into(),
                ));
            }
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
        }
        Ok(ThetaInstance { form, phase, shift, eps, seed })
    }

    pub fn n(&self) -> usize {
        self.form.n()
    }
}

/// Knobs shared by the theta entry points.
#[derive(Debug, Clone)]
pub struct ThetaOptions {
    pub conf: f64,
    pub gamma: f64,
    pub oracle_dim_cutoff: usize,
    /// Skip the exact diagonal shortcut; used to exercise the MC pipeline.
    pub force_mc: bool,
    pub backend: Option<Backend>,
    /// Accept inputs in the slack between the product-form window and the
    /// exact admissibility series. Off by default.
    pub allow_exact_admissibility: bool,
    pub max_evals: u64,
    pub caps: OracleCaps,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            conf: 0.95,
            gamma: 2.0,
            oracle_dim_cutoff: 4,
            force_mc: false,
            backend: None,
            allow_exact_admissibility: false,
            max_evals: 5_000_000,
            caps: OracleCaps::default(),
        }
    }
}

/// Result of a theta computation: the estimate plus how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaResult {
    pub value: f64,
    pub rel_stderr: f64,
    pub regime: Regime,
    pub s: f64,
    #[serde(rename = "K")]
    pub k: u32,
    pub n_evals: u64,
    pub seed: u64,
    pub converged: bool,
    /// True when the value came from an exact summation (diagonal product
    /// form or certified enumeration at negligible tail).
    pub exact: bool,
}

impl ThetaResult {
    /// Total relative-error radius this result claims: the statistical part
    /// at the given confidence plus the deterministic truncation budget.
    pub fn claimed_rel_error(&self, eps: f64, conf: f64) -> f64 {
        if self.exact {
            0.0
        } else if self.rel_stderr == 0.0 && self.n_evals == 0 {
            eps
        } else {
            integrator::normal_quantile_two_sided(conf) * self.rel_stderr + 2.0 * eps / 3.0
        }
    }
}

/// The window width `(e^s/4)(1−e^{−s})²(1−e^{−2s})`: `B` is admissible for
/// the integral route when `sI ⪯ B ⪯ (s + window(s))·I` with `s ≥ 1`.
pub fn window(s: f64) -> f64 {
    (s.exp() / 4.0) * (1.0 - (-s).exp()).powi(2) * (1.0 - (-2.0 * s).exp())
}

/// Widest admissible window at scale `s` per the exact admissibility series
/// (the product-form window uses a geometric upper bound of the series).
pub fn window_exact(s: f64) -> f64 {
    1.0 / (4.0 * admissibility_series((-s).exp()))
}

/// Smallest dimension at which the smooth-range route is valid for a given
/// `γ > 1`.
pub fn smooth_min_dim(gamma: f64) -> f64 {
    (5.0 / (gamma - 1.0)).exp()
}

/// Certified tail mass of the smooth-range enumeration: `60·n^{(1−γ)k}`.
pub fn tail_bound_smooth(n: usize, gamma: f64, k: u32) -> f64 {
    60.0 * (n as f64).powf((1.0 - gamma) * k as f64)
}

/// Classifies an instance into a computational regime.
///
/// b-mode: `INTEGRAL` when `λ_max ≤ s + window(s)` at `s = λ_min ≥ 1`;
/// `SMOOTH` when `λ_min ≥ γ ln n` and `n` exceeds the smooth cutoff.
/// y-mode: the same tests applied to the reciprocal image `π²B⁻¹`.
/// Small instances fall back to `DIRECT_ORACLE`.
pub fn select_regime(inst: &ThetaInstance, opts: &ThetaOptions) -> Result<RegimeReport> {
    let n = inst.n();
    let bounds = linalg::spectral_bounds(&inst.form, 1e-11)?;
    if bounds.lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: bounds.lambda_min });
    }
    let (s, lam_max, mode) = if inst.shift.is_none() {
        (bounds.lambda_min, bounds.lambda_max, "b-mode")
    } else {
        // Reciprocal image π²B⁻¹ has spectrum [π²/λ_max, π²/λ_min].
        (PI * PI / bounds.lambda_max, PI * PI / bounds.lambda_min, "y-mode")
    };
    let width = if opts.allow_exact_admissibility {
        window_exact(s).max(window(s))
    } else {
        window(s)
    };
    let slack = 1e-9 * (1.0 + lam_max.abs());

    if s >= 1.0 && lam_max <= s + width + slack {
        let regime = if inst.shift.is_none() { Regime::Integral } else { Regime::Reciprocal };
        return Ok(RegimeReport {
            regime,
            s,
            detail: format!("{mode}: spectrum in [{s:.6}, {lam_max:.6}] within window {width:.6}"),
        });
    }
    if n >= 2 && opts.gamma > 1.0 {
        let needed = opts.gamma * (n as f64).ln();
        if s >= needed && (n as f64) >= smooth_min_dim(opts.gamma) {
            return Ok(RegimeReport {
                regime: Regime::Smooth,
                s,
                detail: format!(
                    "{mode}: λ_min witness {s:.6} ≥ γ ln n = {needed:.6}, n = {n} above cutoff {:.1}",
                    smooth_min_dim(opts.gamma)
                ),
            });
        }
    }
    if n <= opts.oracle_dim_cutoff {
        return Ok(RegimeReport {
            regime: Regime::DirectOracle,
            s: bounds.lambda_min,
            detail: format!("{mode}: n = {n} within the oracle cutoff"),
        });
    }
    Ok(RegimeReport {
        regime: Regime::Unsupported,
        s,
        detail: format!(
            "{mode}: spectrum [{:.6}, {:.6}] fits no window (integral needs λ_max ≤ {:.6})",
            bounds.lambda_min,
            bounds.lambda_max,
            s + width
        ),
    })
}

/// `Σ_{x∈Zⁿ} e^{−⟨Bx,x⟩} cos⟨b,x⟩` via the integral representation.
pub fn theta_sum(inst: &ThetaInstance) -> Result<ThetaResult> {
    theta_sum_with(inst, &ThetaOptions::default())
}

pub fn theta_sum_with(inst: &ThetaInstance, opts: &ThetaOptions) -> Result<ThetaResult> {
    if inst.shift.is_some() {
        return Err(Error::InvalidParameter("theta_sum expects b-mode; use theta_shifted".into()));
    }
    let report = select_regime(inst, opts)?;
    if report.regime != Regime::Integral {
        return Err(Error::RegimeUnsupported(format!(
            "theta_sum requires the integral window: {}",
            report.detail
        )));
    }
    if inst.form.is_diagonal() && !opts.force_mc {
        return Ok(diagonal_theta_sum(inst, Regime::Integral, report.s));
    }
    theta_sum_pipeline(inst, opts, report.s, Regime::Integral)
}

/// The factored-form Monte-Carlo pipeline behind `theta_sum`.
fn theta_sum_pipeline(
    inst: &ThetaInstance,
    opts: &ThetaOptions,
    s: f64,
    regime: Regime,
) -> Result<ThetaResult> {
    let n = inst.n();
    let c = inst.form.sub(&SymMatrix::scaled_identity(n, s))?;
    let a = linalg::factor_half_gram(&c, 1e-10)?;
    let order = truncation_order(n, inst.eps, s)?;
    let form = FactoredForm::new(a, inst.phase.clone(), s, order)?;
    let margin = form.admissibility_margin();
    if margin < -1e-9 {
        // The /4 window implies the admissibility premise; reaching this
        // branch means the window check and the series disagree.
        return Err(Error::Internal(format!(
            "admissibility margin {margin} negative inside the integral window"
        )));
    }
    let log_h = |t: &[f64]| form.log_factor_sum(t).unwrap_or(f64::NAN);
    let req = IntegralRequest {
        m: form.m(),
        log_h: &log_h,
        eps: inst.eps / 3.0,
        conf: opts.conf,
        seed: inst.seed,
        max_evals: opts.max_evals,
    };
    let est = match opts.backend {
        Some(backend) => integrator::estimate(&req, backend)?,
        None => integrator::integrate_gaussian_expectation(&req)?,
    };
    Ok(ThetaResult {
        value: form.product_prefactor_log().exp() * est.value,
        rel_stderr: est.rel_stderr,
        regime,
        s,
        k: order.get(),
        n_evals: est.n_evals,
        seed: est.seed,
        converged: est.converged,
        exact: false,
    })
}

/// Exact product form for diagonal B: `∏_j Σ_ξ e^{−B_jj ξ²} cos(b_j ξ)`.
fn diagonal_theta_sum(inst: &ThetaInstance, regime: Regime, s: f64) -> ThetaResult {
    let mut value = 1.0;
    for j in 0..inst.n() {
        value *= jacobi::theta_1d_osc(inst.form.get(j, j), inst.phase[j]);
    }
    ThetaResult {
        value,
        rel_stderr: 0.0,
        regime,
        s,
        k: 0,
        n_evals: 0,
        seed: inst.seed,
        converged: true,
        exact: true,
    }
}

/// `Θ(B, y) = Σ e^{−⟨B(x−y),x−y⟩}` through the reciprocity relation:
/// `Θ(B, y) = π^{n/2} det(B)^{−1/2} · Σ_x e^{−⟨π²B⁻¹x,x⟩} cos(2π⟨y,x⟩)`.
pub fn theta_shifted(inst: &ThetaInstance) -> Result<ThetaResult> {
    theta_shifted_with(inst, &ThetaOptions::default())
}

pub fn theta_shifted_with(inst: &ThetaInstance, opts: &ThetaOptions) -> Result<ThetaResult> {
    let y = inst
        .shift
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("theta_shifted expects a shift vector".into()))?
        .clone();
    let n = inst.n();
    let report = select_regime(inst, opts)?;
    if report.regime == Regime::Unsupported {
        return Err(Error::RegimeUnsupported(report.detail));
    }

    let eig = linalg::sym_eigen(&inst.form, 1e-11)?;
    let lam_min = eig.values[0];
    let lam_max = eig.values[n - 1];
    if lam_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: lam_min });
    }
    let cond = lam_max / lam_min;
    if cond > 1e12 {
        return Err(Error::IllConditioned { cond });
    }
    let ln_det: f64 = eig.values.iter().map(|&l| l.ln()).sum();

    if report.regime == Regime::DirectOracle {
        let mut r = direct_oracle_theta(inst, opts)?;
        r.s = report.s;
        return Ok(r);
    }

    // Reciprocal image: B̃ = π²B⁻¹ (assembled from the eigenpairs), b̃ = 2πy.
    let mut raw = vec![0.0; n * n];
    for r in 0..n {
        let coef = PI * PI / eig.values[r];
        for i in 0..n {
            for j in 0..n {
                raw[i * n + j] += coef * eig.vectors[r][i] * eig.vectors[r][j];
            }
        }
    }
    let recip = SymMatrix::symmetrized(n, &raw)?;
    let phase: Vec<f64> = y.iter().map(|&v| 2.0 * PI * v).collect();
    let inner = ThetaInstance::new(recip, Some(phase), None, inst.eps, inst.seed)?;

    let inner_result = match report.regime {
        Regime::Reciprocal => {
            if inner.form.is_diagonal() && !opts.force_mc {
                diagonal_theta_sum(&inner, Regime::Integral, report.s)
            } else {
                theta_sum_pipeline(&inner, opts, report.s, Regime::Integral)?
            }
        }
        Regime::Smooth => theta_smooth_with(&inner, opts.gamma, opts)?,
        _ => unreachable!("handled above"),
    };

    let scale = (0.5 * n as f64 * PI.ln() - 0.5 * ln_det).exp();
    Ok(ThetaResult {
        value: scale * inner_result.value,
        rel_stderr: inner_result.rel_stderr,
        regime: Regime::Reciprocal,
        s: report.s,
        k: inner_result.k,
        n_evals: inner_result.n_evals,
        seed: inst.seed,
        converged: inner_result.converged,
        exact: inner_result.exact,
    })
}

/// Smooth-range evaluation: enumerate `{‖x‖² ≤ k}` for the smallest `k` with
/// `60·n^{(1−γ)k} ≤ eps/4` and return the partial sum. Deterministic; valid
/// because the total sum stays within ½ of 1 in this regime.
///
/// Gated on the smooth premise itself (`λ_min ≥ γ ln n`, `n` above the
/// cutoff): an instance can satisfy it while `select_regime` still dispatches
/// it to the integral route, which takes priority.
pub fn theta_smooth(inst: &ThetaInstance, gamma: f64) -> Result<ThetaResult> {
    let opts = ThetaOptions { gamma, ..Default::default() };
    if inst.shift.is_some() {
        return Err(Error::InvalidParameter(
            "theta_smooth expects b-mode; shifted smooth instances go through theta_shifted".into(),
        ));
    }
    let n = inst.n();
    let bounds = linalg::spectral_bounds(&inst.form, 1e-11)?;
    if bounds.lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: bounds.lambda_min });
    }
    let needed = gamma * (n as f64).ln();
    if !(gamma > 1.0)
        || bounds.lambda_min < needed - 1e-9
        || (n as f64) < smooth_min_dim(gamma)
    {
        return Err(Error::RegimeUnsupported(format!(
            "smooth range needs λ_min ≥ γ ln n = {needed:.6} (have {:.6}) and n ≥ {:.1} (have {n})",
            bounds.lambda_min,
            smooth_min_dim(gamma)
        )));
    }
    theta_smooth_with(inst, gamma, &opts)
}

fn theta_smooth_with(inst: &ThetaInstance, gamma: f64, opts: &ThetaOptions) -> Result<ThetaResult> {
    let n = inst.n();
    let budget = inst.eps / 4.0;
    let mut k = 1u32;
    while tail_bound_smooth(n, gamma, k) > budget {
        k += 1;
        if k > 10_000 {
            return Err(Error::Internal("smooth enumeration order ran away".into()));
        }
    }
    let mut value = 0.0;
    let b = &inst.form;
    let phase = &inst.phase;
    oracle::for_each_ball_point(n, k, &opts.caps, |support| {
        let mut dot = 0.0;
        for &(i, v) in support {
            dot += phase[i] * v as f64;
        }
        value += (-b.quad_form_sparse_int(support)).exp() * dot.cos();
    })?;
    if value < 0.5 - 1e-9 {
        return Err(Error::Internal(format!(
            "smooth partial sum {value} below the guaranteed 1/2 floor"
        )));
    }
    Ok(ThetaResult {
        value,
        rel_stderr: 0.0,
        regime: Regime::Smooth,
        s: linalg::spectral_bounds(&inst.form, 1e-11)?.lambda_min,
        k,
        n_evals: 0,
        seed: inst.seed,
        converged: true,
        exact: false,
    })
}

/// Small-n fallback: certified enumeration, doubling the ball until the tail
/// certificate is below half the requested relative error.
fn direct_oracle_theta(inst: &ThetaInstance, opts: &ThetaOptions) -> Result<ThetaResult> {
    let bounds = linalg::spectral_bounds(&inst.form, 1e-11)?;
    if bounds.lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: bounds.lambda_min });
    }
    let s_tail = bounds.lambda_min;
    let n = inst.n();
    let mut k = (n as u32).max(4);
    for _ in 0..40 {
        let kind = match &inst.shift {
            Some(y) => ThetaKind::Shifted(y),
            None => ThetaKind::Oscillatory(&inst.phase),
        };
        let (value, tail) = oracle::brute_theta(&inst.form, kind, s_tail, k, &opts.caps)?;
        if value.abs() > 0.0 && tail <= 0.5 * inst.eps * value.abs() {
            return Ok(ThetaResult {
                value,
                rel_stderr: 0.0,
                regime: Regime::DirectOracle,
                s: s_tail,
                k,
                n_evals: 0,
                seed: inst.seed,
                converged: true,
                exact: tail <= 1e-14 * value.abs(),
            });
        }
        k *= 2;
    }
    Err(Error::TailRegime(format!(
        "oracle enumeration could not certify eps = {} for this instance",
        inst.eps
    )))
}

/// Regime dispatch used by the CLI: selects a route and runs it.
pub fn compute(inst: &ThetaInstance, opts: &ThetaOptions) -> Result<(ThetaResult, RegimeReport)> {
    let report = select_regime(inst, opts)?;
    let result = match (report.regime, inst.shift.is_some()) {
        (Regime::Unsupported, _) => return Err(Error::RegimeUnsupported(report.detail)),
        (_, true) => theta_shifted_with(inst, opts)?,
        (Regime::Integral, false) => theta_sum_with(inst, opts)?,
        (Regime::Smooth, false) => theta_smooth_with(inst, opts.gamma, opts)?,
        (Regime::DirectOracle, false) => direct_oracle_theta(inst, opts)?,
        (Regime::Reciprocal, false) => {
            return Err(Error::Internal("reciprocal regime reported for b-mode".into()))
        }
    };
    Ok((result, report))
}

/// Forces a b-mode route regardless of what `select_regime` would pick; each
/// route still enforces its own mathematical premise.
pub fn compute_forced(
    inst: &ThetaInstance,
    opts: &ThetaOptions,
    regime: Regime,
) -> Result<ThetaResult> {
    match regime {
        Regime::Integral => theta_sum_with(inst, opts),
        Regime::Smooth => theta_smooth(inst, opts.gamma),
        Regime::DirectOracle => direct_oracle_theta(inst, opts),
        Regime::Reciprocal => theta_shifted_with(inst, opts),
        Regime::Unsupported => {
            Err(Error::InvalidParameter("cannot force the UNSUPPORTED regime".into()))
        }
    }
}
