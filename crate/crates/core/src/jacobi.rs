//! One-dimensional Jacobi triple product machinery.
//!
//! The triple product identity
//! `∏_{k≥1} (1−q^{2k})(1+2q^{2k−1}cosθ+q^{4k−2}) = Σ_ξ q^{ξ²} e^{iξθ}`
//! drives everything downstream: the scalar theta series here are both the
//! building blocks of the diagonal fast paths and the oracles the truncated
//! products are tested against. This module also owns the truncation-order
//! rule that turns a relative-error target into a product cutoff `K`.

use crate::error::{Error, Result};

/// Gaussian-weight exponent `s > 0` together with its nome `q = e^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomeParams {
    pub s: f64,
    pub q: f64,
}

impl NomeParams {
    pub fn from_s(s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("s must be positive and finite, got {s}")));
        }
        Ok(NomeParams { s, q: (-s).exp() })
    }
}

/// Product truncation order, K ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationOrder(pub u32);

impl TruncationOrder {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("truncation order must be >= 1".into()));
        }
        Ok(TruncationOrder(k))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

/// Truncated triple product
/// `∏_{k=1..K} (1−q^{2k})(1 + 2 q^{2k−1} cos θ + q^{4k−2})`.
///
/// The unit-circle argument is supplied as the angle θ with w = e^{iθ}.
pub fn triple_product_lhs(q: f64, theta: f64, order: TruncationOrder) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("nome q must lie in [0, 1), got {q}")));
    }
    let cos_t = theta.cos();
    let mut log_acc = 0.0;
    for k in 1..=order.get() {
        let q2k = q.powi(2 * k as i32);
        let q2k1 = q.powi(2 * k as i32 - 1);
        let factor = (1.0 - q2k) * (1.0 + 2.0 * q2k1 * cos_t + q2k1 * q2k1);
        if factor <= 0.0 {
            // (1 − q^{2k−1})² > 0 for q < 1, so this cannot happen; guarded anyway.
            return Err(Error::Internal(format!("non-positive triple product factor {factor}")));
        }
        log_acc += factor.ln();
    }
    Ok(log_acc.exp())
}

/// Direct series `Σ_ξ q^{ξ²} cos(ξθ)`, summed symmetrically until the terms
/// fall below 1e−18. Oracle counterpart of [`triple_product_lhs`].
pub fn triple_product_series(q: f64, theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("nome q must lie in [0, 1), got {q}")));
    }
    let mut acc = 1.0;
    let mut xi = 1u32;
    loop {
        let term = q.powi((xi * xi) as i32);
        if term < 1e-18 || xi > 100_000 {
            break;
        }
        acc += 2.0 * term * (theta * xi as f64).cos();
        xi += 1;
    }
    Ok(acc)
}

/// Scalar theta series `Σ_{ξ∈Z} e^{−s ξ²}` by symmetric truncation; the tail
/// is driven below 1e−17 of the result.
pub fn theta_1d(s: f64) -> f64 {
    assert!(s > 0.0, "theta_1d needs s > 0");
    let mut acc = 1.0;
    let mut xi: u64 = 1;
    loop {
        let term = (-s * (xi * xi) as f64).exp();
        if term < 1e-18 * acc || xi > 10_000_000 {
            break;
        }
        acc += 2.0 * term;
        xi += 1;
    }
    acc
}

/// Scalar theta series truncated at an explicit number of terms:
/// `Σ_{|ξ| ≤ tail_terms} e^{−s ξ²}`. The caller is responsible for choosing
/// `tail_terms` so that `e^{−s·tail_terms²}` is below the target accuracy.
pub fn theta_1d_terms(s: f64, tail_terms: u32) -> f64 {
    assert!(s > 0.0, "theta_1d_terms needs s > 0");
    let mut acc = 1.0;
    for xi in 1..=tail_terms as u64 {
        acc += 2.0 * (-s * (xi * xi) as f64).exp();
    }
    acc
}

/// Shifted scalar theta series `Σ_{ξ∈Z} e^{−c (ξ − η)²}`.
pub fn theta_1d_shifted(c: f64, eta: f64) -> f64 {
    assert!(c > 0.0, "theta_1d_shifted needs c > 0");
    let center = eta.round() as i64;
    let mut acc = (-c * (center as f64 - eta).powi(2)).exp();
    let mut r: i64 = 1;
    loop {
        let lo = ((center - r) as f64 - eta).powi(2);
        let hi = ((center + r) as f64 - eta).powi(2);
        let t = (-c * lo).exp() + (-c * hi).exp();
        acc += t;
        if t < 1e-18 * acc || r > 10_000_000 {
            break;
        }
        r += 1;
    }
    acc
}

/// Oscillatory scalar theta series `Σ_{ξ∈Z} e^{−c ξ²} cos(β ξ)`.
pub fn theta_1d_osc(c: f64, beta: f64) -> f64 {
    assert!(c > 0.0, "theta_1d_osc needs c > 0");
    let mut acc = 1.0;
    let mut xi: u64 = 1;
    loop {
        let term = (-c * (xi * xi) as f64).exp();
        if term < 1e-18 || xi > 10_000_000 {
            break;
        }
        acc += 2.0 * term * (beta * xi as f64).cos();
        xi += 1;
    }
    acc
}

/// Smallest K ≥ 1 with `5n·q^{2K−1} ≤ eps/3` and `4n·q^{2K} ≤ eps/3`
/// (q = e^{−s}): the two product-tail estimates, multiplied by the n factors
/// of the product, each held to a third of the error budget.
pub fn truncation_order(n: usize, eps: f64, s: f64) -> Result<TruncationOrder> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(s >= 1.0) {
        return Err(Error::InvalidParameter(format!("s must be >= 1, got {s}")));
    }
    let q = (-s).exp();
    let nf = n as f64;
    let budget = eps / 3.0;
    let mut k = 1u32;
    loop {
        let tail_osc = 5.0 * nf * q.powi(2 * k as i32 - 1);
        let tail_pref = 4.0 * nf * q.powi(2 * k as i32);
        if tail_osc <= budget && tail_pref <= budget {
            return Ok(TruncationOrder(k));
        }
        k += 1;
        if k > 10_000 {
            return Err(Error::Internal("truncation order search ran away".into()));
        }
    }
}
