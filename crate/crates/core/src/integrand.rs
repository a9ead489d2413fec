//! The log-concave integrand behind the theta sum.
//!
//! For a factored form `B = sI + ½AᵀA` the theta sum equals a prefactor times
//! the standard-Gaussian expectation of
//! `F̂(t) = ∏_{j=1..n} ∏_{k=1..K} (1 + 2q^{2k−1} cos φ_j(t) + q^{4k−2})`,
//! with phases `φ_j(t) = β_j + Σ_i a_{ij} τ_i` and nome `q = e^{−s}`. This
//! module evaluates `ln F̂`, its analytic gradient, the log-prefactor, and the
//! admissibility margin that certifies log-concavity of the full integrand.
//!
//! All products are accumulated in log space; the n·K factors underflow fast
//! otherwise. Phases are reduced mod 2π before the cosine.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::jacobi::TruncationOrder;
use crate::linalg::{self, RectMatrix, SymMatrix};

/// The factored representation `B = sI + ½AᵀA` with phase vector `b`,
/// nome `q = e^{−s}` and product truncation order `K`.
#[derive(Debug, Clone)]
pub struct FactoredForm {
    n: usize,
    m: usize,
    a: RectMatrix,
    b: Vec<f64>,
    s: f64,
    q: f64,
    order: TruncationOrder,
    // cached powers q^{2k-1} and q^{4k-2}, k = 1..K
    q_odd: Vec<f64>,
    q_odd_sq: Vec<f64>,
}

impl FactoredForm {
    pub fn new(a: RectMatrix, b: Vec<f64>, s: f64, order: TruncationOrder) -> Result<Self> {
        let n = a.cols();
        let m = a.rows();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "phase vector length {} does not match n = {n}",
                b.len()
            )));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
        }
        let q = (-s).exp();
        let kk = order.get() as usize;
        let q_odd: Vec<f64> = (1..=kk).map(|k| q.powi(2 * k as i32 - 1)).collect();
        let q_odd_sq: Vec<f64> = q_odd.iter().map(|&v| v * v).collect();
        Ok(FactoredForm { n, m, a, b, s, q, order, q_odd, q_odd_sq })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn order(&self) -> TruncationOrder {
        self.order
    }

    pub fn matrix(&self) -> &RectMatrix {
        &self.a
    }

    pub fn phases(&self) -> &[f64] {
        &self.b
    }

    /// `B = sI + ½AᵀA`, for validation and oracle cross-checks.
    pub fn reconstruct_b(&self) -> SymMatrix {
        let half_gram = self.a.gram_cols().scale(0.5);
        half_gram
            .add(&SymMatrix::scaled_identity(self.n, self.s))
            .expect("dimensions match by construction")
    }

    /// `½ − ‖AᵀA‖_op · Σ_{k≥1} q^{2k−1}/(1−q^{2k−1})²`, the series summed to
    /// convergence below 1e−17 per term. A nonnegative margin certifies
    /// log-concavity of the truncated integrand for every K.
    pub fn admissibility_margin(&self) -> f64 {
        let op = linalg::operator_norm(&self.a, 1e-12).unwrap_or(f64::INFINITY);
        0.5 - op * op * admissibility_series(self.q)
    }

    /// `ln F̂(t)`: the double product without the Gaussian part.
    pub fn log_factor_sum(&self, t: &[f64]) -> Result<f64> {
        assert_eq!(t.len(), self.m);
        let mut acc = 0.0;
        for j in 0..self.n {
            let phi = self.phase_at(j, t);
            let cos_phi = phi.cos();
            for k in 0..self.q_odd.len() {
                let factor = 1.0 + 2.0 * self.q_odd[k] * cos_phi + self.q_odd_sq[k];
                if factor <= 0.0 {
                    // (1−q^{2k−1})² > 0 rules this out for q < 1; guarded anyway.
                    return Err(Error::Internal(format!(
                        "non-positive product factor {factor} at j={j}, k={}",
                        k + 1
                    )));
                }
                acc += factor.ln();
            }
        }
        Ok(acc)
    }

    /// Log-density `ln G(t) = −‖t‖²/2 + ln F̂(t)` with its analytic gradient.
    ///
    /// Per factor the derivative in τ_i is
    /// `−2 a_{ij} q^{2k−1} sin φ_j / (1 + 2 q^{2k−1} cos φ_j + q^{4k−2})`.
    pub fn log_density(&self, t: &[f64]) -> Result<LogDensityValue> {
        assert_eq!(t.len(), self.m);
        let mut log_g = -0.5 * linalg::norm_sq(t);
        // Per-j factor of the gradient before the chain rule through a_{ij}.
        let mut per_phase = vec![0.0; self.n];
        for j in 0..self.n {
            let phi = self.phase_at(j, t);
            let (sin_phi, cos_phi) = phi.sin_cos();
            for k in 0..self.q_odd.len() {
                let denom = 1.0 + 2.0 * self.q_odd[k] * cos_phi + self.q_odd_sq[k];
                if denom <= 0.0 {
                    return Err(Error::Internal(format!(
                        "non-positive product factor {denom} at j={j}, k={}",
                        k + 1
                    )));
                }
                log_g += denom.ln();
                per_phase[j] += -2.0 * self.q_odd[k] * sin_phi / denom;
            }
        }
        let mut gradient = Vec::with_capacity(self.m);
        for i in 0..self.m {
            let mut g = -t[i];
            for j in 0..self.n {
                g += self.a.get(i, j) * per_phase[j];
            }
            gradient.push(g);
        }
        Ok(LogDensityValue { log_g, gradient })
    }

    /// `−(m/2)·ln(2π) + n·Σ_{k=1..K} ln(1 − q^{2k})`: the factor in front of
    /// the raw integral `∫ F̂(t) e^{−‖t‖²/2} dt`.
    pub fn prefactor_log(&self) -> f64 {
        -0.5 * self.m as f64 * TAU.ln() + self.product_prefactor_log()
    }

    /// `n·Σ_{k=1..K} ln(1 − q^{2k})` alone: the factor in front of the
    /// normalized Gaussian expectation E[F̂], where the `(2π)^{−m/2}` has
    /// already been absorbed.
    pub fn product_prefactor_log(&self) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.order.get() {
            acc += self.n as f64 * (-self.q.powi(2 * k as i32)).ln_1p();
        }
        acc
    }

    #[inline]
    fn phase_at(&self, j: usize, t: &[f64]) -> f64 {
        let mut phi = self.b[j];
        for i in 0..self.m {
            phi += self.a.get(i, j) * t[i];
        }
        phi.rem_euclid(TAU)
    }
}

/// Value and gradient of `ln G` at a point.
#[derive(Debug, Clone)]
pub struct LogDensityValue {
    pub log_g: f64,
    pub gradient: Vec<f64>,
}

/// `Σ_{k≥1} q^{2k−1}/(1−q^{2k−1})²`, summed until terms drop below 1e−17.
pub fn admissibility_series(q: f64) -> f64 {
    assert!((0.0..1.0).contains(&q));
    let mut acc = 0.0;
    let mut k = 1i32;
    loop {
        let p = q.powi(2 * k - 1);
        let term = p / ((1.0 - p) * (1.0 - p));
        acc += term;
        if term < 1e-17 || k > 100_000 {
            break;
        }
        k += 1;
    }
    acc
}

/// Analytic second derivative of `τ ↦ ln(1 + 2q cos(ατ + β) + q²)`, used to
/// test the curvature bound `≤ 2α²q/(1−q)²`.
pub fn log_factor_second_derivative(q: f64, alpha: f64, beta: f64, tau: f64) -> f64 {
    let phi = alpha * tau + beta;
    let denom = 1.0 + 2.0 * q * phi.cos() + q * q;
    -(2.0 * alpha * alpha * q * (1.0 + q * q) * phi.cos() + 4.0 * alpha * alpha * q * q)
        / (denom * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::TruncationOrder;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn small_form(seed: u64, n: usize, m: usize, s: f64, k: u32) -> FactoredForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Keep ‖AᵀA‖ inside the admissible region at this s.
        let cap = (0.5 * s.exp() * (1.0 - (-s).exp()).powi(2) * (1.0 - (-2.0 * s).exp())).min(4.0);
        let scale = (cap / (4.0 * (m * n) as f64)).sqrt();
        let entries: Vec<f64> =
            (0..m * n).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let a = RectMatrix::new(m, n, entries).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        FactoredForm::new(a, b, s, TruncationOrder(k)).unwrap()
    }

    #[test]
    fn margin_for_zero_matrix_is_half() {
        let form =
            FactoredForm::new(RectMatrix::empty(3), vec![0.0; 3], 2.0, TruncationOrder(4)).unwrap();
        assert_close(form.admissibility_margin(), 0.5, 1e-15);
    }

    #[test]
    fn margin_at_the_window_boundary() {
        // s = 1 with ‖AᵀA‖ = ½e(1−e⁻¹)²(1−e⁻²): the geometric-series bound is
        // tight only up to its slack, so the exact-series margin is a small
        // positive number. The expected value is the series oracle itself.
        let s = 1.0f64;
        let op = 0.5 * s.exp() * (1.0 - (-s).exp()).powi(2) * (1.0 - (-2.0 * s).exp());
        let a = RectMatrix::new(1, 1, vec![op.sqrt()]).unwrap();
        let form = FactoredForm::new(a, vec![0.0], s, TruncationOrder(4)).unwrap();
        let expected = 0.5 - op * admissibility_series((-s).exp());
        assert_close(form.admissibility_margin(), expected, 1e-12);
        assert!(expected > 0.0 && expected < 0.05, "margin {expected}");
    }

    #[test]
    fn margin_at_s3_unit_norm() {
        let s = 3.0f64;
        let a = RectMatrix::new(1, 1, vec![1.0]).unwrap();
        let form = FactoredForm::new(a, vec![0.0], s, TruncationOrder(4)).unwrap();
        let m = form.admissibility_margin();
        assert!(m > 0.44, "margin {m}");
        assert_close(m, 0.5 - admissibility_series((-3.0f64).exp()), 1e-12);
    }

    #[test]
    fn log_density_at_origin_zero_phases() {
        let s = 2.0f64;
        let q = (-s).exp();
        let k = 3u32;
        let a = RectMatrix::new(2, 3, vec![0.3, -0.2, 0.1, 0.0, 0.4, -0.1]).unwrap();
        let form = FactoredForm::new(a, vec![0.0; 3], s, TruncationOrder(k)).unwrap();
        let v = form.log_density(&[0.0, 0.0]).unwrap();
        // log G(0) = n · Σ_k 2 ln(1 + q^{2k−1}) and the gradient vanishes.
        let mut expected = 0.0;
        for kk in 1..=k as i32 {
            expected += 3.0 * 2.0 * (1.0 + q.powi(2 * kk - 1)).ln();
        }
        assert_close(v.log_g, expected, 1e-12);
        for g in v.gradient {
            assert_close(g, 0.0, 1e-12);
        }
    }

    #[test]
    fn log_density_rank_zero() {
        let s = 1.5f64;
        let q = (-s).exp();
        let b = vec![0.7, -0.3];
        let form =
            FactoredForm::new(RectMatrix::empty(2), b.clone(), s, TruncationOrder(2)).unwrap();
        let v = form.log_density(&[]).unwrap();
        let mut expected = 0.0;
        for kk in 1..=2i32 {
            for &beta in &b {
                let qo = q.powi(2 * kk - 1);
                expected += (1.0 + 2.0 * qo * beta.cos() + qo * qo).ln();
            }
        }
        assert_close(v.log_g, expected, 1e-12);
        assert!(v.gradient.is_empty());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let form = small_form(1000 + trial, 3, 2, 1.0 + (trial % 3) as f64, 4);
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = form.log_density(&t).unwrap();
            let h = 1e-5;
            for i in 0..2 {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (form.log_density(&tp).unwrap().log_g
                    - form.log_density(&tm).unwrap().log_g)
                    / (2.0 * h);
                let scale = v.gradient[i].abs().max(1.0);
                assert!(
                    (v.gradient[i] - fd).abs() <= 1e-6 * scale,
                    "trial {trial} coord {i}: analytic {} vs fd {fd}",
                    v.gradient[i]
                );
            }
        }
    }

    #[test]
    fn prefactor_log_examples() {
        // m = 0, n = 1, large s: prefactor ≈ 0.
        let f = FactoredForm::new(RectMatrix::empty(1), vec![0.0], 40.0, TruncationOrder(1))
            .unwrap();
        assert_close(f.prefactor_log(), 0.0, 1e-17);

        // m = 1, K = 1, q = 0.5, n = 1 → −½ ln(2π) + ln(3/4).
        let s = 2.0f64.ln();
        let a = RectMatrix::new(1, 1, vec![0.1]).unwrap();
        let f = FactoredForm::new(a, vec![0.0], s, TruncationOrder(1)).unwrap();
        let expected = -0.5 * TAU.ln() + 0.75f64.ln();
        assert_close(f.prefactor_log(), expected, 1e-12);

        // Doubling n doubles the product term at fixed m, K, q.
        let a1 = RectMatrix::new(1, 1, vec![0.1]).unwrap();
        let f1 = FactoredForm::new(a1, vec![0.0], s, TruncationOrder(2)).unwrap();
        let a2 = RectMatrix::new(1, 2, vec![0.1, 0.0]).unwrap();
        let f2 = FactoredForm::new(a2, vec![0.0; 2], s, TruncationOrder(2)).unwrap();
        let gauss_part = -0.5 * TAU.ln();
        assert_close(f2.prefactor_log() - gauss_part, 2.0 * (f1.prefactor_log() - gauss_part), 1e-12);
    }

    #[test]
    fn log_concavity_along_random_lines() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0usize;
        'outer: for trial in 0..100 {
            let form = small_form(5000 + trial, 3, 2, 1.0 + (trial % 2) as f64 * 2.0, 5);
            assert!(form.admissibility_margin() >= 0.0);
            for _ in 0..10 {
                let t0: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let mut d: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nrm = crate::linalg::norm_sq(&d).sqrt();
                if nrm < 1e-6 {
                    continue;
                }
                d.iter_mut().for_each(|x| *x /= nrm);
                let h = 1e-3;
                let at = |c: f64| {
                    let p: Vec<f64> = t0.iter().zip(&d).map(|(&a, &b)| a + c * b).collect();
                    form.log_density(&p).unwrap().log_g
                };
                let second = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
                assert!(second <= 1e-6, "second difference {second} > 0");
                checked += 1;
                if checked >= 1000 {
                    break 'outer;
                }
            }
        }
        assert!(checked >= 500);
    }

    #[test]
    fn curvature_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let q: f64 = rng.random_range(0.01..0.95);
            let alpha: f64 = rng.random_range(-3.0..3.0);
            let beta: f64 = rng.random_range(-3.0..3.0);
            let tau: f64 = rng.random_range(-3.0..3.0);
            let d2 = log_factor_second_derivative(q, alpha, beta, tau);
            let bound = 2.0 * alpha * alpha * q / ((1.0 - q) * (1.0 - q));
            assert!(d2 <= bound + 1e-9, "d2 {d2} exceeds bound {bound}");
            // Spot-check the analytic formula against finite differences.
            let h = 1e-4;
            let f = |t: f64| (1.0 + 2.0 * q * (alpha * t + beta).cos() + q * q).ln();
            let fd = (f(tau + h) - 2.0 * f(tau) + f(tau - h)) / (h * h);
            assert!((d2 - fd).abs() <= 1e-4 * (1.0 + d2.abs()), "analytic {d2} vs fd {fd}");
        }
    }
}
