//! Lattice applications of the theta machinery: detecting short integer
//! vectors in the kernel of an integer matrix, and certified distance
//! intervals to lattices containing `Zⁿ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jacobi;
use crate::linalg::{self, RectMatrix, SpectralBounds, SymMatrix};
use crate::theta::{self, ThetaInstance, ThetaOptions, ThetaResult};

/// An ordered lattice basis `u₁…u_n` with its cached Gram matrix, lattice
/// determinant `√det(gram)` and spectral bounds.
#[derive(Debug, Clone)]
pub struct LatticeBasis {
    vectors: Vec<Vec<f64>>,
    gram: SymMatrix,
    det_lattice: f64,
    bounds: SpectralBounds,
}

impl LatticeBasis {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.len();
        if n == 0 {
            return Err(Error::InvalidParameter("basis must contain at least one vector".into()));
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch(
                "basis vectors must all have length n (full-rank lattice)".into(),
            ));
        }
        let mut gram = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                gram.set_sym(i, j, linalg::dot(&vectors[i], &vectors[j]));
            }
        }
        let eig = linalg::sym_eigen(&gram, 1e-12)?;
        let lambda_min = eig.values[0];
        if lambda_min <= 0.0 {
            return Err(Error::RankDeficient(format!(
                "basis vectors are linearly dependent (Gram λ_min = {lambda_min:.3e})"
            )));
        }
        let ln_det_gram: f64 = eig.values.iter().map(|&l| l.ln()).sum();
        Ok(LatticeBasis {
            vectors,
            gram,
            det_lattice: (0.5 * ln_det_gram).exp(),
            bounds: SpectralBounds { lambda_min, lambda_max: eig.values[n - 1] },
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn det_lattice(&self) -> f64 {
        self.det_lattice
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    /// Coordinates `y` of a point `v` in this basis: `Σ y_i u_i = v`,
    /// obtained from the Gram system `G y = (⟨u_j, v⟩)_j`.
    pub fn coords_of(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch("point dimension".into()));
        }
        let rhs: Vec<f64> = self.vectors.iter().map(|u| linalg::dot(u, v)).collect();
        linalg::solve_spd(&self.gram, &rhs)
    }

    /// The point `Σ ξ_i u_i` for integer coordinates.
    pub fn point_at(&self, xi: &[i64]) -> Vec<f64> {
        let n = self.n();
        let mut p = vec![0.0; n];
        for (i, &c) in xi.iter().enumerate() {
            for j in 0..n {
                p[j] += c as f64 * self.vectors[i][j];
            }
        }
        p
    }

    /// Checks `Zⁿ ⊆ Λ`: every standard basis vector must have integer
    /// coordinates in this basis, within 1e−9 before rounding.
    pub fn contains_integer_lattice(&self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            let coords = self.coords_of(&e)?;
            for (j, &c) in coords.iter().enumerate() {
                if (c - c.round()).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "Zⁿ ⊄ Λ: e_{i} has non-integer coordinate {c} at position {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Integer matrix of full row rank defining the subspace `L = ker A` and the
/// lattice `Λ = Zⁿ ∩ L`, plus the scale parameters of the associated form
/// `B_{s,t} = sI + t·P_{rowspace}`.
#[derive(Debug, Clone)]
pub struct SubspaceInstance {
    a_int: Vec<Vec<i64>>,
    a_float: RectMatrix,
    s: f64,
    t: f64,
    /// Certified upper bound on ‖A‖_op, clamped to ≥ 1.
    gamma_norm: f64,
}

impl SubspaceInstance {
    pub fn new(a_int: Vec<Vec<i64>>, s: f64, t: f64) -> Result<Self> {
        let m = a_int.len();
        if m == 0 {
            return Err(Error::InvalidParameter("A must have at least one row".into()));
        }
        let n = a_int[0].len();
        if a_int.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch("ragged integer matrix".into()));
        }
        if m >= n {
            return Err(Error::InvalidParameter(format!(
                "need rank m < n for a nontrivial kernel, got m = {m}, n = {n}"
            )));
        }
        if !(s > 0.0 && t > 0.0) {
            return Err(Error::InvalidParameter("s and t must be positive".into()));
        }
        let entries: Vec<f64> =
            a_int.iter().flat_map(|row| row.iter().map(|&v| v as f64)).collect();
        let a_float = RectMatrix::new(m, n, entries)?;
        // Full row rank check via the row Gram.
        let gram = a_float.gram_rows();
        let eig_bounds = linalg::spectral_bounds(&gram, 1e-12)?;
        if eig_bounds.lambda_min <= 1e-9 * (1.0 + eig_bounds.lambda_max.abs()) {
            return Err(Error::RankDeficient(format!(
                "integer matrix does not have full row rank (AAᵀ λ_min = {:.3e})",
                eig_bounds.lambda_min
            )));
        }
        let op = linalg::operator_norm(&a_float, 1e-11)?;
        Ok(SubspaceInstance { a_int, a_float, s, t, gamma_norm: op.max(1.0) })
    }

    pub fn rows(&self) -> usize {
        self.a_int.len()
    }

    pub fn cols(&self) -> usize {
        self.a_int[0].len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.a_int
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn gamma_norm(&self) -> f64 {
        self.gamma_norm
    }

    /// `B_{s,t} = sI + t·P` with `P` the orthogonal projection onto the row
    /// space of `A`; eigenvalue `s` on `ker A`, `s + t` on `(ker A)^⊥`.
    pub fn form(&self) -> Result<SymMatrix> {
        let p = linalg::row_space_projection(&self.a_float)?;
        p.scale(self.t).add(&SymMatrix::scaled_identity(self.cols(), self.s))
    }
}

/// Estimates `Θ(B_{s,t})` and returns it with the certified additive error
/// `exp(−t/γ² + 2n e^{−s}/(1−e^{−s}))` bounding `|Θ(B_{s,t}) − Θ_Λ(s)|`.
pub fn subspace_theta(
    inst: &SubspaceInstance,
    eps: f64,
    seed: u64,
) -> Result<(ThetaResult, f64)> {
    subspace_theta_with(inst, eps, seed, &ThetaOptions::default())
}

pub fn subspace_theta_with(
    inst: &SubspaceInstance,
    eps: f64,
    seed: u64,
    opts: &ThetaOptions,
) -> Result<(ThetaResult, f64)> {
    if inst.s < 3.0 - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "subspace theta needs s ≥ 3, got {}",
            inst.s
        )));
    }
    let t_cap = inst.s.exp() / 5.0;
    if inst.t > t_cap * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "t = {} exceeds e^s/5 = {t_cap}; B_{{s,t}} leaves the window",
            inst.t
        )));
    }
    let b = inst.form()?;
    let theta_inst = ThetaInstance::new(b, None, None, eps, seed)?;
    let result = theta::theta_sum_with(&theta_inst, opts)?;
    Ok((result, subspace_additive_bound(inst)))
}

/// `exp(−t/γ² + 2n e^{−s}/(1−e^{−s}))`.
pub fn subspace_additive_bound(inst: &SubspaceInstance) -> f64 {
    let n = inst.cols() as f64;
    let es = (-inst.s).exp();
    (-inst.t / (inst.gamma_norm * inst.gamma_norm) + 2.0 * n * es / (1.0 - es)).exp()
}

/// `1/‖A‖_op`: a valid lower bound on `dist(x, ker A)` for every integer
/// point outside the kernel.
pub fn dist_lower_bound_subspace(a_int: &[Vec<i64>]) -> Result<f64> {
    let m = a_int.len();
    if m == 0 {
        return Err(Error::InvalidParameter("A must have at least one row".into()));
    }
    let n = a_int[0].len();
    let entries: Vec<f64> = a_int.iter().flat_map(|r| r.iter().map(|&v| v as f64)).collect();
    let a = RectMatrix::new(m, n, entries)?;
    let op = linalg::operator_norm(&a, 1e-11)?;
    if op == 0.0 {
        return Err(Error::InvalidParameter("A is the zero matrix".into()));
    }
    Ok(1.0 / op)
}

/// Certified tail bound `Σ_{‖x‖² ≥ k} e^{−s‖x‖²} ≤ e^{−k}`, gated on the
/// moment-bound premise `30n e^{−s} ≤ k ≤ 4n/e`.
pub fn theta_tail_bound(n: usize, s: f64, k: u32) -> Result<f64> {
    let nf = n as f64;
    let kf = k as f64;
    let lo = 30.0 * nf * (-s).exp();
    let hi = 4.0 * nf / std::f64::consts::E;
    if kf < lo || kf > hi {
        return Err(Error::TailRegime(format!(
            "k = {k} outside the valid range [{lo:.4}, {hi:.4}] for n = {n}, s = {s}"
        )));
    }
    Ok((-kf).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShortVectorDecision {
    NoShort,
    ManyShort,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShortVectorReport {
    pub decision: ShortVectorDecision,
    pub theta: ThetaResult,
    pub k: u32,
    /// Additive bound on |Θ(B_{s,t}) − Θ_Λ(s)|.
    pub bound: f64,
    /// Total error radius around the reported theta value.
    pub err_total: f64,
    pub s: f64,
    pub t: f64,
}

/// The decision gate, factored out so thresholds are testable in isolation:
/// `MANY_SHORT` when the lower confidence bound clears 2 (certifying a unit
/// of mass off the origin), `NO_SHORT` when the value sits within the
/// combined error of the short-vector-free ceiling `1 + e^{−k}`.
pub fn decide_short(theta_value: f64, err_total: f64, k: u32) -> ShortVectorDecision {
    if theta_value - err_total >= 2.0 {
        ShortVectorDecision::ManyShort
    } else if theta_value <= 1.0 + (-(k as f64)).exp() + err_total {
        ShortVectorDecision::NoShort
    } else {
        ShortVectorDecision::Inconclusive
    }
}

/// Tests for short integer vectors in `ker A` at scale `s = (½+δ) ln n`,
/// `t = e^s/5`, with the threshold radius `k = ⌈30 n e^{−s}⌉`.
pub fn short_vector_test(
    a_int: Vec<Vec<i64>>,
    delta: f64,
    eps: f64,
    seed: u64,
) -> Result<ShortVectorReport> {
    short_vector_test_with(a_int, delta, eps, seed, &ThetaOptions::default())
}

pub fn short_vector_test_with(
    a_int: Vec<Vec<i64>>,
    delta: f64,
    eps: f64,
    seed: u64,
    opts: &ThetaOptions,
) -> Result<ShortVectorReport> {
    if a_int.is_empty() {
        return Err(Error::InvalidParameter("A must have at least one row".into()));
    }
    let n = a_int[0].len();
    let s = (0.5 + delta) * (n as f64).ln();
    let t = s.exp() / 5.0;
    let k = (30.0 * n as f64 * (-s).exp()).ceil() as u32;
    // Gate the moment-bound premise before any heavy work.
    theta_tail_bound(n, s, k)?;
    let inst = SubspaceInstance::new(a_int, s, t)?;
    let (theta_est, bound) = subspace_theta_with(&inst, eps, seed, opts)?;
    let err_total = theta_est.claimed_rel_error(eps, opts.conf) * theta_est.value.abs() + bound;
    let decision = decide_short(theta_est.value, err_total, k);
    Ok(ShortVectorReport { decision, theta: theta_est, k, bound, err_total, s, t })
}

/// Certified interval for `dist(v, Λ)` from the two-sided theta-ratio bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceBounds {
    pub d_lo: f64,
    pub d_hi: f64,
    /// Measured `ln(Θ(τI)/Θ_Λ(τ, v))`.
    pub log_ratio: f64,
    pub tau: f64,
}

/// Distance interval for a lattice containing `Zⁿ`:
/// `R = ln(Θ(τI)/Θ_Λ(τ,v))` is bracketed by `41·e^{−π²/τ}·dist²` from above
/// and `13·e^{−π²/τ}·dist² + ln det Λ` from below, so
/// `d_lo = √(R⁻/(41 q))` and `d_hi = √((R⁺ − ln det Λ)/(13 q))` with the
/// measured `R` widened by the theta estimate's claimed error.
///
/// `Θ(τI)` is the exact scalar product `θ₁(τ)ⁿ`; only `Θ_Λ` is estimated.
pub fn distance_interval(
    basis: &LatticeBasis,
    v: &[f64],
    tau: f64,
    eps: f64,
    seed: u64,
) -> Result<DistanceBounds> {
    distance_interval_with(basis, v, tau, eps, seed, &ThetaOptions::default())
}

pub fn distance_interval_with(
    basis: &LatticeBasis,
    v: &[f64],
    tau: f64,
    eps: f64,
    seed: u64,
    opts: &ThetaOptions,
) -> Result<DistanceBounds> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {tau}")));
    }
    basis.contains_integer_lattice()?;
    let n = basis.n();
    let y = basis.coords_of(v)?;

    let ln_theta_zn = n as f64 * jacobi::theta_1d(tau).ln();
    let form = basis.gram().scale(tau);
    let inst = ThetaInstance::new(form, None, Some(y), eps, seed)?;
    let lat = theta::theta_shifted_with(&inst, opts)?;
    if lat.value <= 0.0 {
        return Err(Error::Internal(format!("nonpositive lattice theta {}", lat.value)));
    }
    let r = ln_theta_zn - lat.value.ln();

    let eps_tot = lat.claimed_rel_error(eps, opts.conf);
    let delta_r = if eps_tot < 1.0 { -(1.0 - eps_tot).ln() } else { f64::INFINITY };
    let q_tau = (-std::f64::consts::PI.powi(2) / tau).exp();
    let ln_det = basis.det_lattice().ln();

    let d_lo = ((r - delta_r).max(0.0) / (41.0 * q_tau)).sqrt();
    let d_hi = (((r + delta_r) - ln_det).max(0.0) / (13.0 * q_tau)).sqrt();
    Ok(DistanceBounds { d_lo, d_hi, log_ratio: r, tau })
}

/// `exp(dist²(v, Λ))`: the certified upper bound on `Θ_Λ(0)/Θ_Λ(v)`, with the
/// distance taken from the exact small-dimension search.
pub fn banaszczyk_ratio_bound(
    basis: &LatticeBasis,
    v: &[f64],
    caps: &crate::oracle::OracleCaps,
) -> Result<f64> {
    let y = basis.coords_of(v)?;
    let d = crate::oracle::brute_distance(basis.gram(), &y, caps)?;
    Ok((d * d).exp())
}
