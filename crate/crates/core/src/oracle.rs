//! Brute-force ground truth at desk scale: lattice points in balls, truncated
//! theta sums with certified tails, exact distances and exact discrete
//! Gaussian laws.
//!
//! Everything here is deterministic and capped; the caps are explicit
//! constants in [`OracleCaps`] so behaviour at desk scale stays predictable.
//! Lattice inputs are taken in coordinate space: a Gram matrix `G` plus basis
//! coordinates, so `‖Σ ξ_i u_i − v‖² = ⟨G(ξ−y), ξ−y⟩`.

use crate::error::{Error, Result};
use crate::jacobi;
use crate::linalg::SymMatrix;

/// Explicit resource caps for oracle operations.
#[derive(Debug, Clone, Copy)]
pub struct OracleCaps {
    /// Hard dimension cap for exact distance / exact law computations.
    pub max_dim: usize,
    /// Cap on materialized enumerations.
    pub max_points: u64,
    /// Cap on streamed (non-materialized) ball visits.
    pub max_stream_visits: u64,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { max_dim: 6, max_points: 10_000_000, max_stream_visits: 2_000_000_000 }
    }
}

/// All integer points with ‖x‖² ≤ k, sorted lexicographically.
#[derive(Debug, Clone)]
pub struct BallEnumeration {
    pub n: usize,
    pub k: u32,
    pub points: Vec<Vec<i64>>,
}

/// `(2n+2)^k`, the ball-count bound; evaluated in f64 to dodge overflow.
pub fn ball_count_bound(n: usize, k: u32) -> f64 {
    ((2 * n + 2) as f64).powi(k as i32)
}

/// Enumerates `{x ∈ Zⁿ : ‖x‖² ≤ k}` exactly, lexicographically sorted.
pub fn enumerate_ball(n: usize, k: u32, caps: &OracleCaps) -> Result<BallEnumeration> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let mut points = Vec::new();
    let mut current = vec![0i64; n];
    fn rec(
        coord: usize,
        rem: i64,
        current: &mut Vec<i64>,
        points: &mut Vec<Vec<i64>>,
        cap: u64,
    ) -> Result<()> {
        let n = current.len();
        if coord == n {
            if points.len() as u64 >= cap {
                return Err(Error::CapExceeded { what: "ball enumeration".into(), cap });
            }
            points.push(current.clone());
            return Ok(());
        }
        let r = (rem as f64).sqrt().floor() as i64;
        for v in -r..=r {
            current[coord] = v;
            rec(coord + 1, rem - v * v, current, points, cap)?;
        }
        current[coord] = 0;
        Ok(())
    }
    rec(0, k as i64, &mut current, &mut points, caps.max_points)?;

    let count = points.len() as f64;
    let bound = ball_count_bound(n, k.max(1));
    debug_assert!(count <= bound, "ball count {count} exceeds bound {bound}");
    if count > bound {
        return Err(Error::Internal(format!("ball count {count} exceeds (2n+2)^k = {bound}")));
    }
    Ok(BallEnumeration { n, k, points })
}

/// Streams every point of `{x ∈ Zⁿ : ‖x‖² ≤ k}` as a sparse support list,
/// without materializing it. Scales to large n as long as k stays small.
pub fn for_each_ball_point(
    n: usize,
    k: u32,
    caps: &OracleCaps,
    mut f: impl FnMut(&[(usize, i64)]),
) -> Result<u64> {
    let mut support: Vec<(usize, i64)> = Vec::new();
    let mut visits: u64 = 0;
    fn rec(
        n: usize,
        start: usize,
        rem: i64,
        support: &mut Vec<(usize, i64)>,
        visits: &mut u64,
        cap: u64,
        f: &mut impl FnMut(&[(usize, i64)]),
    ) -> Result<()> {
        *visits += 1;
        if *visits > cap {
            return Err(Error::CapExceeded { what: "streamed ball enumeration".into(), cap });
        }
        f(support);
        if rem < 1 {
            return Ok(());
        }
        let vmax = (rem as f64).sqrt().floor() as i64;
        for i in start..n {
            for v in 1..=vmax {
                for value in [v, -v] {
                    support.push((i, value));
                    rec(n, i + 1, rem - v * v, support, visits, cap, f)?;
                    support.pop();
                }
            }
        }
        Ok(())
    }
    rec(n, 0, k as i64, &mut support, &mut visits, caps.max_stream_visits, &mut f)?;
    Ok(visits)
}

/// Which theta sum the brute-force evaluator should produce.
pub enum ThetaKind<'a> {
    /// Σ e^{−⟨Bx,x⟩}
    Plain,
    /// Σ e^{−⟨Bx,x⟩} cos⟨b,x⟩
    Oscillatory(&'a [f64]),
    /// Σ e^{−⟨B(x−y),x−y⟩}
    Shifted(&'a [f64]),
}

/// Truncated theta sum with a certified tail bound; `(value, tail)` bracket
/// the true sum as `|Θ − value| ≤ tail`.
///
/// The tail is the best applicable of three certificates at the witness scale
/// `s_tail` (which must satisfy `s_tail·I ⪯ B`): the moment bound `e^{−k}`
/// valid for `30n e^{−s} ≤ k ≤ 4n/e`, the smooth-range bound
/// `60·n^{(1−γ)k}` valid for `γ = s/ln n > 1`, and the exponent-halving bound
/// `e^{−sk/2}·θ₁(s/2)ⁿ` valid always (each tail term donates `e^{−sk/2}` and
/// what remains is dominated by the full sum at half the exponent; the scalar
/// factor is maximal at integer shifts, so it also covers the shifted form).
pub fn brute_theta(
    b: &SymMatrix,
    kind: ThetaKind,
    s_tail: f64,
    k: u32,
    caps: &OracleCaps,
) -> Result<(f64, f64)> {
    let n = b.n();
    if !(s_tail > 0.0) {
        return Err(Error::InvalidParameter("s_tail must be positive".into()));
    }
    let bounds = crate::linalg::spectral_bounds(b, 1e-11)?;
    if bounds.lambda_min < s_tail - 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "s_tail = {s_tail} does not satisfy s·I ⪯ B (λ_min = {})",
            bounds.lambda_min
        )));
    }

    let shifted = matches!(kind, ThetaKind::Shifted(_));
    let tail = tail_bound(n, s_tail, k, shifted)?;

    let value = match kind {
        ThetaKind::Plain => {
            let mut acc = 0.0;
            for_each_ball_point(n, k, caps, |support| {
                acc += (-b.quad_form_sparse_int(support)).exp();
            })?;
            acc
        }
        ThetaKind::Oscillatory(phase) => {
            if phase.len() != n {
                return Err(Error::DimensionMismatch("phase vector length".into()));
            }
            let mut acc = 0.0;
            for_each_ball_point(n, k, caps, |support| {
                let mut dot = 0.0;
                for &(i, v) in support {
                    dot += phase[i] * v as f64;
                }
                acc += (-b.quad_form_sparse_int(support)).exp() * dot.cos();
            })?;
            acc
        }
        ThetaKind::Shifted(y) => {
            if y.len() != n {
                return Err(Error::DimensionMismatch("shift vector length".into()));
            }
            let mut acc = 0.0;
            for_each_shifted_box_point(y, k as f64, caps, |x| {
                let d: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| xi as f64 - yi).collect();
                acc += (-b.quad_form(&d)).exp();
            })?;
            acc
        }
    };
    Ok((value, tail))
}

fn tail_bound(n: usize, s: f64, k: u32, shifted: bool) -> Result<f64> {
    let nf = n as f64;
    let kf = k as f64;
    let mut best = f64::INFINITY;
    if !shifted {
        // Moment bound, valid for 30n e^{−s} ≤ k ≤ 4n/e.
        if kf >= 30.0 * nf * (-s).exp() && kf <= 4.0 * nf / std::f64::consts::E {
            best = best.min((-kf).exp());
        }
        // Smooth-range bound with γ = s / ln n.
        if n >= 2 {
            let gamma = s / nf.ln();
            if gamma > 1.0 {
                best = best.min(60.0 * nf.powf((1.0 - gamma) * kf));
            }
        }
    }
    // Exponent-halving bound, always valid (also for the shifted sum).
    let generic = (-s * kf / 2.0).exp() * jacobi::theta_1d(s / 2.0).powi(n as i32);
    best = best.min(generic);
    if !best.is_finite() {
        return Err(Error::TailRegime(format!(
            "no finite tail bound for n = {n}, s = {s}, k = {k}"
        )));
    }
    Ok(best)
}

/// Enumerates `x ∈ Zⁿ` with `‖x − y‖² ≤ r_sq`, visiting each point once.
fn for_each_shifted_box_point(
    y: &[f64],
    r_sq: f64,
    caps: &OracleCaps,
    mut f: impl FnMut(&[i64]),
) -> Result<u64> {
    let n = y.len();
    let mut x = vec![0i64; n];
    let mut visits = 0u64;
    fn rec(
        y: &[f64],
        coord: usize,
        rem: f64,
        x: &mut Vec<i64>,
        visits: &mut u64,
        cap: u64,
        f: &mut impl FnMut(&[i64]),
    ) -> Result<()> {
        if coord == y.len() {
            *visits += 1;
            if *visits > cap {
                return Err(Error::CapExceeded { what: "shifted ball enumeration".into(), cap });
            }
            f(x);
            return Ok(());
        }
        if rem < 0.0 {
            return Ok(());
        }
        let r = rem.sqrt();
        let lo = (y[coord] - r).ceil() as i64;
        let hi = (y[coord] + r).floor() as i64;
        for v in lo..=hi {
            let d = v as f64 - y[coord];
            x[coord] = v;
            rec(y, coord + 1, rem - d * d, x, visits, cap, f)?;
        }
        x[coord] = 0;
        Ok(())
    }
    rec(y, 0, r_sq, &mut x, &mut visits, caps.max_points, &mut f)?;
    Ok(visits)
}

/// Exact `dist(v, Λ)` in coordinate space: `min_{ξ∈Zⁿ} ⟨G(ξ−y), ξ−y⟩`^{1/2}
/// over a certified-complete search box.
pub fn brute_distance(gram: &SymMatrix, y: &[f64], caps: &OracleCaps) -> Result<f64> {
    let n = gram.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch("coordinate vector length".into()));
    }
    if n > caps.max_dim {
        return Err(Error::CapExceeded {
            what: format!("brute distance in dimension {n}"),
            cap: caps.max_dim as u64,
        });
    }
    let bounds = crate::linalg::spectral_bounds(gram, 1e-11)?;
    if bounds.lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: bounds.lambda_min });
    }
    // Initial feasible point: rounded coordinates.
    let rounded: Vec<f64> = y.iter().map(|v| v.round()).collect();
    let diff: Vec<f64> = rounded.iter().zip(y).map(|(&r, &v)| r - v).collect();
    let r0_sq = gram.quad_form(&diff);
    // Any better lattice point satisfies |ξ_i − y_i| ≤ sqrt(r0²/λ_min).
    let radius = (r0_sq / bounds.lambda_min).sqrt() + 1e-9;

    let mut count: u64 = 1;
    for yi in y {
        let width = ((yi + radius).floor() - (yi - radius).ceil()) as u64 + 1;
        count = count.saturating_mul(width);
        if count > caps.max_points {
            return Err(Error::CapExceeded {
                what: "brute distance search box".into(),
                cap: caps.max_points,
            });
        }
    }

    let mut best = r0_sq;
    let mut xi = vec![0i64; n];
    fn rec(
        gram: &SymMatrix,
        y: &[f64],
        radius: f64,
        coord: usize,
        xi: &mut Vec<i64>,
        best: &mut f64,
    ) {
        if coord == y.len() {
            let d: Vec<f64> = xi.iter().zip(y).map(|(&a, &b)| a as f64 - b).collect();
            let v = gram.quad_form(&d);
            if v < *best {
                *best = v;
            }
            return;
        }
        let lo = (y[coord] - radius).ceil() as i64;
        let hi = (y[coord] + radius).floor() as i64;
        for v in lo..=hi {
            xi[coord] = v;
            rec(gram, y, radius, coord + 1, xi, best);
        }
    }
    rec(gram, y, radius, 0, &mut xi, &mut best);
    Ok(best.max(0.0).sqrt())
}

/// Exact discrete Gaussian law (up to window truncation) on the coordinate
/// box `∏ [⌊η_i⌋ − l, ⌈η_i⌉ + l]`, normalized. Probability mass is returned
/// per coordinate vector.
pub fn brute_gaussian_distribution(
    gram: &SymMatrix,
    y: &[f64],
    l: u32,
    caps: &OracleCaps,
) -> Result<Vec<(Vec<i64>, f64)>> {
    let n = gram.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch("coordinate vector length".into()));
    }
    if n > caps.max_dim.min(4) {
        return Err(Error::CapExceeded {
            what: format!("exact Gaussian law in dimension {n}"),
            cap: caps.max_dim.min(4) as u64,
        });
    }
    let ranges: Vec<(i64, i64)> = y
        .iter()
        .map(|&eta| (eta.floor() as i64 - l as i64, eta.ceil() as i64 + l as i64))
        .collect();
    let mut total_points: u64 = 1;
    for &(lo, hi) in &ranges {
        total_points = total_points.saturating_mul((hi - lo + 1) as u64);
    }
    if total_points > caps.max_points {
        return Err(Error::CapExceeded { what: "exact Gaussian law box".into(), cap: caps.max_points });
    }

    let mut table: Vec<(Vec<i64>, f64)> = Vec::with_capacity(total_points as usize);
    let mut xi = vec![0i64; n];
    fn rec(
        gram: &SymMatrix,
        y: &[f64],
        ranges: &[(i64, i64)],
        coord: usize,
        xi: &mut Vec<i64>,
        table: &mut Vec<(Vec<i64>, f64)>,
    ) {
        if coord == y.len() {
            let d: Vec<f64> = xi.iter().zip(y).map(|(&a, &b)| a as f64 - b).collect();
            table.push((xi.clone(), (-gram.quad_form(&d)).exp()));
            return;
        }
        for v in ranges[coord].0..=ranges[coord].1 {
            xi[coord] = v;
            rec(gram, y, ranges, coord + 1, xi, table);
        }
    }
    rec(gram, y, &ranges, 0, &mut xi, &mut table);
    let z: f64 = table.iter().map(|(_, w)| w).sum();
    for entry in &mut table {
        entry.1 /= z;
    }
    Ok(table)
}

impl SymMatrix {
    /// ⟨Bx, x⟩ for sparse integer x.
    pub fn quad_form_sparse_int(&self, support: &[(usize, i64)]) -> f64 {
        let mut acc = 0.0;
        for &(i, vi) in support {
            let vi = vi as f64;
            acc += self.get(i, i) * vi * vi;
            for &(j, vj) in support {
                if j > i {
                    acc += 2.0 * self.get(i, j) * vi * vj as f64;
                }
            }
        }
        acc
    }
}
