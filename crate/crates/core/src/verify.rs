//! Runnable invariant suites behind the CLI `verify` subcommand: each check
//! re-derives a structural identity or bound at desk scale and reports the
//! measured quantity next to its gate.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::integrand::{log_factor_second_derivative, FactoredForm};
use crate::jacobi::{self, TruncationOrder};
use crate::lattice::LatticeBasis;
use crate::linalg::{self, RectMatrix, SymMatrix};
use crate::oracle::{self, OracleCaps, ThetaKind};
use crate::sampler;
use crate::theta::{self, ThetaInstance, ThetaOptions};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: String,
}

impl Check {
    fn new(name: &str, pass: bool, measured: String) -> Self {
        Check { name: name.to_string(), pass, measured }
    }
}

pub const SUITES: &[&str] =
    &["jacobi", "linalg", "integrand", "integrator", "theta", "lattice", "sampler", "oracle"];

/// Runs one named suite ("all" runs every suite in order).
pub fn run_suite(name: &str) -> crate::Result<Vec<Check>> {
    match name {
        "jacobi" => Ok(jacobi_suite()),
        "linalg" => Ok(linalg_suite()),
        "integrand" => Ok(integrand_suite()),
        "integrator" => Ok(integrator_suite()),
        "theta" => Ok(theta_suite()),
        "lattice" => Ok(lattice_suite()),
        "sampler" => Ok(sampler_suite()),
        "oracle" => Ok(oracle_suite()),
        "all" => {
            let mut checks = Vec::new();
            for suite in SUITES {
                checks.extend(run_suite(suite)?);
            }
            Ok(checks)
        }
        other => Err(crate::Error::InvalidParameter(format!(
            "unknown suite '{other}'; available: {}, all",
            SUITES.join(", ")
        ))),
    }
}

fn jacobi_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let qs = [0.1, 0.3, (-3.0f64).exp()];
    let thetas = [0.0, 1.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI];
    let mut worst = 0.0f64;
    for &q in &qs {
        for &th in &thetas {
            let lhs = jacobi::triple_product_lhs(q, th, TruncationOrder(40)).unwrap();
            let rhs = jacobi::triple_product_series(q, th).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    checks.push(Check::new(
        "jacobi.triple_product_identity",
        worst <= 1e-12,
        format!("max |product − series| = {worst:.3e} (gate 1e-12)"),
    ));

    let mut minimal = true;
    for &(n, eps, s) in &[(5usize, 0.1f64, 3.0f64), (100, 1e-6, 1.0), (1, 1.0, 10.0)] {
        let k = jacobi::truncation_order(n, eps, s).unwrap().get();
        let q = (-s).exp();
        let nf = n as f64;
        let ok_k = 5.0 * nf * q.powi(2 * k as i32 - 1) <= eps / 3.0
            && 4.0 * nf * q.powi(2 * k as i32) <= eps / 3.0;
        let tight = k == 1 || {
            let km = k as i32 - 1;
            !(5.0 * nf * q.powi(2 * km - 1) <= eps / 3.0
                && 4.0 * nf * q.powi(2 * km) <= eps / 3.0)
        };
        minimal &= ok_k && tight;
    }
    checks.push(Check::new(
        "jacobi.truncation_order_minimal",
        minimal,
        "both tail inequalities hold at K and fail at K−1".into(),
    ));

    let grid = [0.5, 1.0, 2.0, 3.0, 5.0];
    let decreasing = grid.windows(2).all(|w| jacobi::theta_1d(w[0]) > jacobi::theta_1d(w[1]));
    checks.push(Check::new(
        "jacobi.theta_1d_decreasing",
        decreasing,
        "θ₁ strictly decreasing on the grid".into(),
    ));
    checks
}

fn linalg_suite() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_recompose = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=8usize);
        let m = rng.random_range(0..=n);
        let entries: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let c = RectMatrix::new(m, n, entries).unwrap().gram_cols().scale(0.5);
        let a = linalg::factor_half_gram(&c, 1e-10).unwrap();
        let diff = a.gram_cols().scale(0.5).sub(&c).unwrap();
        let sb = linalg::spectral_bounds(&diff, 1e-12).unwrap();
        let cnorm = linalg::spectral_bounds(&c, 1e-12).unwrap().lambda_max.abs();
        let rel = sb.lambda_min.abs().max(sb.lambda_max.abs()) / (1.0 + cnorm);
        worst_recompose = worst_recompose.max(rel);
    }
    let mut checks = vec![Check::new(
        "linalg.factor_half_gram_recompose",
        worst_recompose <= 1e-10,
        format!("worst ‖½AᵀA − C‖/(1+‖C‖) = {worst_recompose:.3e} over 100 random PSD"),
    )];

    let a = RectMatrix::new(2, 4, vec![1.0, 0.2, -0.3, 0.5, 0.0, 1.1, 0.4, -0.2]).unwrap();
    let p = linalg::row_space_projection(&a).unwrap();
    let mut idem = 0.0f64;
    for i in 0..4 {
        let row: Vec<f64> = (0..4).map(|j| p.get(i, j)).collect();
        let prow = p.mul_vec(&row);
        for j in 0..4 {
            idem = idem.max((prow[j] - p.get(i, j)).abs());
        }
    }
    checks.push(Check::new(
        "linalg.projection_idempotent",
        idem <= 1e-10,
        format!("max |(P² − P)_ij| = {idem:.3e}"),
    ));
    checks
}

fn integrand_suite() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_second = f64::NEG_INFINITY;
    let mut lines = 0usize;
    'outer: for trial in 0..200u64 {
        let s = 1.0 + (trial % 3) as f64;
        let cap = 0.5 * s.exp() * (1.0 - (-s).exp()).powi(2) * (1.0 - (-2.0 * s).exp());
        let scale = (cap.min(4.0) / 24.0).sqrt();
        let entries: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let a = RectMatrix::new(2, 3, entries).unwrap();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let form = FactoredForm::new(a, b, s, TruncationOrder(5)).unwrap();
        if form.admissibility_margin() < 0.0 {
            continue;
        }
        for _ in 0..5 {
            let t0: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut dir: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nrm = linalg::norm_sq(&dir).sqrt().max(1e-9);
            dir.iter_mut().for_each(|x| *x /= nrm);
            let h = 1e-3;
            let at = |c: f64| {
                let p: Vec<f64> = t0.iter().zip(&dir).map(|(&x, &d)| x + c * d).collect();
                form.log_density(&p).unwrap().log_g
            };
            let second = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            worst_second = worst_second.max(second);
            lines += 1;
            if lines >= 1000 {
                break 'outer;
            }
        }
    }
    let mut checks = vec![Check::new(
        "integrand.log_concavity",
        worst_second <= 1e-6,
        format!("max second difference of ln G = {worst_second:.3e} over {lines} lines"),
    )];

    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let q: f64 = rng.random_range(0.01..0.95);
        let alpha: f64 = rng.random_range(-3.0..3.0);
        let beta: f64 = rng.random_range(-3.0..3.0);
        let tau: f64 = rng.random_range(-3.0..3.0);
        let d2 = log_factor_second_derivative(q, alpha, beta, tau);
        let bound = 2.0 * alpha * alpha * q / ((1.0 - q) * (1.0 - q));
        worst_gap = worst_gap.max(d2 - bound);
    }
    checks.push(Check::new(
        "integrand.curvature_bound",
        worst_gap <= 1e-9,
        format!("max (d²lnf − 2α²q/(1−q)²) = {worst_gap:.3e} over 10⁴ draws"),
    ));
    checks
}

fn integrator_suite() -> Vec<Check> {
    use crate::integrator::{estimate, Backend, IntegralRequest};
    let mut checks = Vec::new();
    let mut agree = true;
    let mut worst_sigma = 0.0f64;
    for seed in 0..20u64 {
        let amp = 0.3 + 0.025 * seed as f64;
        let log_h = move |t: &[f64]| (amp * (t[0] + 0.4 * t[1]).cos()).ln_1p();
        let req = |s| IntegralRequest {
            m: 2,
            log_h: &log_h,
            eps: 0.02,
            conf: 0.95,
            seed: s,
            max_evals: 2_000_000,
        };
        let d = estimate(&req(seed), Backend::Direct).unwrap();
        let w = estimate(&req(seed), Backend::Walk).unwrap();
        let sigma = ((d.value * d.rel_stderr).powi(2) + (w.value * w.rel_stderr).powi(2))
            .sqrt()
            .max(1e-12);
        let pulls = (d.value - w.value).abs() / sigma;
        worst_sigma = worst_sigma.max(pulls);
        agree &= pulls <= 3.0;
    }
    checks.push(Check::new(
        "integrator.cross_backend_agreement",
        agree,
        format!("max |direct − walk| = {worst_sigma:.2} combined σ over 20 instances (gate 3σ)"),
    ));

    let log_h = |t: &[f64]| -0.5 * t[0] * t[0];
    let req = IntegralRequest {
        m: 1,
        log_h: &log_h,
        eps: 0.005,
        conf: 0.95,
        seed: 5,
        max_evals: 4_000_000,
    };
    let est = estimate(&req, Backend::Direct).unwrap();
    let truth = 1.0 / 2.0f64.sqrt();
    let err = (est.value - truth).abs() / truth;
    checks.push(Check::new(
        "integrator.gaussian_closed_form",
        est.converged && err <= 0.02,
        format!("E[e^{{−t²/2}}] = {:.6} vs 1/√2 (rel err {err:.2e})", est.value),
    ));
    checks
}

fn theta_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    // Identity: Θ(sI) = θ₁(s)ⁿ through the MC pipeline.
    let mut worst = 0.0f64;
    let mut ok = true;
    for n in 1..=3usize {
        for s in [3.0, 4.0] {
            let b = SymMatrix::scaled_identity(n, s);
            let inst = ThetaInstance::new(b, None, None, 0.05, 31).unwrap();
            let opts = ThetaOptions { force_mc: true, ..Default::default() };
            let r = theta::theta_sum_with(&inst, &opts).unwrap();
            let exact = jacobi::theta_1d(s).powi(n as i32);
            let rel = (r.value - exact).abs() / exact;
            worst = worst.max(rel);
            ok &= rel <= 0.05 && r.converged;
        }
    }
    checks.push(Check::new(
        "theta.identity_vs_product",
        ok,
        format!("max rel deviation {worst:.3e} over s ∈ {{3,4}}, n ≤ 3 (gate eps = 0.05)"),
    ));

    // Reciprocity by pure summation for n = 2.
    let b = SymMatrix::new(2, vec![2.4, 0.3, 0.3, 2.9]).unwrap();
    let y = [0.35, -0.2];
    let caps = OracleCaps::default();
    let (direct, tail_d) =
        oracle::brute_theta(&b, ThetaKind::Shifted(&y), 2.0, 40, &caps).unwrap();
    let eig = linalg::sym_eigen(&b, 1e-12).unwrap();
    let n = 2;
    let mut raw = vec![0.0; 4];
    for r in 0..n {
        let coef = std::f64::consts::PI.powi(2) / eig.values[r];
        for i in 0..n {
            for j in 0..n {
                raw[i * n + j] += coef * eig.vectors[r][i] * eig.vectors[r][j];
            }
        }
    }
    let recip = SymMatrix::symmetrized(n, &raw).unwrap();
    let phase: Vec<f64> = y.iter().map(|&v| 2.0 * std::f64::consts::PI * v).collect();
    let (osc, tail_o) =
        oracle::brute_theta(&recip, ThetaKind::Oscillatory(&phase), 3.0, 40, &caps).unwrap();
    let ln_det: f64 = eig.values.iter().map(|&l| l.ln()).sum();
    let rhs = (0.5 * 2.0 * std::f64::consts::PI.ln() - 0.5 * ln_det).exp() * osc;
    let gap = (direct - rhs).abs() / direct.abs();
    checks.push(Check::new(
        "theta.reciprocity_pure_summation",
        gap <= 1e-10 + (tail_d + tail_o) / direct.abs(),
        format!("|lhs − rhs|/lhs = {gap:.3e} (tails {tail_d:.1e}, {tail_o:.1e})"),
    ));
    checks
}

fn lattice_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    // Two-sided ratio bound by direct summation, scalar instances.
    let mut ok = true;
    let mut worst_lo = f64::INFINITY;
    let mut worst_hi = f64::NEG_INFINITY;
    for _ in 0..100 {
        let tau: f64 = rng.random_range(0.05..=1.0);
        let y: f64 = rng.random_range(-0.5..0.5);
        let q = (-std::f64::consts::PI.powi(2) / tau).exp();
        let d = (y - y.round()).abs();
        let ratio = jacobi::theta_1d_shifted(tau, y) / jacobi::theta_1d(tau);
        let lo = (-41.0 * q * d * d).exp();
        let hi = (-13.0 * q * d * d).exp();
        ok &= ratio >= lo - 1e-14 && ratio <= hi + 1e-14;
        worst_lo = worst_lo.min(ratio - lo);
        worst_hi = worst_hi.max(ratio - hi);
    }
    checks.push(Check::new(
        "lattice.theta_ratio_two_sided",
        ok,
        format!("margins: above-lower {worst_lo:.3e}, below-upper {worst_hi:.3e}"),
    ));

    // Cosine sandwich on a fine grid.
    let mut sandwich = true;
    for i in 0..=10_000 {
        let eta = -0.5 + i as f64 * 1e-4;
        let v = 1.0 - (std::f64::consts::TAU * eta).cos();
        sandwich &= 7.0 * eta * eta <= v + 1e-12 && v <= 20.0 * eta * eta + 1e-12;
    }
    checks.push(Check::new(
        "lattice.cosine_sandwich",
        sandwich,
        "7η² ≤ 1 − cos(2πη) ≤ 20η² on the grid".into(),
    ));

    // Distance interval contains the exact distance on scaled lattices.
    let caps = OracleCaps::default();
    let mut contained = true;
    for trial in 0..10u64 {
        let lam = [1.0, if trial % 2 == 0 { 2.0 } else { 1.0 }, 1.0];
        let mut rows = vec![vec![0.0; 3]; 3];
        for i in 0..3 {
            rows[i][i] = 1.0 / lam[i];
        }
        let basis = LatticeBasis::new(rows).unwrap();
        let v: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
        let bounds =
            crate::lattice::distance_interval(&basis, &v, 1.0, 0.05, 100 + trial).unwrap();
        let y = basis.coords_of(&v).unwrap();
        let exact = oracle::brute_distance(basis.gram(), &y, &caps).unwrap();
        contained &= bounds.d_lo <= exact + 1e-9 && exact <= bounds.d_hi + 1e-9;
    }
    checks.push(Check::new(
        "lattice.distance_interval_contains_exact",
        contained,
        "interval ∋ brute distance on 10 scaled-coordinate lattices".into(),
    ));
    checks
}

fn sampler_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let basis = LatticeBasis::new(vec![vec![1.0]]).unwrap();
    let config = sampler::SamplerConfig::new(basis, vec![0.0], 0.05, 99).unwrap();
    let n_draws = 3000;
    let mut counts = std::collections::HashMap::<i64, usize>::new();
    for i in 0..n_draws {
        let draw = sampler::sample_indexed(&config, i as u64).unwrap();
        *counts.entry(draw.coords[0]).or_default() += 1;
    }
    let caps = OracleCaps::default();
    let exact =
        oracle::brute_gaussian_distribution(config.basis().gram(), &[0.0], 8, &caps).unwrap();
    let mut tv = 0.0;
    for (x, p) in &exact {
        let emp = counts.get(&x[0]).copied().unwrap_or(0) as f64 / n_draws as f64;
        tv += 0.5 * (emp - p).abs();
    }
    checks.push(Check::new(
        "sampler.scalar_total_variation",
        tv <= 0.05 + 0.035,
        format!("TV = {tv:.4} over {n_draws} draws (gate eps + noise)"),
    ));

    let l = sampler::window_radius(1, 1.0, 1.0, 0.1).unwrap();
    checks.push(Check::new(
        "sampler.window_radius_reference",
        l == 3,
        format!("l(n=1, λ=1, eps=0.1) = {l} (expected 3)"),
    ));
    checks
}

fn oracle_suite() -> Vec<Check> {
    let caps = OracleCaps::default();
    let mut checks = Vec::new();
    let mut counts_ok = true;
    for (n, k, expected) in [(2usize, 1u32, 5usize), (2, 2, 9), (3, 4, 33)] {
        let ball = oracle::enumerate_ball(n, k, &caps).unwrap();
        counts_ok &= ball.points.len() == expected
            && (ball.points.len() as f64) <= oracle::ball_count_bound(n, k);
    }
    checks.push(Check::new(
        "oracle.ball_counts",
        counts_ok,
        "counts 5/9/33 and (2n+2)^k bound".into(),
    ));

    let b = SymMatrix::scaled_identity(2, 3.0);
    let (value, tail) = oracle::brute_theta(&b, ThetaKind::Plain, 3.0, 9, &caps).unwrap();
    let exact = jacobi::theta_1d(3.0).powi(2);
    checks.push(Check::new(
        "oracle.brute_theta_product_form",
        (value - exact).abs() <= tail + 1e-12,
        format!("value {value:.8} vs θ₁(3)² = {exact:.8}, tail {tail:.2e}"),
    ));

    let g = SymMatrix::identity(2);
    let d = oracle::brute_distance(&g, &[0.5, 0.5], &caps).unwrap();
    checks.push(Check::new(
        "oracle.brute_distance_half_cell",
        (d - 0.5f64.sqrt()).abs() <= 1e-12,
        format!("dist = {d:.8} (expected √2/2)"),
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let checks = run_suite("all").unwrap();
        assert!(checks.len() >= 12);
        for c in &checks {
            assert!(c.pass, "verify check failed: {} — {}", c.name, c.measured);
        }
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(run_suite("nope").is_err());
    }
}
