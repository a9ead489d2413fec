//! Seeded Monte-Carlo estimation of `E[H(t)]` for `t ~ N(0, I_m)`, where
//! `ln H` is concave up to the Gaussian log-density.
//!
//! Two interchangeable backends sit behind one contract:
//!
//! * `Direct` — plain importance sampling with the standard Gaussian as
//!   proposal. Unbiased; efficient whenever the log-range of `H` is moderate,
//!   which is exactly the regime the theta pipeline produces.
//! * `Walk` — a random-walk Metropolis chain driven through a geometric
//!   temperature ladder, accumulating a ratio-of-normalizers telescope
//!   (annealed importance sampling). Step sizes are tuned to an acceptance
//!   rate in [0.3, 0.6] before any estimation samples are drawn.
//!
//! The evaluation budget is split into independent substreams whose RNG
//! streams derive from the master seed by a counter; results are merged by
//! pooled mean/variance in substream order, so an estimate is a pure function
//! of the request regardless of scheduling.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STREAMS: u64 = 8;
const ROUND_PER_STREAM: u64 = 128;
/// Ladder β = 1/128, 1/64, …, ½, 1 on top of the implicit β₀ = 0.
const LADDER: [f64; 8] = [
    1.0 / 128.0,
    1.0 / 64.0,
    1.0 / 32.0,
    1.0 / 16.0,
    1.0 / 8.0,
    1.0 / 4.0,
    1.0 / 2.0,
    1.0,
];
const MH_STEPS_PER_LEVEL: usize = 4;
const TUNE_BATCHES: usize = 20;
const TUNE_BATCH_LEN: usize = 25;
const TUNING_STREAM: u64 = 0x7475_6e65; // distinct from estimation streams

/// What the integrator is asked to do: estimate
/// `(2π)^{−m/2} ∫ e^{log_h(t)} e^{−‖t‖²/2} dt` to relative error `eps` at
/// confidence `conf`, spending at most `max_evals` evaluations of `log_h`.
pub struct IntegralRequest<'a> {
    pub m: usize,
    pub log_h: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub eps: f64,
    pub conf: f64,
    pub seed: u64,
    pub max_evals: u64,
}

impl<'a> IntegralRequest<'a> {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        if !(self.conf > 0.0 && self.conf < 1.0) {
            return Err(Error::InvalidParameter("conf must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// The uniform contract of every randomized operation: a value, the achieved
/// relative standard error, the evaluation count, the seed used, and whether
/// the error gate was met within budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub rel_stderr: f64,
    pub n_evals: u64,
    pub seed: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Direct,
    Walk,
}

/// Per-level tuning outcome of the walk backend.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WalkTuning {
    pub beta: f64,
    pub step: f64,
    pub acceptance: f64,
}

#[derive(Clone, Copy, Default)]
struct RunningStat {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStat {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: RunningStat) -> RunningStat {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * self.n as f64 * other.n as f64 / n as f64;
        RunningStat { n, mean, m2 }
    }

    fn rel_stderr(&self) -> f64 {
        if self.n < 2 || self.mean == 0.0 {
            return if self.n >= 1 { 0.0 } else { f64::INFINITY };
        }
        let var = self.m2 / (self.n - 1) as f64;
        (var / self.n as f64).sqrt() / self.mean.abs()
    }
}

/// Two-sided normal quantile for a confidence level in (0, 1).
pub fn normal_quantile_two_sided(conf: f64) -> f64 {
    inverse_normal_cdf(0.5 + conf / 2.0)
}

/// Acklam's rational approximation of the inverse normal CDF; absolute error
/// below 1.2e-9 over (0, 1), plenty for confidence gating.
fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

/// Standard normal draw by Box-Muller; consumes two uniforms.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gauss_vec(rng: &mut ChaCha8Rng, m: usize, out: &mut Vec<f64>) {
    out.clear();
    for _ in 0..m {
        out.push(gauss(rng));
    }
}

fn eval_log_h(req: &IntegralRequest, t: &[f64]) -> Result<f64> {
    let v = (req.log_h)(t);
    if !v.is_finite() {
        return Err(Error::Evaluation(format!("log_h returned {v} at t = {t:?}")));
    }
    Ok(v)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Estimates the Gaussian expectation with the requested backend.
pub fn estimate(req: &IntegralRequest, backend: Backend) -> Result<Estimate> {
    req.validate()?;
    if req.m == 0 {
        // Zero-dimensional integral: the value is exact.
        let v = eval_log_h(req, &[])?.exp();
        return Ok(Estimate {
            value: v,
            rel_stderr: 0.0,
            n_evals: 1,
            seed: req.seed,
            converged: true,
        });
    }
    match backend {
        Backend::Direct => direct_estimate(req),
        Backend::Walk => walk_estimate(req),
    }
}

/// Default entry: direct importance sampling, with the walk chain taking over
/// in high dimension or when the direct pass exhausts its budget unconverged.
pub fn integrate_gaussian_expectation(req: &IntegralRequest) -> Result<Estimate> {
    req.validate()?;
    if req.m > 25 {
        return estimate(req, Backend::Walk);
    }
    let direct = estimate(req, Backend::Direct)?;
    if direct.converged {
        return Ok(direct);
    }
    let walk = estimate(req, Backend::Walk)?;
    if walk.rel_stderr < direct.rel_stderr {
        Ok(walk)
    } else {
        Ok(direct)
    }
}

fn direct_estimate(req: &IntegralRequest) -> Result<Estimate> {
    let z = normal_quantile_two_sided(req.conf);
    let mut rngs: Vec<ChaCha8Rng> = (0..STREAMS).map(|i| stream_rng(req.seed, 1 + i)).collect();
    let mut stats = vec![RunningStat::default(); STREAMS as usize];
    let mut n_evals: u64 = 0;
    let mut t = Vec::with_capacity(req.m);

    let mut converged = false;
    loop {
        let per_stream = ROUND_PER_STREAM.min((req.max_evals - n_evals) / STREAMS);
        if per_stream == 0 {
            break;
        }
        for (rng, stat) in rngs.iter_mut().zip(stats.iter_mut()) {
            for _ in 0..per_stream {
                gauss_vec(rng, req.m, &mut t);
                let lh = eval_log_h(req, &t)?;
                let h = lh.exp();
                if !h.is_finite() {
                    return Err(Error::Evaluation(format!("integrand overflow at log_h = {lh}")));
                }
                stat.push(h);
            }
        }
        n_evals += STREAMS * per_stream;
        let pooled = stats.iter().fold(RunningStat::default(), |acc, s| acc.merge(*s));
        if z * pooled.rel_stderr() <= req.eps {
            converged = true;
            break;
        }
    }
    let pooled = stats.iter().fold(RunningStat::default(), |acc, s| acc.merge(*s));
    if pooled.n == 0 {
        return Err(Error::InvalidParameter(format!(
            "evaluation budget {} cannot fund one sample per substream",
            req.max_evals
        )));
    }
    Ok(Estimate {
        value: pooled.mean,
        rel_stderr: pooled.rel_stderr(),
        n_evals,
        seed: req.seed,
        converged,
    })
}

/// Tunes the per-level step sizes of the walk backend to an acceptance rate
/// in [0.3, 0.6]. Deterministic given the request seed.
pub fn tune_walk(req: &IntegralRequest) -> Result<(Vec<WalkTuning>, u64)> {
    let mut rng = stream_rng(req.seed, TUNING_STREAM);
    let mut tunings = Vec::with_capacity(LADDER.len());
    let mut evals: u64 = 0;
    let mut t = vec![0.0; req.m];
    gauss_vec(&mut rng, req.m, &mut t);
    let mut cur = eval_log_h(req, &t)?;
    evals += 1;
    let mut step = 1.0 / (req.m as f64).sqrt();
    let mut proposal = Vec::with_capacity(req.m);
    for &beta in &LADDER {
        let mut acceptance = 0.0;
        for _ in 0..TUNE_BATCHES {
            let mut accepted = 0usize;
            for _ in 0..TUNE_BATCH_LEN {
                proposal.clear();
                proposal.extend(t.iter().map(|&x| x + step * gauss(&mut rng)));
                let new = eval_log_h(req, &proposal)?;
                evals += 1;
                let ln_acc = beta * (new - cur)
                    - 0.5 * (crate::linalg::norm_sq(&proposal) - crate::linalg::norm_sq(&t));
                if (rng.random::<f64>().max(1e-300)).ln() < ln_acc {
                    t.copy_from_slice(&proposal);
                    cur = new;
                    accepted += 1;
                }
            }
            acceptance = accepted as f64 / TUNE_BATCH_LEN as f64;
            if acceptance > 0.6 {
                step *= 1.25;
            } else if acceptance < 0.3 {
                step *= 0.8;
            } else {
                break;
            }
        }
        tunings.push(WalkTuning { beta, step, acceptance });
    }
    Ok((tunings, evals))
}

fn walk_estimate(req: &IntegralRequest) -> Result<Estimate> {
    let z = normal_quantile_two_sided(req.conf);
    let (tunings, tuning_evals) = tune_walk(req)?;
    let evals_per_particle = 1 + (LADDER.len() * MH_STEPS_PER_LEVEL) as u64;
    // Smaller per-round particle count than direct: each particle is costly.
    let particles_per_round: u64 = 16;
    let round_cost = STREAMS * particles_per_round * evals_per_particle;

    let mut rngs: Vec<ChaCha8Rng> = (0..STREAMS).map(|i| stream_rng(req.seed, 1 + i)).collect();
    let mut stats = vec![RunningStat::default(); STREAMS as usize];
    let mut n_evals = tuning_evals;
    let mut t = Vec::with_capacity(req.m);
    let mut proposal = Vec::with_capacity(req.m);

    let mut converged = false;
    while n_evals + round_cost <= req.max_evals {
        for (rng, stat) in rngs.iter_mut().zip(stats.iter_mut()) {
            for _ in 0..particles_per_round {
                gauss_vec(rng, req.m, &mut t);
                let mut cur = eval_log_h(req, &t)?;
                let mut logw = 0.0;
                let mut beta_prev = 0.0;
                for level in 0..LADDER.len() {
                    let beta = LADDER[level];
                    logw += (beta - beta_prev) * cur;
                    beta_prev = beta;
                    let step = tunings[level].step;
                    for _ in 0..MH_STEPS_PER_LEVEL {
                        proposal.clear();
                        proposal.extend(t.iter().map(|&x| x + step * gauss(rng)));
                        let new = eval_log_h(req, &proposal)?;
                        let ln_acc = beta * (new - cur)
                            - 0.5
                                * (crate::linalg::norm_sq(&proposal)
                                    - crate::linalg::norm_sq(&t));
                        if (rng.random::<f64>().max(1e-300)).ln() < ln_acc {
                            std::mem::swap(&mut t, &mut proposal);
                            cur = new;
                        }
                    }
                }
                let w = logw.exp();
                if !w.is_finite() {
                    return Err(Error::Evaluation(format!("walk weight overflow, logw = {logw}")));
                }
                stat.push(w);
            }
        }
        n_evals += round_cost;
        let pooled = stats.iter().fold(RunningStat::default(), |acc, s| acc.merge(*s));
        if z * pooled.rel_stderr() <= req.eps {
            converged = true;
            break;
        }
    }
    let pooled = stats.iter().fold(RunningStat::default(), |acc, s| acc.merge(*s));
    if pooled.n == 0 {
        return Err(Error::InvalidParameter(format!(
            "evaluation budget {} below one walk round ({round_cost})",
            req.max_evals
        )));
    }
    Ok(Estimate {
        value: pooled.mean,
        rel_stderr: pooled.rel_stderr(),
        n_evals,
        seed: req.seed,
        converged,
    })
}
