//! Coupling construction for the joint chain and its numerical certificates.
//!
//! Two copies of the joint process are driven on one probability space:
//!
//! 1. both queue components are dominated by an autonomous M/M/1 queue
//!    `N_bar` with rates `(lambda_bar, mu_bar)`, realized by thinning shared
//!    arrival/service streams, so both copies empty no later than `N_bar`;
//! 2. once `N_bar` hits 0, two competing clocks start: an `Exp(lambda_bar)`
//!    arrival clock `eta_k` and the environment coupling clock `zeta_k` of
//!    the level-0 environment pair;
//! 3. `zeta_k < eta_k` couples the copies; otherwise the attempt failed and
//!    the procedure repeats after `N_bar` next empties.
//!
//! The number of attempts is dominated by a geometric law with success
//! probability `p = gamma/(lambda_bar+gamma) alpha^(-lambda_bar/gamma)`, and
//! every moment bound used along the way is checkable by Monte Carlo.
//!
//! Environment pairs couple through shared uniformization rings: with total
//! ring rate `Lambda`, each ring draws the pair from a maximal coupling of
//! the lazified kernels `nu_bar(x, .) = nu(x, .)/Lambda + (1 - out(x)/Lambda) delta_x`,
//! which succeeds with probability `1 - TV(nu_bar(x,.), nu_bar(y,.)) >= 1 - q`.

use crate::cert::RateCertificate;
use crate::discrete::{build_generator, invariant_measure_discrete, transient_law};
use crate::env::DiscreteEnvSpec;
use crate::error::{Error, Result};
use crate::fit::dkw_epsilon;
use crate::rates::RateField;
use crate::seed::replica_rng;
use crate::stationary::tv_distance;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

// ---------------------------------------------------------------------------
// Jump-chain maximal coupling
// ---------------------------------------------------------------------------

/// Uniformized environment kernels with their overlap constant.
#[derive(Debug, Clone)]
pub struct JumpCouplingSpec {
    pub m: usize,
    /// Shared ring rate `Lambda`.
    pub uniformization_rate: f64,
    /// Lazified one-ring kernels `nu_bar(x, .)`, one row per state.
    pub kernels: Vec<Vec<f64>>,
    /// `q = max_{x,y} TV(nu_bar(x,.), nu_bar(y,.))`, must be < 1.
    pub q: f64,
}

impl JumpCouplingSpec {
    /// Build from the level-0 environment rates with
    /// `Lambda = lazy_factor * max outflow`. Factors above 1 add laziness,
    /// which is what makes deterministic-swap kernels overlap.
    pub fn from_level0(env: &DiscreteEnvSpec, lazy_factor: f64) -> Result<Self> {
        if !(lazy_factor >= 1.0) {
            return Err(Error::Precondition("lazy factor must be >= 1".into()));
        }
        let m = env.m();
        let max_out = (0..m).map(|i| env.tau_outflow(0, i)).fold(0.0f64, f64::max);
        if max_out <= 0.0 {
            return Err(Error::CouplingRejected(
                "level-0 environment has no transitions; kernels are mutually singular".into(),
            ));
        }
        let rate = lazy_factor * max_out;
        let mut kernels = Vec::with_capacity(m);
        for i in 0..m {
            let mut row = vec![0.0f64; m];
            for (j, slot) in row.iter_mut().enumerate() {
                if j != i {
                    *slot = env.tau_rate(0, i, j) / rate;
                }
            }
            let off: f64 = row.iter().sum();
            row[i] = 1.0 - off;
            kernels.push(row);
        }
        let mut q = 0.0f64;
        for x in 0..m {
            for y in (x + 1)..m {
                q = q.max(tv_distance(&kernels[x], &kernels[y])?);
            }
        }
        if q >= 1.0 {
            return Err(Error::CouplingRejected(format!(
                "kernel overlap constant q = {q}; at least two lazified kernels are mutually \
                 singular, no uniform coupling rate exists at this laziness"
            )));
        }
        Ok(Self {
            m,
            uniformization_rate: rate,
            kernels,
            q,
        })
    }

    /// Certified tail rate `(1 - q) Lambda`:
    /// `P(tau >= t) <= exp(-(1-q) Lambda t)`.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.q) * self.uniformization_rate
    }
}

/// Draw `(x', y')` from a maximal coupling of two discrete distributions:
/// equal with probability exactly `1 - TV(p, q)`.
fn maximal_pair<R: Rng>(p: &[f64], q: &[f64], rng: &mut R) -> (usize, usize) {
    let overlap: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
    let s: f64 = overlap.iter().sum();
    let u: f64 = rng.gen();
    if u < s {
        let x = sample_categorical(&overlap, rng.gen::<f64>() * s);
        (x, x)
    } else {
        let px: Vec<f64> = p.iter().zip(&overlap).map(|(a, o)| a - o).collect();
        let qy: Vec<f64> = q.iter().zip(&overlap).map(|(a, o)| a - o).collect();
        let tx: f64 = px.iter().sum();
        let ty: f64 = qy.iter().sum();
        (
            sample_categorical(&px, rng.gen::<f64>() * tx),
            sample_categorical(&qy, rng.gen::<f64>() * ty),
        )
    }
}

fn sample_categorical(weights: &[f64], mut u: f64) -> usize {
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// One coupling run of the environment pair through shared rings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpCouplingSample {
    pub tau: f64,
    pub rings: u32,
    /// The first ring already produced equal states.
    pub first_ring_equal: bool,
}

/// Simulate the shared-ring maximal coupling of two level-0 environment
/// copies started from state indices `x` and `y`.
pub fn maximal_coupling_jump(
    spec: &JumpCouplingSpec,
    x: usize,
    y: usize,
    seed: u64,
) -> Result<JumpCouplingSample> {
    if x >= spec.m || y >= spec.m {
        return Err(Error::Precondition("state index out of range".into()));
    }
    let mut rng = replica_rng(seed, 0);
    let mut a = x;
    let mut b = y;
    let mut t = 0.0f64;
    let mut rings = 0u32;
    let mut first_ring_equal = false;
    while a != b {
        t += exp_draw(&mut rng, spec.uniformization_rate);
        let (na, nb) = maximal_pair(&spec.kernels[a], &spec.kernels[b], &mut rng);
        a = na;
        b = nb;
        rings += 1;
        if rings == 1 && a == b {
            first_ring_equal = true;
        }
        if rings > 100_000_000 {
            return Err(Error::EventBudget {
                budget: 100_000_000,
                t,
            });
        }
    }
    Ok(JumpCouplingSample {
        tau: t,
        rings,
        first_ring_equal,
    })
}

fn exp_draw<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate
}

// ---------------------------------------------------------------------------
// Full coupling harness for the discrete-environment joint chain
// ---------------------------------------------------------------------------

/// One coupling attempt: the arrival clock, the (possibly censored)
/// environment coupling clock, and the preceding emptying segment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RetryRecord {
    /// Length of the hitting segment before this attempt.
    pub tau_k: f64,
    /// Arrival clock `Exp(lambda_bar)`.
    pub eta_k: f64,
    /// Environment coupling clock; `None` when censored by `eta_k`
    /// (failed attempt, all we know is `zeta_k >= eta_k`).
    pub zeta_k: Option<f64>,
}

/// Record of one coupling run of two joint copies.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingTrace {
    /// First joint emptying time of the dominating queue.
    pub tau0: f64,
    pub retries: Vec<RetryRecord>,
    /// Index of the successful attempt (number of failures).
    pub j: u32,
    /// Total coupling time; equals
    /// `sum_{k<j} (tau_k + eta_k) + tau_j + zeta_j`.
    pub tau: f64,
    pub coupled: bool,
}

impl CouplingTrace {
    /// Recompute the total from the segments, for consistency checks.
    pub fn reassembled_tau(&self) -> f64 {
        let mut acc = 0.0;
        for (k, r) in self.retries.iter().enumerate() {
            acc += r.tau_k;
            if (k as u32) < self.j {
                acc += r.eta_k;
            } else {
                acc += r.zeta_k.unwrap_or(0.0);
            }
        }
        acc
    }
}

/// Couple two copies of the discrete-environment joint chain by domination
/// and level-0 environment coupling. The environment kernels are lazified
/// with `lazy_factor` (see [`JumpCouplingSpec::from_level0`]).
pub fn couple_joint(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    x1: (u32, usize),
    x2: (u32, usize),
    horizon: f64,
    lazy_factor: f64,
    seed: u64,
) -> Result<CouplingTrace> {
    let m = env.m();
    if x1.1 >= m || x2.1 >= m {
        return Err(Error::Precondition("environment index out of range".into()));
    }
    if x1 == x2 {
        return Ok(CouplingTrace {
            tau0: 0.0,
            retries: vec![RetryRecord {
                tau_k: 0.0,
                eta_k: 0.0,
                zeta_k: Some(0.0),
            }],
            j: 0,
            tau: 0.0,
            coupled: true,
        });
    }
    let jump = if m > 1 {
        Some(JumpCouplingSpec::from_level0(env, lazy_factor)?)
    } else {
        None
    };
    let lambda_bar = rates.lambda_bar;
    let mu_bar = rates.mu_bar;
    let mut mu_max = mu_bar;
    let mut lambda_of = vec![0.0f64; m];
    let mut mu_of = vec![0.0f64; m];
    for (i, &z) in env.states.iter().enumerate() {
        let (l, mu, _) = rates.eval_state(i, z)?;
        lambda_of[i] = l;
        mu_of[i] = mu;
        mu_max = mu_max.max(mu);
    }

    let mut rng = replica_rng(seed, 0);
    let mut n_bar = x1.0.max(x2.0);
    let mut n1 = x1.0;
    let mut n2 = x2.0;
    let mut z1 = x1.1;
    let mut z2 = x2.1;
    let mut t = 0.0f64;
    let mut retries = Vec::new();
    let mut segment_start = 0.0f64;
    let mut tau0 = None;
    let mut events = 0u64;
    const EVENT_BUDGET: u64 = 500_000_000;

    loop {
        if n_bar == 0 {
            // Attempt phase: competing arrival clock vs environment rings.
            let tau_k = t - segment_start;
            if tau0.is_none() {
                tau0 = Some(t);
            }
            let eta_k = exp_draw(&mut rng, lambda_bar);
            let mut zeta = 0.0f64;
            let outcome = loop {
                if z1 == z2 {
                    break Some(zeta);
                }
                let Some(jump) = &jump else {
                    // Single-state environments are always equal.
                    break Some(zeta);
                };
                let ring = exp_draw(&mut rng, jump.uniformization_rate);
                if zeta + ring >= eta_k {
                    // Ring would land after the arrival: attempt fails. The
                    // environments keep their current values; the abandoned
                    // ring is never realized, which is consistent because
                    // the lazified chain is unchanged by adding rings.
                    break None;
                }
                zeta += ring;
                let (na, nb) = maximal_pair(&jump.kernels[z1], &jump.kernels[z2], &mut rng);
                z1 = na;
                z2 = nb;
            };
            match outcome {
                Some(zeta_k) => {
                    let j = retries.len() as u32;
                    retries.push(RetryRecord {
                        tau_k,
                        eta_k,
                        zeta_k: Some(zeta_k),
                    });
                    let tau = t + zeta_k;
                    return Ok(CouplingTrace {
                        tau0: tau0.unwrap(),
                        retries,
                        j,
                        tau,
                        coupled: true,
                    });
                }
                None => {
                    retries.push(RetryRecord {
                        tau_k,
                        eta_k,
                        zeta_k: None,
                    });
                    t += eta_k;
                    // The arrival stream fires: N_bar accepts always, each
                    // copy thins by its own arrival intensity.
                    n_bar = 1;
                    let u: f64 = rng.gen();
                    if u < lambda_of[z1] / lambda_bar {
                        n1 += 1;
                    }
                    if u < lambda_of[z2] / lambda_bar {
                        n2 += 1;
                    }
                    segment_start = t;
                }
            }
            if t >= horizon {
                let j = retries.len() as u32;
                return Ok(CouplingTrace {
                    tau0: tau0.unwrap_or(t),
                    retries,
                    j,
                    tau: horizon,
                    coupled: false,
                });
            }
            continue;
        }

        // Domination phase: shared arrival/service streams plus each copy's
        // own environment clock.
        let r1 = env_switch_rate(env, rates, n1, z1)?;
        let r2 = env_switch_rate(env, rates, n2, z2)?;
        let rates_vec = [lambda_bar, mu_max, r1, r2];
        let total: f64 = rates_vec.iter().sum();
        let hold = exp_draw(&mut rng, total);
        t += hold;
        if t >= horizon {
            let j = retries.len() as u32;
            return Ok(CouplingTrace {
                tau0: tau0.unwrap_or(t),
                retries,
                j,
                tau: horizon,
                coupled: false,
            });
        }
        events += 1;
        if events >= EVENT_BUDGET {
            return Err(Error::EventBudget {
                budget: EVENT_BUDGET,
                t,
            });
        }
        let pick = rng.gen::<f64>() * total;
        if pick < rates_vec[0] {
            // Arrival stream: N_bar always accepts; copies thin.
            n_bar += 1;
            let u: f64 = rng.gen();
            if u < lambda_of[z1] / lambda_bar {
                n1 += 1;
            }
            if u < lambda_of[z2] / lambda_bar {
                n2 += 1;
            }
        } else if pick < rates_vec[0] + rates_vec[1] {
            // Service stream: nested acceptance keeps N_i <= N_bar.
            let u: f64 = rng.gen();
            if n1 > 0 && u < mu_of[z1] / mu_max {
                n1 -= 1;
            }
            if n2 > 0 && u < mu_of[z2] / mu_max {
                n2 -= 1;
            }
            if u < mu_bar / mu_max && n_bar > 0 {
                n_bar -= 1;
            }
        } else if pick < rates_vec[0] + rates_vec[1] + rates_vec[2] {
            z1 = env_switch_target(env, n1, z1, &mut rng);
        } else {
            z2 = env_switch_target(env, n2, z2, &mut rng);
        }
        debug_assert!(n1 <= n_bar && n2 <= n_bar);
    }
}

fn env_switch_rate(env: &DiscreteEnvSpec, rates: &RateField, n: u32, z: usize) -> Result<f64> {
    let out = env.tau_outflow(n, z);
    if out == 0.0 {
        return Ok(0.0);
    }
    let rho = rates.eval_state(z, env.states[z])?.2;
    let scale = if n == 0 {
        1.0
    } else {
        (1.0 / rho).powi(n as i32)
    };
    let r = scale * out;
    if !r.is_finite() {
        return Err(Error::Overflow(format!(
            "environment switch rate at level {n} overflows"
        )));
    }
    Ok(r)
}

fn env_switch_target<R: Rng>(env: &DiscreteEnvSpec, n: u32, z: usize, rng: &mut R) -> usize {
    let m = env.m();
    let total = env.tau_outflow(n, z);
    let mut u = rng.gen::<f64>() * total;
    for j in 0..m {
        if j == z {
            continue;
        }
        let r = env.tau_rate(n, z, j);
        if u < r {
            return j;
        }
        u -= r;
    }
    z
}

/// Gillespie sample of the hitting time of 0 for a plain M/M/1 queue.
pub fn mm1_hit_zero(lambda: f64, mu: f64, start: u32, rng: &mut ChaCha12Rng) -> f64 {
    let mut n = start;
    let mut t = 0.0;
    while n > 0 {
        let total = lambda + mu;
        t += exp_draw(rng, total);
        if rng.gen::<f64>() * total < lambda {
            n += 1;
        } else {
            n -= 1;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Moment-bound Monte Carlo checks
// ---------------------------------------------------------------------------

/// Report of the min-of-clocks moment check.
#[derive(Debug, Clone, Serialize)]
pub struct MgfMinReport {
    pub empirical_mgf: f64,
    pub mgf_se: f64,
    pub mgf_bound: f64,
    pub empirical_success: f64,
    pub success_se: f64,
    pub success_bound: f64,
    pub n_samples: usize,
    pub mgf_ok: bool,
    pub success_ok: bool,
}

/// Check `E[e^{a (xi /\ eta)}] <= theta(alpha, beta, gamma, a)` and
/// `P(eta < xi) >= alpha^{-beta/gamma} gamma/(beta+gamma)` by Monte Carlo,
/// with `xi ~ Exp(beta)` and `eta` drawn from the given sampler. The sampler
/// must honor its declared tail `P(eta > t) <= alpha e^{-gamma t}` on a
/// verification grid (DKW-adjusted), otherwise the check refuses to run.
pub fn mgf_min_check<F>(
    alpha: f64,
    beta: f64,
    gamma: f64,
    a: f64,
    n_samples: usize,
    seed: u64,
    mut eta_sampler: F,
) -> Result<MgfMinReport>
where
    F: FnMut(&mut ChaCha12Rng) -> f64,
{
    let theta = crate::cert::theta_func(alpha, beta, gamma, a)?;
    let mut rng = replica_rng(seed, 0);
    let etas: Vec<f64> = (0..n_samples).map(|_| eta_sampler(&mut rng)).collect();

    // Tail verification on a 20-point grid over the sample range.
    let t_max = etas.iter().cloned().fold(0.0f64, f64::max);
    let eps = dkw_epsilon(n_samples, 0.05);
    if t_max > 0.0 {
        for k in 1..=20 {
            let t = t_max * k as f64 / 20.0;
            let surv = etas.iter().filter(|&&x| x > t).count() as f64 / n_samples as f64;
            if surv > alpha * (-gamma * t).exp() + eps {
                return Err(Error::Precondition(format!(
                    "eta sampler violates its declared tail at t={t}: survival {surv} > {}",
                    alpha * (-gamma * t).exp() + eps
                )));
            }
        }
    } else if alpha * 1.0 < 1.0 {
        return Err(Error::Precondition(
            "degenerate eta sampler with alpha < 1 at t=0".into(),
        ));
    }

    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut wins = 0usize;
    for &eta in &etas {
        let xi = exp_draw(&mut rng, beta);
        let v = (a * xi.min(eta)).exp();
        sum += v;
        sumsq += v * v;
        if eta < xi {
            wins += 1;
        }
    }
    let nf = n_samples as f64;
    let mean = sum / nf;
    let var = (sumsq / nf - mean * mean).max(0.0);
    let mgf_se = (var / nf).sqrt();
    let p_hat = wins as f64 / nf;
    let success_se = (p_hat * (1.0 - p_hat) / nf).sqrt();
    let success_bound = alpha.powf(-beta / gamma) * gamma / (beta + gamma);

    Ok(MgfMinReport {
        empirical_mgf: mean,
        mgf_se,
        mgf_bound: theta,
        empirical_success: p_hat,
        success_se,
        success_bound,
        n_samples,
        mgf_ok: mean <= theta + 3.0 * mgf_se,
        success_ok: p_hat >= success_bound - 3.0 * success_se,
    })
}

// ---------------------------------------------------------------------------
// End-to-end total-variation decay check
// ---------------------------------------------------------------------------

/// One grid point of the decay check.
#[derive(Debug, Clone, Serialize)]
pub struct TvPoint {
    pub t: f64,
    pub tv: f64,
    pub bound: f64,
    pub log_margin: f64,
}

/// Exact transient total variation versus the certified envelope.
#[derive(Debug, Clone, Serialize)]
pub struct TvDecayReport {
    pub n0: u32,
    /// Which prefactor the envelope uses (`C_pi`, the one-copy-vs-pi form).
    pub bound_form: String,
    pub points: Vec<TvPoint>,
    /// Decay rate fitted on the log-TV tail; conservative certificates have
    /// `fitted_rate >= kappa`.
    pub fitted_rate: f64,
    pub kappa: f64,
    pub all_bounded: bool,
    pub slope_ok: bool,
}

/// Check `TV(P^t(x0, .), pi) <= C_pi (1 + c^{n0}) e^{-kappa t}` on a time
/// grid by uniformization against the truncated chain's exact stationary
/// vector, and fit the observed decay rate.
pub fn tv_decay_check(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    cert: &RateCertificate,
    x0: (u32, usize),
    t_grid: &[f64],
    n_max: u32,
) -> Result<TvDecayReport> {
    let gen = build_generator(env, rates, n_max)?;
    let pi = invariant_measure_discrete(env, rates, n_max)?;
    let pi_t = pi.truncated_normalized();
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let law = transient_law(&gen, x0, t)?;
        let tv = tv_distance(&law, &pi_t)?;
        let bound =
            cert.c_pi_prefactor * (1.0 + cert.c.powi(x0.0 as i32)) * (-cert.kappa * t).exp();
        points.push(TvPoint {
            t,
            tv,
            bound,
            log_margin: bound.ln() - tv.max(1e-300).ln(),
        });
    }
    // Slope of ln TV over the grid tail (last half of the points).
    let tail = &points[points.len() / 2..];
    let nf = tail.len() as f64;
    let mx = tail.iter().map(|p| p.t).sum::<f64>() / nf;
    let my = tail.iter().map(|p| p.tv.max(1e-300).ln()).sum::<f64>() / nf;
    let sxx: f64 = tail.iter().map(|p| (p.t - mx) * (p.t - mx)).sum();
    let sxy: f64 = tail
        .iter()
        .map(|p| (p.t - mx) * (p.tv.max(1e-300).ln() - my))
        .sum();
    let fitted_rate = -sxy / sxx;
    let all_bounded = points.iter().all(|p| p.tv <= p.bound);
    let slope_ok = fitted_rate >= cert.kappa - 1e-9;
    Ok(TvDecayReport {
        n0: x0.0,
        bound_form: "C_pi (1 + c^n0) exp(-kappa t)".into(),
        points,
        fitted_rate,
        kappa: cert.kappa,
        all_bounded,
        slope_ok,
    })
}

/// Convenience: certificate for a discrete environment using the level-0
/// shared-ring constants, `alpha = 1.0001` (any value > 1 dominates the
/// prefactor-1 ring bound) and `gamma = (1 - q) Lambda`.
pub fn certificate_from_level0(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    lazy_factor: f64,
) -> Result<(RateCertificate, JumpCouplingSpec)> {
    let jump = JumpCouplingSpec::from_level0(env, lazy_factor)?;
    let cert = crate::cert::optimize_rate(1.0001, jump.gamma(), rates.lambda_bar, rates.mu_bar)?;
    Ok((cert, jump))
}

/// Geometric-domination diagnostic for retry counts: empirical
/// `P(J > k) <= (1-p)^(k+1) + eps_DKW` for `k <= k_max`.
pub fn retries_geometrically_dominated(js: &[u32], p: f64, k_max: u32) -> bool {
    let n = js.len();
    if n == 0 {
        return false;
    }
    let eps = dkw_epsilon(n, 0.05);
    (0..=k_max).all(|k| {
        let frac = js.iter().filter(|&&j| j > k).count() as f64 / n as f64;
        frac <= (1.0 - p).powi(k as i32 + 1) + eps
    })
}
