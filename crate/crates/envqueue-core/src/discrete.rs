//! Exact treatment of the discrete-environment joint chain.
//!
//! States are pairs `(n, z)` of queue length and environment state, indexed
//! as `n * m + z_index` with the queue truncated at `n_max`. The generator is
//!
//! ```text
//! R[(n,z),(n+1,z)] = lambda(z)
//! R[(n,z),(n-1,z)] = mu(z)            (n >= 1)
//! R[(n,z),(n,z')]  = rho(z)^-n tau_n(z,z')
//! ```
//!
//! with no simultaneous queue/environment jumps. Truncation redirects the
//! up-rate at `n_max` into a self-loop (reflecting), which keeps the matrix
//! conservative and — because the layer ratio is exactly `rho(z)` — leaves
//! the closed-form invariant vector exact for the truncated chain as well.
//!
//! The closed form is `pi(n,z) = rho(z)^n v(z) / Xi` with
//! `Xi = sum_z v(z)/(1-rho(z))`.

use crate::env::DiscreteEnvSpec;
use crate::error::{Error, Result};
use crate::rates::RateField;
use crate::seed::replica_rng;
use rand::Rng;
use serde::Serialize;

/// Sparse conservative rate matrix of the truncated joint chain.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub n_max: u32,
    pub m: usize,
    /// Environment state values, cached from the spec.
    pub state_values: Vec<f64>,
    /// Off-diagonal rates per row.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Diagonal entries (negative off-diagonal row sums).
    pub diag: Vec<f64>,
    /// Up-rate at the top level redirected into a self-loop.
    pub truncation_redirected: bool,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        (self.n_max as usize + 1) * self.m
    }

    pub fn index(&self, n: u32, zi: usize) -> usize {
        n as usize * self.m + zi
    }

    pub fn unindex(&self, idx: usize) -> (u32, usize) {
        ((idx / self.m) as u32, idx % self.m)
    }

    /// `out[y] = sum_x v[x] R[x,y]` (left multiplication by the generator).
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (x, row) in self.rows.iter().enumerate() {
            let vx = v[x];
            if vx == 0.0 {
                continue;
            }
            out[x] += vx * self.diag[x];
            for &(y, r) in row {
                out[y] += vx * r;
            }
        }
    }

    /// Uniformization rate: max total outflow.
    pub fn uniformization_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |acc, d| acc.max(-d))
    }
}

/// Build the truncated joint generator.
pub fn build_generator(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    n_max: u32,
) -> Result<GeneratorMatrix> {
    if n_max < 1 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let m = env.m();
    if m == 0 {
        return Err(Error::InvalidSpec("empty state list".into()));
    }
    let dim = (n_max as usize + 1) * m;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    let mut diag = vec![0.0f64; dim];

    for n in 0..=n_max {
        for zi in 0..m {
            let z = env.states[zi];
            let (lambda, mu, rho) = rates.eval_state(zi, z)?;
            let x = n as usize * m + zi;
            let mut out = 0.0;
            if n < n_max {
                rows[x].push((x + m, lambda));
                out += lambda;
            }
            // At n_max the up-rate becomes a self-loop: no entry, no outflow.
            if n >= 1 {
                rows[x].push((x - m, mu));
                out += mu;
            }
            if m > 1 {
                let scale = if n == 0 {
                    1.0
                } else {
                    (1.0 / rho).powi(n as i32)
                };
                for zj in 0..m {
                    if zj == zi {
                        continue;
                    }
                    let tau = env.tau_rate(n, zi, zj);
                    if tau == 0.0 {
                        continue;
                    }
                    let rate = scale * tau;
                    if !rate.is_finite() {
                        return Err(Error::Overflow(format!(
                            "environment switch rate rho^-n tau at n={n}, z index {zi}"
                        )));
                    }
                    rows[x].push((n as usize * m + zj, rate));
                    out += rate;
                }
            }
            diag[x] = -out;
        }
    }

    Ok(GeneratorMatrix {
        n_max,
        m,
        state_values: env.states.clone(),
        rows,
        diag,
        truncation_redirected: true,
    })
}

/// Closed-form invariant vector of the (truncated) joint chain.
#[derive(Debug, Clone, Serialize)]
pub struct DiscretePi {
    /// Normalizer `Xi = sum_z v(z)/(1-rho(z))` of the untruncated chain.
    pub xi: f64,
    pub n_max: u32,
    pub m: usize,
    /// `pi(n,z) = rho(z)^n v(z) / Xi`, indexed like the generator.
    pub weights: Vec<f64>,
    /// Exact mass above `n_max`: `sum_z v(z) rho(z)^(n_max+1)/(1-rho(z)) / Xi`.
    pub tail_mass: f64,
    /// Analytic bound on the tail via `rho_bar`.
    pub tail_mass_bound: f64,
}

impl DiscretePi {
    pub fn index(&self, n: u32, zi: usize) -> usize {
        n as usize * self.m + zi
    }

    /// Stored weights renormalized to the truncated state space.
    pub fn truncated_normalized(&self) -> Vec<f64> {
        let s: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / s).collect()
    }
}

/// Compute `Xi` and the closed-form invariant weights up to `n_max`.
pub fn invariant_measure_discrete(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    n_max: u32,
) -> Result<DiscretePi> {
    let m = env.m();
    let mut rho = Vec::with_capacity(m);
    for (i, &z) in env.states.iter().enumerate() {
        let (_, _, r) = rates.eval_state(i, z)?;
        if r >= 1.0 {
            return Err(Error::Divergence(format!(
                "rho(z)={r} >= 1 at state {i}; normalizer diverges"
            )));
        }
        rho.push(r);
    }
    let xi: f64 = env
        .weights
        .iter()
        .zip(&rho)
        .map(|(v, r)| v / (1.0 - r))
        .sum();
    if !xi.is_finite() {
        return Err(Error::Divergence("Xi overflowed f64".into()));
    }

    let mut weights = Vec::with_capacity((n_max as usize + 1) * m);
    for n in 0..=n_max {
        for (r, v) in rho.iter().zip(&env.weights) {
            weights.push(r.powi(n as i32) * v / xi);
        }
    }
    let tail_mass: f64 = env
        .weights
        .iter()
        .zip(&rho)
        .map(|(v, r)| v * r.powi(n_max as i32 + 1) / (1.0 - r))
        .sum::<f64>()
        / xi;
    let rho_bar = rho.iter().cloned().fold(0.0f64, f64::max);
    let tail_mass_bound =
        env.weights.iter().sum::<f64>() * rho_bar.powi(n_max as i32 + 1) / (1.0 - rho_bar) / xi;

    Ok(DiscretePi {
        xi,
        n_max,
        m,
        weights,
        tail_mass,
        tail_mass_bound,
    })
}

/// Max interior balance residual `|sum_x pi(x) R[x,y]|` over `y` with
/// `n < n_max`. The truncation redirect only modifies top-level diagonals, so
/// interior columns are unaffected by it.
pub fn check_balance(pi: &DiscretePi, r: &GeneratorMatrix) -> Result<f64> {
    if pi.n_max != r.n_max || pi.m != r.m {
        return Err(Error::MismatchedPartitions(format!(
            "pi is {}x{}, generator is {}x{}",
            pi.n_max, pi.m, r.n_max, r.m
        )));
    }
    let mut flow = vec![0.0f64; r.dim()];
    r.left_mul(&pi.weights, &mut flow);
    let interior = (r.n_max as usize) * r.m;
    Ok(flow[..interior].iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

/// Piecewise-constant trajectory of the joint chain.
#[derive(Debug, Clone)]
pub struct CtmcPath {
    /// `(jump time, new state index)`, in order.
    pub jumps: Vec<(f64, usize)>,
    /// Time spent in each state over `[0, t_end]`.
    pub occupation: Vec<f64>,
    pub t_end: f64,
    pub start: usize,
}

impl CtmcPath {
    pub fn occupation_fractions(&self) -> Vec<f64> {
        self.occupation.iter().map(|o| o / self.t_end).collect()
    }
}

/// Event-driven simulation of the truncated chain: exponential holding times
/// and categorical jump draws, deterministic given the seed.
pub fn simulate_ctmc(
    r: &GeneratorMatrix,
    x0: (u32, usize),
    horizon: f64,
    seed: u64,
    max_events: u64,
) -> Result<CtmcPath> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    let mut rng = replica_rng(seed, 0);
    let mut state = r.index(x0.0, x0.1);
    let start = state;
    let mut t = 0.0f64;
    let mut jumps = Vec::new();
    let mut occupation = vec![0.0f64; r.dim()];
    let mut events = 0u64;

    loop {
        let total = -r.diag[state];
        if total <= 0.0 {
            // Absorbing state: sit out the rest of the horizon.
            occupation[state] += horizon - t;
            break;
        }
        let hold = -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / total;
        if t + hold >= horizon {
            occupation[state] += horizon - t;
            break;
        }
        occupation[state] += hold;
        t += hold;
        // Categorical draw over the outgoing rates.
        let mut u = rng.gen::<f64>() * total;
        let row = &r.rows[state];
        let mut next = row.last().map(|&(y, _)| y).unwrap_or(state);
        for &(y, rate) in row {
            if u < rate {
                next = y;
                break;
            }
            u -= rate;
        }
        state = next;
        jumps.push((t, state));
        events += 1;
        if events >= max_events {
            return Err(Error::EventBudget {
                budget: max_events,
                t,
            });
        }
    }

    Ok(CtmcPath {
        jumps,
        occupation,
        t_end: horizon,
        start,
    })
}

/// Transient distribution `e^{tR}` row from a point mass, by uniformization
/// with the Poisson tail cut at total-variation error `<= 1e-10`.
pub fn transient_law(r: &GeneratorMatrix, x0: (u32, usize), t: f64) -> Result<Vec<f64>> {
    let mut v = vec![0.0f64; r.dim()];
    v[r.index(x0.0, x0.1)] = 1.0;
    transient_law_vec(r, &v, t)
}

/// Transient distribution from an initial distribution.
pub fn transient_law_vec(r: &GeneratorMatrix, v0: &[f64], t: f64) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::Precondition("time must be non-negative".into()));
    }
    if v0.len() != r.dim() {
        return Err(Error::MismatchedPartitions(
            "initial vector length does not match generator".into(),
        ));
    }
    let rate = r.uniformization_rate() * (1.0 + 1e-12);
    let q = rate * t;
    if q == 0.0 {
        return Ok(v0.to_vec());
    }
    if !q.is_finite() || q > 5e7 {
        return Err(Error::Overflow(format!(
            "uniformization needs ~{q:.3e} matrix-vector products; rate {rate:.3e} too stiff"
        )));
    }
    let weights = poisson_weights(q, 1e-12);

    let mut v = v0.to_vec();
    let mut out = vec![0.0f64; v.len()];
    let mut acc = vec![0.0f64; v.len()];
    for (k, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
        }
        if k + 1 < weights.len() {
            // v <- v (I + R/rate)
            r.left_mul(&v, &mut out);
            for (x, dv) in v.iter_mut().zip(&out) {
                *x += dv / rate;
                // Rounding guard: uniformized kernel is stochastic.
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
    }
    // Renormalize the cut tail (< 1e-12) so the result is a distribution.
    let s: f64 = acc.iter().sum();
    if s > 0.0 {
        for x in &mut acc {
            *x /= s;
        }
    }
    Ok(acc)
}

/// Poisson(q) pmf over `0..=R`, computed mode-centred and renormalized;
/// entries outside the retained window (relative mass < `cut`) are zero.
fn poisson_weights(q: f64, cut: f64) -> Vec<f64> {
    let mode = q.floor() as usize;
    // Upper end: mode + 8 * sqrt(q) + 32 comfortably covers mass 1 - 1e-12.
    let hi = mode + (8.0 * q.sqrt()) as usize + 32;
    let mut w = vec![0.0f64; hi + 1];
    w[mode] = 1.0;
    for k in mode..hi {
        w[k + 1] = w[k] * q / (k as f64 + 1.0);
        if w[k + 1] < cut * 1e-6 {
            break;
        }
    }
    if mode > 0 {
        for k in (0..mode).rev() {
            w[k] = w[k + 1] * (k as f64 + 1.0) / q;
            if w[k] < cut * 1e-6 {
                break;
            }
        }
    }
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    w
}
