//! Empirical exponential-tail certification.
//!
//! Coupling-time samples are summarized by constants `(alpha, gamma)` with
//! the empirical survival curve lying below `alpha e^{-gamma t}` up to a 95%
//! Dvoretzky–Kiefer–Wolfowitz band. The decay rate comes from a least-squares
//! fit of the log-survival over the tail band `S in [max(eps, 20/n), 0.2]`;
//! the prefactor is then the smallest `alpha >= 1` achieving domination at
//! every jump of the empirical curve.

use crate::error::{Error, Result};
use serde::Serialize;

/// 95%-band half-width `sqrt(ln(2/delta) / (2n))`.
pub fn dkw_epsilon(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Exponential domination certificate fitted from samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub alpha: f64,
    pub gamma: f64,
    /// Goodness of the log-survival regression on the tail band.
    pub r_squared: f64,
    pub n: usize,
    pub dkw_epsilon: f64,
}

/// Largest prefactor cap before a fit is considered non-exponential.
pub const ALPHA_CAP: f64 = 1e3;

/// Minimum regression quality.
pub const R2_MIN: f64 = 0.98;

/// Fit `(alpha, gamma)` such that the empirical survival of the samples lies
/// below `alpha e^{-gamma t} + eps_DKW` everywhere on the sample range.
pub fn fit_coupling_constants(samples: &[f64]) -> Result<TailFit> {
    let n = samples.len();
    if n < 1000 {
        return Err(Error::InsufficientData(format!(
            "need at least 1000 coupling-time samples, got {n}"
        )));
    }
    if samples.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Precondition(
            "coupling times must be finite and non-negative".into(),
        ));
    }
    let mut ts = samples.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = dkw_epsilon(n, 0.05);

    // Log-survival regression over the tail band.
    let lo_s = (20.0 / n as f64).max(eps);
    let hi_s = 0.2;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let s = (n - i - 1) as f64 / n as f64;
        if s >= lo_s && s <= hi_s && t > 0.0 {
            xs.push(t);
            ys.push(s.ln());
        }
    }
    if xs.len() < 30 {
        return Err(Error::NonExponentialTail(format!(
            "only {} points in the survival band [{lo_s:.3e}, {hi_s}]; no exponential with \
             alpha <= {ALPHA_CAP} dominates a curve this degenerate",
            xs.len()
        )));
    }
    let (slope, r2) = least_squares(&xs, &ys);
    if !(slope < 0.0) {
        return Err(Error::NonExponentialTail(format!(
            "log-survival slope {slope} is not negative"
        )));
    }
    if r2 < R2_MIN {
        return Err(Error::NonExponentialTail(format!(
            "log-survival regression r^2 = {r2:.4} below {R2_MIN}"
        )));
    }
    let gamma = -slope;

    // Smallest admissible prefactor: the empirical curve only moves at its
    // jumps, and just left of a jump the survival is (n-i)/n.
    let mut alpha = 1.0f64;
    for (i, &t) in ts.iter().enumerate() {
        let s_left = (n - i) as f64 / n as f64;
        let need = (s_left - eps) * (gamma * t).exp();
        if need > alpha {
            alpha = need;
        }
    }
    if alpha > ALPHA_CAP {
        return Err(Error::NonExponentialTail(format!(
            "survival not dominated by any exponential on the sample range with alpha <= \
             {ALPHA_CAP} (needed {alpha:.3e})"
        )));
    }
    Ok(TailFit {
        alpha,
        gamma,
        r_squared: r2,
        n,
        dkw_epsilon: eps,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        0.0
    };
    (slope, r2)
}

/// Check empirical survival values against a declared exponential envelope
/// on a time grid, DKW-adjusted: `S_n(t) <= alpha e^{-gamma t} + eps`.
pub fn survival_dominated(
    samples: &[f64],
    alpha: f64,
    gamma: f64,
    grid: &[f64],
    delta: f64,
) -> bool {
    let n = samples.len();
    if n == 0 {
        return false;
    }
    let eps = dkw_epsilon(n, delta);
    grid.iter().all(|&t| {
        let surv = samples.iter().filter(|&&x| x > t).count() as f64 / n as f64;
        surv <= alpha * (-gamma * t).exp() + eps
    })
}
