//! Closed-form stationary densities of reflected 1-D diffusions.
//!
//! A reflected diffusion on `[lo, hi]` with generator
//! `(a^2/2) f'' + b f'` and zero-flux boundaries has stationary density
//!
//! ```text
//! q(z) = (2 / a^2(z)) exp( integral_lo^z  2 b(y) / a^2(y) dy )
//! ```
//!
//! up to normalization. Both the exponent and the normalizer are evaluated
//! by adaptive quadrature; an endpoint where `q` blows up non-integrably is
//! reported through the `density_integrable` flag rather than a crash.

use crate::error::{Error, Result};
use crate::quad;

/// Quadrature tolerance used throughout the density computations.
pub const DENSITY_TOL: f64 = 1e-9;

/// Unnormalized stationary density with integrability verdicts.
pub struct StationaryDensity1D {
    pub lo: f64,
    pub hi: f64,
    /// `integral |b|/a^2` over the domain is finite (the classical
    /// sufficient condition for the closed form).
    pub drift_integrable: bool,
    /// The density itself has a finite integral over the domain.
    pub density_integrable: bool,
    /// `integral_lo^hi q(z) dz` when finite.
    pub normalizer: Option<f64>,
    a: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    b: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for StationaryDensity1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationaryDensity1D")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("drift_integrable", &self.drift_integrable)
            .field("density_integrable", &self.density_integrable)
            .field("normalizer", &self.normalizer)
            .finish()
    }
}

impl StationaryDensity1D {
    /// Unnormalized density value.
    pub fn q(&self, z: f64) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&z) {
            return Err(Error::DomainViolation {
                point: [z, 0.0],
                detail: format!("density evaluated outside [{}, {}]", self.lo, self.hi),
            });
        }
        let a = &self.a;
        let b = &self.b;
        let exponent = if z > self.lo {
            quad::integrate(|y| 2.0 * b(y) / a(y).powi(2), self.lo, z, DENSITY_TOL)?.value
        } else {
            0.0
        };
        Ok(2.0 / a(z).powi(2) * exponent.exp())
    }

    /// Probability density value; requires a finite normalizer.
    pub fn normalized(&self, z: f64) -> Result<f64> {
        let norm = self.normalizer.ok_or_else(|| {
            Error::Divergence("density has no finite normalizer on this domain".into())
        })?;
        Ok(self.q(z)? / norm)
    }

    /// Closed-form bin masses of the normalized density on an equispaced
    /// grid of `bins` cells.
    pub fn bin_masses(&self, bins: usize) -> Result<Vec<f64>> {
        let norm = self.normalizer.ok_or_else(|| {
            Error::Divergence("density has no finite normalizer on this domain".into())
        })?;
        let width = (self.hi - self.lo) / bins as f64;
        let mut out = Vec::with_capacity(bins);
        for i in 0..bins {
            let a = self.lo + i as f64 * width;
            let b = a + width;
            let mass = quad::integrate(|z| self.q(z).unwrap_or(0.0), a, b, DENSITY_TOL)?.value;
            out.push(mass / norm);
        }
        Ok(out)
    }
}

/// Build the stationary density object for diffusion coefficient `a` and
/// drift `b` on `[lo, hi]`. `a` must be positive in the interior.
pub fn stationary_density_1d<A, B>(a: A, b: B, lo: f64, hi: f64) -> Result<StationaryDensity1D>
where
    A: Fn(f64) -> f64 + Send + Sync + 'static,
    B: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(hi > lo) {
        return Err(Error::Precondition("need hi > lo".into()));
    }
    for k in 1..64 {
        let z = lo + (hi - lo) * k as f64 / 64.0;
        if !(a(z) > 0.0) {
            return Err(Error::Precondition(format!(
                "diffusion coefficient not positive at z={z}"
            )));
        }
    }
    let density = StationaryDensity1D {
        lo,
        hi,
        drift_integrable: false,
        density_integrable: false,
        normalizer: None,
        a: Box::new(a),
        b: Box::new(b),
    };
    let a = &density.a;
    let b = &density.b;
    let drift_integrable =
        quad::integrate_budget(|y| b(y).abs() / a(y).powi(2), lo, hi, DENSITY_TOL, 4000).is_ok();
    let norm = quad::integrate_budget(|z| density.q(z).unwrap_or(f64::NAN), lo, hi, 1e-8, 4000);
    let (density_integrable, normalizer) = match norm {
        Ok(q) => (true, Some(q.value)),
        Err(_) => (false, None),
    };
    Ok(StationaryDensity1D {
        drift_integrable,
        density_integrable,
        normalizer,
        ..density
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driftless_is_uniform() {
        // a = 1, b = 0 on [0,1]: q = 2, normalized to the uniform density.
        let d = stationary_density_1d(|_| 1.0, |_| 0.0, 0.0, 1.0).unwrap();
        assert!((d.q(0.3).unwrap() - 2.0).abs() < 1e-9);
        assert!((d.normalizer.unwrap() - 2.0).abs() < 1e-7);
        assert!((d.normalized(0.77).unwrap() - 1.0).abs() < 1e-7);
        assert!(d.drift_integrable && d.density_integrable);
    }

    #[test]
    fn reciprocal_drift_power_law() {
        // b(z) = theta/(1-z) with theta = 0.25: q(z) = 2 (1-z)^(-1/2).
        let theta = 0.25;
        let d = stationary_density_1d(|_| 1.0, move |z| theta / (1.0 - z), 0.0, 0.95).unwrap();
        for z in [0.0f64, 0.3, 0.6, 0.9] {
            let expect = 2.0 * (1.0 - z).powf(-0.5);
            let got = d.q(z).unwrap();
            assert!(
                (got - expect).abs() < 1e-6 * expect,
                "z={z}: {got} vs {expect}"
            );
        }
        // Normalizer on [0, 0.95]: integral 2(1-z)^(-1/2) = 4(1 - sqrt(0.05)).
        let expect = 4.0 * (1.0 - 0.05f64.sqrt());
        assert!((d.normalizer.unwrap() - expect).abs() < 1e-7);
    }

    #[test]
    fn full_interval_integrable_below_half() {
        // theta = 0.25 on the full [0,1]: integrable endpoint singularity,
        // normalizer 4; the drift itself is not absolutely integrable.
        let theta = 0.25;
        let d = stationary_density_1d(|_| 1.0, move |z| theta / (1.0 - z), 0.0, 1.0).unwrap();
        assert!(d.density_integrable);
        assert!((d.normalizer.unwrap() - 4.0).abs() < 2e-6);
        assert!(!d.drift_integrable);
    }

    #[test]
    fn full_interval_diverges_above_half() {
        // theta = 0.75: q = 2(1-z)^(-3/2) is not integrable on [0,1]; flagged.
        let theta = 0.75;
        let d = stationary_density_1d(|_| 1.0, move |z| theta / (1.0 - z), 0.0, 1.0).unwrap();
        assert!(!d.density_integrable);
        assert!(d.normalizer.is_none());
        assert!(d.normalized(0.5).is_err());
    }

    #[test]
    fn degenerate_diffusion_rejected() {
        assert!(stationary_density_1d(|_| 0.0, |_| 0.0, 0.0, 1.0).is_err());
    }
}
