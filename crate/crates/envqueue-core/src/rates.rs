//! Arrival/service rate fields over the environment state.
//!
//! Rates are named built-ins (constant, linear in a coordinate, per-state
//! table) rather than arbitrary code, so specs serialize and runs reproduce.
//! A `RateField` carries the uniform bounds `lambda_bar` (upper bound on the
//! arrival rate) and `mu_bar` (lower bound on the service rate); every
//! evaluation re-checks them so a misconfigured spec fails loudly.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A scalar rate as a function of the environment point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "fn", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFn {
    Constant {
        value: f64,
    },
    /// `slope * z[coord] + intercept`
    Linear {
        #[serde(default)]
        coord: usize,
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `slope / z[coord] + intercept` (service rate `z` gives intensity `1/z`)
    Reciprocal {
        #[serde(default)]
        coord: usize,
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// Per-state values, indexed by the discrete environment state.
    Table {
        values: Vec<f64>,
    },
}

impl RateFn {
    /// Evaluate at a continuous point.
    pub fn at_point(&self, z: [f64; 2]) -> Result<f64> {
        match self {
            RateFn::Constant { value } => Ok(*value),
            RateFn::Linear {
                coord,
                slope,
                intercept,
            } => Ok(slope * z[*coord] + intercept),
            RateFn::Reciprocal {
                coord,
                slope,
                intercept,
            } => Ok(slope / z[*coord] + intercept),
            RateFn::Table { .. } => Err(Error::InvalidSpec(
                "table rate function needs a discrete state index".into(),
            )),
        }
    }

    /// Evaluate for a discrete state with index `i` and value `z`.
    pub fn at_state(&self, i: usize, z: f64) -> Result<f64> {
        match self {
            RateFn::Table { values } => values.get(i).copied().ok_or_else(|| {
                Error::InvalidSpec(format!("rate table has no entry for state {i}"))
            }),
            other => other.at_point([z, 0.0]),
        }
    }
}

/// Arrival/service rate pair with declared uniform bounds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RateField {
    pub lambda: RateFn,
    pub mu: RateFn,
    /// Uniform upper bound on the arrival rate.
    pub lambda_bar: f64,
    /// Uniform lower bound on the service rate.
    pub mu_bar: f64,
}

impl RateField {
    pub fn new(lambda: RateFn, mu: RateFn, lambda_bar: f64, mu_bar: f64) -> Result<Self> {
        if !(lambda_bar > 0.0) || !(mu_bar > 0.0) {
            return Err(Error::InvalidSpec(
                "rate bounds lambda_bar, mu_bar must be positive".into(),
            ));
        }
        Ok(Self {
            lambda,
            mu,
            lambda_bar,
            mu_bar,
        })
    }

    /// Whether the bounds give a uniform traffic-intensity gap
    /// `lambda_bar < mu_bar`; required by the rate-certificate machinery,
    /// not by stationarity.
    pub fn uniform_gap(&self) -> bool {
        self.lambda_bar < self.mu_bar
    }

    /// `rho_bar = lambda_bar / mu_bar`.
    pub fn rho_bar(&self) -> f64 {
        self.lambda_bar / self.mu_bar
    }

    fn check(&self, z: [f64; 2], lambda: f64, mu: f64) -> Result<()> {
        // Boundary projections can leave points a few ulps outside a face
        // whose coordinate the bound was declared from; give that much grace
        // and no more.
        let slack = 1e-9;
        if !(lambda >= 0.0) || lambda > self.lambda_bar * (1.0 + slack) + 1e-12 {
            return Err(Error::BoundViolation {
                z,
                detail: format!(
                    "lambda={lambda} outside [0, lambda_bar={}]",
                    self.lambda_bar
                ),
            });
        }
        if !(mu > 0.0) || mu < self.mu_bar * (1.0 - slack) - 1e-12 {
            return Err(Error::BoundViolation {
                z,
                detail: format!("mu={mu} below mu_bar={}", self.mu_bar),
            });
        }
        if lambda / mu > 1.0 + slack {
            return Err(Error::BoundViolation {
                z,
                detail: format!("traffic intensity rho={} exceeds 1", lambda / mu),
            });
        }
        Ok(())
    }

    /// `(lambda(z), mu(z), rho(z))` at a continuous point, bound-checked.
    pub fn eval(&self, z: [f64; 2]) -> Result<(f64, f64, f64)> {
        let lambda = self.lambda.at_point(z)?;
        let mu = self.mu.at_point(z)?;
        self.check(z, lambda, mu)?;
        Ok((lambda, mu, lambda / mu))
    }

    /// `(lambda, mu, rho)` for discrete state `i` with value `z`, bound-checked.
    pub fn eval_state(&self, i: usize, z: f64) -> Result<(f64, f64, f64)> {
        let lambda = self.lambda.at_state(i, z)?;
        let mu = self.mu.at_state(i, z)?;
        self.check([z, 0.0], lambda, mu)?;
        Ok((lambda, mu, lambda / mu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_arrival() -> RateField {
        RateField::new(
            RateFn::Linear {
                coord: 0,
                slope: 1.0,
                intercept: 0.0,
            },
            RateFn::Constant { value: 1.0 },
            0.9,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn interactive_arrival_rate() {
        // lambda(z) = z, mu = 1 at z = 0.5
        let rf = RateField::new(
            RateFn::Linear {
                coord: 0,
                slope: 1.0,
                intercept: 0.0,
            },
            RateFn::Constant { value: 1.0 },
            1.0,
            1.0,
        )
        .unwrap();
        let (l, m, r) = rf.eval([0.5, 0.0]).unwrap();
        assert_eq!((l, m, r), (0.5, 1.0, 0.5));
    }

    #[test]
    fn interactive_service_rate() {
        // lambda = 1, mu(z) = z at z = 2
        let rf = RateField::new(
            RateFn::Constant { value: 1.0 },
            RateFn::Linear {
                coord: 0,
                slope: 1.0,
                intercept: 0.0,
            },
            1.0,
            1.0,
        )
        .unwrap();
        let (l, m, r) = rf.eval([2.0, 0.0]).unwrap();
        assert_eq!((l, m, r), (1.0, 2.0, 0.5));
    }

    #[test]
    fn bound_violation_detected() {
        // lambda(z) = z with declared lambda_bar = 0.9 evaluated past the bound
        let rf = linear_arrival();
        let err = rf.eval([0.95, 0.0]).unwrap_err();
        assert!(matches!(err, Error::BoundViolation { .. }));
    }

    #[test]
    fn table_rates_by_state() {
        let rf = RateField::new(
            RateFn::Table {
                values: vec![0.2, 0.5],
            },
            RateFn::Constant { value: 1.0 },
            0.5,
            1.0,
        )
        .unwrap();
        assert_eq!(rf.eval_state(1, 0.5).unwrap().2, 0.5);
        assert!(rf.eval_state(2, 0.0).is_err());
    }
}
