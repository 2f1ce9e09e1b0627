//! Closed-form invariant laws of the joint process and empirical comparison.
//!
//! The invariant measure is weighted-geometric:
//!
//! ```text
//! pi({n}, dz) = rho(z)^n nu(dz) / Xi
//! ```
//!
//! where `nu` is the environment's own stationary measure and
//! `Xi = integral nu(dz)/(1 - rho(z))` (a sum for discrete environments, a
//! series over level-dependent sub-domains in threshold mode). `Xi` is always
//! computed along two algebraic routes — the `1/(1-rho)` form and the
//! truncated geometric series with its analytic tail — and the two must
//! agree to 1e-8.

use crate::density::{stationary_density_1d, StationaryDensity1D};
use crate::env::{DiffusionEnvSpec, DiscreteEnvSpec, ThresholdSpec};
use crate::error::{Error, Result};
use crate::joint::{occupation_summary, JointPath};
use crate::quad;
use crate::rates::RateField;
use serde::Serialize;

/// Agreement required between the two routes to `Xi`.
pub const XI_CROSS_TOL: f64 = 1e-8;

fn cross_check(a: f64, b: f64, what: &str) -> Result<()> {
    let scale = a.abs().max(1.0);
    if (a - b).abs() <= XI_CROSS_TOL * scale {
        Ok(())
    } else {
        Err(Error::CrossCheck(format!(
            "{what}: direct form {a} vs series form {b}"
        )))
    }
}

/// Series length for a truncation error below 1e-10 relative to `1/(1-rho_bar)`.
fn series_len(rho_bar: f64) -> u32 {
    if rho_bar <= 0.0 {
        return 1;
    }
    let n = ((1e-10 * (1.0 - rho_bar)).ln() / rho_bar.ln()).ceil();
    (n.max(1.0) as u32).min(100_000)
}

/// `Xi` for a discrete environment: exact sum plus series cross-check.
pub fn xi_discrete(env: &DiscreteEnvSpec, rates: &RateField) -> Result<f64> {
    let mut rho = Vec::with_capacity(env.m());
    for (i, &z) in env.states.iter().enumerate() {
        let r = rates.eval_state(i, z)?.2;
        if r >= 1.0 {
            return Err(Error::Divergence(format!(
                "rho = {r} >= 1 at state {i}; Xi diverges"
            )));
        }
        rho.push(r);
    }
    let direct: f64 = env
        .weights
        .iter()
        .zip(&rho)
        .map(|(v, r)| v / (1.0 - r))
        .sum();
    if !direct.is_finite() {
        return Err(Error::Divergence("Xi overflowed f64".into()));
    }
    let rho_bar = rho.iter().cloned().fold(0.0f64, f64::max);
    let n_terms = series_len(rho_bar);
    let mut series = 0.0f64;
    for (v, r) in env.weights.iter().zip(&rho) {
        let mut pow = 1.0;
        let mut acc = 0.0;
        for _ in 0..=n_terms {
            acc += pow;
            pow *= r;
        }
        // analytic geometric tail
        acc += pow / (1.0 - r);
        series += v * acc;
    }
    cross_check(direct, series, "discrete Xi")?;
    Ok(direct)
}

/// Closed-form stationary law of the joint process with a 1-D diffusive
/// environment (threshold-aware).
pub struct StationaryLaw {
    pub xi: f64,
    pub lo: f64,
    pub hi: f64,
    /// Largest traffic intensity on the layer supports, for tail bounds.
    pub rho_bar: f64,
    threshold: Option<ThresholdSpec>,
    nu: StationaryDensity1D,
    nu_norm: f64,
    rho: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for StationaryLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationaryLaw")
            .field("xi", &self.xi)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("rho_bar", &self.rho_bar)
            .finish()
    }
}

impl StationaryLaw {
    /// Support of layer `n`.
    pub fn layer_support(&self, n: u32) -> (f64, f64) {
        match &self.threshold {
            Some(th) => th.domain_at(n, (self.lo, self.hi)),
            None => (self.lo, self.hi),
        }
    }

    /// Unnormalized environment density `nu` (normalized to mass 1 on the
    /// full domain internally).
    pub fn nu_density(&self, z: f64) -> f64 {
        self.nu.q(z).map(|q| q / self.nu_norm).unwrap_or(0.0)
    }

    /// Joint density value at `(n, z)`: `rho(z)^n nu(z) / Xi` on the layer
    /// support, zero outside.
    pub fn layer_density(&self, n: u32, z: f64) -> f64 {
        let (lo, hi) = self.layer_support(n);
        if z < lo || z > hi {
            return 0.0;
        }
        (self.rho)(z).powi(n as i32) * self.nu_density(z) / self.xi
    }

    /// Ratio of consecutive layer densities; `rho(z)` wherever positive.
    pub fn layer_ratio(&self, z: f64) -> f64 {
        (self.rho)(z)
    }

    /// Mass of layer `n` by quadrature.
    pub fn queue_marginal(&self, n: u32) -> Result<f64> {
        let (lo, hi) = self.layer_support(n);
        let rho = &self.rho;
        let q = quad::integrate(
            |z| rho(z).powi(n as i32) * self.nu_density(z),
            lo,
            hi,
            1e-10,
        )?;
        Ok(q.value / self.xi)
    }

    /// Mass above layer `n_cap` (analytic geometric tail on the eventual
    /// layer support).
    pub fn queue_tail(&self, n_cap: u32) -> Result<f64> {
        let (lo, hi) = self.layer_support(u32::MAX);
        let rho = &self.rho;
        let q = quad::integrate(
            |z| {
                let r = rho(z);
                r.powi(n_cap as i32 + 1) / (1.0 - r) * self.nu_density(z)
            },
            lo,
            hi,
            1e-10,
        )?;
        Ok(q.value / self.xi)
    }

    /// Closed-form cell masses on the empirical grid: layers `0..=n_cap`
    /// binned over the full domain, plus the `n > n_cap` overflow as a final
    /// z-resolved row with its exact geometric-tail density
    /// `rho^(n_cap+1)/(1-rho) nu / Xi`.
    pub fn cell_masses(&self, n_cap: u32, bins: usize) -> Result<Vec<f64>> {
        let width = (self.hi - self.lo) / bins as f64;
        let layers = n_cap as usize + 2;
        let mut out = vec![0.0f64; layers * bins];
        for n in 0..=n_cap {
            let (slo, shi) = self.layer_support(n);
            for b in 0..bins {
                let a = (self.lo + b as f64 * width).max(slo);
                let c = (self.lo + (b + 1) as f64 * width).min(shi);
                if c <= a {
                    continue;
                }
                let rho = &self.rho;
                let q =
                    quad::integrate(|z| rho(z).powi(n as i32) * self.nu_density(z), a, c, 1e-10)?;
                out[n as usize * bins + b] = q.value / self.xi;
            }
        }
        let (slo, shi) = self.layer_support(u32::MAX);
        for b in 0..bins {
            let a = (self.lo + b as f64 * width).max(slo);
            let c = (self.lo + (b + 1) as f64 * width).min(shi);
            if c <= a {
                continue;
            }
            let rho = &self.rho;
            let q = quad::integrate(
                |z| {
                    let r = rho(z);
                    r.powi(n_cap as i32 + 1) / (1.0 - r) * self.nu_density(z)
                },
                a,
                c,
                1e-10,
            )?;
            out[(n_cap as usize + 1) * bins + b] = q.value / self.xi;
        }
        Ok(out)
    }
}

/// Build the closed-form law for a 1-D diffusive environment spec
/// (multiplicative or threshold). `Xi` is cross-checked along both routes.
pub fn joint_invariant_1d(spec: &DiffusionEnvSpec) -> Result<StationaryLaw> {
    let (lo, hi) = spec.domain.bounds_1d()?;
    let drift = spec.drift.clone();
    let diff = spec.diffusion.clone();
    let nu = stationary_density_1d(
        move |z| diff.at([z, 0.0]),
        move |z| drift.at([z, 0.0])[0],
        lo,
        hi,
    )?;
    let nu_norm = nu.normalizer.ok_or_else(|| {
        Error::Divergence("environment stationary density not normalizable".into())
    })?;
    let rates = spec.rates.clone();
    let rho = Box::new(move |z: f64| rates.eval([z, 0.0]).map(|r| r.2).unwrap_or(1.0));

    // rho_bar over the eventual layer support, for series truncation.
    let (tlo, thi) = match &spec.threshold {
        Some(th) => (th.restricted_lo, th.restricted_hi),
        None => (lo, hi),
    };
    let mut rho_bar = 0.0f64;
    for k in 0..=512 {
        let z = tlo + (thi - tlo) * k as f64 / 512.0;
        rho_bar = rho_bar.max(rho(z));
    }
    if rho_bar >= 1.0 {
        // Intensity touches 1 on the eventual support: detect divergence via
        // the direct route below (capped domains keep this off the path).
        rho_bar = 1.0 - 1e-12;
    }

    let nu_at = |z: f64| nu.q(z).map(|q| q / nu_norm).unwrap_or(f64::NAN);

    // Route A: 1/(1-rho) integral per level region.
    let direct = {
        let head: f64 = match &spec.threshold {
            Some(th) => {
                let mut acc = 0.0;
                for n in 0..th.n0 {
                    acc +=
                        quad::integrate(|z| rho(z).powi(n as i32) * nu_at(z), lo, hi, 1e-10)?.value;
                }
                let tail_start = th.n0;
                let q = quad::integrate(
                    |z| {
                        let r = rho(z);
                        r.powi(tail_start as i32) / (1.0 - r) * nu_at(z)
                    },
                    th.restricted_lo,
                    th.restricted_hi,
                    1e-10,
                )?;
                acc + q.value
            }
            None => quad::integrate(|z| nu_at(z) / (1.0 - rho(z)), lo, hi, 1e-10)?.value,
        };
        head
    };
    if !direct.is_finite() {
        return Err(Error::Divergence("Xi overflowed f64".into()));
    }

    // Route B: truncated series with analytic geometric tail.
    let n_terms = series_len(rho_bar);
    let series = {
        let mut acc = 0.0;
        for n in 0..=n_terms {
            let (slo, shi) = match &spec.threshold {
                Some(th) => th.domain_at(n, (lo, hi)),
                None => (lo, hi),
            };
            acc += quad::integrate(|z| rho(z).powi(n as i32) * nu_at(z), slo, shi, 1e-10)?.value;
        }
        let (slo, shi) = match &spec.threshold {
            Some(th) => (th.restricted_lo, th.restricted_hi),
            None => (lo, hi),
        };
        acc += quad::integrate(
            |z| {
                let r = rho(z);
                r.powi(n_terms as i32 + 1) / (1.0 - r) * nu_at(z)
            },
            slo,
            shi,
            1e-10,
        )?
        .value;
        acc
    };
    cross_check(direct, series, "diffusive Xi")?;

    Ok(StationaryLaw {
        xi: direct,
        lo,
        hi,
        rho_bar,
        threshold: spec.threshold.clone(),
        nu,
        nu_norm,
        rho,
    })
}

/// Total variation distance `0.5 * sum |p - q|` over a common partition.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::MismatchedPartitions(format!(
            "{} cells vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
}

/// One bin's conditional-geometric slope diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct LayerRatioFit {
    pub bin_center: f64,
    pub fitted_log_ratio: f64,
    pub expected_log_rho: f64,
    pub layers_used: usize,
    pub visits: f64,
}

/// Empirical-vs-analytic comparison report.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub global_tv: f64,
    pub per_layer_tv: Vec<f64>,
    pub layer_ratio: Vec<LayerRatioFit>,
    /// Fraction of time frozen outside the active sub-domain (threshold).
    pub frozen_fraction: f64,
}

/// Compare a simulated occupation against the closed-form law on the same
/// grid. In threshold mode the comparison restricts to the active
/// sub-domains (the law's support) and reports frozen mass separately.
pub fn compare_empirical(law: &StationaryLaw, path: &JointPath) -> Result<CompareReport> {
    let occ = occupation_summary(path)?;
    if (occ.coord_lo - law.lo).abs() > 1e-12 || (occ.coord_hi - law.hi).abs() > 1e-12 {
        return Err(Error::MismatchedPartitions(
            "occupation grid does not cover the law's domain".into(),
        ));
    }
    let frozen_fraction: f64 = occ.frozen_fractions.iter().sum();
    let closed = law.cell_masses(occ.n_cap, occ.bins)?;

    // Renormalize the empirical mass over the law's support.
    let total: f64 = occ.fractions.iter().sum();
    let emp: Vec<f64> = occ.fractions.iter().map(|f| f / total).collect();

    let global_tv = tv_distance(&emp, &closed)?;
    let layers = occ.n_cap as usize + 2;
    let mut per_layer_tv = Vec::with_capacity(layers);
    for l in 0..layers {
        let a = &emp[l * occ.bins..(l + 1) * occ.bins];
        let b = &closed[l * occ.bins..(l + 1) * occ.bins];
        per_layer_tv.push(tv_distance(a, b)?);
    }

    // Conditional geometric check: log occupation should drop by log rho per
    // layer within each bin.
    let accumulated_steps = path.steps as f64 * (1.0 - path.burn_in / path.t_end).max(0.0);
    let width = (law.hi - law.lo) / occ.bins as f64;
    let mut layer_ratio = Vec::new();
    for b in 0..occ.bins {
        let center = law.lo + (b as f64 + 0.5) * width;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut visits = 0.0;
        for n in 0..=occ.n_cap {
            let (slo, shi) = law.layer_support(n);
            if center < slo || center > shi {
                break;
            }
            let f = emp[n as usize * occ.bins + b];
            let v = f * total * accumulated_steps;
            // Step-visits decorrelate over ~10 steps at these speeds, so
            // 1e4 step-visits make roughly 1e3 effective ones.
            if f > 0.0 && v >= 10_000.0 {
                xs.push(n as f64);
                ys.push(f.ln());
                visits += v;
            } else {
                break;
            }
        }
        if xs.len() >= 3 {
            let npt = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / npt;
            let my = ys.iter().sum::<f64>() / npt;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            layer_ratio.push(LayerRatioFit {
                bin_center: center,
                fitted_log_ratio: sxy / sxx,
                expected_log_rho: law.layer_ratio(center).ln(),
                layers_used: xs.len(),
                visits,
            });
        }
    }

    Ok(CompareReport {
        global_tv,
        per_layer_tv,
        layer_ratio,
        frozen_fraction,
    })
}

/// Per-face boundary-measure estimates binned by queue level, on both clocks.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryEstimate {
    /// Physical local time per unit accumulated time, per face and layer.
    pub physical: Vec<Vec<f64>>,
    /// Local time on the intrinsic (speed-divided) clock per unit time; its
    /// level profile follows `rho(z_face)^n`.
    pub intrinsic: Vec<Vec<f64>>,
    pub accumulated_time: f64,
}

/// Time-averaged local-time increments binned by the queue level current
/// when they accrued. Errors when the path never touched a face.
pub fn boundary_measure_estimate(path: &JointPath) -> Result<BoundaryEstimate> {
    let acc = path.accumulated();
    if acc <= 0.0 {
        return Err(Error::InsufficientData("no accumulated time".into()));
    }
    let touched: f64 = path.ell_by_level.iter().flatten().sum();
    if touched == 0.0 {
        return Err(Error::InsufficientData(
            "no boundary contact observed; interior-only path".into(),
        ));
    }
    let scale = |vv: &Vec<Vec<f64>>| {
        vv.iter()
            .map(|per_level| per_level.iter().map(|x| x / acc).collect())
            .collect()
    };
    Ok(BoundaryEstimate {
        physical: scale(&path.ell_by_level),
        intrinsic: scale(&path.ell_intrinsic_by_level),
        accumulated_time: acc,
    })
}
