//! Operator-split simulation of the joint process `(N, Z)` with a diffusive
//! environment.
//!
//! Each step of length `dt`:
//! 1. the environment makes one reflected Euler step at speed
//!    `beta_n rho(z)^-n` (skipped entirely in threshold mode while `z`
//!    sits outside the active sub-domain `D_n`),
//! 2. an optional thinned jump relocates the environment,
//! 3. the queue moves by `+1` with probability `lambda(z) dt` or by `-1`
//!    with probability `mu(z) dt` (if `n > 0`), mutually exclusively.
//!
//! Queue and environment never move in the same sub-step of the splitting,
//! matching the no-simultaneous-jumps structure of the generator. Occupation
//! mass is accumulated per `(n, z-bin)` cell after a burn-in fraction, split
//! into two halves so stationarity can be sanity-checked; boundary local
//! times are accumulated per face and queue level on both the physical clock
//! and the intrinsic (speed-divided) clock.

use crate::env::{DiffusionEnvSpec, DomainSpec};
use crate::error::{Error, Result};
use crate::sde;
use crate::seed::replica_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Joint queue/environment state.
#[derive(Debug, Clone)]
pub struct JointState {
    pub n: u32,
    pub z: [f64; 2],
    pub t: f64,
    pub ell: Vec<f64>,
}

/// Simulation options shared by both joint simulators.
#[derive(Debug, Clone)]
pub struct JointSimOptions {
    /// Occupation rows cover `0..=n_cap`, plus one overflow row.
    pub n_cap: u32,
    /// Number of z-bins (over `z[0]` in 1-D, over `rho(z)` for polygons).
    pub bins: usize,
    /// Fraction of the horizon discarded before accumulating.
    pub burn_in_frac: f64,
    /// Record `(t, n)` at every queue transition.
    pub record_events: bool,
}

impl Default for JointSimOptions {
    fn default() -> Self {
        Self {
            n_cap: 12,
            bins: 30,
            burn_in_frac: 0.2,
            record_events: false,
        }
    }
}

/// Accumulated output of one joint run.
#[derive(Debug, Clone)]
pub struct JointPath {
    pub n_cap: u32,
    pub bins: usize,
    /// Binned coordinate range (z in 1-D, rho for polygons).
    pub coord_lo: f64,
    pub coord_hi: f64,
    /// Post-burn-in time mass per `(layer, bin)`; layer `n_cap + 1` collects
    /// the queue overflow.
    pub occupation: Vec<f64>,
    /// Same mass split into the first and second half of the accumulation
    /// window (stationarity split test).
    pub occupation_halves: [Vec<f64>; 2],
    /// Threshold mode: time per layer spent with `z` frozen outside `D_n`.
    pub frozen_occupation: Vec<f64>,
    /// Threshold mode: the largest environment displacement observed on a
    /// frozen step. The freezing rule makes this exactly zero.
    pub frozen_max_displacement: f64,
    /// Physical boundary local time per `(face, layer)`.
    pub ell_by_level: Vec<Vec<f64>>,
    /// Local time on the intrinsic clock: increments divided by the speed
    /// factor `beta_n rho(z_face)^-n` in force when they accrued.
    pub ell_intrinsic_by_level: Vec<Vec<f64>>,
    /// Queue transition log `(t, new n, z)` when requested (first replica
    /// only after a merge).
    pub events: Vec<(f64, u32, f64)>,
    pub t_end: f64,
    pub burn_in: f64,
    pub steps: u64,
    /// Final state, for chaining runs.
    pub final_state: JointState,
}

impl JointPath {
    /// Total accumulated (post-burn-in) time.
    pub fn accumulated(&self) -> f64 {
        self.occupation.iter().sum::<f64>() + self.frozen_occupation.iter().sum::<f64>()
    }

    /// Merge another replica's accumulators into this one.
    pub fn merge(&mut self, other: &JointPath) {
        assert_eq!(self.occupation.len(), other.occupation.len());
        for (a, b) in self.occupation.iter_mut().zip(&other.occupation) {
            *a += b;
        }
        for h in 0..2 {
            for (a, b) in self.occupation_halves[h]
                .iter_mut()
                .zip(&other.occupation_halves[h])
            {
                *a += b;
            }
        }
        for (a, b) in self
            .frozen_occupation
            .iter_mut()
            .zip(&other.frozen_occupation)
        {
            *a += b;
        }
        self.frozen_max_displacement = self
            .frozen_max_displacement
            .max(other.frozen_max_displacement);
        for (fa, fb) in self.ell_by_level.iter_mut().zip(&other.ell_by_level) {
            for (a, b) in fa.iter_mut().zip(fb) {
                *a += b;
            }
        }
        for (fa, fb) in self
            .ell_intrinsic_by_level
            .iter_mut()
            .zip(&other.ell_intrinsic_by_level)
        {
            for (a, b) in fa.iter_mut().zip(fb) {
                *a += b;
            }
        }
        self.t_end += other.t_end;
        self.burn_in += other.burn_in;
        self.steps += other.steps;
    }
}

/// Multiplicative model: environment diffuses on the full domain at speed
/// `beta_n rho(z)^-n`.
pub fn simulate_joint(
    spec: &DiffusionEnvSpec,
    x0: (u32, [f64; 2]),
    horizon: f64,
    dt: f64,
    seed: u64,
    opts: &JointSimOptions,
) -> Result<JointPath> {
    run_joint(spec, x0, horizon, dt, seed, opts, false)
}

/// Threshold model: the environment diffuses inside `D_n` (reflected at its
/// boundary) and is frozen outside it.
pub fn simulate_joint_threshold(
    spec: &DiffusionEnvSpec,
    x0: (u32, [f64; 2]),
    horizon: f64,
    dt: f64,
    seed: u64,
    opts: &JointSimOptions,
) -> Result<JointPath> {
    if spec.threshold.is_none() {
        return Err(Error::Precondition(
            "threshold simulation needs a threshold section in the spec".into(),
        ));
    }
    run_joint(spec, x0, horizon, dt, seed, opts, true)
}

#[allow(clippy::too_many_arguments)]
fn run_joint(
    spec: &DiffusionEnvSpec,
    x0: (u32, [f64; 2]),
    horizon: f64,
    dt: f64,
    seed: u64,
    opts: &JointSimOptions,
    threshold_mode: bool,
) -> Result<JointPath> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::Precondition("need horizon > 0 and dt > 0".into()));
    }
    if opts.burn_in_frac >= 0.9 {
        return Err(Error::Precondition(
            "burn-in would remove more than 90% of the path".into(),
        ));
    }
    if opts.bins == 0 {
        return Err(Error::Precondition("need at least one z-bin".into()));
    }
    let dim = spec.domain.dim();
    let is_polygon = matches!(spec.domain, DomainSpec::Polygon { .. });
    if threshold_mode && is_polygon {
        return Err(Error::Precondition(
            "threshold sub-domains are interval-only".into(),
        ));
    }
    let (coord_lo, coord_hi) = if is_polygon {
        (0.0, 1.0) // rho-binning
    } else {
        spec.domain.bounds_1d()?
    };
    let full_bounds = (coord_lo, coord_hi);
    // Queue thinning validity.
    let mu_probe = probe_mu_max(spec)?;
    if (spec.rates.lambda_bar + mu_probe) * dt > 0.1 {
        return Err(Error::Precondition(format!(
            "(lambda_bar + mu_max) * dt = {} exceeds 0.1; shrink dt",
            (spec.rates.lambda_bar + mu_probe) * dt
        )));
    }
    if !spec.domain.contains(x0.1) {
        return Err(Error::DomainViolation {
            point: x0.1,
            detail: "initial environment state outside domain".into(),
        });
    }

    let faces = spec.domain.faces();
    let layers = opts.n_cap as usize + 2;
    let mut rng = replica_rng(seed, 0);
    let mut state = JointState {
        n: x0.0,
        z: x0.1,
        t: 0.0,
        ell: vec![0.0; faces],
    };
    let steps = (horizon / dt) as u64;
    let burn_steps = (steps as f64 * opts.burn_in_frac) as u64;
    let half_steps = burn_steps + (steps - burn_steps) / 2;

    let mut occupation = vec![0.0f64; layers * opts.bins];
    let mut halves = [
        vec![0.0f64; layers * opts.bins],
        vec![0.0f64; layers * opts.bins],
    ];
    let mut frozen_occupation = vec![0.0f64; layers];
    let mut frozen_max_displacement = 0.0f64;
    let mut ell_by_level = vec![vec![0.0f64; layers]; faces];
    let mut ell_intrinsic = vec![vec![0.0f64; layers]; faces];
    let mut events = Vec::new();

    // rho at the interval faces, for the intrinsic local-time clock.
    let face_rho: Vec<f64> = if is_polygon {
        vec![0.0; faces]
    } else {
        [coord_lo, coord_hi]
            .iter()
            .map(|&zf| spec.rates.eval([zf, 0.0]).map(|r| r.2).unwrap_or(0.0))
            .collect()
    };

    let bin_width = (coord_hi - coord_lo) / opts.bins as f64;

    for k in 0..steps {
        let (lambda, mu, rho) = spec.rates.eval(state.z)?;
        let layer = (state.n.min(opts.n_cap + 1)) as usize;
        let recording = k >= burn_steps;

        let frozen = if threshold_mode {
            let th = spec.threshold.as_ref().expect("checked above");
            !th.contains(state.n, full_bounds, state.z[0])
        } else {
            false
        };

        // Occupation is attributed to the state at the start of the step.
        if recording {
            if !frozen {
                let coord = if is_polygon { rho } else { state.z[0] };
                let bin = (((coord - coord_lo) / bin_width) as usize).min(opts.bins - 1);
                let cell = layer * opts.bins + bin;
                occupation[cell] += dt;
                let h = if k < half_steps { 0 } else { 1 };
                halves[h][cell] += dt;
            } else {
                frozen_occupation[layer] += dt;
            }
        }

        // (1) environment step
        let scale = spec.speed(state.n, rho);
        let frozen_z_before = if frozen { Some(state.z[0]) } else { None };
        if frozen {
            // Environment untouched while outside the active sub-domain; the
            // displacement is re-measured at the end of the step so the
            // freezing contract stays checkable.
        } else if is_polygon {
            let xi: f64 = rng.sample(StandardNormal);
            let eta: f64 = rng.sample(StandardNormal);
            let mut tmp = sde::SdeState {
                z: state.z,
                ell: std::mem::take(&mut state.ell),
                t: state.t,
            };
            let ell_before: Vec<f64> = tmp.ell.clone();
            sde::step_reflected(spec, &mut tmp, dt, scale, [xi, eta])?;
            state.z = tmp.z;
            state.ell = tmp.ell;
            for f in 0..faces {
                let inc = state.ell[f] - ell_before[f];
                if inc > 0.0 && recording {
                    ell_by_level[f][layer] += inc;
                    // Intrinsic clock uses rho at the current point for want
                    // of a face parametrization.
                    let intrinsic = inc * rho.powi(state.n as i32) / spec.beta.at(state.n);
                    ell_intrinsic[f][layer] += intrinsic;
                }
            }
        } else {
            let (lo, hi) = if threshold_mode {
                let th = spec.threshold.as_ref().expect("checked above");
                th.domain_at(state.n, full_bounds)
            } else {
                full_bounds
            };
            let rates = &spec.rates;
            let out = sde::env_step_adaptive(
                spec,
                lo,
                hi,
                state.n,
                |z| rates.eval([z, 0.0]).map(|r| r.2).unwrap_or(1.0),
                dt,
                state.z[0],
                &mut rng,
            );
            state.z[0] = out.z;
            state.ell[0] += out.ell_lo;
            state.ell[1] += out.ell_hi;
            if recording {
                for (f, inc) in [(0usize, out.ell_lo), (1usize, out.ell_hi)] {
                    if inc > 0.0 {
                        ell_by_level[f][layer] += inc;
                        let intrinsic =
                            inc * face_rho[f].powi(state.n as i32) / spec.beta.at(state.n);
                        ell_intrinsic[f][layer] += intrinsic;
                    }
                }
            }
            // (2) jump component, thinned; in threshold mode the landing is
            // constrained to the active sub-domain.
            if spec.jumps.is_some() && !frozen {
                if let Some(landing) = sde::sample_jump(spec, state.z, scale, dt, &mut rng)? {
                    if threshold_mode {
                        if landing[0] >= lo && landing[0] <= hi {
                            state.z = landing;
                        }
                    } else {
                        state.z = landing;
                    }
                }
            }
        }
        if !state.z[0].is_finite() || (dim == 2 && !state.z[1].is_finite()) {
            return Err(Error::NonFiniteState {
                t: state.t,
                detail: format!("environment state {:?} (queue level {})", state.z, state.n),
            });
        }

        // (3) queue thinning: up / down / stay, mutually exclusive.
        let u: f64 = rng.gen();
        let p_up = lambda * dt;
        let p_down = if state.n > 0 { mu * dt } else { 0.0 };
        if u < p_up {
            state.n += 1;
            if opts.record_events {
                events.push((state.t + dt, state.n, state.z[0]));
            }
        } else if u < p_up + p_down {
            state.n -= 1;
            if opts.record_events {
                events.push((state.t + dt, state.n, state.z[0]));
            }
        }
        if let Some(zb) = frozen_z_before {
            frozen_max_displacement = frozen_max_displacement.max((state.z[0] - zb).abs());
        }
        state.t += dt;
    }

    Ok(JointPath {
        n_cap: opts.n_cap,
        bins: opts.bins,
        coord_lo,
        coord_hi,
        occupation,
        occupation_halves: halves,
        frozen_occupation,
        frozen_max_displacement,
        ell_by_level,
        ell_intrinsic_by_level: ell_intrinsic,
        events,
        t_end: horizon,
        burn_in: burn_steps as f64 * dt,
        steps,
        final_state: state,
    })
}

fn probe_mu_max(spec: &DiffusionEnvSpec) -> Result<f64> {
    // The thinning condition needs an upper bound on mu over the domain;
    // probe the named rate functions on a coarse grid.
    let mut mu_max = spec.rates.mu_bar;
    let mut rng = replica_rng(0x9e37_79b9_7f4a_7c15, 0);
    for _ in 0..256 {
        let z = spec.domain.sample_uniform(&mut rng);
        if let Ok(mu) = spec.rates.mu.at_point(z) {
            mu_max = mu_max.max(mu);
        }
    }
    Ok(mu_max)
}

/// Run independent replicas in parallel and merge their accumulators.
/// Replica `i` uses the RNG stream derived from `(root_seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn run_replicas(
    spec: &DiffusionEnvSpec,
    x0: (u32, [f64; 2]),
    horizon: f64,
    dt: f64,
    root_seed: u64,
    replicas: u32,
    opts: &JointSimOptions,
    threshold_mode: bool,
) -> Result<JointPath> {
    if replicas == 0 {
        return Err(Error::Precondition("need at least one replica".into()));
    }
    let paths: Vec<Result<JointPath>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let seed = root_replica_seed(root_seed, i);
            run_joint(spec, x0, horizon, dt, seed, opts, threshold_mode)
        })
        .collect();
    let mut merged: Option<JointPath> = None;
    for p in paths {
        let p = p?;
        match &mut merged {
            None => merged = Some(p),
            Some(m) => m.merge(&p),
        }
    }
    Ok(merged.expect("replicas >= 1"))
}

/// Replica seed derivation: documented splitting of the root seed.
pub fn root_replica_seed(root: u64, replica: u32) -> u64 {
    use rand::RngCore;
    replica_rng(root, replica as u64).next_u64()
}

/// Time-fraction summary of a joint path.
#[derive(Debug, Clone)]
pub struct OccupationMatrix {
    pub n_cap: u32,
    pub bins: usize,
    pub coord_lo: f64,
    pub coord_hi: f64,
    /// Fractions per `(layer, bin)`, summing to 1 together with
    /// `frozen_fractions`.
    pub fractions: Vec<f64>,
    /// Threshold mode: fraction per layer spent frozen outside `D_n`.
    pub frozen_fractions: Vec<f64>,
}

impl OccupationMatrix {
    pub fn layer_mass(&self, layer: usize) -> f64 {
        self.fractions[layer * self.bins..(layer + 1) * self.bins]
            .iter()
            .sum()
    }

    /// Masses per layer `0..=n_cap` plus the overflow row, excluding frozen
    /// time.
    pub fn layer_masses(&self) -> Vec<f64> {
        (0..self.n_cap as usize + 2)
            .map(|l| self.layer_mass(l))
            .collect()
    }

    /// Layer masses renormalized over the non-frozen time only.
    pub fn layer_masses_renormalized(&self) -> Vec<f64> {
        let mut m = self.layer_masses();
        let s: f64 = m.iter().sum();
        if s > 0.0 {
            for x in &mut m {
                *x /= s;
            }
        }
        m
    }
}

/// Convert accumulated time mass to fractions. Errors if less than 10% of
/// the horizon survived burn-in.
pub fn occupation_summary(path: &JointPath) -> Result<OccupationMatrix> {
    let acc = path.accumulated();
    if acc < 0.1 * path.t_end {
        return Err(Error::InsufficientData(format!(
            "only {acc:.3} of {:.3} time units survived burn-in",
            path.t_end
        )));
    }
    let total = acc;
    Ok(OccupationMatrix {
        n_cap: path.n_cap,
        bins: path.bins,
        coord_lo: path.coord_lo,
        coord_hi: path.coord_hi,
        fractions: path.occupation.iter().map(|m| m / total).collect(),
        frozen_fractions: path.frozen_occupation.iter().map(|m| m / total).collect(),
    })
}

/// Summaries of the two post-burn-in halves, for the stationarity split test.
pub fn occupation_halves(path: &JointPath) -> Result<[OccupationMatrix; 2]> {
    let halves = &path.occupation_halves;
    let mut out = Vec::new();
    for h in halves {
        let total: f64 = h.iter().sum();
        if total <= 0.0 {
            return Err(Error::InsufficientData("empty half-path".into()));
        }
        out.push(OccupationMatrix {
            n_cap: path.n_cap,
            bins: path.bins,
            coord_lo: path.coord_lo,
            coord_hi: path.coord_hi,
            fractions: h.iter().map(|m| m / total).collect(),
            frozen_fractions: vec![0.0; path.n_cap as usize + 2],
        });
    }
    Ok([out.remove(0), out.remove(0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn quick_opts() -> JointSimOptions {
        JointSimOptions {
            n_cap: 8,
            bins: 10,
            burn_in_frac: 0.2,
            record_events: false,
        }
    }

    #[test]
    fn queue_frozen_when_no_arrivals() {
        // lambda == 0: N stays at 0 and the environment alone fills the
        // occupation at layer 0.
        let mut spec = builtins::case_a_rbm_arrival();
        spec.rates = crate::rates::RateField::new(
            crate::rates::RateFn::Constant { value: 0.0 },
            crate::rates::RateFn::Constant { value: 1.0 },
            1e-9,
            1.0,
        )
        .unwrap();
        let path = simulate_joint(&spec, (0, [0.45, 0.0]), 2000.0, 1e-3, 5, &quick_opts()).unwrap();
        let occ = occupation_summary(&path).unwrap();
        assert!((occ.layer_mass(0) - 1.0).abs() < 1e-12);
        // Layer-0 environment marginal is uniform on [0, 0.9].
        let expect = 1.0 / 10.0;
        for b in 0..10 {
            let got = occ.fractions[b];
            assert!((got - expect).abs() < 0.03, "bin {b}: {got}");
        }
    }

    #[test]
    fn constant_rates_give_geometric_marginal() {
        // lambda = 0.5, mu = 1 with a decoupled environment: N is a plain
        // birth-death chain with geometric stationary law.
        let mut spec = builtins::case_a_rbm_arrival();
        spec.rates = crate::rates::RateField::new(
            crate::rates::RateFn::Constant { value: 0.5 },
            crate::rates::RateFn::Constant { value: 1.0 },
            0.5,
            1.0,
        )
        .unwrap();
        let opts = JointSimOptions {
            n_cap: 14,
            ..quick_opts()
        };
        let path =
            run_replicas(&spec, (0, [0.45, 0.0]), 8000.0, 1e-3, 11, 4, &opts, false).unwrap();
        let occ = occupation_summary(&path).unwrap();
        let masses = occ.layer_masses();
        let mut tv = 0.0;
        for (n, mass) in masses.iter().enumerate().take(15) {
            let expect = 0.5f64.powi(n as i32) * 0.5;
            tv += (mass - expect).abs();
        }
        tv += (masses[15] - 0.5f64.powi(15)).abs();
        tv /= 2.0;
        assert!(tv <= 0.02, "tv {tv}");
    }

    #[test]
    fn determinism_same_seed() {
        let spec = builtins::case_a_rbm_arrival();
        let a = simulate_joint(&spec, (0, [0.45, 0.0]), 50.0, 1e-3, 9, &quick_opts()).unwrap();
        let b = simulate_joint(&spec, (0, [0.45, 0.0]), 50.0, 1e-3, 9, &quick_opts()).unwrap();
        assert_eq!(a.occupation, b.occupation);
        assert_eq!(a.final_state.z, b.final_state.z);
        assert_eq!(a.final_state.n, b.final_state.n);
    }

    #[test]
    fn threshold_freeze_is_exact() {
        let spec = builtins::ex31_threshold(0.5, 3);
        let path =
            simulate_joint_threshold(&spec, (0, [0.7, 0.0]), 3000.0, 1e-3, 13, &quick_opts())
                .unwrap();
        assert_eq!(path.frozen_max_displacement, 0.0);
        // Frozen time must actually occur in this parametrization.
        assert!(path.frozen_occupation.iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn burn_in_guard() {
        let spec = builtins::case_a_rbm_arrival();
        let opts = JointSimOptions {
            burn_in_frac: 0.95,
            ..quick_opts()
        };
        assert!(simulate_joint(&spec, (0, [0.4, 0.0]), 10.0, 1e-3, 1, &opts).is_err());
    }

    #[test]
    fn dt_too_coarse_rejected() {
        let spec = builtins::case_a_rbm_arrival();
        let e = simulate_joint(&spec, (0, [0.4, 0.0]), 10.0, 0.2, 1, &quick_opts()).unwrap_err();
        assert!(matches!(e, Error::Precondition(_)));
    }

    #[test]
    fn halves_agree_after_burn_in() {
        let spec = builtins::case_a_rbm_arrival();
        let opts = JointSimOptions {
            n_cap: 10,
            bins: 12,
            burn_in_frac: 0.2,
            record_events: false,
        };
        let path =
            run_replicas(&spec, (0, [0.45, 0.0]), 10_000.0, 1e-3, 17, 4, &opts, false).unwrap();
        let [h1, h2] = occupation_halves(&path).unwrap();
        let tv: f64 = h1
            .fractions
            .iter()
            .zip(&h2.fractions)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.08, "halves differ by tv {tv}");
    }
}
