//! Statistical checks of the reflected-diffusion machinery against closed
//! forms and synthetic oracles.

use envqueue_core::builtins;
use envqueue_core::density::stationary_density_1d;
use envqueue_core::env::DomainSpec;
use envqueue_core::fit::fit_coupling_constants;
use envqueue_core::rates::{RateField, RateFn};
use envqueue_core::sde::{couple_1d, env_occupation_1d, sample_jump, step_interval};
use envqueue_core::seed::replica_rng;
use envqueue_core::stationary::tv_distance;
use rand::Rng;
use rayon::prelude::*;

/// Driftless reflected Brownian motion on [0,1] occupies uniformly.
#[test]
fn rbm_occupation_uniform() {
    let spec = builtins::jumpy_interval(0.0);
    let occ = env_occupation_1d(&spec, 10_000.0, 1e-3, 50, 77, 0.1).unwrap();
    let uniform = vec![1.0 / 50.0; 50];
    let tv = tv_distance(&occ.fractions, &uniform).unwrap();
    assert!(tv <= 0.02, "tv {tv}");
}

/// Power-law stationary density of the reciprocal drift, against the
/// closed-form bin masses.
#[test]
fn theta_drift_histogram_matches_density() {
    let spec = builtins::theta_drift(0.25);
    let bins = 25;
    let paths: Vec<_> = (0..4u64)
        .into_par_iter()
        .map(|rep| env_occupation_1d(&spec, 5000.0, 2.5e-4, bins, 100 + rep, 0.1).unwrap())
        .collect();
    let mut merged = vec![0.0f64; bins];
    for p in &paths {
        for (m, f) in merged.iter_mut().zip(&p.fractions) {
            *m += f / paths.len() as f64;
        }
    }
    let density = stationary_density_1d(|_| 1.0, |z| 0.25 / (1.0 - z), 0.0, 0.95).unwrap();
    let expect = density.bin_masses(bins).unwrap();
    let tv = tv_distance(&merged, &expect).unwrap();
    assert!(tv <= 0.03, "tv {tv}");
}

/// Halving dt moves the occupation against the closed form by less than the
/// Monte Carlo band.
#[test]
fn step_size_robustness() {
    let spec = builtins::jumpy_interval(0.0);
    let uniform = vec![1.0 / 30.0; 30];
    let coarse = env_occupation_1d(&spec, 4000.0, 2e-3, 30, 5, 0.1).unwrap();
    let fine = env_occupation_1d(&spec, 4000.0, 1e-3, 30, 5, 0.1).unwrap();
    let tv_coarse = tv_distance(&coarse.fractions, &uniform).unwrap();
    let tv_fine = tv_distance(&fine.fractions, &uniform).unwrap();
    // MC band for a 30-bin histogram at this horizon is ~0.02.
    assert!(
        (tv_coarse - tv_fine).abs() <= 0.02,
        "coarse {tv_coarse} vs fine {tv_fine}"
    );
}

/// Thinned jumps: inter-jump times follow Exp(rate * scale) within a small
/// Kolmogorov-Smirnov distance.
#[test]
fn jump_thinning_exponential() {
    let rate = 0.5;
    let spec = builtins::jumpy_interval(rate);
    let dt = 1e-3;
    let mut rng = replica_rng(31, 0);
    let mut z = 0.5f64;
    let mut gaps = Vec::with_capacity(10_000);
    let mut since = 0.0f64;
    while gaps.len() < 10_000 {
        let xi: f64 = rng.sample(rand_distr::StandardNormal);
        z = step_interval(0.0, 1.0, 0.0, 1.0, 1.0, dt, xi, z).z;
        since += dt;
        if let Some(landing) = sample_jump(&spec, [z, 0.0], 1.0, dt, &mut rng).unwrap() {
            z = landing[0];
            gaps.push(since);
            since = 0.0;
        }
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = gaps.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, t) in gaps.iter().enumerate() {
        let f = 1.0 - (-rate * t).exp();
        let hi = (i as f64 + 1.0) / n;
        let lo = i as f64 / n;
        ks = ks.max((f - hi).abs()).max((f - lo).abs());
    }
    assert!(ks <= 0.02, "KS distance {ks}");
}

/// Coupling-time tail of the shared-noise pair from opposite endpoints:
/// exponential with a clean regression fit.
#[test]
fn couple_1d_tail_is_exponential() {
    let mut spec = builtins::jumpy_interval(0.0);
    spec.domain = DomainSpec::Interval { lo: 0.0, hi: 1.0 };
    let samples: Vec<f64> = (0..1500u64)
        .into_par_iter()
        .map(|k| {
            let out = couple_1d(&spec, 0.0, 1.0, 4000.0, 1e-3, 9000 + k).unwrap();
            assert!(out.coupled, "seed {k} did not couple");
            out.tau
        })
        .collect();
    let fit = fit_coupling_constants(&samples).unwrap();
    assert!(fit.r_squared >= 0.98, "r^2 {}", fit.r_squared);
    assert!(fit.gamma > 0.0 && fit.alpha >= 1.0);
}

/// Driftless reflected Brownian motion pushes equally at both faces.
#[test]
fn rbm_local_time_symmetric() {
    let spec = builtins::jumpy_interval(0.0);
    let occ = env_occupation_1d(&spec, 20_000.0, 1e-3, 10, 3, 0.1).unwrap();
    let (lo, hi) = (occ.ell[0], occ.ell[1]);
    assert!(lo > 0.0 && hi > 0.0);
    let ratio = lo / hi;
    assert!(
        (ratio - 1.0).abs() <= 0.1,
        "face rates {lo:.3} vs {hi:.3} (ratio {ratio:.3})"
    );
}

/// Case (b): reflected Brownian service rate on a capped ray; occupation is
/// uniform on [lo, cap] and the queue marginal follows the mixed geometric
/// law.
#[test]
fn case_b_env_occupation_uniform() {
    let spec = builtins::case_b_rbm_service();
    let occ = env_occupation_1d(&spec, 8000.0, 1e-3, 20, 21, 0.1).unwrap();
    let uniform = vec![1.0 / 20.0; 20];
    let tv = tv_distance(&occ.fractions, &uniform).unwrap();
    assert!(tv <= 0.03, "tv {tv}");
}

/// Rate-bound violations surface as errors rather than silent clamping.
#[test]
fn bound_violation_is_loud() {
    let rf = RateField::new(
        RateFn::Linear {
            coord: 0,
            slope: 1.0,
            intercept: 0.0,
        },
        RateFn::Constant { value: 1.0 },
        0.5,
        1.0,
    )
    .unwrap();
    assert!(rf.eval([0.7, 0.0]).is_err());
}
