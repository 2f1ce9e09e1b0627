//! Named example environments.
//!
//! Every experiment spec refers to one of these constructions (possibly with
//! parameter overrides) so that runs are serializable and reproducible.

use crate::env::{
    BetaSeq, DiffusionCoeffSpec, DiffusionEnvSpec, DiscreteEnvSpec, DomainSpec, DriftSpec, Face2,
    JumpSpec, LevelSet, TauSpec, ThresholdSpec,
};
use crate::rates::{RateField, RateFn};

fn unit_mu() -> RateFn {
    RateFn::Constant { value: 1.0 }
}

fn linear_z() -> RateFn {
    RateFn::Linear {
        coord: 0,
        slope: 1.0,
        intercept: 0.0,
    }
}

/// Two environment states with traffic intensities 0.2 and 0.5, unit weights,
/// symmetric unit nominal switch rates scaled by `beta_n`.
pub fn two_state(beta: BetaSeq) -> (DiscreteEnvSpec, RateField) {
    let env = DiscreteEnvSpec {
        states: vec![0.2, 0.5],
        weights: vec![1.0, 1.0],
        tau: TauSpec::Scaled {
            base: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            beta,
        },
    };
    let rates = RateField::new(
        RateFn::Table {
            values: vec![0.2, 0.5],
        },
        unit_mu(),
        0.5,
        1.0,
    )
    .expect("static bounds");
    (env, rates)
}

/// Jump behaviour selector for the finite-set environment walk.
#[derive(Debug, Clone)]
pub enum CyclicMode {
    /// Nearest-neighbour walk with periodic boundary at every level.
    AllCyclic,
    /// Uniform jumps (rate `beta_n/(m-1)` to every other state) at every level.
    AllUniform(BetaSeq),
    /// Uniform jumps on the given levels, cyclic walk elsewhere.
    Mixed(LevelSet, BetaSeq),
}

/// Finite set of `m` environment points equally spaced in `(0, 1)`, counting
/// weights, and either cyclic nearest-neighbour or uniform jump dynamics.
/// Arrival rate is the state value, service rate 1, so `rho(z) = z`.
pub fn uniform_cyclic(m: usize, mode: CyclicMode) -> (DiscreteEnvSpec, RateField) {
    assert!(m >= 2, "need at least two environment states");
    let states: Vec<f64> = (1..=m).map(|i| i as f64 / (m as f64 + 1.0)).collect();
    let lambda_bar = *states.last().unwrap();
    let tau = match mode {
        CyclicMode::AllCyclic => TauSpec::CyclicWalk,
        CyclicMode::AllUniform(beta) => TauSpec::UniformJumps { beta },
        CyclicMode::Mixed(levels, beta) => TauSpec::MixedUniformCyclic {
            uniform_levels: levels,
            beta,
        },
    };
    let env = DiscreteEnvSpec {
        states,
        weights: vec![1.0; m],
        tau,
    };
    let rates = RateField::new(linear_z(), unit_mu(), lambda_bar, 1.0).expect("static bounds");
    (env, rates)
}

/// Countable shift chain truncated to a symmetric window of half-width `w`
/// with wraparound: the environment moves deterministically by the queue
/// length along the enumeration, at rate `beta_n`. States carry intensities
/// increasing toward 1 on the non-negative side.
pub fn shift_window(w: usize, beta: BetaSeq) -> (DiscreteEnvSpec, RateField) {
    let mut states = Vec::with_capacity(2 * w + 1);
    for i in -(w as i64)..=(w as i64) {
        let z = if i >= 0 {
            1.0 - 1.0 / (i as f64 + 2.0)
        } else {
            1.0 / (2.0 * (1.0 - i as f64))
        };
        states.push(z);
    }
    let lambda_bar = states.iter().cloned().fold(0.0f64, f64::max);
    let env = DiscreteEnvSpec {
        states,
        weights: vec![1.0; 2 * w + 1],
        tau: TauSpec::ShiftByQueueLength { beta },
    };
    let rates = RateField::new(linear_z(), unit_mu(), lambda_bar, 1.0).expect("static bounds");
    (env, rates)
}

/// Interactive diffusive arrival rate: reflected Brownian environment on
/// `[0, 0.9]`, arrival rate `z`, service rate 1.
pub fn case_a_rbm_arrival() -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Interval { lo: 0.0, hi: 0.9 },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(linear_z(), unit_mu(), 0.9, 1.0).expect("static bounds"),
        threshold: None,
        ellipticity_floor: 0.5,
    }
}

/// Interactive diffusive service rate: reflected Brownian environment on the
/// ray `[1.2, inf)` carried with a reflecting cap, arrival rate 1, service
/// rate `z`.
pub fn case_b_rbm_service() -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Ray { lo: 1.2, cap: 3.0 },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(RateFn::Constant { value: 1.0 }, linear_z(), 1.0, 1.2)
            .expect("static bounds"),
        threshold: None,
        ellipticity_floor: 0.5,
    }
}

/// Both rates diffusive: normally reflected planar Brownian motion on a
/// truncated sub-cone `{0.2 <= z2 <= 0.8 z1, 1 <= z1 <= 4}` with arrival rate
/// `z2` and service rate `z1`. The sub-cone keeps `rho = z2/z1 <= 0.8`; on
/// the full cone the intensity touches 1 at the diagonal.
pub fn case_c_cone() -> DiffusionEnvSpec {
    let faces = vec![
        Face2 {
            normal: [0.8, -1.0],
            offset: 0.0,
            reflection: [0.8, -1.0],
        },
        Face2 {
            normal: [-1.0, 0.0],
            offset: -4.0,
            reflection: [-1.0, 0.0],
        },
        Face2 {
            normal: [1.0, 0.0],
            offset: 1.0,
            reflection: [1.0, 0.0],
        },
        Face2 {
            normal: [0.0, 1.0],
            offset: 0.2,
            reflection: [0.0, 1.0],
        },
    ];
    DiffusionEnvSpec {
        domain: DomainSpec::Polygon { faces },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(
            RateFn::Linear {
                coord: 1,
                slope: 1.0,
                intercept: 0.0,
            },
            RateFn::Linear {
                coord: 0,
                slope: 1.0,
                intercept: 0.0,
            },
            3.2,
            1.0,
        )
        .expect("static bounds"),
        threshold: None,
        ellipticity_floor: 0.5,
    }
}

/// Drift `theta/(1-z)` toward the upper end on `[0, 0.95]` with unit
/// diffusion; stationary density proportional to `(1-z)^(-2 theta)`.
pub fn theta_drift(theta: f64) -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Interval { lo: 0.0, hi: 0.95 },
        drift: DriftSpec::ReciprocalTowards { anchor: 1.0, theta },
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(linear_z(), unit_mu(), 0.95, 1.0).expect("static bounds"),
        threshold: None,
        ellipticity_floor: 0.5,
    }
}

/// Threshold-controlled arrival rate: reflected Brownian environment on
/// `[0, 0.9]`, restricted to `[0, alpha_star]` once the queue reaches `n0`
/// (frozen outside the restriction).
pub fn ex31_threshold(alpha_star: f64, n0: u32) -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Interval { lo: 0.0, hi: 0.9 },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(linear_z(), unit_mu(), 0.9, 1.0).expect("static bounds"),
        threshold: Some(ThresholdSpec {
            n0,
            restricted_lo: 0.0,
            restricted_hi: alpha_star,
        }),
        ellipticity_floor: 0.5,
    }
}

/// Threshold-controlled service rate: reflected Brownian service intensity on
/// `[1.1, 2.0]`, restricted to `[1.25, 2.0]` once the queue reaches `n0`;
/// arrival rate 1, so `rho(z) = 1/z <= 1/1.1`.
pub fn ex32_threshold(n0: u32) -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Interval { lo: 1.1, hi: 2.0 },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: None,
        beta: BetaSeq::One,
        rates: RateField::new(RateFn::Constant { value: 1.0 }, linear_z(), 1.0, 1.1)
            .expect("static bounds"),
        threshold: Some(ThresholdSpec {
            n0,
            restricted_lo: 1.25,
            restricted_hi: 2.0,
        }),
        ellipticity_floor: 0.5,
    }
}

/// Pure-diffusion environment with a uniform-relocation jump component,
/// used to exercise the jump thinning path.
pub fn jumpy_interval(rate: f64) -> DiffusionEnvSpec {
    DiffusionEnvSpec {
        domain: DomainSpec::Interval { lo: 0.0, hi: 1.0 },
        drift: DriftSpec::Zero,
        diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
        jumps: Some(JumpSpec::UniformRelocate { rate }),
        beta: BetaSeq::One,
        rates: RateField::new(RateFn::Constant { value: 0.5 }, unit_mu(), 0.5, 1.0)
            .expect("static bounds"),
        threshold: None,
        ellipticity_floor: 0.5,
    }
}

/// Catalog entry for the experiment driver.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub parameters: &'static str,
    pub summary: &'static str,
}

/// Every named builtin with its tunable parameters.
pub fn catalog() -> Vec<BuiltinInfo> {
    vec![
        BuiltinInfo {
            name: "two-state",
            parameters: "beta (default unit)",
            summary: "two environment states, intensities 0.2/0.5, symmetric switch rates, \
                      counting weights",
        },
        BuiltinInfo {
            name: "ex2.1-cyclic",
            parameters: "m <= 5",
            summary: "finite state set in (0,1); queue-scaled cyclic nearest-neighbour walk; \
                      counting measure invariant",
        },
        BuiltinInfo {
            name: "ex2.1-uniform",
            parameters: "m <= 5, beta",
            summary: "finite state set in (0,1); uniform jumps at rate beta_n/(m-1); doubly \
                      stochastic rows",
        },
        BuiltinInfo {
            name: "ex2.2-shift",
            parameters: "window half-width w, beta",
            summary: "shift-by-queue-length chain on a symmetric window with wraparound; \
                      intensities increase toward 1",
        },
        BuiltinInfo {
            name: "case-a-rbm-arrival",
            parameters: "none",
            summary: "arrival rate follows a reflected Brownian motion on [0, 0.9]; service \
                      rate 1",
        },
        BuiltinInfo {
            name: "case-b-rbm-service",
            parameters: "none",
            summary: "service rate follows a reflected Brownian motion on the capped ray \
                      [1.2, 3.0]; arrival rate 1",
        },
        BuiltinInfo {
            name: "case-c-cone",
            parameters: "none",
            summary: "arrival/service pair reflected normally in a truncated planar sub-cone \
                      with rho <= 0.8",
        },
        BuiltinInfo {
            name: "ex3.1-theta-drift",
            parameters: "theta (default 0.25)",
            summary: "drift theta/(1-z) toward the upper end on [0, 0.95]; stationary density \
                      proportional to (1-z)^(-2 theta)",
        },
        BuiltinInfo {
            name: "ex3.1-threshold-rbm",
            parameters: "alpha_star (default 0.5), n0 (default 3)",
            summary: "arrival-rate diffusion restricted to [0, alpha_star] above queue level \
                      n0, frozen outside",
        },
        BuiltinInfo {
            name: "ex3.2-threshold-service",
            parameters: "n0 (default 3)",
            summary: "service-rate diffusion on [1.1, 2.0] restricted to [1.25, 2.0] above \
                      queue level n0, frozen outside",
        },
    ]
}
