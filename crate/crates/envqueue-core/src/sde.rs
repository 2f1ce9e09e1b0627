//! Euler–Maruyama stepping of reflected (jump-)diffusions with boundary
//! local-time accounting.
//!
//! One step at environment speed `s` moves
//!
//! ```text
//! z' = z + s g(z) dt + sqrt(s) a(z) sqrt(dt) xi
//! ```
//!
//! and projects `z'` back into the domain: by folding in one dimension
//! (exact for constant coefficients) and by face-wise oblique pushes in a
//! convex polygon. Each face's local time `ell_i` grows by the displacement
//! pushed back through that face, and only on steps whose pre-projection
//! point violated it.
//!
//! Deep queue levels make `s = beta_n rho(z)^-n` astronomically large. The
//! step is saturated once its displacement would exceed
//! [`SIGMA_CAP_DIAMS`] domain diameters: a folded Gaussian that wide is
//! already a stationary draw to far below f64 resolution, so the saturation
//! is unobservable while keeping the arithmetic finite.

use crate::env::{DiffusionEnvSpec, DomainSpec, Face2, JumpSpec};
use crate::error::{Error, Result};
use crate::seed::replica_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Saturation width for a single step, in domain diameters.
pub const SIGMA_CAP_DIAMS: f64 = 128.0;

/// Environment state with accumulated boundary local times.
#[derive(Debug, Clone)]
pub struct SdeState {
    pub z: [f64; 2],
    /// One accumulated local time per face.
    pub ell: Vec<f64>,
    pub t: f64,
}

impl SdeState {
    pub fn new(z: [f64; 2], faces: usize) -> Self {
        Self {
            z,
            ell: vec![0.0; faces],
            t: 0.0,
        }
    }
}

/// Outcome of a raw 1-D step.
#[derive(Debug, Clone, Copy)]
pub struct Step1dOutcome {
    pub z: f64,
    /// Local time pushed at the lower / upper end by this step.
    pub ell_lo: f64,
    pub ell_hi: f64,
}

/// Fold `x` into `[lo, hi]`, returning the landing point and the overshoot
/// mass pushed back at each end. Closed-form in the number of folds.
fn fold_reflect(lo: f64, hi: f64, x: f64) -> (f64, f64, f64) {
    let len = hi - lo;
    let u = x - lo;
    if (0.0..=len).contains(&u) {
        return (x, 0.0, 0.0);
    }
    let (e, first_hi) = if u > len {
        (u - len, true)
    } else {
        (-u, false)
    };
    // Successive overshoots are e, e-len, e-2len, ... alternating faces.
    let n1 = (e / (2.0 * len)).floor() + 1.0;
    let s1 = n1 * e - len * n1 * (n1 - 1.0);
    let (s2, _n2) = if e >= len {
        let n2 = ((e - len) / (2.0 * len)).floor() + 1.0;
        (n2 * (e - len) - len * n2 * (n2 - 1.0), n2)
    } else {
        (0.0, 0.0)
    };
    let v = e.rem_euclid(2.0 * len);
    let dist_from_first = if v <= len { v } else { 2.0 * len - v };
    if first_hi {
        ((hi - dist_from_first).clamp(lo, hi), s2, s1)
    } else {
        ((lo + dist_from_first).clamp(lo, hi), s1, s2)
    }
}

fn saturate_scale(scale: f64, dt: f64, a: f64, drift_mag: f64, diam: f64) -> f64 {
    let cap_len = SIGMA_CAP_DIAMS * diam;
    let mut s = scale;
    if a > 0.0 {
        let sig = a * (s * dt).sqrt();
        if !(sig <= cap_len) {
            s = (cap_len / a).powi(2) / dt;
        }
    }
    if drift_mag > 0.0 {
        let d = s * drift_mag * dt;
        if !(d <= cap_len) {
            s = cap_len / (drift_mag * dt);
        }
    }
    s
}

/// One Euler step with fold reflection on `[lo, hi]`. `b` and `a` are the
/// drift and diffusion coefficient evaluated at the current point; `scale`
/// is the environment speed factor (saturated internally).
#[allow(clippy::too_many_arguments)]
pub fn step_interval(
    lo: f64,
    hi: f64,
    b: f64,
    a: f64,
    scale: f64,
    dt: f64,
    noise: f64,
    z: f64,
) -> Step1dOutcome {
    let s = saturate_scale(scale, dt, a, b.abs(), hi - lo);
    let x = z + s * b * dt + (s * dt).sqrt() * a * noise;
    let (z_new, ell_lo, ell_hi) = fold_reflect(lo, hi, x);
    Step1dOutcome {
        z: z_new,
        ell_lo,
        ell_hi,
    }
}

/// Push a point back inside a convex polygon, face by face along the
/// declared reflection directions, worst violation first. Alternating
/// pushes converge geometrically on convex regions but need many passes in
/// thin wedges, hence the generous budget.
fn project_polygon(faces: &[Face2], z: &mut [f64; 2], ell: &mut [f64]) -> Result<()> {
    for _ in 0..512 {
        let mut worst: Option<(usize, f64)> = None;
        for (i, f) in faces.iter().enumerate() {
            let gap = f.normal[0] * z[0] + f.normal[1] * z[1] - f.offset;
            if gap < -1e-13 && worst.is_none_or(|(_, g)| gap < g) {
                worst = Some((i, gap));
            }
        }
        let Some((i, _)) = worst else {
            return Ok(());
        };
        let f = &faces[i];
        let norm = (f.reflection[0].powi(2) + f.reflection[1].powi(2)).sqrt();
        let r = [f.reflection[0] / norm, f.reflection[1] / norm];
        let denom = f.normal[0] * r[0] + f.normal[1] * r[1];
        if denom <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "reflection on face {i} does not point inward"
            )));
        }
        let s = (f.offset - (f.normal[0] * z[0] + f.normal[1] * z[1])) / denom;
        z[0] += s * r[0];
        z[1] += s * r[1];
        ell[i] += s;
    }
    Err(Error::NonFiniteState {
        t: f64::NAN,
        detail: "polygon projection did not converge in 512 passes".into(),
    })
}

/// One reflected Euler step of the environment at speed factor `scale`
/// (`= beta_n rho(z)^-n`, computed by the caller). The state's clock
/// advances by `dt`; local times grow by the projection displacements.
pub fn step_reflected(
    spec: &DiffusionEnvSpec,
    state: &mut SdeState,
    dt: f64,
    scale: f64,
    noise: [f64; 2],
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::Precondition("dt must be positive".into()));
    }
    if scale.is_nan() {
        return Err(Error::NonFiniteState {
            t: state.t,
            detail: "speed factor is NaN".into(),
        });
    }
    let a = spec.diffusion.at(state.z);
    let g = spec.drift.at(state.z);
    match &spec.domain {
        DomainSpec::Interval { lo, hi } | DomainSpec::Ray { lo, cap: hi } => {
            let out = step_interval(*lo, *hi, g[0], a, scale, dt, noise[0], state.z[0]);
            state.z[0] = out.z;
            state.ell[0] += out.ell_lo;
            state.ell[1] += out.ell_hi;
        }
        DomainSpec::Polygon { faces } => {
            // One-shot oblique projection (unlike the 1-D fold) only makes
            // sense for displacements on the domain scale; saturate earlier.
            let diam = spec.domain.diameter();
            let gmag = (g[0].powi(2) + g[1].powi(2)).sqrt();
            let s = saturate_scale(scale, dt, a, gmag, diam / SIGMA_CAP_DIAMS);
            let sig = (s * dt).sqrt() * a;
            state.z[0] += s * g[0] * dt + sig * noise[0];
            state.z[1] += s * g[1] * dt + sig * noise[1];
            project_polygon(faces, &mut state.z, &mut state.ell)?;
        }
    }
    if !state.z[0].is_finite() || !state.z[1].is_finite() {
        return Err(Error::NonFiniteState {
            t: state.t,
            detail: format!("z = {:?}", state.z),
        });
    }
    state.t += dt;
    Ok(())
}

/// Outcome of an adaptively substepped environment step.
#[derive(Debug, Clone, Copy)]
pub struct SubstepOutcome {
    pub z: f64,
    pub ell_lo: f64,
    pub ell_hi: f64,
    pub substeps: u32,
}

/// Substep budget per macro step.
const SUBSTEP_MAX: u32 = 50_000;
/// Smallest substep displacement, as a fraction of the active interval.
const SUBSTEP_FLOOR: f64 = 0.025;
/// Per-substep tilt budget: `sigma * |d ln s / dz|` is kept below this.
const SUBSTEP_BIAS: f64 = 0.3;
/// Queue level beyond which the floor relaxes: those layers carry a
/// vanishing share of the occupation, but their speed factor (and hence the
/// substep count at a fixed floor) grows geometrically.
const SUBSTEP_FULL_DEPTH: u32 = 20;

/// Advance the 1-D environment by `dt` at queue level `n`, splitting the
/// step so that each sub-step's displacement stays small against the scale
/// on which the speed factor `s(z) = beta_n rho(z)^-n` varies.
///
/// A single frozen-coefficient Euler step is only faithful while
/// `sigma * |d ln s| << 1`; deep layers violate that badly (the step folds
/// toward the uniform law instead of the `rho^n`-tilted one). Re-evaluating
/// the speed along the way restores the tilt at O(substeps) cost, which
/// concentrates exactly where the process rarely is.
#[allow(clippy::too_many_arguments)]
pub fn env_step_adaptive<R: Rng, FR: Fn(f64) -> f64>(
    spec: &DiffusionEnvSpec,
    lo: f64,
    hi: f64,
    n: u32,
    rho_fn: FR,
    dt: f64,
    z0: f64,
    rng: &mut R,
) -> SubstepOutcome {
    let diam = hi - lo;
    let mut z = z0;
    let mut ell_lo = 0.0;
    let mut ell_hi = 0.0;
    let mut remaining = dt;
    let mut k = 0u32;
    // Local step-width target: the tilt criterion with a floor that relaxes
    // on deep layers.
    let sigma_target = |z: f64| -> f64 {
        let eps = 1e-6 * diam;
        let zl = (z - eps).max(lo);
        let zr = (z + eps).min(hi);
        let (rl, rr) = (rho_fn(zl).max(1e-300), rho_fn(zr).max(1e-300));
        let dln = (n as f64) * ((rr.ln() - rl.ln()) / (zr - zl)).abs();
        let floor =
            SUBSTEP_FLOOR * diam * (1.0 + 0.25 * n.saturating_sub(SUBSTEP_FULL_DEPTH) as f64);
        (SUBSTEP_BIAS / dln).max(floor)
    };
    while remaining > 0.0 && k < SUBSTEP_MAX {
        let rho = rho_fn(z);
        let s = spec.speed(n, rho);
        let a = spec.diffusion.at([z, 0.0]);
        let b = spec.drift.at([z, 0.0])[0];
        let h = if n == 0 {
            remaining
        } else {
            let sigma_t = sigma_target(z);
            if !(s * a * a * remaining > sigma_t * sigma_t) {
                remaining
            } else {
                let dt_t = sigma_t * sigma_t / (s * a * a);
                if !(dt_t > 0.0) {
                    // Infinite speed (rho = 0 exactly): no finite substep
                    // respects the target; hand over to the capped leftover.
                    break;
                }
                dt_t.min(remaining)
            }
        };
        let xi: f64 = rng.sample(StandardNormal);
        let out = step_interval(lo, hi, b, a, s, h, xi, z);
        z = out.z;
        ell_lo += out.ell_lo;
        ell_hi += out.ell_hi;
        remaining -= h;
        k += 1;
    }
    if remaining > 0.0 {
        // Substep budget exhausted (ultrafast corner of the domain): consume
        // the leftover in one step whose variance is capped at the local
        // target. Under-diffusing here keeps the landing local and the
        // boundary local time clean, unlike a saturated step that would fold
        // across the domain many times.
        let rho = rho_fn(z);
        let s = spec.speed(n, rho);
        let a = spec.diffusion.at([z, 0.0]);
        let b = spec.drift.at([z, 0.0])[0];
        let sigma_t = sigma_target(z);
        let s_cap = if a > 0.0 {
            (sigma_t * sigma_t / (a * a * remaining)).min(s)
        } else {
            s
        };
        let xi: f64 = rng.sample(StandardNormal);
        let out = step_interval(lo, hi, b, a, s_cap, remaining, xi, z);
        z = out.z;
        ell_lo += out.ell_lo;
        ell_hi += out.ell_hi;
        k += 1;
    }
    SubstepOutcome {
        z,
        ell_lo,
        ell_hi,
        substeps: k,
    }
}

/// Thinned jump draw: with probability `rate(z) * scale * dt` the process
/// relocates according to the jump measure at `z`. Returns the landing point
/// if a jump fires.
pub fn sample_jump<R: Rng>(
    spec: &DiffusionEnvSpec,
    z: [f64; 2],
    scale: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Option<[f64; 2]>> {
    let Some(jumps) = &spec.jumps else {
        return Ok(None);
    };
    let rate = jumps.rate(z);
    if rate < 0.0 {
        return Err(Error::InvalidSpec("negative jump rate".into()));
    }
    let p = (rate * scale * dt).min(1.0);
    if p == 0.0 || rng.gen::<f64>() >= p {
        return Ok(None);
    }
    let landing = match jumps {
        JumpSpec::UniformRelocate { .. } => spec.domain.sample_uniform(rng),
    };
    if !spec.domain.contains(landing) {
        return Err(Error::InvalidSpec(
            "jump sampler produced a point outside the domain".into(),
        ));
    }
    Ok(Some(landing))
}

/// Result of a pairwise coupling run.
#[derive(Debug, Clone, Copy)]
pub struct CoupleOutcome {
    pub coupled: bool,
    /// Meeting time if coupled, else the horizon.
    pub tau: f64,
    /// Sign changes of `z1 - z2` observed before meeting. Shared noise with
    /// clamped reflection is monotone, so this stays 0.
    pub order_flips: u32,
}

/// Drive two copies of the environment (at unit speed) with shared noise and
/// clamped reflection until they meet within `1e-6 * diam(D)`, then merge
/// them exactly. Clamping, unlike folding, preserves the pathwise order of
/// the two copies, which is what makes the shared-noise coupling monotone.
pub fn couple_1d(
    spec: &DiffusionEnvSpec,
    z1: f64,
    z2: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<CoupleOutcome> {
    let (lo, hi) = spec.domain.bounds_1d()?;
    for (name, z) in [("z1", z1), ("z2", z2)] {
        if !(lo..=hi).contains(&z) {
            return Err(Error::DomainViolation {
                point: [z, 0.0],
                detail: format!("{name} outside [{lo}, {hi}]"),
            });
        }
    }
    let tol = 1e-6 * (hi - lo);
    let mut rng = replica_rng(seed, 0);
    let mut a_pos = z1;
    let mut b_pos = z2;
    let mut t = 0.0;
    let mut order_flips = 0u32;
    let strict_sign = |d: f64| -> i8 {
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut sign = strict_sign(a_pos - b_pos);
    while t < horizon {
        if (a_pos - b_pos).abs() <= tol {
            return Ok(CoupleOutcome {
                coupled: true,
                tau: t,
                order_flips,
            });
        }
        let xi: f64 = rng.sample(StandardNormal);
        let rt = dt.sqrt() * xi;
        for pos in [&mut a_pos, &mut b_pos] {
            let b_val = spec.drift.at([*pos, 0.0])[0];
            let a_val = spec.diffusion.at([*pos, 0.0]);
            *pos = (*pos + b_val * dt + a_val * rt).clamp(lo, hi);
        }
        t += dt;
        let s = strict_sign(a_pos - b_pos);
        if s != 0 && sign != 0 && s != sign {
            order_flips += 1;
        }
        if s != 0 {
            sign = s;
        }
    }
    Ok(CoupleOutcome {
        coupled: false,
        tau: horizon,
        order_flips,
    })
}

/// Time-fraction histogram of the environment alone (queue pinned at 0, so
/// the speed factor is `beta_0`), with local times per face.
#[derive(Debug, Clone)]
pub struct EnvOccupation {
    pub lo: f64,
    pub hi: f64,
    pub fractions: Vec<f64>,
    pub ell: [f64; 2],
    pub steps: u64,
}

/// Long-run occupation histogram of the 1-D environment with fold
/// reflection; the first `burn_in_frac` of the horizon is discarded.
pub fn env_occupation_1d(
    spec: &DiffusionEnvSpec,
    horizon: f64,
    dt: f64,
    bins: usize,
    seed: u64,
    burn_in_frac: f64,
) -> Result<EnvOccupation> {
    let (lo, hi) = spec.domain.bounds_1d()?;
    if bins == 0 || !(horizon > 0.0) || !(dt > 0.0) {
        return Err(Error::Precondition(
            "need bins > 0, horizon > 0, dt > 0".into(),
        ));
    }
    let mut rng = replica_rng(seed, 0);
    let mut z = 0.5 * (lo + hi);
    let mut counts = vec![0.0f64; bins];
    let mut ell = [0.0f64; 2];
    let steps = (horizon / dt) as u64;
    let burn = (steps as f64 * burn_in_frac) as u64;
    let scale = spec.beta.at(0);
    let width = (hi - lo) / bins as f64;
    for k in 0..steps {
        let xi: f64 = rng.sample(StandardNormal);
        let b = spec.drift.at([z, 0.0])[0];
        let a = spec.diffusion.at([z, 0.0]);
        let out = step_interval(lo, hi, b, a, scale, dt, xi, z);
        z = out.z;
        if let Some(landing) = sample_jump(spec, [z, 0.0], scale, dt, &mut rng)? {
            z = landing[0];
        }
        if k >= burn {
            ell[0] += out.ell_lo;
            ell[1] += out.ell_hi;
            let idx = (((z - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    for c in &mut counts {
        *c /= total;
    }
    Ok(EnvOccupation {
        lo,
        hi,
        fractions: counts,
        ell,
        steps,
    })
}
