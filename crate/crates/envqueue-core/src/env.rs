//! Environment specifications: discrete jump chains and reflected diffusions.
//!
//! Both spec kinds are plain serializable data. Validation is report-only:
//! every structural assumption gets a named line with a pass/fail flag and
//! the measured residual, so a failing spec can still be inspected.

use crate::error::{Error, Result};
use crate::rates::RateField;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Tolerance for the per-level invariance residual of the environment
/// jump-rate matrices. Double-precision accumulation over <= 1e3 states
/// keeps exact-arithmetic specs well below this.
pub const BALANCE_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// One face of a convex polygonal domain: inside means `normal . z >= offset`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Face2 {
    pub normal: [f64; 2],
    pub offset: f64,
    /// Reflection direction (need not be the normal, must point inward).
    pub reflection: [f64; 2],
}

/// Environment state space.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Closed interval `[lo, hi]`, normal reflection at both ends.
    Interval { lo: f64, hi: f64 },
    /// Ray `[lo, inf)` carried with a reflecting numerical cap at `cap`.
    /// The cap is part of the spec and reported in outputs.
    Ray { lo: f64, cap: f64 },
    /// Convex 2-D region cut out by half-planes.
    Polygon { faces: Vec<Face2> },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Polygon { .. } => 2,
            _ => 1,
        }
    }

    /// Interval bounds as currently simulated (cap applied for rays).
    pub fn bounds_1d(&self) -> Result<(f64, f64)> {
        match self {
            DomainSpec::Interval { lo, hi } => Ok((*lo, *hi)),
            DomainSpec::Ray { lo, cap } => Ok((*lo, *cap)),
            DomainSpec::Polygon { .. } => Err(Error::Precondition(
                "operation requires a one-dimensional domain".into(),
            )),
        }
    }

    pub fn faces(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } | DomainSpec::Ray { .. } => 2,
            DomainSpec::Polygon { faces } => faces.len(),
        }
    }

    pub fn contains(&self, z: [f64; 2]) -> bool {
        match self {
            DomainSpec::Interval { lo, hi } => z[0] >= *lo && z[0] <= *hi,
            DomainSpec::Ray { lo, cap } => z[0] >= *lo && z[0] <= *cap,
            DomainSpec::Polygon { faces } => faces
                .iter()
                .all(|f| f.normal[0] * z[0] + f.normal[1] * z[1] >= f.offset - 1e-12),
        }
    }

    /// Diameter of the simulated region (cap applied).
    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Interval { lo, hi } => hi - lo,
            DomainSpec::Ray { lo, cap } => cap - lo,
            DomainSpec::Polygon { faces: _ } => {
                // Cheap over-estimate from the bounding box of sampled points.
                let bb = self.bounding_box();
                ((bb.1[0] - bb.0[0]).powi(2) + (bb.1[1] - bb.0[1]).powi(2)).sqrt()
            }
        }
    }

    /// Axis-aligned bounding box (polygon: solved from face intersections).
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            DomainSpec::Interval { lo, hi } => ([*lo, 0.0], [*hi, 0.0]),
            DomainSpec::Ray { lo, cap } => ([*lo, 0.0], [*cap, 0.0]),
            DomainSpec::Polygon { faces } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                // Vertices are pairwise face intersections that satisfy all
                // other constraints.
                for i in 0..faces.len() {
                    for j in (i + 1)..faces.len() {
                        let (a, b) = (&faces[i], &faces[j]);
                        let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
                        if det.abs() < 1e-14 {
                            continue;
                        }
                        let x = (a.offset * b.normal[1] - b.offset * a.normal[1]) / det;
                        let y = (a.normal[0] * b.offset - b.normal[0] * a.offset) / det;
                        if self.contains([x, y]) {
                            lo[0] = lo[0].min(x);
                            lo[1] = lo[1].min(y);
                            hi[0] = hi[0].max(x);
                            hi[1] = hi[1].max(y);
                        }
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Uniform sample from the domain (rejection from the bounding box for
    /// polygons).
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        match self {
            DomainSpec::Interval { lo, hi } => [rng.gen_range(*lo..=*hi), 0.0],
            DomainSpec::Ray { lo, cap } => [rng.gen_range(*lo..=*cap), 0.0],
            DomainSpec::Polygon { .. } => {
                let (lo, hi) = self.bounding_box();
                loop {
                    let p = [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])];
                    if self.contains(p) {
                        return p;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Level-dependent scaling sequences
// ---------------------------------------------------------------------------

/// The per-level factor `beta_n` multiplying the nominal environment speed.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "seq", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSeq {
    #[default]
    One,
    /// `beta_n = ratio^n`. A ratio equal to the smallest traffic intensity
    /// tames the `rho^-n` blow-up without changing the invariant measure.
    Geometric { ratio: f64 },
    /// Explicit head of the sequence; the last value repeats.
    Table { values: Vec<f64> },
}

impl BetaSeq {
    pub fn at(&self, n: u32) -> f64 {
        match self {
            BetaSeq::One => 1.0,
            BetaSeq::Geometric { ratio } => ratio.powi(n as i32),
            BetaSeq::Table { values } => {
                let idx = (n as usize).min(values.len().saturating_sub(1));
                values.get(idx).copied().unwrap_or(1.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            BetaSeq::One => true,
            BetaSeq::Geometric { ratio } => *ratio > 0.0,
            BetaSeq::Table { values } => !values.is_empty() && values.iter().all(|v| *v > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec("beta sequence must be positive".into()))
        }
    }
}

/// Set of queue levels, used to switch between environment jump behaviours.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "set", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelSet {
    None,
    All,
    Even,
    UpTo { n: u32 },
}

impl LevelSet {
    pub fn contains(&self, n: u32) -> bool {
        match self {
            LevelSet::None => false,
            LevelSet::All => true,
            LevelSet::Even => n.is_multiple_of(2),
            LevelSet::UpTo { n: k } => n <= *k,
        }
    }
}

// ---------------------------------------------------------------------------
// Discrete environment
// ---------------------------------------------------------------------------

/// Nominal queue-level-dependent jump rates `tau_n(z, z')` of the environment
/// chain, as named constructions. All of them keep the declared weight vector
/// invariant at every level.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TauSpec {
    /// `tau_n = beta_n * base` for a fixed rate matrix `base`
    /// (off-diagonal entries; diagonal ignored).
    Scaled {
        base: Vec<Vec<f64>>,
        #[serde(default)]
        beta: BetaSeq,
    },
    /// Nearest-neighbour walk with cyclic boundary: rate 1/2 to each side.
    CyclicWalk,
    /// Uniform jumps: rate `beta_n / (m - 1)` to every other state.
    UniformJumps {
        #[serde(default)]
        beta: BetaSeq,
    },
    /// Uniform jumps on the given levels, cyclic walk elsewhere.
    MixedUniformCyclic {
        uniform_levels: LevelSet,
        #[serde(default)]
        beta: BetaSeq,
    },
    /// Deterministic shift by the queue length: from state `i` the only
    /// transition is to `(i + n) mod m`, at rate `beta_n`. Doubly stochastic,
    /// so the counting measure stays invariant. At level 0 this is a no-op
    /// self-loop.
    ShiftByQueueLength {
        #[serde(default)]
        beta: BetaSeq,
    },
}

/// A finite-state environment: ordered state values, invariant weights, and
/// the level-dependent jump rates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiscreteEnvSpec {
    /// Environment state values (the `z` the rate field sees).
    pub states: Vec<f64>,
    /// Invariant weight `v(z)` per state; must not depend on the queue level.
    pub weights: Vec<f64>,
    pub tau: TauSpec,
}

impl DiscreteEnvSpec {
    pub fn m(&self) -> usize {
        self.states.len()
    }

    /// Nominal jump rate `tau_n(i, j)` for `i != j`.
    pub fn tau_rate(&self, n: u32, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let m = self.m();
        match &self.tau {
            TauSpec::Scaled { base, beta } => beta.at(n) * base[i][j],
            TauSpec::CyclicWalk => cyclic_rate(m, i, j),
            TauSpec::UniformJumps { beta } => beta.at(n) / (m as f64 - 1.0),
            TauSpec::MixedUniformCyclic {
                uniform_levels,
                beta,
            } => {
                if uniform_levels.contains(n) {
                    beta.at(n) / (m as f64 - 1.0)
                } else {
                    cyclic_rate(m, i, j)
                }
            }
            TauSpec::ShiftByQueueLength { beta } => {
                if j == (i + n as usize) % m {
                    beta.at(n)
                } else {
                    0.0
                }
            }
        }
    }

    /// Total outflow rate `sum_j tau_n(i, j)` over `j != i`.
    pub fn tau_outflow(&self, n: u32, i: usize) -> f64 {
        (0..self.m())
            .filter(|&j| j != i)
            .map(|j| self.tau_rate(n, i, j))
            .sum()
    }

    /// Residual of the weighted invariance identity at level `n`:
    /// `max_i |v_i * outflow_i - sum_j v_j tau_n(j, i)|`.
    pub fn balance_residual(&self, n: u32) -> f64 {
        let m = self.m();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let out = self.weights[i] * self.tau_outflow(n, i);
            let inflow: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| self.weights[j] * self.tau_rate(n, j, i))
                .sum();
            worst = worst.max((out - inflow).abs());
        }
        worst
    }

    fn basic_checks(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::InvalidSpec("empty state list".into()));
        }
        if self.weights.len() != m {
            return Err(Error::InvalidSpec(format!(
                "{} weights for {} states",
                self.weights.len(),
                m
            )));
        }
        if self.weights.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidSpec("weights must be positive".into()));
        }
        if let TauSpec::Scaled { base, beta } = &self.tau {
            beta.validate()?;
            if base.len() != m || base.iter().any(|row| row.len() != m) {
                return Err(Error::InvalidSpec("base rate matrix must be m x m".into()));
            }
            if base
                .iter()
                .enumerate()
                .any(|(i, row)| row.iter().enumerate().any(|(j, r)| i != j && *r < 0.0))
            {
                return Err(Error::InvalidSpec("negative off-diagonal rate".into()));
            }
        }
        Ok(())
    }
}

fn cyclic_rate(m: usize, i: usize, j: usize) -> f64 {
    // Neighbours with periodic wrap; for m = 2 both directions land on the
    // single other state and the rates add up.
    let up = (i + 1) % m;
    let down = (i + m - 1) % m;
    let mut r = 0.0;
    if j == up {
        r += 0.5;
    }
    if j == down {
        r += 0.5;
    }
    r
}

// ---------------------------------------------------------------------------
// Diffusive environment
// ---------------------------------------------------------------------------

/// Drift field, as named built-ins.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "fn", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// 1-D drift `theta / (anchor - z)`, pushing toward `anchor` with a pole
    /// there. With unit diffusion on `[lo, anchor]` the stationary density is
    /// proportional to `(anchor - z)^(-2 theta)`.
    ReciprocalTowards {
        anchor: f64,
        theta: f64,
    },
}

impl DriftSpec {
    pub fn at(&self, z: [f64; 2]) -> [f64; 2] {
        match self {
            DriftSpec::Zero => [0.0, 0.0],
            DriftSpec::Constant { value } => *value,
            DriftSpec::ReciprocalTowards { anchor, theta } => [theta / (anchor - z[0]), 0.0],
        }
    }

    /// Scalar view for 1-D densities.
    pub fn scalar(&self) -> impl Fn(f64) -> f64 + '_ {
        move |z| self.at([z, 0.0])[0]
    }
}

/// Diffusion coefficient, as named built-ins. `value` is the coefficient `a`
/// in a local variance of `a^2` per axis (isotropic).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "fn", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionCoeffSpec {
    Constant { value: f64 },
}

impl DiffusionCoeffSpec {
    pub fn at(&self, _z: [f64; 2]) -> f64 {
        match self {
            DiffusionCoeffSpec::Constant { value } => *value,
        }
    }

    pub fn scalar(&self) -> impl Fn(f64) -> f64 + '_ {
        move |z| self.at([z, 0.0])
    }
}

/// State-dependent finite jump component.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSpec {
    /// Jumps at a constant rate; the landing point is uniform over the domain.
    UniformRelocate { rate: f64 },
}

impl JumpSpec {
    pub fn rate(&self, _z: [f64; 2]) -> f64 {
        match self {
            JumpSpec::UniformRelocate { rate } => *rate,
        }
    }
}

/// Queue-level-dependent sub-domains: the environment diffuses in `D_n` and
/// is frozen on `D \ D_n`. Below `n0` the full domain is used; from `n0` on,
/// the restricted interval applies.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub n0: u32,
    pub restricted_lo: f64,
    pub restricted_hi: f64,
}

impl ThresholdSpec {
    /// Active sub-domain `D_n` as an interval.
    pub fn domain_at(&self, n: u32, full: (f64, f64)) -> (f64, f64) {
        if n < self.n0 {
            full
        } else {
            (self.restricted_lo, self.restricted_hi)
        }
    }

    pub fn contains(&self, n: u32, full: (f64, f64), z: f64) -> bool {
        let (lo, hi) = self.domain_at(n, full);
        z >= lo && z <= hi
    }
}

/// A reflected (jump-)diffusion environment together with the rate field it
/// modulates and the per-level speed factors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiffusionEnvSpec {
    pub domain: DomainSpec,
    pub drift: DriftSpec,
    pub diffusion: DiffusionCoeffSpec,
    #[serde(default)]
    pub jumps: Option<JumpSpec>,
    #[serde(default)]
    pub beta: BetaSeq,
    pub rates: RateField,
    #[serde(default)]
    pub threshold: Option<ThresholdSpec>,
    /// Declared uniform ellipticity floor for `a^2`.
    pub ellipticity_floor: f64,
}

impl DiffusionEnvSpec {
    /// Environment speed factor `beta_n * rho(z)^-n`, computed in log space
    /// so deep levels saturate to +inf instead of producing NaN.
    pub fn speed(&self, n: u32, rho: f64) -> f64 {
        if n == 0 {
            return self.beta.at(0);
        }
        if rho <= 0.0 {
            return f64::INFINITY;
        }
        let ln = self.beta.at(n).ln() - (n as f64) * rho.ln();
        ln.exp()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One named assumption check with its measured residual.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    /// Advisory lines (certificate-only preconditions, overflow warnings)
    /// do not fail the report.
    pub advisory: bool,
    pub residual: f64,
    pub detail: String,
}

/// Report-only validation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckLine>,
}

impl ValidationReport {
    /// All required checks pass (advisory lines are reported only).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.advisory)
    }

    pub fn line(&self, name: &str) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, passed: bool, residual: f64, detail: impl Into<String>) {
        self.checks.push(CheckLine {
            name: name.into(),
            passed,
            advisory: false,
            residual,
            detail: detail.into(),
        });
    }

    fn push_advisory(
        &mut self,
        name: &str,
        passed: bool,
        residual: f64,
        detail: impl Into<String>,
    ) {
        self.checks.push(CheckLine {
            name: name.into(),
            passed,
            advisory: true,
            residual,
            detail: detail.into(),
        });
    }
}

/// Queue levels probed by the report checks.
const PROBE_LEVELS: [u32; 7] = [0, 1, 2, 3, 5, 10, 20];

/// Validate a discrete environment against its structural assumptions.
pub fn validate_discrete(
    env: &DiscreteEnvSpec,
    rates: &RateField,
    n_max: u32,
) -> Result<ValidationReport> {
    env.basic_checks()?;
    let mut rep = ValidationReport { checks: Vec::new() };

    let mut worst = 0.0f64;
    for &n in &PROBE_LEVELS {
        worst = worst.max(env.balance_residual(n));
    }
    rep.push(
        "weighted-invariance",
        worst <= BALANCE_TOL,
        worst,
        format!("max residual over levels {PROBE_LEVELS:?}"),
    );

    let mut rho_max = 0.0f64;
    let mut rho_ok = true;
    let mut xi = 0.0f64;
    for (i, &z) in env.states.iter().enumerate() {
        match rates.eval_state(i, z) {
            Ok((_, _, rho)) => {
                rho_max = rho_max.max(rho);
                if rho >= 1.0 {
                    rho_ok = false;
                } else {
                    xi += env.weights[i] / (1.0 - rho);
                }
            }
            Err(_) => rho_ok = false,
        }
    }
    rep.push(
        "subcritical-intensity",
        rho_ok,
        rho_max,
        "rho(z) < 1 for every state",
    );
    rep.push(
        "finite-normalizer",
        rho_ok && xi.is_finite(),
        xi,
        "Xi = sum_z v(z)/(1-rho(z))",
    );
    rep.push_advisory(
        "uniform-rate-gap",
        rates.uniform_gap(),
        rates.rho_bar(),
        "lambda_bar < mu_bar (needed only for rate certificates)",
    );

    // Worst-case speed factor at the truncation level.
    let mut speed_max: f64 = 0.0;
    for (i, &z) in env.states.iter().enumerate() {
        if let Ok((_, _, rho)) = rates.eval_state(i, z) {
            if rho > 0.0 {
                let beta = match &env.tau {
                    TauSpec::Scaled { beta, .. }
                    | TauSpec::UniformJumps { beta }
                    | TauSpec::MixedUniformCyclic { beta, .. }
                    | TauSpec::ShiftByQueueLength { beta } => beta.at(n_max),
                    TauSpec::CyclicWalk => 1.0,
                };
                speed_max = speed_max.max((beta.ln() - (n_max as f64) * rho.ln()).exp());
            }
        }
    }
    rep.push_advisory(
        "speed-within-f64",
        speed_max.is_finite(),
        speed_max,
        format!("beta_n * rho^-n at n_max={n_max}"),
    );

    Ok(rep)
}

/// Validate a diffusive environment: ellipticity, inward reflection,
/// intensity bounds on a sampled grid, threshold-domain shape, speed range.
pub fn validate_diffusion(
    env: &DiffusionEnvSpec,
    grid_points: usize,
    n_max: u32,
) -> Result<ValidationReport> {
    env.beta.validate()?;
    let mut rep = ValidationReport { checks: Vec::new() };
    let mut rng = crate::seed::replica_rng(0x5eed_5eed, 0);

    // Ellipticity on a sampled grid.
    let mut a2_min = f64::INFINITY;
    for _ in 0..grid_points.max(1) {
        let z = env.domain.sample_uniform(&mut rng);
        a2_min = a2_min.min(env.diffusion.at(z).powi(2));
    }
    rep.push(
        "uniform-ellipticity",
        a2_min >= env.ellipticity_floor && env.ellipticity_floor > 0.0,
        a2_min,
        format!("min sampled a^2 vs floor {}", env.ellipticity_floor),
    );

    // Reflection fields must point inward on every face.
    let (inward_ok, inward_min) = match &env.domain {
        DomainSpec::Polygon { faces } => {
            let mut min_dot = f64::INFINITY;
            for f in faces {
                let dot = f.reflection[0] * f.normal[0] + f.reflection[1] * f.normal[1];
                min_dot = min_dot.min(dot);
            }
            (min_dot > 0.0, min_dot)
        }
        // 1-D reflection is normal by construction.
        _ => (true, 1.0),
    };
    rep.push(
        "inward-reflection",
        inward_ok,
        inward_min,
        "r_i . n_i > 0 on every face",
    );

    // Rate bounds and subcriticality over the sampled grid.
    let mut rho_max = 0.0f64;
    let mut eval_failures = 0usize;
    for _ in 0..grid_points.max(1) {
        let z = env.domain.sample_uniform(&mut rng);
        match env.rates.eval(z) {
            Ok((_, _, rho)) => rho_max = rho_max.max(rho),
            Err(_) => eval_failures += 1,
        }
    }
    rep.push(
        "rate-bounds-on-grid",
        eval_failures == 0,
        eval_failures as f64,
        format!("rate evaluations failing bounds out of {grid_points}"),
    );
    rep.push(
        "subcritical-intensity",
        rho_max <= 1.0,
        rho_max,
        "max sampled rho(z)",
    );
    rep.push_advisory(
        "uniform-rate-gap",
        env.rates.uniform_gap(),
        env.rates.rho_bar(),
        "lambda_bar < mu_bar (needed only for rate certificates)",
    );

    if let Some(th) = &env.threshold {
        let full = env.domain.bounds_1d()?;
        let inside = th.restricted_lo >= full.0
            && th.restricted_hi <= full.1
            && th.restricted_lo < th.restricted_hi;
        // Consecutive sub-domains always share an open set here because
        // levels below n0 use the full domain and the restriction is a
        // non-degenerate sub-interval; their union is the full domain.
        rep.push(
            "threshold-domains",
            inside,
            th.restricted_hi - th.restricted_lo,
            "restricted interval is a non-degenerate sub-interval of D",
        );
    }

    // Speed factor at the deepest level the caller intends to simulate.
    let rho_bar = env.rates.rho_bar().min(1.0);
    let speed_at_cap = if rho_bar > 0.0 {
        (env.beta.at(n_max).ln() - (n_max as f64) * rho_bar.ln()).exp()
    } else {
        f64::INFINITY
    };
    rep.push_advisory(
        "speed-within-f64",
        speed_at_cap.is_finite(),
        speed_at_cap,
        format!("beta_n * rho_bar^-n at n_max={n_max} (saturated steps otherwise)"),
    );

    if let Some(j) = &env.jumps {
        let mut landing_ok = true;
        for _ in 0..64 {
            let z = env.domain.sample_uniform(&mut rng);
            if j.rate(z) < 0.0 {
                landing_ok = false;
            }
        }
        rep.push("jump-measure", landing_ok, 0.0, "jump rate non-negative");
    }

    Ok(rep)
}

/// Bound-checked rate evaluation at a domain point (errors on points outside
/// the declared domain, unlike `RateField::eval`).
pub fn eval_rates(rf: &RateField, domain: &DomainSpec, z: [f64; 2]) -> Result<(f64, f64, f64)> {
    if !domain.contains(z) {
        return Err(Error::DomainViolation {
            point: z,
            detail: "rate evaluation outside declared domain".into(),
        });
    }
    rf.eval(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::RateFn;

    fn two_state_rates() -> RateField {
        RateField::new(
            RateFn::Table {
                values: vec![0.2, 0.5],
            },
            RateFn::Constant { value: 1.0 },
            0.5,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_two_state_passes() {
        let env = DiscreteEnvSpec {
            states: vec![0.2, 0.5],
            weights: vec![1.0, 1.0],
            tau: TauSpec::Scaled {
                base: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                beta: BetaSeq::One,
            },
        };
        let rep = validate_discrete(&env, &two_state_rates(), 30).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.line("weighted-invariance").unwrap().residual, 0.0);
    }

    #[test]
    fn asymmetric_rates_fail_invariance() {
        // tau(z1,z2)=2, tau(z2,z1)=1 with unit weights leaves residual 1.
        let env = DiscreteEnvSpec {
            states: vec![0.2, 0.5],
            weights: vec![1.0, 1.0],
            tau: TauSpec::Scaled {
                base: vec![vec![0.0, 2.0], vec![1.0, 0.0]],
                beta: BetaSeq::One,
            },
        };
        let rep = validate_discrete(&env, &two_state_rates(), 10).unwrap();
        let line = rep.line("weighted-invariance").unwrap();
        assert!(!line.passed);
        assert!((line.residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outward_reflection_detected() {
        let env = DiffusionEnvSpec {
            domain: DomainSpec::Polygon {
                faces: vec![
                    Face2 {
                        normal: [1.0, 0.0],
                        offset: 0.0,
                        reflection: [-1.0, 0.0], // points outward
                    },
                    Face2 {
                        normal: [-1.0, 0.0],
                        offset: -1.0,
                        reflection: [-1.0, 0.0],
                    },
                    Face2 {
                        normal: [0.0, 1.0],
                        offset: 0.0,
                        reflection: [0.0, 1.0],
                    },
                    Face2 {
                        normal: [0.0, -1.0],
                        offset: -1.0,
                        reflection: [0.0, -1.0],
                    },
                ],
            },
            drift: DriftSpec::Zero,
            diffusion: DiffusionCoeffSpec::Constant { value: 1.0 },
            jumps: None,
            beta: BetaSeq::One,
            rates: RateField::new(
                RateFn::Constant { value: 0.5 },
                RateFn::Constant { value: 1.0 },
                0.5,
                1.0,
            )
            .unwrap(),
            threshold: None,
            ellipticity_floor: 0.5,
        };
        let rep = validate_diffusion(&env, 256, 10).unwrap();
        assert!(!rep.line("inward-reflection").unwrap().passed);
    }

    #[test]
    fn eval_rates_rejects_outside_domain() {
        let rf = two_state_rates();
        let dom = DomainSpec::Interval { lo: 0.0, hi: 1.0 };
        let rf2 = RateField::new(
            RateFn::Linear {
                coord: 0,
                slope: 1.0,
                intercept: 0.0,
            },
            rf.mu.clone(),
            1.0,
            1.0,
        )
        .unwrap();
        assert!(eval_rates(&rf2, &dom, [1.5, 0.0]).is_err());
        assert!(eval_rates(&rf2, &dom, [0.5, 0.0]).is_ok());
    }

    #[test]
    fn cyclic_walk_weights_balance() {
        for m in 2..=6 {
            let env = DiscreteEnvSpec {
                states: (1..=m).map(|i| i as f64 / (m as f64 + 1.0)).collect(),
                weights: vec![1.0; m],
                tau: TauSpec::CyclicWalk,
            };
            for n in [0, 1, 7] {
                assert!(env.balance_residual(n) < 1e-15, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn diffusive_builtins_pass_grid_validation() {
        use crate::builtins;
        for (name, spec) in [
            ("case-a", builtins::case_a_rbm_arrival()),
            ("case-b", builtins::case_b_rbm_service()),
            ("case-c", builtins::case_c_cone()),
            ("theta", builtins::theta_drift(0.25)),
            ("ex3.1", builtins::ex31_threshold(0.5, 3)),
            ("ex3.2", builtins::ex32_threshold(3)),
        ] {
            let rep = validate_diffusion(&spec, 10_000, 12).unwrap();
            assert!(rep.passed(), "{name}: {rep:?}");
            let grid = rep.line("rate-bounds-on-grid").unwrap();
            assert!(grid.passed && grid.residual == 0.0, "{name}");
        }
    }

    #[test]
    fn shift_chain_is_doubly_stochastic() {
        let env = DiscreteEnvSpec {
            states: (0..41).map(|i| 0.1 + 0.8 * (i as f64) / 40.0).collect(),
            weights: vec![1.0; 41],
            tau: TauSpec::ShiftByQueueLength { beta: BetaSeq::One },
        };
        for n in [0, 1, 5, 40, 41, 100] {
            assert!(env.balance_residual(n) < 1e-15, "n={n}");
        }
    }
}
