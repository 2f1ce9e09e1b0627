//! Experiment implementations, one per config `kind`.
//!
//! Every experiment writes its data artifacts (CSV) and a JSON report that
//! embeds the tool version, the effective config hash, and one line per
//! declared assertion. The process exit code is 0 only if all assertions
//! passed.

use crate::config::{ExperimentConfig, Kind};
use envqueue_core::builtins;
use envqueue_core::cert;
use envqueue_core::coupling;
use envqueue_core::discrete;
use envqueue_core::emit;
use envqueue_core::env::{BetaSeq, DiffusionEnvSpec, DiscreteEnvSpec};
use envqueue_core::fit::dkw_epsilon;
use envqueue_core::joint;
use envqueue_core::rates::{RateField, RateFn};
use envqueue_core::stationary;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "envqueue";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failure classes mapped onto process exit codes.
#[derive(Debug)]
pub enum ExpError {
    /// Exit 2.
    Config(String),
    /// Exit 3.
    Runtime(String),
}

impl std::fmt::Display for ExpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExpError::Config(m) => write!(f, "config error: {m}"),
            ExpError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

fn rt(e: impl std::fmt::Display) -> ExpError {
    ExpError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct Report<T: Serialize> {
    tool: &'static str,
    version: &'static str,
    kind: String,
    config_hash: String,
    seed: u64,
    replicas: u32,
    passed: bool,
    assertions: Vec<Assertion>,
    data: T,
}

pub struct RunOutcome {
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

struct Emitter<'a> {
    out_dir: &'a Path,
    prefix: String,
    artifacts: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(out_dir: &'a Path, cfg: &ExperimentConfig) -> Result<Self, ExpError> {
        fs::create_dir_all(out_dir)
            .map_err(|e| ExpError::Runtime(format!("cannot create output dir: {e}")))?;
        Ok(Self {
            out_dir,
            prefix: format!("{}-{}", cfg.kind, cfg.hash()),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), ExpError> {
        let path = self.out_dir.join(format!("{}.{name}", self.prefix));
        fs::write(&path, contents)
            .map_err(|e| ExpError::Runtime(format!("cannot write {path:?}: {e}")))?;
        self.artifacts.push(path);
        Ok(())
    }

    fn report<T: Serialize>(
        &mut self,
        cfg: &ExperimentConfig,
        assertions: Vec<Assertion>,
        data: T,
    ) -> Result<RunOutcome, ExpError> {
        let rep = Report {
            tool: TOOL,
            version: VERSION,
            kind: cfg.kind.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.run.seed,
            replicas: cfg.run.replicas,
            passed: assertions.iter().all(|a| a.passed),
            assertions: assertions.clone(),
            data,
        };
        let json = serde_json::to_string_pretty(&rep)
            .map_err(|e| ExpError::Runtime(format!("report serialization: {e}")))?;
        self.write("report.json", &json)?;
        Ok(RunOutcome {
            assertions,
            artifacts: std::mem::take(&mut self.artifacts),
        })
    }
}

fn assert_line(name: &str, passed: bool, detail: String) -> Assertion {
    Assertion {
        name: name.into(),
        passed,
        detail,
    }
}

// ---------------------------------------------------------------------------
// Builtin resolution
// ---------------------------------------------------------------------------

enum BuiltEnv {
    Discrete(DiscreteEnvSpec, RateField),
    Diffusive(DiffusionEnvSpec),
}

fn beta_for(spec_beta: &Option<String>, min_rho: f64) -> BetaSeq {
    match spec_beta.as_deref() {
        Some("tamed") => BetaSeq::Geometric { ratio: min_rho },
        _ => BetaSeq::One,
    }
}

fn resolve(cfg: &ExperimentConfig) -> Result<BuiltEnv, ExpError> {
    let s = &cfg.spec;
    let default = match cfg.kind {
        Kind::StationaryDiscrete | Kind::CouplingHarness | Kind::TvDecay => "two-state",
        Kind::StationaryDiffusive => "case-a-rbm-arrival",
        Kind::StationaryThreshold => "ex3.1-threshold-rbm",
        _ => "two-state",
    };
    let name = s.builtin.as_deref().unwrap_or(default);
    let built = match name {
        "two-state" => {
            let (env, rates) = builtins::two_state(beta_for(&s.beta, 0.2));
            BuiltEnv::Discrete(env, rates)
        }
        "mm1-constant" => {
            let lambda = cfg.run.lambda_bar.unwrap_or(1.0);
            let mu = cfg.run.mu_bar.unwrap_or(4.0);
            if !(mu > lambda) {
                return Err(ExpError::Config(
                    "run.lambda_bar must be below run.mu_bar for mm1-constant".into(),
                ));
            }
            let env = DiscreteEnvSpec {
                states: vec![lambda / mu],
                weights: vec![1.0],
                tau: envqueue_core::env::TauSpec::Scaled {
                    base: vec![vec![0.0]],
                    beta: BetaSeq::One,
                },
            };
            let rates = RateField::new(
                RateFn::Constant { value: lambda },
                RateFn::Constant { value: mu },
                lambda,
                mu,
            )
            .map_err(rt)?;
            BuiltEnv::Discrete(env, rates)
        }
        "ex2.1-cyclic" => {
            let (env, rates) =
                builtins::uniform_cyclic(s.m.unwrap_or(3), builtins::CyclicMode::AllCyclic);
            BuiltEnv::Discrete(env, rates)
        }
        "ex2.1-uniform" => {
            let m = s.m.unwrap_or(3);
            let min_rho = 1.0 / (m as f64 + 1.0);
            let (env, rates) = builtins::uniform_cyclic(
                m,
                builtins::CyclicMode::AllUniform(beta_for(&s.beta, min_rho)),
            );
            BuiltEnv::Discrete(env, rates)
        }
        "ex2.2-shift" => {
            let (env, rates) =
                builtins::shift_window(s.window.unwrap_or(20), beta_for(&s.beta, 0.1));
            BuiltEnv::Discrete(env, rates)
        }
        "case-a-rbm-arrival" => BuiltEnv::Diffusive(builtins::case_a_rbm_arrival()),
        "case-b-rbm-service" => BuiltEnv::Diffusive(builtins::case_b_rbm_service()),
        "case-c-cone" => BuiltEnv::Diffusive(builtins::case_c_cone()),
        "ex3.1-theta-drift" => BuiltEnv::Diffusive(builtins::theta_drift(s.theta.unwrap_or(0.25))),
        "ex3.1-threshold-rbm" => BuiltEnv::Diffusive(builtins::ex31_threshold(
            s.alpha_star.unwrap_or(0.5),
            s.n0.unwrap_or(3),
        )),
        "ex3.2-threshold-service" => {
            BuiltEnv::Diffusive(builtins::ex32_threshold(s.n0.unwrap_or(3)))
        }
        other => {
            return Err(ExpError::Config(format!(
                "spec.builtin: unknown builtin {other:?}; see `envqueue list-builtins`"
            )))
        }
    };
    Ok(built)
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    match cfg.kind {
        Kind::StationaryDiscrete => stationary_discrete(cfg, out_dir),
        Kind::StationaryDiffusive => stationary_diffusive(cfg, out_dir, false),
        Kind::StationaryThreshold => stationary_diffusive(cfg, out_dir, true),
        Kind::RateCertificate => rate_certificate(cfg, out_dir),
        Kind::CouplingHarness => coupling_harness(cfg, out_dir),
        Kind::TvDecay => tv_decay(cfg, out_dir),
        Kind::MgfLemma => mgf_lemma(cfg, out_dir),
    }
}

fn stationary_discrete(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    let BuiltEnv::Discrete(env, rates) = resolve(cfg)? else {
        return Err(ExpError::Config(
            "stationary-discrete needs a discrete builtin".into(),
        ));
    };
    let n_max = cfg.run.n_max.unwrap_or(30);
    let mut em = Emitter::new(out_dir, cfg)?;

    let report = envqueue_core::env::validate_discrete(&env, &rates, n_max).map_err(rt)?;
    let pi = discrete::invariant_measure_discrete(&env, &rates, n_max).map_err(rt)?;
    let gen = discrete::build_generator(&env, &rates, n_max).map_err(rt)?;
    let residual = discrete::check_balance(&pi, &gen).map_err(rt)?;

    em.write("pi.csv", &emit::discrete_pi_csv(&pi))?;

    let assertions = vec![
        assert_line(
            "spec-validation",
            report.passed(),
            format!("{} checks", report.checks.len()),
        ),
        assert_line(
            "interior-balance",
            residual <= 1e-10,
            format!("max residual {residual:.3e} (tolerance 1e-10)"),
        ),
    ];
    #[derive(Serialize)]
    struct Data {
        xi: f64,
        n_max: u32,
        states: usize,
        tail_mass: f64,
        tail_mass_bound: f64,
        balance_residual: f64,
        validation: envqueue_core::env::ValidationReport,
    }
    em.report(
        cfg,
        assertions,
        Data {
            xi: pi.xi,
            n_max,
            states: env.m(),
            tail_mass: pi.tail_mass,
            tail_mass_bound: pi.tail_mass_bound,
            balance_residual: residual,
            validation: report,
        },
    )
}

fn stationary_diffusive(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threshold: bool,
) -> Result<RunOutcome, ExpError> {
    let BuiltEnv::Diffusive(spec) = resolve(cfg)? else {
        return Err(ExpError::Config(
            "stationary-diffusive needs a diffusive builtin".into(),
        ));
    };
    if threshold && spec.threshold.is_none() {
        return Err(ExpError::Config(
            "stationary-threshold needs a builtin with a threshold section".into(),
        ));
    }
    let mut em = Emitter::new(out_dir, cfg)?;
    let horizon = cfg.run.horizon.unwrap_or(10_000.0);
    let dt = cfg.run.dt.unwrap_or(1e-3);
    let opts = joint::JointSimOptions {
        n_cap: cfg.run.n_max.unwrap_or(12),
        bins: cfg.run.bins.unwrap_or(30),
        burn_in_frac: cfg.run.burn_in.unwrap_or(0.2),
        record_events: cfg.run.record_events.unwrap_or(false),
    };
    let tol = cfg.run.tolerance.unwrap_or(0.05);

    let validation =
        envqueue_core::env::validate_diffusion(&spec, 10_000, opts.n_cap).map_err(rt)?;
    let (lo, hi) = spec.domain.bounds_1d().map_err(|_| {
        ExpError::Config(
            "closed-form occupation comparison needs an interval environment; the planar              cone builtin is covered by validation and library-level simulation only"
                .into(),
        )
    })?;
    let z0 = [0.5 * (lo + hi), 0.0];
    let path = joint::run_replicas(
        &spec,
        (0, z0),
        horizon,
        dt,
        cfg.run.seed,
        cfg.run.replicas,
        &opts,
        threshold,
    )
    .map_err(rt)?;
    let occ = joint::occupation_summary(&path).map_err(rt)?;
    let law = stationary::joint_invariant_1d(&spec).map_err(rt)?;
    let cmp = stationary::compare_empirical(&law, &path).map_err(rt)?;

    em.write("occupation.csv", &emit::occupation_csv(&occ))?;
    // Law table on the same grid.
    let closed = law.cell_masses(opts.n_cap, opts.bins).map_err(rt)?;
    let mut law_csv = String::from("n,z_low,z_high,mass\n");
    let width = (hi - lo) / opts.bins as f64;
    for layer in 0..opts.n_cap as usize + 2 {
        for b in 0..opts.bins {
            law_csv.push_str(&format!(
                "{layer},{},{},{}\n",
                emit::fmt_f64(lo + b as f64 * width),
                emit::fmt_f64(lo + (b + 1) as f64 * width),
                emit::fmt_f64(closed[layer * opts.bins + b])
            ));
        }
    }
    em.write("law.csv", &law_csv)?;

    // Environment stationary density table on the bin grid.
    let zs: Vec<f64> = (0..=opts.bins)
        .map(|k| lo + (hi - lo) * k as f64 / opts.bins as f64)
        .collect();
    let qs: Vec<f64> = zs.iter().map(|&z| law.nu_density(z)).collect();
    em.write("density.csv", &emit::density_csv(&zs, &qs))?;
    if opts.record_events {
        em.write("events.csv", &emit::events_csv(&path.events))?;
    }

    let mut assertions = vec![
        assert_line(
            "spec-validation",
            validation.passed(),
            format!(
                "{} checks (advisory lines excluded)",
                validation.checks.len()
            ),
        ),
        assert_line(
            "global-tv",
            cmp.global_tv <= tol,
            format!("TV {:.4} vs tolerance {tol}", cmp.global_tv),
        ),
    ];
    if threshold {
        assertions.push(assert_line(
            "frozen-displacement-zero",
            path.frozen_max_displacement == 0.0,
            format!(
                "max |dz| on frozen steps = {:e}",
                path.frozen_max_displacement
            ),
        ));
        // Layer-marginal comparison restricted to the active sub-domains.
        let emp = occ.layer_masses_renormalized();
        let mut analytic = Vec::with_capacity(emp.len());
        for n in 0..=opts.n_cap {
            analytic.push(law.queue_marginal(n).map_err(rt)?);
        }
        analytic.push(law.queue_tail(opts.n_cap).map_err(rt)?);
        let tv = stationary::tv_distance(&emp, &analytic).map_err(rt)?;
        let worst = emp
            .iter()
            .zip(&analytic)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assertions.push(assert_line(
            "layer-marginals",
            tv <= tol && worst <= tol,
            format!("layer TV {tv:.4}, worst layer gap {worst:.4}, tolerance {tol}"),
        ));
    }
    #[derive(Serialize)]
    struct Data {
        xi: f64,
        global_tv: f64,
        per_layer_tv: Vec<f64>,
        frozen_fraction: f64,
        layer_ratio: Vec<stationary::LayerRatioFit>,
        domain: (f64, f64),
        steps: u64,
        validation: envqueue_core::env::ValidationReport,
    }
    em.report(
        cfg,
        assertions,
        Data {
            xi: law.xi,
            global_tv: cmp.global_tv,
            per_layer_tv: cmp.per_layer_tv,
            frozen_fraction: cmp.frozen_fraction,
            layer_ratio: cmp.layer_ratio,
            domain: (lo, hi),
            steps: path.steps,
            validation,
        },
    )
}

fn rate_certificate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    let alpha = cfg.run.alpha.unwrap_or(2.0);
    let gamma = cfg.run.gamma.unwrap_or(1.0);
    let lambda_bar = cfg.run.lambda_bar.unwrap_or(1.0);
    let mu_bar = cfg.run.mu_bar.unwrap_or(4.0);
    let mut em = Emitter::new(out_dir, cfg)?;
    let certificate = cert::optimize_rate(alpha, gamma, lambda_bar, mu_bar)
        .map_err(|e| ExpError::Config(format!("certificate inputs: {e}")))?;
    let assertions = vec![
        assert_line(
            "kappa-positive",
            certificate.kappa > 0.0,
            format!("kappa = {:.6}", certificate.kappa),
        ),
        assert_line(
            "kappa-below-peak",
            certificate.kappa < cert::m_star(lambda_bar, mu_bar),
            format!(
                "kappa {:.6} < m(c*) = {:.6}",
                certificate.kappa,
                cert::m_star(lambda_bar, mu_bar)
            ),
        ),
        assert_line(
            "prefactor-at-least-one",
            certificate.c_star_prefactor >= 1.0,
            format!("C* = {:.6}", certificate.c_star_prefactor),
        ),
    ];
    em.report(cfg, assertions, certificate)
}

fn coupling_harness(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    let BuiltEnv::Discrete(env, rates) = resolve(cfg)? else {
        return Err(ExpError::Config(
            "coupling-harness needs a discrete builtin".into(),
        ));
    };
    let mut em = Emitter::new(out_dir, cfg)?;
    let n_samples = cfg.run.samples.unwrap_or(10_000);
    let [n1, n2] = cfg.run.start_levels.unwrap_or([3, 0]);
    let lazy = cfg.spec.lazy_factor.unwrap_or(2.0);
    let horizon = cfg.run.horizon.unwrap_or(1e7);
    let m = env.m();
    let z1 = 0usize;
    let z2 = m - 1;

    let traces: Vec<coupling::CouplingTrace> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            coupling::couple_joint(
                &env,
                &rates,
                (n1, z1),
                (n2, z2),
                horizon,
                lazy,
                joint::root_replica_seed(cfg.run.seed, k as u32),
            )
        })
        .collect::<envqueue_core::Result<Vec<_>>>()
        .map_err(rt)?;

    let mut csv = String::from("replica,tau0,retries,tau,coupled\n");
    for (k, tr) in traces.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{},{},{},{}\n",
            emit::fmt_f64(tr.tau0),
            tr.j,
            emit::fmt_f64(tr.tau),
            u8::from(tr.coupled)
        ));
    }
    em.write("traces.csv", &csv)?;

    let coupled_frac = traces.iter().filter(|t| t.coupled).count() as f64 / traces.len() as f64;

    // MGF of the emptying time against the Lyapunov bound c^(n1 v n2).
    let c = 1.2f64;
    let mexp = cert::m_func(c, rates.lambda_bar, rates.mu_bar);
    let vals: Vec<f64> = traces.iter().map(|t| (mexp * t.tau0).exp()).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    let se = (var / vals.len() as f64).sqrt();
    let bound = c.powi(n1.max(n2) as i32);

    // Retry counts against the geometric bound.
    let jump = coupling::JumpCouplingSpec::from_level0(&env, lazy).ok();
    let (p, geo_ok) = match &jump {
        Some(j) => {
            let p = cert::success_prob(1.0001, j.gamma(), rates.lambda_bar).map_err(rt)?;
            let js: Vec<u32> = traces.iter().map(|t| t.j).collect();
            (p, coupling::retries_geometrically_dominated(&js, p, 10))
        }
        None => (1.0, true),
    };

    let assertions = vec![
        assert_line(
            "all-coupled",
            coupled_frac == 1.0,
            format!("{:.4} of runs coupled before the horizon", coupled_frac),
        ),
        assert_line(
            "emptying-mgf-bound",
            mean <= bound + 3.0 * se,
            format!(
                "E[e^(m(c) tau0)] = {mean:.4} (se {se:.4}) vs c^{} = {bound:.4}",
                n1.max(n2)
            ),
        ),
        assert_line(
            "retries-geometric",
            geo_ok,
            format!("success bound p = {p:.4}, k <= 10, DKW-adjusted"),
        ),
    ];
    #[derive(Serialize)]
    struct Data {
        n_samples: usize,
        start_levels: [u32; 2],
        coupled_fraction: f64,
        mgf_mean: f64,
        mgf_se: f64,
        mgf_bound: f64,
        c: f64,
        p: f64,
        mean_tau: f64,
        dkw_epsilon: f64,
    }
    let mean_tau = traces.iter().map(|t| t.tau).sum::<f64>() / traces.len() as f64;
    em.report(
        cfg,
        assertions,
        Data {
            n_samples,
            start_levels: [n1, n2],
            coupled_fraction: coupled_frac,
            mgf_mean: mean,
            mgf_se: se,
            mgf_bound: bound,
            c,
            p,
            mean_tau,
            dkw_epsilon: dkw_epsilon(n_samples, 0.05),
        },
    )
}

fn tv_decay(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    let BuiltEnv::Discrete(env, rates) = resolve(cfg)? else {
        return Err(ExpError::Config("tv-decay needs a discrete builtin".into()));
    };
    let mut em = Emitter::new(out_dir, cfg)?;
    let lazy = cfg.spec.lazy_factor.unwrap_or(2.0);
    let n_max = cfg.run.n_max.unwrap_or(60);
    let t_grid = cfg
        .run
        .t_grid
        .clone()
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
    let n0_list = cfg.run.n0_list.clone().unwrap_or_else(|| vec![0, 3, 6]);

    let (certificate, jump) = coupling::certificate_from_level0(&env, &rates, lazy).map_err(rt)?;
    // Transient law at the last grid time from the first start, as CSV.
    if let (Some(&t_last), Some(&n0)) = (t_grid.last(), n0_list.first()) {
        let gen = discrete::build_generator(&env, &rates, n_max).map_err(rt)?;
        let law = discrete::transient_law(&gen, (n0, 0), t_last).map_err(rt)?;
        em.write("law.csv", &emit::law_csv(&law, n_max, env.m()))?;
    }
    let mut reports = Vec::new();
    let mut all_ok = true;
    let mut slope_ok = true;
    for &n0 in &n0_list {
        let rep = coupling::tv_decay_check(&env, &rates, &certificate, (n0, 0), &t_grid, n_max)
            .map_err(rt)?;
        all_ok &= rep.all_bounded;
        slope_ok &= rep.slope_ok;
        reports.push(rep);
    }
    let assertions = vec![
        assert_line(
            "tv-within-envelope",
            all_ok,
            format!(
                "all {} grid points below C (1 + c^n0) e^(-kappa t)",
                t_grid.len() * n0_list.len()
            ),
        ),
        assert_line(
            "decay-rate-at-least-kappa",
            slope_ok,
            format!("kappa = {:.6}", certificate.kappa),
        ),
    ];
    #[derive(Serialize)]
    struct Data {
        certificate: cert::RateCertificate,
        ring_rate: f64,
        overlap_q: f64,
        checks: Vec<coupling::TvDecayReport>,
    }
    em.report(
        cfg,
        assertions,
        Data {
            certificate,
            ring_rate: jump.uniformization_rate,
            overlap_q: jump.q,
            checks: reports,
        },
    )
}

fn mgf_lemma(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, ExpError> {
    let alpha = cfg.run.alpha.unwrap_or(1.5);
    let beta = cfg.run.lambda_bar.unwrap_or(1.0);
    let gamma = cfg.run.gamma.unwrap_or(1.0);
    let a = cfg.run.exponent.unwrap_or(0.5);
    let n = cfg.run.samples.unwrap_or(100_000);
    let mut em = Emitter::new(out_dir, cfg)?;
    let rep = coupling::mgf_min_check(alpha, beta, gamma, a, n, cfg.run.seed, |rng| {
        -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / gamma
    })
    .map_err(|e| ExpError::Config(format!("{e}")))?;
    let assertions = vec![
        assert_line(
            "mgf-below-theta",
            rep.mgf_ok,
            format!(
                "E[e^(a min)] = {:.5} (se {:.5}) vs theta = {:.5}",
                rep.empirical_mgf, rep.mgf_se, rep.mgf_bound
            ),
        ),
        assert_line(
            "success-above-bound",
            rep.success_ok,
            format!(
                "P(eta < xi) = {:.5} vs bound {:.5}",
                rep.empirical_success, rep.success_bound
            ),
        ),
    ];
    em.report(cfg, assertions, rep)
}

/// Print the builtin catalog.
pub fn list_builtins() -> String {
    let mut out = String::new();
    for b in builtins::catalog() {
        out.push_str(&format!(
            "{:<26} params: {}\n    {}\n",
            b.name, b.parameters, b.summary
        ));
    }
    out.push_str(&format!(
        "{:<26} params: {}\n    {}\n",
        "mm1-constant",
        "lambda_bar, mu_bar (run section)",
        "single environment state with constant rates; the plain M/M/1 base case"
    ));
    out
}
