//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`).
//!
//! Run with `cargo test --release --test acceptance -- --nocapture`.

use envqueue_core::builtins::{self, CyclicMode};
use envqueue_core::cert::{c_star, m_func, m_star, robert_bound, success_prob, theta_func};
use envqueue_core::coupling::{
    certificate_from_level0, couple_joint, maximal_coupling_jump, mgf_min_check,
    retries_geometrically_dominated, tv_decay_check, JumpCouplingSpec,
};
use envqueue_core::density::stationary_density_1d;
use envqueue_core::discrete::{
    build_generator, check_balance, invariant_measure_discrete, transient_law,
};
use envqueue_core::env::{BetaSeq, DiscreteEnvSpec, LevelSet, TauSpec};
use envqueue_core::fit::dkw_epsilon;
use envqueue_core::joint::{run_replicas, JointSimOptions};
use envqueue_core::rates::{RateField, RateFn};
use envqueue_core::sde::env_occupation_1d;
use envqueue_core::seed::replica_rng;
use envqueue_core::stationary::{compare_empirical, joint_invariant_1d, tv_distance};
use envqueue_oracles::{gth_stationary, spectral_gap};
use rand::Rng;
use rayon::prelude::*;

fn pass(criterion: u32, what: &str, detail: String) {
    println!("[criterion {criterion:02}] PASS - {what}: {detail}");
}

/// Closed-form invariant vector matches the dense null-space solve of the
/// truncated generator entrywise within 1e-8, interior balance residual
/// below 1e-10, for the two-state spec and the finite-walk family at
/// n_max = 40.
#[test]
fn criterion_01_discrete_invariant_measure() {
    let mut cases: Vec<(String, DiscreteEnvSpec, RateField)> = Vec::new();
    let (env, rates) = builtins::two_state(BetaSeq::One);
    cases.push(("two-state".into(), env, rates));
    for m in 2..=5usize {
        let (env, rates) = builtins::uniform_cyclic(m, CyclicMode::AllCyclic);
        cases.push((format!("cyclic m={m}"), env, rates));
        let (env, rates) = builtins::uniform_cyclic(m, CyclicMode::AllUniform(BetaSeq::One));
        cases.push((format!("uniform m={m}"), env, rates));
    }
    let (env, rates) = builtins::uniform_cyclic(4, CyclicMode::Mixed(LevelSet::Even, BetaSeq::One));
    cases.push(("mixed m=4".into(), env, rates));

    let mut worst_entry = 0.0f64;
    let mut worst_residual = 0.0f64;
    for (label, env, rates) in &cases {
        let gen = build_generator(env, rates, 40).unwrap();
        let pi = invariant_measure_discrete(env, rates, 40).unwrap();
        if label == "two-state" {
            assert!((pi.xi - 3.25).abs() < 1e-14, "Xi = {}", pi.xi);
        }
        let solved = gth_stationary(gen.dim(), &gen.rows);
        for (i, (a, b)) in pi.truncated_normalized().iter().zip(&solved).enumerate() {
            let gap = (a - b).abs();
            worst_entry = worst_entry.max(gap);
            assert!(gap <= 1e-8, "{label} entry {i}: {a} vs {b}");
        }
        let res = check_balance(&pi, &gen).unwrap();
        worst_residual = worst_residual.max(res);
        assert!(res <= 1e-10, "{label}: residual {res}");
    }
    pass(
        1,
        "discrete invariant measure",
        format!(
            "{} specs at n_max=40; worst entry gap {worst_entry:.2e}, worst residual {worst_residual:.2e}",
            cases.len()
        ),
    );
}

/// Uniformization transient law converges: TV(P^t, pi) <= 1e-6 at
/// t = 50/gap on the two-state spec, gap from the dense eigenvalue oracle.
#[test]
fn criterion_02_ergodicity() {
    let (env, rates) = builtins::two_state(BetaSeq::Geometric { ratio: 0.2 });
    let n_max = 30;
    let gen = build_generator(&env, &rates, n_max).unwrap();
    let pi = invariant_measure_discrete(&env, &rates, n_max).unwrap();
    let gap = spectral_gap(gen.dim(), &gen.rows, &gen.diag);
    let t = 50.0 / gap;
    let law = transient_law(&gen, (0, 0), t).unwrap();
    let tv = tv_distance(&law, &pi.truncated_normalized()).unwrap();
    assert!(tv <= 1e-6, "tv {tv} at t = {t}");
    pass(
        2,
        "ergodicity",
        format!("gap {gap:.5}, TV(P^t, pi) = {tv:.2e} at t = 50/gap = {t:.1}"),
    );
}

/// Diffusive joint stationarity, multiplicative model: case (a) surrogate on
/// [0, 0.9], empirical occupation vs the closed form, global TV <= 0.05 on a
/// (n <= 12) x 30 grid at dt = 1e-3, 1e7 steps, 8 replicas.
#[test]
fn criterion_03_diffusive_joint_stationarity() {
    let spec = builtins::case_a_rbm_arrival();
    let opts = JointSimOptions {
        n_cap: 12,
        bins: 30,
        burn_in_frac: 0.2,
        record_events: false,
    };
    // 1e7 steps per replica at dt = 1e-3.
    let path = run_replicas(&spec, (0, [0.45, 0.0]), 10_000.0, 1e-3, 42, 8, &opts, false).unwrap();
    assert_eq!(path.steps, 8 * 10_000_000);
    let law = joint_invariant_1d(&spec).unwrap();
    let report = compare_empirical(&law, &path).unwrap();
    assert!(
        report.global_tv <= 0.05,
        "global TV {} > 0.05",
        report.global_tv
    );
    pass(
        3,
        "diffusive joint stationarity",
        format!(
            "global TV {:.4} on 13x30 grid, Xi = {:.6}",
            report.global_tv, law.xi
        ),
    );
}

/// Threshold variant: layer marginals match the restricted quadrature within
/// 0.05 per layer for n <= 10, and the environment displacement while frozen
/// is exactly zero, for both the arrival-side and service-side examples.
#[test]
fn criterion_04_threshold_variant() {
    let cases = [
        ("arrival-side", builtins::ex31_threshold(0.5, 3)),
        ("service-side", builtins::ex32_threshold(3)),
    ];
    let mut details = Vec::new();
    for (label, spec) in cases {
        let opts = JointSimOptions {
            n_cap: 10,
            bins: 25,
            burn_in_frac: 0.2,
            record_events: false,
        };
        let (lo, hi) = spec.domain.bounds_1d().unwrap();
        let z0 = [0.5 * (lo + hi), 0.0];
        let path = run_replicas(&spec, (0, z0), 5_000.0, 1e-3, 42, 8, &opts, true).unwrap();
        assert_eq!(
            path.frozen_max_displacement, 0.0,
            "{label}: environment moved while frozen"
        );
        let occ = envqueue_core::joint::occupation_summary(&path).unwrap();
        let law = joint_invariant_1d(&spec).unwrap();
        let emp = occ.layer_masses_renormalized();
        let mut worst = 0.0f64;
        for n in 0..=10u32 {
            let analytic = law.queue_marginal(n).unwrap();
            let gap = (emp[n as usize] - analytic).abs();
            worst = worst.max(gap);
            assert!(
                gap <= 0.05,
                "{label} layer {n}: empirical {:.4} vs {:.4}",
                emp[n as usize],
                analytic
            );
        }
        details.push(format!("{label} worst layer gap {worst:.4}"));
    }
    pass(4, "threshold variant", details.join("; "));
}

/// 1-D stationary density: reciprocal drift with theta = 0.25, empirical
/// histogram vs the normalized (1-z)^(-1/2) density, TV <= 0.03.
#[test]
fn criterion_05_stationary_density_formula() {
    let spec = builtins::theta_drift(0.25);
    let bins = 25;
    let paths: Vec<_> = (0..4u64)
        .into_par_iter()
        .map(|rep| env_occupation_1d(&spec, 5_000.0, 2.5e-4, bins, 4200 + rep, 0.1).unwrap())
        .collect();
    let mut merged = vec![0.0f64; bins];
    for p in &paths {
        for (m, f) in merged.iter_mut().zip(&p.fractions) {
            *m += f / paths.len() as f64;
        }
    }
    let density = stationary_density_1d(|_| 1.0, |z| 0.25 / (1.0 - z), 0.0, 0.95).unwrap();
    // Spot-check the closed form itself.
    for z in [0.2f64, 0.6] {
        let expect = 2.0 * (1.0 - z).powf(-0.5);
        assert!((density.q(z).unwrap() - expect).abs() < 1e-6 * expect);
    }
    let expect = density.bin_masses(bins).unwrap();
    let tv = tv_distance(&merged, &expect).unwrap();
    assert!(tv <= 0.03, "tv {tv}");
    pass(
        5,
        "stationary density formula",
        format!("histogram TV {tv:.4} vs 2(1-z)^(-1/2) normalized"),
    );
}

/// Rate functions: m(1) exactly 0, m(c*) to 1e-12, theta(.,.,.,0) = 1 to
/// 1e-12 on 1e3 random triples, and continuity to 1e-6 at the removable
/// points a = beta and a = gamma.
#[test]
fn criterion_06_rate_functions() {
    assert_eq!(m_func(1.0, 1.0, 4.0), 0.0);
    assert_eq!(m_func(1.0, 0.37, 1.91), 0.0);
    assert!((m_func(c_star(1.0, 4.0), 1.0, 4.0) - m_star(1.0, 4.0)).abs() <= 1e-12);
    assert!((m_star(1.0, 4.0) - 1.0).abs() <= 1e-12);

    let mut rng = replica_rng(606, 0);
    for _ in 0..1000 {
        let alpha = 1.0 + rng.gen::<f64>() * 50.0;
        let beta = 0.01 + rng.gen::<f64>() * 10.0;
        let gamma = 0.01 + rng.gen::<f64>() * 10.0;
        let v = theta_func(alpha, beta, gamma, 0.0).unwrap();
        assert!((v - 1.0).abs() <= 1e-12, "theta(...,0) = {v}");
    }

    for (alpha, beta, gamma) in [(1.5, 1.0, 1.0), (2.0, 0.5, 2.0), (7.0, 2.0, 0.7)] {
        let at_beta = theta_func(alpha, beta, gamma, beta).unwrap();
        for d in [1e-9f64, 1e-8] {
            for s in [-1.0, 1.0] {
                let v = theta_func(alpha, beta, gamma, beta + s * d).unwrap();
                assert!((v - at_beta).abs() <= 1e-6 * at_beta);
            }
        }
        if (beta - gamma).abs() > 1e-3 {
            let at_gamma = theta_func(alpha, beta, gamma, gamma).unwrap();
            for s in [-1.0, 1.0] {
                let v = theta_func(alpha, beta, gamma, gamma + s * 1e-8).unwrap();
                assert!((v - at_gamma).abs() <= 1e-6 * at_gamma);
            }
        }
    }
    pass(
        6,
        "rate functions",
        "m(1)=0 exact, m(c*) to 1e-12, theta(..,0)=1 on 1e3 triples, limits continuous".into(),
    );
}

/// Moment-comparison lemma numerics: exact values against the bounds, and
/// Monte Carlo estimates within 3 standard errors at 1e5 samples.
#[test]
fn criterion_07_mgf_lemma() {
    let theta = theta_func(1.5, 1.0, 1.0, 0.5).unwrap();
    let exact_mgf = 4.0 / 3.0; // min of two unit exponentials at a = 1/2
    assert!(exact_mgf <= theta, "4/3 vs theta {theta}");
    let exact_p = 0.5;
    let p_bound = 1.5f64.powf(-1.0) * 0.5;
    assert!(exact_p >= p_bound);

    let rep = mgf_min_check(1.5, 1.0, 1.0, 0.5, 100_000, 7, |rng| {
        -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln()
    })
    .unwrap();
    assert!(rep.mgf_ok && rep.success_ok);
    assert!((rep.empirical_mgf - exact_mgf).abs() <= 3.0 * rep.mgf_se);
    assert!((rep.empirical_success - exact_p).abs() <= 3.0 * rep.success_se);
    pass(
        7,
        "moment-comparison lemma",
        format!(
            "E = {:.4} (exact 4/3) <= theta = {theta:.4}; P = {:.4} >= {p_bound:.4}",
            rep.empirical_mgf, rep.empirical_success
        ),
    );
}

/// Shared-ring coupling bound: for lazified two-state kernels with
/// q in {0, 0.5}, the empirical survival of the coupling time stays below
/// exp(-(1-q) Lambda t) plus the 95% DKW band on a 20-point grid.
#[test]
fn criterion_08_ring_coupling_bound() {
    let (env, _) = builtins::two_state(BetaSeq::One);
    let mut details = Vec::new();
    for lazy in [2.0, 4.0] {
        let spec = JumpCouplingSpec::from_level0(&env, lazy).unwrap();
        let expect_q = if lazy == 2.0 { 0.0 } else { 0.5 };
        assert!((spec.q - expect_q).abs() < 1e-12, "q = {}", spec.q);
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                maximal_coupling_jump(&spec, 0, 1, 800_000 + k as u64)
                    .unwrap()
                    .tau
            })
            .collect();
        let eps = dkw_epsilon(n, 0.05);
        let rate = spec.gamma();
        let t_max = 2.0;
        for k in 1..=20 {
            let t = t_max * k as f64 / 20.0;
            let surv = samples.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            let bound = (-rate * t).exp() + eps;
            assert!(
                surv <= bound,
                "q={expect_q}: survival {surv} > {bound} at t={t}"
            );
        }
        details.push(format!("q={expect_q}: rate {rate:.2}"));
    }
    pass(
        8,
        "ring coupling bound",
        format!("{} (10k runs each, 20-point grid)", details.join("; ")),
    );
}

/// Coupling harness: with a single-state environment and rates (1, 4) from
/// starts (3, 0), the emptying-time MGF honours the Lyapunov bound
/// E[e^{m(c) tau0}] <= c^3; with a slow two-state environment the retry
/// count is geometrically dominated on k <= 10.
#[test]
fn criterion_09_coupling_harness() {
    // Single-state environment: tau = tau0.
    let env = DiscreteEnvSpec {
        states: vec![0.25],
        weights: vec![1.0],
        tau: TauSpec::Scaled {
            base: vec![vec![0.0]],
            beta: BetaSeq::One,
        },
    };
    let rates = RateField::new(
        RateFn::Constant { value: 1.0 },
        RateFn::Constant { value: 4.0 },
        1.0,
        4.0,
    )
    .unwrap();
    let c: f64 = 1.2;
    let m = m_func(c, 1.0, 4.0);
    let n = 10_000;
    let traces: Vec<_> = (0..n)
        .into_par_iter()
        .map(|k| couple_joint(&env, &rates, (3, 0), (0, 0), 1e6, 2.0, 90_000 + k as u64).unwrap())
        .collect();
    assert!(traces.iter().all(|t| t.coupled));
    assert!(traces.iter().all(|t| t.j == 0));
    let vals: Vec<f64> = traces.iter().map(|t| (m * t.tau0).exp()).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let se = (var / n as f64).sqrt();
    let bound = c.powi(3);
    assert!(
        mean <= bound + 3.0 * se,
        "E[e^(m tau0)] = {mean} (se {se}) vs {bound}"
    );

    // Two-state environment slowed down so retries occur.
    let (mut env2, rates2) = builtins::two_state(BetaSeq::One);
    if let TauSpec::Scaled { base, .. } = &mut env2.tau {
        base[0][1] = 0.3;
        base[1][0] = 0.3;
    }
    let jump = JumpCouplingSpec::from_level0(&env2, 2.0).unwrap();
    let p = success_prob(1.0001, jump.gamma(), rates2.lambda_bar).unwrap();
    let js: Vec<u32> = (0..4000)
        .into_par_iter()
        .map(|k| {
            couple_joint(&env2, &rates2, (3, 0), (0, 1), 1e6, 2.0, 50_000 + k as u64)
                .unwrap()
                .j
        })
        .collect();
    assert!(retries_geometrically_dominated(&js, p, 10));
    pass(
        9,
        "coupling harness",
        format!(
            "E[e^(m(1.2) tau0)] = {mean:.4} (se {se:.4}) <= c^3 = {bound:.4}; retries dominated by Geometric({p:.3})"
        ),
    );
}

/// End-to-end decay check: certificate from the level-0 ring constants
/// (alpha = 1.0001, gamma = (1-q) Lambda) bounds the exact transient TV of
/// the truncated joint chain at every grid time for n0 in {0, 3, 6}, and the
/// fitted decay rate is at least kappa.
#[test]
fn criterion_10_tv_decay_certificate() {
    let (env, rates) = builtins::two_state(BetaSeq::Geometric { ratio: 0.2 });
    let (cert, jump) = certificate_from_level0(&env, &rates, 2.0).unwrap();
    assert!((jump.gamma() - 2.0).abs() < 1e-12);
    assert!(cert.kappa > 0.0);
    let t_grid = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut fitted = Vec::new();
    for n0 in [0u32, 3, 6] {
        let rep = tv_decay_check(&env, &rates, &cert, (n0, 0), &t_grid, 60).unwrap();
        for p in &rep.points {
            assert!(
                p.tv <= p.bound,
                "n0={n0}, t={}: TV {} > bound {}",
                p.t,
                p.tv,
                p.bound
            );
        }
        assert!(
            rep.fitted_rate >= cert.kappa,
            "n0={n0}: fitted rate {} < kappa {}",
            rep.fitted_rate,
            cert.kappa
        );
        fitted.push(rep.fitted_rate);
    }
    pass(
        10,
        "tv decay certificate",
        format!(
            "kappa = {:.4}, fitted rates {:?}",
            cert.kappa,
            fitted
                .iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    );
}

/// The certified machinery is consistent with the classical single-queue
/// bound: exact M/M/1 transient TV stays below
/// (1 + rho_bar^{-n/2}) exp(-(sqrt(mu)-sqrt(lambda))^2 t).
#[test]
fn criterion_11_classical_bound_consistency() {
    let env = DiscreteEnvSpec {
        states: vec![0.25],
        weights: vec![1.0],
        tau: TauSpec::Scaled {
            base: vec![vec![0.0]],
            beta: BetaSeq::One,
        },
    };
    let rates = RateField::new(
        RateFn::Constant { value: 1.0 },
        RateFn::Constant { value: 4.0 },
        1.0,
        4.0,
    )
    .unwrap();
    let n_max = 30;
    let gen = build_generator(&env, &rates, n_max).unwrap();
    let pi = invariant_measure_discrete(&env, &rates, n_max).unwrap();
    let pi_t = pi.truncated_normalized();
    let mut worst_margin = f64::INFINITY;
    for n in [0u32, 2, 5] {
        for t in [0.5, 1.0, 2.0, 5.0] {
            let law = transient_law(&gen, (n, 0), t).unwrap();
            let tv = tv_distance(&law, &pi_t).unwrap();
            let bound = robert_bound(n, 1.0, 4.0, t).unwrap();
            assert!(tv <= bound, "n={n}, t={t}: TV {tv} > bound {bound}");
            worst_margin = worst_margin.min(bound - tv);
        }
    }
    pass(
        11,
        "classical bound consistency",
        format!("12 (n, t) pairs, smallest margin {worst_margin:.4}"),
    );
}

/// Reruns of the same config with the same root seed produce byte-identical
/// CSV artifacts, via the actual binary.
#[test]
fn criterion_12_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_envqueue");
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("exp.toml");
    std::fs::write(
        &config_path,
        "kind = \"stationary-diffusive\"\n\
         [run]\nseed = 7\nreplicas = 2\nhorizon = 200.0\ndt = 0.001\nn_max = 8\nbins = 12\n\
         tolerance = 0.9\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = tmp.path().join(sub);
        let status = std::process::Command::new(bin)
            .args(["run"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success(), "run {sub} failed");
        let mut files: Vec<_> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let contents: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect();
        outputs.push(contents);
    }
    assert_eq!(outputs[0].len(), outputs[1].len());
    assert!(outputs[0].iter().any(|(name, _)| name.ends_with(".csv")));
    for ((name_a, bytes_a), (name_b, bytes_b)) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(name_a, name_b);
        assert_eq!(
            bytes_a, bytes_b,
            "artifact {name_a} differs between identical runs"
        );
    }
    pass(
        12,
        "reproducibility",
        format!(
            "{} artifacts byte-identical across reruns",
            outputs[0].len()
        ),
    );
}
