//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use rand::Rng;

use branching_limit::cbi::{quadratic_psi_oracle, solve_psi};
use branching_limit::harness::{self, ExperimentConfig, Report};
use branching_limit::mechanisms::Compensator;
use branching_limit::rayknight::{sde_cross_validate, Direction, SdeSettings};
use branching_limit::scaling::{
    compute_fk, compute_rk, compute_sk, drift_functional, embed, embed_auto, limit_functionals,
};
use branching_limit::{BranchingMechanism, CbiLaw, DriftedBm, ImmigrationMechanism, LevyAtoms, RngSeed, ScalingScheme};

const SEED: u64 = 20_240_601;

type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).expect("valid acceptance config")
}

fn table_value(report: &Report, table: &str, filter: &[(&str, &str)], column: &str) -> f64 {
    let t = report.table(table).expect("table present");
    let idx = |name: &str| t.column(name).unwrap_or_else(|| panic!("column {name}"));
    let row = t
        .rows
        .iter()
        .find(|r| filter.iter().all(|(c, v)| r[idx(c)] == *v))
        .unwrap_or_else(|| panic!("row {filter:?} in {table}"));
    row[idx(column)].parse().unwrap()
}

/// `|emp - target| <= 3 se + 0.01` for the row of `table` matching `filter`.
fn band_check(report: &Report, table: &str, filter: &[(&str, &str)], target: f64) -> (bool, String) {
    let emp = table_value(report, table, filter, "empirical");
    let se = table_value(report, table, filter, "se");
    let ok = (emp - target).abs() <= 3.0 * se + 0.01;
    (ok, format!("{emp:.5} +- {se:.5} vs {target:.5}"))
}

fn c1_psi_oracle() -> Outcome {
    let mut rng = RngSeed::new(SEED).derive(1).into_state();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let beta = rng.random_range(-1.0..=1.0);
        let alpha = rng.random_range(0.1..=2.0);
        let lambda = rng.random_range(0.0..=5.0);
        let t = rng.random_range(0.0..=2.0);
        let r = BranchingMechanism::quadratic(beta, alpha).unwrap();
        let psi = solve_psi(&r, lambda, t, 1e-10).unwrap().psi_end();
        worst = worst.max((psi - quadratic_psi_oracle(beta, alpha, lambda, t)).abs());
    }
    outcome(worst <= 1e-8, format!("max |psi - oracle| = {worst:.2e} (bound 1e-8)"))
}

fn random_atoms<R: Rng>(rng: &mut R) -> LevyAtoms {
    let n = rng.random_range(0..=3);
    LevyAtoms::new(
        (0..n)
            .map(|_| (rng.random_range(0.1..2.0), rng.random_range(0.05..1.0)))
            .collect(),
    )
    .unwrap()
}

fn c2_embedding() -> Outcome {
    let mut rng = RngSeed::new(SEED).derive(2).into_state();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let beta = rng.random_range(-0.3..=0.3);
        let alpha = rng.random_range(0.05..=0.5);
        let r = BranchingMechanism::new(beta, alpha, random_atoms(&mut rng), Compensator::Linear).unwrap();
        let b = rng.random_range(0.0..=1.0);
        let f = ImmigrationMechanism::new(b, random_atoms(&mut rng)).unwrap();
        for k in [10u64, 100, 1000] {
            let pair = embed_auto(&r, &f, k).unwrap();
            for i in 0..=200 {
                let lambda = k as f64 / 2.0 * i as f64 / 200.0;
                let er = (compute_rk(&pair.g_k, &pair.scheme, lambda).unwrap() - r.eval(lambda)).abs();
                let ef = (compute_fk(&pair.h_k, &pair.scheme, lambda).unwrap() - f.eval(lambda)).abs();
                worst = worst.max(er).max(ef);
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max |R_k - R|, |F_k - F| = {worst:.2e} (bound 1e-10)"),
    )
}

fn c3_second_order() -> Outcome {
    let r = BranchingMechanism::quadratic(0.0, 0.5).unwrap();
    let f = ImmigrationMechanism::zero();
    let mut gaps = Vec::new();
    let mut drift_gap = f64::NAN;
    for k in [10u64, 100, 1000, 10_000] {
        let pair = embed(&r, &f, ScalingScheme::standard(k)).unwrap();
        gaps.push((compute_sk(&pair.g_k, &pair.scheme, 2.0).unwrap() + 4.0).abs());
        if k == 1000 {
            drift_gap = (drift_functional(&pair.g_k, &pair.scheme, 1.0).unwrap() - 1.0).abs();
        }
    }
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let ok = monotone && gaps[2] <= 0.01 && drift_gap <= 0.002;
    outcome(
        ok,
        format!(
            "|S_k(2) + 4| over k = 10..1e4: {}; drift gap at 1e3 = {drift_gap:.2e}",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c4_generator() -> Outcome {
    let report = harness::run(
        &config(
            r#"{"schema_version": 1, "experiment": {"kind": "generator-table",
                "mechanism": {"beta": 0.0, "alpha": 0.5}, "immigration": {"b": 1.0},
                "k_list": [50, 200, 800], "lambda": 1.0, "x_max": 4.0, "x_step": 0.02}}"#,
        ),
        SEED,
        1,
    )
    .unwrap();
    let sups: Vec<f64> = ["50", "200", "800"]
        .iter()
        .map(|k| table_value(&report, "generator_sup", &[("k", k)], "sup_diff"))
        .collect();
    let ok = sups.windows(2).all(|w| w[1] < w[0]) && sups[2] <= 0.02;
    outcome(ok, format!("sup |A_k e - A e| = {sups:.5?}"))
}

fn limit_config(n: usize, immigration: f64, k: u64) -> ExperimentConfig {
    config(&format!(
        r#"{{"schema_version": 1, "n_paths": {n}, "experiment": {{"kind": "limit-verify",
            "mechanism": {{"beta": 0.0, "alpha": 0.5}}, "immigration": {{"b": {immigration}}},
            "k_list": [{k}], "x": 1.0, "t_list": [1.0], "lambda_list": [1.0]}}}}"#
    ))
}

fn c5_limit() -> Outcome {
    let with = harness::run(&limit_config(100_000, 1.0, 200), SEED, 1).unwrap();
    let without = harness::run(&limit_config(100_000, 0.0, 200), SEED.wrapping_add(1), 1).unwrap();
    let row = [("k", "200"), ("t", "1"), ("lambda", "1")];
    let (ok1, d1) = band_check(&with, "limit", &row, 0.22823);
    let (ok2, d2) = band_check(&without, "limit", &row, (-2.0f64 / 3.0).exp());
    outcome(ok1 && ok2, format!("F = lambda: {d1}; pure CB: {d2}"))
}

fn c6_composition() -> Outcome {
    let r = BranchingMechanism::quadratic(0.0, 0.5).unwrap();
    let f = ImmigrationMechanism::drift(1.0).unwrap();
    let law = CbiLaw::new(r.clone(), f.clone(), 1.0).unwrap();
    let pair = embed(&r, &f, ScalingScheme::standard(200)).unwrap();
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 1.0, 2.0] {
        for lambda in [0.5, 1.0, 2.0] {
            let v = limit_functionals(&pair, 1.0, t, lambda).unwrap();
            let (psi, integral) = law.exponents(t, lambda, 1e-10).unwrap();
            worst = worst
                .max((v.phi1 - (-psi).exp()).abs())
                .max((v.phi2 - (-integral).exp()).abs());
        }
    }
    outcome(worst <= 0.01, format!("max deviation = {worst:.5} (bound 0.01)"))
}

fn rayknight_config(n: usize, beta: f64, direction: Direction, k: u64) -> ExperimentConfig {
    let dir = match direction {
        Direction::Upward => "upward",
        Direction::Downward => "downward",
    };
    config(&format!(
        r#"{{"schema_version": 1, "n_paths": {n}, "experiment": {{"kind": "rayknight-verify",
            "alpha": 0.5, "beta": {beta}, "direction": "{dir}", "k_list": [{k}],
            "u": 1.0, "a": 1.0, "t_list": [1.0], "lambda_list": [1.0]}}}}"#
    ))
}

fn c7_upward() -> Outcome {
    let row = [("k", "100"), ("t", "1"), ("lambda", "1")];
    let critical = harness::run(&rayknight_config(100_000, 0.0, Direction::Upward, 100), SEED, 1).unwrap();
    let fixed = harness::run(
        &rayknight_config(100_000, 0.5, Direction::Upward, 100),
        SEED.wrapping_add(1),
        1,
    )
    .unwrap();
    let (ok1, d1) = band_check(&critical, "rayknight", &row, (-0.5f64).exp());
    let (ok2, d2) = band_check(&fixed, "rayknight", &row, (-1.0f64).exp());
    outcome(ok1 && ok2, format!("beta = 0: {d1}; beta = alpha: {d2}"))
}

fn c8_downward() -> Outcome {
    let row = [("k", "100"), ("t", "1"), ("lambda", "1")];
    let report = harness::run(&rayknight_config(100_000, 0.0, Direction::Downward, 100), SEED, 1).unwrap();
    let (ok, d) = band_check(&report, "rayknight", &row, 0.5 * (-0.5f64).exp());
    outcome(ok, d)
}

fn c9_sde() -> Outcome {
    let bm = DriftedBm::new(0.5, 0.0).unwrap();
    let settings = SdeSettings::default();
    let report = match sde_cross_validate(&bm, &settings, RngSeed::new(SEED).derive(9)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("{e}")),
    };
    let occ_ok = report.occupation.iter().all(|o| o.relative_error <= 0.05);
    let occ: Vec<String> = report
        .occupation
        .iter()
        .map(|o| format!("[{}, {}] {:.4}", o.lo, o.hi, o.relative_error))
        .collect();
    let xi = report
        .marginals
        .iter()
        .find(|m| m.direction == Direction::Upward && m.t == 1.0)
        .expect("upward marginal at t = 1");
    let mean_ok = (xi.mean.mean - settings.u).abs() <= 3.0 * xi.mean.se;
    outcome(
        occ_ok && mean_ok,
        format!(
            "occupation relative error {}; xi_u(1) mean {:.4} +- {:.4} vs u = {}; {} censored of {}",
            occ.join(", "),
            xi.mean.mean,
            xi.mean.se,
            settings.u,
            report.censored,
            settings.n_paths
        ),
    )
}

fn c10_reproducibility() -> Outcome {
    let mut cases = vec![
        ("limit", limit_config(5_000, 1.0, 50)),
        ("rayknight", rayknight_config(5_000, 0.0, Direction::Downward, 50)),
    ];
    let mut sde = rayknight_config(2_000, 0.0, Direction::Upward, 20);
    if let harness::Experiment::RayknightVerify(spec) = &mut sde.experiment {
        spec.sde = Some(SdeSettings {
            k: 10,
            n_paths: 40,
            ..SdeSettings::default()
        });
    }
    cases.push(("rayknight + sde", sde));
    let mut details = Vec::new();
    let mut ok = true;
    for (name, cfg) in &cases {
        let a = harness::run(cfg, SEED, 1).unwrap();
        let b = harness::run(cfg, SEED, 1).unwrap();
        let c = harness::run(cfg, SEED, 8).unwrap();
        let same = a == b && a == c;
        ok &= same;
        details.push(format!("{name}: {}", if same { "identical" } else { "differs" }));
    }
    // the oracle criteria draw their inputs from the same seeded streams
    let again = c1_psi_oracle().detail == c1_psi_oracle().detail;
    ok &= again;
    details.push(format!("psi draws: {}", if again { "identical" } else { "differs" }));
    outcome(ok, details.join("; "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "psi solver vs Riccati oracle", c1_psi_oracle, Duration::from_secs(5)),
        (2, "embedding exactness", c2_embedding, Duration::from_secs(10)),
        (
            3,
            "second-order and drift functionals",
            c3_second_order,
            Duration::from_secs(5),
        ),
        (4, "generator convergence", c4_generator, Duration::from_secs(5)),
        (
            5,
            "scaling limit Laplace functionals",
            c5_limit,
            Duration::from_secs(120),
        ),
        (6, "composition functionals", c6_composition, Duration::from_secs(5)),
        (7, "upward downcrossing chain", c7_upward, Duration::from_secs(120)),
        (8, "downward downcrossing chain", c8_downward, Duration::from_secs(120)),
        (9, "SDE cross-validation", c9_sde, Duration::from_secs(300)),
        (10, "reproducibility", c10_reproducibility, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (n, name, check, budget) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = o.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {n:>2} [{}] {name}: {} ({:.2}s, budget {}s{})",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
