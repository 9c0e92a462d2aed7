//! Monte Carlo checks of samplers and chains against exact generating functions.

use branching_limit::stats::{replicate, Estimate};
use branching_limit::{DbiProcess, Pgf, RngSeed, Tolerances};

fn band(est: &Estimate, exact: f64) -> bool {
    (est.mean - exact).abs() <= 4.0 * est.se + 1e-12
}

fn empirical_pgf(pgf: &Pgf, z: f64, n: usize, seed: u64) -> Estimate {
    let draws = replicate(n, RngSeed::new(seed), |_, s| {
        let mut rng = s.into_state();
        pgf.sample(&mut rng)
    });
    Estimate::from_samples(draws.into_iter().map(|x| z.powi(x as i32)))
}

#[test]
fn samplers_reproduce_their_pgf() {
    let laws = [
        Pgf::finite_support(vec![0.2, 0.5, 0.0, 0.3]).unwrap(),
        Pgf::finite_support((0..40).map(|_| 1.0 / 40.0).collect()).unwrap(),
        Pgf::geometric(0.6).unwrap(),
        Pgf::poisson(3.5).unwrap(),
        Pgf::poisson(250.0).unwrap(),
        Pgf::binary(),
        Pgf::mixture(vec![(0.3, Pgf::point_mass(2)), (0.7, Pgf::poisson(1.2).unwrap())]).unwrap(),
    ];
    for (i, g) in laws.iter().enumerate() {
        for z in [0.3, 0.8, 0.99] {
            let est = empirical_pgf(g, z, 40_000, i as u64);
            let exact = g.eval(z).unwrap();
            assert!(band(&est, exact), "law {i} at z = {z}: {} vs {exact}", est.mean);
        }
    }
}

#[test]
fn sample_sum_matches_power_of_pgf() {
    let g = Pgf::geometric(0.4).unwrap();
    for n in [0u64, 3, 50, 400] {
        let draws = replicate(20_000, RngSeed::new(11).derive(n), |_, s| {
            let mut rng = s.into_state();
            g.sample_sum(n, &mut rng)
        });
        let z: f64 = 0.97;
        let est = Estimate::from_samples(draws.iter().map(|&x| z.powf(x as f64)));
        let exact = g.eval(z).unwrap().powi(n as i32);
        assert!(band(&est, exact), "n = {n}: {} vs {exact}", est.mean);
    }
}

#[test]
fn one_step_mean_is_101() {
    let p = DbiProcess::new(Pgf::binary(), Pgf::point_mass(1));
    let draws = replicate(100_000, RngSeed::new(3), |_, s| {
        let mut rng = s.into_state();
        p.step(100, &mut rng) as f64
    });
    let est = Estimate::from_samples(draws);
    assert!((est.mean - 101.0).abs() <= 0.1, "mean {} se {}", est.mean, est.se);
    assert_eq!(p.mean_after_n(100, 1), 101.0);
}

#[test]
fn transition_pgf_matches_simulation() {
    let p = DbiProcess::new(Pgf::poisson(0.9).unwrap(), Pgf::geometric(0.3).unwrap());
    for i in [0u64, 1, 7, 60] {
        let draws = replicate(30_000, RngSeed::new(5).derive(i), |_, s| {
            let mut rng = s.into_state();
            p.step(i, &mut rng)
        });
        for z in [0.5, 0.9] {
            let est = Estimate::from_samples(draws.iter().map(|&y| f64::powf(z, y as f64)));
            let exact = p.transition_pgf(i, z).unwrap();
            assert!(band(&est, exact), "i = {i}, z = {z}: {} vs {exact}", est.mean);
        }
    }
}

#[test]
fn n_step_law_is_the_iterated_pgf() {
    // E z^{y(n)} = g^n(z)^{y0} without immigration
    let g = Pgf::finite_support(vec![0.3, 0.3, 0.4]).unwrap();
    let p = DbiProcess::without_immigration(g.clone());
    let (y0, n) = (3u64, 6usize);
    let finals = replicate(40_000, RngSeed::new(8), |_, s| {
        p.simulate_path(y0, n, s).unwrap().last()
    });
    for z in [0.2, 0.7] {
        let est = Estimate::from_samples(finals.iter().map(|&y| f64::powf(z, y as f64)));
        let exact = g.compose_iterate(n as u64, z).unwrap().powi(y0 as i32);
        assert!(band(&est, exact), "z = {z}: {} vs {exact}", est.mean);
    }
}

#[test]
fn branching_property() {
    // a chain from i + j has the law of independent chains from i and j added
    let g = Pgf::poisson(1.1).unwrap();
    let p = DbiProcess::without_immigration(g);
    let run = |y0: u64, seed: u64| {
        replicate(30_000, RngSeed::new(seed), |_, s| {
            p.simulate_path(y0, 5, s).unwrap().last()
        })
    };
    let joint = run(5, 21);
    let (a, b) = (run(2, 22), run(3, 23));
    let z: f64 = 0.8;
    let lhs = Estimate::from_samples(joint.iter().map(|&y| z.powf(y as f64)));
    let rhs = Estimate::from_samples(a.iter().zip(&b).map(|(&x, &y)| z.powf((x + y) as f64)));
    let gap = (lhs.mean - rhs.mean).abs();
    assert!(
        gap <= 4.0 * (lhs.se.powi(2) + rhs.se.powi(2)).sqrt(),
        "{} vs {}",
        lhs.mean,
        rhs.mean
    );
}

#[test]
fn extinction_probability() {
    // q = exp(1.5 (q - 1)) for Poisson(1.5) offspring
    let g = Pgf::poisson(1.5).unwrap();
    let mut q = 0.0;
    for _ in 0..500 {
        q = g.eval(q).unwrap();
    }
    assert!((q - (1.5 * (q - 1.0)).exp()).abs() < 1e-14);
    let q25 = g.compose_iterate(25, 0.0).unwrap();
    assert!((q25 - q).abs() < 1e-4);

    let p = DbiProcess::without_immigration(g);
    let dead = replicate(20_000, RngSeed::new(31), |_, s| {
        p.simulate_path(1, 25, s).unwrap().last() == 0
    });
    let est = Estimate::from_samples(dead.into_iter().map(|d| if d { 1.0 } else { 0.0 }));
    let c = est.compare(
        q25,
        &Tolerances {
            abs_tol: 0.0,
            ..Tolerances::default()
        },
    );
    assert!(c.pass, "{} vs {q25}, z = {}", est.mean, c.z_score);
}
