//! Monte Carlo estimates and the pass rule used by every campaign.
//!
//! Replicates run on the current rayon pool. Replicate `i` draws from
//! stream `i` of the campaign seed and results are reduced in index order,
//! so estimates are bit-identical for any number of worker threads.

use rayon::prelude::*;

use crate::rng::RngSeed;
use crate::tolerances::Tolerances;

/// Runs `n` replicates, replicate `i` on `seed.stream(i)`, returning results in index order.
pub fn replicate<R, F>(n: usize, seed: RngSeed, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64, RngSeed) -> R + Sync + Send,
{
    (0..n as u64).into_par_iter().map(|i| f(i, seed.stream(i))).collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        // Welford, in the order given
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let se = if n > 1 {
            (m2 / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.se, self.mean + z * self.se)
    }

    pub fn compare(&self, theoretical: f64, tol: &Tolerances) -> Comparison {
        Comparison::new(*self, theoretical, tol)
    }
}

/// Column-wise estimates of equally long sample vectors.
pub fn estimate_columns(rows: &[Vec<f64>]) -> Vec<Estimate> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .map(|j| Estimate::from_samples(rows.iter().map(|r| r[j])))
        .collect()
}

/// An empirical estimate against its theoretical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub estimate: Estimate,
    pub theoretical: f64,
    pub z_score: f64,
    pub pass: bool,
}

impl Comparison {
    /// Passes iff `|empirical - theoretical| <= z_crit * SE + abs_tol`.
    pub fn new(estimate: Estimate, theoretical: f64, tol: &Tolerances) -> Self {
        let diff = estimate.mean - theoretical;
        let z_score = if estimate.se > 0.0 {
            diff / estimate.se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            estimate,
            theoretical,
            z_score,
            pass: diff.abs() <= tol.z_crit * estimate.se + tol.abs_tol,
        }
    }

    pub fn abs_error(&self) -> f64 {
        (self.estimate.mean - self.theoretical).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn estimate_of_known_samples() {
        let e = Estimate::from_samples([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3
        assert_abs_diff_eq!(e.se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert_eq!(Estimate::from_samples([7.0]).se, 0.0);
    }

    #[test]
    fn pass_rule() {
        let tol = Tolerances::default();
        let e = Estimate {
            mean: 0.5,
            se: 0.01,
            n: 100,
        };
        assert!(e.compare(0.539, &tol).pass);
        assert!(!e.compare(0.541, &tol).pass);
        let exact = Estimate {
            mean: 1.0,
            se: 0.0,
            n: 10,
        };
        assert_eq!(exact.compare(1.0, &tol).z_score, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let xs = replicate(2000, RngSeed::new(11), |_, s| s.into_state().random::<f64>());
                Estimate::from_samples(xs)
            })
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn standard_error_scales_with_sample_size() {
        let se = |n: usize| {
            let xs = replicate(n, RngSeed::new(5), |_, s| s.into_state().random::<f64>());
            Estimate::from_samples(xs).se
        };
        let ratio = se(4000) / se(16000);
        assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
    }
}
