//! Probability generating functions of offspring and immigration laws.
//!
//! A [`Pgf`] is an immutable, validated law on the nonnegative integers.
//! Besides plain evaluation it offers the quantity `1 - g(1 - s)` in a form
//! that does not cancel for small `s`; the scaled functionals of the limit
//! theory multiply that difference by `k^2`, so evaluating `g` directly and
//! subtracting would lose most of the significant digits.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use crate::alias::AliasTable;
use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Finite laws with more atoms than this are sampled through an alias table.
const ALIAS_THRESHOLD: usize = 16;

/// Sums of fewer draws than this are sampled one draw at a time.
const DIRECT_SUM_THRESHOLD: u64 = 16;

/// A probability generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgf<T> {
    law: Law<T>,
}

/// The concrete law behind a [`Pgf`].
#[derive(Debug, Clone, PartialEq)]
pub enum Law<T> {
    /// `weights[j]` is the probability of `j`.
    FiniteSupport {
        weights: Vec<T>,
        alias: Option<AliasTable>,
    },
    /// `g(z) = q / (1 - p z)`, i.e. `P(j) = q p^j`.
    Geometric {
        p: T,
    },
    Poisson {
        mean: T,
    },
    /// `g(z) = z^n`.
    PointMass {
        n: u64,
    },
    /// Convex combination of other laws.
    Mixture {
        components: Vec<(T, Pgf<T>)>,
    },
}

impl<T: Real> Pgf<T> {
    pub fn finite_support(weights: Vec<T>) -> Result<Self> {
        Self::finite_support_with_tolerance(weights, 1e-12)
    }

    pub fn finite_support_with_tolerance(weights: Vec<T>, tol: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPgf("empty weight list".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidPgf(format!("negative or non-finite weight {w}")));
        }
        let total: T = weights.iter().copied().sum();
        if (total.as_f64() - 1.0).abs() > tol {
            return Err(Error::InvalidPgf(format!("weights sum to {total}, not 1")));
        }
        let alias = (weights.len() > ALIAS_THRESHOLD)
            .then(|| AliasTable::new(&weights.iter().map(|w| w.as_f64()).collect::<Vec<_>>()));
        Ok(Self {
            law: Law::FiniteSupport { weights, alias },
        })
    }

    pub fn geometric(p: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidPgf(format!("geometric p = {p} not in (0, 1)")));
        }
        Ok(Self {
            law: Law::Geometric { p },
        })
    }

    pub fn poisson(mean: T) -> Result<Self> {
        if !(mean >= T::zero()) || !mean.is_finite() {
            return Err(Error::InvalidPgf(format!("poisson mean = {mean} not >= 0")));
        }
        Ok(Self {
            law: Law::Poisson { mean },
        })
    }

    pub fn point_mass(n: u64) -> Self {
        Self {
            law: Law::PointMass { n },
        }
    }

    /// `(1 + z^2) / 2`: the critical binary law.
    pub fn binary() -> Self {
        Self::finite_support(vec![T::lit(0.5), T::zero(), T::lit(0.5)]).expect("valid law")
    }

    pub fn mixture(components: Vec<(T, Pgf<T>)>) -> Result<Self> {
        Self::mixture_with_tolerance(components, 1e-12)
    }

    pub fn mixture_with_tolerance(components: Vec<(T, Pgf<T>)>, tol: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidPgf("empty mixture".into()));
        }
        if let Some((w, _)) = components.iter().find(|(w, _)| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidPgf(format!("negative mixture weight {w}")));
        }
        let total: T = components.iter().map(|(w, _)| *w).sum();
        if (total.as_f64() - 1.0).abs() > tol {
            return Err(Error::InvalidPgf(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self {
            law: Law::Mixture { components },
        })
    }

    pub fn law(&self) -> &Law<T> {
        &self.law
    }

    /// `g(z)` for `z` in `[0, 1]`.
    pub fn eval(&self, z: T) -> Result<T> {
        if !(z >= T::zero() && z <= T::one()) {
            return Err(domain("z", z.as_f64(), "[0, 1]"));
        }
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: T) -> T {
        match &self.law {
            Law::FiniteSupport { weights, .. } => weights.iter().rev().fold(T::zero(), |acc, &w| acc * z + w),
            Law::Geometric { p } => (T::one() - *p) / (T::one() - *p * z),
            Law::Poisson { mean } => (-*mean * (T::one() - z)).exp(),
            Law::PointMass { n } => pow_u64(z, *n),
            Law::Mixture { components } => components.iter().map(|(w, g)| *w * g.eval_unchecked(z)).sum(),
        }
    }

    /// `1 - g(1 - s)` for `s` in `[0, 1]`, without cancellation at small `s`.
    pub fn one_minus_at(&self, s: T) -> Result<T> {
        if !(s >= T::zero() && s <= T::one()) {
            return Err(domain("s", s.as_f64(), "[0, 1]"));
        }
        Ok(self.one_minus_unchecked(s))
    }

    pub(crate) fn one_minus_unchecked(&self, s: T) -> T {
        // 1 - (1 - s)^j
        let power_tail = |j: T, log1m: T| -(j * log1m).exp_m1();
        match &self.law {
            Law::FiniteSupport { weights, .. } => {
                let log1m = (-s).ln_1p();
                weights
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, &w)| w * power_tail(T::from_u64_lossy(j as u64), log1m))
                    .sum()
            }
            Law::Geometric { p } => *p * s / (T::one() - *p + *p * s),
            Law::Poisson { mean } => -(-*mean * s).exp_m1(),
            Law::PointMass { n } => {
                if *n == 0 {
                    T::zero()
                } else {
                    power_tail(T::from_u64_lossy(*n), (-s).ln_1p())
                }
            }
            Law::Mixture { components } => components.iter().map(|(w, g)| *w * g.one_minus_unchecked(s)).sum(),
        }
    }

    /// `(1 - g(1 - s)) - s`, accumulated in double-length arithmetic.
    pub(crate) fn excess_unchecked(&self, s: T) -> T {
        let mut acc = Compensated::default();
        self.accumulate_tail(T::one(), s, &mut acc);
        acc.add(-s, T::zero());
        acc.value()
    }

    /// Adds `weight * (1 - g(1 - s))` to `acc`.
    fn accumulate_tail(&self, weight: T, s: T, acc: &mut Compensated<T>) {
        match &self.law {
            Law::PointMass { n } => acc.add_product(weight, exact_power_tail(*n, s)),
            Law::FiniteSupport { weights, .. } => {
                for (j, &w) in weights.iter().enumerate().skip(1) {
                    let (p, e) = two_product(weight, w);
                    let (th, tl) = exact_power_tail(j as u64, s);
                    acc.add_product(p, (th, tl));
                    acc.add(e * th, T::zero());
                }
            }
            Law::Mixture { components } => {
                for (w, g) in components {
                    let (p, e) = two_product(weight, *w);
                    g.accumulate_tail(p, s, acc);
                    if e != T::zero() {
                        acc.add(e * g.one_minus_unchecked(s), T::zero());
                    }
                }
            }
            _ => acc.add_product(weight, (self.one_minus_unchecked(s), T::zero())),
        }
    }

    /// `g'(1-)`.
    pub fn mean(&self) -> T {
        match &self.law {
            Law::FiniteSupport { weights, .. } => weights
                .iter()
                .enumerate()
                .map(|(j, &w)| T::from_u64_lossy(j as u64) * w)
                .sum(),
            Law::Geometric { p } => *p / (T::one() - *p),
            Law::Poisson { mean } => *mean,
            Law::PointMass { n } => T::from_u64_lossy(*n),
            Law::Mixture { components } => components.iter().map(|(w, g)| *w * g.mean()).sum(),
        }
    }

    /// `g''(1-)`, the second factorial moment.
    pub fn second_factorial_moment(&self) -> T {
        match &self.law {
            Law::FiniteSupport { weights, .. } => weights
                .iter()
                .enumerate()
                .map(|(j, &w)| T::from_u64_lossy((j * j.saturating_sub(1)) as u64) * w)
                .sum(),
            Law::Geometric { p } => {
                let m = *p / (T::one() - *p);
                T::lit(2.0) * m * m
            }
            Law::Poisson { mean } => *mean * *mean,
            Law::PointMass { n } => T::from_u64_lossy(n * n.saturating_sub(1)),
            Law::Mixture { components } => components.iter().map(|(w, g)| *w * g.second_factorial_moment()).sum(),
        }
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.second_factorial_moment() + m - m * m
    }

    /// `g^j(z)`, the `j`-fold composition, by functional iteration.
    pub fn compose_iterate(&self, j: u64, z: T) -> Result<T> {
        self.compose_iterate_capped(j, z, 10_000_000)
    }

    pub fn compose_iterate_capped(&self, j: u64, z: T, cap: u64) -> Result<T> {
        if !(z >= T::zero() && z <= T::one()) {
            return Err(domain("z", z.as_f64(), "[0, 1]"));
        }
        if j > cap {
            return Err(Error::IterationCap { cap });
        }
        let mut z = z;
        for _ in 0..j {
            let next = self.eval_unchecked(z);
            if next == z {
                break;
            }
            z = next;
        }
        Ok(z)
    }

    /// One draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            Law::FiniteSupport { weights, alias } => match alias {
                Some(table) => table.sample(rng) as u64,
                None => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let last = weights.len() - 1;
                    for (j, w) in weights.iter().enumerate() {
                        acc += w.as_f64();
                        if u < acc {
                            return j as u64;
                        }
                    }
                    // u landed in the roundoff gap above the cumulative sum
                    weights.iter().rposition(|w| *w > T::zero()).unwrap_or(last) as u64
                }
            },
            Law::Geometric { p } => {
                // inversion: P(X >= j) = p^j
                let u = 1.0 - rng.random::<f64>();
                (u.ln() / p.as_f64().ln()).floor() as u64
            }
            Law::Poisson { mean } => sample_poisson(mean.as_f64(), rng),
            Law::PointMass { n } => *n,
            Law::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, g) in components {
                    acc += w.as_f64();
                    if u < acc {
                        return g.sample(rng);
                    }
                }
                components
                    .iter()
                    .rev()
                    .find(|(w, _)| *w > T::zero())
                    .map(|(_, g)| g.sample(rng))
                    .unwrap_or(0)
            }
        }
    }

    /// Sum of `n` independent draws, using closed-form convolutions where
    /// they exist: Poisson and negative binomial sums directly, finite and
    /// mixture laws through a multinomial split of the `n` draws.
    pub fn sample_sum<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        if n == 0 {
            return 0;
        }
        match &self.law {
            Law::PointMass { n: m } => n.saturating_mul(*m),
            Law::Poisson { mean } => sample_poisson(n as f64 * mean.as_f64(), rng),
            Law::Geometric { p } => {
                if n < DIRECT_SUM_THRESHOLD {
                    return (0..n).map(|_| self.sample(rng)).sum();
                }
                // negative binomial as a gamma-mixed Poisson
                let p = p.as_f64();
                let rate = Gamma::new(n as f64, p / (1.0 - p))
                    .expect("valid gamma parameters")
                    .sample(rng);
                sample_poisson(rate, rng)
            }
            Law::FiniteSupport { weights, .. } => {
                if n < DIRECT_SUM_THRESHOLD {
                    return (0..n).map(|_| self.sample(rng)).sum();
                }
                let probs: Vec<f64> = weights.iter().map(|w| w.as_f64()).collect();
                let mut total = 0u64;
                multinomial(n, &probs, rng, |j, count| {
                    total = total.saturating_add((j as u64).saturating_mul(count));
                });
                total
            }
            Law::Mixture { components } => {
                let probs: Vec<f64> = components.iter().map(|(w, _)| w.as_f64()).collect();
                let mut counts = vec![0u64; components.len()];
                multinomial(n, &probs, rng, |j, count| counts[j] = count);
                components
                    .iter()
                    .zip(counts)
                    .map(|((_, g), c)| g.sample_sum(c, rng))
                    .fold(0u64, u64::saturating_add)
            }
        }
    }
}

/// `1 - (1 - s)^n` as an unevaluated sum `hi + lo`; exact for `n <= 2`.
fn exact_power_tail<T: Real>(n: u64, s: T) -> (T, T) {
    match n {
        0 => (T::zero(), T::zero()),
        1 => (s, T::zero()),
        2 => {
            // 2s - s²
            let (sq, sq_err) = two_product(s, s);
            let (hi, lo) = two_sum(s + s, -sq);
            (hi, lo - sq_err)
        }
        _ => (-(T::from_u64_lossy(n) * (-s).ln_1p()).exp_m1(), T::zero()),
    }
}

fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_product<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Running sum `hi + lo` with error-free accumulation.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated<T> {
    hi: T,
    lo: T,
}

impl<T: Real> Compensated<T> {
    fn add(&mut self, x: T, x_lo: T) {
        let (s, e) = two_sum(self.hi, x);
        self.hi = s;
        self.lo = self.lo + e + x_lo;
    }

    /// Adds `w * (t.0 + t.1)`.
    fn add_product(&mut self, w: T, t: (T, T)) {
        let (p, e) = two_product(w, t.0);
        self.add(p, e + w * t.1);
    }

    fn value(&self) -> T {
        self.hi + self.lo
    }
}

fn pow_u64<T: Real>(z: T, n: u64) -> T {
    match i32::try_from(n) {
        Ok(n) => z.powi(n),
        Err(_) => z.powf(T::from_u64_lossy(n)),
    }
}

fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("valid poisson mean").sample(rng) as u64
}

/// Splits `n` trials over categories with probabilities `probs` by
/// sequential conditional binomials, reporting each nonzero count.
fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R, mut emit: impl FnMut(usize, u64)) {
    let last = match probs.iter().rposition(|p| *p > 0.0) {
        Some(i) => i,
        None => return,
    };
    let mut remaining = n;
    let mut mass: f64 = probs[..=last].iter().sum();
    for (j, &p) in probs[..=last].iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if j == last {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            let cond = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, cond).expect("valid binomial").sample(rng)
        };
        if count > 0 {
            emit(j, count);
        }
        remaining -= count;
        mass -= p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_laws() -> Vec<Pgf<f64>> {
        vec![
            Pgf::binary(),
            Pgf::geometric(0.5).unwrap(),
            Pgf::geometric(0.3).unwrap(),
            Pgf::poisson(1.7).unwrap(),
            Pgf::point_mass(0),
            Pgf::point_mass(3),
            Pgf::finite_support((0..30).map(|_| 1.0 / 30.0).collect()).unwrap(),
            Pgf::mixture(vec![
                (0.25, Pgf::point_mass(0)),
                (0.5, Pgf::point_mass(2)),
                (0.25, Pgf::poisson(4.0).unwrap()),
            ])
            .unwrap(),
        ]
    }

    #[test]
    fn geometric_normalized_at_one() {
        assert_abs_diff_eq!(Pgf::geometric(0.5).unwrap().eval(1.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn binary_constant_term() {
        assert_eq!(Pgf::<f64>::binary().eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn geometric_half_at_half() {
        let g = Pgf::geometric(0.5).unwrap();
        // truncated series sum_j q p^j z^j, 60 terms
        let series: f64 = (0..60).map(|j| 0.5 * 0.25f64.powi(j)).sum();
        assert_abs_diff_eq!(g.eval(0.5).unwrap(), series, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval(0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_z_outside_unit_interval() {
        let g = Pgf::<f64>::binary();
        assert!(matches!(g.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(g.eval(-0.1), Err(Error::Domain { .. })));
        assert!(g.compose_iterate(2, 1.01).is_err());
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(Pgf::finite_support(vec![0.5, 0.6]).is_err());
        assert!(Pgf::finite_support(vec![-0.1, 1.1]).is_err());
        assert!(Pgf::geometric(0.0).is_err());
        assert!(Pgf::geometric(1.0).is_err());
        assert!(Pgf::poisson(-1.0).is_err());
        assert!(Pgf::mixture(vec![(0.5, Pgf::point_mass(1))]).is_err());
    }

    #[test]
    fn means() {
        assert_eq!(Pgf::geometric(0.5).unwrap().mean(), 1.0);
        assert_eq!(Pgf::<f64>::binary().mean(), 1.0);
        assert_eq!(Pgf::<f64>::point_mass(1).mean(), 1.0);
    }

    #[test]
    fn compose_examples() {
        let g = Pgf::<f64>::binary();
        assert_eq!(g.compose_iterate(0, 0.3).unwrap(), 0.3);
        assert_abs_diff_eq!(g.compose_iterate(2, 0.0).unwrap(), 0.625, epsilon = 1e-15);
        let geo = Pgf::geometric(0.5).unwrap();
        assert_abs_diff_eq!(geo.compose_iterate(2, 0.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn critical_geometric_iterate_closed_form() {
        let geo = Pgf::geometric(0.5).unwrap();
        for n in [1u64, 5, 17, 100] {
            for z in [0.0, 0.4, 0.9] {
                let nf = n as f64;
                let closed = (nf - (nf - 1.0) * z) / ((nf + 1.0) - nf * z);
                assert_abs_diff_eq!(geo.compose_iterate(n, z).unwrap(), closed, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn iteration_cap() {
        let g = Pgf::<f64>::binary();
        assert!(matches!(
            g.compose_iterate_capped(11, 0.0, 10),
            Err(Error::IterationCap { cap: 10 })
        ));
    }

    #[test]
    fn one_minus_matches_direct_difference() {
        for g in sample_laws() {
            for s in [0.0, 1e-3, 0.1, 0.5, 0.9, 1.0] {
                let direct = 1.0 - g.eval(1.0 - s).unwrap();
                assert_abs_diff_eq!(g.one_minus_at(s).unwrap(), direct, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn one_minus_keeps_relative_precision() {
        // binary: 1 - (1 + (1-s)^2)/2 = s - s^2/2
        let s = 1e-9;
        let v = Pgf::<f64>::binary().one_minus_at(s).unwrap();
        assert!(((v - (s - s * s / 2.0)) / s).abs() < 1e-14);
    }

    #[test]
    fn variance_matches_coefficients() {
        let g = Pgf::geometric(0.5).unwrap();
        // sum_j j^2 q p^j - 1
        let second: f64 = (0..200).map(|j| (j * j) as f64 * 0.5f64.powi(j + 1)).sum();
        assert_abs_diff_eq!(g.variance(), second - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_mass_sampling_is_deterministic() {
        let mut rng = RngSeed::new(1).into_state();
        let g = Pgf::<f64>::point_mass(3);
        for _ in 0..100 {
            assert_eq!(g.sample(&mut rng), 3);
        }
        assert_eq!(g.sample_sum(7, &mut rng), 21);
    }

    #[test]
    fn sample_sum_mean_and_variance() {
        let mut rng = RngSeed::new(9).into_state();
        let reps = 20_000;
        for g in sample_laws() {
            for n in [3u64, 40, 500] {
                let draws: Vec<f64> = (0..reps).map(|_| g.sample_sum(n, &mut rng) as f64).collect();
                let mean = draws.iter().sum::<f64>() / reps as f64;
                let expected = n as f64 * g.mean();
                let var = n as f64 * g.variance();
                let se = (var / reps as f64).sqrt();
                assert!(
                    (mean - expected).abs() <= 4.5 * se + 1e-12,
                    "{g:?} n={n}: mean {mean} vs {expected} (se {se})"
                );
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = Pgf::<f32>::geometric(0.5).unwrap();
        assert!((g.eval(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-6);
        assert!((Pgf::<f32>::binary().compose_iterate(2, 0.0).unwrap() - 0.625).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn monotone_convex_normalized(idx in 0usize..8) {
            let g = &sample_laws()[idx];
            prop_assert!((g.eval(1.0).unwrap() - 1.0).abs() <= 1e-12);
            let vals: Vec<f64> = (0..=100).map(|i| g.eval(i as f64 / 100.0).unwrap()).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            for w in vals.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
            for v in &vals {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }

        #[test]
        fn iteration_semigroup(idx in 0usize..8, i in 0u64..40, j in 0u64..40, z in 0.0f64..=1.0) {
            let g = &sample_laws()[idx];
            let lhs = g.compose_iterate(i + j, z).unwrap();
            let rhs = g.compose_iterate(i, g.compose_iterate(j, z).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
