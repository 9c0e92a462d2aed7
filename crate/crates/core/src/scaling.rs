//! Scaled functionals of a sequence of discrete chains and the
//! construction of chains whose scaled functionals equal a given `(R, F)`.
//!
//! With `γ_k` the time scale and `k` the space scale:
//!
//! ```text
//! F_k(λ) = γ_k [1 - h_k(1 - λ/k)]                 0 <= λ <= k
//! R_k(λ) = k γ_k [(1 - λ/k) - g_k(1 - λ/k)]        0 <= λ <= k
//! S_k(λ) = k γ_k [(1 - λ/k) - g_k(e^{-λ/k})]       λ >= 0
//! ```

use crate::error::{domain, Error, Result};
use crate::mechanisms::{BranchingMechanism, Compensator, ImmigrationMechanism};
use crate::pgf::Pgf;
use crate::scalar::Real;

/// Space scale `k` with time scale `γ_k = γ₀ k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingScheme<T> {
    pub k: u64,
    pub gamma_k: T,
    pub gamma0: T,
}

impl<T: Real> ScalingScheme<T> {
    /// `γ_k = k`.
    pub fn standard(k: u64) -> Self {
        Self::linear(k, T::one()).expect("unit rate is valid")
    }

    /// `γ_k = c k`, so `γ_k / k → c`.
    pub fn linear(k: u64, c: T) -> Result<Self> {
        if k == 0 {
            return Err(domain("k", 0.0, "k >= 1"));
        }
        if !(c > T::zero()) || !c.is_finite() {
            return Err(domain("gamma0", c.as_f64(), "(0, inf)"));
        }
        Ok(Self {
            k,
            gamma_k: c * T::from_u64_lossy(k),
            gamma0: c,
        })
    }

    pub fn k_real(&self) -> T {
        T::from_u64_lossy(self.k)
    }

    /// Number of chain steps covering time `t`: `[γ_k t]`.
    pub fn steps(&self, t: T) -> u64 {
        (self.gamma_k * t).floor().to_u64().unwrap_or(0)
    }
}

fn check_lambda_in_range<T: Real>(lambda: T, k: T) -> Result<()> {
    if !(lambda >= T::zero() && lambda <= k) {
        return Err(domain("lambda", lambda.as_f64(), "[0, k]"));
    }
    Ok(())
}

/// `F_k(λ) = γ_k [1 - h_k(1 - λ/k)]`.
pub fn compute_fk<T: Real>(h: &Pgf<T>, scheme: &ScalingScheme<T>, lambda: T) -> Result<T> {
    let k = scheme.k_real();
    check_lambda_in_range(lambda, k)?;
    Ok(scheme.gamma_k * h.one_minus_unchecked(lambda / k))
}

/// `R_k(λ) = k γ_k [(1 - λ/k) - g_k(1 - λ/k)]`.
pub fn compute_rk<T: Real>(g: &Pgf<T>, scheme: &ScalingScheme<T>, lambda: T) -> Result<T> {
    let k = scheme.k_real();
    check_lambda_in_range(lambda, k)?;
    let s = lambda / k;
    Ok(k * scheme.gamma_k * g.excess_unchecked(s))
}

/// `S_k(λ) = k γ_k [(1 - λ/k) - g_k(e^{-λ/k})]`.
pub fn compute_sk<T: Real>(g: &Pgf<T>, scheme: &ScalingScheme<T>, lambda: T) -> Result<T> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(domain("lambda", lambda.as_f64(), "[0, inf)"));
    }
    let k = scheme.k_real();
    let s = -(-lambda / k).exp_m1();
    Ok(k * scheme.gamma_k * (g.one_minus_unchecked(s) - lambda / k))
}

/// `γ_k [1 - g_k(e^{-λ/k})]`, whose limit is `γ₀ λ`.
pub fn drift_functional<T: Real>(g: &Pgf<T>, scheme: &ScalingScheme<T>, lambda: T) -> Result<T> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(domain("lambda", lambda.as_f64(), "[0, inf)"));
    }
    let s = -(-lambda / scheme.k_real()).exp_m1();
    Ok(scheme.gamma_k * g.one_minus_unchecked(s))
}

/// Offspring and immigration laws at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPair<T> {
    pub g_k: Pgf<T>,
    pub h_k: Pgf<T>,
    pub scheme: ScalingScheme<T>,
}

/// Builds `g_k(z) = z - R(k(1-z))/(k γ_k)` and `h_k(z) = 1 - F(k(1-z))/γ_k`.
///
/// Each jump atom `(u, w)` contributes `e^{-ku(1-z)}`, the generating
/// function of Poisson(`ku`), so both laws are mixtures of `1`, `z`, `z²`
/// and Poisson laws. By construction `R_k ≡ R` and `F_k ≡ F` on `[0, k]`.
/// Fails when some mixture weight would be negative.
///
/// Mixture weights with `γ = γ_k`, `Σ` over atoms of `μ` (resp. `m`):
///
/// ```text
/// g_k:  1: (αk - β + Σwu - Σw/k)/γ   z: 1 + (β - 2αk - Σwu)/γ   z²: αk/γ   Poisson(ku): w/(kγ)
/// h_k:  1: 1 - (bk + Σm)/γ           z: bk/γ                    Poisson(ku): m/γ
/// ```
pub fn embed<T: Real>(
    r: &BranchingMechanism<T>,
    f: &ImmigrationMechanism<T>,
    scheme: ScalingScheme<T>,
) -> Result<EmbeddedPair<T>> {
    if r.compensator != Compensator::Linear {
        return Err(Error::UnsupportedMechanism(
            "embedding needs the linear compensator (finite first moment)",
        ));
    }
    let k = scheme.k_real();
    let gamma = scheme.gamma_k;
    let (beta, alpha) = (r.beta, r.alpha);
    let mass = r.mu.total_weight();
    let moment = r.mu.first_moment();

    // exact when γ₀ is a power of two
    let c2 = alpha / scheme.gamma0;
    let drift = (beta - moment) / gamma;
    let c0 = c2 - drift - mass / (k * gamma);
    let c1 = (T::one() - (c2 + c2)) + drift;
    let slack = T::lit(64.0) * T::eps();

    if c0 < -slack {
        // αk² + (Σwu - β)k - Σw >= 0
        let b = (moment - beta).as_f64();
        let a = alpha.as_f64();
        let c = mass.as_f64();
        let min_k = if a > 0.0 {
            Some((-b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a))
        } else if b > 0.0 {
            Some(c / b)
        } else {
            None
        };
        return Err(Error::InfeasibleAtThisK {
            k: scheme.k,
            min_k,
            reason: format!("constant coefficient of g_k is {c0}"),
        });
    }
    if c1 < -slack {
        // c k >= 2αk + Σwu - β
        let room = (scheme.gamma0 - T::lit(2.0) * alpha).as_f64();
        let need = (moment - beta).as_f64();
        return Err(Error::InfeasibleAtThisK {
            k: scheme.k,
            min_k: (room > 0.0).then(|| need / room),
            reason: format!(
                "linear coefficient of g_k is {c1}; gamma0 must exceed 2 alpha = {}",
                (T::lit(2.0) * alpha).as_f64()
            ),
        });
    }

    let mut g_parts = vec![
        (c0.max(T::zero()), Pgf::point_mass(0)),
        (c1.max(T::zero()), Pgf::point_mass(1)),
        (c2, Pgf::point_mass(2)),
    ];
    for &(u, w) in r.mu.atoms() {
        g_parts.push((w / (k * gamma), Pgf::poisson(k * u)?));
    }

    let b = f.b;
    let h1 = b / scheme.gamma0;
    let h0 = (T::one() - h1) - f.m.total_weight() / gamma;
    if h0 < -slack {
        let room = (scheme.gamma0 - b).as_f64();
        return Err(Error::InfeasibleAtThisK {
            k: scheme.k,
            min_k: (room > 0.0).then(|| f.m.total_weight().as_f64() / room),
            reason: format!("constant coefficient of h_k is {h0}"),
        });
    }
    let mut h_parts = vec![(h0.max(T::zero()), Pgf::point_mass(0)), (h1, Pgf::point_mass(1))];
    for &(u, w) in f.m.atoms() {
        h_parts.push((w / gamma, Pgf::poisson(k * u)?));
    }

    Ok(EmbeddedPair {
        g_k: simplify_mixture(g_parts)?,
        h_k: simplify_mixture(h_parts)?,
        scheme,
    })
}

/// Like [`embed`] with `γ_k = γ₀ k`, taking the smallest power of two
/// `γ₀ >= 1` for which the construction is feasible at this `k`.
pub fn embed_auto<T: Real>(r: &BranchingMechanism<T>, f: &ImmigrationMechanism<T>, k: u64) -> Result<EmbeddedPair<T>> {
    let kf = T::from_u64_lossy(k.max(1));
    let need_g = T::lit(2.0) * r.alpha + (r.mu.first_moment() - r.beta).max(T::zero()) / kf;
    let need_h = f.b + f.m.total_weight() / kf;
    let need = need_g.max(need_h);
    let mut c = T::one();
    while c < need {
        c = c * T::lit(2.0);
    }
    embed(r, f, ScalingScheme::linear(k, c)?)
}

fn simplify_mixture<T: Real>(parts: Vec<(T, Pgf<T>)>) -> Result<Pgf<T>> {
    let parts: Vec<_> = parts.into_iter().filter(|(w, _)| *w > T::zero()).collect();
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().expect("one part").1);
    }
    // weights sum to one up to a few ulps of the larger terms
    Pgf::mixture_with_tolerance(parts, 1e-10)
}

/// `φ₁ = g^n(z₀)^{c_k}` and `φ₂ = ∏_{j<n} h(g^j(z₀))` with `z₀ = e^{-λ/b_k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionValues<T> {
    pub phi1: T,
    pub phi2: T,
}

pub fn composition_functionals<T: Real>(
    g: &Pgf<T>,
    h: &Pgf<T>,
    b_k: T,
    c_k: T,
    steps: u64,
    lambda: T,
    cap: u64,
) -> Result<CompositionValues<T>> {
    if !(b_k > T::zero() && c_k > T::zero()) {
        return Err(domain("b_k, c_k", b_k.min(c_k).as_f64(), "(0, inf)"));
    }
    if !(lambda >= T::zero()) {
        return Err(domain("lambda", lambda.as_f64(), "[0, inf)"));
    }
    if steps > cap {
        return Err(Error::IterationCap { cap });
    }
    let mut z = (-lambda / b_k).exp();
    let mut log_phi2 = T::zero();
    for _ in 0..steps {
        log_phi2 = log_phi2 + h.eval_unchecked(z).ln();
        z = g.eval_unchecked(z);
    }
    Ok(CompositionValues {
        phi1: z.powf(c_k),
        phi2: log_phi2.exp(),
    })
}

/// The functionals at the identification `b_k = k`, `c_k = kx`, `[γ_k t]` steps,
/// approximating `exp{-x ψ_t(λ)}` and `exp{-∫_0^t F(ψ_s(λ)) ds}`.
pub fn limit_functionals<T: Real>(pair: &EmbeddedPair<T>, x: T, t: T, lambda: T) -> Result<CompositionValues<T>> {
    let k = pair.scheme.k_real();
    composition_functionals(&pair.g_k, &pair.h_k, k, k * x, pair.scheme.steps(t), lambda, 10_000_000)
}

/// Generator actions on `e_λ(x) = e^{-λx}` over a grid in `E_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorComparison<T> {
    pub lambda: T,
    /// `(x, A_k e_λ(x), A e_λ(x))`.
    pub rows: Vec<(T, T, T)>,
    pub sup_diff: T,
    /// `log g_k(e^{-λ/k}) / (g_k(e^{-λ/k}) - 1)`
    pub alpha_k: T,
    /// Same with `h_k`.
    pub beta_k: T,
    pub s_k: T,
    /// `γ_k β_k (1 - h_k(e^{-λ/k}))`
    pub h_k: T,
}

/// Compares `A_k e_λ(x) = γ_k [g_k(e^{-λ/k})^{kx} h_k(e^{-λ/k}) - e^{-λx}]`
/// with `A e_λ(x) = -e^{-λx} [x R(λ) + F(λ)]` on `x_grid ⊂ E_k`.
#[allow(clippy::too_many_arguments)]
pub fn generator_actions<T: Real>(
    g: &Pgf<T>,
    h: &Pgf<T>,
    scheme: &ScalingScheme<T>,
    r: &BranchingMechanism<T>,
    f: &ImmigrationMechanism<T>,
    lambda: T,
    x_grid: &[T],
) -> Result<GeneratorComparison<T>> {
    if !(lambda > T::zero()) {
        return Err(domain("lambda", lambda.as_f64(), "(0, inf)"));
    }
    let k = scheme.k_real();
    let z = (-lambda / k).exp();
    let gz = g.eval_unchecked(z);
    let hz = h.eval_unchecked(z);
    let r_val = r.eval(lambda);
    let f_val = f.eval(lambda);
    let lattice_slack = T::lit(1e-9);

    let mut rows = Vec::with_capacity(x_grid.len());
    let mut sup_diff = T::zero();
    for &x in x_grid {
        let kx = k * x;
        if !(x >= T::zero()) || (kx - kx.round()).abs() > lattice_slack * kx.max(T::one()) {
            return Err(domain("x", x.as_f64(), "E_k = {0, 1/k, 2/k, ...}"));
        }
        let ex = (-lambda * x).exp();
        // g^{kx} h e^{λx} - 1 without cancelling against e^{-λx}
        let excess = kx.round() * (gz.ln() + lambda / k) + hz.ln();
        let discrete = scheme.gamma_k * ex * excess.exp_m1();
        let continuous = -ex * (x * r_val + f_val);
        sup_diff = sup_diff.max((discrete - continuous).abs());
        rows.push((x, discrete, continuous));
    }

    let ratio = |v: T| {
        if v == T::one() {
            T::one()
        } else {
            v.ln() / (v - T::one())
        }
    };
    let alpha_k = ratio(gz);
    let beta_k = ratio(hz);
    let s = -(-lambda / k).exp_m1();
    Ok(GeneratorComparison {
        lambda,
        rows,
        sup_diff,
        alpha_k,
        beta_k,
        s_k: compute_sk(g, scheme, lambda)?,
        h_k: scheme.gamma_k * beta_k * h.one_minus_unchecked(s),
    })
}
