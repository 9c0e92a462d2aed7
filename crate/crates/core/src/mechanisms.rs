//! Branching and immigration mechanisms with finitely many jump atoms.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A Lévy measure made of finitely many weighted atoms `(u, w)`, `u > 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevyAtoms<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Real> LevyAtoms<T> {
    pub fn new(atoms: Vec<(T, T)>) -> Result<Self> {
        for &(u, w) in &atoms {
            if !(u > T::zero()) || !u.is_finite() {
                return Err(Error::InvalidMechanism(format!("atom location {u} must be > 0")));
            }
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(Error::InvalidMechanism(format!("atom weight {w} must be >= 0")));
            }
        }
        Ok(Self { atoms })
    }

    pub fn empty() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `sum w`
    pub fn total_weight(&self) -> T {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    /// `sum w u`
    pub fn first_moment(&self) -> T {
        self.atoms.iter().map(|&(u, w)| u * w).sum()
    }
}

/// Which small-jump compensator the branching mechanism uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compensator {
    /// `e^{-λu} - 1 + λu`: the finite-first-moment class used by the limit theorem.
    #[default]
    Linear,
    /// `e^{-λu} - 1 + λu/(1+u²)`: the general class.
    Truncated,
}

/// `R(λ) = βλ - αλ² - ∫ (e^{-λu} - 1 + compensator) μ(du)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMechanism<T> {
    pub beta: T,
    pub alpha: T,
    pub mu: LevyAtoms<T>,
    pub compensator: Compensator,
}

impl<T: Real> BranchingMechanism<T> {
    pub fn new(beta: T, alpha: T, mu: LevyAtoms<T>, compensator: Compensator) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidMechanism(format!("beta = {beta} is not finite")));
        }
        if !(alpha >= T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidMechanism(format!("alpha = {alpha} must be >= 0")));
        }
        Ok(Self {
            beta,
            alpha,
            mu,
            compensator,
        })
    }

    /// `R(λ) = βλ - αλ²`.
    pub fn quadratic(beta: T, alpha: T) -> Result<Self> {
        Self::new(beta, alpha, LevyAtoms::empty(), Compensator::Linear)
    }

    pub fn eval(&self, lambda: T) -> T {
        let jumps: T = self
            .mu
            .atoms()
            .iter()
            .map(|&(u, w)| {
                let x = lambda * u;
                let comp = match self.compensator {
                    Compensator::Linear => x,
                    Compensator::Truncated => x / (T::one() + u * u),
                };
                w * ((-x).exp_m1() + comp)
            })
            .sum();
        self.beta * lambda - self.alpha * lambda * lambda - jumps
    }

    /// Classifies the mechanism by the divergence of `∫_{0+} dλ / (R(λ) ∨ 0)`.
    ///
    /// The linear-compensator class is always conservative since
    /// `R(λ) <= βλ`; the truncated class is decided numerically. The
    /// partial-integral table is filled in either case.
    pub fn check_conservative(&self) -> ConservativityReport {
        let table = partial_integrals(|l| self.eval(T::lit(l)).as_f64());
        match self.compensator {
            Compensator::Linear => ConservativityReport {
                verdict: Verdict::Conservative,
                reason: "R(λ) <= βλ near 0, hence 1/R* >= 1/(β⁺λ) is not integrable at 0+".into(),
                table,
            },
            Compensator::Truncated => classify(table),
        }
    }
}

/// `F(λ) = bλ + ∫ (1 - e^{-λu}) m(du)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmigrationMechanism<T> {
    pub b: T,
    pub m: LevyAtoms<T>,
}

impl<T: Real> ImmigrationMechanism<T> {
    pub fn new(b: T, m: LevyAtoms<T>) -> Result<Self> {
        if !(b >= T::zero()) || !b.is_finite() {
            return Err(Error::InvalidMechanism(format!(
                "immigration drift b = {b} must be >= 0"
            )));
        }
        Ok(Self { b, m })
    }

    pub fn zero() -> Self {
        Self {
            b: T::zero(),
            m: LevyAtoms::empty(),
        }
    }

    pub fn drift(b: T) -> Result<Self> {
        Self::new(b, LevyAtoms::empty())
    }

    pub fn eval(&self, lambda: T) -> T {
        let jumps: T = self.m.atoms().iter().map(|&(u, w)| -w * (-lambda * u).exp_m1()).sum();
        self.b * lambda + jumps
    }

    pub fn is_zero(&self) -> bool {
        self.b == T::zero() && self.m.atoms().iter().all(|&(_, w)| w == T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Conservative,
    NotConservative,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativityReport {
    pub verdict: Verdict,
    pub reason: String,
    pub table: PartialIntegralTable,
}

/// Partial integrals of `1/R*` over `[ε, λ₀]` for decreasing `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialIntegralTable {
    pub upper: f64,
    /// `(ε, ∫_ε^{λ₀} dλ/R*(λ))`, one row per decade; `inf` once `R* = 0` was hit.
    pub rows: Vec<(f64, f64)>,
    /// Contribution of each decade `[ε/10, ε]`.
    pub decades: Vec<f64>,
    /// `R*` vanished somewhere on the sampled range.
    pub hit_zero: bool,
}

const UPPER: f64 = 1e-1;
const DECADES: usize = 10;
const PANELS_PER_DECADE: usize = 64;

fn partial_integrals(r: impl Fn(f64) -> f64) -> PartialIntegralTable {
    // substitute λ = e^s: ∫ dλ/R* = ∫ λ/R*(λ) ds, Simpson in s on each decade
    let ln10 = std::f64::consts::LN_10;
    let mut rows = Vec::with_capacity(DECADES);
    let mut decades = Vec::with_capacity(DECADES);
    let mut running = 0.0;
    let mut hit_zero = false;
    for d in 0..DECADES {
        let hi = UPPER.ln() - d as f64 * ln10;
        let h = ln10 / PANELS_PER_DECADE as f64;
        let mut acc = 0.0;
        for i in 0..=PANELS_PER_DECADE {
            let s = hi - i as f64 * h;
            let lambda = s.exp();
            let rstar = r(lambda).max(0.0);
            if rstar <= 0.0 {
                hit_zero = true;
            }
            let f = lambda / rstar;
            let weight = if i == 0 || i == PANELS_PER_DECADE {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += weight * f;
        }
        let contribution = if hit_zero { f64::INFINITY } else { acc * h / 3.0 };
        running += contribution;
        decades.push(contribution);
        rows.push(((hi - ln10).exp(), running));
    }
    PartialIntegralTable {
        upper: UPPER,
        rows,
        decades,
        hit_zero,
    }
}

fn classify(table: PartialIntegralTable) -> ConservativityReport {
    if table.hit_zero {
        return ConservativityReport {
            verdict: Verdict::Conservative,
            reason: "R* vanishes near 0+, so the integral of 1/R* is infinite".into(),
            table,
        };
    }
    let ratios: Vec<f64> = table.decades.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(4)..];
    let (verdict, reason) = if tail.iter().all(|&r| r >= 0.9) {
        (
            Verdict::Conservative,
            "each of the last four decades contributes at least 0.9x the previous one",
        )
    } else if tail.iter().all(|&r| r <= 0.5) {
        (
            Verdict::NotConservative,
            "decade contributions shrink geometrically; partial integrals converge",
        )
    } else {
        (
            Verdict::Inconclusive,
            "decade contributions neither stable nor shrinking",
        )
    };
    ConservativityReport {
        verdict,
        reason: reason.into(),
        table,
    }
}
