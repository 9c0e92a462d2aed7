//! The continuous-state limit: the flow `ψ_t(λ)` solving `ψ' = R(ψ)`,
//! `ψ_0 = λ`, and the Laplace transform
//! `E_x e^{-λ y(t)} = exp{-x ψ_t(λ) - ∫_0^t F(ψ_s(λ)) ds}`.

use crate::error::{domain, Error, Result};
use crate::mechanisms::{BranchingMechanism, ImmigrationMechanism, Verdict};
use crate::ode::{integrate, SolverOptions, Trajectory};
use crate::scalar::Real;

/// Solution of the psi-flow from one initial value, with the accumulated
/// immigration integral when an immigration mechanism is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSolution<T> {
    pub mechanism: BranchingMechanism<T>,
    pub lambda0: T,
    pub tol: T,
    trajectory: Trajectory<T>,
    immigration: Option<ImmigrationIntegral<T>>,
}

#[derive(Debug, Clone, PartialEq)]
struct ImmigrationIntegral<T> {
    mechanism: ImmigrationMechanism<T>,
    /// Integral up to the start of each segment.
    cumulative: Vec<T>,
    total: T,
}

impl<T: Real> PsiSolution<T> {
    pub fn t_max(&self) -> T {
        self.trajectory.t_end
    }

    /// `ψ_t(λ)` for `t ∈ [0, t_max]`.
    pub fn psi_at(&self, t: T) -> Result<T> {
        self.trajectory
            .eval(t)
            .ok_or_else(|| domain("t", t.as_f64(), "[0, t_max]"))
    }

    pub fn psi_end(&self) -> T {
        self.trajectory.y_end()
    }

    /// `(t, ψ_t(λ))` at the solver's accepted steps.
    pub fn grid(&self) -> Vec<(T, T)> {
        self.trajectory.grid()
    }

    /// Attaches `F` and computes `∫_0^t F(ψ_s) ds` on every step by adaptive
    /// Simpson quadrature of the dense output.
    pub fn with_immigration(mut self, f: ImmigrationMechanism<T>) -> Self {
        let n = self.trajectory.segments.len().max(1);
        let per_segment = self.tol / T::from_u64_lossy(n as u64);
        let mut cumulative = Vec::with_capacity(self.trajectory.segments.len());
        let mut total = T::zero();
        if !f.is_zero() {
            for seg in &self.trajectory.segments {
                cumulative.push(total);
                total = total + adaptive_simpson(|s| f.eval(seg.eval(s)), seg.t0, seg.t1(), per_segment);
            }
        } else {
            cumulative.resize(self.trajectory.segments.len(), T::zero());
        }
        self.immigration = Some(ImmigrationIntegral {
            mechanism: f,
            cumulative,
            total,
        });
        self
    }

    /// `∫_0^t F(ψ_s(λ)) ds`; zero when no immigration is attached.
    pub fn immigration_integral_at(&self, t: T) -> Result<T> {
        let Some(imm) = &self.immigration else {
            return Ok(T::zero());
        };
        if t == self.t_max() {
            return Ok(imm.total);
        }
        if t == T::zero() || imm.mechanism.is_zero() {
            return Ok(T::zero());
        }
        let i = self
            .trajectory
            .locate(t)
            .ok_or_else(|| domain("t", t.as_f64(), "[0, t_max]"))?;
        let seg = &self.trajectory.segments[i];
        let partial = adaptive_simpson(|s| imm.mechanism.eval(seg.eval(s)), seg.t0, t, self.tol);
        Ok(imm.cumulative[i] + partial)
    }

    /// `(t, ∫_0^t F(ψ_s) ds)` at the solver's accepted steps.
    pub fn immigration_grid(&self) -> Vec<(T, T)> {
        match &self.immigration {
            None => Vec::new(),
            Some(imm) => {
                let mut out: Vec<(T, T)> = self
                    .trajectory
                    .segments
                    .iter()
                    .zip(&imm.cumulative)
                    .map(|(s, c)| (s.t0, *c))
                    .collect();
                out.push((self.t_max(), imm.total));
                out
            }
        }
    }
}

/// Solves `dψ/dt = R(ψ)`, `ψ_0 = λ` on `[0, t_max]`.
pub fn solve_psi<T: Real>(r: &BranchingMechanism<T>, lambda: T, t_max: T, tol: T) -> Result<PsiSolution<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(domain("lambda", lambda.as_f64(), "[0, inf)"));
    }
    if !(t_max >= T::zero()) {
        return Err(domain("t_max", t_max.as_f64(), "[0, inf)"));
    }
    let report = r.check_conservative();
    if report.verdict == Verdict::NotConservative {
        return Err(Error::NotConservative(report.reason));
    }
    let mut opts = SolverOptions::with_tolerance(tol);
    opts.clamp_nonnegative = true;
    let trajectory = integrate(|psi| r.eval(psi), lambda, t_max, &opts)?;
    Ok(PsiSolution {
        mechanism: r.clone(),
        lambda0: lambda,
        tol,
        trajectory,
        immigration: None,
    })
}

/// Closed-form flow for `R(λ) = βλ - αλ²`:
/// `ψ_t(λ) = λ e^{βt} / (1 + αλ (e^{βt} - 1)/β)`, with `(e^{βt} - 1)/β → t` at `β = 0`.
pub fn quadratic_psi_oracle<T: Real>(beta: T, alpha: T, lambda: T, t: T) -> T {
    let growth = if beta == T::zero() {
        t
    } else {
        (beta * t).exp_m1() / beta
    };
    lambda * (beta * t).exp() / (T::one() + alpha * lambda * growth)
}

/// The law of a CBI process started at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CbiLaw<T> {
    pub r: BranchingMechanism<T>,
    pub f: ImmigrationMechanism<T>,
    pub x: T,
}

impl<T: Real> CbiLaw<T> {
    pub fn new(r: BranchingMechanism<T>, f: ImmigrationMechanism<T>, x: T) -> Result<Self> {
        if !(x >= T::zero()) || !x.is_finite() {
            return Err(domain("x", x.as_f64(), "[0, inf)"));
        }
        if r.check_conservative().verdict == Verdict::NotConservative {
            return Err(Error::NotConservative("branching mechanism explodes".into()));
        }
        Ok(Self { r, f, x })
    }

    /// `(ψ_t(λ), ∫_0^t F(ψ_s(λ)) ds)`.
    pub fn exponents(&self, t: T, lambda: T, tol: T) -> Result<(T, T)> {
        let sol = solve_psi(&self.r, lambda, t, tol)?.with_immigration(self.f.clone());
        Ok((sol.psi_end(), sol.immigration_integral_at(t)?))
    }

    /// `E_x e^{-λ y(t)}`.
    pub fn laplace_transform(&self, t: T, lambda: T, tol: T) -> Result<T> {
        laplace_from(self.x, self.exponents(t, lambda, tol)?)
    }

    /// `E_x e^{-λ y(t)}` from an arbitrary starting point.
    pub fn laplace_from(&self, x: T, t: T, lambda: T, tol: T) -> Result<T> {
        laplace_from(x, self.exponents(t, lambda, tol)?)
    }

    /// `E_x exp{-λ₁ y(t₁) - λ₂ y(t₂)}` for `t₁ <= t₂`, by conditioning on `y(t₁)`.
    pub fn joint_laplace(&self, t1: T, lambda1: T, t2: T, lambda2: T, tol: T) -> Result<T> {
        if t2 < t1 {
            return self.joint_laplace(t2, lambda2, t1, lambda1, tol);
        }
        let (psi, integral) = self.exponents(t2 - t1, lambda2, tol)?;
        Ok((-integral).exp() * self.laplace_transform(t1, lambda1 + psi, tol)?)
    }

    /// Residuals of the flow identity `ψ_{s+t} = ψ_s ∘ ψ_t` and of the
    /// Chapman-Kolmogorov identity for the Laplace transform.
    pub fn semigroup_check(&self, s: T, t: T, lambda: T, tol: T) -> Result<SemigroupResidual<T>> {
        let long = solve_psi(&self.r, lambda, s + t, tol)?.with_immigration(self.f.clone());
        let inner = long.psi_at(t)?;
        let outer = solve_psi(&self.r, inner, s, tol)?;
        let flow = (long.psi_end() - outer.psi_end()).abs();

        // P_{t+s} e_λ = P_t (P_s e_λ) = e^{-I_s(λ)} P_t e_{ψ_s(λ)}
        let direct = laplace_from(self.x, (long.psi_end(), long.immigration_integral_at(s + t)?))?;
        let (psi_s, int_s) = self.exponents(s, lambda, tol)?;
        let composed = (-int_s).exp() * self.laplace_transform(t, psi_s, tol)?;
        Ok(SemigroupResidual {
            flow,
            laplace: (direct - composed).abs(),
        })
    }
}

fn laplace_from<T: Real>(x: T, (psi, integral): (T, T)) -> Result<T> {
    Ok((-x * psi - integral).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupResidual<T> {
    pub flow: T,
    pub laplace: T,
}

impl<T: Real> SemigroupResidual<T> {
    pub fn max(&self) -> T {
        self.flow.max(self.laplace)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<T: Real, G: Fn(T) -> T>(g: G, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (g(a), g(m), g(b));
    let whole = simpson(a, b, fa, fm, fb);
    recurse(&g, a, b, fa, fm, fb, whole, tol, 40)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, G: Fn(T) -> T>(g: &G, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let two = T::lit(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let (flm, frm) = (g(lm), g(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    recurse(g, a, m, fa, flm, fm, left, tol / two, depth - 1)
        + recurse(g, m, b, fm, frm, fb, right, tol / two, depth - 1)
}
