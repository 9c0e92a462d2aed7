//! Experiment configuration files.
//!
//! A config is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "seed": 42,
//!   "n_paths": 100000,
//!   "tolerances": { "abs_tol": 0.01 },
//!   "experiment": { "kind": "limit-verify", ... }
//! }
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{BranchingMechanism, Compensator, ImmigrationMechanism, LevyAtoms};
use crate::pgf::Pgf;
use crate::rayknight::{Direction, DriftedBm, SdeSettings};
use crate::tolerances::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

fn default_paths() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    DbiSimulate(DbiSimulateSpec),
    PsiSolve(PsiSolveSpec),
    Embed(EmbedSpec),
    LimitVerify(LimitVerifySpec),
    Lemma22Table(Lemma22Spec),
    GeneratorTable(GeneratorSpec),
    RayknightVerify(RayKnightSpec),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DbiSimulate(_) => "dbi-simulate",
            Experiment::PsiSolve(_) => "psi-solve",
            Experiment::Embed(_) => "embed",
            Experiment::LimitVerify(_) => "limit-verify",
            Experiment::Lemma22Table(_) => "lemma22-table",
            Experiment::GeneratorTable(_) => "generator-table",
            Experiment::RayknightVerify(_) => "rayknight-verify",
        }
    }
}

/// `R(λ) = βλ - αλ² - Σ w (e^{-λu} - 1 + compensator)`, atoms of `μ` as `[u, w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    pub beta: f64,
    pub alpha: f64,
    #[serde(default)]
    pub mu: Vec<[f64; 2]>,
    #[serde(default)]
    pub compensator: Compensator,
}

impl MechanismSpec {
    pub fn build(&self) -> Result<BranchingMechanism<f64>> {
        BranchingMechanism::new(self.beta, self.alpha, atoms(&self.mu)?, self.compensator)
    }
}

/// `F(λ) = bλ + Σ w (1 - e^{-λu})`, atoms of `m` as `[u, w]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImmigrationSpec {
    pub b: f64,
    pub m: Vec<[f64; 2]>,
}

impl ImmigrationSpec {
    pub fn build(&self) -> Result<ImmigrationMechanism<f64>> {
        ImmigrationMechanism::new(self.b, atoms(&self.m)?)
    }
}

fn atoms(jumps: &[[f64; 2]]) -> Result<LevyAtoms<f64>> {
    LevyAtoms::new(jumps.iter().map(|[u, w]| (*u, *w)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PgfSpec {
    FiniteSupport { weights: Vec<f64> },
    Geometric { p: f64 },
    Poisson { mean: f64 },
    PointMass { n: u64 },
    Binary,
}

impl PgfSpec {
    pub fn build(&self, tol: &Tolerances) -> Result<Pgf<f64>> {
        match self {
            PgfSpec::FiniteSupport { weights } => {
                Pgf::finite_support_with_tolerance(weights.clone(), tol.pgf_normalization)
            }
            PgfSpec::Geometric { p } => Pgf::geometric(*p),
            PgfSpec::Poisson { mean } => Pgf::poisson(*mean),
            PgfSpec::PointMass { n } => Ok(Pgf::point_mass(*n)),
            PgfSpec::Binary => Ok(Pgf::binary()),
        }
    }
}

fn no_immigration() -> PgfSpec {
    PgfSpec::PointMass { n: 0 }
}

fn one() -> u64 {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbiSimulateSpec {
    pub offspring: PgfSpec,
    #[serde(default = "no_immigration")]
    pub immigration: PgfSpec,
    pub y0: u64,
    pub n_steps: usize,
    /// Lattice scale `k` used for the scaled output column.
    #[serde(default = "one")]
    pub scale: u64,
    /// Number of full paths written to the CSV.
    #[serde(default = "default_dump")]
    pub write_paths: usize,
}

fn default_dump() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiSolveSpec {
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub immigration: ImmigrationSpec,
    pub lambdas: Vec<f64>,
    pub t_max: f64,
    #[serde(default = "unit")]
    pub x: f64,
    /// Output points per λ, equally spaced in `[0, t_max]`.
    #[serde(default = "default_grid")]
    pub n_grid: usize,
}

fn default_grid() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSpec {
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub immigration: ImmigrationSpec,
    pub k_list: Vec<u64>,
    /// `γ_k = γ₀ k`; chosen automatically when absent.
    #[serde(default)]
    pub gamma0: Option<f64>,
    /// Evaluation points on `[0, k/2]`.
    #[serde(default = "default_lambda_points")]
    pub n_lambda: usize,
}

fn default_lambda_points() -> usize {
    51
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitVerifySpec {
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub immigration: ImmigrationSpec,
    pub k_list: Vec<u64>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    /// `y_k(0) = round(k x)`.
    pub x: f64,
    pub t_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    /// Two-time functionals `[t1, λ1, t2, λ2]` with `t1 <= t2`.
    #[serde(default)]
    pub joint: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma22Spec {
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub immigration: ImmigrationSpec,
    pub k_list: Vec<u64>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    pub lambda_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub immigration: ImmigrationSpec,
    pub k_list: Vec<u64>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    pub lambda: f64,
    /// Grid `0, x_step, ..., x_max`; every point must lie on each `E_k`.
    pub x_max: f64,
    pub x_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayKnightSpec {
    pub alpha: f64,
    pub beta: f64,
    pub direction: Direction,
    pub k_list: Vec<u64>,
    pub u: f64,
    /// Base level; the downward chain needs `max(t_list) <= a`.
    #[serde(default = "unit")]
    pub a: f64,
    pub t_list: Vec<f64>,
    pub lambda_list: Vec<f64>,
    /// Optional Euler-Maruyama cross-check.
    #[serde(default)]
    pub sde: Option<SdeSettings>,
}

impl RayKnightSpec {
    pub fn bm(&self) -> Result<DriftedBm<f64>> {
        DriftedBm::new(self.alpha, self.beta)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        let grids: Vec<(&str, usize)> = match &self.experiment {
            Experiment::DbiSimulate(_) => vec![],
            Experiment::PsiSolve(s) => vec![("lambdas", s.lambdas.len())],
            Experiment::Embed(s) => {
                check_k_list(&s.k_list)?;
                vec![]
            }
            Experiment::LimitVerify(s) => {
                check_k_list(&s.k_list)?;
                vec![("t_list", s.t_list.len()), ("lambda_list", s.lambda_list.len())]
            }
            Experiment::Lemma22Table(s) => {
                check_k_list(&s.k_list)?;
                vec![("lambda_list", s.lambda_list.len())]
            }
            Experiment::GeneratorTable(s) => {
                check_k_list(&s.k_list)?;
                vec![]
            }
            Experiment::RayknightVerify(s) => {
                check_k_list(&s.k_list)?;
                vec![("t_list", s.t_list.len()), ("lambda_list", s.lambda_list.len())]
            }
        };
        for (name, len) in grids {
            if len == 0 {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
        }
        Ok(())
    }
}

fn check_k_list(ks: &[u64]) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Config("k_list must not be empty".into()));
    }
    if ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "k_list {ks:?} must be positive and strictly increasing"
        )));
    }
    Ok(())
}
