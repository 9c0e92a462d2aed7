//! Downcrossing chains of Brownian motion with drift and their
//! continuous-state limits.
//!
//! For `X` with generator `α d²/dx² + β d/dx`, the number of downcrossings
//! of `[x, x + 1/k]` made between two consecutive downcrossings of the level
//! below is geometric, so the counts along a ladder of levels form a
//! Galton-Watson chain. Rescaled by `1/k` the chain converges to the local
//! time field `l(l^{-1}(u, a), a ± t)`.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cbi::CbiLaw;
use crate::dbi::{DbiPath, DbiProcess};
use crate::error::{domain, Error, Result};
use crate::mechanisms::{BranchingMechanism, Compensator, ImmigrationMechanism, LevyAtoms};
use crate::pgf::Pgf;
use crate::rng::RngSeed;
use crate::scalar::Real;
use crate::stats::{replicate, Estimate};

/// Diffusion with generator `α d²/dx² + β d/dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftedBm<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> DriftedBm<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(domain("alpha", alpha.as_f64(), "(0, inf)"));
        }
        if !beta.is_finite() {
            return Err(domain("beta", beta.as_f64(), "finite"));
        }
        Ok(Self { alpha, beta })
    }

    /// `β/α`.
    pub fn drift_ratio(&self) -> T {
        self.beta / self.alpha
    }

    /// The same diffusion seen through `x ↦ -x`.
    pub fn reflected(&self) -> Self {
        Self {
            alpha: self.alpha,
            beta: -self.beta,
        }
    }
}

/// Probability of reaching `δ` before `-δ` from `x`:
/// `u_δ(x) = (e^{cδ} - e^{-cx}) / (e^{cδ} - e^{-cδ})`, `c = β/α`.
pub fn crossing_prob<T: Real>(bm: &DriftedBm<T>, delta: T, x: T) -> Result<T> {
    if !(delta > T::zero()) {
        return Err(domain("delta", delta.as_f64(), "(0, inf)"));
    }
    if !(x.abs() <= delta) {
        return Err(domain("x", x.as_f64(), "[-delta, delta]"));
    }
    let c = bm.drift_ratio();
    if c == T::zero() {
        return Ok((delta + x) / (T::lit(2.0) * delta));
    }
    // e^{c(δ-x)} (e^{c(δ+x)} - 1) / (e^{2cδ} - 1)
    let p = (c * (delta - x)).exp() * (c * (delta + x)).exp_m1() / (T::lit(2.0) * c * delta).exp_m1();
    Ok(p.max(T::zero()).min(T::one()))
}

/// Law of the number of downcrossings of `[0, 1/k]` per downcrossing of
/// `[-1/k, 0]`: `q/(1 - pz)` with `p = u_{1/k}(0)`.
pub fn downcrossing_pgf<T: Real>(bm: &DriftedBm<T>, k: u64) -> Result<Pgf<T>> {
    if k == 0 {
        return Err(domain("k", 0.0, "k >= 1"));
    }
    let delta = T::one() / T::from_u64_lossy(k);
    Pgf::geometric(crossing_prob(bm, delta, T::zero())?)
}

/// Offspring law of the chain running down from `a`: geometric with
/// `p̃ = 1 - u_{1/k}(0)` computed for the reflected drift.
pub fn mirrored_downcrossing_pgf<T: Real>(bm: &DriftedBm<T>, k: u64) -> Result<Pgf<T>> {
    if k == 0 {
        return Err(domain("k", 0.0, "k >= 1"));
    }
    let delta = T::one() / T::from_u64_lossy(k);
    Pgf::geometric(T::one() - crossing_prob(&bm.reflected(), delta, T::zero())?)
}

/// Limits of the two chains.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMechanisms<T> {
    /// `R(λ) = (β/α)λ - λ²`.
    pub r: BranchingMechanism<T>,
    /// No immigration above `a`.
    pub f_up: ImmigrationMechanism<T>,
    /// `F(λ) = λ` below `a`.
    pub f_down: ImmigrationMechanism<T>,
}

pub fn limit_mechanism<T: Real>(bm: &DriftedBm<T>) -> LimitMechanisms<T> {
    LimitMechanisms {
        r: BranchingMechanism::new(bm.drift_ratio(), T::one(), LevyAtoms::empty(), Compensator::Linear)
            .expect("finite drift ratio"),
        f_up: ImmigrationMechanism::zero(),
        f_down: ImmigrationMechanism::drift(T::one()).expect("unit drift"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Levels above `a`; no immigration.
    Upward,
    /// Levels below `a`; one immigrant lineage per level.
    Downward,
}

/// The chain for one direction: offspring and immigration laws.
pub fn crossing_process(bm: &DriftedBm<f64>, k: u64, direction: Direction) -> Result<DbiProcess<f64>> {
    Ok(match direction {
        Direction::Upward => DbiProcess::without_immigration(downcrossing_pgf(bm, k)?),
        Direction::Downward => {
            let g = mirrored_downcrossing_pgf(bm, k)?;
            DbiProcess::new(g.clone(), g)
        }
    })
}

/// `Z_k(0) = round(k u)`.
pub fn initial_count(k: u64, u: f64) -> Result<u64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(domain("u", u, "[0, inf)"));
    }
    Ok((k as f64 * u).round() as u64)
}

/// A realized downcrossing chain `Z_k(0..=[k t_max])` from level `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingChain {
    pub direction: Direction,
    pub k: u64,
    pub a: f64,
    pub u: f64,
    pub path: DbiPath,
}

impl CrossingChain {
    /// `(level, Z_k(i)/k)` pairs.
    pub fn scaled_field(&self) -> Vec<(f64, f64)> {
        let step = 1.0 / self.k as f64;
        let sign = match self.direction {
            Direction::Upward => 1.0,
            Direction::Downward => -1.0,
        };
        self.path
            .scaled()
            .enumerate()
            .map(|(i, z)| (self.a + sign * i as f64 * step, z))
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_crossing_chain(
    bm: &DriftedBm<f64>,
    k: u64,
    u: f64,
    a: f64,
    direction: Direction,
    t_max: f64,
    seed: RngSeed,
) -> Result<CrossingChain> {
    if direction == Direction::Downward && !(t_max <= a) {
        return Err(domain("t_max", t_max, "[0, a] for the downward chain"));
    }
    if !(t_max >= 0.0) {
        return Err(domain("t_max", t_max, "[0, inf)"));
    }
    let process = crossing_process(bm, k, direction)?;
    let steps = (k as f64 * t_max).floor() as usize;
    let path = process.simulate_path_capped(initial_count(k, u)?, steps, seed, k, 1_000_000_000)?;
    Ok(CrossingChain {
        direction,
        k,
        a,
        u,
        path,
    })
}

/// Tail constant of the discretely monitored first-passage correction,
/// `-ζ(1/2)/√(2π)`.
pub const DISCRETE_MONITORING_SHIFT: f64 = 0.582_597_157_939_010_7;

/// Settings of the Euler-Maruyama local-time simulation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeSettings {
    pub k: u64,
    pub u: f64,
    /// The path starts at 0 and local time is budgeted at level `a >= 0`.
    pub a: f64,
    pub n_paths: usize,
    /// Offsets `t` at which `ξ_u(t) = l(τ, a+t)` and `η_u(t) = l(τ, a-t)` are reported.
    pub t_grid: Vec<f64>,
    /// Laplace argument for the marginal comparisons.
    pub lambda: f64,
    /// Boxes `[lo, hi]` for the occupation identity.
    pub boxes: Vec<(f64, f64)>,
    /// Paths still short of the budget at this time are censored.
    pub time_cap: f64,
    pub max_censored_fraction: f64,
    /// `dt = dt_factor (1/k)² / (2α)`.
    pub dt_factor: f64,
}

impl Default for SdeSettings {
    fn default() -> Self {
        Self {
            k: 20,
            u: 1.0,
            a: 1.0,
            n_paths: 500,
            t_grid: vec![0.5, 1.0],
            lambda: 1.0,
            boxes: vec![(0.5, 1.5), (1.5, 2.5)],
            time_cap: 1.0e4,
            max_censored_fraction: 0.05,
            dt_factor: 0.1,
        }
    }
}

impl SdeSettings {
    pub fn delta(&self) -> f64 {
        1.0 / self.k as f64
    }

    pub fn dt(&self, bm: &DriftedBm<f64>) -> f64 {
        self.dt_factor * self.delta() * self.delta() / (2.0 * bm.alpha)
    }

    /// Interval width seen by a path sampled every `dt`: both ends move out
    /// by the discrete-monitoring shift `0.5826 σ √dt`.
    pub fn effective_delta(&self, bm: &DriftedBm<f64>) -> f64 {
        let sigma = (2.0 * bm.alpha).sqrt();
        self.delta() + 2.0 * DISCRETE_MONITORING_SHIFT * sigma * self.dt(bm).sqrt()
    }

    /// Downcrossings of `[a, a + 1/k]` marking `l(·, a) = u`.
    pub fn target_count(&self, bm: &DriftedBm<f64>) -> u64 {
        (2.0 * bm.alpha * self.u / self.effective_delta(bm)).round() as u64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    downcrossings: u64,
    armed: bool,
    occupation: f64,
}

/// Cells `[a + j/k, a + (j+1)/k)` indexed from `first`.
#[derive(Debug, Clone, Default)]
struct Ladder {
    first: i64,
    cells: VecDeque<Cell>,
}

impl Ladder {
    fn new() -> Self {
        let mut cells = VecDeque::new();
        cells.push_back(Cell::default());
        Self { first: 0, cells }
    }

    fn slot(&mut self, j: i64) -> &mut Cell {
        while j < self.first {
            // below the start: the path has been above these, so they are armed
            self.cells.push_front(Cell {
                armed: true,
                ..Cell::default()
            });
            self.first -= 1;
        }
        while j >= self.first + self.cells.len() as i64 {
            self.cells.push_back(Cell::default());
        }
        &mut self.cells[(j - self.first) as usize]
    }

    /// Updates arming and counts for a move from cell `from` to cell `to`.
    /// Level `j` is armed once the path has been at or above `x_j + 1/k`
    /// and counts a downcrossing when an armed level is reached from above.
    fn move_between(&mut self, from: i64, to: i64) {
        if to > from {
            for j in from..to {
                self.slot(j).armed = true;
            }
        } else {
            for j in to + 1..=from {
                let c = self.slot(j);
                if c.armed {
                    c.armed = false;
                    c.downcrossings += 1;
                }
            }
        }
    }

    fn get(&self, j: i64) -> Cell {
        let i = j - self.first;
        if i < 0 || i >= self.cells.len() as i64 {
            Cell::default()
        } else {
            self.cells[i as usize]
        }
    }
}

/// Snapshot of `l(t, ·)` at cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    /// Cell midpoints `a + (j + 1/2)/k`.
    pub levels: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[i][j]` is `l(times[i], levels[j])`.
    pub values: Vec<Vec<f64>>,
}

/// One simulated path up to the budget, or `None` if censored.
struct LocalTimePath {
    ladder: Ladder,
    tau: f64,
    snapshots: Vec<(f64, Ladder)>,
}

fn simulate_local_time<R: Rng + ?Sized>(
    bm: &DriftedBm<f64>,
    settings: &SdeSettings,
    snapshot_counts: &[u64],
    rng: &mut R,
) -> Option<LocalTimePath> {
    let target = settings.target_count(bm);
    let dt = settings.dt(bm);
    // work in units of 1/k relative to a
    let k = settings.k as f64;
    let drift = bm.beta * k * dt;
    let vol = (2.0 * bm.alpha * dt).sqrt() * k;
    let max_steps = (settings.time_cap / dt).ceil() as u64;

    let mut ladder = Ladder::new();
    let mut snapshots = Vec::new();
    let mut next_snapshot = 0;
    let mut cell = -(settings.a * k).round() as i64;
    let mut y = cell as f64;
    let mut reached = cell >= 0;
    let mut steps = 0u64;
    while !reached || ladder.get(0).downcrossings < target {
        if steps == max_steps {
            return None;
        }
        ladder.slot(cell).occupation += dt;
        let z: f64 = rng.sample(StandardNormal);
        y += drift + vol * z;
        steps += 1;
        let next = y.floor() as i64;
        ladder.move_between(cell, next);
        if next > cell {
            reached |= next >= 0;
        } else if next < 0 && 0 <= cell {
            while next_snapshot < snapshot_counts.len() && ladder.get(0).downcrossings >= snapshot_counts[next_snapshot]
            {
                snapshots.push((steps as f64 * dt, ladder.clone()));
                next_snapshot += 1;
            }
        }
        cell = next;
    }
    while next_snapshot < snapshot_counts.len() {
        snapshots.push((steps as f64 * dt, ladder.clone()));
        next_snapshot += 1;
    }
    Some(LocalTimePath {
        ladder,
        tau: steps as f64 * dt,
        snapshots,
    })
}

/// Local time at the midpoint of cell `j`: `N_j δ_eff / (2α)`.
fn local_time(ladder: &Ladder, j: i64, scale: f64) -> f64 {
    ladder.get(j).downcrossings as f64 * scale
}

/// One path's local-time field at the inverse local times of `u/4, u/2, 3u/4, u`.
pub fn simulate_local_time_field(bm: &DriftedBm<f64>, settings: &SdeSettings, seed: RngSeed) -> Result<LocalTimeField> {
    let target = settings.target_count(bm);
    let marks: Vec<u64> = (1..=4).map(|q| (target * q).div_ceil(4)).collect();
    let mut rng = seed.into_state();
    let path = simulate_local_time(bm, settings, &marks, &mut rng).ok_or(Error::TimeCap {
        cap: settings.time_cap,
        censored: 1,
        paths: 1,
    })?;
    let scale = settings.effective_delta(bm) / (2.0 * bm.alpha);
    let lo = path.ladder.first;
    let hi = lo + path.ladder.cells.len() as i64;
    let delta = settings.delta();
    Ok(LocalTimeField {
        levels: (lo..hi).map(|j| settings.a + (j as f64 + 0.5) * delta).collect(),
        times: path.snapshots.iter().map(|(t, _)| *t).collect(),
        values: path
            .snapshots
            .iter()
            .map(|(_, l)| (lo..hi).map(|j| local_time(l, j, scale)).collect())
            .collect(),
    })
}

/// Marginal of `ξ_u(t)` or `η_u(t)` against its limit law.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub direction: Direction,
    pub t: f64,
    /// `l(τ, a ± t)`.
    pub mean: Estimate,
    pub theoretical_mean: f64,
    /// `E exp{-λ 2α l(τ, a ± t)}`.
    pub laplace: Estimate,
    pub theoretical_laplace: f64,
}

/// `2 ∫_B l(τ, x) dx` against `∫_0^τ 1_B(X_s) ds`, summed over paths.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationRow {
    pub lo: f64,
    pub hi: f64,
    pub local_time_side: f64,
    pub occupation_side: f64,
    pub relative_error: f64,
    /// Fraction of paths whose own identity holds within 5%.
    pub per_path_within_5pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeReport {
    pub settings: SdeSettings,
    pub dt: f64,
    pub effective_delta: f64,
    pub target_count: u64,
    /// `l(τ, a)` actually reached: the target count times `δ_eff/(2α)`.
    pub realized_u: f64,
    pub completed: usize,
    pub censored: usize,
    pub mean_tau: f64,
    pub marginals: Vec<MarginalRow>,
    pub occupation: Vec<OccupationRow>,
}

/// Simulates `dX = β dt + √(2α) dW` from 0 until the downcrossing count of
/// `[a, a + 1/k]` marks `l(·, a) = u` (for `u = 0`, until `X` first hits
/// `a`), then compares the local-time field
/// with the limits of the downcrossing chains.
///
/// The chains count downcrossings scaled by `1/k`, which converges to
/// `2α l`; marginals are therefore compared as `2α l` against the laws of
/// [`limit_mechanism`] started from `2α u`.
pub fn sde_cross_validate(bm: &DriftedBm<f64>, settings: &SdeSettings, seed: RngSeed) -> Result<SdeReport> {
    if settings.k == 0 || settings.n_paths == 0 {
        return Err(Error::Config(
            "sde cross-validation needs k >= 1 and n_paths >= 1".into(),
        ));
    }
    if !(settings.u >= 0.0) {
        return Err(domain("u", settings.u, "[0, inf)"));
    }
    if !(settings.a >= 0.0) {
        return Err(domain("a", settings.a, "[0, inf)"));
    }
    let scale = settings.effective_delta(bm) / (2.0 * bm.alpha);
    let kf = settings.k as f64;
    let offsets: Vec<i64> = settings.t_grid.iter().map(|t| (t * kf).round() as i64).collect();
    let boxes: Vec<(i64, i64)> = settings
        .boxes
        .iter()
        .map(|(lo, hi)| {
            (
                ((lo - settings.a) * kf).round() as i64,
                ((hi - settings.a) * kf).round() as i64,
            )
        })
        .collect();

    struct PathSummary {
        xi: Vec<f64>,
        eta: Vec<f64>,
        boxes: Vec<(f64, f64)>,
        tau: f64,
    }

    let results = replicate(settings.n_paths, seed, |_, s| {
        let mut rng = s.into_state();
        simulate_local_time(bm, settings, &[], &mut rng).map(|p| PathSummary {
            xi: offsets.iter().map(|&j| local_time(&p.ladder, j, scale)).collect(),
            eta: offsets.iter().map(|&j| local_time(&p.ladder, -j, scale)).collect(),
            boxes: boxes
                .iter()
                .map(|&(lo, hi)| {
                    let l: f64 = (lo..hi).map(|j| local_time(&p.ladder, j, scale)).sum();
                    let occ: f64 = (lo..hi).map(|j| p.ladder.get(j).occupation).sum();
                    (2.0 * l / kf, occ)
                })
                .collect(),
            tau: p.tau,
        })
    });

    let completed: Vec<&PathSummary> = results.iter().flatten().collect();
    let censored = results.len() - completed.len();
    if completed.is_empty() || censored as f64 > settings.max_censored_fraction * settings.n_paths as f64 {
        return Err(Error::TimeCap {
            cap: settings.time_cap,
            censored,
            paths: settings.n_paths,
        });
    }

    let target = settings.target_count(bm);
    let realized_u = target as f64 * scale;
    let two_alpha = 2.0 * bm.alpha;
    let limits = limit_mechanism(bm);
    let mut marginals = Vec::new();
    for (direction, f) in [(Direction::Upward, &limits.f_up), (Direction::Downward, &limits.f_down)] {
        let law = CbiLaw::new(limits.r.clone(), f.clone(), two_alpha * realized_u)?;
        for (i, &t) in settings.t_grid.iter().enumerate() {
            if direction == Direction::Downward && t > settings.a {
                continue;
            }
            let samples = |p: &&PathSummary| match direction {
                Direction::Upward => p.xi[i],
                Direction::Downward => p.eta[i],
            };
            let mean = Estimate::from_samples(completed.iter().map(samples));
            let laplace = Estimate::from_samples(
                completed
                    .iter()
                    .map(|p| (-settings.lambda * two_alpha * samples(p)).exp()),
            );
            // E[x e^{ct}] + b(e^{ct} - 1)/c for R = cλ - λ²
            let c = limits.r.beta;
            let growth = (c * t).exp();
            let immigration = if c == 0.0 { t } else { (c * t).exp_m1() / c };
            let theoretical_mean = (two_alpha * realized_u * growth + f.b * immigration) / two_alpha;
            marginals.push(MarginalRow {
                direction,
                t,
                mean,
                theoretical_mean,
                laplace,
                theoretical_laplace: law.laplace_transform(t, settings.lambda, 1e-10)?,
            });
        }
    }

    let occupation = settings
        .boxes
        .iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let l: f64 = completed.iter().map(|p| p.boxes[b].0).sum();
            let occ: f64 = completed.iter().map(|p| p.boxes[b].1).sum();
            let within = completed
                .iter()
                .filter(|p| {
                    let (l, o) = p.boxes[b];
                    (l - o).abs() <= 0.05 * o.max(f64::MIN_POSITIVE)
                })
                .count();
            OccupationRow {
                lo,
                hi,
                local_time_side: l / completed.len() as f64,
                occupation_side: occ / completed.len() as f64,
                relative_error: if occ > 0.0 { (l - occ).abs() / occ } else { l.abs() },
                per_path_within_5pct: within as f64 / completed.len() as f64,
            }
        })
        .collect();

    Ok(SdeReport {
        settings: settings.clone(),
        dt: settings.dt(bm),
        effective_delta: settings.effective_delta(bm),
        target_count: target,
        realized_u,
        completed: completed.len(),
        censored,
        mean_tau: completed.iter().map(|p| p.tau).sum::<f64>() / completed.len() as f64,
        marginals,
        occupation,
    })
}
