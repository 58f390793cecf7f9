use alloc::vec::Vec;

use super::golden::golden_section_max;
use super::solve::{subgradient_solve, OptimizationResult, SolverSettings};
use crate::capacity::{pu_capacity_max, saturating_loss, ScenarioConfig};
use crate::channel::ChannelParams;
use crate::sensing::SensingParams;
use crate::{Error, Result};

/// Settings of the outer search over the sensing threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    /// Inner dual solver.
    pub solver: SolverSettings,
    /// Points of the coarse threshold grid (at least 2).
    pub grid_points: usize,
    /// Golden-section bracket width, in units of `sigma^2`.
    pub golden_tolerance: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            grid_points: 41,
            golden_tolerance: 1e-4,
        }
    }
}

/// One coarse-grid threshold evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Threshold.
    pub eta: f64,
    /// Converged multiplier.
    pub lambda_star: f64,
    /// `C_s` at the inner optimum.
    pub capacity: f64,
    /// `H` at the inner optimum.
    pub avg_power: f64,
    /// Average interference at the inner optimum.
    pub interference: f64,
    /// `C_p,loss(eta)`.
    pub pu_loss: f64,
    /// Duality gap at the inner optimum.
    pub duality_gap: f64,
    /// Dual evaluations used.
    pub iterations: usize,
    /// Whether the loss budget holds.
    pub feasible: bool,
    /// Whether the inner solve converged.
    pub converged: bool,
}

impl SweepRow {
    fn from_result(r: &OptimizationResult, feasible: bool) -> Self {
        Self {
            eta: r.eta_star,
            lambda_star: r.lambda_star,
            capacity: r.capacity,
            avg_power: r.avg_power_used,
            interference: r.interference_used.average,
            pu_loss: r.pu_loss,
            duality_gap: r.duality_gap,
            iterations: r.iterations,
            feasible,
            converged: r.converged,
        }
    }
}

/// Outcome of [`threshold_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Optimum `(eta*, lambda*)` and its diagnostics.
    pub best: OptimizationResult,
    /// Coarse-grid table, in grid order.
    pub sweep: Vec<SweepRow>,
    /// `C_p,max`.
    pub capacity_max: f64,
    /// `q C_p,max`.
    pub loss_budget: f64,
    /// Thresholds where the loss budget switches from holding to failing.
    pub feasibility_edges: Vec<f64>,
}

/// Evenly spaced grid of `n` points over `[lo, hi]` (`n >= 2`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Maximizes `C_s` jointly over the threshold and the powers, subject to the
/// primary capacity-loss budget `C_p,loss(eta) <= q C_p,max`.
///
/// Every point of a coarse grid over `eta_range` gets a full inner dual solve.
/// Loss-budget edges between neighbouring grid points are located by
/// bisection and added as candidates. The best candidate is refined by
/// golden-section search between its feasible neighbours.
pub fn threshold_search(
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    eta_range: (f64, f64),
    settings: &SearchSettings,
) -> Result<SearchOutcome> {
    let (lo, hi) = eta_range;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidParameter {
            name: "eta_range",
            reason: "must satisfy 0 <= lo < hi < inf",
        });
    }
    if settings.grid_points < 2 {
        return Err(Error::InvalidParameter {
            name: "grid_points",
            reason: "must be at least 2",
        });
    }

    let capacity_max = pu_capacity_max(ch, cfg)?;
    let loss_budget = cfg.loss_fraction * capacity_max;
    let loss_at = |eta: f64| -> Result<f64> {
        Ok(saturating_loss(eta, sp, ch, cfg, capacity_max)?.capacity_loss)
    };
    let feasible_at = |eta: f64| -> Result<bool> { Ok(loss_at(eta)? <= loss_budget) };

    let grid = linspace(lo, hi, settings.grid_points);
    let solve = |eta: f64| subgradient_solve(eta, sp, ch, cfg, &settings.solver);
    let solved = evaluate_grid(&grid, &solve)?;

    let mut feasible = Vec::with_capacity(grid.len());
    for r in &solved {
        feasible.push(r.pu_loss <= loss_budget);
    }
    let sweep: Vec<SweepRow> = solved
        .iter()
        .zip(&feasible)
        .map(|(r, &f)| SweepRow::from_result(r, f))
        .collect();

    if !feasible.iter().any(|&f| f) {
        let (i, row) = sweep
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.pu_loss.total_cmp(&b.1.pu_loss))
            .expect("grid is non-empty");
        return Err(Error::Infeasible {
            eta: grid[i],
            min_loss: row.pu_loss,
            budget: loss_budget,
        });
    }

    // Candidates: feasible grid points plus located budget edges.
    let mut candidates: Vec<OptimizationResult> = Vec::new();
    let mut feasibility_edges = Vec::new();
    for i in 0..grid.len() {
        if feasible[i] {
            candidates.push(solved[i].clone());
        }
        if i + 1 < grid.len() && feasible[i] != feasible[i + 1] {
            let edge = locate_edge(grid[i], grid[i + 1], feasible[i], &feasible_at)?;
            feasibility_edges.push(edge);
            candidates.push(solve(edge)?);
        }
    }
    candidates.sort_by(|a, b| a.eta_star.total_cmp(&b.eta_star));

    let best_idx = argmax(candidates.iter().map(|r| r.capacity));
    let left = if best_idx > 0 {
        candidates[best_idx - 1].eta_star
    } else {
        candidates[best_idx].eta_star
    };
    let right = candidates
        .get(best_idx + 1)
        .map_or(candidates[best_idx].eta_star, |r| r.eta_star);

    let mut best = candidates[best_idx].clone();
    if right > left {
        let tol = settings.golden_tolerance * sp.noise_variance();
        let objective = |eta: f64| -> Result<f64> {
            if !feasible_at(eta)? {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(solve(eta)?.capacity)
        };
        let (eta, value) = golden_section_max(objective, left, right, tol)?;
        if value > best.capacity {
            best = solve(eta)?;
        }
    }

    Ok(SearchOutcome {
        best,
        sweep,
        capacity_max,
        loss_budget,
        feasibility_edges,
    })
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Bisects for the loss-budget edge between `a` (feasibility `a_feasible`) and
/// `b`; returns the feasible side.
fn locate_edge<F>(mut a: f64, mut b: f64, a_feasible: bool, feasible_at: &F) -> Result<f64>
where
    F: Fn(f64) -> Result<bool>,
{
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        if feasible_at(mid)? == a_feasible {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(if a_feasible { a } else { b })
}

#[cfg(feature = "parallel")]
fn evaluate_grid<F>(grid: &[f64], solve: &F) -> Result<Vec<OptimizationResult>>
where
    F: Fn(f64) -> Result<OptimizationResult> + Sync,
{
    use rayon::prelude::*;
    grid.par_iter().map(|&eta| solve(eta)).collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate_grid<F>(grid: &[f64], solve: &F) -> Result<Vec<OptimizationResult>>
where
    F: Fn(f64) -> Result<OptimizationResult>,
{
    grid.iter().map(|&eta| solve(eta)).collect()
}
