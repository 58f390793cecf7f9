use alloc::vec::Vec;

use super::solve::{subgradient_solve, SolverSettings};
use crate::capacity::ScenarioConfig;
use crate::channel::ChannelParams;
use crate::sensing::SensingParams;
use crate::{Error, Result};

/// Largest second difference still counted as concave.
pub const CONCAVITY_TOLERANCE: f64 = 1e-9;

/// First differences at or below this magnitude carry no sign.
pub const FLAT_TOLERANCE: f64 = 1e-10;

/// Finite-difference shape of a sampled curve on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveShape {
    /// `f[i+1] - f[i]`.
    pub first_differences: Vec<f64>,
    /// `f[i-1] - 2 f[i] + f[i+1]`, for interior points.
    pub second_differences: Vec<f64>,
    /// Largest second difference.
    pub max_second_difference: f64,
    /// Interior indices whose second difference exceeds
    /// [`CONCAVITY_TOLERANCE`].
    pub violations: Vec<usize>,
    /// Sign flips among the non-flat first differences.
    pub first_difference_sign_changes: usize,
}

impl CurveShape {
    /// Analyzes samples taken on a uniform grid (at least 3 points).
    pub fn analyze(values: &[f64]) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidParameter {
                name: "eta_grid",
                reason: "needs at least 3 points",
            });
        }
        let first_differences: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let second_differences: Vec<f64> = values
            .windows(3)
            .map(|w| w[0] - 2.0 * w[1] + w[2])
            .collect();
        let max_second_difference = second_differences
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let violations = second_differences
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > CONCAVITY_TOLERANCE)
            .map(|(i, _)| i + 1)
            .collect();

        let mut sign_changes = 0;
        let mut prev_sign = 0.0;
        for d in &first_differences {
            if d.abs() <= FLAT_TOLERANCE {
                continue;
            }
            let s = d.signum();
            if prev_sign != 0.0 && s != prev_sign {
                sign_changes += 1;
            }
            prev_sign = s;
        }

        Ok(Self {
            first_differences,
            second_differences,
            max_second_difference,
            violations,
            first_difference_sign_changes: sign_changes,
        })
    }

    /// No second difference above tolerance.
    pub fn is_concave(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Concavity diagnostics of the optimized `C_s(eta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    /// Grid.
    pub etas: Vec<f64>,
    /// Optimized `C_s` per grid point.
    pub capacities: Vec<f64>,
    /// `C_0` per grid point.
    pub capacity_idle: Vec<f64>,
    /// `C_1` per grid point.
    pub capacity_active: Vec<f64>,
    /// `(C_1 - C_0)(pi_0 P_f' + pi_1 P_d')` per grid point.
    pub threshold_slopes: Vec<f64>,
    /// `C_1 <= C_0` at every grid point, so the slope factor
    /// `C_1 - C_0` is never positive.
    pub capacity_order_holds: bool,
    /// Shape of the capacity curve.
    pub shape: CurveShape,
}

/// Solves the inner problem on every point of a uniform `eta_grid` and
/// reports the curvature of the optimized capacity.
pub fn concavity_check(
    eta_grid: &[f64],
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    settings: &SolverSettings,
) -> Result<ConcavityReport> {
    if eta_grid.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "eta_grid",
            reason: "needs at least 3 points",
        });
    }
    let mut capacities = Vec::with_capacity(eta_grid.len());
    let mut capacity_idle = Vec::with_capacity(eta_grid.len());
    let mut capacity_active = Vec::with_capacity(eta_grid.len());
    let mut threshold_slopes = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let r = subgradient_solve(eta, sp, ch, cfg, settings)?;
        let (c0, c1) = (r.moments.capacity_idle, r.moments.capacity_active);
        let kernel = cfg.prior_idle * sp.d_pf_deta(eta)? + cfg.prior_active * sp.d_pd_deta(eta)?;
        capacities.push(r.capacity);
        capacity_idle.push(c0);
        capacity_active.push(c1);
        threshold_slopes.push((c1 - c0) * kernel);
    }
    let capacity_order_holds = capacity_idle
        .iter()
        .zip(&capacity_active)
        .all(|(c0, c1)| c1 <= &(c0 + 1e-12));
    let shape = CurveShape::analyze(&capacities)?;
    Ok(ConcavityReport {
        etas: eta_grid.to_vec(),
        capacities,
        capacity_idle,
        capacity_active,
        threshold_slopes,
        capacity_order_holds,
        shape,
    })
}
