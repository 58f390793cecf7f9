use alloc::vec::Vec;

use super::dual::{dual_function, DualEvaluation};
use crate::capacity::{
    interference, pu_capacity_loss, pu_capacity_max, InterferenceLevel, PolicyMoments, PowerPolicy,
    ScenarioConfig, SensingWeights,
};
use crate::channel::ChannelParams;
use crate::sensing::SensingParams;
use crate::{Error, Result};

/// Step-size schedule of the dual update `lambda <- lambda - alpha_k g_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `alpha_k = alpha`.
    Constant(f64),
    /// `alpha_k = alpha / sqrt(k)`.
    Diminishing(f64),
}

impl StepRule {
    /// Step size at (1-based) iteration `k`.
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            Self::Constant(a) => a,
            Self::Diminishing(a) => a / libm::sqrt(k.max(1) as f64),
        }
    }
}

/// Settings of the inner dual iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Step-size schedule.
    pub step: StepRule,
    /// `epsilon`: stop once `|g| <= epsilon` or `|delta lambda| <= epsilon`.
    /// After a bracket fallback the bracket width stands in for the step.
    pub tolerance: f64,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Starting multiplier.
    pub initial_lambda: f64,
    /// Projection floor; `lambda = 0` has no finite water level.
    pub lambda_floor: f64,
    /// Keep a bracket on `lambda*` from the signs of past subgradients and
    /// bisect (geometrically) whenever the raw step leaves it.
    pub safeguard: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            step: StepRule::Constant(0.05),
            tolerance: 1e-6,
            max_iterations: 10_000,
            initial_lambda: 1.0,
            lambda_floor: 1e-12,
            safeguard: true,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        let alpha = match self.step {
            StepRule::Constant(a) | StepRule::Diminishing(a) => a,
        };
        let checks = [
            ("step_size", alpha),
            ("tolerance", self.tolerance),
            ("initial_lambda", self.initial_lambda),
            ("lambda_floor", self.lambda_floor),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// State of the dual iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    /// Current multiplier.
    pub lambda: f64,
    /// Last subgradient `P_av - H`.
    pub subgrad: f64,
    /// Iteration counter, 1-based.
    pub iteration: usize,
    /// Step size used for the last update.
    pub step_size: f64,
    /// Convergence tolerance.
    pub tolerance: f64,
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Iteration, 1-based.
    pub iteration: usize,
    /// Multiplier at which the dual was evaluated.
    pub lambda: f64,
    /// `g = P_av - H`.
    pub subgradient: f64,
    /// `q(lambda)` in bits/s/Hz.
    pub dual_value: f64,
    /// Whether the next iterate came from the bracket fallback.
    pub bisected: bool,
}

/// Outcome of an optimization at one threshold (inner) or over thresholds
/// (outer).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Sensing threshold `eta*`.
    pub eta_star: f64,
    /// Multiplier `lambda*`.
    pub lambda_star: f64,
    /// Water-filling cutoff SNR `gamma_s* = lambda* N_0`.
    pub cutoff_snr: f64,
    /// `C_s*` in bits/s/Hz.
    pub capacity: f64,
    /// `q(lambda*)` in bits/s/Hz.
    pub dual_value: f64,
    /// `C_s* - q(lambda*)`.
    pub duality_gap: f64,
    /// `H` at the optimum.
    pub avg_power_used: f64,
    /// Interference at the optimum.
    pub interference_used: InterferenceLevel,
    /// Primary capacity loss at `eta*`.
    pub pu_loss: f64,
    /// Sensing weights at `eta*`.
    pub weights: SensingWeights,
    /// Policy fading averages at `lambda*`.
    pub moments: PolicyMoments,
    /// Optimal policy.
    pub policy: PowerPolicy,
    /// Stopping rule met before the iteration cap.
    pub converged: bool,
    /// `lambda*` sits on the projection floor (power constraint slack).
    pub at_lambda_floor: bool,
    /// Number of dual evaluations.
    pub iterations: usize,
    /// Per-iteration trace.
    pub trace: Vec<IterationRecord>,
}

impl OptimizationResult {
    /// Complementary slackness residual `lambda* (H - P_av)`.
    pub fn slackness(&self, cfg: &ScenarioConfig) -> f64 {
        self.lambda_star * (self.avg_power_used - cfg.avg_power_budget)
    }

    /// Final dual state.
    pub fn final_state(&self, settings: &SolverSettings) -> DualState {
        let last = self.trace.last();
        DualState {
            lambda: self.lambda_star,
            subgrad: last.map_or(0.0, |r| r.subgradient),
            iteration: self.iterations,
            step_size: settings.step.step(self.iterations),
            tolerance: settings.tolerance,
        }
    }
}

/// Minimizes the dual at fixed threshold `eta` by projected subgradient
/// iteration and returns the primal-dual pair it converges to.
///
/// Running into the iteration cap is not an error: the result comes back with
/// `converged == false` and the full trace.
pub fn subgradient_solve(
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    settings: &SolverSettings,
) -> Result<OptimizationResult> {
    settings.validate()?;
    let floor = settings.lambda_floor;
    let mut lambda = settings.initial_lambda.max(floor);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<DualEvaluation> = None;

    for k in 1..=settings.max_iterations {
        let eval = dual_function(lambda, eta, sp, ch, cfg)?;
        let g = eval.subgradient;
        let mut record = IterationRecord {
            iteration: k,
            lambda,
            subgradient: g,
            dual_value: eval.value_bits(),
            bisected: false,
        };
        last = Some(eval);

        if g.abs() <= settings.tolerance {
            trace.push(record);
            converged = true;
            break;
        }

        // g > 0: power under-used, lambda* lies below.
        if g > 0.0 {
            hi = hi.min(lambda);
        } else {
            lo = lo.max(lambda);
        }

        let mut next = (lambda - settings.step.step(k) * g).max(floor);
        if settings.safeguard && !(next > lo && next < hi) {
            record.bisected = true;
            next = if hi.is_finite() && lo > 0.0 {
                libm::sqrt(lo * hi)
            } else if hi.is_finite() {
                (0.5 * hi).max(floor)
            } else {
                2.0 * lambda
            };
        }
        trace.push(record);

        let delta = if record.bisected {
            hi - lo
        } else {
            (next - lambda).abs()
        };
        lambda = next;
        if delta <= settings.tolerance {
            converged = true;
            if delta > 0.0 {
                let eval = dual_function(lambda, eta, sp, ch, cfg)?;
                trace.push(IterationRecord {
                    iteration: k + 1,
                    lambda,
                    subgradient: eval.subgradient,
                    dual_value: eval.value_bits(),
                    bisected: false,
                });
                last = Some(eval);
            }
            break;
        }
    }

    let eval = last.expect("at least one iteration runs");
    finish(eta, eval, sp, ch, cfg, floor, converged, trace)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    eta: f64,
    eval: DualEvaluation,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    floor: f64,
    converged: bool,
    trace: Vec<IterationRecord>,
) -> Result<OptimizationResult> {
    let interference_used = interference(&eval.policy, eta, sp, cfg, ch)?;
    let pu_loss = match pu_capacity_loss(eta, sp, ch, cfg) {
        Ok(r) => r.capacity_loss,
        Err(Error::UnboundedQuantile { .. }) => pu_capacity_max(ch, cfg)?,
        Err(e) => return Err(e),
    };
    let dual_value = eval.value_bits();
    Ok(OptimizationResult {
        eta_star: eta,
        lambda_star: eval.lambda,
        cutoff_snr: eval.policy.cutoff_snr(),
        capacity: eval.su_capacity,
        dual_value,
        duality_gap: eval.su_capacity - dual_value,
        avg_power_used: eval.avg_power,
        interference_used,
        pu_loss,
        weights: eval.weights,
        moments: eval.moments,
        policy: eval.policy,
        converged,
        at_lambda_floor: eval.lambda <= floor,
        iterations: trace.len(),
        trace,
    })
}
