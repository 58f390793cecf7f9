use core::f64::consts::LN_2;

use crate::capacity::{PolicyMoments, PowerPolicy, ScenarioConfig, SensingWeights, TransmitPolicy};
use crate::channel::ChannelParams;
use crate::sensing::SensingParams;
use crate::Result;

/// Optimal `(P_t^0, P_t^1)` in fading state `gamma_s` for dual variable
/// `lambda`.
pub fn power_allocation(
    lambda: f64,
    gamma_s: f64,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<(f64, f64)> {
    let policy = PowerPolicy::from_dual(lambda, ch, cfg)?;
    Ok((policy.idle_power(gamma_s), policy.active_power(gamma_s)))
}

/// The dual function evaluated at one `lambda`, together with the maximizing
/// policy and everything needed to report on it.
///
/// The Lagrangian is formed with capacities in nats,
/// `L = C_s ln 2 - lambda (H - P_av)`, so that its pointwise maximizer is
/// exactly the water-filling level `1/lambda`. Capacities are reported in
/// bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEvaluation {
    /// Dual variable.
    pub lambda: f64,
    /// `q(lambda)` in nats.
    pub value_nats: f64,
    /// Maximizing policy.
    pub policy: PowerPolicy,
    /// Sensing case weights at the threshold.
    pub weights: SensingWeights,
    /// Fading averages of the policy.
    pub moments: PolicyMoments,
    /// `C_s` of the policy, bits/s/Hz.
    pub su_capacity: f64,
    /// `H` of the policy.
    pub avg_power: f64,
    /// `g = P_av - H`.
    pub subgradient: f64,
}

impl DualEvaluation {
    /// `q(lambda)` in bits/s/Hz.
    pub fn value_bits(&self) -> f64 {
        self.value_nats / LN_2
    }
}

/// Evaluates `q(lambda)` at threshold `eta`.
pub fn dual_function(
    lambda: f64,
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<DualEvaluation> {
    let weights = SensingWeights::new(eta, sp, cfg)?;
    let policy = PowerPolicy::from_dual(lambda, ch, cfg)?;
    let moments = PolicyMoments::compute(&policy, ch)?;
    Ok(assemble(lambda, policy, weights, moments, cfg))
}

pub(crate) fn assemble(
    lambda: f64,
    policy: PowerPolicy,
    weights: SensingWeights,
    moments: PolicyMoments,
    cfg: &ScenarioConfig,
) -> DualEvaluation {
    let su_capacity = weights.mix(moments.capacity_idle, moments.capacity_active);
    let avg_power = weights.mix(moments.mean_idle_power, moments.mean_active_power);
    let subgradient = cfg.avg_power_budget - avg_power;
    DualEvaluation {
        lambda,
        value_nats: su_capacity * LN_2 + lambda * subgradient,
        policy,
        weights,
        moments,
        su_capacity,
        avg_power,
        subgradient,
    }
}

/// Lagrangian `C_s ln 2 - lambda (H - P_av)` of an arbitrary policy, in nats.
pub fn lagrangian<P: TransmitPolicy + ?Sized>(
    policy: &P,
    lambda: f64,
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    let weights = SensingWeights::new(eta, sp, cfg)?;
    let m = PolicyMoments::compute(policy, ch)?;
    let cs = weights.mix(m.capacity_idle, m.capacity_active);
    let h = weights.mix(m.mean_idle_power, m.mean_active_power);
    Ok(cs * LN_2 - lambda * (h - cfg.avg_power_budget))
}

/// `g = P_av - H(policy)` at threshold `eta`.
///
/// For the policy maximizing the Lagrangian at `lambda`, `g` is a subgradient
/// of `q` there: `q(mu) >= q(lambda) + g (mu - lambda)` for every `mu >= 0`.
pub fn subgradient<P: TransmitPolicy + ?Sized>(
    policy: &P,
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    Ok(cfg.avg_power_budget - crate::capacity::avg_power(policy, eta, sp, cfg, ch)?)
}
