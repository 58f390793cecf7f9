//! Ergodic objective and constraint functionals.
//!
//! The sensing outcome splits time into four cases. The SU transmits with the
//! idle-state power `P_t^0` when it believes the band is free (PU idle without
//! false alarm, PU active but missed) and with `P_t^1` otherwise (false alarm,
//! correct detection). Capacity, average power and interference are all the
//! same mixture of the two per-state quantities; see [`SensingWeights`].

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::channel::{sorted_kinks, ChannelParams};
use crate::sensing::SensingParams;
use crate::{Error, Result};

/// Rate formula used for the primary link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapacityLaw {
    /// `log2(1 + gamma)`.
    #[default]
    Shannon1Plus,
    /// `log2(gamma)`, as printed for the primary capacity integrals.
    PaperLiteral,
}

impl CapacityLaw {
    /// Rate at SNR `gamma` in bits/s/Hz.
    pub fn rate(self, gamma: f64) -> f64 {
        match self {
            Self::Shannon1Plus => libm::log1p(gamma) / LN_2,
            Self::PaperLiteral => libm::log2(gamma),
        }
    }
}

/// Network-level constants of the optimization problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// `pi_0`, probability that the PU is idle.
    pub prior_idle: f64,
    /// `pi_1`, probability that the PU is active.
    pub prior_active: f64,
    /// `P_av`, average SU transmit power budget (linear).
    pub avg_power_budget: f64,
    /// `I_pk`, peak interference tolerated by the PU receiver (linear).
    pub peak_interference: f64,
    /// `q`, tolerated PU capacity loss as a fraction of `C_p,max`.
    pub loss_fraction: f64,
    /// Rate formula for the primary link.
    pub capacity_law: CapacityLaw,
}

impl ScenarioConfig {
    /// Scenario with `pi_0 = 1 - prior_active` and the default capacity law.
    pub fn new(
        prior_active: f64,
        avg_power_budget: f64,
        peak_interference: f64,
        loss_fraction: f64,
    ) -> Result<Self> {
        let cfg = Self {
            prior_idle: 1.0 - prior_active,
            prior_active,
            avg_power_budget,
            peak_interference,
            loss_fraction,
            capacity_law: CapacityLaw::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same scenario with another primary-link rate formula.
    pub fn with_capacity_law(self, capacity_law: CapacityLaw) -> Self {
        Self {
            capacity_law,
            ..self
        }
    }

    /// Checks every invariant of the scenario.
    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must lie in [0, 1]",
                })
            }
        };
        unit("prior_idle", self.prior_idle)?;
        unit("prior_active", self.prior_active)?;
        unit("loss_fraction", self.loss_fraction)?;
        if (self.prior_idle + self.prior_active - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "prior_active",
                reason: "priors must sum to one",
            });
        }
        for (name, v) in [
            ("avg_power_budget", self.avg_power_budget),
            ("peak_interference", self.peak_interference),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        Ok(())
    }
}

/// Probabilities of the four sensing cases at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingWeights {
    /// `pi_0 (1 - P_f)`: idle, no false alarm. SU uses `P_t^0`.
    pub idle_clear: f64,
    /// `pi_0 P_f`: idle, false alarm. SU uses `P_t^1`.
    pub idle_false_alarm: f64,
    /// `pi_1 P_d`: active, detected. SU uses `P_t^1`.
    pub active_detected: f64,
    /// `pi_1 (1 - P_d)`: active, missed. SU uses `P_t^0`.
    pub active_missed: f64,
}

impl SensingWeights {
    /// Case probabilities at threshold `eta`.
    pub fn new(eta: f64, sp: &SensingParams, cfg: &ScenarioConfig) -> Result<Self> {
        let pf = sp.prob_false_alarm(eta)?;
        let pd = sp.prob_detection(eta)?;
        Ok(Self {
            idle_clear: cfg.prior_idle * (1.0 - pf),
            idle_false_alarm: cfg.prior_idle * pf,
            active_detected: cfg.prior_active * pd,
            active_missed: cfg.prior_active * (1.0 - pd),
        })
    }

    /// Share of time spent transmitting with `P_t^0`.
    pub fn idle_power_share(&self) -> f64 {
        self.idle_clear + self.active_missed
    }

    /// Share of time spent transmitting with `P_t^1`.
    pub fn active_power_share(&self) -> f64 {
        self.idle_false_alarm + self.active_detected
    }

    /// Sum of the four weights (one up to rounding).
    pub fn total(&self) -> f64 {
        self.idle_clear + self.idle_false_alarm + self.active_detected + self.active_missed
    }

    /// Mixes an idle-power quantity with an active-power quantity.
    pub fn mix(&self, idle: f64, active: f64) -> f64 {
        self.idle_clear * idle
            + self.idle_false_alarm * active
            + self.active_detected * active
            + self.active_missed * idle
    }
}

/// Per-fading-state transmit powers.
pub trait TransmitPolicy {
    /// `P_t^0(gamma_s)`.
    fn idle_power(&self, gamma_s: f64) -> f64;
    /// `P_t^1(gamma_s)`.
    fn active_power(&self, gamma_s: f64) -> f64;
    /// Both powers vanish below this SNR.
    fn support_start(&self) -> f64 {
        0.0
    }
    /// SNRs where either power function has a kink.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Supremum over fading states of `(P_t^0, P_t^1)`.
    fn peak_powers(&self) -> (f64, f64);
}

/// Water-filling policy induced by a dual variable.
///
/// `P_t^0 = (1/lambda - N_0/gamma_s)^+` and `P_t^1 = min(P_t^0, I_pk / G_sp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPolicy {
    /// Dual variable `lambda` of the average power constraint.
    pub dual_lambda: f64,
    noise_power: f64,
    power_cap: f64,
}

impl PowerPolicy {
    /// Policy for dual variable `lambda`.
    pub fn from_dual(lambda: f64, ch: &ChannelParams, cfg: &ScenarioConfig) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::Domain {
                what: "dual variable",
                value: lambda,
            });
        }
        if lambda == 0.0 {
            return Err(Error::UnboundedWaterLevel);
        }
        Ok(Self {
            dual_lambda: lambda,
            noise_power: ch.noise_power,
            power_cap: cfg.peak_interference / ch.gain_sp,
        })
    }

    /// Water level `1/lambda`.
    pub fn water_level(&self) -> f64 {
        1.0 / self.dual_lambda
    }

    /// Cap on `P_t^1`, `I_pk / G_sp`.
    pub fn power_cap(&self) -> f64 {
        self.power_cap
    }

    /// Water-filling cutoff `gamma_s* = lambda N_0`.
    pub fn cutoff_snr(&self) -> f64 {
        self.dual_lambda * self.noise_power
    }

    /// SNR above which the interference cap binds, if it ever does.
    pub fn cap_knee(&self) -> Option<f64> {
        let excess = self.water_level() - self.power_cap;
        (excess > 0.0).then(|| self.noise_power / excess)
    }
}

impl TransmitPolicy for PowerPolicy {
    fn idle_power(&self, gamma_s: f64) -> f64 {
        if gamma_s <= self.cutoff_snr() {
            return 0.0;
        }
        (self.water_level() - self.noise_power / gamma_s).max(0.0)
    }

    fn active_power(&self, gamma_s: f64) -> f64 {
        self.idle_power(gamma_s).min(self.power_cap)
    }

    fn support_start(&self) -> f64 {
        self.cutoff_snr()
    }

    fn kinks(&self) -> Vec<f64> {
        self.cap_knee().into_iter().collect()
    }

    fn peak_powers(&self) -> (f64, f64) {
        let w = self.water_level();
        (w, w.min(self.power_cap))
    }
}

/// Shannon rate `log2(1 + gamma_s P / N_0)`.
pub fn instantaneous_capacity(power: f64, gamma_s: f64, noise_power: f64) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    libm::log1p(gamma_s * power / noise_power) / LN_2
}

/// Fading averages of one policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyMoments {
    /// `E[P_t^0]`.
    pub mean_idle_power: f64,
    /// `E[P_t^1]`.
    pub mean_active_power: f64,
    /// `C_0 = E[log2(1 + gamma_s P_t^0 / N_0)]`.
    pub capacity_idle: f64,
    /// `C_1 = E[log2(1 + gamma_s P_t^1 / N_0)]`.
    pub capacity_active: f64,
}

impl PolicyMoments {
    /// Computes all four averages over the SU fading distribution.
    pub fn compute<P: TransmitPolicy + ?Sized>(policy: &P, ch: &ChannelParams) -> Result<Self> {
        let (mean_idle_power, mean_active_power) = expected_powers(policy, ch)?;
        let (capacity_idle, capacity_active) = ergodic_capacity_pair(policy, ch)?;
        Ok(Self {
            mean_idle_power,
            mean_active_power,
            capacity_idle,
            capacity_active,
        })
    }
}

fn su_expect<P, F>(policy: &P, ch: &ChannelParams, f: F) -> Result<f64>
where
    P: TransmitPolicy + ?Sized,
    F: Fn(f64) -> f64,
{
    let kinks = sorted_kinks(policy.kinks());
    ch.su_fading
        .expect_between(f, policy.support_start(), f64::INFINITY, &kinks)
}

/// `(E[P_t^0], E[P_t^1])` over the SU fading distribution.
pub fn expected_powers<P: TransmitPolicy + ?Sized>(
    policy: &P,
    ch: &ChannelParams,
) -> Result<(f64, f64)> {
    Ok((
        su_expect(policy, ch, |g| policy.idle_power(g))?,
        su_expect(policy, ch, |g| policy.active_power(g))?,
    ))
}

/// Ergodic capacities `(C_0, C_1)` of a policy.
pub fn ergodic_capacity_pair<P: TransmitPolicy + ?Sized>(
    policy: &P,
    ch: &ChannelParams,
) -> Result<(f64, f64)> {
    let n0 = ch.noise_power;
    Ok((
        su_expect(policy, ch, |g| {
            instantaneous_capacity(policy.idle_power(g), g, n0)
        })?,
        su_expect(policy, ch, |g| {
            instantaneous_capacity(policy.active_power(g), g, n0)
        })?,
    ))
}

/// SU capacity `C_s` at threshold `eta` given `C_0` and `C_1`.
pub fn su_capacity(
    c0: f64,
    c1: f64,
    eta: f64,
    sp: &SensingParams,
    cfg: &ScenarioConfig,
) -> Result<f64> {
    Ok(SensingWeights::new(eta, sp, cfg)?.mix(c0, c1))
}

/// Average transmit power `H` of a policy at threshold `eta`.
pub fn avg_power<P: TransmitPolicy + ?Sized>(
    policy: &P,
    eta: f64,
    sp: &SensingParams,
    cfg: &ScenarioConfig,
    ch: &ChannelParams,
) -> Result<f64> {
    let w = SensingWeights::new(eta, sp, cfg)?;
    let (e0, e1) = expected_powers(policy, ch)?;
    Ok(w.mix(e0, e1))
}

/// Interference at the PU receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceLevel {
    /// Fading-averaged interference `I`.
    pub average: f64,
    /// Supremum over fading states of the per-state interference.
    pub peak: f64,
}

/// Interference in fading state `gamma_s`: `G_sp` times the sensing mixture of
/// the two powers.
pub fn interference_at<P: TransmitPolicy + ?Sized>(
    policy: &P,
    gamma_s: f64,
    weights: &SensingWeights,
    ch: &ChannelParams,
) -> f64 {
    ch.gain_sp * weights.mix(policy.idle_power(gamma_s), policy.active_power(gamma_s))
}

/// Interference `I` of a policy at threshold `eta`, averaged and worst-state.
pub fn interference<P: TransmitPolicy + ?Sized>(
    policy: &P,
    eta: f64,
    sp: &SensingParams,
    cfg: &ScenarioConfig,
    ch: &ChannelParams,
) -> Result<InterferenceLevel> {
    let w = SensingWeights::new(eta, sp, cfg)?;
    let (e0, e1) = expected_powers(policy, ch)?;
    let (p0, p1) = policy.peak_powers();
    Ok(InterferenceLevel {
        average: ch.gain_sp * w.mix(e0, e1),
        peak: ch.gain_sp * w.mix(p0, p1),
    })
}

/// Ergodic capacity of the primary link, `C_p,max`.
pub fn pu_capacity_max(ch: &ChannelParams, cfg: &ScenarioConfig) -> Result<f64> {
    let law = cfg.capacity_law;
    ch.pu_fading.expect(|g| law.rate(g))
}

/// One point of the primary capacity-loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuLossRecord {
    /// Threshold `eta`.
    pub eta: f64,
    /// `P_m = 1 - P_d(eta)`.
    pub p_missed: f64,
    /// `P_out`, identified with `P_m`.
    pub p_outage: f64,
    /// `gamma_p,min`, the outage SNR. Infinite when `P_out = 1`.
    pub gamma_p_min: f64,
    /// `C_p,loss`.
    pub capacity_loss: f64,
}

/// Primary capacity loss at threshold `eta`.
///
/// `P_out = P_m`, `gamma_p,min` is the `P_out` quantile of the PU SNR and the
/// loss is the capacity carried by the states below it,
/// `C_p,max - int_{gamma_p,min}^inf rate p`.
pub fn pu_capacity_loss(
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<PuLossRecord> {
    let p_missed = 1.0 - sp.prob_detection(eta)?;
    let p_outage = p_missed;
    let gamma_p_min = ch.pu_fading.inverse_cdf(p_outage)?;
    let law = cfg.capacity_law;
    let capacity_loss = ch
        .pu_fading
        .expect_between(|g| law.rate(g), 0.0, gamma_p_min, &[])?;
    Ok(PuLossRecord {
        eta,
        p_missed,
        p_outage,
        gamma_p_min,
        capacity_loss,
    })
}

/// Loss curve over a threshold grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PuLossCurve {
    /// `C_p,max` under the scenario's capacity law.
    pub capacity_max: f64,
    /// One record per grid point.
    pub records: Vec<PuLossRecord>,
}

/// Loss curve over `eta_grid`. Points where `P_d` underflows to zero
/// (`P_out = 1`) take the limiting value `C_p,loss = C_p,max`.
pub fn pu_loss_curve(
    eta_grid: &[f64],
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
) -> Result<PuLossCurve> {
    let capacity_max = pu_capacity_max(ch, cfg)?;
    let records = eta_grid
        .iter()
        .map(|&eta| saturating_loss(eta, sp, ch, cfg, capacity_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(PuLossCurve {
        capacity_max,
        records,
    })
}

pub(crate) fn saturating_loss(
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    capacity_max: f64,
) -> Result<PuLossRecord> {
    match pu_capacity_loss(eta, sp, ch, cfg) {
        Err(Error::UnboundedQuantile { u }) => Ok(PuLossRecord {
            eta,
            p_missed: u,
            p_outage: u,
            gamma_p_min: f64::INFINITY,
            capacity_loss: capacity_max,
        }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingModel;
    use crate::db_to_linear;
    use proptest::prelude::*;

    fn detector() -> SensingParams {
        SensingParams::new(db_to_linear(-15.0), 12_000, 1.0).unwrap()
    }

    fn scenario() -> ScenarioConfig {
        ScenarioConfig::new(0.4, db_to_linear(15.0), 1.0, 0.05).unwrap()
    }

    /// Constant powers on every fading state.
    struct Flat(f64, f64);

    impl TransmitPolicy for Flat {
        fn idle_power(&self, _: f64) -> f64 {
            self.0
        }
        fn active_power(&self, _: f64) -> f64 {
            self.1
        }
        fn peak_powers(&self) -> (f64, f64) {
            (self.0, self.1)
        }
    }

    // Exponential integral by its convergent series.
    fn e1(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -0.577_215_664_901_532_860_6 - x.ln() - sum
    }

    #[test]
    fn instantaneous_capacity_examples() {
        assert_eq!(instantaneous_capacity(0.0, 5.0, 1.0), 0.0);
        assert!((instantaneous_capacity(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((instantaneous_capacity(1.0, 3.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn su_capacity_arithmetic() {
        // Pick eta so that P_f and P_d are whatever they are, and compare to the
        // four-term formula evaluated by hand.
        let sp = detector();
        let cfg = ScenarioConfig::new(0.4, 1.0, 1.0, 0.1).unwrap();
        let w = SensingWeights {
            idle_clear: 0.6 * 0.9,
            idle_false_alarm: 0.6 * 0.1,
            active_detected: 0.4 * 0.9,
            active_missed: 0.4 * 0.1,
        };
        assert!((w.mix(2.0, 1.0) - 1.58).abs() < 1e-15);
        let big = 100.0;
        assert!((su_capacity(2.0, 1.0, big, &sp, &cfg).unwrap() - 2.0).abs() < 1e-15);
        assert!((su_capacity(2.0, 1.0, 0.0, &sp, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn avg_power_arithmetic() {
        let w = SensingWeights {
            idle_clear: 0.6 * 0.9,
            idle_false_alarm: 0.6 * 0.1,
            active_detected: 0.4 * 0.9,
            active_missed: 0.4 * 0.1,
        };
        let expected = 0.6 * (0.1485 * 0.9 + 0.05 * 0.1) + 0.4 * (0.05 * 0.9 + 0.1485 * 0.1);
        assert!((w.mix(0.1485, 0.05) - expected).abs() < 1e-15);
        assert!((expected - 0.10713).abs() < 1e-12);
    }

    #[test]
    fn equal_powers_collapse_mixtures() {
        let (sp, cfg, ch) = (detector(), scenario(), ChannelParams::default());
        let p = Flat(0.7, 0.7);
        for eta in [0.0, 0.99, 1.02, 1.5] {
            assert!((avg_power(&p, eta, &sp, &cfg, &ch).unwrap() - 0.7).abs() < 1e-9);
            let i = interference(&p, eta, &sp, &cfg, &ch).unwrap();
            assert!((i.average - 0.7).abs() < 1e-9);
        }
        let (c0, c1) = ergodic_capacity_pair(&p, &ch).unwrap();
        assert_eq!(c0, c1);
        let zero = Flat(0.0, 0.0);
        assert_eq!(ergodic_capacity_pair(&zero, &ch).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn interference_scales_with_gain() {
        let (sp, cfg) = (detector(), scenario());
        let p = Flat(2.0, 0.5);
        let mut ch = ChannelParams::default();
        let base = interference(&p, 1.01, &sp, &cfg, &ch).unwrap();
        let h = avg_power(&p, 1.01, &sp, &cfg, &ch).unwrap();
        assert!((base.average - h).abs() < 1e-12);
        ch.gain_sp = 2.5;
        let scaled = interference(&p, 1.01, &sp, &cfg, &ch).unwrap();
        assert!((scaled.average - 2.5 * h).abs() < 1e-9);
        let w = SensingWeights::new(1.01, &sp, &cfg).unwrap();
        assert!((interference_at(&p, 3.0, &w, &ch) - scaled.peak).abs() < 1e-12);
    }

    #[test]
    fn water_filling_policy_shape() {
        let ch = ChannelParams::default();
        let cfg = ScenarioConfig::new(0.4, 1.0, 0.2, 0.1).unwrap();
        let p = PowerPolicy::from_dual(1.0, &ch, &cfg).unwrap();
        assert_eq!(p.idle_power(1.0), 0.0);
        assert!((p.idle_power(2.0) - 0.5).abs() < 1e-15);
        assert!((p.active_power(2.0) - 0.2).abs() < 1e-15);
        assert_eq!(p.kinks().len(), 1);
        assert!(PowerPolicy::from_dual(0.0, &ch, &cfg).is_err());
    }

    #[test]
    fn uncapped_water_filling_capacity_closed_form() {
        // lambda = 1, no cap: C_0 = int_1^inf log2(g) e^-g dg = E1(1) / ln 2.
        let ch = ChannelParams::default();
        let cfg = ScenarioConfig::new(0.4, 1.0, 1e9, 0.1).unwrap();
        let p = PowerPolicy::from_dual(1.0, &ch, &cfg).unwrap();
        let (c0, c1) = ergodic_capacity_pair(&p, &ch).unwrap();
        assert!((c0 - e1(1.0) / LN_2).abs() < 1e-9);
        assert!((c0 - 0.316_504_114_203_126_787).abs() < 1e-9);
        assert_eq!(c0, c1);
        let (e0, _) = expected_powers(&p, &ch).unwrap();
        assert!((e0 - ((-1.0f64).exp() - e1(1.0))).abs() < 1e-9);
    }

    #[test]
    fn pu_capacity_max_closed_forms() {
        let ch = ChannelParams::default();
        let cfg = scenario();
        let shannon = pu_capacity_max(&ch, &cfg).unwrap();
        assert!((shannon - core::f64::consts::E * e1(1.0) / LN_2).abs() < 1e-9);
        let literal =
            pu_capacity_max(&ch, &cfg.with_capacity_law(CapacityLaw::PaperLiteral)).unwrap();
        assert!(
            (literal + 0.832_746_177_276_867_15).abs() < 1e-8,
            "{literal}"
        );
        let point = ChannelParams {
            pu_fading: FadingModel::constant(1.0).unwrap(),
            ..ch
        };
        assert!((pu_capacity_max(&point, &cfg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pu_loss_examples() {
        let (sp, ch, cfg) = (detector(), ChannelParams::default(), scenario());
        let r = pu_capacity_loss(0.0, &sp, &ch, &cfg).unwrap();
        assert_eq!(
            (r.p_outage, r.gamma_p_min, r.capacity_loss),
            (0.0, 0.0, 0.0)
        );

        // Choose eta so that P_m = 0.1 exactly is not reachable analytically;
        // check the quadrature of the chain against the closed form instead.
        let x = -(0.9f64).ln();
        let closed =
            (-(-x).exp() * (1.0 + x).ln() + core::f64::consts::E * (e1(1.0) - e1(1.0 + x))) / LN_2;
        assert!((closed - 0.007_219_623_506_935_737).abs() < 1e-12);
        let direct = ch
            .pu_fading
            .expect_between(|g| cfg.capacity_law.rate(g), 0.0, x, &[])
            .unwrap();
        assert!((direct - closed).abs() < 1e-9);

        assert!(matches!(
            pu_capacity_loss(100.0, &sp, &ch, &cfg),
            Err(Error::UnboundedQuantile { .. })
        ));
        let curve = pu_loss_curve(&[100.0], &sp, &ch, &cfg).unwrap();
        assert_eq!(curve.records[0].capacity_loss, curve.capacity_max);
    }

    #[test]
    fn loss_grows_with_threshold() {
        let (sp, ch, cfg) = (detector(), ChannelParams::default(), scenario());
        let grid: Vec<f64> = (0..300).map(|i| 0.9 + i as f64 * 0.001).collect();
        let curve = pu_loss_curve(&grid, &sp, &ch, &cfg).unwrap();
        for w in curve.records.windows(2) {
            assert!(w[1].capacity_loss >= w[0].capacity_loss);
        }
        let last = curve.records.last().unwrap();
        assert!(last.capacity_loss <= curve.capacity_max);
    }

    #[test]
    fn scenario_validation() {
        assert!(ScenarioConfig::new(1.4, 1.0, 1.0, 0.1).is_err());
        assert!(ScenarioConfig::new(0.4, 0.0, 1.0, 0.1).is_err());
        assert!(ScenarioConfig::new(0.4, 1.0, 1.0, 1.1).is_err());
    }

    proptest! {
        #[test]
        fn weights_close_and_sandwich(
            eta in 0.0f64..3.0,
            pi1 in 0.0f64..1.0,
            c1 in 0.0f64..5.0,
            dc in 0.0f64..5.0,
        ) {
            let sp = detector();
            let cfg = ScenarioConfig::new(pi1, 1.0, 1.0, 0.1).unwrap();
            let w = SensingWeights::new(eta, &sp, &cfg).unwrap();
            prop_assert!((w.total() - 1.0).abs() < 1e-12);
            let cs = su_capacity(c1 + dc, c1, eta, &sp, &cfg).unwrap();
            prop_assert!(cs >= c1 - 1e-12 && cs <= c1 + dc + 1e-12);
        }

        #[test]
        fn su_capacity_concave_where_detector_is_convex(
            pi1 in 0.05f64..0.95,
            c1 in 0.0f64..3.0,
            dc in 0.01f64..3.0,
            t in 0.0f64..1.0,
        ) {
            let sp = detector();
            let cfg = ScenarioConfig::new(pi1, 1.0, 1.0, 0.1).unwrap();
            let start = sp.convex_regime_start();
            let eta = start + 0.001 + t * 0.1;
            let h = 1e-4;
            let f = |e: f64| su_capacity(c1 + dc, c1, e, &sp, &cfg).unwrap();
            prop_assert!(f(eta - h) - 2.0 * f(eta) + f(eta + h) <= 1e-9);
            // dC_s/deta = (C1 - C0)(pi0 P_f' + pi1 P_d') with non-positive
            // detector derivatives: non-negative everywhere.
            let slope = -dc * (cfg.prior_idle * sp.d_pf_deta(eta).unwrap()
                + cfg.prior_active * sp.d_pd_deta(eta).unwrap());
            prop_assert!(slope >= 0.0);
        }
    }
}
