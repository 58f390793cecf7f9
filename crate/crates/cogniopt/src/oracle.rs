//! Independent reference computations: a sample-level Monte-Carlo energy
//! detector, exhaustive grid searches over the dual variable and the
//! threshold, and closed forms for the exponential-SNR integrals.
//!
//! Nothing here calls the subgradient solver or the threshold search; the
//! grid searches only use the dual function itself.

use cogniopt_core::capacity::{pu_capacity_loss, pu_capacity_max, CapacityLaw, ScenarioConfig};
use cogniopt_core::channel::ChannelParams;
use cogniopt_core::optimizer::dual_function;
use cogniopt_core::sensing::SensingParams;
use cogniopt_core::Error as CoreError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;

/// Default generator seed.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Trials per generator stream. Each chunk of trials gets its own stream
/// derived from the seed, so results do not depend on the thread count.
pub const TRIALS_PER_STREAM: u64 = 250;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// Monte-Carlo run size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct McConfig {
    pub trials: u64,
    pub rng_seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            rng_seed: DEFAULT_SEED,
        }
    }
}

/// Which state the primary user is in during the simulated sensing window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Idle,
    Active,
}

/// Empirical exceedance rate at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub threshold: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub probability: f64,
    /// `sqrt(p (1 - p) / n)` at the empirical rate.
    pub stderr: f64,
}

impl McEstimate {
    fn new(threshold: f64, exceedances: u64, trials: u64) -> Self {
        let probability = exceedances as f64 / trials as f64;
        Self {
            threshold,
            exceedances,
            trials,
            probability,
            stderr: binomial_stderr(probability, trials),
        }
    }

    /// Distance to `p` in binomial standard errors taken at `p` itself.
    pub fn z_score(&self, p: f64) -> f64 {
        let se = binomial_stderr(p, self.trials);
        if se == 0.0 {
            if self.probability == p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.probability - p).abs() / se
        }
    }
}

/// Standard error of a binomial proportion.
pub fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}

/// Per-trial energy statistics `(1/N) sum |y_n|^2`.
///
/// Noise samples are circular complex Gaussian with variance `sigma^2`. Under
/// [`Hypothesis::Active`] the signal is an independent circular complex
/// Gaussian with power `gamma sigma^2`, so each received sample is circular
/// complex Gaussian with variance `sigma^2 (1 + gamma)`.
pub fn simulate_energies(
    sp: &SensingParams,
    mc: McConfig,
    hypothesis: Hypothesis,
) -> Result<Vec<f64>> {
    if mc.trials == 0 {
        return Err(CoreError::Domain {
            what: "monte carlo trials",
            value: 0.0,
        }
        .into());
    }
    let n = sp.num_samples();
    let variance = match hypothesis {
        Hypothesis::Idle => sp.noise_variance(),
        Hypothesis::Active => sp.active_mean_energy(),
    };
    // Each real component carries half the complex variance.
    let scale = 0.5 * variance / n as f64;
    let salt = match hypothesis {
        Hypothesis::Idle => 0,
        Hypothesis::Active => 1,
    };
    let streams = mc.trials.div_ceil(TRIALS_PER_STREAM);
    let chunks: Vec<Vec<f64>> = (0..streams)
        .into_par_iter()
        .map(|stream| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.rng_seed);
            rng.set_stream(2 * stream + salt);
            let first = stream * TRIALS_PER_STREAM;
            let count = TRIALS_PER_STREAM.min(mc.trials - first);
            (0..count)
                .map(|_| {
                    let mut acc = 0.0;
                    for _ in 0..n {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        acc += re * re + im * im;
                    }
                    acc * scale
                })
                .collect()
        })
        .collect();
    Ok(chunks.concat())
}

/// Empirical `P[energy > eta]` under `hypothesis`.
pub fn monte_carlo_detector(
    eta: f64,
    sp: &SensingParams,
    mc: McConfig,
    hypothesis: Hypothesis,
) -> Result<McEstimate> {
    Ok(monte_carlo_detector_grid(&[eta], sp, mc, hypothesis)?[0])
}

/// Same as [`monte_carlo_detector`] for several thresholds sharing one set
/// of simulated energies.
pub fn monte_carlo_detector_grid(
    etas: &[f64],
    sp: &SensingParams,
    mc: McConfig,
    hypothesis: Hypothesis,
) -> Result<Vec<McEstimate>> {
    if let Some(&bad) = etas.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(CoreError::Domain {
            what: "threshold",
            value: bad,
        }
        .into());
    }
    let energies = simulate_energies(sp, mc, hypothesis)?;
    Ok(etas
        .iter()
        .map(|&eta| estimate_from_energies(&energies, eta))
        .collect())
}

/// Exceedance rate of `eta` among simulated `energies`.
pub fn estimate_from_energies(energies: &[f64], eta: f64) -> McEstimate {
    let hits = energies.iter().filter(|&&e| e > eta).count() as u64;
    McEstimate::new(eta, hits, energies.len() as u64)
}

/// Test-statistic arguments `(false alarm, detection)` of the Gaussian
/// approximation at threshold `eta`, computed from the detector parameters.
pub fn detector_arguments(eta: f64, sp: &SensingParams) -> (f64, f64) {
    let n = sp.num_samples() as f64;
    let g = sp.sensed_snr();
    let x = eta / sp.noise_variance();
    (
        (x - 1.0) * n.sqrt(),
        (x - g - 1.0) * (n / (2.0 * g + 1.0)).sqrt(),
    )
}

/// Central difference with step `h` of `eta -> Q(arg(eta))`.
///
/// Differences the smaller of `Q(arg)` and `Q(-arg) = 1 - Q(arg)`, so the
/// result keeps its relative accuracy deep in either tail.
pub fn q_composite_difference<F>(arg: F, eta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let q = cogniopt_core::sensing::q_function;
    let (a, b) = (arg(eta + h), arg(eta - h));
    let d = if arg(eta) >= 0.0 {
        q(a)? - q(b)?
    } else {
        q(-b)? - q(-a)?
    };
    Ok(d / (2.0 * h))
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(CoreError::InvalidParameter {
            name: "lambda_grid",
            reason: "needs 0 < lo < hi and at least 2 points",
        }
        .into());
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Grid minimum of the dual function.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGridMinimum {
    pub lambda: f64,
    /// `q` at `lambda`, bits/s/Hz.
    pub value: f64,
    pub index: usize,
    /// `(lambda, q)` at every grid point.
    pub samples: Vec<(f64, f64)>,
}

impl DualGridMinimum {
    /// Number of direction changes of the sampled `q`, ignoring steps no
    /// larger than `flat`. A convex `q` has at most one.
    pub fn direction_changes(&self, flat: f64) -> usize {
        let mut changes = 0;
        let mut prev = 0.0;
        for w in self.samples.windows(2) {
            let d = w[1].1 - w[0].1;
            if d.abs() <= flat {
                continue;
            }
            if prev != 0.0 && d.signum() != prev {
                changes += 1;
            }
            prev = d.signum();
        }
        changes
    }
}

/// Evaluates the dual on every point of `lambda_grid` and returns the
/// smallest value.
pub fn brute_force_dual_min(
    eta: f64,
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    lambda_grid: &[f64],
) -> Result<DualGridMinimum> {
    if lambda_grid.is_empty() {
        return Err(CoreError::InvalidParameter {
            name: "lambda_grid",
            reason: "must not be empty",
        }
        .into());
    }
    let samples = lambda_grid
        .iter()
        .map(|&l| Ok((l, dual_function(l, eta, sp, ch, cfg)?.value_bits())))
        .collect::<Result<Vec<_>>>()?;
    let (index, &(lambda, value)) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    Ok(DualGridMinimum {
        lambda,
        value,
        index,
        samples,
    })
}

/// One threshold of the brute-force capacity surface.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SurfaceRow {
    pub eta: f64,
    pub lambda_bf: f64,
    /// Grid-minimal dual value, the capacity estimate at this threshold.
    pub dual_bf: f64,
    pub pu_loss: f64,
    pub feasible: bool,
}

/// Brute-force `(eta, lambda)` surface.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySurface {
    pub rows: Vec<SurfaceRow>,
    pub capacity_max: f64,
    pub loss_budget: f64,
    /// Row with the largest capacity among rows meeting the loss budget.
    pub argmax: Option<usize>,
}

impl CapacitySurface {
    pub fn best(&self) -> Option<&SurfaceRow> {
        self.argmax.map(|i| &self.rows[i])
    }
}

/// Grid-minimizes the dual at every threshold of `eta_grid` and picks the
/// feasible threshold with the largest value.
///
/// The loss is computed directly from its definition here, with thresholds
/// whose outage probability rounds to one taking the full `C_p,max`.
pub fn brute_force_capacity_surface(
    eta_grid: &[f64],
    sp: &SensingParams,
    ch: &ChannelParams,
    cfg: &ScenarioConfig,
    lambda_grid: &[f64],
) -> Result<CapacitySurface> {
    let capacity_max = pu_capacity_max(ch, cfg)?;
    let loss_budget = cfg.loss_fraction * capacity_max;
    let rows = eta_grid
        .par_iter()
        .map(|&eta| {
            let dual = brute_force_dual_min(eta, sp, ch, cfg, lambda_grid)?;
            let pu_loss = match pu_capacity_loss(eta, sp, ch, cfg) {
                Ok(r) => r.capacity_loss,
                Err(CoreError::UnboundedQuantile { .. }) => capacity_max,
                Err(e) => return Err(e.into()),
            };
            Ok(SurfaceRow {
                eta,
                lambda_bf: dual.lambda,
                dual_bf: dual.value,
                pu_loss,
                feasible: pu_loss <= loss_budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmax = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.feasible)
        .max_by(|a, b| a.1.dual_bf.total_cmp(&b.1.dual_bf))
        .map(|(i, _)| i);
    Ok(CapacitySurface {
        rows,
        capacity_max,
        loss_budget,
        argmax,
    })
}

/// Exponential integral `E_1(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 0.0 || x.is_nan() {
        return f64::NAN;
    }
    if x <= 1.0 {
        -EULER_GAMMA - x.ln() + ein(x)
    } else {
        // Continued fraction, modified Lentz.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Entire exponential integral `Ein(x) = int_0^x (1 - e^-t)/t dt`.
pub fn ein(x: f64) -> f64 {
    if x > 1.0 {
        return exp_integral_e1(x) + x.ln() + EULER_GAMMA;
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `E[(1/lambda - N_0/gamma)^+]` for exponential SNR with mean `mean`.
pub fn water_filling_mean_power(lambda: f64, noise_power: f64, mean: f64) -> f64 {
    let c = lambda * noise_power / mean;
    (-c).exp() / lambda - noise_power / mean * exp_integral_e1(c)
}

/// `E[log2(gamma / (lambda N_0)); gamma >= lambda N_0]`, the ergodic capacity
/// of uncapped water-filling, for exponential SNR with mean `mean`.
pub fn water_filling_capacity(lambda: f64, noise_power: f64, mean: f64) -> f64 {
    exp_integral_e1(lambda * noise_power / mean) / std::f64::consts::LN_2
}

/// `E[rate(gamma)]` for exponential SNR with mean `mean`.
pub fn rayleigh_capacity_max(mean: f64, law: CapacityLaw) -> f64 {
    let nats = match law {
        CapacityLaw::Shannon1Plus => (1.0 / mean).exp() * exp_integral_e1(1.0 / mean),
        CapacityLaw::PaperLiteral => mean.ln() - EULER_GAMMA,
    };
    nats / std::f64::consts::LN_2
}

/// `int_0^x rate(gamma) p(gamma) dgamma` for exponential SNR with mean `mean`.
pub fn rayleigh_capacity_loss(x: f64, mean: f64, law: CapacityLaw) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let nats = match law {
        CapacityLaw::Shannon1Plus => {
            let m = 1.0 / mean;
            -(-x * m).exp() * x.ln_1p()
                + m.exp() * (exp_integral_e1(m) - exp_integral_e1((1.0 + x) * m))
        }
        CapacityLaw::PaperLiteral => -(-x / mean).exp_m1() * x.ln() - ein(x / mean),
    };
    nats / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn detector() -> SensingParams {
        SensingParams::new(10f64.powf(-1.5), 12_000, 1.0).unwrap()
    }

    #[test]
    fn exponential_integral_values() {
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_273_7).abs() < 1e-15);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_616).abs() < 1e-14);
        assert!((exp_integral_e1(5.0) - 0.001_148_295_591_275_325_8).abs() < 1e-17);
        assert!((ein(2.0) - 1.319_263_356_169_539_290).abs() < 1e-14);
        assert!(exp_integral_e1(0.0).is_nan());
    }

    #[test]
    fn closed_forms_at_unit_mean() {
        assert!(
            (water_filling_mean_power(1.0, 1.0, 1.0) - 0.148_495_506_775_922_048).abs() < 1e-15
        );
        assert!((water_filling_capacity(1.0, 1.0, 1.0) - 0.316_504_114_203_126_787).abs() < 1e-15);
        let shannon = rayleigh_capacity_max(1.0, CapacityLaw::Shannon1Plus);
        assert!((shannon - 0.860_347_382_270_885_95).abs() < 1e-15);
        let literal = rayleigh_capacity_max(1.0, CapacityLaw::PaperLiteral);
        assert!((literal + 0.832_746_177_276_867_15).abs() < 1e-15);
        let x = -(0.9f64.ln());
        let loss = rayleigh_capacity_loss(x, 1.0, CapacityLaw::Shannon1Plus);
        assert!((loss - 0.007_219_623_506_935_737).abs() < 1e-13);
    }

    #[test]
    fn literal_loss_tends_to_literal_max() {
        let full = rayleigh_capacity_loss(60.0, 1.0, CapacityLaw::PaperLiteral);
        assert!((full - rayleigh_capacity_max(1.0, CapacityLaw::PaperLiteral)).abs() < 1e-12);
    }

    #[test]
    fn zero_threshold_always_exceeded() {
        let mc = McConfig {
            trials: 500,
            rng_seed: 7,
        };
        let sp = SensingParams::new(0.1, 64, 1.0).unwrap();
        for h in [Hypothesis::Idle, Hypothesis::Active] {
            let e = monte_carlo_detector(0.0, &sp, mc, h).unwrap();
            assert_eq!(e.probability, 1.0);
            assert_eq!(e.stderr, 0.0);
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let mc = McConfig {
            trials: 0,
            rng_seed: 1,
        };
        assert!(monte_carlo_detector(1.0, &detector(), mc, Hypothesis::Idle).is_err());
        assert!(
            monte_carlo_detector(-1.0, &detector(), McConfig::default(), Hypothesis::Idle).is_err()
        );
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let mc = McConfig {
            trials: 600,
            rng_seed: DEFAULT_SEED,
        };
        let sp = SensingParams::new(0.05, 200, 1.0).unwrap();
        let a = simulate_energies(&sp, mc, Hypothesis::Active).unwrap();
        let b = simulate_energies(&sp, mc, Hypothesis::Active).unwrap();
        assert_eq!(a, b);
        let other =
            simulate_energies(&sp, McConfig { rng_seed: 1, ..mc }, Hypothesis::Active).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn energy_moments() {
        let sp = SensingParams::new(0.5, 50, 2.0).unwrap();
        let mc = McConfig {
            trials: 20_000,
            rng_seed: 3,
        };
        for (h, mean) in [(Hypothesis::Idle, 2.0), (Hypothesis::Active, 3.0)] {
            let e = simulate_energies(&sp, mc, h).unwrap();
            let m = e.iter().sum::<f64>() / e.len() as f64;
            let sd = mean / 50f64.sqrt();
            assert!((m - mean).abs() < 4.0 * sd / (e.len() as f64).sqrt());
        }
    }

    #[test]
    fn tail_aware_difference() {
        let sp = detector();
        let h = 1e-6;
        for eta in [0.9, 0.97, 1.0, 1.05, 1.1] {
            let fd = q_composite_difference(|e| detector_arguments(e, &sp).0, eta, h).unwrap();
            let exact = sp.d_pf_deta(eta).unwrap();
            assert!(
                ((fd - exact) / exact).abs() < 1e-6,
                "eta {eta}: {fd} vs {exact}"
            );
        }
        let (a, b) = detector_arguments(1.02, &sp);
        assert!((a - sp.false_alarm_argument(1.02)).abs() < 1e-12);
        assert!((b - sp.detection_argument(1.02)).abs() < 1e-12);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e2, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert_eq!(g[99], 1e2);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_grid(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn dual_grid_is_unimodal() {
        let ch = ChannelParams::default();
        let cfg = ScenarioConfig::new(0.4, 10f64.powf(1.5), 1.0, 0.05).unwrap();
        let grid = log_grid(1e-3, 1e2, 100).unwrap();
        let m = brute_force_dual_min(1.02, &detector(), &ch, &cfg, &grid).unwrap();
        assert!(m.direction_changes(1e-12) <= 1);
        assert!(m.index > 0 && m.index < 99);
    }
}
