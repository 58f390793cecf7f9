//! Energy-detector characteristics under the Gaussian (CLT) approximation.
//!
//! Thresholds are absolute powers on the same scale as the noise variance.
//! With `a_f = (eta/sigma^2 - 1) sqrt(N)` and
//! `a_d = (eta/sigma^2 - gamma - 1) sqrt(N / (2 gamma + 1))` the detector has
//! `P_f = Q(a_f)` and `P_d = Q(a_d)`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

/// Gaussian tail probability `Q(x) = P[Z > x]` for a standard normal `Z`.
///
/// Evaluated as `erfc(x / sqrt 2) / 2`, which keeps full relative accuracy in
/// the upper tail and underflows gracefully to zero beyond `x ~ 38.5`.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain {
            what: "q_function argument",
            value: x,
        });
    }
    Ok(q(x))
}

#[inline]
pub(crate) fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn standard_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Energy-detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingParams {
    sensed_snr: f64,
    num_samples: u64,
    noise_variance: f64,
    sampling_freq: Option<f64>,
    sensing_time: Option<f64>,
    frame_duration: Option<f64>,
}

impl SensingParams {
    /// Detector with an explicit sample count.
    pub fn new(sensed_snr: f64, num_samples: u64, noise_variance: f64) -> Result<Self> {
        check_positive("sensed_snr", sensed_snr)?;
        check_positive("noise_variance", noise_variance)?;
        if num_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "num_samples",
                reason: "must be at least 1",
            });
        }
        Ok(Self {
            sensed_snr,
            num_samples,
            noise_variance,
            sampling_freq: None,
            sensing_time: None,
            frame_duration: None,
        })
    }

    /// Detector whose sample count is `round(sensing_time * sampling_freq)`.
    ///
    /// When a frame duration is given the sample count may not exceed
    /// `frame_duration * sampling_freq`.
    pub fn from_timing(
        sensed_snr: f64,
        noise_variance: f64,
        sampling_freq: f64,
        sensing_time: f64,
        frame_duration: Option<f64>,
    ) -> Result<Self> {
        check_positive("sampling_freq", sampling_freq)?;
        check_positive("sensing_time", sensing_time)?;
        let samples = libm::round(sensing_time * sampling_freq);
        if samples < 1.0 {
            return Err(Error::InvalidParameter {
                name: "sensing_time",
                reason: "sensing_time * sampling_freq rounds to zero samples",
            });
        }
        if let Some(t) = frame_duration {
            check_positive("frame_duration", t)?;
            if samples > t * sampling_freq {
                return Err(Error::InvalidParameter {
                    name: "sensing_time",
                    reason: "sample count exceeds frame_duration * sampling_freq",
                });
            }
        }
        let mut p = Self::new(sensed_snr, samples as u64, noise_variance)?;
        p.sampling_freq = Some(sampling_freq);
        p.sensing_time = Some(sensing_time);
        p.frame_duration = frame_duration;
        Ok(p)
    }

    /// Sensed SNR `gamma` (linear).
    pub fn sensed_snr(&self) -> f64 {
        self.sensed_snr
    }

    /// Number of samples `N`.
    pub fn num_samples(&self) -> u64 {
        self.num_samples
    }

    /// Noise variance `sigma^2`.
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Sampling frequency in Hz, if the detector was built from timing.
    pub fn sampling_freq(&self) -> Option<f64> {
        self.sampling_freq
    }

    /// Sensing time in seconds, if the detector was built from timing.
    pub fn sensing_time(&self) -> Option<f64> {
        self.sensing_time
    }

    /// Frame duration in seconds, if any.
    pub fn frame_duration(&self) -> Option<f64> {
        self.frame_duration
    }

    /// Same detector with a different sensed SNR.
    pub fn with_sensed_snr(&self, sensed_snr: f64) -> Result<Self> {
        check_positive("sensed_snr", sensed_snr)?;
        Ok(Self {
            sensed_snr,
            ..*self
        })
    }

    fn false_alarm_slope(&self) -> f64 {
        libm::sqrt(self.num_samples as f64)
    }

    fn detection_slope(&self) -> f64 {
        libm::sqrt(self.num_samples as f64 / (2.0 * self.sensed_snr + 1.0))
    }

    /// Q-argument of the false-alarm probability.
    pub fn false_alarm_argument(&self, eta: f64) -> f64 {
        (eta / self.noise_variance - 1.0) * self.false_alarm_slope()
    }

    /// Q-argument of the detection probability.
    pub fn detection_argument(&self, eta: f64) -> f64 {
        (eta / self.noise_variance - self.sensed_snr - 1.0) * self.detection_slope()
    }

    /// Mean energy statistic under the active hypothesis, `sigma^2 (1 + gamma)`.
    pub fn active_mean_energy(&self) -> f64 {
        self.noise_variance * (1.0 + self.sensed_snr)
    }

    /// Probability of false alarm `P_f(eta)`.
    pub fn prob_false_alarm(&self, eta: f64) -> Result<f64> {
        check_threshold(eta)?;
        Ok(q(self.false_alarm_argument(eta)))
    }

    /// Probability of detection `P_d(eta)`.
    pub fn prob_detection(&self, eta: f64) -> Result<f64> {
        check_threshold(eta)?;
        Ok(q(self.detection_argument(eta)))
    }

    /// `dP_f/deta`. Always non-positive.
    pub fn d_pf_deta(&self, eta: f64) -> Result<f64> {
        check_threshold(eta)?;
        let slope = self.false_alarm_slope() / self.noise_variance;
        Ok(-slope * standard_normal_pdf(self.false_alarm_argument(eta)))
    }

    /// `dP_d/deta`. Always non-positive.
    pub fn d_pd_deta(&self, eta: f64) -> Result<f64> {
        check_threshold(eta)?;
        let slope = self.detection_slope() / self.noise_variance;
        Ok(-slope * standard_normal_pdf(self.detection_argument(eta)))
    }

    /// Full operating point at `eta`.
    pub fn detector_point(&self, eta: f64) -> Result<DetectorPoint> {
        let p_false_alarm = self.prob_false_alarm(eta)?;
        let p_detection = self.prob_detection(eta)?;
        Ok(DetectorPoint {
            threshold: eta,
            p_false_alarm,
            p_detection,
            p_missed: 1.0 - p_detection,
        })
    }

    /// Threshold interval over which both probabilities move between
    /// `Q(-z)` and `Q(z)`.
    pub fn transition_range(&self, z: f64) -> (f64, f64) {
        let s2 = self.noise_variance;
        let lo = s2 * (1.0 - z / self.false_alarm_slope());
        let hi = s2 * (1.0 + self.sensed_snr + z / self.detection_slope());
        (lo.max(0.0), hi)
    }

    /// Lower edge of the threshold range on which both Q-arguments are
    /// non-negative, so that `P_f` and `P_d` are convex in `eta`.
    pub fn convex_regime_start(&self) -> f64 {
        self.active_mean_energy()
    }
}

/// One operating point of the detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPoint {
    /// Threshold `eta`.
    pub threshold: f64,
    /// `P_f`.
    pub p_false_alarm: f64,
    /// `P_d`.
    pub p_detection: f64,
    /// `P_m = 1 - P_d`.
    pub p_missed: f64,
}

/// Operating points along a strictly increasing threshold grid.
pub fn roc_curve(p: &SensingParams, eta_grid: &[f64]) -> Result<Vec<DetectorPoint>> {
    if eta_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eta_grid",
            reason: "must not be empty",
        });
    }
    if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "eta_grid",
            reason: "must be strictly increasing",
        });
    }
    eta_grid.iter().map(|&eta| p.detector_point(eta)).collect()
}

fn check_threshold(eta: f64) -> Result<()> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::Domain {
            what: "threshold",
            value: eta,
        });
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be finite and strictly positive",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db_to_linear;
    use proptest::prelude::*;

    fn paper_detector() -> SensingParams {
        SensingParams::new(db_to_linear(-15.0), 12_000, 1.0).unwrap()
    }

    // Reference values computed with 40-digit erfc.
    const Q_TABLE: [(f64, f64); 19] = [
        (-8.0, 0.999_999_999_999_999_377_9),
        (-5.0, 0.999_999_713_348_428_120_81),
        (-3.0, 0.998_650_101_968_369_905_47),
        (-2.0, 0.977_249_868_051_820_792_8),
        (-1.0, 0.841_344_746_068_542_948_59),
        (-0.5, 0.691_462_461_274_013_103_64),
        (0.0, 0.5),
        (0.25, 0.401_293_674_317_076_275_76),
        (0.5, 0.308_537_538_725_986_896_36),
        (1.0, 0.158_655_253_931_457_051_41),
        (1.5, 0.066_807_201_268_858_066_004),
        (2.0, 0.022_750_131_948_179_207_2),
        (3.0, 0.001_349_898_031_630_094_526_7),
        (4.0, 3.167_124_183_311_992_125_4e-5),
        (5.0, 2.866_515_718_791_939_116_7e-7),
        (6.0, 9.865_876_450_376_981_407e-10),
        (7.0, 1.279_812_543_885_835_004_4e-12),
        (8.0, 6.220_960_574_271_784_123_5e-16),
        (10.0, 7.619_853_024_160_526_066e-24),
    ];

    #[test]
    fn q_matches_high_precision_table() {
        for (x, expected) in Q_TABLE {
            let got = q_function(x).unwrap();
            let rel = ((got - expected) / expected).abs();
            assert!(
                rel <= 1e-12,
                "Q({x}) = {got}, expected {expected}, rel {rel}"
            );
        }
    }

    #[test]
    fn q_special_points() {
        assert_eq!(q_function(0.0).unwrap(), 0.5);
        assert!(q_function(40.0).unwrap() < 1e-300);
        assert!(q_function(f64::NAN).is_err());
        assert!(q_function(f64::INFINITY).is_err());
    }

    #[test]
    fn detection_examples() {
        let p = paper_detector();
        let g = p.sensed_snr();
        assert!((p.prob_detection(g + 1.0).unwrap() - 0.5).abs() < 1e-15);
        let pd = p.prob_detection(1.02).unwrap();
        assert!((pd - 0.891_540_702_102_823_479).abs() < 1e-12, "{pd}");
        assert!(p.prob_detection(100.0).unwrap() < 1e-300);
        assert!(p.prob_detection(-1e-9).is_err());
    }

    #[test]
    fn false_alarm_examples() {
        let p = paper_detector();
        assert_eq!(p.prob_false_alarm(1.0).unwrap(), 0.5);
        assert!((p.prob_false_alarm(0.0).unwrap() - 1.0).abs() < 1e-12);
        let pf = p.prob_false_alarm(1.02).unwrap();
        assert!((pf - 0.014_229_868_458_155_288_5).abs() < 1e-13, "{pf}");
        assert!(p.prob_false_alarm(-0.5).is_err());
    }

    #[test]
    fn derivative_peak_magnitudes() {
        let p = paper_detector();
        let pf = p.d_pf_deta(1.0).unwrap();
        assert!(pf < 0.0);
        assert!((pf.abs() - 43.701_937_223_683_162_8).abs() < 1e-11);
        let pd = p.d_pd_deta(1.0 + p.sensed_snr()).unwrap();
        assert!((pd.abs() - 42.382_239_499_013_997_6).abs() < 1e-11);
        assert_eq!(p.d_pf_deta(50.0).unwrap(), 0.0);
        assert_eq!(p.d_pd_deta(50.0).unwrap(), 0.0);
    }

    fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = paper_detector();
        let h = 1e-6 * p.noise_variance();
        for i in 0..=100 {
            let eta = 0.5 + i as f64 * 0.01;
            for (analytic, fd) in [
                (
                    p.d_pf_deta(eta).unwrap(),
                    central_difference(|e| p.prob_false_alarm(e).unwrap(), eta, h),
                ),
                (
                    p.d_pd_deta(eta).unwrap(),
                    central_difference(|e| p.prob_detection(e).unwrap(), eta, h),
                ),
            ] {
                // Far tails are below any meaningful relative comparison.
                if analytic.abs() < 1e-3 {
                    assert!((analytic - fd).abs() < 1e-6);
                } else {
                    assert!(((analytic - fd) / analytic).abs() < 1e-6, "eta {eta}");
                }
            }
        }
    }

    #[test]
    fn roc_endpoints() {
        let p = paper_detector();
        let far = 10.0 * p.active_mean_energy();
        let pts = roc_curve(&p, &[0.0, 1.0, far]).unwrap();
        assert!((pts[0].p_false_alarm - 1.0).abs() < 1e-9);
        assert!((pts[0].p_detection - 1.0).abs() < 1e-9);
        assert_eq!(pts[1].p_false_alarm, 0.5);
        assert!(pts[1].p_detection > 0.5);
        assert!(pts[2].p_false_alarm < 1e-9 && pts[2].p_detection < 1e-9);
        for pt in &pts {
            assert_eq!(pt.p_missed, 1.0 - pt.p_detection);
        }
    }

    #[test]
    fn roc_rejects_bad_grids() {
        let p = paper_detector();
        assert!(roc_curve(&p, &[]).is_err());
        assert!(roc_curve(&p, &[1.0, 1.0]).is_err());
        assert!(roc_curve(&p, &[-1.0]).is_err());
    }

    #[test]
    fn stronger_signal_dominates_roc() {
        // At equal P_f (equal threshold) the -12 dB detector misses less.
        let weak = paper_detector();
        let strong = weak.with_sensed_snr(db_to_linear(-12.0)).unwrap();
        for i in 0..50 {
            let eta = 0.95 + i as f64 * 0.003;
            let pw = weak.detector_point(eta).unwrap();
            let ps = strong.detector_point(eta).unwrap();
            assert_eq!(pw.p_false_alarm, ps.p_false_alarm);
            assert!(ps.p_missed <= pw.p_missed);
        }
    }

    #[test]
    fn timing_constructor() {
        let p = SensingParams::from_timing(0.1, 1.0, 6e6, 2e-3, Some(0.1)).unwrap();
        assert_eq!(p.num_samples(), 12_000);
        assert!(SensingParams::from_timing(0.1, 1.0, 6e6, 2e-3, Some(1e-3)).is_err());
        assert!(SensingParams::new(0.0, 10, 1.0).is_err());
        assert!(SensingParams::new(0.1, 0, 1.0).is_err());
        assert!(SensingParams::new(0.1, 10, -1.0).is_err());
    }

    #[test]
    fn curvature_regimes() {
        let p = paper_detector();
        let h = 1e-4;
        let second = |f: &dyn Fn(f64) -> f64, x: f64| f(x - h) - 2.0 * f(x) + f(x + h);
        let pf = |e: f64| p.prob_false_alarm(e).unwrap();
        let pd = |e: f64| p.prob_detection(e).unwrap();
        for i in 1..100 {
            let eta = 0.95 + 0.05 * i as f64 / 100.0;
            assert!(second(&pf, eta) <= 1e-12, "P_f not concave at {eta}");
        }
        let start = p.convex_regime_start();
        for i in 1..100 {
            let eta = 0.97 + (start - 0.97) * i as f64 / 100.0;
            assert!(second(&pd, eta) <= 1e-12, "P_d not concave at {eta}");
        }
    }

    proptest! {
        #[test]
        fn probabilities_decrease_in_threshold(
            snr_db in -20.0f64..0.0,
            n in 100u64..50_000,
            s2 in 0.1f64..10.0,
            a in 0.0f64..3.0,
            d in 1e-4f64..0.5,
        ) {
            let p = SensingParams::new(db_to_linear(snr_db), n, s2).unwrap();
            let (e1, e2) = (a * s2, (a + d) * s2);
            let (f1, f2) = (p.prob_false_alarm(e1).unwrap(), p.prob_false_alarm(e2).unwrap());
            let (d1, d2) = (p.prob_detection(e1).unwrap(), p.prob_detection(e2).unwrap());
            prop_assert!(f2 <= f1);
            prop_assert!(d2 <= d1);
            prop_assert!(d1 >= f1);
            for v in [f1, f2, d1, d2] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn q_symmetry(x in -8.0f64..8.0) {
            let s = q_function(x).unwrap() + q_function(-x).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-15);
        }
    }
}
