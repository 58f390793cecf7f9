//! Link SNR distributions and the expectation operator used by every ergodic
//! quantity.

use alloc::vec::Vec;

use crate::quadrature::Integrator;
use crate::{Error, Result};

/// Probability mass beyond the quadrature truncation point.
pub const TAIL_MASS: f64 = 1e-12;

/// Absolute tolerance of [`FadingModel::expect`].
pub const EXPECT_ABS_TOL: f64 = 1e-9;

/// Relative tolerance of [`FadingModel::expect`]; only matters for
/// expectations much larger than one.
pub const EXPECT_REL_TOL: f64 = 1e-12;

/// Distribution of the instantaneous SNR of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    /// Rayleigh fading: exponentially distributed SNR with the given mean.
    Rayleigh {
        /// Mean SNR (linear).
        mean_snr: f64,
    },
    /// Non-fading link: all probability mass at one SNR.
    Constant {
        /// The SNR value (linear).
        snr: f64,
    },
}

impl Default for FadingModel {
    fn default() -> Self {
        Self::Rayleigh { mean_snr: 1.0 }
    }
}

impl FadingModel {
    /// Rayleigh model with the given mean SNR.
    pub fn rayleigh(mean_snr: f64) -> Result<Self> {
        positive("mean_snr", mean_snr)?;
        Ok(Self::Rayleigh { mean_snr })
    }

    /// Point-mass model.
    pub fn constant(snr: f64) -> Result<Self> {
        positive("snr", snr)?;
        Ok(Self::Constant { snr })
    }

    /// Mean SNR.
    pub fn mean_snr(&self) -> f64 {
        match *self {
            Self::Rayleigh { mean_snr } => mean_snr,
            Self::Constant { snr } => snr,
        }
    }

    /// Probability density at `x`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        non_negative(x)?;
        match *self {
            Self::Rayleigh { mean_snr } => Ok(libm::exp(-x / mean_snr) / mean_snr),
            Self::Constant { .. } => Err(Error::NoDensity),
        }
    }

    /// `P[SNR <= x]`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        non_negative(x)?;
        Ok(match *self {
            Self::Rayleigh { mean_snr } => -libm::expm1(-x / mean_snr),
            Self::Constant { snr } => {
                if x >= snr {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Smallest `x` with `cdf(x) >= u`, for `u` in `[0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain {
                what: "probability",
                value: u,
            });
        }
        if u >= 1.0 {
            return Err(Error::UnboundedQuantile { u });
        }
        Ok(match *self {
            Self::Rayleigh { mean_snr } => -mean_snr * libm::log1p(-u),
            Self::Constant { snr } => {
                if u == 0.0 {
                    0.0
                } else {
                    snr
                }
            }
        })
    }

    /// Upper integration limit: the tail beyond it holds [`TAIL_MASS`].
    pub fn truncation_point(&self) -> f64 {
        match *self {
            Self::Rayleigh { mean_snr } => mean_snr * libm::log(1.0 / TAIL_MASS),
            Self::Constant { snr } => snr,
        }
    }

    /// `E[f(SNR)]`.
    pub fn expect<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        self.expect_between(f, 0.0, f64::INFINITY, &[])
    }

    /// `E[f(SNR); lower <= SNR < upper]`, i.e. `int_lower^upper f p`.
    ///
    /// `kinks` lists points where `f` is not smooth; they become panel edges.
    pub fn expect_between<F>(&self, f: F, lower: f64, upper: f64, kinks: &[f64]) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        non_negative(lower)?;
        if upper.is_nan() {
            return Err(Error::Domain {
                what: "upper limit",
                value: upper,
            });
        }
        match *self {
            Self::Rayleigh { mean_snr } => {
                let hi = upper.min(self.truncation_point());
                if lower >= hi {
                    return Ok(0.0);
                }
                let integrator = Integrator {
                    abs_tol: EXPECT_ABS_TOL,
                    rel_tol: EXPECT_REL_TOL,
                    ..Integrator::default()
                };
                let weighted = |x: f64| {
                    let v = f(x);
                    if v == 0.0 {
                        0.0
                    } else {
                        v * libm::exp(-x / mean_snr) / mean_snr
                    }
                };
                Ok(integrator
                    .integrate_with_breaks(weighted, lower, hi, kinks)?
                    .value)
            }
            Self::Constant { snr } => Ok(if snr >= lower && snr < upper {
                f(snr)
            } else {
                0.0
            }),
        }
    }
}

/// Channel-level constants of the secondary link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Receiver noise power `N_0`.
    pub noise_power: f64,
    /// Gain `G_sp` from the SU transmitter to the PU receiver.
    pub gain_sp: f64,
    /// SNR distribution of the secondary link.
    pub su_fading: FadingModel,
    /// SNR distribution of the primary link.
    pub pu_fading: FadingModel,
}

impl ChannelParams {
    /// Validated channel parameters.
    pub fn new(
        noise_power: f64,
        gain_sp: f64,
        su_fading: FadingModel,
        pu_fading: FadingModel,
    ) -> Result<Self> {
        positive("noise_power", noise_power)?;
        positive("gain_sp", gain_sp)?;
        for m in [su_fading, pu_fading] {
            positive("mean_snr", m.mean_snr())?;
        }
        Ok(Self {
            noise_power,
            gain_sp,
            su_fading,
            pu_fading,
        })
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            noise_power: 1.0,
            gain_sp: 1.0,
            su_fading: FadingModel::default(),
            pu_fading: FadingModel::default(),
        }
    }
}

pub(crate) fn sorted_kinks(points: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = points.into_iter().filter(|p| p.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be finite and strictly positive",
        })
    }
}

fn non_negative(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain {
            what: "snr",
            value: x,
        })
    } else {
        Ok(())
    }
}
