//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature on finite
//! intervals.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol * |I|)`. Known kinks of the
//! integrand should be passed as breakpoints so that every panel sees a smooth
//! function.

use alloc::vec::Vec;

use crate::{Error, Result};

// Abscissae of the 21-point Kronrod rule; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_640_738_185,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of a successful integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    /// Integral estimate.
    pub value: f64,
    /// Global error estimate.
    pub error_estimate: f64,
    /// Number of subintervals at termination.
    pub intervals: usize,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

/// Adaptive integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    /// Absolute error target.
    pub abs_tol: f64,
    /// Relative error target.
    pub rel_tol: f64,
    /// Maximum number of subintervals before giving up.
    pub max_intervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 0.0,
            max_intervals: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
}

impl Integrator {
    /// Integrates `f` over `[lower, upper]`.
    pub fn integrate<F>(&self, f: F, lower: f64, upper: f64) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_with_breaks(f, lower, upper, &[])
    }

    /// Integrates `f` over `[lower, upper]`, splitting first at every
    /// breakpoint strictly inside the interval.
    pub fn integrate_with_breaks<F>(
        &self,
        f: F,
        lower: f64,
        upper: f64,
        breaks: &[f64],
    ) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::Domain {
                what: "integration limit",
                value: if lower.is_finite() { upper } else { lower },
            });
        }
        if lower == upper {
            return Ok(Integral {
                value: 0.0,
                error_estimate: 0.0,
                intervals: 0,
                evaluations: 0,
            });
        }
        if lower > upper {
            let mut flipped = self.integrate_with_breaks(f, upper, lower, breaks)?;
            flipped.value = -flipped.value;
            return Ok(flipped);
        }

        let mut edges: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
        edges.push(lower);
        let mut inner: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|b| b.is_finite() && *b > lower && *b < upper)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        edges.extend(inner);
        edges.push(upper);

        let mut evaluations = 0;
        let mut panels: Vec<Panel> = edges
            .windows(2)
            .map(|w| {
                evaluations += 21;
                gauss_kronrod21(&f, w[0], w[1])
            })
            .collect();

        loop {
            let (value, error) = totals(&panels);
            let target = self.abs_tol.max(self.rel_tol * value.abs());
            if error <= target {
                return Ok(Integral {
                    value,
                    error_estimate: error,
                    intervals: panels.len(),
                    evaluations,
                });
            }

            // Worst panel that can still be split.
            let worst = panels
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    let mid = 0.5 * (p.lower + p.upper);
                    mid > p.lower && mid < p.upper
                })
                .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
                .map(|(i, _)| i);

            let Some(worst) = worst else {
                return Err(self.failure(lower, upper, value, error, panels.len()));
            };
            if panels.len() >= self.max_intervals || !value.is_finite() {
                return Err(self.failure(lower, upper, value, error, panels.len()));
            }

            let p = panels[worst];
            let mid = 0.5 * (p.lower + p.upper);
            panels[worst] = gauss_kronrod21(&f, p.lower, mid);
            panels.push(gauss_kronrod21(&f, mid, p.upper));
            evaluations += 42;
        }
    }

    fn failure(&self, lower: f64, upper: f64, value: f64, error: f64, n: usize) -> Error {
        Error::Quadrature {
            lower,
            upper,
            estimate: value,
            error_estimate: error,
            intervals: n,
        }
    }
}

fn totals(panels: &[Panel]) -> (f64, f64) {
    panels
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

fn gauss_kronrod21<F: Fn(f64) -> f64>(f: &F, lower: f64, upper: f64) -> Panel {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);

    let f_center = f(center);
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();

    // QUADPACK error rescaling.
    if res_asc != 0.0 && error != 0.0 {
        let scale = libm::pow(200.0 * error / res_asc, 1.5);
        error = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }

    Panel {
        lower,
        upper,
        value,
        error,
    }
}
