//! Scenario files.
//!
//! A scenario is one JSON document with the sections `sensing`, `channel`,
//! `scenario`, `solver`, `output` and `validate`. Every section and every
//! field is optional. Power-ratio fields accept either a linear value or a
//! decibel value under the same name with a `_db` suffix, never both.
//!
//! ```json
//! {
//!   "sensing": { "sensed_snr_db": [-15, -12], "num_samples": 12000,
//!                "eta_grid": { "min": 0.95, "max": 1.1, "points": 151 } },
//!   "scenario": { "prior_active": 0.4, "avg_power_budget_db": 15,
//!                 "peak_interference_db": 0, "loss_fraction": 0.05 }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cogniopt_core::capacity::{CapacityLaw, ScenarioConfig};
use cogniopt_core::channel::{ChannelParams, FadingModel};
use cogniopt_core::optimizer::{linspace, SearchSettings, SolverSettings, StepRule};
use cogniopt_core::sensing::SensingParams;
use cogniopt_core::{db_to_linear, linear_to_db};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::McConfig;

/// Width of the default threshold window, in detector standard deviations
/// beyond each transition.
pub const DEFAULT_WINDOW_SIGMAS: f64 = 6.0;

/// Points of the default threshold grid.
pub const DEFAULT_GRID_POINTS: usize = 201;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    sensing: RawSensing,
    channel: RawChannel,
    scenario: RawScenario,
    solver: RawSolver,
    output: RawOutput,
    validate: RawValidate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Self::One(x) => vec![x],
            Self::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    Values(Vec<f64>),
    Range { min: f64, max: f64, points: usize },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSensing {
    sensed_snr: Option<OneOrMany>,
    sensed_snr_db: Option<OneOrMany>,
    num_samples: Option<u64>,
    noise_variance: Option<f64>,
    sampling_freq: Option<f64>,
    sensing_time: Option<f64>,
    frame_duration: Option<f64>,
    eta_grid: Option<RawGrid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawFading {
    Rayleigh {
        mean_snr: Option<f64>,
        mean_snr_db: Option<f64>,
    },
    Constant {
        snr: Option<f64>,
        snr_db: Option<f64>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawChannel {
    noise_power: Option<f64>,
    noise_power_db: Option<f64>,
    gain_sp: Option<f64>,
    gain_sp_db: Option<f64>,
    su_fading: Option<RawFading>,
    pu_fading: Option<RawFading>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawScenario {
    prior_active: Option<f64>,
    avg_power_budget: Option<f64>,
    avg_power_budget_db: Option<f64>,
    peak_interference: Option<f64>,
    peak_interference_db: Option<f64>,
    loss_fraction: Option<f64>,
    capacity_law: Option<LawName>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    step_rule: Option<StepName>,
    step_size: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    initial_lambda: Option<f64>,
    lambda_floor: Option<f64>,
    safeguard: Option<bool>,
    grid_points: Option<usize>,
    golden_tolerance: Option<f64>,
    eta_range: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawValidate {
    mc_trials: Option<u64>,
    mc_thresholds: Option<Vec<f64>>,
    lambda_grid: Option<RawLambdaGrid>,
    surface_eta_points: Option<usize>,
    tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RawLambdaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Name of a primary-link rate formula, as written in files and flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LawName {
    #[default]
    #[serde(alias = "shannon_1plus")]
    Shannon,
    #[serde(alias = "paper_literal")]
    Paper,
}

impl LawName {
    pub fn law(self) -> CapacityLaw {
        match self {
            Self::Shannon => CapacityLaw::Shannon1Plus,
            Self::Paper => CapacityLaw::PaperLiteral,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Shannon => "shannon",
            Self::Paper => "paper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepName {
    #[default]
    Constant,
    Diminishing,
}

/// Fading model after unit conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingSpec {
    Rayleigh { mean_snr: f64 },
    Constant { snr: f64 },
}

impl FadingSpec {
    fn model(self, field: &str) -> Result<FadingModel> {
        match self {
            Self::Rayleigh { mean_snr } => FadingModel::rayleigh(mean_snr),
            Self::Constant { snr } => FadingModel::constant(snr),
        }
        .map_err(|e| Error::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingSpec {
    pub sensed_snr: Vec<f64>,
    pub sensed_snr_db: Vec<f64>,
    pub num_samples: u64,
    pub noise_variance: f64,
    pub sampling_freq: Option<f64>,
    pub sensing_time: Option<f64>,
    pub frame_duration: Option<f64>,
    pub eta_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSpec {
    pub noise_power: f64,
    pub gain_sp: f64,
    pub su_fading: FadingSpec,
    pub pu_fading: FadingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub prior_active: f64,
    pub prior_idle: f64,
    pub avg_power_budget: f64,
    pub peak_interference: f64,
    pub loss_fraction: f64,
    pub capacity_law: LawName,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSpec {
    pub step_rule: StepName,
    pub step_size: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_lambda: f64,
    pub lambda_floor: f64,
    pub safeguard: bool,
    pub grid_points: usize,
    pub golden_tolerance: f64,
    pub eta_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateSpec {
    pub mc: McConfig,
    /// Thresholds for both hypotheses; `None` places five thresholds across
    /// each transition.
    pub mc_thresholds: Option<Vec<f64>>,
    pub lambda_grid: RawLambdaGrid,
    pub surface_eta_points: usize,
    /// Overrides of the check tolerances, by check name.
    pub tolerances: BTreeMap<String, f64>,
}

/// A scenario with every default filled in and every unit converted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub sensing: SensingSpec,
    pub channel: ChannelSpec,
    pub scenario: ScenarioSpec,
    pub solver: SolverSpec,
    pub output_dir: Option<PathBuf>,
    pub validate: ValidateSpec,
}

/// Reads and resolves a scenario file.
pub fn load(path: &Path) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

/// Resolves a scenario document.
pub fn parse(text: &str) -> Result<Resolved> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "<document>".to_owned()
        } else {
            path
        };
        Error::config(field, e.into_inner().to_string())
    })?;
    resolve(raw)
}

/// The built-in scenario.
pub fn defaults() -> Resolved {
    resolve(RawConfig::default()).expect("built-in defaults are valid")
}

fn pick(field: &str, linear: Option<f64>, db: Option<f64>, default: f64) -> Result<f64> {
    let v = match (linear, db) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                field,
                format!("give either `{field}` or `{field}_db`, not both"),
            ))
        }
        (Some(x), None) => x,
        (None, Some(d)) => {
            if !d.is_finite() {
                return Err(Error::config(format!("{field}_db"), "must be finite"));
            }
            db_to_linear(d)
        }
        (None, None) => default,
    };
    positive(field, v)
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn fading(field: &str, raw: Option<RawFading>) -> Result<FadingSpec> {
    Ok(match raw {
        None => FadingSpec::Rayleigh { mean_snr: 1.0 },
        Some(RawFading::Rayleigh {
            mean_snr,
            mean_snr_db,
        }) => FadingSpec::Rayleigh {
            mean_snr: pick(&format!("{field}.mean_snr"), mean_snr, mean_snr_db, 1.0)?,
        },
        Some(RawFading::Constant { snr, snr_db }) => {
            if snr.is_none() && snr_db.is_none() {
                return Err(Error::config(format!("{field}.snr"), "missing"));
            }
            FadingSpec::Constant {
                snr: pick(&format!("{field}.snr"), snr, snr_db, 1.0)?,
            }
        }
    })
}

fn resolve(raw: RawConfig) -> Result<Resolved> {
    let s = raw.sensing;
    let sensed_snr = match (s.sensed_snr, s.sensed_snr_db) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "sensing.sensed_snr",
                "give either `sensed_snr` or `sensed_snr_db`, not both",
            ))
        }
        (Some(lin), None) => lin.into_vec(),
        (None, Some(db)) => db.into_vec().into_iter().map(db_to_linear).collect(),
        (None, None) => vec![db_to_linear(-15.0), db_to_linear(-12.0)],
    };
    if sensed_snr.is_empty() {
        return Err(Error::config(
            "sensing.sensed_snr",
            "needs at least one value",
        ));
    }
    for &g in &sensed_snr {
        positive("sensing.sensed_snr", g)?;
    }
    let noise_variance = positive("sensing.noise_variance", s.noise_variance.unwrap_or(1.0))?;
    let timed = s.sampling_freq.is_some() || s.sensing_time.is_some();
    let num_samples = match (s.num_samples, timed) {
        (Some(_), true) => {
            return Err(Error::config(
                "sensing.num_samples",
                "give either `num_samples` or `sampling_freq` with `sensing_time`",
            ))
        }
        (Some(n), false) => n,
        (None, false) => 12_000,
        (None, true) => {
            let fs = s
                .sampling_freq
                .ok_or_else(|| Error::config("sensing.sampling_freq", "missing"))?;
            let tau = s
                .sensing_time
                .ok_or_else(|| Error::config("sensing.sensing_time", "missing"))?;
            SensingParams::from_timing(sensed_snr[0], noise_variance, fs, tau, s.frame_duration)
                .map_err(|e| Error::config("sensing.sensing_time", e.to_string()))?
                .num_samples()
        }
    };
    if num_samples == 0 {
        return Err(Error::config("sensing.num_samples", "must be at least 1"));
    }

    let probe = SensingParams::new(sensed_snr[0], num_samples, noise_variance)
        .map_err(|e| Error::config("sensing", e.to_string()))?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &g in &sensed_snr {
        let p = probe
            .with_sensed_snr(g)
            .map_err(|e| Error::config("sensing.sensed_snr", e.to_string()))?;
        let (a, b) = p.transition_range(DEFAULT_WINDOW_SIGMAS);
        lo = lo.min(a);
        hi = hi.max(b);
    }
    let eta_grid = match s.eta_grid {
        None => linspace(lo, hi, DEFAULT_GRID_POINTS),
        Some(RawGrid::Values(v)) => v,
        Some(RawGrid::Range { min, max, points }) => {
            if !(min.is_finite() && max.is_finite() && min >= 0.0 && max > min) || points < 2 {
                return Err(Error::config(
                    "sensing.eta_grid",
                    "range needs 0 <= min < max and at least 2 points",
                ));
            }
            linspace(min, max, points)
        }
    };
    if eta_grid.is_empty() {
        return Err(Error::config("sensing.eta_grid", "must not be empty"));
    }
    if eta_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::config(
            "sensing.eta_grid",
            "thresholds must be finite and >= 0",
        ));
    }
    if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(
            "sensing.eta_grid",
            "must be strictly increasing",
        ));
    }

    let c = raw.channel;
    let channel = ChannelSpec {
        noise_power: pick("channel.noise_power", c.noise_power, c.noise_power_db, 1.0)?,
        gain_sp: pick("channel.gain_sp", c.gain_sp, c.gain_sp_db, 1.0)?,
        su_fading: fading("channel.su_fading", c.su_fading)?,
        pu_fading: fading("channel.pu_fading", c.pu_fading)?,
    };

    let sc = raw.scenario;
    let prior_active = sc.prior_active.unwrap_or(0.4);
    if !(0.0..=1.0).contains(&prior_active) {
        return Err(Error::config("scenario.prior_active", "must lie in [0, 1]"));
    }
    let loss_fraction = sc.loss_fraction.unwrap_or(0.05);
    if !(0.0..=1.0).contains(&loss_fraction) {
        return Err(Error::config(
            "scenario.loss_fraction",
            "must lie in [0, 1]",
        ));
    }
    let scenario = ScenarioSpec {
        prior_active,
        prior_idle: 1.0 - prior_active,
        avg_power_budget: pick(
            "scenario.avg_power_budget",
            sc.avg_power_budget,
            sc.avg_power_budget_db,
            db_to_linear(15.0),
        )?,
        peak_interference: pick(
            "scenario.peak_interference",
            sc.peak_interference,
            sc.peak_interference_db,
            1.0,
        )?,
        loss_fraction,
        capacity_law: sc.capacity_law.unwrap_or_default(),
    };

    let so = raw.solver;
    let defaults = SearchSettings::default();
    let solver_defaults = defaults.solver;
    let eta_range = so.eta_range.unwrap_or(if eta_grid.len() > 1 {
        [eta_grid[0], eta_grid[eta_grid.len() - 1]]
    } else {
        [lo, hi]
    });
    let solver = SolverSpec {
        step_rule: so.step_rule.unwrap_or_default(),
        step_size: positive("solver.step_size", so.step_size.unwrap_or(0.05))?,
        tolerance: positive(
            "solver.tolerance",
            so.tolerance.unwrap_or(solver_defaults.tolerance),
        )?,
        max_iterations: so.max_iterations.unwrap_or(solver_defaults.max_iterations),
        initial_lambda: positive(
            "solver.initial_lambda",
            so.initial_lambda.unwrap_or(solver_defaults.initial_lambda),
        )?,
        lambda_floor: positive(
            "solver.lambda_floor",
            so.lambda_floor.unwrap_or(solver_defaults.lambda_floor),
        )?,
        safeguard: so.safeguard.unwrap_or(solver_defaults.safeguard),
        grid_points: so.grid_points.unwrap_or(defaults.grid_points),
        golden_tolerance: positive(
            "solver.golden_tolerance",
            so.golden_tolerance.unwrap_or(defaults.golden_tolerance),
        )?,
        eta_range,
    };
    if solver.max_iterations == 0 {
        return Err(Error::config("solver.max_iterations", "must be at least 1"));
    }
    if solver.grid_points < 2 {
        return Err(Error::config("solver.grid_points", "must be at least 2"));
    }
    let [a, b] = eta_range;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
        return Err(Error::config("solver.eta_range", "needs 0 <= lo < hi"));
    }

    let v = raw.validate;
    let mc = McConfig {
        trials: v.mc_trials.unwrap_or(McConfig::default().trials),
        rng_seed: McConfig::default().rng_seed,
    };
    if mc.trials == 0 {
        return Err(Error::config("validate.mc_trials", "must be at least 1"));
    }
    if let Some(t) = &v.mc_thresholds {
        if t.is_empty() || t.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::config(
                "validate.mc_thresholds",
                "needs finite thresholds >= 0",
            ));
        }
    }
    let lambda_grid = v.lambda_grid.unwrap_or(RawLambdaGrid {
        min: 1e-3,
        max: 1e2,
        points: 100,
    });
    if !(lambda_grid.min > 0.0 && lambda_grid.max > lambda_grid.min) || lambda_grid.points < 2 {
        return Err(Error::config(
            "validate.lambda_grid",
            "needs 0 < min < max and at least 2 points",
        ));
    }
    let surface_eta_points = v.surface_eta_points.unwrap_or(50);
    if surface_eta_points < 3 {
        return Err(Error::config(
            "validate.surface_eta_points",
            "must be at least 3",
        ));
    }
    for (name, tol) in &v.tolerances {
        if !crate::commands::CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::config(
                format!("validate.tolerances.{name}"),
                format!(
                    "unknown check; known checks: {}",
                    crate::commands::CHECK_NAMES.join(", ")
                ),
            ));
        }
        if !(tol.is_finite() && *tol >= 0.0) {
            return Err(Error::config(
                format!("validate.tolerances.{name}"),
                "must be finite and >= 0",
            ));
        }
    }

    Ok(Resolved {
        sensing: SensingSpec {
            sensed_snr_db: sensed_snr.iter().map(|&g| linear_to_db(g)).collect(),
            sensed_snr,
            num_samples,
            noise_variance,
            sampling_freq: s.sampling_freq,
            sensing_time: s.sensing_time,
            frame_duration: s.frame_duration,
            eta_grid,
        },
        channel,
        scenario,
        solver,
        output_dir: raw.output.dir,
        validate: ValidateSpec {
            mc,
            mc_thresholds: v.mc_thresholds,
            lambda_grid,
            surface_eta_points,
            tolerances: v.tolerances,
        },
    })
}

impl Resolved {
    /// One detector per configured sensed SNR.
    pub fn detectors(&self) -> Result<Vec<SensingParams>> {
        let s = &self.sensing;
        s.sensed_snr
            .iter()
            .map(|&g| match (s.sampling_freq, s.sensing_time) {
                (Some(fs), Some(tau)) => {
                    SensingParams::from_timing(g, s.noise_variance, fs, tau, s.frame_duration)
                }
                _ => SensingParams::new(g, s.num_samples, s.noise_variance),
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config("sensing", e.to_string()))
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        let c = &self.channel;
        ChannelParams::new(
            c.noise_power,
            c.gain_sp,
            c.su_fading.model("channel.su_fading")?,
            c.pu_fading.model("channel.pu_fading")?,
        )
        .map_err(|e| Error::config("channel", e.to_string()))
    }

    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        let s = &self.scenario;
        ScenarioConfig::new(
            s.prior_active,
            s.avg_power_budget,
            s.peak_interference,
            s.loss_fraction,
        )
        .map(|c| c.with_capacity_law(s.capacity_law.law()))
        .map_err(|e| Error::config("scenario", e.to_string()))
    }

    pub fn solver_settings(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            step: match s.step_rule {
                StepName::Constant => StepRule::Constant(s.step_size),
                StepName::Diminishing => StepRule::Diminishing(s.step_size),
            },
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
            initial_lambda: s.initial_lambda,
            lambda_floor: s.lambda_floor,
            safeguard: s.safeguard,
        }
    }

    pub fn search_settings(&self) -> SearchSettings {
        SearchSettings {
            solver: self.solver_settings(),
            grid_points: self.solver.grid_points,
            golden_tolerance: self.solver.golden_tolerance,
        }
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (self.solver.eta_range[0], self.solver.eta_range[1])
    }

    pub fn with_capacity_law(mut self, law: LawName) -> Self {
        self.scenario.capacity_law = law;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.validate.mc.rng_seed = seed;
        self
    }
}
