//! The four subcommands. Each has a pure part that builds tables or a report
//! from a resolved scenario, and a `cmd_*` wrapper that writes the files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cogniopt_core::capacity::{
    pu_capacity_loss, pu_capacity_max, pu_loss_curve, PolicyMoments, PowerPolicy, ScenarioConfig,
};
use cogniopt_core::channel::ChannelParams;
use cogniopt_core::optimizer::{
    concavity_check, dual_function, linspace, subgradient_solve, threshold_search, SolverSettings,
};
use cogniopt_core::sensing::{q_function, roc_curve, SensingParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LawName, Resolved};
use crate::error::{Error, Result};
use crate::oracle::{self, Hypothesis};
use crate::output::{fmt_f64, write_bytes, RunManifest, Table};

/// Names of the validation checks, in report order.
pub const CHECK_NAMES: &[&str] = &[
    "q_function",
    "derivative_finite_difference",
    "mc_false_alarm",
    "mc_detection",
    "mc_stderr_scaling",
    "expected_power_closed_form",
    "capacity_max_closed_form",
    "loss_closed_form",
    "loss_monotone",
    "brute_force_dual",
    "duality_gap",
    "kkt_slackness",
    "subgradient_inequality",
    "capacity_surface",
    "concavity",
];

/// Inner-solver tolerance used when sampling the optimized capacity for
/// second differences. Solver noise must stay well below the concavity
/// tolerance.
pub const CONCAVITY_SOLVER_TOLERANCE: f64 = 1e-13;

/// Default tolerance of a validation check.
pub fn default_tolerance(name: &str) -> f64 {
    match name {
        "q_function" => 1e-12,
        "derivative_finite_difference" => 1e-6,
        "mc_false_alarm" | "mc_detection" => 4.0,
        "mc_stderr_scaling" => 1.6,
        "expected_power_closed_form" | "capacity_max_closed_form" => 1e-6,
        "loss_closed_form" => 1e-9,
        "loss_monotone" => 0.0,
        "brute_force_dual" | "capacity_surface" => 1.0,
        "duality_gap" | "kkt_slackness" => 1e-3,
        "subgradient_inequality" | "concavity" => 1e-9,
        _ => panic!("unknown check {name}"),
    }
}

/// Where a command runs: the scenario and the output directory.
#[derive(Debug, Clone)]
pub struct RunContext<'a> {
    pub resolved: &'a Resolved,
    pub scenario_path: Option<&'a Path>,
    pub out_dir: PathBuf,
}

impl RunContext<'_> {
    fn finish(&self, command: &str, tables: &[(&str, &Table)]) -> Result<Vec<PathBuf>> {
        let mut manifest = RunManifest::new(command, self.scenario_path, self.resolved);
        for (name, table) in tables {
            let path = self.out_dir.join(name);
            table.write(&path)?;
            manifest.outputs.push(path);
        }
        let path = self.out_dir.join(format!("{command}_manifest.json"));
        manifest.write(&path)?;
        let mut written = manifest.outputs.clone();
        written.push(path);
        Ok(written)
    }
}

fn detectors_with_db(r: &Resolved) -> Result<Vec<(f64, SensingParams)>> {
    Ok(r.sensing
        .sensed_snr_db
        .iter()
        .copied()
        .zip(r.detectors()?)
        .collect())
}

/// Detector characteristics over the threshold grid, one block per sensed
/// SNR.
pub fn roc_table(r: &Resolved) -> Result<Table> {
    let mut t = Table::new(&[
        "sensed_snr_db",
        "eta",
        "p_false_alarm",
        "p_detection",
        "p_missed",
    ]);
    for (db, sp) in detectors_with_db(r)? {
        for pt in roc_curve(&sp, &r.sensing.eta_grid)? {
            t.push(vec![
                fmt_f64(db),
                fmt_f64(pt.threshold),
                fmt_f64(pt.p_false_alarm),
                fmt_f64(pt.p_detection),
                fmt_f64(pt.p_missed),
            ]);
        }
    }
    Ok(t)
}

pub fn cmd_roc(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let t = roc_table(ctx.resolved)?;
    ctx.finish("roc", &[("roc.csv", &t)])
}

/// Optimum and coarse sweep per sensed SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeTables {
    pub result: Table,
    pub sweep: Table,
}

pub fn optimize_tables(r: &Resolved) -> Result<OptimizeTables> {
    let ch = r.channel_params()?;
    let cfg = r.scenario_config()?;
    let settings = r.search_settings();
    let mut result = Table::new(&[
        "sensed_snr_db",
        "eta_star",
        "lambda_star",
        "cutoff_snr",
        "C_s",
        "dual_value",
        "gap",
        "H",
        "I",
        "I_peak",
        "C_p_loss",
        "C_p_max",
        "loss_budget",
        "converged",
        "iters",
    ]);
    let mut sweep = Table::new(&[
        "sensed_snr_db",
        "eta",
        "lambda_star",
        "C_s",
        "H",
        "I",
        "C_p_loss",
        "gap",
        "iters",
        "feasible",
    ]);
    for (db, sp) in detectors_with_db(r)? {
        let out = threshold_search(&sp, &ch, &cfg, r.eta_range(), &settings)?;
        let b = &out.best;
        result.push(vec![
            fmt_f64(db),
            fmt_f64(b.eta_star),
            fmt_f64(b.lambda_star),
            fmt_f64(b.cutoff_snr),
            fmt_f64(b.capacity),
            fmt_f64(b.dual_value),
            fmt_f64(b.duality_gap),
            fmt_f64(b.avg_power_used),
            fmt_f64(b.interference_used.average),
            fmt_f64(b.interference_used.peak),
            fmt_f64(b.pu_loss),
            fmt_f64(out.capacity_max),
            fmt_f64(out.loss_budget),
            b.converged.to_string(),
            b.iterations.to_string(),
        ]);
        for row in &out.sweep {
            sweep.push(vec![
                fmt_f64(db),
                fmt_f64(row.eta),
                fmt_f64(row.lambda_star),
                fmt_f64(row.capacity),
                fmt_f64(row.avg_power),
                fmt_f64(row.interference),
                fmt_f64(row.pu_loss),
                fmt_f64(row.duality_gap),
                row.iterations.to_string(),
                row.feasible.to_string(),
            ]);
        }
    }
    Ok(OptimizeTables { result, sweep })
}

pub fn cmd_optimize(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let t = optimize_tables(ctx.resolved)?;
    ctx.finish(
        "optimize",
        &[
            ("optimize.csv", &t.result),
            ("optimize_sweep.csv", &t.sweep),
        ],
    )
}

/// Primary capacity loss over the threshold grid under each of `laws`.
pub fn ploss_table(r: &Resolved, laws: &[LawName]) -> Result<Table> {
    let ch = r.channel_params()?;
    let base = r.scenario_config()?;
    let mut t = Table::new(&[
        "capacity_law",
        "sensed_snr_db",
        "eta",
        "P_m",
        "P_out",
        "gamma_p_min",
        "C_p_loss",
    ]);
    for &law in laws {
        let cfg = base.with_capacity_law(law.law());
        for (db, sp) in detectors_with_db(r)? {
            let curve = pu_loss_curve(&r.sensing.eta_grid, &sp, &ch, &cfg)?;
            for rec in &curve.records {
                t.push(vec![
                    law.as_str().to_owned(),
                    fmt_f64(db),
                    fmt_f64(rec.eta),
                    fmt_f64(rec.p_missed),
                    fmt_f64(rec.p_outage),
                    fmt_f64(rec.gamma_p_min),
                    fmt_f64(rec.capacity_loss),
                ]);
            }
        }
    }
    Ok(t)
}

pub fn cmd_ploss(ctx: &RunContext, laws: &[LawName]) -> Result<Vec<PathBuf>> {
    let t = ploss_table(ctx.resolved, laws)?;
    ctx.finish("ploss", &[("ploss.csv", &t)])
}

/// Outcome of one validation check: passes when `value <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.name.to_owned())
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<4} {:<30} value={:<24} tolerance={:<12} {}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                fmt_f64(c.value),
                c.tolerance,
                c.detail
            );
        }
        let failed = self.failed();
        if failed.is_empty() {
            let _ = writeln!(s, "all {} checks passed", self.checks.len());
        } else {
            let _ = writeln!(
                s,
                "{} of {} checks failed: {}",
                failed.len(),
                self.checks.len(),
                failed.join(", ")
            );
        }
        s
    }
}

struct Checks<'a> {
    r: &'a Resolved,
    out: Vec<Check>,
}

impl Checks<'_> {
    fn push(&mut self, name: &'static str, value: f64, detail: String) {
        debug_assert!(CHECK_NAMES.contains(&name));
        let tolerance = self
            .r
            .validate
            .tolerances
            .get(name)
            .copied()
            .unwrap_or_else(|| default_tolerance(name));
        // NaN never passes.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.out.push(Check {
            name,
            value,
            tolerance,
            detail,
        });
    }
}

/// Five thresholds across the false-alarm and detection transitions, at
/// -1.5, -0.75, 0, 0.75 and 1.5 detector standard deviations.
pub fn mc_default_thresholds(sp: &SensingParams) -> (Vec<f64>, Vec<f64>) {
    let n = (sp.num_samples() as f64).sqrt();
    let s2 = sp.noise_variance();
    let g = sp.sensed_snr();
    let z = [-1.5, -0.75, 0.0, 0.75, 1.5];
    let idle = z.iter().map(|z| s2 * (1.0 + z / n)).collect();
    let active = z
        .iter()
        .map(|z| s2 * (1.0 + g + z * (2.0 * g + 1.0).sqrt() / n))
        .collect();
    (idle, active)
}

fn mc_check(
    checks: &mut Checks,
    name: &'static str,
    energies: &[f64],
    etas: &[f64],
    exact: impl Fn(f64) -> Result<f64>,
) -> Result<()> {
    let mut worst = 0.0_f64;
    let mut at = 0.0;
    for &eta in etas {
        let e = oracle::estimate_from_energies(energies, eta);
        let z = e.z_score(exact(eta)?);
        if z > worst {
            worst = z;
            at = eta;
        }
    }
    checks.push(
        name,
        worst,
        format!(
            "max binomial z-score over {} thresholds (at eta={at:.6}), {} trials",
            etas.len(),
            energies.len()
        ),
    );
    Ok(())
}

/// Runs every oracle check against the first configured detector.
pub fn run_checks(r: &Resolved) -> Result<ValidationReport> {
    let mut checks = Checks { r, out: Vec::new() };
    let sp = r.detectors()?[0];
    let ch = r.channel_params()?;
    let cfg = r.scenario_config()?;
    let settings = r.solver_settings();
    let s2 = sp.noise_variance();
    let unit = ChannelParams::default();

    // Reference values of the Gaussian tail.
    let mut worst = 0.0_f64;
    for (x, q) in [
        (1.0, 0.158_655_253_931_457_051_4),
        (3.0, 0.001_349_898_031_630_094_5),
        (-2.0, 0.977_249_868_051_820_792_8),
        (6.0, 9.865_876_450_376_981e-10),
    ] {
        worst = worst.max(((q_function(x)? - q) / q).abs());
    }
    checks.push(
        "q_function",
        worst,
        "max relative error at x = 1, 3, -2, 6".into(),
    );

    let h = 1e-6 * s2;
    let mut worst = 0.0_f64;
    for eta in linspace(0.9 * s2, 1.1 * s2, 201) {
        let fd_f =
            oracle::q_composite_difference(|e| oracle::detector_arguments(e, &sp).0, eta, h)?;
        let fd_d =
            oracle::q_composite_difference(|e| oracle::detector_arguments(e, &sp).1, eta, h)?;
        for (a, fd) in [(sp.d_pf_deta(eta)?, fd_f), (sp.d_pd_deta(eta)?, fd_d)] {
            worst = worst.max(((a.abs() - fd.abs()) / a.abs()).abs());
        }
    }
    checks.push(
        "derivative_finite_difference",
        worst,
        "max relative error over eta in [0.9, 1.1] sigma^2, step 1e-6 sigma^2".into(),
    );

    let (idle_etas, active_etas) = match &r.validate.mc_thresholds {
        Some(t) => (t.clone(), t.clone()),
        None => mc_default_thresholds(&sp),
    };
    let idle = oracle::simulate_energies(&sp, r.validate.mc, Hypothesis::Idle)?;
    let active = oracle::simulate_energies(&sp, r.validate.mc, Hypothesis::Active)?;
    mc_check(&mut checks, "mc_false_alarm", &idle, &idle_etas, |e| {
        Ok(sp.prob_false_alarm(e)?)
    })?;
    mc_check(&mut checks, "mc_detection", &active, &active_etas, |e| {
        Ok(sp.prob_detection(e)?)
    })?;
    let half = idle.len() / 2;
    let full_se = oracle::estimate_from_energies(&idle, s2).stderr;
    let half_se = oracle::estimate_from_energies(&idle[..half], s2).stderr;
    let ratio = half_se / full_se / std::f64::consts::SQRT_2;
    checks.push(
        "mc_stderr_scaling",
        ratio.max(1.0 / ratio),
        format!(
            "stderr({half}) / stderr({}) relative to sqrt(2)",
            idle.len()
        ),
    );

    let unit_cfg = ScenarioConfig::new(0.4, 1.0, 1e300, 0.05)?;
    let policy = PowerPolicy::from_dual(1.0, &unit, &unit_cfg)?;
    let quad = PolicyMoments::compute(&policy, &unit)?.mean_idle_power;
    let closed = oracle::water_filling_mean_power(1.0, 1.0, 1.0);
    checks.push(
        "expected_power_closed_form",
        (quad - closed).abs(),
        format!("E[P0] at lambda=1: quadrature {quad:.12}, closed form {closed:.12}"),
    );

    let mut worst = 0.0_f64;
    for law in [LawName::Shannon, LawName::Paper] {
        let c = unit_cfg.with_capacity_law(law.law());
        let quad = pu_capacity_max(&unit, &c)?;
        worst = worst.max((quad - oracle::rayleigh_capacity_max(1.0, law.law())).abs());
    }
    checks.push(
        "capacity_max_closed_form",
        worst,
        "C_p,max on unit Rayleigh under both capacity laws".into(),
    );

    let mut worst = 0.0_f64;
    for law in [LawName::Shannon, LawName::Paper] {
        let c = unit_cfg.with_capacity_law(law.law());
        for eta in linspace(
            s2,
            sp.active_mean_energy() + 3.0 * (sp.active_mean_energy() - s2),
            25,
        ) {
            let rec = match pu_capacity_loss(eta, &sp, &unit, &c) {
                Ok(rec) => rec,
                Err(cogniopt_core::Error::UnboundedQuantile { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            let closed = oracle::rayleigh_capacity_loss(rec.gamma_p_min, 1.0, law.law());
            worst = worst.max((rec.capacity_loss - closed).abs());
        }
    }
    checks.push(
        "loss_closed_form",
        worst,
        "C_p,loss against closed form on unit Rayleigh, both laws".into(),
    );

    let curve = pu_loss_curve(&r.sensing.eta_grid, &sp, &ch, &cfg)?;
    let drop = curve
        .records
        .windows(2)
        .map(|w| w[0].capacity_loss - w[1].capacity_loss)
        .fold(0.0_f64, f64::max);
    checks.push(
        "loss_monotone",
        drop,
        format!(
            "largest decrease of C_p,loss along the grid ({} law)",
            r.scenario.capacity_law.as_str()
        ),
    );

    let (lo, hi) = r.eta_range();
    let eta_mid = 0.5 * (lo + hi);
    let lg = r.validate.lambda_grid;
    let lambda_grid = oracle::log_grid(lg.min, lg.max, lg.points)?;
    let bf = oracle::brute_force_dual_min(eta_mid, &sp, &ch, &cfg, &lambda_grid)?;
    let solved = subgradient_solve(eta_mid, &sp, &ch, &cfg, &settings)?;
    let cell = (lg.max / lg.min).ln() / (lg.points - 1) as f64;
    checks.push(
        "brute_force_dual",
        (solved.lambda_star / bf.lambda).ln().abs() / cell,
        format!(
            "grid cells between solver lambda*={:.6e} and grid argmin {:.6e} at eta={eta_mid:.6}",
            solved.lambda_star, bf.lambda
        ),
    );
    checks.push(
        "duality_gap",
        solved.duality_gap.abs() / solved.capacity.max(1e-3),
        format!("|C_s - q| / max(C_s, 1e-3), C_s={:.9}", solved.capacity),
    );
    checks.push(
        "kkt_slackness",
        solved.slackness(&cfg).abs() / cfg.avg_power_budget,
        "|lambda (H - P_av)| / P_av".into(),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(r.validate.mc.rng_seed);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let l = 10f64.powf(rng.random_range(-2.0..1.0));
        let m = 10f64.powf(rng.random_range(-2.0..1.0));
        let at_l = dual_function(l, eta_mid, &sp, &ch, &cfg)?;
        let at_m = dual_function(m, eta_mid, &sp, &ch, &cfg)?;
        let bound = at_l.value_nats + at_l.subgradient * (m - l);
        worst = worst.max(bound - at_m.value_nats);
    }
    checks.push(
        "subgradient_inequality",
        worst,
        "max of q(l) + g (m - l) - q(m) over 100 seeded pairs, nats".into(),
    );

    let surface_grid = linspace(lo, hi, r.validate.surface_eta_points);
    let surface =
        oracle::brute_force_capacity_surface(&surface_grid, &sp, &ch, &cfg, &lambda_grid)?;
    let search =
        threshold_search(&sp, &ch, &cfg, (lo, hi), &r.search_settings()).map_err(Error::from);
    let (value, detail) = match (surface.best(), search) {
        (Some(best), Ok(out)) => {
            let cell = surface_grid[1] - surface_grid[0];
            (
                (out.best.eta_star - best.eta).abs() / cell,
                format!(
                    "search eta*={:.6} vs surface argmax {:.6}, in grid cells",
                    out.best.eta_star, best.eta
                ),
            )
        }
        (None, Err(Error::Infeasible(_))) => (0.0, "both report an empty feasible set".to_owned()),
        (None, Err(e)) => (f64::INFINITY, format!("search failed: {e}")),
        (Some(best), Err(e)) => (
            f64::INFINITY,
            format!("surface argmax {:.6} but search failed: {e}", best.eta),
        ),
        (None, Ok(out)) => (
            f64::INFINITY,
            format!(
                "search returned eta*={:.6} but the surface has no feasible point",
                out.best.eta_star
            ),
        ),
    };
    checks.push("capacity_surface", value, detail);

    let start = sp.convex_regime_start();
    let stop = start + 6.0 * s2 * ((2.0 * sp.sensed_snr() + 1.0) / sp.num_samples() as f64).sqrt();
    let tight = SolverSettings {
        tolerance: settings.tolerance.min(CONCAVITY_SOLVER_TOLERANCE),
        ..settings
    };
    let report = concavity_check(&linspace(start, stop, 200), &sp, &ch, &cfg, &tight)?;
    checks.push(
        "concavity",
        report.shape.max_second_difference.max(0.0),
        format!("largest second difference of optimized C_s over eta in [{start:.6}, {stop:.6}]"),
    );

    Ok(ValidationReport { checks: checks.out })
}

/// Runs the checks and writes the report. A failed check is reported by the
/// caller through [`ValidationReport::passed`].
pub fn cmd_validate(ctx: &RunContext) -> Result<(ValidationReport, Vec<PathBuf>)> {
    let report = run_checks(ctx.resolved)?;
    let path = ctx.out_dir.join("validate_report.txt");
    write_bytes(&path, report.render().as_bytes())?;
    let mut manifest = RunManifest::new("validate", ctx.scenario_path, ctx.resolved);
    manifest.outputs.push(path.clone());
    let mpath = ctx.out_dir.join("validate_manifest.json");
    manifest.write(&mpath)?;
    Ok((report, vec![path, mpath]))
}
