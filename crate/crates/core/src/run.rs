//! Run configurations, batch commands and their reports.
//!
//! A configuration is a JSON document. Every field has a default, and the
//! fully resolved configuration is echoed into each report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{ObservationSpec, ParticleConfig};
use crate::error::{Error, Result};
use crate::fredholm::{f_t, Problem, WindowPlan};
use crate::lattice::RateParams;
use crate::master::{master_equation_oracle, OracleConfig};
use crate::mc::{mc_estimate, McConfig};
use crate::schutz::schutz_f;
use crate::verify::{kolmogorov_residual, run_suite, CheckReport, Instance, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Tasep,
    Pushasep,
}

/// A single time or a grid of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Times {
    One(f64),
    Grid(Vec<f64>),
}

impl Times {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Times::One(t) => vec![*t],
            Times::Grid(g) => g.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Tightened tolerances by check name. An override can only lower a
    /// tolerance, never raise it.
    pub tolerances: BTreeMap<String, f64>,
    /// Seed of the randomized initial-condition instances.
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            tolerances: BTreeMap::new(),
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub r: f64,
    pub l: f64,
    pub x0: Vec<i64>,
    pub n: Vec<usize>,
    pub a: Vec<i64>,
    pub t: Times,
    pub window: WindowPlan,
    pub mc: McSection,
    pub oracle: OracleConfig,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: Model::Tasep,
            r: 1.0,
            l: 0.0,
            x0: vec![-1, -2, -3],
            n: vec![3],
            a: vec![-3],
            t: Times::One(1.0),
            window: WindowPlan::default(),
            mc: McSection::default(),
            oracle: OracleConfig::default(),
            verify: VerifySection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == Model::Tasep && (self.r != 1.0 || self.l != 0.0) {
            return Err(Error::Config(format!(
                "model \"tasep\" requires r = 1, l = 0 (got r = {}, l = {})",
                self.r, self.l
            )));
        }
        if self.n.len() != self.a.len() {
            return Err(Error::Config(format!("n has {} entries but a has {}", self.n.len(), self.a.len())));
        }
        let times = self.t.values();
        if times.is_empty() {
            return Err(Error::Config("t grid is empty".into()));
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config(format!("times must be finite and >= 0, got {t}")));
        }
        if self.mc.samples == 0 {
            return Err(Error::Config("mc.samples must be positive".into()));
        }
        if !(self.oracle.epsilon > 0.0) {
            return Err(Error::Config("oracle.epsilon must be positive".into()));
        }
        self.window.validate()?;
        self.problem().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn rates(&self) -> Result<RateParams> {
        RateParams::new(self.r, self.l)
    }

    pub fn problem(&self) -> Result<Problem> {
        let x0 = ParticleConfig::new(self.x0.clone())?;
        let spec = ObservationSpec::new(self.n.clone(), self.a.clone())?;
        match self.model {
            Model::Tasep => Problem::tasep(x0, spec),
            Model::Pushasep => Problem::push(x0, spec, self.rates()?),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.t.values()
    }
}

/// One time point of a report. Absent routes are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub f_det: Option<f64>,
    pub f_det_err: Option<f64>,
    pub converged: Option<bool>,
    pub depth: Option<usize>,
    /// `(depth, det)` at each window of the doubling loop.
    pub history: Vec<(usize, f64)>,
    pub f_mc: Option<f64>,
    pub f_mc_stderr: Option<f64>,
    pub f_oracle: Option<f64>,
    pub oracle_bound: Option<f64>,
    pub f_schutz: Option<f64>,
    pub schutz_tail: Option<f64>,
    pub kolmogorov_residual: Option<f64>,
}

impl Row {
    fn empty(t: f64) -> Self {
        Self {
            t,
            f_det: None,
            f_det_err: None,
            converged: None,
            depth: None,
            history: Vec::new(),
            f_mc: None,
            f_mc_stderr: None,
            f_oracle: None,
            oracle_bound: None,
            f_schutz: None,
            schutz_tail: None,
            kolmogorov_residual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub rows: Vec<Row>,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            rows: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// False when some determinant stopped at its maximum depth.
    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged != Some(false))
    }

    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable") + "\n"
    }

    /// Rows, or checks for a verification report, as CSV.
    pub fn to_csv(&self) -> String {
        if self.command == "verify" {
            checks_csv(&self.checks)
        } else {
            rows_csv(&self.rows)
        }
    }
}

/// Full precision, `.` decimal separator, empty when absent.
pub fn csv_number(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:.16e}"),
    }
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "t",
    "F_det",
    "F_det_err",
    "F_mc",
    "F_mc_stderr",
    "F_oracle",
    "oracle_bound",
    "kolmogorov_residual",
];

pub fn rows_csv(rows: &[Row]) -> String {
    let mut out = SWEEP_COLUMNS.join(",") + "\n";
    for r in rows {
        let cells = [
            Some(r.t),
            r.f_det,
            r.f_det_err,
            r.f_mc,
            r.f_mc_stderr,
            r.f_oracle,
            r.oracle_bound,
            r.kolmogorov_residual,
        ];
        let line: Vec<String> = cells.iter().map(|&c| csv_number(c)).collect();
        writeln!(out, "{}", line.join(",")).expect("writing to a String");
    }
    out
}

pub fn checks_csv(checks: &[CheckReport]) -> String {
    let mut out = String::from("name,instance,residual,tolerance,passed,route\n");
    for c in checks {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_text(&c.name),
            csv_text(&c.instance),
            csv_number(Some(c.residual)),
            csv_number(Some(c.tolerance)),
            c.passed,
            csv_text(&c.route)
        )
        .expect("writing to a String");
    }
    out
}

fn fill_det(row: &mut Row, problem: &Problem, plan: &WindowPlan) -> Result<()> {
    let p = f_t(row.t, problem, plan)?;
    row.f_det = Some(p.raw);
    row.f_det_err = Some(p.error_estimate);
    row.converged = Some(p.converged);
    row.depth = Some(p.depth);
    row.history = p.history;
    Ok(())
}

fn fill_mc(row: &mut Row, problem: &Problem, cfg: &RunConfig) -> Result<()> {
    let e = mc_estimate(&problem.x0, &problem.spec, problem.rates, &McConfig::new(cfg.mc.samples, cfg.mc.seed, row.t)?)?;
    row.f_mc = Some(e.p_hat);
    row.f_mc_stderr = Some(e.stderr);
    Ok(())
}

fn fill_oracle(row: &mut Row, problem: &Problem, cfg: &RunConfig) -> Result<()> {
    let o = master_equation_oracle(&problem.x0, &problem.spec, problem.rates, row.t, &cfg.oracle)?;
    row.f_oracle = Some(o.p);
    row.oracle_bound = Some(o.bound);
    if problem.rates == RateParams::TASEP && problem.spec.n_max() <= 4 {
        let s = schutz_f(&problem.x0, &problem.spec, row.t, None)?;
        row.f_schutz = Some(s.value);
        row.schutz_tail = Some(s.tail);
    }
    Ok(())
}

/// `F_t` at every configured time; with `cross_check`, also Monte Carlo
/// and the master-equation oracle. Non-convergence is recorded in the rows.
pub fn cmd_compute(cfg: &RunConfig, cross_check: bool) -> Result<RunReport> {
    let problem = cfg.problem()?;
    let mut report = RunReport::new("compute", cfg);
    for t in cfg.times() {
        let mut row = Row::empty(t);
        fill_det(&mut row, &problem, &cfg.window)?;
        if cross_check {
            fill_mc(&mut row, &problem, cfg)?;
            fill_oracle(&mut row, &problem, cfg)?;
        }
        report.rows.push(row);
    }
    Ok(report)
}

pub fn cmd_mc(cfg: &RunConfig) -> Result<RunReport> {
    let problem = cfg.problem()?;
    let mut report = RunReport::new("mc", cfg);
    for t in cfg.times() {
        let mut row = Row::empty(t);
        fill_mc(&mut row, &problem, cfg)?;
        report.rows.push(row);
    }
    Ok(report)
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<RunReport> {
    let problem = cfg.problem()?;
    let mut report = RunReport::new("oracle", cfg);
    for t in cfg.times() {
        let mut row = Row::empty(t);
        fill_oracle(&mut row, &problem, cfg)?;
        report.rows.push(row);
    }
    Ok(report)
}

/// Every route and the backward-equation residual over a grid of at least
/// two times. The residual is left empty at `t = 0`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<RunReport> {
    let times = cfg.times();
    if times.len() < 2 {
        return Err(Error::Config("a sweep needs a grid of at least two times".into()));
    }
    let problem = cfg.problem()?;
    let mut report = RunReport::new("sweep", cfg);
    for t in times {
        let mut row = Row::empty(t);
        fill_det(&mut row, &problem, &cfg.window)?;
        fill_mc(&mut row, &problem, cfg)?;
        fill_oracle(&mut row, &problem, cfg)?;
        if t > 0.0 && row.converged == Some(true) {
            row.kolmogorov_residual = Some(kolmogorov_residual(t, &problem, &cfg.window)?.best_residual());
        }
        report.rows.push(row);
    }
    Ok(report)
}

/// Runs a check suite with the window, seed and tolerance overrides of
/// `cfg`. With `builtin`, the suite runs on the built-in instances;
/// otherwise on the configured problem at each positive time.
pub fn cmd_verify(suite: Suite, cfg: &RunConfig, builtin: bool) -> Result<RunReport> {
    let resolved = cfg.clone();
    let instances: Vec<Instance> = if builtin {
        crate::verify::default_instances()
    } else {
        let problem = cfg.problem()?;
        cfg.times()
            .into_iter()
            .filter(|&t| t > 0.0)
            .map(|t| Instance {
                problem: problem.clone(),
                t,
            })
            .collect()
    };
    let mut report = RunReport::new("verify", &resolved);
    let mut checks = run_suite(suite, &instances, &resolved.window, resolved.verify.seed)?;
    for c in &mut checks {
        if let Some(&tol) = resolved.verify.tolerances.get(&c.name) {
            if tol < c.tolerance {
                *c = c.clone().with_tolerance(tol);
            }
        }
    }
    report.checks = checks;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let c = RunConfig::from_json(r#"{"x0": [0], "n": [1], "a": [0]}"#).unwrap();
        assert_eq!(c.window, WindowPlan::default());
        assert_eq!(c.t, Times::One(1.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for bad in [
            r#"{"model": "tasep", "l": 1.0}"#,
            r#"{"n": [1, 2], "a": [0]}"#,
            r#"{"x0": [0, 1]}"#,
            r#"{"t": -1.0}"#,
            r#"{"unknown": 1}"#,
            r#"{"n": [4], "a": [0]}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn time_grid_gives_one_row_each() {
        let c = RunConfig::from_json(r#"{"x0": [0], "n": [1], "a": [0], "t": [0.0, 0.5, 1.0]}"#).unwrap();
        let r = cmd_compute(&c, false).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("0.0000000000000000e0,0.0000000000000000e0"));
        let last: Vec<&str> = csv.lines().nth(3).unwrap().split(',').collect();
        let f: f64 = last[1].parse().unwrap();
        assert!((f - (1.0 - (-1f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn cross_check_adds_routes() {
        let mut c = RunConfig::default();
        c.mc.samples = 2000;
        let r = cmd_compute(&c, true).unwrap();
        let row = &r.rows[0];
        assert!(row.f_mc.is_some() && row.f_oracle.is_some() && row.f_schutz.is_some());
    }

    #[test]
    fn csv_numbers_have_seventeen_digits() {
        assert_eq!(csv_number(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(csv_number(None), "");
        assert_eq!(csv_text("a,b"), "\"a,b\"");
    }

    #[test]
    fn tolerance_overrides_only_tighten() {
        let mut c = RunConfig::from_json(r#"{"x0": [0, -1], "n": [2], "a": [-1], "t": 0.5}"#).unwrap();
        c.verify.tolerances.insert("kolmogorov/finite-difference".into(), 1.0);
        let r = cmd_verify(Suite::Kolmogorov, &c, false).unwrap();
        let fd = r.checks.iter().find(|c| c.name == "kolmogorov/finite-difference").unwrap();
        assert_eq!(fd.tolerance, crate::verify::FD_TOL);
        c.verify.tolerances.insert("kolmogorov/finite-difference".into(), 0.0);
        let r = cmd_verify(Suite::Kolmogorov, &c, false).unwrap();
        assert!(!r.checks_passed(), "{:#?}", r.checks);
    }
}
