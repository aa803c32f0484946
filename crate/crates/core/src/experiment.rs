//! Configuration-driven experiment runner.
//!
//! Every runner returns the files it would write as `(relative path, text)`
//! pairs so that output assembly stays ordered and byte-reproducible; the CLI
//! writes them. Analytic cells are computed in parallel and gathered in grid
//! order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::capacity::{
    joint_vs_sequential, levers_efficiency_report, optimal_panel, EfficiencyReport, JointGrid,
    MuMode, PanelGrid,
};
use crate::error::{Error, Result};
use crate::queue::{stationary, Capacity, QueueSpec, ServiceLaw};
use crate::reference;
use crate::reward::{net_reward, EconomicParams, RewardOptions, DEFAULT_TRUNCATION_TOL};
use crate::showup::{DelayMap, ShowupFamily, ShowupModel};
use crate::sim::{simulate, SimConfig};
use crate::window::{
    compare_models, efficiency_gain_vs_infinite, optimal_window, ComparisonSummary,
    InfinityReference, LossForm, WindowGrid, WindowSearchOptions, WindowSearchResult,
    DEFAULT_INFINITY_TOLERANCE,
};

/// A show-up curve with the column name used in tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedShowup {
    pub name: String,
    #[serde(flatten)]
    pub family: ShowupFamily,
    /// Fitted stand-in rather than a curve given in closed form.
    #[serde(default)]
    pub stand_in: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    pub infinity_tolerance: f64,
    pub reference: InfinityReference,
    pub truncation_tolerance: f64,
    pub loss_form: LossForm,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            k_min: 20,
            k_max: 2000,
            k_step: 20,
            infinity_tolerance: DEFAULT_INFINITY_TOLERANCE,
            reference: InfinityReference::Exact,
            truncation_tolerance: DEFAULT_TRUNCATION_TOL,
            loss_form: LossForm::CrossModel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeversSection {
    pub overtime_a: Vec<f64>,
    pub mu_modes: Vec<MuMode>,
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    pub lambda_min: f64,
    pub lambda_coarse_step: f64,
    pub lambda_fine_step: f64,
    pub stability_margin: f64,
    pub mu_span: f64,
    pub mu_step: f64,
}

impl Default for LeversSection {
    fn default() -> Self {
        let p = PanelGrid::default();
        Self {
            overtime_a: vec![0.2, 2.0],
            mu_modes: vec![MuMode::Fixed, MuMode::Optimize],
            k_min: 1,
            k_max: 3000,
            k_step: 1,
            lambda_min: p.lambda_min,
            lambda_coarse_step: p.lambda_coarse_step,
            lambda_fine_step: p.lambda_fine_step,
            stability_margin: p.stability_margin,
            mu_span: p.mu_span,
            mu_step: p.mu_step,
        }
    }
}

impl LeversSection {
    fn panel(&self) -> PanelGrid {
        PanelGrid {
            lambda_min: self.lambda_min,
            lambda_coarse_step: self.lambda_coarse_step,
            lambda_fine_step: self.lambda_fine_step,
            stability_margin: self.stability_margin,
            mu_span: self.mu_span,
            mu_step: self.mu_step,
        }
    }

    fn windows(&self) -> Result<WindowGrid> {
        WindowGrid::new(self.k_min, self.k_max, self.k_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointSection {
    pub laws: Vec<ServiceLaw>,
    pub include_unbounded: bool,
    #[serde(flatten)]
    pub grids: LeversSection,
}

impl Default for JointSection {
    fn default() -> Self {
        Self {
            laws: vec![ServiceLaw::Exponential],
            include_unbounded: true,
            grids: LeversSection {
                k_max: 2000,
                ..LeversSection::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesSection {
    pub max_delay: f64,
    pub step: f64,
}

impl Default for CurvesSection {
    fn default() -> Self {
        Self {
            max_delay: 365.0,
            step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub law: ServiceLaw,
    pub lambda: f64,
    /// Window size; absent means unbounded.
    pub k: Option<usize>,
    pub showup: String,
    pub theta: f64,
    pub xi: f64,
    pub horizon: f64,
    pub warmup: Option<f64>,
    pub batches: usize,
    pub seed: u64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            law: ServiceLaw::Deterministic,
            lambda: 19.9,
            k: Some(180),
            showup: "K0.2".into(),
            theta: 0.0,
            xi: 0.0,
            horizon: crate::sim::DEFAULT_HORIZON,
            warmup: None,
            batches: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Service rate for the window tables, also the regular capacity `M`.
    pub mu: f64,
    pub lambdas: Vec<f64>,
    /// `(theta, xi)` pairs.
    pub scenarios: Vec<(f64, f64)>,
    #[serde(default = "default_laws")]
    pub laws: Vec<ServiceLaw>,
    #[serde(default = "default_delay_maps")]
    pub delay_maps: Vec<DelayMap>,
    /// Show-up columns of the window, gain and levers tables, in order.
    pub columns: Vec<String>,
    pub showups: Vec<NamedShowup>,
    #[serde(default)]
    pub reward: RewardOptions,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub levers: LeversSection,
    #[serde(default)]
    pub joint: JointSection,
    #[serde(default)]
    pub curves: CurvesSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_laws() -> Vec<ServiceLaw> {
    vec![ServiceLaw::Exponential, ServiceLaw::Deterministic]
}

fn default_delay_maps() -> Vec<DelayMap> {
    vec![DelayMap::SlotsOverMu]
}

/// Configuration shipped with the crate; reproduces the reference tables.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.toml");

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn default_config() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return cfg(format!("mu = {} must be > 0", self.mu));
        }
        if self.lambdas.is_empty() || self.scenarios.is_empty() || self.columns.is_empty() {
            return cfg("lambdas, scenarios and columns must be non-empty".into());
        }
        if self.laws.is_empty() || self.delay_maps.is_empty() {
            return cfg("laws and delay_maps must be non-empty".into());
        }
        for s in &self.showups {
            s.family
                .validate()
                .map_err(|e| Error::Config(format!("show-up {}: {e}", s.name)))?;
            if self.showups.iter().filter(|o| o.name == s.name).count() > 1 {
                return cfg(format!("show-up {} defined twice", s.name));
            }
        }
        for c in self.columns.iter().chain([&self.simulate.showup]) {
            self.showup(c)?;
        }
        for &l in &self.lambdas {
            if !(l > 0.0) {
                return cfg(format!("lambda {l} must be > 0"));
            }
            if self.window.reference == InfinityReference::Exact && l >= self.mu {
                return cfg(format!(
                    "lambda {l} >= mu {} needs a capped infinity reference",
                    self.mu
                ));
            }
        }
        for &(t, x) in &self.scenarios {
            EconomicParams::new(t, x)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        self.window_options(DelayMap::SlotsOverMu)?;
        self.levers.windows()?;
        self.levers.panel().validate()?;
        self.joint.grids.windows()?;
        self.joint.grids.panel().validate()?;
        if !(self.curves.step > 0.0 && self.curves.max_delay >= 0.0) {
            return cfg("curves need step > 0 and max_delay >= 0".into());
        }
        Ok(())
    }

    pub fn showup(&self, name: &str) -> Result<&NamedShowup> {
        self.showups
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("show-up {name} is not defined")))
    }

    pub fn window_options(&self, _delay_map: DelayMap) -> Result<WindowSearchOptions> {
        let w = &self.window;
        Ok(WindowSearchOptions {
            grid: WindowGrid::new(w.k_min, w.k_max, w.k_step)?,
            infinity_tolerance: w.infinity_tolerance,
            reference: w.reference,
            reward: self.reward,
            truncation_tolerance: w.truncation_tolerance,
        })
    }
}

/// Files produced by one verb.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(PathBuf, String)>,
    pub runlog: Vec<serde_json::Value>,
    /// Number of cells that failed and were written as `ERR:<code>`.
    pub errors: usize,
}

impl RunOutput {
    fn add(&mut self, path: impl Into<PathBuf>, text: String) {
        self.files.push((path.into(), text));
    }

    /// Write everything under `dir`, runlog included.
    pub fn write(&self, dir: &Path, runlog_name: &str) -> std::io::Result<()> {
        for (rel, text) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text)?;
        }
        std::fs::create_dir_all(dir)?;
        let mut log = String::new();
        for v in &self.runlog {
            log.push_str(&v.to_string());
            log.push('\n');
        }
        std::fs::write(dir.join(runlog_name), log)
    }
}

fn err_cell(e: &Error) -> String {
    format!("ERR:{}", e.code())
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}

fn csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// One `(delay map, law, scenario, lambda, column)` window search.
#[derive(Debug, Clone)]
pub struct WindowCell {
    pub delay_map: DelayMap,
    pub law: ServiceLaw,
    pub theta: f64,
    pub xi: f64,
    pub lambda: f64,
    pub column: String,
    pub result: Result<WindowSearchResult>,
}

impl WindowCell {
    pub fn window_label(&self) -> String {
        match &self.result {
            Ok(r) => r.k_star_label(),
            Err(e) => err_cell(e),
        }
    }

    pub fn gain(&self) -> Result<f64> {
        match &self.result {
            Ok(r) => efficiency_gain_vs_infinite(r),
            Err(e) => Err(e.clone()),
        }
    }

    pub fn gain_label(&self) -> String {
        match self.gain() {
            Ok(g) => format!("{g:.2}"),
            Err(e) => err_cell(&e),
        }
    }
}

/// Run every window search of the table grid for one delay map.
pub fn window_cells(cfg: &ExperimentConfig, delay_map: DelayMap) -> Result<Vec<WindowCell>> {
    let opts = cfg.window_options(delay_map)?;
    let mut jobs = Vec::new();
    for &law in &cfg.laws {
        for &(theta, xi) in &cfg.scenarios {
            for &lambda in &cfg.lambdas {
                for col in &cfg.columns {
                    jobs.push((law, theta, xi, lambda, col.clone()));
                }
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(law, theta, xi, lambda, column)| {
            let result = cfg.showup(&column).and_then(|s| {
                let model = ShowupModel::new(s.family.clone(), delay_map);
                let econ = EconomicParams::new(theta, xi).with_overtime(0.0, cfg.mu);
                optimal_window(law, lambda, cfg.mu, &econ, &model, &opts)
            });
            WindowCell {
                delay_map,
                law,
                theta,
                xi,
                lambda,
                column,
                result,
            }
        })
        .collect())
}

/// How closely one delay map reproduces the reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReproductionScore {
    /// Reference cells in fully specified show-up columns.
    pub exact_cells: usize,
    pub exact_matches: usize,
    pub within_one_step: usize,
    pub gain_cells: usize,
    pub max_gain_deviation: f64,
    pub mean_gain_deviation: f64,
}

impl ReproductionScore {
    pub fn match_fraction(&self) -> f64 {
        if self.exact_cells == 0 {
            0.0
        } else {
            self.exact_matches as f64 / self.exact_cells as f64
        }
    }
}

/// Compare computed cells with the reference tables over fully specified
/// columns. `step` is the window grid step.
pub fn reproduction_score(cells: &[WindowCell], step: usize) -> ReproductionScore {
    let mut s = ReproductionScore::default();
    let mut dev_sum = 0.0;
    for c in cells {
        if !reference::EXACT_COLUMNS.contains(&c.column.as_str()) {
            continue;
        }
        let det = c.law == ServiceLaw::Deterministic;
        if let Some(expected) = reference::window(det, c.theta, c.xi, c.lambda, &c.column) {
            s.exact_cells += 1;
            if let Ok(r) = &c.result {
                let got = r.k_star.finite();
                if got == expected {
                    s.exact_matches += 1;
                    s.within_one_step += 1;
                } else if let (Some(a), Some(b)) = (got, expected) {
                    if a.abs_diff(b) <= step {
                        s.within_one_step += 1;
                    }
                }
            }
        }
        if let (Some(expected), Ok(g)) = (
            reference::gain(det, c.theta, c.xi, c.lambda, &c.column),
            c.gain(),
        ) {
            let d = (g - expected).abs();
            s.gain_cells += 1;
            dev_sum += d;
            s.max_gain_deviation = s.max_gain_deviation.max(d);
        }
    }
    if s.gain_cells > 0 {
        s.mean_gain_deviation = dev_sum / s.gain_cells as f64;
    }
    s
}

/// Pair M/D and M/M cells of the same scenario and column.
pub fn model_pairs(cells: &[WindowCell]) -> Vec<(&WindowSearchResult, &WindowSearchResult)> {
    let mut pairs = Vec::new();
    for md in cells.iter().filter(|c| c.law == ServiceLaw::Deterministic) {
        let mm = cells.iter().find(|c| {
            c.law == ServiceLaw::Exponential
                && c.delay_map == md.delay_map
                && c.theta == md.theta
                && c.xi == md.xi
                && c.lambda == md.lambda
                && c.column == md.column
        });
        if let (Ok(d), Some(Ok(m))) = (&md.result, mm.map(|c| &c.result)) {
            pairs.push((d, m));
        }
    }
    pairs
}

fn table_rows(
    cfg: &ExperimentConfig,
    cells: &[WindowCell],
    law: ServiceLaw,
    label: impl Fn(&WindowCell) -> String,
) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for &(theta, xi) in &cfg.scenarios {
        for &lambda in &cfg.lambdas {
            let mut row = vec![num(theta), num(xi), num(lambda)];
            for col in &cfg.columns {
                let cell = cells.iter().find(|c| {
                    c.law == law
                        && c.theta == theta
                        && c.xi == xi
                        && c.lambda == lambda
                        && &c.column == col
                });
                row.push(cell.map_or_else(String::new, &label));
            }
            rows.push(row);
        }
    }
    rows
}

fn reference_rows(cfg: &ExperimentConfig, law: ServiceLaw, gains: bool) -> Vec<Vec<String>> {
    let det = law == ServiceLaw::Deterministic;
    let mut rows = Vec::new();
    for &(theta, xi) in &cfg.scenarios {
        for &lambda in &cfg.lambdas {
            let mut row = vec![num(theta), num(xi), num(lambda)];
            for col in &cfg.columns {
                row.push(if gains {
                    reference::gain(det, theta, xi, lambda, col)
                        .map_or_else(|| "-".into(), |g| format!("{g:.2}"))
                } else {
                    reference::window(det, theta, xi, lambda, col).map_or_else(
                        || "-".into(),
                        |w| w.map_or_else(|| "inf".into(), |k| k.to_string()),
                    )
                });
            }
            rows.push(row);
        }
    }
    rows
}

fn summary_json(s: &ComparisonSummary) -> serde_json::Value {
    serde_json::to_value(s).expect("plain struct")
}

/// Window and gain tables, comparison statistics and reference comparison.
pub fn run_tables(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let mut header = vec!["theta".to_string(), "xi".into(), "lambda".into()];
    header.extend(cfg.columns.iter().cloned());
    let mut summary = String::from("# Window tables summary\n\n");
    let mut scores = Vec::new();

    for &dm in &cfg.delay_maps {
        let cells = window_cells(cfg, dm)?;
        let dir = PathBuf::from(dm.label());
        out.errors += cells.iter().filter(|c| c.result.is_err()).count();
        for &law in &cfg.laws {
            let tag = law.letter().to_ascii_lowercase();
            let wrows = table_rows(cfg, &cells, law, WindowCell::window_label);
            let grows = table_rows(cfg, &cells, law, WindowCell::gain_label);
            out.add(
                dir.join(format!("windows_m{tag}.csv")),
                csv(&header, &wrows),
            );
            out.add(
                dir.join(format!("windows_m{tag}.md")),
                markdown(&header, &wrows),
            );
            out.add(dir.join(format!("gains_m{tag}.csv")), csv(&header, &grows));
            out.add(
                dir.join(format!("gains_m{tag}.md")),
                markdown(&header, &grows),
            );
        }
        for c in &cells {
            let mut entry = json!({
                "kind": "window",
                "delay_map": dm.label(),
                "law": c.law.label(),
                "theta": c.theta,
                "xi": c.xi,
                "lambda": c.lambda,
                "showup": c.column,
            });
            match &c.result {
                Ok(r) => {
                    entry["k_star"] = json!(r.k_star_label());
                    entry["gain_percent"] = c.gain().map_or(json!(null), |g| json!(g));
                    entry["result"] = serde_json::to_value(r).expect("serializable");
                }
                Err(e) => entry["error"] = json!({"code": e.code(), "message": e.to_string()}),
            }
            out.runlog.push(entry);
        }

        let score = reproduction_score(&cells, cfg.window.k_step);
        scores.push((dm, score));
        let _ = writeln!(summary, "## Delay map `{}`\n", dm.label());
        let pairs = model_pairs(&cells);
        if !pairs.is_empty() {
            let _ = writeln!(summary, "| loss form | cells | matches | match rate % | mean loss % (finite) | mean loss % (incl. inf at reference) |");
            let _ = writeln!(summary, "|---|---|---|---|---|---|");
            for form in [
                LossForm::CrossModel,
                LossForm::SameModel,
                LossForm::LiteralWindow,
            ] {
                match compare_models(&pairs, form) {
                    Ok(s) => {
                        let mark = if form == cfg.window.loss_form {
                            " (configured)"
                        } else {
                            ""
                        };
                        let _ = writeln!(
                            summary,
                            "| {form:?}{mark} | {} | {} | {:.2} | {:.3} | {:.3} |",
                            s.cells,
                            s.matches,
                            s.match_rate_percent,
                            s.mean_loss_percent,
                            s.mean_loss_with_reference_percent
                        );
                        out.runlog.push(json!({
                            "kind": "model-comparison",
                            "delay_map": dm.label(),
                            "form": format!("{form:?}"),
                            "summary": summary_json(&s),
                        }));
                    }
                    Err(e) => {
                        let _ = writeln!(summary, "| {form:?} | {} | | | | |", err_cell(&e));
                    }
                }
            }
            let _ = writeln!(
                summary,
                "\nReference: match rate {}%, mean loss {}%.\n",
                reference::WINDOW_MATCH_RATE,
                reference::MEAN_MODEL_LOSS
            );
        }
        let _ = writeln!(
            summary,
            "Kopach cells matching the reference windows: {}/{} ({:.1}%), within one grid step: {}.",
            score.exact_matches,
            score.exact_cells,
            100.0 * score.match_fraction(),
            score.within_one_step
        );
        let _ = writeln!(
            summary,
            "Kopach gain deviation from reference: max {:.3}, mean {:.3} points over {} cells.\n",
            score.max_gain_deviation, score.mean_gain_deviation, score.gain_cells
        );
    }

    if cfg
        .scenarios
        .iter()
        .all(|&(t, x)| reference::SCENARIOS.contains(&(t, x)))
    {
        let mut cmp = String::from("# Reference values\n\n");
        for &law in &cfg.laws {
            let _ = writeln!(cmp, "## {} windows\n", law.label());
            cmp.push_str(&markdown(&header, &reference_rows(cfg, law, false)));
            let _ = writeln!(cmp, "\n## {} gains (%)\n", law.label());
            cmp.push_str(&markdown(&header, &reference_rows(cfg, law, true)));
            cmp.push('\n');
        }
        out.add("reference.md", cmp);
    }
    if let Some((best, s)) = scores.iter().copied().max_by(|a, b| {
        (a.1.exact_matches, -a.1.mean_gain_deviation)
            .partial_cmp(&(b.1.exact_matches, -b.1.mean_gain_deviation))
            .expect("finite scores")
            // Prefer the earlier map on ties.
            .then(std::cmp::Ordering::Greater)
    }) {
        let _ = writeln!(
            summary,
            "Best-matching delay map: `{}` ({} of {} Kopach windows).",
            best.label(),
            s.exact_matches,
            s.exact_cells
        );
    }
    out.add("summary.md", summary);
    Ok(out)
}

/// Show-up curves in wide (`delay_days,<name>...`) and long form.
pub fn run_curves(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let n = (cfg.curves.max_delay / cfg.curves.step + 1e-9).floor() as usize;
    let mut wide = String::from("delay_days");
    for s in &cfg.showups {
        wide.push(',');
        wide.push_str(&s.name);
    }
    wide.push('\n');
    let mut long = String::from("delay_days,family_label,showup_prob\n");
    for i in 0..=n {
        let d = i as f64 * cfg.curves.step;
        wide.push_str(&num(d));
        for s in &cfg.showups {
            let q = s.family.at_delay(d)?;
            let _ = write!(wide, ",{q:.10}");
            let _ = writeln!(long, "{},{},{q:.10}", num(d), s.name);
        }
        wide.push('\n');
    }
    out.add("curves.csv", wide);
    out.add("curves_long.csv", long);
    for s in &cfg.showups {
        out.runlog.push(
            json!({"kind": "curve", "name": s.name, "family": s.family, "stand_in": s.stand_in}),
        );
    }
    Ok(out)
}

/// One levers-table evaluation.
#[derive(Debug, Clone)]
pub struct LeversCell {
    pub overtime_a: f64,
    pub mode: MuMode,
    pub law: ServiceLaw,
    pub theta: f64,
    pub xi: f64,
    pub column: String,
    pub report: Result<EfficiencyReport>,
}

pub fn levers_cells(cfg: &ExperimentConfig, delay_map: DelayMap) -> Result<Vec<LeversCell>> {
    let grid = cfg.levers.panel();
    let wopts = WindowSearchOptions {
        grid: cfg.levers.windows()?,
        reference: InfinityReference::Exact,
        ..cfg.window_options(delay_map)?
    };
    let mut jobs = Vec::new();
    for &a in &cfg.levers.overtime_a {
        for &mode in &cfg.levers.mu_modes {
            for &(theta, xi) in &cfg.scenarios {
                for col in &cfg.columns {
                    for &law in &cfg.laws {
                        jobs.push((a, mode, law, theta, xi, col.clone()));
                    }
                }
            }
        }
    }
    // Each panel search is itself parallel, so cells run in sequence.
    Ok(jobs
        .into_iter()
        .map(|(a, mode, law, theta, xi, column)| {
            let report = cfg.showup(&column).and_then(|s| {
                let model = ShowupModel::new(s.family.clone(), delay_map);
                let econ = EconomicParams::new(theta, xi).with_overtime(a, cfg.mu);
                let panel = optimal_panel(
                    law,
                    mode,
                    &econ,
                    &model,
                    &grid,
                    cfg.reward,
                    wopts.truncation_tolerance,
                )?;
                levers_efficiency_report(&panel, &econ, &model, &wopts)
            });
            LeversCell {
                overtime_a: a,
                mode,
                law,
                theta,
                xi,
                column,
                report,
            }
        })
        .collect())
}

/// Levers table: gain and service level at the panel optimum.
pub fn run_levers(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    for &dm in &cfg.delay_maps {
        let cells = levers_cells(cfg, dm)?;
        out.errors += cells.iter().filter(|c| c.report.is_err()).count();
        let dir = PathBuf::from(dm.label());
        let mut header = vec!["theta".to_string(), "xi".into(), "showup".into()];
        let mut groups = Vec::new();
        for &mode in &cfg.levers.mu_modes {
            let m = match mode {
                MuMode::Fixed => "fixed",
                MuMode::Optimize => "opt",
            };
            for &law in &cfg.laws {
                header.push(format!("dE_{}_{m}", law.letter()));
                header.push(format!("alpha_{}_{m}", law.letter()));
                groups.push((mode, law));
            }
        }
        let mut detail_rows = Vec::new();
        for &a in &cfg.levers.overtime_a {
            let mut rows = Vec::new();
            for &(theta, xi) in &cfg.scenarios {
                for col in &cfg.columns {
                    let mut row = vec![num(theta), num(xi), col.clone()];
                    for &(mode, law) in &groups {
                        let cell = cells.iter().find(|c| {
                            c.overtime_a == a
                                && c.mode == mode
                                && c.law == law
                                && c.theta == theta
                                && c.xi == xi
                                && &c.column == col
                        });
                        match cell.map(|c| &c.report) {
                            Some(Ok(r)) => {
                                row.push(format!("{:.2}", r.gain_percent));
                                row.push(format!("{:.2}", r.service_level));
                            }
                            Some(Err(e)) => {
                                row.push(err_cell(e));
                                row.push(err_cell(e));
                            }
                            None => {
                                row.push(String::new());
                                row.push(String::new());
                            }
                        }
                    }
                    rows.push(row);
                }
            }
            let name = format!("levers_a{a}");
            out.add(dir.join(format!("{name}.csv")), csv(&header, &rows));
            out.add(dir.join(format!("{name}.md")), markdown(&header, &rows));
        }
        for c in &cells {
            let mut row = vec![
                num(c.overtime_a),
                format!("{:?}", c.mode).to_lowercase(),
                c.law.label().into(),
                num(c.theta),
                num(c.xi),
                c.column.clone(),
            ];
            let mut entry = json!({
                "kind": "levers",
                "delay_map": dm.label(),
                "overtime_a": c.overtime_a,
                "mu_mode": c.mode,
                "law": c.law.label(),
                "theta": c.theta,
                "xi": c.xi,
                "showup": c.column,
            });
            match &c.report {
                Ok(r) => {
                    row.extend([
                        num(r.lambda_star),
                        num(r.mu_star),
                        r.window.k_star_label(),
                        format!("{:.6}", r.window.t_at_infinity),
                        format!("{:.6}", r.window.t_at_k_star),
                        format!("{:.4}", r.gain_percent),
                        format!("{:.4}", r.service_level),
                    ]);
                    let mut slim = r.clone();
                    slim.window.trace.clear();
                    entry["report"] = serde_json::to_value(&slim).expect("serializable");
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(err_cell(e), 7));
                    entry["error"] = json!({"code": e.code(), "message": e.to_string()});
                }
            }
            detail_rows.push(row);
            out.runlog.push(entry);
        }
        let dh: Vec<String> = [
            "overtime_a",
            "mu_mode",
            "law",
            "theta",
            "xi",
            "showup",
            "lambda_star",
            "mu_star",
            "k_star",
            "t_infinite",
            "t_k_star",
            "gain_percent",
            "service_level",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        out.add(dir.join("levers_detail.csv"), csv(&dh, &detail_rows));
    }
    Ok(out)
}

/// One joint-versus-sequential comparison.
#[derive(Debug, Clone)]
pub struct JointCell {
    pub overtime_a: f64,
    pub mode: MuMode,
    pub law: ServiceLaw,
    pub theta: f64,
    pub xi: f64,
    pub column: String,
    pub comparison: Result<crate::capacity::JointComparison>,
}

pub fn joint_cells(cfg: &ExperimentConfig, delay_map: DelayMap) -> Result<Vec<JointCell>> {
    let j = &cfg.joint;
    let grid = JointGrid {
        panel: j.grids.panel(),
        windows: j.grids.windows()?,
        include_unbounded: j.include_unbounded,
        unbounded_only: false,
    };
    let wopts = cfg.window_options(delay_map)?;
    let mut cells = Vec::new();
    for &a in &j.grids.overtime_a {
        for &mode in &j.grids.mu_modes {
            for &law in &j.laws {
                for &(theta, xi) in &cfg.scenarios {
                    for col in &cfg.columns {
                        let comparison = cfg.showup(col).and_then(|s| {
                            let model = ShowupModel::new(s.family.clone(), delay_map);
                            let econ = EconomicParams::new(theta, xi).with_overtime(a, cfg.mu);
                            joint_vs_sequential(law, mode, &econ, &model, &grid, &wopts)
                        });
                        cells.push(JointCell {
                            overtime_a: a,
                            mode,
                            law,
                            theta,
                            xi,
                            column: col.clone(),
                            comparison,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Mean joint gain over cells with `theta == 0` and `theta > 0`.
pub fn joint_gain_by_theta(cells: &[JointCell], columns: &[&str]) -> (Option<f64>, Option<f64>) {
    let mean = |pred: &dyn Fn(f64) -> bool| {
        let v: Vec<f64> = cells
            .iter()
            .filter(|c| pred(c.theta) && columns.contains(&c.column.as_str()))
            .filter_map(|c| c.comparison.as_ref().ok().map(|r| r.gain_percent))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    (mean(&|t| t == 0.0), mean(&|t| t > 0.0))
}

/// Joint `(lambda, mu, K)` optimum against panel-then-window.
pub fn run_joint(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    for &dm in &cfg.delay_maps {
        let cells = joint_cells(cfg, dm)?;
        out.errors += cells.iter().filter(|c| c.comparison.is_err()).count();
        let dir = PathBuf::from(dm.label());
        let header: Vec<String> = [
            "overtime_a",
            "mu_mode",
            "law",
            "theta",
            "xi",
            "showup",
            "seq_lambda",
            "seq_mu",
            "seq_k",
            "seq_objective",
            "joint_lambda",
            "joint_mu",
            "joint_k",
            "joint_objective",
            "gain_percent",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut rows = Vec::new();
        for c in &cells {
            let mut row = vec![
                num(c.overtime_a),
                format!("{:?}", c.mode).to_lowercase(),
                c.law.label().into(),
                num(c.theta),
                num(c.xi),
                c.column.clone(),
            ];
            let mut entry = json!({
                "kind": "joint",
                "delay_map": dm.label(),
                "overtime_a": c.overtime_a,
                "mu_mode": c.mode,
                "law": c.law.label(),
                "theta": c.theta,
                "xi": c.xi,
                "showup": c.column,
            });
            match &c.comparison {
                Ok(r) => {
                    let k = match r.joint.k_star {
                        Capacity::Finite(k) => k.to_string(),
                        Capacity::Unbounded => "inf".into(),
                    };
                    row.extend([
                        num(r.sequential.lambda_star),
                        num(r.sequential.mu_star),
                        r.sequential.window.k_star_label(),
                        format!("{:.6}", r.sequential_objective),
                        num(r.joint.lambda_star),
                        num(r.joint.mu_star),
                        k,
                        format!("{:.6}", r.joint.objective),
                        format!("{:.4}", r.gain_percent),
                    ]);
                    let mut slim = r.clone();
                    slim.joint.trace.clear();
                    slim.sequential.window.trace.clear();
                    entry["comparison"] = serde_json::to_value(&slim).expect("serializable");
                }
                Err(e) => {
                    row.extend(std::iter::repeat_n(err_cell(e), 9));
                    entry["error"] = json!({"code": e.code(), "message": e.to_string()});
                }
            }
            rows.push(row);
            out.runlog.push(entry);
        }
        out.add(dir.join("joint.csv"), csv(&header, &rows));
        out.add(dir.join("joint.md"), markdown(&header, &rows));

        let mut s = String::from("# Joint versus sequential optimization\n\n");
        let cols: Vec<&str> = cfg.columns.iter().map(String::as_str).collect();
        for (label, set) in [
            ("fully specified columns", &reference::EXACT_COLUMNS[..]),
            ("all columns", &cols[..]),
        ] {
            let (zero, pos) = joint_gain_by_theta(&cells, set);
            let fmt = |x: Option<f64>| x.map_or("n/a".into(), |v| format!("{v:.3}"));
            let _ = writeln!(
                s,
                "Mean gain over {label}: theta = 0 -> {}%, theta > 0 -> {}%.",
                fmt(zero),
                fmt(pos)
            );
        }
        let _ = writeln!(
            s,
            "\nReference: about {}% for theta = 0 and {}% for theta > 0.",
            reference::JOINT_GAIN_THETA_ZERO,
            reference::JOINT_GAIN_THETA_POSITIVE
        );
        out.add(dir.join("joint_summary.md"), s);
    }
    Ok(out)
}

/// Simulate the configured queue and compare with the analytic model.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.simulate;
    let dm = cfg.delay_maps[0];
    let named = cfg.showup(&s.showup)?;
    let model = ShowupModel::new(named.family.clone(), dm);
    let capacity = s.k.map_or(Capacity::Unbounded, Capacity::Finite);
    let spec = QueueSpec {
        lambda: s.lambda,
        mu: cfg.mu,
        capacity,
        law: s.law,
    };
    let econ = EconomicParams::new(s.theta, s.xi);
    let sim_cfg = SimConfig {
        spec,
        showup: model.clone(),
        econ,
        horizon: s.horizon,
        warmup: s.warmup.unwrap_or(0.1 * s.horizon),
        seed: s.seed,
        batches: s.batches,
        reward: cfg.reward,
    };
    let sim = simulate(&sim_cfg)?;
    let mut out = RunOutput::default();
    let mut rows = String::from("j,sim_prob,sim_se,analytic_prob,z\n");
    let mut analytic_reward = None;
    if let Capacity::Finite(_) = capacity {
        let dist = stationary(
            &QueueSpec::new(s.lambda, cfg.mu, capacity, s.law)?,
            DEFAULT_TRUNCATION_TOL,
        )?;
        analytic_reward = Some(net_reward(&dist, &econ, &model, cfg.reward)?.total);
        for (j, p) in dist.probs().iter().enumerate() {
            let sp = sim.occupancy.get(j).copied().unwrap_or(0.0);
            let se = sim.occupancy_se.get(j).copied().unwrap_or(0.0);
            let z = if se > 0.0 { (sp - p) / se } else { 0.0 };
            let _ = writeln!(rows, "{j},{sp:.10},{se:.10},{p:.10},{z:.3}");
        }
        out.add("sim_vs_analytic.csv", rows);
    }
    out.add("sim_occupancy.csv", sim.occupancy_csv());
    let summary = json!({
        "config": sim_cfg,
        "reward_per_day": sim.reward_per_day,
        "reward_se": sim.reward_se,
        "analytic_reward": analytic_reward,
        "rejection_fraction": sim.rejection_fraction,
        "rejection_se": sim.rejection_se,
        "counts": sim.counts,
    });
    out.add(
        "sim_summary.json",
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    );
    out.runlog
        .push(json!({"kind": "simulate", "summary": summary}));
    Ok(out)
}
