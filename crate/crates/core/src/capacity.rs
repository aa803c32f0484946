//! Panel size and overbooking optimization.
//!
//! [`optimal_panel`] maximizes the unbounded-window reward
//! `lambda sum_j Pi_j q_j + mu xi (1 - rho) - omega(mu)` over a `(lambda, mu)`
//! grid; [`levers_efficiency_report`] then measures what a booking window adds
//! on top; [`joint_optimal`] searches `(lambda, mu, K)` together.
//!
//! Grids are searched exhaustively in two phases: a coarse `lambda` sweep for
//! every `mu`, then a fine `lambda` sweep around the coarse winner at its `mu`.
//! Cells are evaluated in parallel and reduced in a fixed order, so results do
//! not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::queue::{md1_distribution, mm1_distribution, Capacity, ServiceLaw, WindowLadder};
use crate::reward::{
    net_reward_infinite, overtime_cost, reward_from_masses, service_level, EconomicParams,
    RewardOptions,
};
use crate::showup::ShowupModel;
use crate::window::{
    efficiency_gain_vs_infinite, optimal_window, InfinityReference, WindowGrid,
    WindowSearchOptions, WindowSearchResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMode {
    /// `mu` fixed at the regular capacity `M`.
    Fixed,
    /// `mu` searched on the grid `M..=M + mu_span`.
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    FixedMu,
    OptimizeMu,
    Joint,
}

/// Search grids for `lambda` and `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelGrid {
    pub lambda_min: f64,
    pub lambda_coarse_step: f64,
    pub lambda_fine_step: f64,
    /// `lambda <= mu - stability_margin` for every infinite-window point.
    pub stability_margin: f64,
    /// `mu` runs from `M` to `M + mu_span`.
    pub mu_span: f64,
    pub mu_step: f64,
}

impl Default for PanelGrid {
    fn default() -> Self {
        Self {
            lambda_min: 10.0,
            lambda_coarse_step: 0.01,
            lambda_fine_step: 0.001,
            stability_margin: 0.01,
            mu_span: 5.0,
            mu_step: 0.1,
        }
    }
}

impl PanelGrid {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.lambda_min)
            || !pos(self.lambda_coarse_step)
            || !pos(self.lambda_fine_step)
            || !pos(self.stability_margin)
            || !pos(self.mu_step)
            || !(self.mu_span >= 0.0)
        {
            return Err(domain(format!("bad panel grid {self:?}")));
        }
        Ok(())
    }

    fn mus(&self, mode: MuMode, regular: f64) -> Vec<f64> {
        match mode {
            MuMode::Fixed => vec![regular],
            MuMode::Optimize => {
                let n = (self.mu_span / self.mu_step + 1e-9).floor() as usize;
                (0..=n).map(|i| regular + i as f64 * self.mu_step).collect()
            }
        }
    }

    /// `lo, lo + step, ...` up to `hi`, built from integer offsets.
    fn lambdas(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        if hi < lo {
            return Vec::new();
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round_grid(lo + i as f64 * step)).collect()
    }

    fn coarse_lambdas(&self, mu: f64) -> Vec<f64> {
        Self::lambdas(
            self.lambda_min,
            mu - self.stability_margin,
            self.lambda_coarse_step,
        )
    }

    fn fine_lambdas(&self, center: f64, mu: f64) -> Vec<f64> {
        let lo = (center - self.lambda_coarse_step).max(self.lambda_min);
        let hi = (center + self.lambda_coarse_step).min(mu - self.stability_margin);
        Self::lambdas(lo, hi, self.lambda_fine_step)
    }
}

/// Snap grid values to 1e-9 so that `19.99` is the same number on every path.
fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPoint {
    pub lambda: f64,
    pub mu: f64,
    pub k: Capacity,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitySearchResult {
    pub law: ServiceLaw,
    pub mode: CapacityMode,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub k_star: Capacity,
    pub objective: f64,
    /// Every evaluated `(lambda, mu)`; for the joint search, the best `K` there.
    pub trace: Vec<CapacityPoint>,
}

fn k_rank(k: Capacity) -> usize {
    k.finite().unwrap_or(usize::MAX)
}

/// Larger objective wins; ties go to the smallest `(lambda, mu, K)`.
fn better(a: &CapacityPoint, b: &CapacityPoint) -> bool {
    if a.objective != b.objective {
        return a.objective > b.objective;
    }
    (a.lambda, a.mu, k_rank(a.k)) < (b.lambda, b.mu, k_rank(b.k))
}

fn argmax(points: &[CapacityPoint]) -> Result<CapacityPoint> {
    let mut it = points.iter();
    let first = *it
        .next()
        .ok_or_else(|| Error::EmptyGrid("no feasible (lambda, mu) point".into()))?;
    Ok(it.fold(first, |best, p| if better(p, &best) { *p } else { best }))
}

fn infinite_objective(
    law: ServiceLaw,
    lambda: f64,
    mu: f64,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: RewardOptions,
    truncation_tolerance: f64,
) -> Result<f64> {
    let r = net_reward_infinite(law, lambda, mu, econ, showup, opts, truncation_tolerance)?;
    Ok(r.total - overtime_cost(mu, econ)?)
}

/// Coarse-then-fine search shared by the panel and joint optimizers.
fn two_phase<F>(
    grid: &PanelGrid,
    mus: &[f64],
    extra: &[(f64, f64)],
    eval: F,
) -> Result<Vec<CapacityPoint>>
where
    F: Fn(f64, f64) -> Result<CapacityPoint> + Sync,
{
    let coarse: Vec<(f64, f64)> = mus
        .iter()
        .flat_map(|&mu| grid.coarse_lambdas(mu).into_iter().map(move |l| (l, mu)))
        .chain(extra.iter().copied())
        .collect();
    let mut trace = coarse
        .par_iter()
        .map(|&(l, m)| eval(l, m))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&trace)?;
    let fine: Vec<f64> = grid
        .fine_lambdas(best.lambda, best.mu)
        .into_iter()
        .filter(|l| !trace.iter().any(|p| p.mu == best.mu && p.lambda == *l))
        .collect();
    let refined = fine
        .par_iter()
        .map(|&l| eval(l, best.mu))
        .collect::<Result<Vec<_>>>()?;
    trace.extend(refined);
    Ok(trace)
}

/// Maximize the unbounded-window reward over panel size and capacity.
pub fn optimal_panel(
    law: ServiceLaw,
    mu_mode: MuMode,
    econ: &EconomicParams,
    showup: &ShowupModel,
    grid: &PanelGrid,
    opts: RewardOptions,
    truncation_tolerance: f64,
) -> Result<CapacitySearchResult> {
    econ.validate()?;
    grid.validate()?;
    let mus = grid.mus(mu_mode, econ.regular_capacity);
    let trace = two_phase(grid, &mus, &[], |lambda, mu| {
        let objective =
            infinite_objective(law, lambda, mu, econ, showup, opts, truncation_tolerance)?;
        Ok(CapacityPoint {
            lambda,
            mu,
            k: Capacity::Unbounded,
            objective,
        })
    })?;
    let best = argmax(&trace)?;
    Ok(CapacitySearchResult {
        law,
        mode: match mu_mode {
            MuMode::Fixed => CapacityMode::FixedMu,
            MuMode::Optimize => CapacityMode::OptimizeMu,
        },
        lambda_star: best.lambda,
        mu_star: best.mu,
        k_star: Capacity::Unbounded,
        objective: best.objective,
        trace,
    })
}

/// What a booking window adds once panel size and capacity are optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub law: ServiceLaw,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub window: WindowSearchResult,
    /// Percent gain of `K*` over the unbounded window at `(lambda*, mu*)`.
    pub gain_percent: f64,
    /// `P(N <= K*)` in the unbounded system at `(lambda*, mu*)`.
    pub service_level: f64,
}

/// Run the window search at the panel optimum and report gain and service level.
pub fn levers_efficiency_report(
    panel: &CapacitySearchResult,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: &WindowSearchOptions,
) -> Result<EfficiencyReport> {
    let (law, lambda, mu) = (panel.law, panel.lambda_star, panel.mu_star);
    if panel.mode == CapacityMode::Joint {
        return Err(domain("levers report expects a panel optimum"));
    }
    let opts = WindowSearchOptions {
        reference: InfinityReference::Exact,
        ..*opts
    };
    let window = optimal_window(law, lambda, mu, econ, showup, &opts)?;
    let gain_percent = efficiency_gain_vs_infinite(&window)?;
    let service_level = match window.k_star {
        Capacity::Unbounded => 1.0,
        Capacity::Finite(k) => {
            let dist = match law {
                ServiceLaw::Exponential => mm1_distribution(lambda, mu, opts.truncation_tolerance)?,
                ServiceLaw::Deterministic => {
                    md1_distribution(lambda, mu, opts.truncation_tolerance)?
                }
            };
            service_level(&dist, k)?
        }
    };
    Ok(EfficiencyReport {
        law,
        lambda_star: lambda,
        mu_star: mu,
        window,
        gain_percent,
        service_level,
    })
}

/// Grids for the joint `(lambda, mu, K)` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointGrid {
    pub panel: PanelGrid,
    pub windows: WindowGrid,
    /// Whether `K = infinity` is a candidate.
    pub include_unbounded: bool,
    /// Drop every finite window, leaving only `K = infinity`.
    pub unbounded_only: bool,
}

impl Default for JointGrid {
    fn default() -> Self {
        Self {
            panel: PanelGrid::default(),
            windows: WindowGrid {
                k_min: 1,
                k_max: 2000,
                k_step: 1,
            },
            include_unbounded: true,
            unbounded_only: false,
        }
    }
}

/// Exhaustive maximization over `(lambda, mu, K)`.
///
/// `extra` adds `(lambda, mu)` points to the coarse phase, e.g. a sequential
/// optimum that must be dominated.
#[allow(clippy::too_many_arguments)]
pub fn joint_optimal(
    law: ServiceLaw,
    mu_mode: MuMode,
    econ: &EconomicParams,
    showup: &ShowupModel,
    grid: &JointGrid,
    opts: RewardOptions,
    truncation_tolerance: f64,
    extra: &[(f64, f64)],
) -> Result<CapacitySearchResult> {
    econ.validate()?;
    grid.panel.validate()?;
    grid.windows.validate()?;
    if grid.unbounded_only && !grid.include_unbounded {
        return Err(Error::EmptyGrid("window grid is empty".into()));
    }
    let mus = grid.panel.mus(mu_mode, econ.regular_capacity);
    let k_max = grid.windows.k_max;
    let trace = two_phase(&grid.panel, &mus, extra, |lambda, mu| {
        let omega = overtime_cost(mu, econ)?;
        let mut best: Option<CapacityPoint> = None;
        let mut offer = |p: CapacityPoint| {
            if best.as_ref().is_none_or(|b| better(&p, b)) {
                best = Some(p);
            }
        };
        if !grid.unbounded_only {
            let ladder = WindowLadder::new(law, lambda, mu, k_max)?;
            let q = showup.position_vector(k_max, mu, opts.index)?;
            let masses = ladder.masses(&q)?;
            for k in grid.windows.points() {
                let r = reward_from_masses(&masses[k - 1], lambda, mu, econ, opts.convention)?;
                offer(CapacityPoint {
                    lambda,
                    mu,
                    k: Capacity::Finite(k),
                    objective: r.total - omega,
                });
            }
        }
        if grid.include_unbounded && lambda < mu {
            offer(CapacityPoint {
                lambda,
                mu,
                k: Capacity::Unbounded,
                objective: infinite_objective(
                    law,
                    lambda,
                    mu,
                    econ,
                    showup,
                    opts,
                    truncation_tolerance,
                )?,
            });
        }
        best.ok_or_else(|| Error::EmptyGrid("no feasible window".into()))
    })?;
    let best = argmax(&trace)?;
    Ok(CapacitySearchResult {
        law,
        mode: CapacityMode::Joint,
        lambda_star: best.lambda,
        mu_star: best.mu,
        k_star: best.k,
        objective: best.objective,
        trace,
    })
}

/// Joint optimum against the sequential procedure (panel first, then window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointComparison {
    pub sequential: EfficiencyReport,
    pub sequential_objective: f64,
    pub joint: CapacitySearchResult,
    /// `100 (T_joint - T_sequential) / T_sequential`.
    pub gain_percent: f64,
}

pub fn joint_vs_sequential(
    law: ServiceLaw,
    mu_mode: MuMode,
    econ: &EconomicParams,
    showup: &ShowupModel,
    grid: &JointGrid,
    window_opts: &WindowSearchOptions,
) -> Result<JointComparison> {
    let opts = window_opts.reward;
    let tol = window_opts.truncation_tolerance;
    let panel = optimal_panel(law, mu_mode, econ, showup, &grid.panel, opts, tol)?;
    let wopts = WindowSearchOptions {
        grid: grid.windows,
        ..*window_opts
    };
    let sequential = levers_efficiency_report(&panel, econ, showup, &wopts)?;
    let seq = sequential.window.t_at_k_star;
    let joint = joint_optimal(
        law,
        mu_mode,
        econ,
        showup,
        grid,
        opts,
        tol,
        &[(panel.lambda_star, panel.mu_star)],
    )?;
    if !(seq > 0.0) {
        return Err(domain(format!(
            "sequential objective {seq} is not positive"
        )));
    }
    let gain_percent = 100.0 * (joint.objective - seq) / seq;
    Ok(JointComparison {
        sequential,
        sequential_objective: seq,
        joint,
        gain_percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::showup::{DelayMap, ShowupFamily};

    fn small_grid() -> PanelGrid {
        PanelGrid {
            lambda_min: 17.0,
            lambda_coarse_step: 0.1,
            lambda_fine_step: 0.01,
            mu_span: 1.0,
            mu_step: 0.5,
            ..Default::default()
        }
    }

    fn kopach(p: f64) -> ShowupModel {
        ShowupModel::new(ShowupFamily::kopach(p), DelayMap::SlotsOverMu)
    }

    #[test]
    fn grid_points_are_clean() {
        let g = PanelGrid::default();
        let l = g.coarse_lambdas(20.0);
        assert_eq!(l.first(), Some(&10.0));
        assert_eq!(l.last(), Some(&19.99));
        assert_eq!(l.len(), 1000);
        assert_eq!(g.mus(MuMode::Optimize, 20.0).len(), 51);
        assert_eq!(g.mus(MuMode::Fixed, 20.0), vec![20.0]);
    }

    #[test]
    fn full_showup_takes_largest_lambda() {
        let always = ShowupModel::new(ShowupFamily::always(), DelayMap::SlotsOverMu);
        let r = optimal_panel(
            ServiceLaw::Exponential,
            MuMode::Fixed,
            &EconomicParams::new(0.0, 0.0),
            &always,
            &small_grid(),
            Default::default(),
            1e-12,
        )
        .unwrap();
        assert!((r.lambda_star - 19.99).abs() < 1e-9, "{}", r.lambda_star);
        assert!(r.trace.iter().all(|p| p.objective <= r.objective));
    }

    #[test]
    fn steep_overtime_keeps_regular_capacity() {
        let econ = EconomicParams::new(0.0, 0.0).with_overtime(2.0, 20.0);
        let r = optimal_panel(
            ServiceLaw::Exponential,
            MuMode::Optimize,
            &econ,
            &kopach(0.2),
            &small_grid(),
            Default::default(),
            1e-12,
        )
        .unwrap();
        assert_eq!(r.mu_star, 20.0);
        assert!(r.lambda_star < r.mu_star);
    }

    #[test]
    fn unbounded_only_joint_is_the_panel() {
        let econ = EconomicParams::new(0.0, 0.0).with_overtime(0.2, 20.0);
        for law in [ServiceLaw::Exponential, ServiceLaw::Deterministic] {
            let panel = optimal_panel(
                law,
                MuMode::Optimize,
                &econ,
                &kopach(0.4),
                &small_grid(),
                Default::default(),
                1e-12,
            )
            .unwrap();
            let grid = JointGrid {
                panel: small_grid(),
                unbounded_only: true,
                ..Default::default()
            };
            let joint = joint_optimal(
                law,
                MuMode::Optimize,
                &econ,
                &kopach(0.4),
                &grid,
                Default::default(),
                1e-12,
                &[],
            )
            .unwrap();
            assert_eq!(joint.lambda_star, panel.lambda_star);
            assert_eq!(joint.mu_star, panel.mu_star);
            assert_eq!(joint.objective, panel.objective);
            assert_eq!(joint.k_star, Capacity::Unbounded);
        }
    }

    #[test]
    fn joint_dominates_sequential() {
        let econ = EconomicParams::new(1.5, 0.0).with_overtime(0.2, 20.0);
        let grid = JointGrid {
            panel: small_grid(),
            windows: WindowGrid::new(1, 600, 1).unwrap(),
            ..Default::default()
        };
        let c = joint_vs_sequential(
            ServiceLaw::Exponential,
            MuMode::Optimize,
            &econ,
            &kopach(0.6),
            &grid,
            &WindowSearchOptions::default(),
        )
        .unwrap();
        assert!(c.gain_percent >= 0.0, "{}", c.gain_percent);
        assert!(c.sequential.service_level > 0.0 && c.sequential.service_level <= 1.0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let grid = PanelGrid {
            lambda_min: 30.0,
            ..small_grid()
        };
        let err = optimal_panel(
            ServiceLaw::Exponential,
            MuMode::Fixed,
            &EconomicParams::new(0.0, 0.0),
            &kopach(0.2),
            &grid,
            Default::default(),
            1e-12,
        )
        .unwrap_err();
        assert_eq!(err.code(), "empty-grid");
    }
}
