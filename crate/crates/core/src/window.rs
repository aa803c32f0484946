//! Optimal booking window search and the efficiency-gain metrics built on it.
//!
//! `T(K)` is evaluated for every grid point from one [`WindowLadder`], so a
//! sweep costs `O(k_max)` regardless of the step. The grid argmax is exact; no
//! unimodality is assumed.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::queue::{Capacity, ServiceLaw, WindowLadder};
use crate::reward::{
    net_reward_infinite, overtime_cost, reward_from_masses, EconomicParams, RewardOptions,
    DEFAULT_TRUNCATION_TOL,
};
use crate::showup::ShowupModel;

/// Candidate windows `k_min, k_min + k_step, ...` up to `k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
}

impl Default for WindowGrid {
    fn default() -> Self {
        Self {
            k_min: 20,
            k_max: 2000,
            k_step: 20,
        }
    }
}

impl WindowGrid {
    pub fn new(k_min: usize, k_max: usize, k_step: usize) -> Result<Self> {
        let g = Self {
            k_min,
            k_max,
            k_step,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_step == 0 || self.k_min == 0 || self.k_max < self.k_min {
            return Err(domain(format!(
                "bad window grid: need k_step >= 1 and k_max >= k_min >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> impl Iterator<Item = usize> {
        (self.k_min..=self.k_max).step_by(self.k_step.max(1))
    }
}

/// What stands in for `T(infinity)` when deciding whether to print "inf".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InfinityReference {
    /// The unbounded queue (needs `lambda < mu`).
    #[default]
    Exact,
    /// A very wide finite window used as a proxy for the unbounded one.
    Cap(usize),
}

/// Tuning knobs for [`optimal_window`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSearchOptions {
    pub grid: WindowGrid,
    /// Relative slack for declaring the optimum unbounded.
    pub infinity_tolerance: f64,
    pub reference: InfinityReference,
    pub reward: RewardOptions,
    pub truncation_tolerance: f64,
}

/// Relative slack below which the reference reward counts as the maximum.
///
/// Table-scale rewards are near 20 and double-precision noise in `T(K)` is
/// about `1e-15` relative, while genuinely finite optima can beat the
/// unbounded window by only `1e-10`.
pub const DEFAULT_INFINITY_TOLERANCE: f64 = 1e-11;

impl Default for WindowSearchOptions {
    fn default() -> Self {
        Self {
            grid: WindowGrid::default(),
            infinity_tolerance: DEFAULT_INFINITY_TOLERANCE,
            reference: InfinityReference::Exact,
            reward: RewardOptions::default(),
            truncation_tolerance: DEFAULT_TRUNCATION_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSearchResult {
    pub law: ServiceLaw,
    pub lambda: f64,
    pub mu: f64,
    pub k_star: Capacity,
    /// `T(K*)`, or the reference reward when `k_star` is unbounded.
    pub t_at_k_star: f64,
    /// Reward of the unbounded window (or of the cap, see `reference`).
    pub t_at_infinity: f64,
    /// Best grid window and its reward, kept even when `k_star` is unbounded.
    pub best_finite: (usize, f64),
    pub reference: InfinityReference,
    /// `(K, T(K))` over the grid, net of any overtime cost.
    pub trace: Vec<(usize, f64)>,
}

impl WindowSearchResult {
    pub fn reward_at(&self, k: usize) -> Option<f64> {
        self.trace
            .binary_search_by_key(&k, |&(kk, _)| kk)
            .ok()
            .map(|i| self.trace[i].1)
    }

    /// `"inf"` or the window size.
    pub fn k_star_label(&self) -> String {
        match self.k_star {
            Capacity::Finite(k) => k.to_string(),
            Capacity::Unbounded => "inf".to_string(),
        }
    }
}

/// Search the grid for the reward-maximizing window `K*`.
///
/// All rewards are net of the overtime cost `omega(mu)`, which is zero for
/// `mu <= M`. The optimum is reported as unbounded when the reference reward
/// is within `infinity_tolerance * |T_ref|` of the grid maximum.
pub fn optimal_window(
    law: ServiceLaw,
    lambda: f64,
    mu: f64,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: &WindowSearchOptions,
) -> Result<WindowSearchResult> {
    opts.grid.validate()?;
    econ.validate()?;
    if !(opts.infinity_tolerance >= 0.0) {
        return Err(domain("infinity tolerance must be >= 0"));
    }
    if opts.reference == InfinityReference::Exact && lambda >= mu {
        return Err(Error::Unstable { lambda, mu });
    }
    let cap = match opts.reference {
        InfinityReference::Cap(0) => return Err(domain("cap must be >= 1")),
        InfinityReference::Cap(n) => n,
        InfinityReference::Exact => 0,
    };
    let omega = overtime_cost(mu, econ)?;
    let ladder_max = opts.grid.k_max.max(cap);
    let ladder = WindowLadder::new(law, lambda, mu, ladder_max)?;
    let q = showup.position_vector(ladder_max, mu, opts.reward.index)?;
    let masses = ladder.masses(&q)?;
    let value = |k: usize| -> Result<f64> {
        let r = reward_from_masses(&masses[k - 1], lambda, mu, econ, opts.reward.convention)?;
        Ok(r.total - omega)
    };

    let trace = opts
        .grid
        .points()
        .map(|k| value(k).map(|t| (k, t)))
        .collect::<Result<Vec<_>>>()?;
    if trace.iter().any(|(_, t)| !t.is_finite()) {
        return Err(Error::Numerical(
            "non-finite reward on the window grid".into(),
        ));
    }
    // Strict comparison keeps the smallest K among ties.
    let best = trace
        .iter()
        .copied()
        .fold(trace[0], |acc, p| if p.1 > acc.1 { p } else { acc });

    let t_inf = match opts.reference {
        InfinityReference::Exact => {
            net_reward_infinite(
                law,
                lambda,
                mu,
                econ,
                showup,
                opts.reward,
                opts.truncation_tolerance,
            )?
            .total
                - omega
        }
        InfinityReference::Cap(n) => value(n)?,
    };
    let unbounded = t_inf >= best.1 - opts.infinity_tolerance * t_inf.abs();
    let (k_star, t_at_k_star) = if unbounded {
        (Capacity::Unbounded, t_inf)
    } else {
        (Capacity::Finite(best.0), best.1)
    };
    Ok(WindowSearchResult {
        law,
        lambda,
        mu,
        k_star,
        t_at_k_star,
        t_at_infinity: t_inf,
        best_finite: best,
        reference: opts.reference,
        trace,
    })
}

/// Percent reward improvement of `K*` over the unbounded window.
pub fn efficiency_gain_vs_infinite(result: &WindowSearchResult) -> Result<f64> {
    if !(result.t_at_infinity > 0.0) {
        return Err(domain(format!(
            "gain undefined for T(inf) = {} <= 0",
            result.t_at_infinity
        )));
    }
    match result.k_star {
        Capacity::Unbounded => Ok(0.0),
        Capacity::Finite(_) => {
            Ok(100.0 * (result.t_at_k_star - result.t_at_infinity) / result.t_at_infinity)
        }
    }
}

/// How the M/D versus M/M window comparison is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossForm {
    /// `(T_D(K*_D) - T_M(K*_M)) / T_D(K*_D)`: each model at its own optimum.
    #[default]
    CrossModel,
    /// `(T_D(K*_D) - T_D(K*_M)) / T_D(K*_D)`: the M/M window run in the M/D system.
    SameModel,
    /// `(T_D(K*_D) - T_M(K*_M)) / K*_D`, the printed normalization.
    LiteralWindow,
}

/// Percent reward loss from planning with M/M/1/K instead of M/D/1/K.
pub fn efficiency_gain_md_vs_mm(
    md: &WindowSearchResult,
    mm: &WindowSearchResult,
    form: LossForm,
) -> Result<f64> {
    if md.law != ServiceLaw::Deterministic || mm.law != ServiceLaw::Exponential {
        return Err(domain("expected an M/D result and an M/M result"));
    }
    let (Capacity::Finite(kd), Capacity::Finite(km)) = (md.k_star, mm.k_star) else {
        return Err(Error::UndefinedComparison(
            "both optimal windows must be finite".into(),
        ));
    };
    let td = md.t_at_k_star;
    match form {
        LossForm::CrossModel => Ok(100.0 * (td - mm.t_at_k_star) / td),
        LossForm::SameModel => {
            let t = md
                .reward_at(km)
                .ok_or_else(|| domain(format!("window {km} not on the M/D grid")))?;
            Ok(100.0 * (td - t) / td)
        }
        LossForm::LiteralWindow => Ok(100.0 * (td - mm.t_at_k_star) / kd as f64),
    }
}

/// Match rate and mean loss across paired M/M and M/D searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub cells: usize,
    /// Cells whose optima agree, unbounded matching unbounded.
    pub matches: usize,
    pub match_rate_percent: f64,
    /// Non-matching cells where both optima are finite.
    pub loss_cells: usize,
    pub mean_loss_percent: f64,
    /// Non-matching cells including unbounded optima, valued at the reference.
    pub loss_cells_with_reference: usize,
    pub mean_loss_with_reference_percent: f64,
}

/// Summary statistics over `(M/D, M/M)` result pairs.
pub fn compare_models(
    pairs: &[(&WindowSearchResult, &WindowSearchResult)],
    form: LossForm,
) -> Result<ComparisonSummary> {
    if pairs.is_empty() {
        return Err(Error::EmptyGrid("no cells to compare".into()));
    }
    let mut matches = 0;
    let mut finite_losses = Vec::new();
    let mut all_losses = Vec::new();
    for (md, mm) in pairs {
        if md.k_star == mm.k_star {
            matches += 1;
            continue;
        }
        match efficiency_gain_md_vs_mm(md, mm, form) {
            Ok(v) => {
                finite_losses.push(v);
                all_losses.push(v);
            }
            Err(Error::UndefinedComparison(_)) => {
                let td = md.t_at_k_star;
                all_losses.push(100.0 * (td - mm.t_at_k_star) / td);
            }
            Err(e) => return Err(e),
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(ComparisonSummary {
        cells: pairs.len(),
        matches,
        match_rate_percent: 100.0 * matches as f64 / pairs.len() as f64,
        loss_cells: finite_losses.len(),
        mean_loss_percent: mean(&finite_losses),
        loss_cells_with_reference: all_losses.len(),
        mean_loss_with_reference_percent: mean(&all_losses),
    })
}
