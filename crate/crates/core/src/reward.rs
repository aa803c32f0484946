//! Long-run average net reward of a booking window.
//!
//! For a finite window `K` the reward rate is
//!
//! ```text
//! T(K) = lambda sum_{j<K} Pi_j q_j + mu xi Pi_0 - lambda theta Pi_K
//! ```
//!
//! (visit revenue, ancillary revenue while idle, rejection penalty). The
//! unbounded window drops the rejection term and credits ancillary revenue on
//! the idle fraction `1 - rho`. Overtime `a [(mu - M)^+]^2` is charged only by
//! the capacity optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::queue::{
    md1_distribution, mm1_distribution, ServiceLaw, StationaryDistribution, WindowMasses,
};
use crate::showup::{PositionIndex, ShowupModel};

/// Default truncation tolerance for unbounded-queue series.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Penalty per rejected request.
    pub theta: f64,
    /// Ancillary revenue per unit of idle service capacity.
    pub xi: f64,
    /// Overtime cost coefficient `a`.
    #[serde(default)]
    pub overtime_a: f64,
    /// Regular daily capacity `M`.
    #[serde(default = "default_regular_capacity")]
    pub regular_capacity: f64,
}

fn default_regular_capacity() -> f64 {
    20.0
}

impl Default for EconomicParams {
    fn default() -> Self {
        Self {
            theta: 0.0,
            xi: 0.0,
            overtime_a: 0.0,
            regular_capacity: default_regular_capacity(),
        }
    }
}

impl EconomicParams {
    pub fn new(theta: f64, xi: f64) -> Self {
        Self {
            theta,
            xi,
            ..Self::default()
        }
    }

    pub fn with_overtime(mut self, a: f64, regular_capacity: f64) -> Self {
        self.overtime_a = a;
        self.regular_capacity = regular_capacity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !ok(self.theta) || !ok(self.xi) || !ok(self.overtime_a) {
            return Err(domain("theta, xi and overtime_a must be finite and >= 0"));
        }
        if !(self.regular_capacity > 0.0) {
            return Err(domain("regular capacity must be > 0"));
        }
        Ok(())
    }
}

/// How ancillary revenue is credited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RewardConvention {
    /// Ancillary revenue only while the system is empty.
    #[default]
    Literal,
    /// Ancillary revenue also during the service slot of every no-show,
    /// i.e. an extra `xi lambda sum_{j<K} Pi_j (1 - q_j)`.
    NoShowIdleCredit,
}

/// Options shared by every reward evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RewardOptions {
    #[serde(default)]
    pub convention: RewardConvention,
    #[serde(default)]
    pub index: PositionIndex,
}

/// Reward rate split by source, all per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub visit_revenue: f64,
    pub ancillary_revenue: f64,
    pub rejection_cost: f64,
    pub overtime_cost: f64,
    pub total: f64,
    /// `Pi_0`, probability the system is empty.
    pub empty_prob: f64,
    /// `1 - rho` for unbounded queues, `Pi_0` for finite ones.
    pub idle_fraction: f64,
    /// Bound on the error from truncating an infinite series.
    pub truncation_error: f64,
}

impl RewardBreakdown {
    fn assemble(
        visit: f64,
        ancillary: f64,
        rejection: f64,
        empty_prob: f64,
        idle_fraction: f64,
        truncation_error: f64,
    ) -> Self {
        Self {
            visit_revenue: visit,
            ancillary_revenue: ancillary,
            rejection_cost: rejection,
            overtime_cost: 0.0,
            total: visit + ancillary - rejection,
            empty_prob,
            idle_fraction,
            truncation_error,
        }
    }

    /// Charge an overtime cost and update the total.
    pub fn with_overtime(mut self, cost: f64) -> Self {
        self.overtime_cost = cost;
        self.total = self.visit_revenue + self.ancillary_revenue - self.rejection_cost - cost;
        self
    }
}

/// `T(K)` for a finite-window distribution.
pub fn net_reward(
    dist: &StationaryDistribution,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: RewardOptions,
) -> Result<RewardBreakdown> {
    if !dist.is_finite_capacity() {
        return Err(domain("net_reward needs a finite-window distribution"));
    }
    let k = dist.probs().len() - 1;
    let q = showup.position_vector(k, dist.spec().mu, opts.index)?;
    net_reward_with_q(dist, econ, &q, opts.convention)
}

/// `T(K)` with a precomputed show-up vector `q_0..q_{K-1}` (or longer).
pub(crate) fn net_reward_with_q(
    dist: &StationaryDistribution,
    econ: &EconomicParams,
    q: &[f64],
    convention: RewardConvention,
) -> Result<RewardBreakdown> {
    let masses = WindowMasses::from_distribution(dist, q)?;
    let spec = dist.spec();
    reward_from_masses(&masses, spec.lambda, spec.mu, econ, convention)
}

/// `T(K)` from the occupancy masses of one window.
pub fn reward_from_masses(
    m: &WindowMasses,
    lambda: f64,
    mu: f64,
    econ: &EconomicParams,
    convention: RewardConvention,
) -> Result<RewardBreakdown> {
    econ.validate()?;
    let mut ancillary = mu * econ.xi * m.empty;
    if convention == RewardConvention::NoShowIdleCredit {
        ancillary += econ.xi * lambda * m.no_shows;
    }
    Ok(RewardBreakdown::assemble(
        lambda * m.shows,
        ancillary,
        lambda * econ.theta * m.blocking,
        m.empty,
        m.empty,
        0.0,
    ))
}

/// `T(infinity)`: reward of an unbounded window.
///
/// The visit-revenue series is cut where the occupancy tail drops below
/// `truncation_tolerance`; the omitted tail is bracketed between the curve's
/// asymptote and its value at the cut, its midpoint is added, and half the
/// bracket width is reported as `truncation_error`.
pub fn net_reward_infinite(
    law: ServiceLaw,
    lambda: f64,
    mu: f64,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: RewardOptions,
    truncation_tolerance: f64,
) -> Result<RewardBreakdown> {
    econ.validate()?;
    if lambda == 0.0 && mu > 0.0 {
        let anc = mu * econ.xi;
        return Ok(RewardBreakdown::assemble(0.0, anc, 0.0, 1.0, 1.0, 0.0));
    }
    let dist = match law {
        ServiceLaw::Exponential => mm1_distribution(lambda, mu, truncation_tolerance)?,
        ServiceLaw::Deterministic => md1_distribution(lambda, mu, truncation_tolerance)?,
    };
    reward_from_unbounded(&dist, econ, showup, opts)
}

/// `T(infinity)` from an already computed unbounded distribution.
pub fn reward_from_unbounded(
    dist: &StationaryDistribution,
    econ: &EconomicParams,
    showup: &ShowupModel,
    opts: RewardOptions,
) -> Result<RewardBreakdown> {
    let n = dist
        .truncation_level()
        .ok_or_else(|| domain("expected an unbounded-queue distribution"))?;
    let spec = dist.spec();
    let q = showup.position_vector(n + 2, spec.mu, opts.index)?;
    reward_from_unbounded_with_q(dist, econ, &q, showup.asymptote(), opts.convention)
}

pub(crate) fn reward_from_unbounded_with_q(
    dist: &StationaryDistribution,
    econ: &EconomicParams,
    q: &[f64],
    q_floor: f64,
    convention: RewardConvention,
) -> Result<RewardBreakdown> {
    econ.validate()?;
    let spec = dist.spec();
    let probs = dist.probs();
    let n = probs.len() - 1;
    if q.len() < n + 2 {
        return Err(domain("show-up vector shorter than the truncation level"));
    }
    let (shows, no_shows) = probs.iter().zip(q).fold((0.0, 0.0), |(s, ns), (p, qj)| {
        (s + p * qj, ns + p * (1.0 - qj))
    });
    let tail = dist.tail_mass();
    let q_hi = q[n + 1];
    let q_mid = 0.5 * (q_hi + q_floor);
    let half_width = 0.5 * (q_hi - q_floor).abs() * tail;
    let shows = shows + tail * q_mid;
    let no_shows = no_shows + tail * (1.0 - q_mid);

    let rho = spec.lambda / spec.mu;
    let idle = 1.0 - rho;
    let mut ancillary = spec.mu * econ.xi * idle;
    let mut err = spec.lambda * half_width;
    if convention == RewardConvention::NoShowIdleCredit {
        ancillary += econ.xi * spec.lambda * no_shows;
        err += econ.xi * spec.lambda * half_width;
    }
    Ok(RewardBreakdown::assemble(
        spec.lambda * shows,
        ancillary,
        0.0,
        probs[0],
        idle,
        err,
    ))
}

/// Overtime cost `a [(mu - M)^+]^2`.
pub fn overtime_cost(mu: f64, econ: &EconomicParams) -> Result<f64> {
    econ.validate()?;
    if !(mu > 0.0) {
        return Err(domain(format!("service rate {mu} must be > 0")));
    }
    let over = (mu - econ.regular_capacity).max(0.0);
    Ok(econ.overtime_a * over * over)
}

/// Service level `P(N <= k_star)` in the unbounded system.
pub fn service_level(dist_infinite: &StationaryDistribution, k_star: usize) -> Result<f64> {
    let n = dist_infinite
        .truncation_level()
        .ok_or_else(|| domain("service level needs an unbounded-queue distribution"))?;
    if k_star >= n {
        // Everything not in the cut-off tail.
        return Ok(1.0 - dist_infinite.tail_mass().min(1.0));
    }
    Ok(dist_infinite.mass_up_to(k_star))
}
