//! Stationary occupancy distributions of single-server appointment queues.
//!
//! Finite-capacity queues (`M/M/1/K`, `M/D/1/K`) model a booking window of
//! `K` patients; the unbounded variants (`M/M/1`, `M/D/1`) model a clinic that
//! books arbitrarily far ahead. All distributions are time-stationary.
//!
//! `M/D/1/K` goes through the Markov chain embedded at departure epochs. With
//! `rho = lambda / mu` and `a_n` the Poisson(`rho`) probability of `n` arrivals
//! during one deterministic service, the chain on states `0..K-1` has
//!
//! ```text
//! P[0][j]   = a_j                      j < K-1
//! P[i][j]   = a_{j-i+1}                i >= 1, i-1 <= j < K-1
//! P[i][K-1] = 1 - sum_{j<K-1} P[i][j]
//! ```
//!
//! Departure-epoch probabilities `pi_j` convert to time averages by the
//! M/G/1/K relation (Gross & Harris, *Fundamentals of Queueing Theory*,
//! section on M/G/1/K):
//!
//! ```text
//! Pi_j = pi_j / (pi_0 + rho)           j = 0..K-1
//! Pi_K = 1 - 1 / (pi_0 + rho)
//! ```
//!
//! which makes `lambda (1 - Pi_K) = mu (1 - Pi_0)` hold identically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest window solved with a dense LU factorization; larger windows use
/// the level-crossing recursion of the same chain.
pub const DENSE_SOLVE_LIMIT: usize = 2048;

/// Maximum residual `|pi P - pi|_inf` accepted from an embedded-chain solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Hard stop for unbounded-queue truncation.
const MAX_TRUNCATION: usize = 20_000_000;

const RHO_UNIFORM_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServiceLaw {
    Exponential,
    Deterministic,
}

impl ServiceLaw {
    pub fn label(self) -> &'static str {
        match self {
            ServiceLaw::Exponential => "M/M/1",
            ServiceLaw::Deterministic => "M/D/1",
        }
    }

    /// One-letter code used in file names (`M` or `D`).
    pub fn letter(self) -> char {
        match self {
            ServiceLaw::Exponential => 'M',
            ServiceLaw::Deterministic => 'D',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capacity {
    Finite(usize),
    Unbounded,
}

impl Capacity {
    pub fn finite(self) -> Option<usize> {
        match self {
            Capacity::Finite(k) => Some(k),
            Capacity::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub lambda: f64,
    pub mu: f64,
    pub capacity: Capacity,
    pub law: ServiceLaw,
}

impl QueueSpec {
    pub fn new(lambda: f64, mu: f64, capacity: Capacity, law: ServiceLaw) -> Result<Self> {
        let spec = Self {
            lambda,
            mu,
            capacity,
            law,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn finite(lambda: f64, mu: f64, k: usize, law: ServiceLaw) -> Result<Self> {
        Self::new(lambda, mu, Capacity::Finite(k), law)
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn validate(&self) -> Result<()> {
        check_rates(self.lambda, self.mu)?;
        match self.capacity {
            Capacity::Finite(0) => Err(domain("capacity must be at least 1")),
            Capacity::Unbounded if self.lambda >= self.mu => Err(Error::Unstable {
                lambda: self.lambda,
                mu: self.mu,
            }),
            _ => Ok(()),
        }
    }
}

fn check_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("arrival rate {lambda} must be > 0")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("service rate {mu} must be > 0")));
    }
    Ok(())
}

fn check_stable(lambda: f64, mu: f64) -> Result<()> {
    check_rates(lambda, mu)?;
    if lambda >= mu {
        return Err(Error::Unstable { lambda, mu });
    }
    Ok(())
}

fn check_tolerance(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain(format!(
            "truncation tolerance {tol} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Time-stationary occupancy probabilities `Pi_0..Pi_N`.
///
/// For a finite window `N = K`. For an unbounded queue the vector is cut at
/// `truncation_level` and `tail_mass` bounds the omitted probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
    truncation_level: Option<usize>,
    tail_mass: f64,
    spec: QueueSpec,
}

impl StationaryDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn spec(&self) -> &QueueSpec {
        &self.spec
    }

    pub fn truncation_level(&self) -> Option<usize> {
        self.truncation_level
    }

    /// Probability mass beyond the truncation level (0 for finite windows).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn is_finite_capacity(&self) -> bool {
        self.truncation_level.is_none()
    }

    pub fn empty_prob(&self) -> f64 {
        self.probs[0]
    }

    /// `Pi_K` for a finite window, 0 for an unbounded queue.
    pub fn blocking_prob(&self) -> f64 {
        if self.is_finite_capacity() {
            *self.probs.last().expect("non-empty distribution")
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .sum()
    }

    /// `sum_{j <= k} Pi_j`.
    pub fn mass_up_to(&self, k: usize) -> f64 {
        self.probs.iter().take(k.saturating_add(1)).sum()
    }

    /// `j,prob` rows for debugging.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,prob\n");
        for (j, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{j},{p:.17e}\n"));
        }
        out
    }
}

/// Stationary distribution for any valid spec.
pub fn stationary(spec: &QueueSpec, truncation_tolerance: f64) -> Result<StationaryDistribution> {
    match (spec.law, spec.capacity) {
        (ServiceLaw::Exponential, Capacity::Finite(_)) => mm1k_distribution(spec),
        (ServiceLaw::Deterministic, Capacity::Finite(_)) => md1k_distribution(spec),
        (ServiceLaw::Exponential, Capacity::Unbounded) => {
            mm1_distribution(spec.lambda, spec.mu, truncation_tolerance)
        }
        (ServiceLaw::Deterministic, Capacity::Unbounded) => {
            md1_distribution(spec.lambda, spec.mu, truncation_tolerance)
        }
    }
}

fn finite_k(spec: &QueueSpec, law: ServiceLaw) -> Result<usize> {
    spec.validate()?;
    if spec.law != law {
        return Err(domain(format!("expected {} service", law.label())));
    }
    spec.capacity
        .finite()
        .ok_or_else(|| domain("finite capacity required"))
}

/// Birth-death weights `rho^j`, `j = 0..=k`, scaled to avoid overflow.
fn geometric_weights(rho: f64, k: usize) -> Vec<f64> {
    if (rho - 1.0).abs() < RHO_UNIFORM_BAND {
        vec![1.0; k + 1]
    } else if rho < 1.0 {
        (0..=k).map(|j| rho.powi(j as i32)).collect()
    } else {
        let inv = 1.0 / rho;
        (0..=k).map(|j| inv.powi((k - j) as i32)).collect()
    }
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// `M/M/1/K`: `Pi_j = (1 - rho) rho^j / (1 - rho^{K+1})`, uniform at `rho = 1`.
pub fn mm1k_distribution(spec: &QueueSpec) -> Result<StationaryDistribution> {
    let k = finite_k(spec, ServiceLaw::Exponential)?;
    Ok(StationaryDistribution {
        probs: normalized(geometric_weights(spec.rho(), k)),
        truncation_level: None,
        tail_mass: 0.0,
        spec: *spec,
    })
}

/// `M/M/1`: geometric `Pi_j = (1 - rho) rho^j`, cut where the tail `rho^{N+1}`
/// drops below `truncation_tolerance`.
pub fn mm1_distribution(
    lambda: f64,
    mu: f64,
    truncation_tolerance: f64,
) -> Result<StationaryDistribution> {
    check_stable(lambda, mu)?;
    check_tolerance(truncation_tolerance)?;
    let rho = lambda / mu;
    // Smallest N with rho^{N+1} < tol.
    let n = ((truncation_tolerance.ln() / rho.ln()).floor() as usize).min(MAX_TRUNCATION);
    let probs: Vec<f64> = (0..=n).map(|j| (1.0 - rho) * rho.powi(j as i32)).collect();
    let tail_mass = rho.powi(n as i32 + 1);
    if tail_mass >= truncation_tolerance {
        return Err(Error::Numerical(format!(
            "M/M/1 tail {tail_mass:e} not below {truncation_tolerance:e} within {MAX_TRUNCATION} states"
        )));
    }
    Ok(StationaryDistribution {
        probs,
        truncation_level: Some(n),
        tail_mass,
        spec: QueueSpec {
            lambda,
            mu,
            capacity: Capacity::Unbounded,
            law: ServiceLaw::Exponential,
        },
    })
}

/// Poisson arrival counts during one deterministic service of length `1/mu`.
#[derive(Debug, Clone)]
pub struct PoissonCounts {
    /// `a_n = e^{-rho} rho^n / n!`
    pmf: Vec<f64>,
    /// `tail[n] = P(A >= n)`
    tail: Vec<f64>,
}

impl PoissonCounts {
    /// Terms `0..=n_max`; `a_n` is computed in log space.
    pub fn new(rho: f64, n_max: usize) -> Self {
        // Beyond `hi` every term is below ~1e-300.
        let hi = n_max.max((rho + 40.0 * rho.sqrt() + 60.0).ceil() as usize);
        let ln_rho = rho.ln();
        let mut pmf = Vec::with_capacity(hi + 1);
        let mut ln_term = -rho;
        for n in 0..=hi {
            if n > 0 {
                ln_term += ln_rho - (n as f64).ln();
            }
            pmf.push(ln_term.exp());
        }
        let mut tail = vec![0.0; hi + 2];
        for n in (0..=hi).rev() {
            tail[n] = tail[n + 1] + pmf[n];
        }
        tail[0] = 1.0;
        pmf.truncate(n_max + 1);
        tail.truncate(n_max + 2);
        Self { pmf, tail }
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    /// `P(A >= n)`.
    pub fn tail(&self, n: usize) -> f64 {
        self.tail.get(n).copied().unwrap_or(0.0)
    }

    /// Index past which `P(A >= n)` is exactly zero in double precision.
    fn support(&self) -> usize {
        self.tail
            .iter()
            .rposition(|&t| t > 0.0)
            .map_or(0, |i| i + 1)
    }
}

/// Unnormalized embedded-chain probabilities `u_0 = 1, u_1, ..., u_n` of the
/// M/D/1 departure chain, from the level-crossing balance
///
/// ```text
/// u_{i+1} a_0 = u_0 P(A >= i+1) + sum_{k=1}^{i} u_k P(A >= i-k+2)
/// ```
///
/// All terms are non-negative, so the recursion does not cancel. The first
/// `K` values are proportional to the `M/D/1/K` embedded probabilities.
fn md1_embedded_weights(arrivals: &PoissonCounts, n: usize) -> Result<Vec<f64>> {
    let a0 = arrivals.pmf(0);
    let support = arrivals.support();
    let mut u = Vec::with_capacity(n + 1);
    u.push(1.0);
    for i in 0..n {
        let mut s = u[0] * arrivals.tail(i + 1);
        // k ranges over 1..=i with i-k+2 < support.
        let k_lo = (i + 2).saturating_sub(support).max(1);
        for k in k_lo..=i {
            s += u[k] * arrivals.tail(i - k + 2);
        }
        let next = s / a0;
        if !next.is_finite() {
            return Err(Error::Numerical(format!(
                "embedded weights overflow at state {}",
                i + 1
            )));
        }
        u.push(next);
        if next > 1e250 {
            u.iter_mut().for_each(|x| *x *= 1e-250);
        }
    }
    Ok(u)
}

/// Time-stationary M/D/1/K probabilities from normalized embedded ones.
fn md1k_from_embedded(pi: &[f64], rho: f64) -> Vec<f64> {
    let denom = pi[0] + rho;
    let mut probs: Vec<f64> = pi.iter().map(|p| p / denom).collect();
    probs.push((1.0 - 1.0 / denom).max(0.0));
    probs
}

/// Dense transition matrix of the M/D/1/K departure chain.
fn md1k_transition_matrix(arrivals: &PoissonCounts, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        let lo = i.saturating_sub(1);
        if j + 1 < k {
            if j >= lo {
                // From 0 and 1 the next departure leaves exactly the arrivals.
                let n = if i == 0 { j } else { j + 1 - i };
                arrivals.pmf(n)
            } else {
                0.0
            }
        } else {
            // Jumps to K-1 or beyond are capped at K-1.
            let n = if i == 0 { k - 1 } else { k - i };
            arrivals.tail(n)
        }
    })
}

/// `max_j |(pi P)_j - pi_j|` using the band structure of `P`.
fn md1k_residual(arrivals: &PoissonCounts, pi: &[f64]) -> f64 {
    let k = pi.len();
    let support = arrivals.support();
    let mut worst: f64 = 0.0;
    for j in 0..k {
        let mut s = 0.0;
        if j + 1 < k {
            s += pi[0] * arrivals.pmf(j);
            let i_lo = (j + 2).saturating_sub(support).max(1);
            for (i, p) in pi.iter().enumerate().take(j + 2).skip(i_lo) {
                s += p * arrivals.pmf(j + 1 - i);
            }
        } else {
            s += pi[0] * arrivals.tail(k - 1);
            for (i, p) in pi.iter().enumerate().skip(1) {
                s += p * arrivals.tail(k - i);
            }
        }
        worst = worst.max((s - pi[j]).abs());
    }
    worst
}

/// Solve `pi = pi P`, `sum pi = 1` by dense LU.
fn solve_embedded_dense(arrivals: &PoissonCounts, k: usize) -> Result<Vec<f64>> {
    let p = md1k_transition_matrix(arrivals, k);
    let mut a = p.transpose() - DMatrix::<f64>::identity(k, k);
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular embedded-chain system".into()))?;
    Ok(x.iter()
        .map(|v| if *v < 0.0 && *v > -1e-13 { 0.0 } else { *v })
        .collect())
}

/// `M/D/1/K` time-stationary distribution via the embedded departure chain.
///
/// Windows up to [`DENSE_SOLVE_LIMIT`] are solved densely; every solve is
/// accepted only if `|pi P - pi|_inf <= 1e-10`.
pub fn md1k_distribution(spec: &QueueSpec) -> Result<StationaryDistribution> {
    let k = finite_k(spec, ServiceLaw::Deterministic)?;
    let rho = spec.rho();
    let arrivals = PoissonCounts::new(rho, k + 1);
    let pi = if k <= DENSE_SOLVE_LIMIT {
        solve_embedded_dense(&arrivals, k)?
    } else {
        normalized(md1_embedded_weights(&arrivals, k - 1)?)
    };
    if pi.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::Numerical("negative embedded probability".into()));
    }
    let residual = md1k_residual(&arrivals, &pi);
    if !(residual <= SOLVE_RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "embedded-chain residual {residual:e} exceeds {SOLVE_RESIDUAL_TOL:e}"
        )));
    }
    Ok(StationaryDistribution {
        probs: md1k_from_embedded(&pi, rho),
        truncation_level: None,
        tail_mass: 0.0,
        spec: *spec,
    })
}

/// `M/D/1` stationary occupancy.
///
/// For M/G/1 the departure-epoch and time-average distributions coincide and
/// `Pi_0 = 1 - rho`, so `Pi_j = (1 - rho) u_j` with `u` from the embedded
/// recursion. The series is cut once the geometric tail estimate
/// `Pi_N r / (1 - r)`, `r = Pi_N / Pi_{N-1}`, and the missing mass are both
/// below `truncation_tolerance`.
pub fn md1_distribution(
    lambda: f64,
    mu: f64,
    truncation_tolerance: f64,
) -> Result<StationaryDistribution> {
    check_stable(lambda, mu)?;
    check_tolerance(truncation_tolerance)?;
    let rho = lambda / mu;
    let arrivals = PoissonCounts::new(rho, 64);
    let support = arrivals.support();
    let a0 = arrivals.pmf(0);

    let mut u: Vec<f64> = vec![1.0];
    let mut mass = 1.0 - rho;
    let mut tail_est = f64::INFINITY;
    while u.len() < MAX_TRUNCATION {
        let i = u.len() - 1;
        let mut s = u[0] * arrivals.tail(i + 1);
        let k_lo = (i + 2).saturating_sub(support).max(1);
        for k in k_lo..=i {
            s += u[k] * arrivals.tail(i - k + 2);
        }
        let next = s / a0;
        u.push(next);
        let p_next = (1.0 - rho) * next;
        mass += p_next;
        let p_prev = (1.0 - rho) * u[i];
        if p_prev > 0.0 && i > 0 {
            let r = p_next / p_prev;
            tail_est = if r < 1.0 {
                p_next * r / (1.0 - r)
            } else {
                f64::INFINITY
            };
        }
        if p_next == 0.0 {
            tail_est = 0.0;
        }
        if tail_est < truncation_tolerance && 1.0 - mass < truncation_tolerance.max(1e-13) {
            break;
        }
    }
    if !(tail_est < truncation_tolerance) {
        return Err(Error::Numerical(format!(
            "M/D/1 series did not converge within {MAX_TRUNCATION} states"
        )));
    }
    let n = u.len() - 1;
    Ok(StationaryDistribution {
        probs: u.iter().map(|x| (1.0 - rho) * x).collect(),
        truncation_level: Some(n),
        tail_mass: tail_est,
        spec: QueueSpec {
            lambda,
            mu,
            capacity: Capacity::Unbounded,
            law: ServiceLaw::Deterministic,
        },
    })
}

/// Occupancy masses of one finite window that the reward needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMasses {
    pub k: usize,
    /// `sum_{j<K} Pi_j q_j`
    pub shows: f64,
    /// `sum_{j<K} Pi_j (1 - q_j)`
    pub no_shows: f64,
    /// `Pi_0`
    pub empty: f64,
    /// `Pi_K`
    pub blocking: f64,
}

impl WindowMasses {
    /// Masses read off an explicit finite-window distribution.
    pub fn from_distribution(dist: &StationaryDistribution, q: &[f64]) -> Result<Self> {
        if !dist.is_finite_capacity() {
            return Err(domain("finite-window distribution required"));
        }
        let probs = dist.probs();
        let k = probs.len() - 1;
        if q.len() < k {
            return Err(domain("show-up vector shorter than the window"));
        }
        let (shows, no_shows) = probs[..k]
            .iter()
            .zip(q)
            .fold((0.0, 0.0), |(s, n), (p, qj)| {
                (s + p * qj, n + p * (1.0 - qj))
            });
        Ok(Self {
            k,
            shows,
            no_shows,
            empty: probs[0],
            blocking: probs[k],
        })
    }
}

/// All finite-window distributions `K = 1..=k_max` for one `(law, lambda, mu)`.
///
/// Both finite queues are truncations of a single weight sequence: M/M/1/K is
/// `rho^j` renormalized on `0..=K`, and the M/D/1/K embedded probabilities are
/// the M/D/1 recursion weights renormalized on `0..K`. Building the ladder
/// once makes a full window sweep cost `O(k_max)` with prefix sums.
#[derive(Debug, Clone)]
pub struct WindowLadder {
    law: ServiceLaw,
    lambda: f64,
    mu: f64,
    k_max: usize,
    /// M/M/1: `rho^j` for `j = 0..=k_max`; M/D/1: `u_j` for `j = 0..k_max`.
    weights: Vec<f64>,
}

fn rescaled_powers(rho: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    let mut x = 1.0;
    for _ in 0..=n {
        w.push(x);
        x *= rho;
        if x > 1e250 {
            w.iter_mut().for_each(|v| *v *= 1e-250);
            x *= 1e-250;
        }
    }
    w
}

impl WindowLadder {
    pub fn new(law: ServiceLaw, lambda: f64, mu: f64, k_max: usize) -> Result<Self> {
        check_rates(lambda, mu)?;
        if k_max == 0 {
            return Err(domain("k_max must be at least 1"));
        }
        let rho = lambda / mu;
        let weights = match law {
            ServiceLaw::Exponential => rescaled_powers(rho, k_max),
            ServiceLaw::Deterministic => {
                let arrivals = PoissonCounts::new(rho, k_max + 1);
                md1_embedded_weights(&arrivals, k_max - 1)?
            }
        };
        Ok(Self {
            law,
            lambda,
            mu,
            k_max,
            weights,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn law(&self) -> ServiceLaw {
        self.law
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn spec(&self, k: usize) -> QueueSpec {
        QueueSpec {
            lambda: self.lambda,
            mu: self.mu,
            capacity: Capacity::Finite(k),
            law: self.law,
        }
    }

    pub fn distribution(&self, k: usize) -> Result<StationaryDistribution> {
        if k == 0 || k > self.k_max {
            return Err(domain(format!("window {k} outside ladder range")));
        }
        let rho = self.lambda / self.mu;
        let probs = match self.law {
            ServiceLaw::Exponential => {
                if (rho - 1.0).abs() < RHO_UNIFORM_BAND {
                    normalized(vec![1.0; k + 1])
                } else {
                    normalized(self.weights[..=k].to_vec())
                }
            }
            ServiceLaw::Deterministic => {
                md1k_from_embedded(&normalized(self.weights[..k].to_vec()), rho)
            }
        };
        Ok(StationaryDistribution {
            probs,
            truncation_level: None,
            tail_mass: 0.0,
            spec: self.spec(k),
        })
    }

    /// [`WindowMasses`] for every `K = 1..=k_max` using prefix sums.
    ///
    /// `q` must hold at least `k_max` show-up probabilities.
    pub fn masses(&self, q: &[f64]) -> Result<Vec<WindowMasses>> {
        if q.len() < self.k_max {
            return Err(domain("show-up vector shorter than the ladder"));
        }
        let rho = self.lambda / self.mu;
        let uniform = self.law == ServiceLaw::Exponential && (rho - 1.0).abs() < RHO_UNIFORM_BAND;
        let w = |j: usize| if uniform { 1.0 } else { self.weights[j] };
        let w0 = w(0);
        let mut out = Vec::with_capacity(self.k_max);
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 1..=self.k_max {
            let wj = w(k - 1);
            s += wj;
            sq += wj * q[k - 1];
            let (norm, blocking) = match self.law {
                ServiceLaw::Exponential => {
                    let z = s + w(k);
                    (z, w(k) / z)
                }
                ServiceLaw::Deterministic => {
                    // Pi_j = u_j / (u_0 + rho U), Pi_K = 1 - U / (u_0 + rho U).
                    let z = w0 + rho * s;
                    (z, (1.0 - s / z).max(0.0))
                }
            };
            out.push(WindowMasses {
                k,
                shows: sq / norm,
                no_shows: (s - sq) / norm,
                empty: w0 / norm,
                blocking,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn mm1k_uniform_at_rho_one() {
        let spec = QueueSpec::finite(20.0, 20.0, 4, ServiceLaw::Exponential).unwrap();
        let d = mm1k_distribution(&spec).unwrap();
        assert!(close(d.probs(), &[0.2; 5], 1e-15));
    }

    #[test]
    fn mm1k_two_state() {
        let spec = QueueSpec::finite(10.0, 20.0, 1, ServiceLaw::Exponential).unwrap();
        let d = mm1k_distribution(&spec).unwrap();
        assert!(close(d.probs(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn mm1k_overloaded_large_window_is_finite() {
        let spec = QueueSpec::finite(40.0, 20.0, 5000, ServiceLaw::Exponential).unwrap();
        let d = mm1k_distribution(&spec).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!((d.blocking_prob() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mm1_geometric() {
        let d = mm1_distribution(10.0, 20.0, 1e-12).unwrap();
        assert_eq!(d.probs()[0], 0.5);
        assert_eq!(d.probs()[1], 0.25);
        assert!(d.tail_mass() < 1e-12);
        let d = mm1_distribution(18.0, 20.0, 1e-12).unwrap();
        assert!(d.tail_mass() < 1e-12);
        assert!((d.total() + d.tail_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mm1_mean_near_saturation() {
        let d = mm1_distribution(19.99, 20.0, 1e-14).unwrap();
        let exact = 0.9995 / 0.0005;
        assert!((d.mean() - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn unstable_is_rejected() {
        assert!(matches!(
            mm1_distribution(20.0, 20.0, 1e-12),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            md1_distribution(21.0, 20.0, 1e-12),
            Err(Error::Unstable { .. })
        ));
        assert!(QueueSpec::new(20.0, 20.0, Capacity::Unbounded, ServiceLaw::Exponential).is_err());
    }

    #[test]
    fn nonpositive_rates_are_rejected() {
        assert!(QueueSpec::finite(0.0, 20.0, 3, ServiceLaw::Deterministic).is_err());
        assert!(QueueSpec::finite(1.0, -2.0, 3, ServiceLaw::Exponential).is_err());
        assert!(QueueSpec::finite(1.0, 2.0, 0, ServiceLaw::Exponential).is_err());
    }

    #[test]
    fn wrong_law_is_rejected() {
        let spec = QueueSpec::finite(1.0, 2.0, 3, ServiceLaw::Exponential).unwrap();
        assert!(md1k_distribution(&spec).is_err());
    }

    #[test]
    fn poisson_tail_is_complement() {
        let a = PoissonCounts::new(0.995, 40);
        let mut cum = 0.0;
        for n in 0..20 {
            assert!((a.tail(n) - (1.0 - cum)).abs() < 1e-15);
            cum += a.pmf(n);
        }
    }

    #[test]
    fn md1k_empty_limit() {
        let spec = QueueSpec::finite(1e-9, 20.0, 5, ServiceLaw::Deterministic).unwrap();
        let d = md1k_distribution(&spec).unwrap();
        assert!((d.probs()[0] - 1.0).abs() < 1e-9);
        assert!(d.probs()[1..].iter().all(|p| *p < 1e-9));
    }

    #[test]
    fn md1k_single_slot() {
        // K = 1: pi_0 = 1, so Pi_0 = 1/(1+rho).
        let spec = QueueSpec::finite(10.0, 20.0, 1, ServiceLaw::Deterministic).unwrap();
        let d = md1k_distribution(&spec).unwrap();
        assert!(close(d.probs(), &[1.0 / 1.5, 0.5 / 1.5], 1e-15));
    }

    #[test]
    fn md1k_flow_conservation() {
        let spec = QueueSpec::finite(19.9, 20.0, 60, ServiceLaw::Deterministic).unwrap();
        let d = md1k_distribution(&spec).unwrap();
        let lhs = 19.9 * (1.0 - d.blocking_prob());
        let rhs = 20.0 * (1.0 - d.empty_prob());
        assert!((lhs - rhs).abs() < 1e-9);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn md1k_large_window_uses_recursion() {
        let spec = QueueSpec::finite(
            18.0,
            20.0,
            DENSE_SOLVE_LIMIT + 10,
            ServiceLaw::Deterministic,
        )
        .unwrap();
        let d = md1k_distribution(&spec).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn md1_pollaczek_khinchine_half_load() {
        let d = md1_distribution(10.0, 20.0, 1e-14).unwrap();
        assert!((d.mean() - 0.75).abs() < 1e-8);
        assert_eq!(d.probs()[0], 0.5);
    }

    #[test]
    fn md1_empty_limit() {
        let d = md1_distribution(1e-9, 20.0, 1e-12).unwrap();
        assert!((d.probs()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ladder_matches_direct_solves() {
        for law in [ServiceLaw::Exponential, ServiceLaw::Deterministic] {
            let ladder = WindowLadder::new(law, 19.9, 20.0, 400).unwrap();
            let q: Vec<f64> = (0..400).map(|j| 0.9 - 0.001 * j as f64).collect();
            let masses = ladder.masses(&q).unwrap();
            for k in [1, 2, 7, 60, 400] {
                let spec = QueueSpec::finite(19.9, 20.0, k, law).unwrap();
                let direct = stationary(&spec, 1e-12).unwrap();
                let lad = ladder.distribution(k).unwrap();
                assert!(close(lad.probs(), direct.probs(), 1e-12), "{law:?} K={k}");
                let m = WindowMasses::from_distribution(&lad, &q).unwrap();
                let p = masses[k - 1];
                assert_eq!(p.k, k);
                for (x, y) in [
                    (m.shows, p.shows),
                    (m.no_shows, p.no_shows),
                    (m.empty, p.empty),
                    (m.blocking, p.blocking),
                ] {
                    assert!((x - y).abs() < 1e-12, "{law:?} K={k}: {x} vs {y}");
                }
            }
            assert!(ladder.distribution(0).is_err());
        }
    }

    #[test]
    fn csv_dump() {
        let spec = QueueSpec::finite(10.0, 20.0, 1, ServiceLaw::Exponential).unwrap();
        let csv = mm1k_distribution(&spec).unwrap().to_csv();
        assert!(csv.starts_with("j,prob\n0,6.6666"));
        assert_eq!(csv.lines().count(), 3);
    }
}
