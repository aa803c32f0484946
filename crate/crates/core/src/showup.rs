//! Delay-dependent show-up probability functions.
//!
//! Three families are supported:
//!
//! - **Kopach**: `q(d) = 1 - p * (1 - h * exp(-c * d))` with `h = 0.5`,
//!   `c = 0.017` per day by default. `p` is the estimated no-show rate.
//! - **Pure exponential**: `q(d) = h * exp(-c * d)`, the variant that drops
//!   the `1 - p(...)` wrapper and therefore overstates no-shows.
//! - **Saturating exponential**: `q(d) = q_min + (q_max - q_min) * exp(-c * d)`,
//!   a configurable family used for show-up curves that are only known by
//!   their qualitative shape.
//!
//! Queue positions are converted to delays in days by a [`DelayMap`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Default zero-delay factor `h` in the Kopach and pure-exponential curves.
pub const KOPACH_HALF: f64 = 0.5;
/// Default decay rate, per day.
pub const KOPACH_DECAY: f64 = 0.017;

fn check_probability(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name} = {x} is not a probability")));
    }
    Ok(())
}

fn check_delay(d: f64) -> Result<()> {
    if !(d >= 0.0) {
        return Err(domain(format!("delay {d} must be >= 0")));
    }
    Ok(())
}

fn check_decay(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("decay coefficient {c} must be > 0")));
    }
    Ok(())
}

/// Kopach show-up probability for no-show rate `p` at delay `d` days.
pub fn showup_kopach(p: f64, d: f64) -> Result<f64> {
    kopach_general(p, KOPACH_HALF, KOPACH_DECAY, d)
}

fn kopach_general(p: f64, half: f64, decay: f64, d: f64) -> Result<f64> {
    check_probability("no-show rate", p)?;
    check_probability("zero-delay factor", half)?;
    check_decay(decay)?;
    check_delay(d)?;
    Ok(1.0 - p * (1.0 - half * (-decay * d).exp()))
}

/// Pure exponential show-up probability `0.5 * exp(-0.017 d)`.
pub fn showup_pure_exponential(d: f64) -> Result<f64> {
    pure_exponential_general(KOPACH_HALF, KOPACH_DECAY, d)
}

fn pure_exponential_general(scale: f64, decay: f64, d: f64) -> Result<f64> {
    check_probability("scale", scale)?;
    check_decay(decay)?;
    check_delay(d)?;
    Ok(scale * (-decay * d).exp())
}

/// Saturating exponential `q_min + (q_max - q_min) e^{-c d}`.
pub fn showup_saturating(q_min: f64, q_max: f64, c: f64, d: f64) -> Result<f64> {
    check_probability("q_min", q_min)?;
    check_probability("q_max", q_max)?;
    if q_min > q_max {
        return Err(domain(format!("q_min = {q_min} exceeds q_max = {q_max}")));
    }
    check_decay(c)?;
    check_delay(d)?;
    Ok(q_min + (q_max - q_min) * (-c * d).exp())
}

fn default_half() -> f64 {
    KOPACH_HALF
}

fn default_decay() -> f64 {
    KOPACH_DECAY
}

/// Functional form and parameters of a show-up curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ShowupFamily {
    Kopach {
        noshow_p: f64,
        #[serde(default = "default_half")]
        half: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    PureExponential {
        #[serde(default = "default_half")]
        scale: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    Saturating {
        q_min: f64,
        q_max: f64,
        decay: f64,
    },
}

impl ShowupFamily {
    pub fn kopach(noshow_p: f64) -> Self {
        ShowupFamily::Kopach {
            noshow_p,
            half: KOPACH_HALF,
            decay: KOPACH_DECAY,
        }
    }

    pub fn pure_exponential() -> Self {
        ShowupFamily::PureExponential {
            scale: KOPACH_HALF,
            decay: KOPACH_DECAY,
        }
    }

    pub fn saturating(q_min: f64, q_max: f64, decay: f64) -> Self {
        ShowupFamily::Saturating {
            q_min,
            q_max,
            decay,
        }
    }

    /// Everyone shows up regardless of delay.
    pub fn always() -> Self {
        ShowupFamily::saturating(1.0, 1.0, 1.0)
    }

    pub fn label(&self) -> &'static str {
        match self {
            ShowupFamily::Kopach { .. } => "kopach",
            ShowupFamily::PureExponential { .. } => "pure-exponential",
            ShowupFamily::Saturating { .. } => "saturating",
        }
    }

    /// Evaluate at delay `d` days.
    pub fn at_delay(&self, d: f64) -> Result<f64> {
        match *self {
            ShowupFamily::Kopach {
                noshow_p,
                half,
                decay,
            } => kopach_general(noshow_p, half, decay, d),
            ShowupFamily::PureExponential { scale, decay } => {
                pure_exponential_general(scale, decay, d)
            }
            ShowupFamily::Saturating {
                q_min,
                q_max,
                decay,
            } => showup_saturating(q_min, q_max, decay, d),
        }
    }

    /// Check the parameter invariants without evaluating.
    pub fn validate(&self) -> Result<()> {
        self.at_delay(0.0).map(|_| ())
    }
}

/// Conversion from queue position `j` to appointment delay in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DelayMap {
    /// `d = j`: one queue slot is one day of delay.
    #[serde(alias = "slots")]
    SlotsAsDays,
    /// `d = j / mu`: `j` patients ahead at `mu` per day wait `j / mu` days.
    #[default]
    SlotsOverMu,
}

impl DelayMap {
    pub fn delay(self, j: usize, mu: f64) -> f64 {
        match self {
            DelayMap::SlotsAsDays => j as f64,
            DelayMap::SlotsOverMu => j as f64 / mu,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DelayMap::SlotsAsDays => "slots",
            DelayMap::SlotsOverMu => "slots-over-mu",
        }
    }
}

/// Which occupancy an arriving request's show-up probability is read at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PositionIndex {
    /// `q_j` with `j` the number in system seen on arrival.
    #[default]
    ArrivalState,
    /// `q_{j+1}`, the position after admission.
    PostAdmission,
}

impl PositionIndex {
    pub(crate) fn offset(self) -> usize {
        match self {
            PositionIndex::ArrivalState => 0,
            PositionIndex::PostAdmission => 1,
        }
    }
}

/// A show-up curve together with its position-to-delay mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShowupModel {
    #[serde(flatten)]
    pub family: ShowupFamily,
    #[serde(default)]
    pub delay_map: DelayMap,
}

impl ShowupModel {
    pub fn new(family: ShowupFamily, delay_map: DelayMap) -> Self {
        Self { family, delay_map }
    }

    pub fn with_delay_map(&self, delay_map: DelayMap) -> Self {
        Self {
            family: self.family.clone(),
            delay_map,
        }
    }

    /// Show-up probability of a request booked with `j` patients in system.
    pub fn at_position(&self, j: usize, mu: f64) -> Result<f64> {
        if !(mu > 0.0) {
            return Err(domain(format!("service rate {mu} must be > 0")));
        }
        self.family.at_delay(self.delay_map.delay(j, mu))
    }

    /// `q_0 .. q_{len-1}` read under `index`.
    pub fn position_vector(&self, len: usize, mu: f64, index: PositionIndex) -> Result<Vec<f64>> {
        let off = index.offset();
        (0..len).map(|j| self.at_position(j + off, mu)).collect()
    }

    /// Lower bound on the curve over all delays.
    pub fn asymptote(&self) -> f64 {
        match self.family {
            ShowupFamily::Kopach { noshow_p, .. } => 1.0 - noshow_p,
            ShowupFamily::PureExponential { .. } => 0.0,
            ShowupFamily::Saturating { q_min, .. } => q_min,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kopach_examples() {
        assert!((showup_kopach(0.2, 0.0).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(showup_kopach(0.0, 37.0).unwrap(), 1.0);
        assert!((showup_kopach(0.6, 1e6).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn pure_exponential_examples() {
        assert_eq!(showup_pure_exponential(0.0).unwrap(), 0.5);
        assert!(showup_pure_exponential(1e5).unwrap() < 1e-300);
        let half_life = std::f64::consts::LN_2 / 0.017;
        assert!((showup_pure_exponential(half_life).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn saturating_examples() {
        assert!((showup_saturating(0.3, 0.9, 0.1, 0.0).unwrap() - 0.9).abs() < 1e-15);
        for d in [0.0, 1.0, 50.0, 1e4] {
            assert!((showup_saturating(0.7, 0.7, 0.3, d).unwrap() - 0.7).abs() < 1e-15);
        }
        assert!((showup_saturating(0.3, 0.9, 0.1, 1e4).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(showup_kopach(1.2, 0.0).is_err());
        assert!(showup_kopach(0.2, -1.0).is_err());
        assert!(showup_pure_exponential(-0.1).is_err());
        assert!(showup_saturating(0.9, 0.3, 0.1, 0.0).is_err());
        assert!(showup_saturating(0.3, 0.9, 0.0, 0.0).is_err());
        assert!(showup_kopach(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn position_examples() {
        let k2 = ShowupModel::new(ShowupFamily::kopach(0.2), DelayMap::SlotsOverMu);
        assert!((k2.at_position(0, 20.0).unwrap() - 0.9).abs() < 1e-15);
        let pe = ShowupModel::new(ShowupFamily::pure_exponential(), DelayMap::SlotsAsDays);
        assert_eq!(pe.at_position(0, 20.0).unwrap(), 0.5);
        // d = 100 / 20 = 5 days; frozen from a 30-digit evaluation.
        let k4 = ShowupModel::new(ShowupFamily::kopach(0.4), DelayMap::SlotsOverMu);
        assert!((k4.at_position(100, 20.0).unwrap() - 0.783_702_456_880_291_5).abs() < 1e-15);
        assert!(k4.at_position(3, 0.0).is_err());
    }

    #[test]
    fn post_admission_shifts_by_one() {
        let m = ShowupModel::new(ShowupFamily::kopach(0.4), DelayMap::SlotsAsDays);
        let a = m
            .position_vector(5, 20.0, PositionIndex::ArrivalState)
            .unwrap();
        let b = m
            .position_vector(5, 20.0, PositionIndex::PostAdmission)
            .unwrap();
        assert_eq!(&a[1..], &b[..4]);
    }

    #[test]
    fn config_round_trip() {
        let m = ShowupModel::new(
            ShowupFamily::saturating(0.5, 0.9, 0.12),
            DelayMap::SlotsAsDays,
        );
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ShowupModel>(&s).unwrap(), m);
        let k: ShowupModel = serde_json::from_str(r#"{"family":"kopach","noshow_p":0.4}"#).unwrap();
        assert_eq!(k.family, ShowupFamily::kopach(0.4));
        assert_eq!(k.delay_map, DelayMap::SlotsOverMu);
    }
}
