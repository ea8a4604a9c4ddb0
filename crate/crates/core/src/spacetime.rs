//! 1+1D Minkowski kinematics in units with `c = 1`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `|s²|` at or below this is lightlike.
pub const INTERVAL_TOL: f64 = 1e-12;
/// Boosted times closer than this are treated as simultaneous.
pub const SIMULTANEITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SpacetimeError {
    #[error("frame velocity {0} is not below the speed of light")]
    Superluminal(f64),
    #[error("events `{0}` and `{1}` are not spacelike separated")]
    NotSpacelike(String, String),
    #[error("event `{0}` has a non-finite coordinate")]
    NonFinite(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeEvent {
    pub id: String,
    pub t: f64,
    pub x: f64,
}

impl SpacetimeEvent {
    pub fn new<S: Into<String>>(id: S, t: f64, x: f64) -> Self {
        SpacetimeEvent { id: id.into(), t, x }
    }

    /// `Δt² − Δx²` from `self` to `other`.
    pub fn interval_to(&self, other: &SpacetimeEvent) -> f64 {
        let dt = other.t - self.t;
        let dx = other.x - self.x;
        dt * dt - dx * dx
    }
}

/// Velocity of a frame relative to the lab rest frame, as a fraction of `c`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrameVelocity(f64);

impl FrameVelocity {
    pub const REST: FrameVelocity = FrameVelocity(0.0);

    pub fn new(beta: f64) -> Result<Self, SpacetimeError> {
        if beta.is_finite() && beta.abs() < 1.0 {
            Ok(FrameVelocity(beta))
        } else {
            Err(SpacetimeError::Superluminal(beta))
        }
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    pub fn gamma(self) -> f64 {
        1.0 / (1.0 - self.0 * self.0).sqrt()
    }
}

impl TryFrom<f64> for FrameVelocity {
    type Error = SpacetimeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        FrameVelocity::new(value)
    }
}

impl From<FrameVelocity> for f64 {
    fn from(value: FrameVelocity) -> Self {
        value.0
    }
}

/// Coordinates of `e` in the frame moving with velocity `beta`.
pub fn boost(e: &SpacetimeEvent, beta: FrameVelocity) -> SpacetimeEvent {
    let (b, g) = (beta.beta(), beta.gamma());
    SpacetimeEvent {
        id: e.id.clone(),
        t: g * (e.t - b * e.x),
        x: g * (e.x - b * e.t),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Spacelike,
    Timelike,
    Lightlike,
}

pub fn classify_interval(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> IntervalKind {
    let s2 = e1.interval_to(e2);
    if s2 < -INTERVAL_TOL {
        IntervalKind::Spacelike
    } else if s2 > INTERVAL_TOL {
        IntervalKind::Timelike
    } else {
        IntervalKind::Lightlike
    }
}

/// Event ids in boosted time order, plus every adjacent pair whose boosted
/// times fell within [`SIMULTANEITY_TOL`] and were ordered by id instead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventOrder {
    pub ids: Vec<String>,
    pub times: Vec<f64>,
    pub ties: Vec<(String, String)>,
}

impl EventOrder {
    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    /// Whether `a` is processed before `b` in this order.
    pub fn precedes(&self, a: &str, b: &str) -> Option<bool> {
        Some(self.position(a)? < self.position(b)?)
    }
}

/// Sorts events by boosted time; near-ties go by lexicographic id.
pub fn order_events(events: &[SpacetimeEvent], beta: FrameVelocity) -> EventOrder {
    let mut boosted: Vec<SpacetimeEvent> = events.iter().map(|e| boost(e, beta)).collect();
    boosted.sort_by(|a, b| {
        if (a.t - b.t).abs() <= SIMULTANEITY_TOL {
            a.id.cmp(&b.id)
        } else {
            a.t.partial_cmp(&b.t).unwrap_or(Ordering::Equal)
        }
    });
    let ties = boosted
        .windows(2)
        .filter(|w| (w[0].t - w[1].t).abs() <= SIMULTANEITY_TOL)
        .map(|w| (w[0].id.clone(), w[1].id.clone()))
        .collect();
    EventOrder {
        ids: boosted.iter().map(|e| e.id.clone()).collect(),
        times: boosted.iter().map(|e| e.t).collect(),
        ties,
    }
}

/// A frame velocity in which the rest-frame order of a spacelike pair is
/// reversed.
///
/// With `Δ = e2 − e1`, returns `β = ±(|Δt/Δx| + 1)/2`, signed so that
/// `Δt′ = γ(Δt − βΔx)` has the opposite sign of `Δt`. Simultaneous pairs
/// get `β = sign(Δx)/2`, which puts `e2` first.
pub fn reversing_boost(e1: &SpacetimeEvent, e2: &SpacetimeEvent) -> Result<FrameVelocity, SpacetimeError> {
    for e in [e1, e2] {
        if !(e.t.is_finite() && e.x.is_finite()) {
            return Err(SpacetimeError::NonFinite(e.id.clone()));
        }
    }
    if classify_interval(e1, e2) != IntervalKind::Spacelike {
        return Err(SpacetimeError::NotSpacelike(e1.id.clone(), e2.id.clone()));
    }
    let dt = e2.t - e1.t;
    let dx = e2.x - e1.x;
    let time_sign = if dt < 0.0 { -1.0 } else { 1.0 };
    let beta = FrameVelocity::new(time_sign * dx.signum() * ((dt / dx).abs() + 1.0) / 2.0)?;

    let (b1, b2) = (boost(e1, beta), boost(e2, beta));
    let dt_boosted = b2.t - b1.t;
    debug_assert!(if dt == 0.0 { dt_boosted < 0.0 } else { dt_boosted * dt < 0.0 });
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fv(b: f64) -> FrameVelocity {
        FrameVelocity::new(b).unwrap()
    }

    #[test]
    fn zero_boost_is_identity() {
        let e = SpacetimeEvent::new("e", 2.5, 10.0);
        assert_eq!(boost(&e, FrameVelocity::REST), e);
    }

    #[test]
    fn boost_arithmetic() {
        let g = 1.0 / 0.96f64.sqrt();
        let a = boost(&SpacetimeEvent::new("a", 2.5, 10.0), fv(0.2));
        assert_abs_diff_eq!(a.t, g * 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(a.x, g * 9.5, epsilon = 1e-14);
        assert_abs_diff_eq!(a.t, 0.5103, epsilon = 1e-4);
        let b = boost(&SpacetimeEvent::new("b", 2.0, 0.0), fv(0.2));
        assert_abs_diff_eq!(b.t, 2.0 * g, epsilon = 1e-14);
        assert_abs_diff_eq!(b.t, 2.0412, epsilon = 1e-4);
    }

    #[test]
    fn superluminal_frames_are_rejected() {
        assert!(FrameVelocity::new(1.0).is_err());
        assert!(FrameVelocity::new(-1.5).is_err());
        assert!(FrameVelocity::new(f64::NAN).is_err());
        assert!(serde_json::from_str::<FrameVelocity>("1.0").is_err());
    }

    #[test]
    fn interval_classes() {
        let o = SpacetimeEvent::new("o", 0.0, 0.0);
        let s = SpacetimeEvent::new("s", 0.5, 10.0);
        assert_eq!(classify_interval(&o, &s), IntervalKind::Spacelike);
        assert_abs_diff_eq!(o.interval_to(&s), -99.75, epsilon = 1e-12);
        assert_eq!(classify_interval(&o, &SpacetimeEvent::new("t", 1.0, 0.0)), IntervalKind::Timelike);
        assert_eq!(classify_interval(&o, &SpacetimeEvent::new("l", 1.0, 1.0)), IntervalKind::Lightlike);
    }

    #[test]
    fn same_worldline_order_never_changes() {
        let events = vec![
            SpacetimeEvent::new("late", 3.0, 1.0),
            SpacetimeEvent::new("early", 1.0, 1.0),
        ];
        for k in -9..=9 {
            let order = order_events(&events, fv(k as f64 / 10.0));
            assert_eq!(order.ids, vec!["early", "late"]);
        }
    }

    #[test]
    fn simultaneous_events_tie_break_by_id() {
        let events = vec![SpacetimeEvent::new("b", 1.0, 0.0), SpacetimeEvent::new("a", 1.0, 5.0)];
        let order = order_events(&events, FrameVelocity::REST);
        assert_eq!(order.ids, vec!["a", "b"]);
        assert_eq!(order.ties, vec![("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn reversing_boost_formula() {
        let e1 = SpacetimeEvent::new("e1", 2.0, 0.0);
        let e2 = SpacetimeEvent::new("e2", 2.5, 10.0);
        let beta = reversing_boost(&e1, &e2).unwrap();
        assert_abs_diff_eq!(beta.beta(), 0.525, epsilon = 1e-15);
        let order = order_events(&[e1.clone(), e2.clone()], beta);
        assert_eq!(order.ids, vec!["e2", "e1"]);
        // 0.55 also lies beyond the reversal threshold Δt/Δx = 0.05.
        assert_eq!(order_events(&[e1.clone(), e2.clone()], fv(0.55)).ids, vec!["e2", "e1"]);
        // Reversed argument order yields a frame that reverses the other way.
        let back = reversing_boost(&e2, &e1).unwrap();
        assert_eq!(order_events(&[e1, e2], back).ids, vec!["e2", "e1"]);
    }

    #[test]
    fn reversing_boost_for_negative_dt() {
        let e1 = SpacetimeEvent::new("e1", 2.5, 0.0);
        let e2 = SpacetimeEvent::new("e2", 2.0, 10.0);
        let beta = reversing_boost(&e1, &e2).unwrap();
        assert!(beta.beta() < 0.0);
        assert_eq!(order_events(&[e1, e2], beta).ids, vec!["e1", "e2"]);
    }

    #[test]
    fn reversing_boost_errors_and_simultaneity() {
        let a = SpacetimeEvent::new("a", 0.0, 0.0);
        assert!(matches!(
            reversing_boost(&a, &SpacetimeEvent::new("b", 1.0, 0.0)),
            Err(SpacetimeError::NotSpacelike(..))
        ));
        assert!(reversing_boost(&a, &SpacetimeEvent::new("c", 1.0, 1.0)).is_err());
        let beta = reversing_boost(&a, &SpacetimeEvent::new("d", 0.0, 3.0)).unwrap();
        assert_abs_diff_eq!(beta.beta(), 0.5, epsilon = 1e-15);
        let beta = reversing_boost(&a, &SpacetimeEvent::new("d", 0.0, -3.0)).unwrap();
        assert_abs_diff_eq!(beta.beta(), -0.5, epsilon = 1e-15);
    }
}
