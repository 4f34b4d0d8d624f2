//! Collision assessment in the semi-local frame and alert de-duplication.
//!
//! The ego agent sits at the semi-local origin, so a predicted pedestrian
//! position that comes within `radius` of the origin on the ground plane is a
//! predicted collision.

use std::collections::BTreeMap;

use crate::geometry::SemiLocal;
use crate::predict::PredictedTrajectory;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiskTier {
    Warn,
    Urgent,
}

impl RiskTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskTier::Warn => "warn",
            RiskTier::Urgent => "urgent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionAlert<T> {
    pub track_id: u64,
    /// 1-based index of the first predicted step inside the radius.
    pub first_step: usize,
    pub time_to_collision: T,
    /// Smallest horizontal distance to the origin over the horizon.
    pub min_distance: T,
    pub tier: RiskTier,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionConfig<T> {
    /// Safety radius (m); a step collides when its distance is strictly less.
    pub radius: T,
    /// Alerts with time to collision at or below this are urgent (s).
    pub urgent_ttc: T,
    /// Downsampled frames without an alert before a clear event.
    pub clear_frames: u32,
}

impl<T: Scalar> Default for CollisionConfig<T> {
    fn default() -> Self {
        Self {
            radius: T::lit(0.5),
            urgent_ttc: T::lit(1.6),
            clear_frames: 8,
        }
    }
}

/// First predicted incursion into the safety radius, if any.
pub fn assess<T: Scalar>(
    track_id: u64,
    pred: &PredictedTrajectory<T, SemiLocal>,
    cfg: &CollisionConfig<T>,
) -> Option<CollisionAlert<T>> {
    let distances: Vec<T> = pred.points.iter().map(|p| p.norm()).collect();
    let min_distance = distances.iter().copied().fold(T::infinity(), T::min);
    if !(min_distance < cfg.radius) {
        return None;
    }
    let idx = distances.iter().position(|d| *d < cfg.radius)?;
    let first_step = idx + 1;
    let time_to_collision = pred.step * T::from_usize(first_step)?;
    // tolerate representation error in step * i
    let tier = if time_to_collision <= cfg.urgent_ttc + T::lit(1e-9) {
        RiskTier::Urgent
    } else {
        RiskTier::Warn
    };
    Some(CollisionAlert {
        track_id,
        first_step,
        time_to_collision,
        min_distance,
        tier,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlertKind {
    Alert,
    Escalate,
    Clear,
}

impl AlertKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlertKind::Alert => "alert",
            AlertKind::Escalate => "escalate",
            AlertKind::Clear => "clear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlertEvent<T> {
    pub t: T,
    pub track_id: u64,
    pub kind: AlertKind,
    /// `None` for clear events.
    pub tier: Option<RiskTier>,
    pub ttc: Option<T>,
    pub min_distance: Option<T>,
}

#[derive(Clone, Copy, Debug)]
struct ActiveAlert {
    tier: RiskTier,
    quiet: u32,
}

/// Turns per-frame assessments into announce / escalate / clear events.
#[derive(Clone, Debug)]
pub struct AlertStream {
    clear_frames: u32,
    active: BTreeMap<u64, ActiveAlert>,
}

impl AlertStream {
    pub fn new(clear_frames: u32) -> Self {
        Self {
            clear_frames,
            active: BTreeMap::new(),
        }
    }

    pub fn is_active(&self, track_id: u64) -> bool {
        self.active.contains_key(&track_id)
    }

    /// One downsampled frame for `track_id`.
    pub fn update<T: Scalar>(
        &mut self,
        t: T,
        track_id: u64,
        assessment: Option<&CollisionAlert<T>>,
    ) -> Option<AlertEvent<T>> {
        match (assessment, self.active.get_mut(&track_id)) {
            (Some(a), None) => {
                self.active.insert(
                    track_id,
                    ActiveAlert {
                        tier: a.tier,
                        quiet: 0,
                    },
                );
                Some(event(t, track_id, AlertKind::Alert, Some(a)))
            }
            (Some(a), Some(state)) => {
                state.quiet = 0;
                if a.tier > state.tier {
                    state.tier = a.tier;
                    Some(event(t, track_id, AlertKind::Escalate, Some(a)))
                } else {
                    None
                }
            }
            (None, Some(state)) => {
                state.quiet += 1;
                if state.quiet >= self.clear_frames {
                    self.active.remove(&track_id);
                    Some(event(t, track_id, AlertKind::Clear, None))
                } else {
                    None
                }
            }
            (None, None) => None,
        }
    }

    /// The track has ended; clears an active alert.
    pub fn retire<T: Scalar>(&mut self, t: T, track_id: u64) -> Option<AlertEvent<T>> {
        self.active
            .remove(&track_id)
            .map(|_| event(t, track_id, AlertKind::Clear, None))
    }
}

fn event<T: Scalar>(t: T, track_id: u64, kind: AlertKind, a: Option<&CollisionAlert<T>>) -> AlertEvent<T> {
    AlertEvent {
        t,
        track_id,
        kind,
        tier: a.map(|a| a.tier),
        ttc: a.map(|a| a.time_to_collision),
        min_distance: a.map(|a| a.min_distance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use proptest::prelude::*;

    fn traj(points: Vec<Vec2<f64>>) -> PredictedTrajectory<f64, SemiLocal> {
        PredictedTrajectory::new(points, 0.0, 0.4)
    }

    fn approaching() -> PredictedTrajectory<f64, SemiLocal> {
        traj((1..=12).map(|i| Vec2::new(3.0 - 0.5 * i as f64, 0.0)).collect())
    }

    #[test]
    fn head_on_alert_at_step_six() {
        let a = assess(4, &approaching(), &CollisionConfig::default()).unwrap();
        assert_eq!(a.first_step, 6);
        assert!((a.time_to_collision - 2.4).abs() < 1e-12);
        assert_eq!(a.min_distance, 0.0);
        assert_eq!(a.tier, RiskTier::Warn);
        assert_eq!(a.track_id, 4);
    }

    #[test]
    fn urgent_boundary_is_inclusive() {
        let t = traj((1..=12).map(|i| Vec2::new(2.0 - 0.5 * i as f64, 0.0)).collect());
        let a = assess(0, &t, &CollisionConfig::default()).unwrap();
        assert_eq!(a.first_step, 4);
        assert_eq!(a.tier, RiskTier::Urgent);
    }

    #[test]
    fn receding_and_parallel_are_clear() {
        let recede = traj((1..=12).map(|i| Vec2::new(1.0 + 0.3 * i as f64, 0.5)).collect());
        assert!(assess(0, &recede, &CollisionConfig::default()).is_none());
        let parallel = traj((1..=12).map(|i| Vec2::new(5.0 - i as f64, 2.0)).collect());
        assert!(assess(0, &parallel, &CollisionConfig::default()).is_none());
    }

    #[test]
    fn dedup_rules() {
        let cfg = CollisionConfig::<f64>::default();
        let a = assess(1, &approaching(), &cfg).unwrap();
        let mut s = AlertStream::new(cfg.clear_frames);
        let n = (0..10).filter_map(|i| s.update(i as f64, 1, Some(&a))).count();
        assert_eq!(n, 1);

        let mut s = AlertStream::new(8);
        let urgent = CollisionAlert {
            tier: RiskTier::Urgent,
            ..a
        };
        let ev: Vec<_> = [a, urgent]
            .iter()
            .enumerate()
            .filter_map(|(i, x)| s.update(i as f64, 1, Some(x)))
            .collect();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[1].kind, AlertKind::Escalate);

        let mut s = AlertStream::new(8);
        let mut kinds = Vec::new();
        kinds.extend(s.update(0.0, 1, Some(&a)).map(|e| e.kind));
        for i in 1..=8 {
            kinds.extend(s.update(i as f64, 1, None::<&CollisionAlert<f64>>).map(|e| e.kind));
        }
        kinds.extend(s.update(9.0, 1, Some(&a)).map(|e| e.kind));
        assert_eq!(kinds, vec![AlertKind::Alert, AlertKind::Clear, AlertKind::Alert]);
    }

    #[test]
    fn retire_clears_only_active() {
        let mut s = AlertStream::new(8);
        assert!(s.retire(0.0, 3).is_none());
        let a = assess(3, &approaching(), &CollisionConfig::default()).unwrap();
        s.update(0.0, 3, Some(&a));
        assert_eq!(s.retire(1.0, 3).unwrap().kind, AlertKind::Clear);
        assert!(!s.is_active(3));
    }

    proptest! {
        #[test]
        fn smaller_radius_never_adds_alerts(
            pts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..13),
            r1 in 0.05..2.0f64, extra in 0.0..2.0f64,
        ) {
            let t = traj(pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect());
            let small = CollisionConfig { radius: r1, ..Default::default() };
            let large = CollisionConfig { radius: r1 + extra, ..Default::default() };
            if let Some(a) = assess(0, &t, &small) {
                let b = assess(0, &t, &large);
                prop_assert!(b.is_some());
                prop_assert!(b.unwrap().first_step <= a.first_step);
            }
        }
    }
}
