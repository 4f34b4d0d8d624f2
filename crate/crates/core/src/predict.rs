//! Trajectory predictors and the predictor contract.
//!
//! A predictor maps an observed window of ground-plane positions (uniform
//! 0.4 s spacing) to `horizon` future positions. Predictors that declare
//! themselves linear satisfy `f(a - b) = f(a) - f(b)`, which is what makes a
//! single prediction in the semi-local frame equal to the difference of the
//! pedestrian and ego predictions in the world frame.

use std::marker::PhantomData;

use thiserror::Error;

use crate::geometry::{Frame, GravityAligned, Vec2};
use crate::kalman::{filter_final, KalmanConfig};
use crate::preprocess::{step_seconds, DownsampledTrack};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("insufficient history: {have} valid samples, need {need}")]
    InsufficientHistory { have: usize, need: usize },
    #[error("invalid predictor contract: {0}")]
    InvalidContract(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorContract<T> {
    /// Number of observed samples fed to the predictor.
    pub observe_window: usize,
    /// Number of predicted steps.
    pub horizon: usize,
    /// Step length (s).
    pub step: T,
    /// Declares `f(a - b) == f(a) - f(b)`.
    pub is_linear: bool,
}

impl<T: Scalar> PredictorContract<T> {
    pub fn new(observe_window: usize, horizon: usize, is_linear: bool) -> Result<Self, PredictError> {
        let c = Self {
            observe_window,
            horizon,
            step: step_seconds(),
            is_linear,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        if self.horizon < 1 {
            return Err(PredictError::InvalidContract("horizon must be >= 1".into()));
        }
        if self.observe_window < 2 {
            return Err(PredictError::InvalidContract("observe_window must be >= 2".into()));
        }
        Ok(())
    }

    /// Time covered by the horizon (s).
    pub fn horizon_seconds(&self) -> T {
        self.step * T::from_usize(self.horizon).unwrap_or_else(T::nan)
    }
}

impl<T: Scalar> Default for PredictorContract<T> {
    fn default() -> Self {
        Self {
            observe_window: 6,
            horizon: 12,
            step: step_seconds(),
            is_linear: true,
        }
    }
}

/// Predicted ground-plane positions, in the frame of the observations.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedTrajectory<T, F> {
    pub points: Vec<Vec2<T>>,
    /// Time of the last observed sample; point `i` (1-based) is at
    /// `origin_t + i * step`.
    pub origin_t: T,
    pub step: T,
    frame: PhantomData<F>,
}

impl<T: Scalar, F: Frame> PredictedTrajectory<T, F> {
    pub fn new(points: Vec<Vec2<T>>, origin_t: T, step: T) -> Self {
        Self {
            points,
            origin_t,
            step,
            frame: PhantomData,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pointwise difference `self - other`, e.g. pedestrian minus ego.
    pub fn minus(&self, other: &Self) -> Self {
        Self::new(
            self.points
                .iter()
                .zip(&other.points)
                .map(|(a, b)| *a - *b)
                .collect(),
            self.origin_t,
            self.step,
        )
    }

    /// Reinterprets the points in another frame. Only meaningful when the
    /// caller has established that the two frames coincide for this data,
    /// e.g. the difference of two world-frame predictions is a semi-local
    /// prediction.
    pub fn retag<G: Frame>(self) -> PredictedTrajectory<T, G> {
        PredictedTrajectory::new(self.points, self.origin_t, self.step)
    }
}

/// Observed window to predicted horizon.
pub trait Predictor<T: Scalar>: Send + Sync {
    fn contract(&self) -> &PredictorContract<T>;

    /// Predicts `horizon` positions after the last element of `observed`.
    /// `None` entries are gaps on the uniform timeline.
    fn predict_positions(&self, observed: &[Option<Vec2<T>>]) -> Result<Vec<Vec2<T>>, PredictError>;
}

/// Constant-velocity Kalman predictor: filters the window causally, then
/// extrapolates the final state by `step * i`.
#[derive(Clone, Debug)]
pub struct CvKalmanPredictor<T> {
    contract: PredictorContract<T>,
    kalman: KalmanConfig<T>,
}

impl<T: Scalar> CvKalmanPredictor<T> {
    pub fn new(observe_window: usize, horizon: usize, sigma_a: T, sigma_m: T) -> Result<Self, PredictError> {
        let contract = PredictorContract::new(observe_window, horizon, true)?;
        Ok(Self {
            kalman: KalmanConfig {
                sigma_a,
                sigma_m,
                dt: contract.step,
            },
            contract,
        })
    }
}

impl<T: Scalar> Default for CvKalmanPredictor<T> {
    fn default() -> Self {
        let contract = PredictorContract::default();
        Self {
            kalman: KalmanConfig {
                dt: contract.step,
                ..KalmanConfig::default()
            },
            contract,
        }
    }
}

/// Runs the CV Kalman filter over `observed` and extrapolates `horizon`
/// steps.
pub fn predict_cv<T: Scalar>(
    observed: &[Option<Vec2<T>>],
    horizon: usize,
    kalman: &KalmanConfig<T>,
) -> Result<Vec<Vec2<T>>, PredictError> {
    let have = observed.iter().filter(|o| o.is_some()).count();
    let state = filter_final(observed, kalman).ok_or(PredictError::InsufficientHistory { have, need: 2 })?;
    Ok((1..=horizon)
        .map(|i| state.extrapolate(kalman.dt * T::from_usize(i).unwrap_or_else(T::nan)))
        .collect())
}

impl<T: Scalar> Predictor<T> for CvKalmanPredictor<T> {
    fn contract(&self) -> &PredictorContract<T> {
        &self.contract
    }

    fn predict_positions(&self, observed: &[Option<Vec2<T>>]) -> Result<Vec<Vec2<T>>, PredictError> {
        predict_cv(observed, self.contract.horizon, &self.kalman)
    }
}

/// Toy nonlinear predictor: CV Kalman with the estimated speed clamped to
/// `max_speed`. Used to exercise the equivalence harness on a predictor that
/// is not linear.
#[derive(Clone, Debug)]
pub struct SaturatingCvPredictor<T> {
    contract: PredictorContract<T>,
    kalman: KalmanConfig<T>,
    max_speed: T,
}

impl<T: Scalar> SaturatingCvPredictor<T> {
    pub fn new(
        observe_window: usize,
        horizon: usize,
        sigma_a: T,
        sigma_m: T,
        max_speed: T,
    ) -> Result<Self, PredictError> {
        let contract = PredictorContract::new(observe_window, horizon, false)?;
        Ok(Self {
            kalman: KalmanConfig {
                sigma_a,
                sigma_m,
                dt: contract.step,
            },
            contract,
            max_speed,
        })
    }
}

impl<T: Scalar> Predictor<T> for SaturatingCvPredictor<T> {
    fn contract(&self) -> &PredictorContract<T> {
        &self.contract
    }

    fn predict_positions(&self, observed: &[Option<Vec2<T>>]) -> Result<Vec<Vec2<T>>, PredictError> {
        let have = observed.iter().filter(|o| o.is_some()).count();
        let mut state =
            filter_final(observed, &self.kalman).ok_or(PredictError::InsufficientHistory { have, need: 2 })?;
        let speed = state.velocity.norm();
        if speed > self.max_speed {
            state.velocity = state.velocity * (self.max_speed / speed);
        }
        Ok((1..=self.contract.horizon)
            .map(|i| state.extrapolate(self.kalman.dt * T::from_usize(i).unwrap_or_else(T::nan)))
            .collect())
    }
}

/// Predicts from the last `observe_window` samples of `track`. Returns
/// `InsufficientHistory` when the track is shorter than the window or the
/// window holds fewer than two valid samples; that is a signal to wait, not
/// a failure.
pub fn predict<T: Scalar, F: GravityAligned, P: Predictor<T> + ?Sized>(
    track: &DownsampledTrack<T, F>,
    predictor: &P,
) -> Result<PredictedTrajectory<T, F>, PredictError> {
    let c = predictor.contract();
    if track.len() < c.observe_window {
        return Err(PredictError::InsufficientHistory {
            have: track.len(),
            need: c.observe_window,
        });
    }
    let window = &track.samples[track.len() - c.observe_window..];
    let observed: Vec<Option<Vec2<T>>> = window.iter().map(|s| s.point.map(|p| p.horizontal())).collect();
    let points = predictor.predict_positions(&observed)?;
    let origin_t = window.last().map(|s| s.t).unwrap_or_else(T::zero);
    Ok(PredictedTrajectory::new(points, origin_t, c.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, SemiLocal, SemiLocalPoint, World};
    use crate::preprocess::TimedSample;
    use proptest::prelude::*;

    fn xs(v: &[f64]) -> Vec<Option<Vec2<f64>>> {
        v.iter().map(|&x| Some(Vec2::new(x, 0.0))).collect()
    }

    fn track<F: GravityAligned>(pts: &[Vec2<f64>]) -> DownsampledTrack<f64, F> {
        DownsampledTrack {
            track_id: 0,
            samples: pts
                .iter()
                .enumerate()
                .map(|(i, p)| TimedSample {
                    t: i as f64 * 0.4,
                    point: Some(Point3::new(p.x, p.y, -0.8)),
                })
                .collect(),
        }
    }

    #[test]
    fn exact_constant_velocity() {
        let out = predict_cv(&xs(&[0.0, 0.4, 0.8, 1.2, 1.6, 2.0]), 3, &KalmanConfig::default()).unwrap();
        for (p, e) in out.iter().zip([2.4, 2.8, 3.2]) {
            assert!((p.x - e).abs() < 1e-6 && p.y.abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_stays_put() {
        let obs: Vec<_> = (0..6).map(|_| Some(Vec2::new(1.5, -2.0))).collect();
        let out = predict_cv(&obs, 12, &KalmanConfig::default()).unwrap();
        assert_eq!(out.len(), 12);
        assert!(out.iter().all(|p| *p == Vec2::new(1.5, -2.0)));
    }

    #[test]
    fn too_short_is_insufficient() {
        let err = predict_cv(&xs(&[1.0]), 3, &KalmanConfig::default()).unwrap_err();
        assert_eq!(err, PredictError::InsufficientHistory { have: 1, need: 2 });
    }

    #[test]
    fn approaching_track_closed_form() {
        let pts: Vec<_> = (0..6).map(|k| Vec2::new(3.0 + 0.5 * (5 - k) as f64, 0.0)).collect();
        let tr: DownsampledTrack<f64, SemiLocal> = track(&pts);
        let pred = predict(&tr, &CvKalmanPredictor::default()).unwrap();
        assert_eq!(pred.len(), 12);
        for (i, p) in pred.points.iter().enumerate() {
            assert!((p.x - (3.0 - 0.5 * (i + 1) as f64)).abs() < 1e-9);
        }
        assert!((pred.origin_t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_walker_constant() {
        let pts = vec![Vec2::new(0.0, 2.0); 8];
        let tr: DownsampledTrack<f64, SemiLocal> = track(&pts);
        let pred = predict(&tr, &CvKalmanPredictor::default()).unwrap();
        assert!(pred.points.iter().all(|p| *p == Vec2::new(0.0, 2.0)));
    }

    #[test]
    fn short_track_gets_no_prediction() {
        let tr: DownsampledTrack<f64, SemiLocal> = track(&[Vec2::new(1.0, 1.0); 5]);
        assert!(matches!(
            predict(&tr, &CvKalmanPredictor::default()),
            Err(PredictError::InsufficientHistory { have: 5, need: 6 })
        ));
    }

    #[test]
    fn contract_validation() {
        assert!(PredictorContract::<f64>::new(1, 12, true).is_err());
        assert!(PredictorContract::<f64>::new(6, 0, true).is_err());
        let c = PredictorContract::<f64>::default();
        assert!((c.horizon_seconds() - 4.8).abs() < 1e-12);
    }

    #[test]
    fn saturating_clamps_speed() {
        let p = SaturatingCvPredictor::new(6, 2, 0.5, 0.1, 1.0).unwrap();
        assert!(!p.contract().is_linear);
        let out = p.predict_positions(&xs(&[0.0, 0.8, 1.6, 2.4, 3.2, 4.0])).unwrap();
        assert!((out[0].x - 4.4).abs() < 1e-9);
    }

    #[test]
    fn world_and_semilocal_share_code_path() {
        let pts: Vec<_> = (0..6).map(|k| Vec2::new(k as f64, 1.0)).collect();
        let w: PredictedTrajectory<f64, World> = predict(&track::<World>(&pts), &CvKalmanPredictor::default()).unwrap();
        let s: PredictedTrajectory<f64, SemiLocal> =
            predict(&track::<SemiLocal>(&pts), &CvKalmanPredictor::default()).unwrap();
        assert_eq!(w.points, s.points);
        let _ = SemiLocalPoint::<f64>::origin();
    }

    fn arb_window() -> impl Strategy<Value = Vec<Vec2<f64>>> {
        prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 6).prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
    }

    fn cv_sequence(p0: (f64, f64), v: (f64, f64)) -> Vec<Vec2<f64>> {
        (0..6).map(|k| Vec2::new(p0.0 + v.0 * 0.4 * k as f64, p0.1 + v.1 * 0.4 * k as f64)).collect()
    }

    proptest! {
        #[test]
        fn cv_predictor_is_linear(a in arb_window(), b in arb_window()) {
            let k = KalmanConfig::default();
            let diff: Vec<_> = a.iter().zip(&b).map(|(x, y)| Some(*x - *y)).collect();
            let fa = predict_cv(&a.iter().map(|p| Some(*p)).collect::<Vec<_>>(), 12, &k).unwrap();
            let fb = predict_cv(&b.iter().map(|p| Some(*p)).collect::<Vec<_>>(), 12, &k).unwrap();
            let fd = predict_cv(&diff, 12, &k).unwrap();
            for i in 0..12 {
                prop_assert!(fd[i].distance(&(fa[i] - fb[i])) < 1e-9);
            }
        }

        #[test]
        fn linear_on_constant_velocity_pairs(
            p0 in (-10.0..10.0f64, -10.0..10.0f64), v0 in (-2.0..2.0f64, -2.0..2.0f64),
            p1 in (-10.0..10.0f64, -10.0..10.0f64), v1 in (-2.0..2.0f64, -2.0..2.0f64),
        ) {
            let k = KalmanConfig::default();
            let (a, b) = (cv_sequence(p0, v0), cv_sequence(p1, v1));
            let wrap = |s: &[Vec2<f64>]| s.iter().map(|p| Some(*p)).collect::<Vec<_>>();
            let diff: Vec<_> = a.iter().zip(&b).map(|(x, y)| *x - *y).collect();
            let fa = predict_cv(&wrap(&a), 12, &k).unwrap();
            let fb = predict_cv(&wrap(&b), 12, &k).unwrap();
            let fd = predict_cv(&wrap(&diff), 12, &k).unwrap();
            for i in 0..12 {
                prop_assert!(fd[i].distance(&(fa[i] - fb[i])) < 1e-9);
            }
        }

        #[test]
        fn shift_equivariant(a in arb_window(), c in (-50.0..50.0f64, -50.0..50.0f64)) {
            let k = KalmanConfig::default();
            let shift = Vec2::new(c.0, c.1);
            let fa = predict_cv(&a.iter().map(|p| Some(*p)).collect::<Vec<_>>(), 12, &k).unwrap();
            let fs = predict_cv(&a.iter().map(|p| Some(*p + shift)).collect::<Vec<_>>(), 12, &k).unwrap();
            for i in 0..12 {
                prop_assert!(fs[i].distance(&(fa[i] + shift)) < 1e-9);
            }
        }

        #[test]
        fn doubling_velocity_doubles_displacement(p0 in (-10.0..10.0f64, -10.0..10.0f64), v in (-2.0..2.0f64, -2.0..2.0f64)) {
            let k = KalmanConfig::default();
            let wrap = |s: &[Vec2<f64>]| s.iter().map(|p| Some(*p)).collect::<Vec<_>>();
            let a = cv_sequence(p0, v);
            let b = cv_sequence(p0, (2.0 * v.0, 2.0 * v.1));
            let (la, lb) = (a[5], b[5]);
            let fa = predict_cv(&wrap(&a), 12, &k).unwrap();
            let fb = predict_cv(&wrap(&b), 12, &k).unwrap();
            for i in 0..12 {
                let da = fa[i] - la;
                let db = fb[i] - lb;
                prop_assert!(db.distance(&(da * 2.0)) < 1e-9);
            }
        }
    }
}
