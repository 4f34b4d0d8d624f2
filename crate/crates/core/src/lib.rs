//! Egocentric pedestrian collision warning in a semi-local frame.
//!
//! Pedestrian detections from a head-mounted camera are lifted to 3D,
//! rotated into world orientation without translating them (the semi-local
//! frame, where the camera wearer sits at the origin), downsampled to
//! 2.5 Hz, smoothed, extrapolated with a constant-velocity Kalman filter and
//! checked against a safety radius around the origin.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which the file formats use.

pub mod collision;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod pipeline;
pub mod predict;
pub mod preprocess;
pub mod scalar;
pub mod scenario;
pub mod tracking;

pub use scalar::Scalar;

pub use collision::{assess, AlertEvent as GenericAlertEvent, AlertKind, AlertStream, RiskTier};
pub use config::RunConfig;
pub use geometry::{backproject, camera_to_semilocal, camera_to_world, project, world_to_semilocal};
pub use io::FrameRecord as GenericFrameRecord;
pub use predict::{predict, Predictor};
pub use scenario::{generate, label_collisions, Preset, ScenarioSpec};

pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type CameraPoint = geometry::CameraPoint<f64>;
pub type SemiLocalPoint = geometry::SemiLocalPoint<f64>;
pub type WorldPoint = geometry::WorldPoint<f64>;
pub type PixelPoint = geometry::PixelPoint<f64>;
pub type Pose = geometry::Pose<f64>;
pub type UnitQuaternion = geometry::UnitQuaternion<f64>;
pub type Vec2 = geometry::Vec2<f64>;
pub type BBox = tracking::BBox<f64>;
pub type Detection = tracking::Detection<f64>;
pub type Track = tracking::Track<f64>;
pub type Tracker = tracking::Tracker<f64>;
pub type TrackerConfig = tracking::TrackerConfig<f64>;
pub type FrameRecord = io::FrameRecord<f64>;
pub type SemiLocalTrack = preprocess::SemiLocalTrack<f64>;
pub type SmootherConfig = preprocess::SmootherConfig<f64>;
pub type PredictorContract = predict::PredictorContract<f64>;
pub type CvKalmanPredictor = predict::CvKalmanPredictor<f64>;
pub type SaturatingCvPredictor = predict::SaturatingCvPredictor<f64>;
pub type PredictedTrajectory<F> = predict::PredictedTrajectory<f64, F>;
pub type CollisionAlert = collision::CollisionAlert<f64>;
pub type CollisionConfig = collision::CollisionConfig<f64>;
pub type AlertEvent = collision::AlertEvent<f64>;
pub type Pipeline = pipeline::Pipeline<f64>;
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
