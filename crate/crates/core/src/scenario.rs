//! Seeded synthetic recordings with ground truth.
//!
//! The ego agent walks a waypoint path with sinusoidal head yaw; pedestrians
//! follow piecewise-constant velocities. Detections are synthesized directly
//! by projecting each pedestrian's representative point through the camera,
//! then perturbed with a stereo-style depth error, pixel jitter, dropout and
//! a confidence model. Everything is a pure function of the spec and seed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    project, CameraIntrinsics, CameraPoint, Pose, UnitQuaternion, Vec2, WorldPoint,
};
use crate::io::{FrameRecord, RecordingHeader, RecordingMetadata, FORMAT_VERSION};
use crate::tracking::{BBox, Detection};

pub const GENERATOR_VERSION: &str = concat!("semilocal-scenario/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?} (expected easy, hard, uncontrolled or custom)")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Easy,
    Hard,
    Uncontrolled,
    Custom,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Easy => "easy",
            Preset::Hard => "hard",
            Preset::Uncontrolled => "uncontrolled",
            Preset::Custom => "custom",
        }
    }

    pub fn default_duration(&self) -> f64 {
        match self {
            Preset::Uncontrolled => 30.0,
            _ => 20.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Preset::Easy),
            "hard" => Ok(Preset::Hard),
            "uncontrolled" => Ok(Preset::Uncontrolled),
            "custom" => Ok(Preset::Custom),
            other => Err(ScenarioError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpec {
    /// Walking speed (m/s).
    pub speed: f64,
    /// Ground-plane path; the ego stops at the last waypoint.
    pub waypoints: Vec<[f64; 2]>,
    pub head_yaw_amplitude_deg: f64,
    pub head_yaw_frequency_hz: f64,
    /// Phase of the yaw oscillation (rad).
    #[serde(default)]
    pub head_yaw_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// Absolute time of the velocity change (s).
    pub time: f64,
    pub velocity: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub spawn_time: f64,
    /// Ground-plane position at `spawn_time`.
    pub start: [f64; 2],
    pub velocity: [f64; 2],
    #[serde(default)]
    pub turns: Vec<Turn>,
}

impl PedestrianSpec {
    /// Ground-plane position at `t >= spawn_time`.
    pub fn position(&self, t: f64) -> [f64; 2] {
        let mut p = self.start;
        let mut v = self.velocity;
        let mut from = self.spawn_time;
        for turn in &self.turns {
            if turn.time >= t {
                break;
            }
            if turn.time > from {
                p = [p[0] + v[0] * (turn.time - from), p[1] + v[1] * (turn.time - from)];
                from = turn.time;
            }
            v = turn.velocity;
        }
        [p[0] + v[0] * (t - from), p[1] + v[1] * (t - from)]
    }

    pub fn max_speed(&self) -> f64 {
        self.turns
            .iter()
            .map(|t| t.velocity[0].hypot(t.velocity[1]))
            .fold(self.velocity[0].hypot(self.velocity[1]), f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub base: f64,
    /// Confidence lost per meter of depth.
    pub per_meter: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative depth standard deviation up to `near_range`.
    pub depth_rel_sigma_near: f64,
    /// Relative depth standard deviation from `far_range` on; linear in between.
    pub depth_rel_sigma_far: f64,
    pub near_range: f64,
    pub far_range: f64,
    pub pixel_jitter_sigma: f64,
    pub dropout: f64,
    pub confidence: ConfidenceModel,
}

impl NoiseSpec {
    /// Depth accuracy of "< 2% up to 3 m, < 4% up to 15 m" read as 3-sigma
    /// bounds.
    pub fn stereo_default() -> Self {
        Self {
            depth_rel_sigma_near: 0.02 / 3.0,
            depth_rel_sigma_far: 0.04 / 3.0,
            near_range: 3.0,
            far_range: 15.0,
            pixel_jitter_sigma: 1.0,
            dropout: 0.0,
            confidence: ConfidenceModel {
                base: 0.95,
                per_meter: 0.015,
                sigma: 0.08,
            },
        }
    }

    pub fn noiseless() -> Self {
        Self {
            depth_rel_sigma_near: 0.0,
            depth_rel_sigma_far: 0.0,
            pixel_jitter_sigma: 0.0,
            dropout: 0.0,
            confidence: ConfidenceModel {
                base: 0.9,
                per_meter: 0.0,
                sigma: 0.0,
            },
            ..Self::stereo_default()
        }
    }

    /// Relative depth standard deviation at `depth`.
    pub fn depth_rel_sigma(&self, depth: f64) -> f64 {
        if depth <= self.near_range {
            self.depth_rel_sigma_near
        } else if depth >= self.far_range {
            self.depth_rel_sigma_far
        } else {
            let a = (depth - self.near_range) / (self.far_range - self.near_range);
            self.depth_rel_sigma_near + a * (self.depth_rel_sigma_far - self.depth_rel_sigma_near)
        }
    }

    /// Draws a noisy depth reading for a true depth.
    pub fn sample_depth<R: Rng>(&self, depth: f64, rng: &mut R) -> f64 {
        let sigma = self.depth_rel_sigma(depth);
        if sigma == 0.0 {
            return depth;
        }
        let eps: f64 = rng.sample(rand_distr::StandardNormal);
        depth * (1.0 + sigma * eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub width: f64,
    pub height: f64,
    pub hfov_deg: f64,
    pub native_fps: f64,
    pub min_depth: f64,
    pub max_depth: f64,
    /// Camera height above ground (m).
    pub camera_height: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            width: 1920.0,
            height: 1080.0,
            hfov_deg: 90.0,
            native_fps: 30.0,
            min_depth: 0.5,
            max_depth: 25.0,
            camera_height: 1.7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub width: f64,
    pub height: f64,
    /// Height of the representative (box-center) point (m).
    pub point_height: f64,
}

impl Default for BodySpec {
    fn default() -> Self {
        Self {
            width: 0.5,
            height: 1.7,
            point_height: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub preset: Preset,
    pub duration: f64,
    pub seed: u64,
    pub ego: EgoSpec,
    pub pedestrians: Vec<PedestrianSpec>,
    #[serde(default = "NoiseSpec::stereo_default")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub body: BodySpec,
    /// Radius used to label ground-truth collisions (m).
    #[serde(default = "default_radius_gt")]
    pub radius_gt: f64,
}

fn default_radius_gt() -> f64 {
    0.5
}

fn straight_ego(speed: f64, amplitude_deg: f64, frequency_hz: f64, phase: f64) -> EgoSpec {
    EgoSpec {
        speed,
        waypoints: vec![[0.0, 0.0], [1000.0, 0.0]],
        head_yaw_amplitude_deg: amplitude_deg,
        head_yaw_frequency_hz: frequency_hz,
        head_yaw_phase: phase,
    }
}

/// Walks toward the ego along its path and meets it.
fn head_on<R: Rng>(rng: &mut R, ego_speed: f64, spawn: f64) -> PedestrianSpec {
    let gap = rng.random_range(13.0..17.0);
    let lateral = rng.random_range(-0.15..0.15);
    let speed = rng.random_range(0.9..1.3);
    PedestrianSpec {
        spawn_time: spawn,
        start: [ego_speed * spawn + gap, lateral],
        velocity: [-speed, 0.0],
        turns: Vec::new(),
    }
}

/// Walks parallel to the ego path with at least two meters of clearance.
fn passer<R: Rng>(rng: &mut R, ego_speed: f64, spawn: f64) -> PedestrianSpec {
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let lateral = side * rng.random_range(2.0..3.5);
    let gap = rng.random_range(6.0..14.0);
    let vx = if rng.random_bool(0.5) {
        rng.random_range(0.5..1.0)
    } else {
        -rng.random_range(0.8..1.2)
    };
    PedestrianSpec {
        spawn_time: spawn,
        start: [ego_speed * spawn + gap, lateral],
        velocity: [vx, 0.0],
        turns: Vec::new(),
    }
}

/// Crosses the ego path; meets the ego at `meet_t` when `miss` is zero,
/// otherwise crosses `miss` meters ahead of (or behind) it.
fn crosser<R: Rng>(rng: &mut R, ego_speed: f64, meet_t: f64, miss: f64) -> PedestrianSpec {
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let reach = rng.random_range(4.0..7.0);
    let speed = rng.random_range(1.0..1.4);
    let spawn = (meet_t - reach / speed).max(0.0);
    let x = ego_speed * meet_t + miss;
    let y = side * speed * (meet_t - spawn);
    PedestrianSpec {
        spawn_time: spawn,
        start: [x, y],
        velocity: [0.0, -side * speed],
        turns: Vec::new(),
    }
}

/// Walks ahead of the ego in the same direction at about its speed, off to
/// one side, so it stays in view for most of the capture.
fn companion<R: Rng>(rng: &mut R, ego_speed: f64) -> PedestrianSpec {
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    PedestrianSpec {
        spawn_time: 0.0,
        start: [rng.random_range(8.0..16.0), side * rng.random_range(2.0..3.5)],
        velocity: [ego_speed + rng.random_range(-0.1..0.1), 0.0],
        turns: Vec::new(),
    }
}

impl ScenarioSpec {
    /// Randomized instance of a capture regime. `Custom` yields an empty
    /// scene with easy-like ego motion.
    pub fn preset(preset: Preset, seed: u64, duration: Option<f64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phase = rng.random_range(0.0..2.0 * PI);
        let ego_speed = 0.8;
        let duration = duration.unwrap_or_else(|| preset.default_duration());
        let mut noise = NoiseSpec::stereo_default();
        let (ego, pedestrians) = match preset {
            Preset::Easy | Preset::Hard | Preset::Custom => {
                let (a, f) = if preset == Preset::Hard { (40.0, 0.7) } else { (5.0, 0.2) };
                if preset == Preset::Hard {
                    noise.dropout = 0.05;
                }
                let peds = if preset == Preset::Custom {
                    Vec::new()
                } else {
                    let s0 = rng.random_range(0.0..2.0);
                    let s1 = rng.random_range(0.0..4.0);
                    vec![head_on(&mut rng, ego_speed, s0), passer(&mut rng, ego_speed, s1)]
                };
                (straight_ego(ego_speed, a, f, phase), peds)
            }
            Preset::Uncontrolled => {
                noise.dropout = 0.05;
                let s0 = rng.random_range(0.0..1.0);
                let mut peds = vec![head_on(&mut rng, ego_speed, s0)];
                for _ in 0..3 {
                    let s = rng.random_range(0.0..1.0);
                    peds.push(passer(&mut rng, ego_speed, s));
                }
                let meet = rng.random_range(4.0..6.0);
                peds.push(crosser(&mut rng, ego_speed, meet, 0.0));
                for _ in 0..3 {
                    let meet = rng.random_range(4.0..12.0);
                    let miss = if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(3.0..6.0);
                    peds.push(crosser(&mut rng, ego_speed, meet, miss));
                }
                for _ in 0..5 {
                    peds.push(companion(&mut rng, ego_speed));
                }
                let late = rng.random_range(9.0..13.0);
                peds.push(head_on(&mut rng, ego_speed, late));
                let meet = rng.random_range(16.0..22.0);
                peds.push(crosser(&mut rng, ego_speed, meet, 0.0));
                (straight_ego(ego_speed, 25.0, 0.5, phase), peds)
            }
        };
        Self {
            preset,
            duration,
            seed,
            ego,
            pedestrians,
            noise,
            sensor: SensorSpec::default(),
            body: BodySpec::default(),
            radius_gt: default_radius_gt(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("duration must be positive");
        }
        if !(self.ego.speed >= 0.0) {
            return bad("ego speed must be non-negative");
        }
        if self.ego.waypoints.is_empty() {
            return bad("ego path needs at least one waypoint");
        }
        if !(0.0..1.0).contains(&self.noise.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.noise.depth_rel_sigma_near < 0.0
            || self.noise.depth_rel_sigma_far < 0.0
            || self.noise.pixel_jitter_sigma < 0.0
            || self.noise.confidence.sigma < 0.0
        {
            return bad("noise scales must be non-negative");
        }
        if !(self.noise.far_range > self.noise.near_range) {
            return bad("far_range must exceed near_range");
        }
        if !(self.sensor.min_depth > 0.0 && self.sensor.max_depth > self.sensor.min_depth) {
            return bad("invalid depth range");
        }
        if !(self.radius_gt > 0.0) {
            return bad("radius_gt must be positive");
        }
        for (i, p) in self.pedestrians.iter().enumerate() {
            if !(p.spawn_time >= 0.0) {
                return Err(ScenarioError::Invalid(format!("pedestrian {i}: negative spawn time")));
            }
            let ok = p.velocity.iter().chain(p.start.iter()).all(|v| v.is_finite())
                && p.turns.iter().all(|t| t.velocity.iter().all(|v| v.is_finite()));
            if !ok {
                return Err(ScenarioError::Invalid(format!("pedestrian {i}: non-finite kinematics")));
            }
            if p.turns.windows(2).any(|w| w[1].time < w[0].time) {
                return Err(ScenarioError::Invalid(format!("pedestrian {i}: turns out of order")));
            }
        }
        CameraIntrinsics::from_horizontal_fov(self.sensor.width, self.sensor.height, self.sensor.hfov_deg)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn intrinsics(&self) -> CameraIntrinsics<f64> {
        CameraIntrinsics::from_horizontal_fov(self.sensor.width, self.sensor.height, self.sensor.hfov_deg)
            .expect("validated sensor")
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.sensor.native_fps).round() as usize
    }

    /// Ego ground position and path heading at `t`.
    pub fn ego_state(&self, t: f64) -> ([f64; 2], f64) {
        let wps = &self.ego.waypoints;
        let mut remaining = self.ego.speed * t;
        let mut heading = 0.0;
        for w in wps.windows(2) {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            let len = dx.hypot(dy);
            if len == 0.0 {
                continue;
            }
            heading = dy.atan2(dx);
            if remaining <= len {
                let a = remaining / len;
                return ([w[0][0] + a * dx, w[0][1] + a * dy], heading);
            }
            remaining -= len;
        }
        (*wps.last().expect("validated path"), heading)
    }

    pub fn head_yaw(&self, t: f64) -> f64 {
        self.ego.head_yaw_amplitude_deg.to_radians()
            * (2.0 * PI * self.ego.head_yaw_frequency_hz * t + self.ego.head_yaw_phase).sin()
    }

    pub fn pose(&self, t: f64) -> Pose<f64> {
        let (pos, heading) = self.ego_state(t);
        let yaw = UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], heading + self.head_yaw(t));
        Pose::new(
            yaw * camera_mount(),
            WorldPoint::new(pos[0], pos[1], self.sensor.camera_height),
        )
    }
}

/// Level camera looking along world +x: camera z to world x, camera x to
/// world -y, camera y to world -z.
pub fn camera_mount() -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
}

#[derive(Clone, Debug, PartialEq)]
pub struct PedestrianTruth {
    pub id: u64,
    pub first_frame: u64,
    /// World positions of the representative point from `first_frame` on.
    pub positions: Vec<WorldPoint<f64>>,
}

impl PedestrianTruth {
    pub fn at_frame(&self, frame: u64) -> Option<WorldPoint<f64>> {
        let i = frame.checked_sub(self.first_frame)?;
        self.positions.get(i as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionInterval {
    pub pedestrian: u64,
    pub start_frame: u64,
    /// Inclusive.
    pub end_frame: u64,
    pub start_t: f64,
    pub end_t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub native_fps: f64,
    pub radius_gt: f64,
    pub times: Vec<f64>,
    /// Ego world position per frame.
    pub ego: Vec<WorldPoint<f64>>,
    pub pedestrians: Vec<PedestrianTruth>,
    pub intervals: Vec<CollisionInterval>,
}

impl GroundTruth {
    pub fn pedestrian(&self, id: u64) -> Option<&PedestrianTruth> {
        self.pedestrians.iter().find(|p| p.id == id)
    }

    /// Horizontal pedestrian position relative to the ego at time `t`,
    /// linearly interpolated between frames.
    pub fn relative_horizontal(&self, id: u64, t: f64) -> Option<Vec2<f64>> {
        let ped = self.pedestrian(id)?;
        let pos = t * self.native_fps;
        let f0 = pos.floor();
        if f0 < 0.0 {
            return None;
        }
        let f0u = f0 as u64;
        let a = pos - f0;
        let rel = |f: u64| -> Option<Vec2<f64>> {
            let p = ped.at_frame(f)?;
            let e = self.ego.get(f as usize)?;
            Some(Vec2::new(p.x - e.x, p.y - e.y))
        };
        let r0 = rel(f0u)?;
        if a == 0.0 {
            return Some(r0);
        }
        let r1 = rel(f0u + 1)?;
        Some(r0 * (1.0 - a) + r1 * a)
    }
}

/// Maximal runs of frames where a pedestrian is horizontally closer than
/// `radius_gt` to the ego agent.
pub fn label_collisions(truth: &GroundTruth, radius_gt: f64) -> Vec<CollisionInterval> {
    let mut out = Vec::new();
    for ped in &truth.pedestrians {
        let mut open: Option<u64> = None;
        let mut last = ped.first_frame;
        for (i, p) in ped.positions.iter().enumerate() {
            let f = ped.first_frame + i as u64;
            let Some(e) = truth.ego.get(f as usize) else { break };
            let d = (p.x - e.x).hypot(p.y - e.y);
            if d < radius_gt {
                open.get_or_insert(f);
            } else if let Some(s) = open.take() {
                out.push(interval(truth, ped.id, s, f - 1));
            }
            last = f;
        }
        if let Some(s) = open {
            out.push(interval(truth, ped.id, s, last));
        }
    }
    out.sort_by(|a, b| a.start_frame.cmp(&b.start_frame).then(a.pedestrian.cmp(&b.pedestrian)));
    out
}

fn interval(truth: &GroundTruth, pedestrian: u64, s: u64, e: u64) -> CollisionInterval {
    CollisionInterval {
        pedestrian,
        start_frame: s,
        end_frame: e,
        start_t: truth.times[s as usize],
        end_t: truth.times[e as usize],
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub header: RecordingHeader,
    pub frames: Vec<FrameRecord<f64>>,
    pub truth: GroundTruth,
}

/// Simulates the scenario. Deterministic for a given spec (including seed).
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario, ScenarioError> {
    spec.validate()?;
    let k = spec.intrinsics();
    let fps = spec.sensor.native_fps;
    let n = spec.frame_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let jitter = Normal::new(0.0, spec.noise.pixel_jitter_sigma.max(0.0))
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let conf_noise = Normal::new(0.0, spec.noise.confidence.sigma.max(0.0))
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

    let mut frames = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut ego = Vec::with_capacity(n);
    let mut peds: Vec<PedestrianTruth> = spec
        .pedestrians
        .iter()
        .enumerate()
        .map(|(i, p)| PedestrianTruth {
            id: i as u64,
            first_frame: (p.spawn_time * fps).ceil() as u64,
            positions: Vec::new(),
        })
        .collect();

    for f in 0..n {
        let t = f as f64 / fps;
        let pose = spec.pose(t);
        let inv = pose.rotation.inverse();
        let mut detections = Vec::new();
        for (ped, truth) in spec.pedestrians.iter().zip(peds.iter_mut()) {
            if (f as u64) < truth.first_frame {
                continue;
            }
            let g = ped.position(t);
            let world = WorldPoint::new(g[0], g[1], spec.body.point_height);
            truth.positions.push(world);

            let rel = world.offset_from(&pose.translation);
            let cam = CameraPoint::from_array(inv.rotate(rel));
            if cam.z < spec.sensor.min_depth || cam.z > spec.sensor.max_depth {
                continue;
            }
            let Ok(px) = project(cam, &k) else { continue };
            let w = k.fx * spec.body.width / cam.z;
            let h = k.fy * spec.body.height / cam.z;
            if !BBox::from_center(px.u, px.v, w, h).within(&k) {
                continue;
            }
            // noise draws happen in a fixed order so the stream stays aligned
            let drop = spec.noise.dropout > 0.0 && rng.random_bool(spec.noise.dropout);
            let du = jitter.sample(&mut rng);
            let dv = jitter.sample(&mut rng);
            let depth = spec.noise.sample_depth(cam.z, &mut rng);
            let c = &spec.noise.confidence;
            let confidence = (c.base - c.per_meter * cam.z + conf_noise.sample(&mut rng)).clamp(0.05, 0.99);
            if drop {
                continue;
            }
            let bbox = BBox::from_center(px.u + du, px.v + dv, w, h);
            if !bbox.within(&k) {
                continue;
            }
            detections.push(Detection {
                bbox,
                confidence,
                center_depth: Some(depth),
            });
        }
        times.push(t);
        ego.push(pose.translation);
        frames.push(FrameRecord {
            frame: f as u64,
            t,
            pose,
            detections,
        });
    }

    peds.retain(|p| !p.positions.is_empty());
    let mut truth = GroundTruth {
        native_fps: fps,
        radius_gt: spec.radius_gt,
        times,
        ego,
        pedestrians: peds,
        intervals: Vec::new(),
    };
    truth.intervals = label_collisions(&truth, spec.radius_gt);

    let header = RecordingHeader {
        format_version: FORMAT_VERSION,
        intrinsics: k,
        native_fps: fps,
        metadata: RecordingMetadata {
            preset: spec.preset.as_str().to_string(),
            seed: spec.seed,
            generator_version: GENERATOR_VERSION.to_string(),
        },
    };
    Ok(Scenario { header, frames, truth })
}
