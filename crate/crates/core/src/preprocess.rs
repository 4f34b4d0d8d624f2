//! Annotation chain applied to tracks: window-mean downsampling to 2.5 Hz,
//! constant-velocity Kalman smoothing, and short-track pruning.

use thiserror::Error;

use crate::geometry::{Frame, GravityAligned, Point3, SemiLocal, Vec2};
use crate::kalman::{forward_pass, rts_smooth, KalmanConfig};
use crate::scalar::Scalar;

/// Downsampled rate (Hz).
pub const TARGET_RATE_HZ: f64 = 2.5;
/// Tracks with fewer valid downsampled samples are dropped.
pub const MIN_TRACK_SAMPLES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("native rate {0} Hz is not an integer multiple of 2.5 Hz")]
    IncompatibleRate(f64),
    #[error("native samples out of order at frame {0}")]
    Unordered(u64),
}

/// One native-rate position, keyed by frame index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NativeSample<T, F> {
    pub frame: u64,
    pub point: Point3<T, F>,
}

/// A downsampled position; `point` is `None` for a window without any valid
/// native sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedSample<T, F> {
    pub t: T,
    pub point: Option<Point3<T, F>>,
}

/// Uniformly spaced track in some gravity-aligned frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DownsampledTrack<T, F> {
    pub track_id: u64,
    pub samples: Vec<TimedSample<T, F>>,
}

pub type SemiLocalTrack<T> = DownsampledTrack<T, SemiLocal>;

impl<T: Scalar, F: Frame> DownsampledTrack<T, F> {
    pub fn new(track_id: u64) -> Self {
        Self {
            track_id,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.point.is_some()).count()
    }
}

impl<T: Scalar, F: GravityAligned> DownsampledTrack<T, F> {
    /// Ground-plane observations with gaps.
    pub fn horizontal(&self) -> Vec<Option<Vec2<T>>> {
        self.samples
            .iter()
            .map(|s| s.point.map(|p| p.horizontal()))
            .collect()
    }
}

/// Number of native frames averaged into one downsampled sample.
pub fn window_len(native_fps: f64) -> Result<usize, PreprocessError> {
    let w = native_fps / TARGET_RATE_HZ;
    if w >= 1.0 && (w - w.round()).abs() < 1e-9 {
        Ok(w.round() as usize)
    } else {
        Err(PreprocessError::IncompatibleRate(native_fps))
    }
}

fn window_center<T: Scalar>(first_frame: u64, window: usize, native_fps: T) -> T {
    let start = T::from_u64(first_frame).unwrap_or_else(T::nan);
    let offset = T::from_usize(window - 1).unwrap_or_else(T::nan) * T::lit(0.5);
    (start + offset) / native_fps
}

fn mean<T: Scalar, F: Frame>(points: &[Point3<T, F>]) -> Option<Point3<T, F>> {
    if points.is_empty() {
        return None;
    }
    let (mut x, mut y, mut z) = (T::zero(), T::zero(), T::zero());
    for p in points {
        x = x + p.x;
        y = y + p.y;
        z = z + p.z;
    }
    let n = T::from_usize(points.len())?;
    Some(Point3::new(x / n, y / n, z / n))
}

/// Averages non-overlapping windows of native samples aligned to
/// `start_frame`. Each output carries the window-center time. Interior
/// windows without samples become gaps. A trailing window that is cut short
/// by the end of the track is kept only if it holds at least half a window of
/// samples.
pub fn downsample<T: Scalar, F: Frame>(
    track_id: u64,
    samples: &[NativeSample<T, F>],
    start_frame: u64,
    native_fps: f64,
) -> Result<DownsampledTrack<T, F>, PreprocessError> {
    let window = window_len(native_fps)?;
    let mut out = DownsampledTrack::new(track_id);
    let Some(last) = samples.last() else {
        return Ok(out);
    };
    if let Some(w) = samples.windows(2).find(|w| w[1].frame <= w[0].frame) {
        return Err(PreprocessError::Unordered(w[1].frame));
    }
    if samples[0].frame < start_frame {
        return Err(PreprocessError::Unordered(samples[0].frame));
    }
    let fps = T::lit(native_fps);
    let w = window as u64;
    let n_windows = (last.frame - start_frame) / w + 1;
    let mut idx = 0;
    let mut buf = Vec::with_capacity(window);
    for k in 0..n_windows {
        let first = start_frame + k * w;
        let end = first + w;
        buf.clear();
        while idx < samples.len() && samples[idx].frame < end {
            buf.push(samples[idx].point);
            idx += 1;
        }
        let truncated = last.frame < end - 1;
        if truncated && buf.len() < window.div_ceil(2) {
            break;
        }
        out.samples.push(TimedSample {
            t: window_center(first, window, fps),
            point: mean(&buf),
        });
    }
    Ok(out)
}

/// Frame-by-frame version of [`downsample`] for live use; emits a sample once
/// the last frame of each window has been seen. Produces the same values as
/// the batch routine for complete windows.
#[derive(Clone, Debug)]
pub struct LiveDownsampler<T, F> {
    start_frame: u64,
    window: usize,
    native_fps: T,
    buf: Vec<Point3<T, F>>,
}

impl<T: Scalar, F: Frame> LiveDownsampler<T, F> {
    pub fn new(start_frame: u64, native_fps: f64) -> Result<Self, PreprocessError> {
        let window = window_len(native_fps)?;
        Ok(Self {
            start_frame,
            window,
            native_fps: T::lit(native_fps),
            buf: Vec::with_capacity(window),
        })
    }

    /// Feeds frame `frame` (with its sample, if any). Frames must be visited
    /// in order without skipping.
    pub fn advance(&mut self, frame: u64, point: Option<Point3<T, F>>) -> Option<TimedSample<T, F>> {
        if frame < self.start_frame {
            return None;
        }
        if let Some(p) = point {
            self.buf.push(p);
        }
        let w = self.window as u64;
        let offset = frame - self.start_frame;
        if offset % w != w - 1 {
            return None;
        }
        let first = frame + 1 - w;
        let sample = TimedSample {
            t: window_center(first, self.window, self.native_fps),
            point: mean(&self.buf),
        };
        self.buf.clear();
        Some(sample)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SmoothingMode {
    /// No smoothing.
    Off,
    /// Forward Kalman pass only.
    #[default]
    Causal,
    /// Forward pass plus RTS backward pass.
    Batch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmootherConfig<T> {
    pub sigma_a: T,
    pub sigma_m: T,
    pub mode: SmoothingMode,
}

impl<T: Scalar> Default for SmootherConfig<T> {
    fn default() -> Self {
        Self {
            sigma_a: T::lit(0.5),
            sigma_m: T::lit(0.1),
            mode: SmoothingMode::default(),
        }
    }
}

impl<T: Scalar> SmootherConfig<T> {
    pub fn kalman(&self, dt: T) -> KalmanConfig<T> {
        KalmanConfig {
            sigma_a: self.sigma_a,
            sigma_m: self.sigma_m,
            dt,
        }
    }
}

/// Sample spacing of the downsampled timeline (s).
pub fn step_seconds<T: Scalar>() -> T {
    T::one() / T::lit(TARGET_RATE_HZ)
}

fn replace_horizontal<T: Scalar, F: GravityAligned>(
    track: &DownsampledTrack<T, F>,
    estimates: &[Option<Vec2<T>>],
) -> DownsampledTrack<T, F> {
    let samples = track
        .samples
        .iter()
        .zip(estimates)
        .map(|(s, e)| TimedSample {
            t: s.t,
            point: match (s.point, e) {
                (Some(p), Some(h)) => Some(Point3::new(h.x, h.y, p.z)),
                (p, _) => p,
            },
        })
        .collect();
    DownsampledTrack {
        track_id: track.track_id,
        samples,
    }
}

/// Fixed-interval (RTS) smoothing of the horizontal components. The vertical
/// component, the timestamps and the gaps are left as they are. Tracks with
/// fewer than two valid samples come back unchanged.
pub fn smooth<T: Scalar, F: GravityAligned>(
    track: &DownsampledTrack<T, F>,
    cfg: &SmootherConfig<T>,
) -> DownsampledTrack<T, F> {
    let k = cfg.kalman(step_seconds());
    let Some(steps) = forward_pass(&track.horizontal(), &k) else {
        return track.clone();
    };
    let smoothed: Vec<Option<Vec2<T>>> = rts_smooth(&steps, &k)
        .into_iter()
        .map(|s| s.map(|s| s.position))
        .collect();
    replace_horizontal(track, &smoothed)
}

/// Causal (forward-only) filtering of the horizontal components.
pub fn filter_causal<T: Scalar, F: GravityAligned>(
    track: &DownsampledTrack<T, F>,
    cfg: &SmootherConfig<T>,
) -> DownsampledTrack<T, F> {
    let k = cfg.kalman(step_seconds());
    let Some(steps) = forward_pass(&track.horizontal(), &k) else {
        return track.clone();
    };
    let filtered: Vec<Option<Vec2<T>>> = steps
        .into_iter()
        .map(|s| s.map(|s| s.updated.position))
        .collect();
    replace_horizontal(track, &filtered)
}

/// Applies the configured smoothing mode.
pub fn apply_smoothing<T: Scalar, F: GravityAligned>(
    track: &DownsampledTrack<T, F>,
    cfg: &SmootherConfig<T>,
) -> DownsampledTrack<T, F> {
    match cfg.mode {
        SmoothingMode::Off => track.clone(),
        SmoothingMode::Causal => filter_causal(track, cfg),
        SmoothingMode::Batch => smooth(track, cfg),
    }
}

/// Keeps the tracks with at least [`MIN_TRACK_SAMPLES`] valid samples, in
/// their original order.
pub fn prune<T: Scalar, F: Frame>(tracks: Vec<DownsampledTrack<T, F>>) -> Vec<DownsampledTrack<T, F>> {
    tracks
        .into_iter()
        .filter(|t| t.valid_count() >= MIN_TRACK_SAMPLES)
        .collect()
}
