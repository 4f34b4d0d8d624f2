//! Frame-by-frame driver: tracking, semi-local lifting, live downsampling,
//! smoothing, prediction, collision assessment and alert de-duplication.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::collision::{assess, AlertEvent, AlertStream, CollisionConfig};
use crate::geometry::{camera_to_semilocal, CameraIntrinsics, SemiLocal};
use crate::io::{FrameRecord, LatencySample, PredLine, PredictionRecord, TrackRecord};
use crate::predict::{predict, PredictError, Predictor};
use crate::preprocess::{apply_smoothing, LiveDownsampler, PreprocessError, SemiLocalTrack, SmootherConfig};
use crate::scalar::Scalar;
use crate::tracking::{Track, TrackState, Tracker, TrackerConfig, TrackingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("frame {found} out of sequence (expected {expected})")]
    OutOfSequence { expected: u64, found: u64 },
    #[error("pipeline already finished")]
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineConfig<T> {
    pub tracker: TrackerConfig<T>,
    pub smoother: SmootherConfig<T>,
    pub collision: CollisionConfig<T>,
    pub native_fps: f64,
    /// Record predictions and track histories for the `.pred` dump.
    pub dump: bool,
    /// Keep finished tracks (with their camera-frame samples) in memory.
    pub keep_tracks: bool,
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn new(native_fps: f64) -> Self {
        Self {
            tracker: TrackerConfig::default(),
            smoother: SmootherConfig::default(),
            collision: CollisionConfig::default(),
            native_fps,
            dump: false,
            keep_tracks: false,
        }
    }
}

struct LiveTrack<T> {
    down: LiveDownsampler<T, SemiLocal>,
    history: SemiLocalTrack<T>,
}

/// Output of one processed frame.
#[derive(Clone, Debug, Default)]
pub struct FrameOutput<T> {
    pub events: Vec<AlertEvent<T>>,
}

pub struct Pipeline<T: Scalar> {
    cfg: PipelineConfig<T>,
    tracker: Tracker<T>,
    predictor: Box<dyn Predictor<T>>,
    live: BTreeMap<u64, LiveTrack<T>>,
    alerts: AlertStream,
    next_frame: u64,
    last_t: Option<T>,
    finished: bool,
    dump: Vec<PredLine>,
    kept: Vec<Track<T>>,
    predictions: usize,
}

impl<T: Scalar> Pipeline<T> {
    pub fn new(
        cfg: PipelineConfig<T>,
        intrinsics: CameraIntrinsics<T>,
        predictor: Box<dyn Predictor<T>>,
    ) -> Result<Self, PipelineError> {
        // fail early on an unusable frame rate
        LiveDownsampler::<T, SemiLocal>::new(0, cfg.native_fps)?;
        Ok(Self {
            tracker: Tracker::new(cfg.tracker, intrinsics),
            alerts: AlertStream::new(cfg.collision.clear_frames),
            cfg,
            predictor,
            live: BTreeMap::new(),
            next_frame: 0,
            last_t: None,
            finished: false,
            dump: Vec::new(),
            kept: Vec::new(),
            predictions: 0,
        })
    }

    pub fn predictor(&self) -> &dyn Predictor<T> {
        self.predictor.as_ref()
    }

    /// Number of prediction instants so far.
    pub fn prediction_count(&self) -> usize {
        self.predictions
    }

    /// Processes one frame. Frames must arrive in order starting at 0.
    pub fn process(&mut self, frame: &FrameRecord<T>) -> Result<FrameOutput<T>, PipelineError> {
        if self.finished {
            return Err(PipelineError::Finished);
        }
        if frame.frame != self.next_frame {
            return Err(PipelineError::OutOfSequence {
                expected: self.next_frame,
                found: frame.frame,
            });
        }
        let assoc = self.tracker.associate(frame)?;
        self.next_frame += 1;
        self.last_t = Some(frame.t);
        let mut out = FrameOutput::default();

        for track in assoc.lost {
            self.retire(frame.t, track, &mut out);
        }

        let fps = self.cfg.native_fps;
        for track in self.tracker.tracks() {
            let id = track.id();
            let live = match self.live.entry(id) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(LiveTrack {
                    down: LiveDownsampler::new(track.first_frame(), fps)?,
                    history: SemiLocalTrack::new(id),
                }),
            };
            let point = track
                .samples()
                .last()
                .filter(|s| s.frame == frame.frame)
                .map(|s| camera_to_semilocal(s.point, &s.pose.rotation));
            let Some(sample) = live.down.advance(frame.frame, point) else {
                continue;
            };
            live.history.samples.push(sample);

            let assessment = if track.state() == TrackState::Confirmed {
                let smoothed = apply_smoothing(&live.history, &self.cfg.smoother);
                match predict(&smoothed, self.predictor.as_ref()) {
                    Ok(pred) => {
                        self.predictions += 1;
                        if self.cfg.dump {
                            self.dump.push(PredLine::Prediction(PredictionRecord {
                                track_id: id,
                                origin_t: pred.origin_t.to_f64_lossy(),
                                emitted_t: frame.t.to_f64_lossy(),
                                points: pred
                                    .points
                                    .iter()
                                    .map(|p| crate::geometry::Vec2::new(p.x.to_f64_lossy(), p.y.to_f64_lossy()))
                                    .collect(),
                            }));
                        }
                        assess(id, &pred, &self.cfg.collision)
                    }
                    Err(PredictError::InsufficientHistory { .. }) => None,
                    Err(PredictError::InvalidContract(_)) => None,
                }
            } else {
                None
            };
            if let Some(e) = self.alerts.update(frame.t, id, assessment.as_ref()) {
                out.events.push(e);
            }
        }
        Ok(out)
    }

    fn retire(&mut self, t: T, track: Track<T>, out: &mut FrameOutput<T>) {
        let id = track.id();
        if let Some(e) = self.alerts.retire(t, id) {
            out.events.push(e);
        }
        if let Some(live) = self.live.remove(&id) {
            if self.cfg.dump && !live.history.is_empty() {
                let smoothed = apply_smoothing(&live.history, &self.cfg.smoother);
                let arr = |p: &Option<crate::geometry::SemiLocalPoint<T>>| {
                    p.map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy(), p.z.to_f64_lossy()])
                };
                self.dump.push(PredLine::Track(TrackRecord {
                    track_id: id,
                    first_frame: track.first_frame(),
                    end_t: t.to_f64_lossy(),
                    times: live.history.samples.iter().map(|s| s.t.to_f64_lossy()).collect(),
                    observed: live.history.samples.iter().map(|s| arr(&s.point)).collect(),
                    smoothed: smoothed.samples.iter().map(|s| arr(&s.point)).collect(),
                }));
            }
        }
        if self.cfg.keep_tracks {
            self.kept.push(track);
        }
    }

    /// Ends the stream: every live track is retired at the last frame time.
    pub fn finish(&mut self) -> FrameOutput<T> {
        let mut out = FrameOutput::default();
        if self.finished {
            return out;
        }
        self.finished = true;
        let t = self.last_t.unwrap_or_else(T::zero);
        for track in self.tracker.drain() {
            self.retire(t, track, &mut out);
        }
        out
    }

    /// Prediction dump lines collected so far (when `dump` is enabled).
    pub fn take_dump(&mut self) -> Vec<PredLine> {
        std::mem::take(&mut self.dump)
    }

    /// Finished tracks (when `keep_tracks` is enabled).
    pub fn take_tracks(&mut self) -> Vec<Track<T>> {
        std::mem::take(&mut self.kept)
    }
}

/// Everything a full run produces.
#[derive(Clone, Debug)]
pub struct RunOutput<T> {
    pub events: Vec<AlertEvent<T>>,
    pub dump: Vec<PredLine>,
    pub tracks: Vec<Track<T>>,
    pub predictions: usize,
}

/// Runs every frame through `pipeline` as fast as possible.
pub fn run<T: Scalar>(mut pipeline: Pipeline<T>, frames: &[FrameRecord<T>]) -> Result<RunOutput<T>, PipelineError> {
    let mut events = Vec::new();
    for f in frames {
        events.extend(pipeline.process(f)?.events);
    }
    events.extend(pipeline.finish().events);
    Ok(RunOutput {
        events,
        dump: pipeline.take_dump(),
        tracks: pipeline.take_tracks(),
        predictions: pipeline.prediction_count(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamOptions {
    /// Playback speed relative to the native frame rate; 0 replays as fast as
    /// possible.
    pub rate: f64,
    /// Extra processing time injected per frame (testing aid).
    pub slowdown: Duration,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            rate: 1.0,
            slowdown: Duration::ZERO,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StreamOutput<T> {
    pub run: RunOutput<T>,
    pub latency: Vec<LatencySample>,
    pub max_queue_depth: u64,
}

/// Replays `frames` on a wall clock. Frame `i` arrives at `i / (fps * rate)`
/// seconds after start; a frame that arrives while an earlier one is still
/// being processed waits in the queue. Only processing time is recorded as
/// latency. `on_event` sees each alert event as it is produced.
pub fn stream<T: Scalar, F: FnMut(&AlertEvent<T>)>(
    mut pipeline: Pipeline<T>,
    frames: &[FrameRecord<T>],
    opts: StreamOptions,
    mut on_event: F,
) -> Result<StreamOutput<T>, PipelineError> {
    let period = if opts.rate > 0.0 {
        Some(Duration::from_secs_f64(1.0 / (pipeline.cfg.native_fps * opts.rate)))
    } else {
        None
    };
    let start = Instant::now();
    let mut events = Vec::new();
    let mut latency = Vec::with_capacity(frames.len());
    let mut max_queue_depth = 0;
    for (i, f) in frames.iter().enumerate() {
        let mut queue_depth = 0;
        if let Some(period) = period {
            let arrival = period * i as u32;
            let now = start.elapsed();
            if now < arrival {
                thread::sleep(arrival - now);
            } else {
                let arrived = (now.as_secs_f64() / period.as_secs_f64()).floor() as u64 + 1;
                queue_depth = arrived.min(frames.len() as u64).saturating_sub(i as u64 + 1);
            }
        }
        let t0 = Instant::now();
        let out = pipeline.process(f)?;
        if !opts.slowdown.is_zero() {
            thread::sleep(opts.slowdown);
        }
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        for e in &out.events {
            on_event(e);
        }
        events.extend(out.events);
        max_queue_depth = max_queue_depth.max(queue_depth);
        latency.push(LatencySample {
            frame: f.frame,
            ms,
            queue_depth,
        });
    }
    let tail = pipeline.finish();
    for e in &tail.events {
        on_event(e);
    }
    events.extend(tail.events);
    Ok(StreamOutput {
        run: RunOutput {
            events,
            dump: pipeline.take_dump(),
            tracks: pipeline.take_tracks(),
            predictions: pipeline.prediction_count(),
        },
        latency,
        max_queue_depth,
    })
}
