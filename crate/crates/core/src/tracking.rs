//! Identity-stable pedestrian tracks from per-frame detections.
//!
//! Association is two-stage and confidence split: high-confidence detections
//! are matched first against every live track by greedy descending IoU, then
//! the remaining low-confidence detections are offered to the tracks still
//! unmatched. Only high-confidence leftovers spawn new tracks.

use thiserror::Error;

use crate::geometry::{backproject, CameraIntrinsics, CameraPoint, PixelPoint, Pose};
use crate::io::FrameRecord;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackingError {
    #[error("frame at t={t} s is not after the previous frame at t={last} s")]
    NonMonotonic { t: f64, last: f64 },
    #[error("track has no observations")]
    EmptyTrack,
    #[error("invalid bounding box {0:?}")]
    InvalidBox([f64; 4]),
}

/// Axis-aligned box in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox<T> {
    pub u_min: T,
    pub v_min: T,
    pub u_max: T,
    pub v_max: T,
}

impl<T: Scalar> BBox<T> {
    pub fn new(u_min: T, v_min: T, u_max: T, v_max: T) -> Result<Self, TrackingError> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if u_min < u_max && v_min < v_max {
            Ok(b)
        } else {
            Err(TrackingError::InvalidBox(b.to_f64_array()))
        }
    }

    pub fn from_center(cu: T, cv: T, width: T, height: T) -> Self {
        let half = T::lit(0.5);
        Self {
            u_min: cu - width * half,
            v_min: cv - height * half,
            u_max: cu + width * half,
            v_max: cv + height * half,
        }
    }

    pub fn to_f64_array(&self) -> [f64; 4] {
        [
            self.u_min.to_f64_lossy(),
            self.v_min.to_f64_lossy(),
            self.u_max.to_f64_lossy(),
            self.v_max.to_f64_lossy(),
        ]
    }

    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        ((self.u_min + self.u_max) * half, (self.v_min + self.v_max) * half)
    }

    pub fn area(&self) -> T {
        (self.u_max - self.u_min).max(T::zero()) * (self.v_max - self.v_min).max(T::zero())
    }

    pub fn translate(&self, du: T, dv: T) -> Self {
        Self {
            u_min: self.u_min + du,
            v_min: self.v_min + dv,
            u_max: self.u_max + du,
            v_max: self.v_max + dv,
        }
    }

    pub fn iou(&self, other: &Self) -> T {
        let iw = (self.u_max.min(other.u_max) - self.u_min.max(other.u_min)).max(T::zero());
        let ih = (self.v_max.min(other.v_max) - self.v_min.max(other.v_min)).max(T::zero());
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union > T::zero() {
            inter / union
        } else {
            T::zero()
        }
    }

    pub fn within(&self, k: &CameraIntrinsics<T>) -> bool {
        self.u_min >= T::zero()
            && self.v_min >= T::zero()
            && self.u_max <= k.width
            && self.v_max <= k.height
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection<T> {
    pub bbox: BBox<T>,
    pub confidence: T,
    /// Depth at the box center in meters; `None` when the sensor had no
    /// valid reading there.
    pub center_depth: Option<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrackState {
    Tentative,
    Confirmed,
    Lost,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackSample<T> {
    pub frame: u64,
    pub t: T,
    pub point: CameraPoint<T>,
    pub pose: Pose<T>,
}

#[derive(Clone, Debug)]
pub struct Track<T> {
    id: u64,
    state: TrackState,
    first_frame: u64,
    samples: Vec<TrackSample<T>>,
    boxes: Vec<(T, BBox<T>)>,
    hits: u32,
    misses: u32,
}

impl<T: Scalar> Track<T> {
    fn spawn(id: u64, frame: u64, t: T, bbox: BBox<T>) -> Self {
        Self {
            id,
            state: TrackState::Tentative,
            first_frame: frame,
            samples: Vec::new(),
            boxes: vec![(t, bbox)],
            hits: 1,
            misses: 0,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    /// Frame index of the detection that spawned the track.
    pub fn first_frame(&self) -> u64 {
        self.first_frame
    }

    /// 3D samples, one per matched frame with a usable depth reading.
    pub fn samples(&self) -> &[TrackSample<T>] {
        &self.samples
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn last_box(&self) -> Option<BBox<T>> {
        self.boxes.last().map(|b| b.1)
    }

    fn last_time(&self) -> Option<T> {
        self.boxes.last().map(|b| b.0)
    }

    fn observe(&mut self, t: T, bbox: BBox<T>) {
        self.boxes.push((t, bbox));
        if self.boxes.len() > 2 {
            self.boxes.remove(0);
        }
        self.hits += 1;
        self.misses = 0;
    }
}

/// Box expected at time `t`: the last observed box shifted by the last
/// observed pixel velocity of its center.
pub fn predict_box<T: Scalar>(track: &Track<T>, t: T) -> Result<BBox<T>, TrackingError> {
    match track.boxes.as_slice() {
        [] => Err(TrackingError::EmptyTrack),
        [(_, b)] => Ok(*b),
        [.., (t0, b0), (t1, b1)] => {
            let span = *t1 - *t0;
            if !(span > T::zero()) {
                return Ok(*b1);
            }
            let (u0, v0) = b0.center();
            let (u1, v1) = b1.center();
            let ahead = t - *t1;
            Ok(b1.translate((u1 - u0) / span * ahead, (v1 - v0) / span * ahead))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackerConfig<T> {
    pub high_thresh: T,
    pub low_thresh: T,
    pub iou_thresh: T,
    pub confirm_hits: u32,
    pub max_misses: u32,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            high_thresh: T::lit(0.5),
            low_thresh: T::lit(0.1),
            iou_thresh: T::lit(0.3),
            confirm_hits: 3,
            max_misses: 30,
        }
    }
}

/// What happened to the track set in one frame.
#[derive(Clone, Debug, Default)]
pub struct Association<T> {
    /// `(track id, detection index)` pairs.
    pub matches: Vec<(u64, usize)>,
    pub spawned: Vec<u64>,
    /// Tracks that crossed `max_misses` this frame, in state `Lost`.
    pub lost: Vec<Track<T>>,
}

/// Greedy descending-IoU assignment. Pairs below `thresh` are never made.
/// Ties resolve by track index, then detection index.
pub fn greedy_match<T: Scalar>(iou: &[Vec<T>], thresh: T) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(T, usize, usize)> = iou
        .iter()
        .enumerate()
        .flat_map(|(ti, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v >= thresh)
                .map(move |(di, v)| (*v, ti, di))
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let n_det = iou.first().map_or(0, Vec::len);
    let mut track_used = vec![false; iou.len()];
    let mut det_used = vec![false; n_det];
    let mut out = Vec::new();
    for (_, ti, di) in pairs {
        if !track_used[ti] && !det_used[di] {
            track_used[ti] = true;
            det_used[di] = true;
            out.push((ti, di));
        }
    }
    out
}

/// Single-owner tracker for one stream.
#[derive(Clone, Debug)]
pub struct Tracker<T> {
    cfg: TrackerConfig<T>,
    intrinsics: CameraIntrinsics<T>,
    tracks: Vec<Track<T>>,
    next_id: u64,
    last_t: Option<T>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(cfg: TrackerConfig<T>, intrinsics: CameraIntrinsics<T>) -> Self {
        Self {
            cfg,
            intrinsics,
            tracks: Vec::new(),
            next_id: 0,
            last_t: None,
        }
    }

    pub fn config(&self) -> &TrackerConfig<T> {
        &self.cfg
    }

    /// Live (tentative or confirmed) tracks in spawn order.
    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    /// Removes and returns every live track, marking them lost. Used at end of
    /// stream.
    pub fn drain(&mut self) -> Vec<Track<T>> {
        let mut out = std::mem::take(&mut self.tracks);
        for t in &mut out {
            t.state = TrackState::Lost;
        }
        out
    }

    /// Advances the track set by one frame.
    pub fn associate(&mut self, frame: &FrameRecord<T>) -> Result<Association<T>, TrackingError> {
        let t = frame.t;
        let newest = self
            .tracks
            .iter()
            .filter_map(Track::last_time)
            .chain(self.last_t)
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
        if let Some(last) = newest {
            if !(t > last) {
                return Err(TrackingError::NonMonotonic {
                    t: t.to_f64_lossy(),
                    last: last.to_f64_lossy(),
                });
            }
        }
        self.last_t = Some(t);

        let cfg = self.cfg;
        let dets = &frame.detections;
        let high: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].confidence >= cfg.high_thresh)
            .collect();
        let low: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].confidence >= cfg.low_thresh && dets[i].confidence < cfg.high_thresh)
            .collect();

        let predicted: Vec<BBox<T>> = self
            .tracks
            .iter()
            .map(|tr| predict_box(tr, t))
            .collect::<Result<_, _>>()?;

        let mut track_matched: Vec<Option<usize>> = vec![None; self.tracks.len()];

        // (a) high-confidence detections against every live track
        let iou_high: Vec<Vec<T>> = predicted
            .iter()
            .map(|pb| high.iter().map(|&d| pb.iou(&dets[d].bbox)).collect())
            .collect();
        let mut high_used = vec![false; high.len()];
        for (ti, hi) in greedy_match(&iou_high, cfg.iou_thresh) {
            track_matched[ti] = Some(high[hi]);
            high_used[hi] = true;
        }

        // (b) low-confidence detections against the leftovers
        let remaining: Vec<usize> = (0..self.tracks.len())
            .filter(|&ti| track_matched[ti].is_none())
            .collect();
        let iou_low: Vec<Vec<T>> = remaining
            .iter()
            .map(|&ti| low.iter().map(|&d| predicted[ti].iou(&dets[d].bbox)).collect())
            .collect();
        for (ri, li) in greedy_match(&iou_low, cfg.iou_thresh) {
            track_matched[remaining[ri]] = Some(low[li]);
        }

        let mut report = Association::default();
        let mut keep = Vec::with_capacity(self.tracks.len());
        for (mut track, matched) in std::mem::take(&mut self.tracks).into_iter().zip(track_matched) {
            match matched {
                Some(di) => {
                    let det = &dets[di];
                    track.observe(t, det.bbox);
                    if let Some(point) = self.lift(det) {
                        track.samples.push(TrackSample {
                            frame: frame.frame,
                            t,
                            point,
                            pose: frame.pose,
                        });
                    }
                    if track.state == TrackState::Tentative && track.hits >= cfg.confirm_hits {
                        track.state = TrackState::Confirmed;
                    }
                    report.matches.push((track.id, di));
                    keep.push(track);
                }
                None => {
                    track.misses += 1;
                    if track.misses >= cfg.max_misses {
                        track.state = TrackState::Lost;
                        report.lost.push(track);
                    } else {
                        keep.push(track);
                    }
                }
            }
        }

        for (hi, &di) in high.iter().enumerate() {
            if high_used[hi] {
                continue;
            }
            let det = &dets[di];
            let mut track = Track::spawn(self.next_id, frame.frame, t, det.bbox);
            self.next_id += 1;
            if let Some(point) = self.lift(det) {
                track.samples.push(TrackSample {
                    frame: frame.frame,
                    t,
                    point,
                    pose: frame.pose,
                });
            }
            if track.hits >= cfg.confirm_hits {
                track.state = TrackState::Confirmed;
            }
            report.spawned.push(track.id);
            keep.push(track);
        }
        self.tracks = keep;
        Ok(report)
    }

    /// Camera-frame point at the box center, if the depth is usable.
    fn lift(&self, det: &Detection<T>) -> Option<CameraPoint<T>> {
        let depth = det.center_depth?;
        let (u, v) = det.bbox.center();
        backproject(PixelPoint::new(u, v, depth), &self.intrinsics).ok()
    }
}
