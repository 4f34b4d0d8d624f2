//! Metrics: ADE/FDE, alert precision/recall, the semi-local equivalence
//! residual and latency order statistics. All trajectory metrics live on
//! the 2.5 Hz timeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{AlertEvent, AlertKind};
use crate::geometry::{camera_to_semilocal, camera_to_world, Frame, Point3, Vec2, WorldPoint};
use crate::io::{PredLine, PredictionRecord, TrackRecord, FORMAT_VERSION};
use crate::predict::{predict, Predictor};
use crate::preprocess::{apply_smoothing, downsample, DownsampledTrack, NativeSample, SmootherConfig};
use crate::scenario::{CollisionInterval, GroundTruth};
use crate::config::RunConfig;
use crate::pipeline::{run, Pipeline, RunOutput};
use crate::scenario::Scenario;
use crate::tracking::Track;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no samples")]
    Empty,
    #[error("prediction {index} has {got} points but its reference has {expected}")]
    Misaligned { index: usize, got: usize, expected: usize },
    #[error("percentile {0} outside (0, 100]")]
    Percentile(u32),
    #[error("pipeline: {0}")]
    Pipeline(String),
}

/// Mean per-step error over every step of every prediction, and mean
/// final-step error. `None` when there are no predictions.
pub fn ade_fde(pairs: &[(Vec<Vec2<f64>>, Vec<Vec2<f64>>)]) -> Result<Option<(f64, f64)>, EvalError> {
    let mut step_sum = 0.0;
    let mut steps = 0usize;
    let mut final_sum = 0.0;
    let mut n = 0usize;
    for (i, (pred, truth)) in pairs.iter().enumerate() {
        if pred.len() != truth.len() {
            return Err(EvalError::Misaligned {
                index: i,
                got: pred.len(),
                expected: truth.len(),
            });
        }
        if pred.is_empty() {
            continue;
        }
        for (p, g) in pred.iter().zip(truth) {
            step_sum += p.distance(g);
            steps += 1;
        }
        final_sum += pred[pred.len() - 1].distance(&truth[truth.len() - 1]);
        n += 1;
    }
    if n == 0 {
        return Ok(None);
    }
    Ok(Some((step_sum / steps as f64, final_sum / n as f64)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl PrCounts {
    pub fn precision(&self) -> Option<f64> {
        let d = self.true_positives + self.false_positives;
        (d > 0).then(|| self.true_positives as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.true_positives + self.false_negatives;
        (d > 0).then(|| self.true_positives as f64 / d as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 })
    }
}

/// Matches `alert` events against collision intervals. An alert is a true
/// positive if its track maps to a pedestrian with a not-yet-matched interval
/// starting within `[t, t + horizon + tolerance]`; the earliest such interval
/// is taken. Events are processed in `(t, track_id)` order, so the result
/// does not depend on the order they are given in.
pub fn alert_pr(
    events: &[AlertEvent<f64>],
    intervals: &[CollisionInterval],
    track_to_ped: &BTreeMap<u64, u64>,
    horizon_seconds: f64,
    tolerance: f64,
) -> PrCounts {
    let mut alerts: Vec<&AlertEvent<f64>> = events.iter().filter(|e| e.kind == AlertKind::Alert).collect();
    alerts.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.track_id.cmp(&b.track_id)));
    let mut used = vec![false; intervals.len()];
    let mut counts = PrCounts::default();
    for a in alerts {
        let hit = track_to_ped.get(&a.track_id).and_then(|&ped| {
            intervals
                .iter()
                .enumerate()
                .filter(|(i, iv)| {
                    !used[*i]
                        && iv.pedestrian == ped
                        && iv.start_t >= a.t - 1e-9
                        && iv.start_t <= a.t + horizon_seconds + tolerance + 1e-9
                })
                .min_by(|x, y| x.1.start_t.total_cmp(&y.1.start_t))
                .map(|(i, _)| i)
        });
        match hit {
            Some(i) => {
                used[i] = true;
                counts.true_positives += 1;
            }
            None => counts.false_positives += 1,
        }
    }
    counts.false_negatives = used.iter().filter(|u| !**u).count();
    counts
}

/// Assigns each dumped track to the ground-truth pedestrian whose relative
/// position is closest on average over the track's observed samples, if that
/// mean distance is below `gate` meters.
pub fn associate_tracks(tracks: &[&TrackRecord], truth: &GroundTruth, gate: f64) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    for tr in tracks {
        let mut best: Option<(f64, u64)> = None;
        for ped in &truth.pedestrians {
            let mut sum = 0.0;
            let mut n = 0usize;
            let mut complete = true;
            for (t, obs) in tr.times.iter().zip(&tr.observed) {
                let Some(o) = obs else { continue };
                match truth.relative_horizontal(ped.id, *t) {
                    Some(g) => {
                        sum += Vec2::new(o[0], o[1]).distance(&g);
                        n += 1;
                    }
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if !complete || n == 0 {
                continue;
            }
            let mean = sum / n as f64;
            if mean < gate && best.is_none_or(|(d, _)| mean < d) {
                best = Some((mean, ped.id));
            }
        }
        if let Some((_, ped)) = best {
            out.insert(tr.track_id, ped);
        }
    }
    out
}

/// Pairs each prediction of an associated track with the pedestrian's true
/// future relative positions. Predictions whose horizon runs past the end of
/// the ground truth are skipped.
pub fn prediction_pairs(
    predictions: &[&PredictionRecord],
    step: f64,
    truth: &GroundTruth,
    track_to_ped: &BTreeMap<u64, u64>,
) -> Vec<(Vec<Vec2<f64>>, Vec<Vec2<f64>>)> {
    let mut out = Vec::new();
    for p in predictions {
        let Some(&ped) = track_to_ped.get(&p.track_id) else { continue };
        let gt: Option<Vec<Vec2<f64>>> = (1..=p.points.len())
            .map(|i| truth.relative_horizontal(ped, p.origin_t + step * i as f64))
            .collect();
        if let Some(gt) = gt {
            out.push((p.points.clone(), gt));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualStats {
    pub max: f64,
    pub sum: f64,
    pub count: usize,
}

impl ResidualStats {
    pub fn push(&mut self, r: f64) {
        self.max = self.max.max(r);
        self.sum += r;
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        self.max = self.max.max(other.max);
        self.sum += other.sum;
        self.count += other.count;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

fn prefix<F: Frame>(t: &DownsampledTrack<f64, F>, end: usize) -> DownsampledTrack<f64, F> {
    DownsampledTrack {
        track_id: t.track_id,
        samples: t.samples[..end].to_vec(),
    }
}

/// Residual of predicting in the semi-local frame versus predicting the
/// pedestrian and the ego agent separately in the world frame and
/// subtracting, for one set of aligned native-rate series. At every
/// downsampled instant with a full window, adds
/// `max_i |f_i(semi) - (f_i(ped) - f_i(ego))|` to `stats`.
pub fn equivalence_series<P: Predictor<f64> + ?Sized>(
    semilocal: &[NativeSample<f64, crate::geometry::SemiLocal>],
    pedestrian: &[NativeSample<f64, crate::geometry::World>],
    ego: &[NativeSample<f64, crate::geometry::World>],
    start_frame: u64,
    native_fps: f64,
    predictor: &P,
    smoother: &SmootherConfig<f64>,
    stats: &mut ResidualStats,
) {
    let (Ok(c), Ok(a), Ok(b)) = (
        downsample(0, semilocal, start_frame, native_fps),
        downsample(0, pedestrian, start_frame, native_fps),
        downsample(0, ego, start_frame, native_fps),
    ) else {
        return;
    };
    let (c, a, b) = (
        apply_smoothing(&c, smoother),
        apply_smoothing(&a, smoother),
        apply_smoothing(&b, smoother),
    );
    let w = predictor.contract().observe_window;
    for end in w..=c.len() {
        let (Ok(pc), Ok(pa), Ok(pb)) = (
            predict(&prefix(&c, end), predictor),
            predict(&prefix(&a, end), predictor),
            predict(&prefix(&b, end), predictor),
        ) else {
            continue;
        };
        let r = pc
            .points
            .iter()
            .zip(pa.points.iter().zip(&pb.points))
            .map(|(c, (a, b))| c.distance(&(*a - *b)))
            .fold(0.0, f64::max);
        stats.push(r);
    }
}

/// Equivalence residual over tracker output: each track's samples are lifted
/// to the semi-local frame, to the world frame, and paired with the ego
/// position of the same frame.
pub fn equivalence_tracks<P: Predictor<f64> + ?Sized>(
    tracks: &[Track<f64>],
    native_fps: f64,
    predictor: &P,
    smoother: &SmootherConfig<f64>,
) -> ResidualStats {
    let mut stats = ResidualStats::default();
    for tr in tracks {
        let s = tr.samples();
        let semi: Vec<_> = s
            .iter()
            .map(|x| NativeSample {
                frame: x.frame,
                point: camera_to_semilocal(x.point, &x.pose.rotation),
            })
            .collect();
        let ped: Vec<_> = s
            .iter()
            .map(|x| NativeSample {
                frame: x.frame,
                point: camera_to_world(x.point, &x.pose),
            })
            .collect();
        let ego: Vec<_> = s
            .iter()
            .map(|x| NativeSample {
                frame: x.frame,
                point: x.pose.translation,
            })
            .collect();
        equivalence_series(
            &semi,
            &ped,
            &ego,
            tr.first_frame(),
            native_fps,
            predictor,
            smoother,
            &mut stats,
        );
    }
    stats
}

/// Equivalence residual over ground truth: every pedestrian's full lifetime,
/// with the ego trajectory over the same frames.
pub fn equivalence_truth<P: Predictor<f64> + ?Sized>(
    truth: &GroundTruth,
    predictor: &P,
    smoother: &SmootherConfig<f64>,
) -> ResidualStats {
    let mut stats = ResidualStats::default();
    for p in &truth.pedestrians {
        let frames = p.first_frame..p.first_frame + p.positions.len() as u64;
        let pairs: Vec<(u64, WorldPoint<f64>, WorldPoint<f64>)> = frames
            .zip(&p.positions)
            .filter_map(|(f, pos)| truth.ego.get(f as usize).map(|e| (f, *pos, *e)))
            .collect();
        let semi: Vec<_> = pairs
            .iter()
            .map(|(f, pos, e)| NativeSample {
                frame: *f,
                point: Point3::from_array(pos.offset_from(e)),
            })
            .collect();
        let ped: Vec<_> = pairs
            .iter()
            .map(|(f, pos, _)| NativeSample { frame: *f, point: *pos })
            .collect();
        let ego: Vec<_> = pairs
            .iter()
            .map(|(f, _, e)| NativeSample { frame: *f, point: *e })
            .collect();
        equivalence_series(
            &semi,
            &ped,
            &ego,
            p.first_frame,
            truth.native_fps,
            predictor,
            smoother,
            &mut stats,
        );
    }
    stats
}

/// Nearest-rank percentile with rank `floor(p * n / 100) + 1`, capped at `n`.
pub fn percentile(sorted: &[f64], p: u32) -> Result<f64, EvalError> {
    if sorted.is_empty() {
        return Err(EvalError::Empty);
    }
    if p == 0 || p > 100 {
        return Err(EvalError::Percentile(p));
    }
    let n = sorted.len();
    let rank = (p as usize * n / 100 + 1).min(n);
    Ok(sorted[rank - 1])
}

/// `(p50, p99)` of per-frame processing times.
pub fn latency_stats(ms: &[f64]) -> Result<(f64, f64), EvalError> {
    let mut v = ms.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((percentile(&v, 50)?, percentile(&v, 99)?))
}

/// Root-mean-square horizontal error of a downsampled track against truth.
pub fn track_rms(times: &[f64], points: &[Option<[f64; 3]>], truth: &GroundTruth, ped: u64) -> Option<(f64, usize)> {
    let mut sum = 0.0;
    let mut n = 0;
    for (t, p) in times.iter().zip(points) {
        let (Some(p), Some(g)) = (p, truth.relative_horizontal(ped, *t)) else {
            continue;
        };
        sum += Vec2::new(p[0], p[1]).distance(&g).powi(2);
        n += 1;
    }
    (n > 0).then(|| ((sum / n as f64).sqrt(), n))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricCounts {
    pub scenarios: usize,
    pub tracks: usize,
    pub predictions: usize,
    /// Prediction instants that had ground truth over the whole horizon.
    pub scored_predictions: usize,
    pub alerts: usize,
    pub gt_intervals: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub equivalence_instants: usize,
    pub latency_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub format_version: u32,
    pub ade: Option<f64>,
    pub fde: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub equivalence_residual_max: Option<f64>,
    pub equivalence_residual_mean: Option<f64>,
    pub latency_p50_ms: Option<f64>,
    pub latency_p99_ms: Option<f64>,
    pub counts: MetricCounts,
}

impl Default for MetricsReport {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            ade: None,
            fde: None,
            precision: None,
            recall: None,
            f1: None,
            equivalence_residual_max: None,
            equivalence_residual_mean: None,
            latency_p50_ms: None,
            latency_p99_ms: None,
            counts: MetricCounts::default(),
        }
    }
}

fn weighted(parts: &[(Option<f64>, usize)]) -> Option<f64> {
    let total: usize = parts.iter().filter(|(v, _)| v.is_some()).map(|(_, n)| *n).sum();
    if total == 0 {
        return None;
    }
    Some(parts.iter().filter_map(|(v, n)| v.map(|v| v * *n as f64)).sum::<f64>() / total as f64)
}

impl MetricsReport {
    pub const KEYS: [&'static str; 11] = [
        "format_version",
        "ade",
        "fde",
        "precision",
        "recall",
        "f1",
        "equivalence_residual_max",
        "equivalence_residual_mean",
        "latency_p50_ms",
        "latency_p99_ms",
        "counts",
    ];

    /// Combines per-scenario reports. Counts add up; precision, recall and
    /// F1 are recomputed from the summed counts; ADE, FDE and the mean
    /// residual are averaged weighted by their sample counts; the residual
    /// maximum is the maximum; latency percentiles are averaged weighted by
    /// frame count (an approximation: order statistics do not merge exactly).
    pub fn merge(reports: &[MetricsReport]) -> MetricsReport {
        let mut c = MetricCounts::default();
        for r in reports {
            let x = &r.counts;
            c.scenarios += x.scenarios.max(1);
            c.tracks += x.tracks;
            c.predictions += x.predictions;
            c.scored_predictions += x.scored_predictions;
            c.alerts += x.alerts;
            c.gt_intervals += x.gt_intervals;
            c.true_positives += x.true_positives;
            c.false_positives += x.false_positives;
            c.false_negatives += x.false_negatives;
            c.equivalence_instants += x.equivalence_instants;
            c.latency_frames += x.latency_frames;
        }
        let pr = PrCounts {
            true_positives: c.true_positives,
            false_positives: c.false_positives,
            false_negatives: c.false_negatives,
        };
        let by = |f: fn(&MetricsReport) -> Option<f64>, n: fn(&MetricCounts) -> usize| {
            weighted(&reports.iter().map(|r| (f(r), n(&r.counts))).collect::<Vec<_>>())
        };
        MetricsReport {
            format_version: FORMAT_VERSION,
            ade: by(|r| r.ade, |c| c.scored_predictions),
            fde: by(|r| r.fde, |c| c.scored_predictions),
            precision: pr.precision(),
            recall: pr.recall(),
            f1: pr.f1(),
            equivalence_residual_max: reports
                .iter()
                .filter_map(|r| r.equivalence_residual_max)
                .reduce(f64::max),
            equivalence_residual_mean: by(|r| r.equivalence_residual_mean, |c| c.equivalence_instants),
            latency_p50_ms: by(|r| r.latency_p50_ms, |c| c.latency_frames),
            latency_p99_ms: by(|r| r.latency_p99_ms, |c| c.latency_frames),
            counts: c,
        }
    }
}

/// Inputs for a single-scenario evaluation.
pub struct EvalInputs<'a> {
    pub events: &'a [AlertEvent<f64>],
    pub horizon_seconds: f64,
    pub pred: &'a [PredLine],
    pub step: f64,
    pub truth: &'a GroundTruth,
    pub latency_ms: Option<&'a [f64]>,
    pub match_tolerance: f64,
    pub assoc_gate: f64,
}

pub fn evaluate<P: Predictor<f64> + ?Sized>(
    inputs: &EvalInputs<'_>,
    predictor: &P,
    smoother: &SmootherConfig<f64>,
) -> MetricsReport {
    let tracks: Vec<&TrackRecord> = inputs
        .pred
        .iter()
        .filter_map(|l| match l {
            PredLine::Track(t) => Some(t),
            _ => None,
        })
        .collect();
    let predictions: Vec<&PredictionRecord> = inputs
        .pred
        .iter()
        .filter_map(|l| match l {
            PredLine::Prediction(p) => Some(p),
            _ => None,
        })
        .collect();
    let map = associate_tracks(&tracks, inputs.truth, inputs.assoc_gate);
    let pairs = prediction_pairs(&predictions, inputs.step, inputs.truth, &map);
    let (ade, fde) = match ade_fde(&pairs) {
        Ok(Some((a, f))) => (Some(a), Some(f)),
        _ => (None, None),
    };
    let pr = alert_pr(
        inputs.events,
        &inputs.truth.intervals,
        &map,
        inputs.horizon_seconds,
        inputs.match_tolerance,
    );
    let eq = equivalence_truth(inputs.truth, predictor, smoother);
    let latency = inputs.latency_ms.and_then(|ms| latency_stats(ms).ok());
    MetricsReport {
        format_version: FORMAT_VERSION,
        ade,
        fde,
        precision: pr.precision(),
        recall: pr.recall(),
        f1: pr.f1(),
        equivalence_residual_max: (eq.count > 0).then_some(eq.max),
        equivalence_residual_mean: eq.mean(),
        latency_p50_ms: latency.map(|l| l.0),
        latency_p99_ms: latency.map(|l| l.1),
        counts: MetricCounts {
            scenarios: 1,
            tracks: tracks.len(),
            predictions: predictions.len(),
            scored_predictions: pairs.len(),
            alerts: inputs.events.iter().filter(|e| e.kind == AlertKind::Alert).count(),
            gt_intervals: inputs.truth.intervals.len(),
            true_positives: pr.true_positives,
            false_positives: pr.false_positives,
            false_negatives: pr.false_negatives,
            equivalence_instants: eq.count,
            latency_frames: inputs.latency_ms.map_or(0, <[f64]>::len),
        },
    }
}

/// Result of running the pipeline over a generated scenario and scoring it.
#[derive(Clone, Debug)]
pub struct Scored {
    pub report: MetricsReport,
    pub run: RunOutput<f64>,
}

/// Runs the configured pipeline over `scenario` and evaluates the output
/// against its ground truth. Finished tracks are kept in `run.tracks`.
pub fn score(scenario: &Scenario, cfg: &RunConfig) -> Result<Scored, EvalError> {
    let fail = |e: &dyn std::fmt::Display| EvalError::Pipeline(e.to_string());
    let mut pcfg = cfg.pipeline_config(scenario.header.native_fps);
    pcfg.keep_tracks = true;
    let predictor = cfg.build_predictor().map_err(|e| fail(&e))?;
    let pipeline = Pipeline::new(pcfg, scenario.header.intrinsics, predictor).map_err(|e| fail(&e))?;
    let run = run(pipeline, &scenario.frames).map_err(|e| fail(&e))?;
    let predictor = cfg.build_predictor().map_err(|e| fail(&e))?;
    let report = evaluate(
        &EvalInputs {
            events: &run.events,
            horizon_seconds: cfg.alerts_header().horizon_seconds,
            pred: &run.dump,
            step: cfg.pred_header().step,
            truth: &scenario.truth,
            latency_ms: None,
            match_tolerance: cfg.match_tolerance,
            assoc_gate: cfg.assoc_gate,
        },
        predictor.as_ref(),
        &cfg.smoother(),
    );
    Ok(Scored { report, run })
}

/// Plot-ready per-track series: truth, observed, smoothed and every
/// prediction, in the semi-local frame. One JSON object per track.
pub fn plot_records(pred: &[PredLine], truth: &GroundTruth, track_to_ped: &BTreeMap<u64, u64>) -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    for line in pred {
        let PredLine::Track(t) = line else { continue };
        let ped = track_to_ped.get(&t.track_id).copied();
        let truth_xy: Vec<Option<[f64; 2]>> = t
            .times
            .iter()
            .map(|&time| ped.and_then(|p| truth.relative_horizontal(p, time)).map(|v| [v.x, v.y]))
            .collect();
        let predictions: Vec<serde_json::Value> = pred
            .iter()
            .filter_map(|l| match l {
                PredLine::Prediction(p) if p.track_id == t.track_id => Some(serde_json::json!({
                    "origin_t": p.origin_t,
                    "points": p.points.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
                })),
                _ => None,
            })
            .collect();
        out.push(serde_json::json!({
            "type": "plot",
            "track_id": t.track_id,
            "pedestrian": ped,
            "times": t.times,
            "truth": truth_xy,
            "observed": t.observed.iter().map(|o| o.map(|p| [p[0], p[1]])).collect::<Vec<_>>(),
            "smoothed": t.smoothed.iter().map(|o| o.map(|p| [p[0], p[1]])).collect::<Vec<_>>(),
            "predictions": predictions,
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::RiskTier;
    use proptest::prelude::*;

    fn line(n: usize, f: impl Fn(usize) -> Vec2<f64>) -> Vec<Vec2<f64>> {
        (0..n).map(f).collect()
    }

    #[test]
    fn ade_fde_examples() {
        let t = line(4, |i| Vec2::new(i as f64, 0.0));
        assert_eq!(ade_fde(&[(t.clone(), t.clone())]).unwrap(), Some((0.0, 0.0)));
        let off = line(4, |i| Vec2::new(i as f64, 1.0));
        assert_eq!(ade_fde(&[(off, t.clone())]).unwrap(), Some((1.0, 1.0)));
        let truth = vec![Vec2::zero(); 3];
        let pred = vec![Vec2::new(0.1, 0.0), Vec2::new(0.2, 0.0), Vec2::new(0.3, 0.0)];
        let (a, f) = ade_fde(&[(pred, truth)]).unwrap().unwrap();
        assert!((a - 0.2).abs() < 1e-12);
        assert!((f - 0.3).abs() < 1e-12);
        assert_eq!(ade_fde(&[]).unwrap(), None);
        assert!(ade_fde(&[(vec![Vec2::zero()], vec![])]).is_err());
    }

    fn alert(t: f64, track: u64) -> AlertEvent<f64> {
        AlertEvent {
            t,
            track_id: track,
            kind: AlertKind::Alert,
            tier: Some(RiskTier::Warn),
            ttc: Some(2.0),
            min_distance: Some(0.1),
        }
    }

    fn iv(ped: u64, start_t: f64) -> CollisionInterval {
        CollisionInterval {
            pedestrian: ped,
            start_frame: (start_t * 30.0) as u64,
            end_frame: (start_t * 30.0) as u64 + 5,
            start_t,
            end_t: start_t + 5.0 / 30.0,
        }
    }

    #[test]
    fn alert_pr_examples() {
        let map: BTreeMap<u64, u64> = [(0, 0), (1, 1), (2, 2)].into_iter().collect();
        let c = alert_pr(&[alert(1.0, 0), alert(2.0, 1)], &[iv(0, 3.0), iv(1, 6.0)], &map, 4.8, 0.4);
        assert_eq!((c.precision(), c.recall(), c.f1()), (Some(1.0), Some(1.0), Some(1.0)));

        let c = alert_pr(&[alert(1.0, 0)], &[], &map, 4.8, 0.4);
        assert_eq!((c.precision(), c.recall()), (Some(0.0), None));

        let c = alert_pr(&[alert(1.0, 0), alert(1.0, 2)], &[iv(0, 3.0), iv(1, 6.0)], &map, 4.8, 0.4);
        assert_eq!((c.precision(), c.recall()), (Some(0.5), Some(0.5)));

        let c = alert_pr(&[], &[], &map, 4.8, 0.4);
        assert_eq!((c.precision(), c.recall(), c.f1()), (None, None, None));
    }

    #[test]
    fn alert_window_bounds() {
        let map: BTreeMap<u64, u64> = [(0, 0)].into_iter().collect();
        let late = alert_pr(&[alert(1.0, 0)], &[iv(0, 1.0 + 5.2 + 0.01)], &map, 4.8, 0.4);
        assert_eq!(late.true_positives, 0);
        let edge = alert_pr(&[alert(1.0, 0)], &[iv(0, 6.2)], &map, 4.8, 0.4);
        assert_eq!(edge.true_positives, 1);
        let after = alert_pr(&[alert(3.5, 0)], &[iv(0, 3.0)], &map, 4.8, 0.4);
        assert_eq!(after.true_positives, 0);
        let twice = alert_pr(&[alert(1.0, 0), alert(2.0, 0)], &[iv(0, 3.0)], &map, 4.8, 0.4);
        assert_eq!((twice.true_positives, twice.false_positives), (1, 1));
    }

    #[test]
    fn latency_examples() {
        assert_eq!(latency_stats(&[1.0; 50]).unwrap(), (1.0, 1.0));
        let mut v = vec![1.0; 99];
        v.push(100.0);
        assert_eq!(latency_stats(&v).unwrap(), (1.0, 100.0));
        assert_eq!(latency_stats(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn merge_is_count_weighted() {
        let a = MetricsReport {
            ade: Some(1.0),
            fde: Some(2.0),
            equivalence_residual_max: Some(1e-12),
            equivalence_residual_mean: Some(1e-13),
            counts: MetricCounts {
                scenarios: 1,
                scored_predictions: 1,
                true_positives: 1,
                equivalence_instants: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let b = MetricsReport {
            ade: Some(4.0),
            fde: Some(5.0),
            equivalence_residual_max: Some(3e-12),
            equivalence_residual_mean: Some(4e-13),
            counts: MetricCounts {
                scenarios: 1,
                scored_predictions: 2,
                false_positives: 1,
                equivalence_instants: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        let m = MetricsReport::merge(&[a, b]);
        assert_eq!(m.ade, Some(3.0));
        assert_eq!(m.fde, Some(4.0));
        assert_eq!(m.precision, Some(0.5));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.equivalence_residual_max, Some(3e-12));
        assert!((m.equivalence_residual_mean.unwrap() - 3e-13).abs() < 1e-25);
        assert_eq!(m.counts.scenarios, 2);
    }

    proptest! {
        #[test]
        fn ade_bounded_by_max_step_error(
            errs in prop::collection::vec(prop::collection::vec(0.0..5.0f64, 1..10), 1..5)
        ) {
            let pairs: Vec<_> = errs
                .iter()
                .map(|e| (e.iter().map(|&x| Vec2::new(x, 0.0)).collect::<Vec<_>>(), vec![Vec2::zero(); e.len()]))
                .collect();
            let (ade, fde) = ade_fde(&pairs).unwrap().unwrap();
            let max = errs.iter().flatten().copied().fold(0.0, f64::max);
            prop_assert!(ade <= max + 1e-12);
            let last_mean = errs.iter().map(|e| *e.last().unwrap()).sum::<f64>() / errs.len() as f64;
            prop_assert!((fde - last_mean).abs() < 1e-12);
        }

        #[test]
        fn pr_is_permutation_invariant(
            times in prop::collection::vec((0.0..10.0f64, 0u64..3), 0..8),
            starts in prop::collection::vec((0.0..12.0f64, 0u64..3), 0..5),
            seed in any::<u64>(),
        ) {
            let map: BTreeMap<u64, u64> = (0..3).map(|i| (i, i)).collect();
            let events: Vec<_> = times.iter().map(|&(t, k)| alert(t, k)).collect();
            let ivs: Vec<_> = starts.iter().map(|&(s, p)| iv(p, s)).collect();
            let base = alert_pr(&events, &ivs, &map, 4.8, 0.4);
            let mut shuffled = events.clone();
            let n = shuffled.len();
            if n > 1 {
                shuffled.rotate_left((seed as usize) % n);
                shuffled.reverse();
            }
            prop_assert_eq!(base, alert_pr(&shuffled, &ivs, &map, 4.8, 0.4));
        }
    }
}
