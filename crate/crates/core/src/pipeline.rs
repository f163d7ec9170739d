//! Whole-file operations: per-video smoothing and tracking, detection
//! evaluation over many frames, and motion analysis of track files.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{extract_trajectories, motion_metrics, Trajectory};
use crate::data::{Detection, GroundTruthFrame, MotionReport, TrackProvenance, TrackRecord};
use crate::detection::{average_precision, match_detections, precision_recall_curve, EvalRecord, PrPoint};
use crate::error::Result;
use crate::geometry::{BoundingBox, ScoredBox};
use crate::smoothing::run_smoothing;
use crate::tracking::{TrackedBox, Tracker, TrackerConfig};

/// Detections grouped by video, each list stably sorted by frame.
pub fn group_by_video(dets: &[Detection]) -> BTreeMap<String, Vec<Detection>> {
    let mut groups: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        groups.entry(d.video_id.clone()).or_default().push(d.clone());
    }
    for list in groups.values_mut() {
        list.sort_by_key(|d| d.frame);
    }
    groups
}

/// Dense per-frame box lists from the first to the last detected frame.
fn dense_frames(dets: &[Detection]) -> (u64, Vec<Vec<ScoredBox>>) {
    let (Some(first), Some(last)) = (dets.first(), dets.last()) else {
        return (0, Vec::new());
    };
    let mut frames = vec![Vec::new(); (last.frame - first.frame + 1) as usize];
    for d in dets {
        frames[(d.frame - first.frame) as usize].push(d.scored());
    }
    (first.frame, frames)
}

fn smooth_video(video_id: &str, dets: &[Detection], iou_link: f64) -> Result<Vec<Detection>> {
    let (first, frames) = dense_frames(dets);
    let smoothed = run_smoothing(&frames, iou_link)?;
    Ok(smoothed
        .into_iter()
        .enumerate()
        .flat_map(|(i, boxes)| {
            boxes.into_iter().map(move |b| Detection {
                video_id: video_id.to_string(),
                frame: first + i as u64,
                bbox: b.bbox,
                score: b.score,
            })
        })
        .collect())
}

/// Runs the three-frame voting pass over every video. Output is ordered by
/// video then frame.
pub fn smooth_detections(dets: &[Detection], iou_link: f64) -> Result<Vec<Detection>> {
    let groups: Vec<(String, Vec<Detection>)> = group_by_video(dets).into_iter().collect();
    let per_video: Vec<Vec<Detection>> = groups
        .par_iter()
        .map(|(v, d)| smooth_video(v, d, iou_link))
        .collect::<Result<_>>()?;
    Ok(per_video.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackOptions {
    pub tracker: TrackerConfig,
    /// Link IoU for the smoothing pass; `None` skips smoothing.
    pub smoothing: Option<f64>,
}

fn track_video(video_id: &str, dets: &[Detection], config: &TrackerConfig) -> Result<Vec<TrackRecord>> {
    let mut tracker = Tracker::new(config.clone())?;
    let (first, frames) = dense_frames(dets);
    let mut last_score: HashMap<u64, f64> = HashMap::new();
    let mut out = Vec::new();
    for (i, boxes) in frames.iter().enumerate() {
        let frame = first + i as u64;
        let plain: Vec<BoundingBox> = boxes.iter().map(|b| b.bbox).collect();
        for tb in tracker.step(frame, &plain)? {
            let score = match tb.detection_index {
                Some(d) => {
                    last_score.insert(tb.identity, boxes[d].score);
                    boxes[d].score
                }
                None => last_score.get(&tb.identity).copied().unwrap_or(0.0),
            };
            out.push(TrackRecord {
                video_id: video_id.to_string(),
                frame,
                bbox: tb.bbox,
                score,
                identity: tb.identity,
                provenance: tb.provenance.into(),
            });
        }
    }
    Ok(out)
}

/// Optional smoothing followed by one independent tracker per video. Output
/// is ordered by video, frame and identity.
pub fn track_detections(dets: &[Detection], opts: &TrackOptions) -> Result<Vec<TrackRecord>> {
    opts.tracker.validate()?;
    let smoothed;
    let dets = match opts.smoothing {
        Some(link) => {
            smoothed = smooth_detections(dets, link)?;
            &smoothed[..]
        }
        None => dets,
    };
    let groups: Vec<(String, Vec<Detection>)> = group_by_video(dets).into_iter().collect();
    let per_video: Vec<Vec<TrackRecord>> = groups
        .par_iter()
        .map(|(v, d)| track_video(v, d, &opts.tracker))
        .collect::<Result<_>>()?;
    Ok(per_video.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub average_precision: f64,
    pub num_ground_truth: usize,
    pub num_predictions: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub curve: Vec<PrPoint>,
}

/// Matches predictions to ground truth frame by frame and scores the pooled
/// outcomes. Predictions on frames without ground truth are false positives.
pub fn evaluate(preds: &[Detection], gts: &[GroundTruthFrame], iou_min: f64) -> Result<EvalReport> {
    type FrameBoxes = (Vec<ScoredBox>, Vec<BoundingBox>);
    let mut keys: BTreeMap<(&str, u64), FrameBoxes> = BTreeMap::new();
    for p in preds {
        keys.entry((p.video_id.as_str(), p.frame)).or_default().0.push(p.scored());
    }
    for g in gts {
        keys.entry((g.video_id.as_str(), g.frame))
            .or_default()
            .1
            .extend(g.boxes.iter().copied());
    }
    let frames: Vec<&FrameBoxes> = keys.values().collect();
    let records: Vec<EvalRecord> = frames
        .par_iter()
        .map(|(p, g)| match_detections(p, g, iou_min))
        .collect::<Result<_>>()?;
    let mut pooled = EvalRecord::default();
    for r in records {
        pooled.merge(r);
    }
    Ok(EvalReport {
        iou_threshold: iou_min,
        average_precision: average_precision(&pooled)?,
        num_ground_truth: pooled.num_gt,
        num_predictions: pooled.outcomes.len(),
        true_positives: pooled.true_positives(),
        false_positives: pooled.false_positives(),
        false_negatives: pooled.false_negatives(),
        curve: precision_recall_curve(&pooled)?,
    })
}

pub fn track_records_to_boxes(records: &[TrackRecord]) -> Vec<TrackedBox> {
    records
        .iter()
        .map(|r| TrackedBox {
            frame_index: r.frame,
            identity: r.identity,
            bbox: r.bbox,
            provenance: r.provenance.into(),
            detection_index: None,
        })
        .collect()
}

/// Trajectories and motion report for one video of a track file.
pub fn analyze_video(
    records: &[TrackRecord],
    video_id: &str,
    fps: Option<f64>,
) -> Result<(Vec<Trajectory>, MotionReport)> {
    let mine: Vec<TrackRecord> = records.iter().filter(|r| r.video_id == video_id).cloned().collect();
    let trajectories = extract_trajectories(&track_records_to_boxes(&mine));
    let tracks = trajectories
        .iter()
        .map(|t| motion_metrics(t, fps))
        .collect::<Result<_>>()?;
    Ok((
        trajectories,
        MotionReport {
            video_id: video_id.to_string(),
            fps,
            tracks,
        },
    ))
}

/// Counts records of each provenance.
pub fn provenance_counts(records: &[TrackRecord]) -> (usize, usize) {
    let det = records
        .iter()
        .filter(|r| r.provenance == TrackProvenance::Detected)
        .count();
    (det, records.len() - det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrackProvenance;

    fn det(v: &str, f: u64, x: f64, score: f64) -> Detection {
        Detection {
            video_id: v.into(),
            frame: f,
            bbox: BoundingBox::new(x, 10.0, x + 30.0, 40.0).unwrap(),
            score,
        }
    }

    #[test]
    fn grouping_sorts_frames_stably() {
        let dets = vec![det("b", 2, 0.0, 0.5), det("a", 1, 0.0, 0.5), det("b", 1, 5.0, 0.5)];
        let g = group_by_video(&dets);
        assert_eq!(g.keys().collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(g["b"].iter().map(|d| d.frame).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn missing_frames_become_predictions() {
        let dets = vec![det("v", 0, 0.0, 0.9), det("v", 1, 2.0, 0.8), det("v", 4, 8.0, 0.7)];
        let tracks = track_detections(&dets, &TrackOptions::default()).unwrap();
        let frames: Vec<u64> = tracks.iter().map(|t| t.frame).collect();
        assert_eq!(frames, vec![0, 1, 2, 3, 4]);
        assert_eq!(tracks[2].provenance, TrackProvenance::Predicted);
        assert_eq!(tracks[2].score, 0.8);
        assert!(tracks.iter().all(|t| t.identity == 0));
        assert_eq!(provenance_counts(&tracks), (3, 2));
    }

    #[test]
    fn smoothing_fills_single_gap() {
        let dets = vec![det("v", 0, 0.0, 0.9), det("v", 2, 4.0, 0.5)];
        let out = smooth_detections(&dets, 0.3).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].frame, 1);
        assert_eq!(out[1].bbox.x1(), 2.0);
        assert!((out[1].score - 0.7).abs() < 1e-15);
    }

    #[test]
    fn evaluate_perfect_and_empty() {
        let gt = vec![GroundTruthFrame {
            video_id: "v".into(),
            frame: 0,
            boxes: vec![det("v", 0, 0.0, 1.0).bbox],
        }];
        let perfect = evaluate(&[det("v", 0, 0.0, 0.9)], &gt, 0.5).unwrap();
        assert_eq!(perfect.average_precision, 1.0);
        assert_eq!((perfect.true_positives, perfect.false_negatives), (1, 0));
        let none = evaluate(&[], &gt, 0.5).unwrap();
        assert_eq!(none.average_precision, 0.0);
        assert_eq!(none.false_negatives, 1);
        let stray = evaluate(&[det("w", 3, 0.0, 0.9)], &gt, 0.5).unwrap();
        assert_eq!(stray.false_positives, 1);
        assert!(evaluate(&[det("v", 0, 0.0, 0.9)], &[], 0.5).is_err());
    }
}
