use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::tracking::hungarian::hungarian;
use crate::tracking::kalman::{kf_init, kf_predict, kf_update, KalmanParams, TrackState, TrackStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Minimum IoU between a prediction and a detection to accept a match.
    pub iou_min: f64,
    /// Frames a track may go unmatched before it leaves the live set.
    pub max_age: u32,
    /// Consecutive matches before a track is reported.
    pub min_hits: u32,
    /// Park exited identities in a FIFO queue and hand them to re-entering
    /// detections instead of deleting them.
    pub reuse_identities: bool,
    pub kalman: KalmanParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_min: 0.3,
            max_age: 3,
            min_hits: 1,
            reuse_identities: true,
            kalman: KalmanParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_min > 0.0 && self.iou_min < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "iou_min must lie in (0, 1), got {}",
                self.iou_min
            )));
        }
        if self.max_age < 1 {
            return Err(Error::InvalidArgument("max_age must be at least 1".into()));
        }
        if self.min_hits < 1 {
            return Err(Error::InvalidArgument("min_hits must be at least 1".into()));
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Detected,
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedBox {
    pub frame_index: u64,
    pub identity: u64,
    pub bbox: BoundingBox,
    pub provenance: Provenance,
    /// Index into the frame's detection list for `Detected` boxes.
    pub detection_index: Option<usize>,
}

/// Result of matching predictions to detections. Indices refer to the input
/// slices; the three sets partition them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Hungarian matching on `1 - IoU`; pairs below `iou_min` are split apart.
pub fn associate(
    predicted: &[(u64, BoundingBox)],
    detections: &[BoundingBox],
    iou_min: f64,
) -> Result<Association> {
    if !(iou_min > 0.0 && iou_min < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "iou_min must lie in (0, 1), got {iou_min}"
        )));
    }
    let cost: Vec<Vec<f64>> = predicted
        .iter()
        .map(|(_, p)| detections.iter().map(|d| 1.0 - p.iou(d)).collect())
        .collect();
    let mut track_used = vec![false; predicted.len()];
    let mut det_used = vec![false; detections.len()];
    let mut out = Association::default();
    if !predicted.is_empty() && !detections.is_empty() {
        for (t, d) in hungarian(&cost)? {
            if predicted[t].1.iou(&detections[d]) >= iou_min {
                track_used[t] = true;
                det_used[d] = true;
                out.matches.push((t, d));
            }
        }
    }
    out.unmatched_tracks = (0..predicted.len()).filter(|&t| !track_used[t]).collect();
    out.unmatched_detections = (0..detections.len()).filter(|&d| !det_used[d]).collect();
    Ok(out)
}

/// SORT tracker over a single video.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<TrackState>,
    dormant: VecDeque<u64>,
    next_identity: u64,
    last_frame: Option<u64>,
    peak_live: usize,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            dormant: VecDeque::new(),
            next_identity: 0,
            last_frame: None,
            peak_live: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Tracks with Kalman state, in creation order.
    pub fn live_tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Identities waiting for reuse, oldest first.
    pub fn dormant_queue(&self) -> impl Iterator<Item = u64> + '_ {
        self.dormant.iter().copied()
    }

    /// Number of distinct identities created so far.
    pub fn identities_minted(&self) -> u64 {
        self.next_identity
    }

    /// Largest number of simultaneously live tracks seen after any step.
    pub fn peak_live(&self) -> usize {
        self.peak_live
    }

    /// Advances one frame. Zero-area detections are ignored.
    pub fn step(&mut self, frame_index: u64, detections: &[BoundingBox]) -> Result<Vec<TrackedBox>> {
        if let Some(previous) = self.last_frame {
            if frame_index <= previous {
                return Err(Error::OutOfOrderFrame {
                    previous,
                    got: frame_index,
                });
            }
        }
        self.last_frame = Some(frame_index);
        let params = self.config.kalman;

        let usable: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].width() > 0.0 && detections[i].height() > 0.0)
            .collect();
        let usable_boxes: Vec<BoundingBox> = usable.iter().map(|&i| detections[i]).collect();

        let mut predicted_states = Vec::with_capacity(self.tracks.len());
        let mut predicted_boxes = Vec::with_capacity(self.tracks.len());
        for track in &self.tracks {
            let (csr, state) = kf_predict(track, &params)?;
            predicted_boxes.push((track.identity, csr.to_bbox()?));
            predicted_states.push(state);
        }

        let assoc = associate(&predicted_boxes, &usable_boxes, self.config.iou_min)?;

        // Reported box per track index: (box, provenance, detection index).
        let mut reported: Vec<Option<(BoundingBox, Provenance, Option<usize>)>> =
            vec![None; predicted_states.len()];
        for &(t, d) in &assoc.matches {
            let z = usable_boxes[d].to_csr()?;
            let mut state = kf_update(&predicted_states[t], &z, &params)?;
            if state.hits >= self.config.min_hits {
                state.status = TrackStatus::Active;
            }
            predicted_states[t] = state;
            reported[t] = Some((usable_boxes[d], Provenance::Detected, Some(usable[d])));
        }

        let mut expired = vec![false; predicted_states.len()];
        for &t in &assoc.unmatched_tracks {
            let state = &mut predicted_states[t];
            state.misses += 1;
            state.hits = 0;
            if state.misses > self.config.max_age {
                expired[t] = true;
            } else {
                reported[t] = Some((predicted_boxes[t].1, Provenance::Predicted, None));
            }
        }

        let mut survivors = Vec::with_capacity(predicted_states.len());
        let mut survivor_reports = Vec::with_capacity(predicted_states.len());
        for (t, state) in predicted_states.into_iter().enumerate() {
            if expired[t] {
                if self.config.reuse_identities {
                    self.dormant.push_back(state.identity);
                }
            } else {
                survivors.push(state);
                survivor_reports.push(reported[t]);
            }
        }
        self.tracks = survivors;

        for &d in &assoc.unmatched_detections {
            let identity = match self.config.reuse_identities {
                true => self.dormant.pop_front(),
                false => None,
            }
            .unwrap_or_else(|| {
                let id = self.next_identity;
                self.next_identity += 1;
                id
            });
            let mut state = kf_init(&usable_boxes[d].to_csr()?, identity, &params)?;
            if state.hits >= self.config.min_hits {
                state.status = TrackStatus::Active;
            }
            self.tracks.push(state);
            survivor_reports.push(Some((usable_boxes[d], Provenance::Detected, Some(usable[d]))));
        }
        self.peak_live = self.peak_live.max(self.tracks.len());

        let mut out: Vec<TrackedBox> = self
            .tracks
            .iter()
            .zip(survivor_reports)
            .filter(|(state, _)| state.status == TrackStatus::Active)
            .filter_map(|(state, rep)| {
                rep.map(|(bbox, provenance, detection_index)| TrackedBox {
                    frame_index,
                    identity: state.identity,
                    bbox,
                    provenance,
                    detection_index,
                })
            })
            .collect();
        out.sort_by_key(|t| t.identity);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    fn square(cx: f64, cy: f64, side: f64) -> BoundingBox {
        BoundingBox::from_center(cx, cy, side, side).unwrap()
    }

    #[test]
    fn associate_examples() {
        let a = bx(0., 0., 10., 10.);
        let near = bx(0., 0., 10., 9.);
        let res = associate(&[(0, a)], &[near], 0.3).unwrap();
        assert_eq!(res.matches, vec![(0, 0)]);

        let far = bx(8., 8., 18., 18.);
        assert!(a.iou(&far) < 0.3);
        let res = associate(&[(0, a)], &[far], 0.3).unwrap();
        assert!(res.matches.is_empty());
        assert_eq!((res.unmatched_tracks, res.unmatched_detections), (vec![0], vec![0]));

        let res = associate(&[], &[a], 0.3).unwrap();
        assert_eq!(res.unmatched_detections, vec![0]);
        assert!(associate(&[], &[], 0.0).is_err());
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn associate_crossing_instance_matches_brute_force() {
        // Four tracks converging on a crossing; detections shifted along
        // each track's heading.
        let tracks = [
            (0, square(40., 40., 20.)),
            (1, square(60., 40., 20.)),
            (2, square(40., 60., 20.)),
            (3, square(60., 60., 20.)),
        ];
        let dets = [
            square(46., 45., 20.),
            square(55., 44., 20.),
            square(44., 56., 20.),
            square(54., 54., 20.),
        ];
        let res = associate(&tracks, &dets, 0.05).unwrap();
        let total: f64 = res.matches.iter().map(|&(t, d)| tracks[t].1.iou(&dets[d])).sum();
        let best = permutations(4)
            .into_iter()
            .map(|p| (0..4).map(|t| tracks[t].1.iou(&dets[p[t]])).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.matches.len(), 4);
        assert!((total - best).abs() < 1e-12);
    }

    #[test]
    fn single_linear_target_keeps_identity() {
        let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
        for f in 0..20 {
            let out = tracker.step(f, &[square(100. + 3. * f as f64, 80., 40.)]).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].identity, 0);
            assert_eq!(out[0].provenance, Provenance::Detected);
        }
        assert_eq!(tracker.identities_minted(), 1);
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
        tracker.step(5, &[]).unwrap();
        assert!(matches!(tracker.step(5, &[]), Err(Error::OutOfOrderFrame { .. })));
        assert!(tracker.step(4, &[]).is_err());
    }

    #[test]
    fn config_validation() {
        for cfg in [
            TrackerConfig { iou_min: 0.0, ..Default::default() },
            TrackerConfig { iou_min: 1.0, ..Default::default() },
            TrackerConfig { max_age: 0, ..Default::default() },
            TrackerConfig { min_hits: 0, ..Default::default() },
        ] {
            assert!(Tracker::new(cfg).is_err());
        }
    }

    #[test]
    fn coasting_reports_predictions_then_goes_dormant() {
        let cfg = TrackerConfig::default();
        let mut tracker = Tracker::new(cfg.clone()).unwrap();
        tracker.step(0, &[square(50., 50., 20.)]).unwrap();
        for f in 1..=cfg.max_age as u64 {
            let out = tracker.step(f, &[]).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].provenance, Provenance::Predicted);
        }
        let out = tracker.step(cfg.max_age as u64 + 1, &[]).unwrap();
        assert!(out.is_empty());
        assert!(tracker.live_tracks().is_empty());
        assert_eq!(tracker.dormant_queue().collect::<Vec<_>>(), vec![0]);
    }

    fn exit_reentry(reuse: bool) -> Vec<Vec<TrackedBox>> {
        let cfg = TrackerConfig { reuse_identities: reuse, ..Default::default() };
        let gap = cfg.max_age as u64 + 2;
        let mut tracker = Tracker::new(cfg).unwrap();
        let mut frames = Vec::new();
        for f in 0..30u64 {
            let present = !(10..10 + gap).contains(&f);
            let dets: Vec<BoundingBox> =
                if present { vec![square(100., 100., 30.)] } else { vec![] };
            frames.push(tracker.step(f, &dets).unwrap());
        }
        frames
    }

    #[test]
    fn reentry_reuses_identity_only_when_enabled() {
        let with = exit_reentry(true);
        let without = exit_reentry(false);
        assert_eq!(with[9][0].identity, with[29][0].identity);
        assert_ne!(without[9][0].identity, without[29][0].identity);
        assert_eq!(without[29][0].identity, 1);
    }

    #[test]
    fn dormant_queue_is_fifo() {
        let cfg = TrackerConfig::default();
        let mut tracker = Tracker::new(cfg).unwrap();
        let a = square(50., 50., 20.);
        let b = square(300., 50., 20.);
        let c = square(50., 300., 20.);
        tracker.step(0, &[a, b]).unwrap();
        // b vanishes first, a one frame later.
        tracker.step(1, &[a]).unwrap();
        for f in 2..8 {
            tracker.step(f, &[]).unwrap();
        }
        assert_eq!(tracker.dormant_queue().collect::<Vec<_>>(), vec![1, 0]);
        let out = tracker.step(8, &[c]).unwrap();
        assert_eq!(out[0].identity, 1);
        assert_eq!(tracker.dormant_queue().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn crossing_targets_follow_motion() {
        let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
        // A moves right, B moves left, offset vertically so they overlap
        // while crossing. Per-frame displacement 4 px < box width 40 px.
        let mut seen_a = std::collections::BTreeSet::new();
        let mut seen_b = std::collections::BTreeSet::new();
        for f in 0..60u64 {
            let t = f as f64;
            let a = square(60. + 4. * t, 100., 40.);
            let b = square(300. - 4. * t, 110., 40.);
            let out = tracker.step(f, &[b, a]).unwrap();
            for tb in out {
                match tb.detection_index {
                    Some(1) => seen_a.insert(tb.identity),
                    Some(0) => seen_b.insert(tb.identity),
                    _ => unreachable!(),
                };
            }
        }
        assert_eq!(seen_a.len(), 1);
        assert_eq!(seen_b.len(), 1);
        assert_ne!(seen_a, seen_b);
    }

    #[test]
    fn degenerate_detections_are_ignored() {
        let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
        let out = tracker.step(0, &[bx(5., 5., 5., 9.), square(50., 50., 10.)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].detection_index, Some(1));
    }

    #[test]
    fn min_hits_delays_reporting() {
        let cfg = TrackerConfig { min_hits: 3, ..Default::default() };
        let mut tracker = Tracker::new(cfg).unwrap();
        let counts: Vec<usize> = (0..5)
            .map(|f| tracker.step(f, &[square(50., 50., 20.)]).unwrap().len())
            .collect();
        assert_eq!(counts, vec![0, 0, 1, 1, 1]);
    }
}
