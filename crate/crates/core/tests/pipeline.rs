use std::path::Path;

use handtrack::data::{read_detections, read_tracks, write_tracks, Detection, ReadOptions, TrackProvenance};
use handtrack::pipeline::{provenance_counts, smooth_detections, track_detections, TrackOptions};
use handtrack::tracking::{count_identity_switches, Tracker, TrackerConfig};
use handtrack::BoundingBox;

fn corpus() -> Vec<Detection> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/detections.jsonl");
    let file = std::fs::File::open(path).unwrap();
    read_detections(std::io::BufReader::new(file), ReadOptions { strict: true }).unwrap()
}

#[test]
fn corpus_tracks_round_trip_through_jsonl() {
    let opts = TrackOptions {
        smoothing: Some(0.3),
        ..TrackOptions::default()
    };
    let tracks = track_detections(&corpus(), &opts).unwrap();
    let mut buf = Vec::new();
    write_tracks(&mut buf, &tracks).unwrap();
    let back = read_tracks(buf.as_slice(), ReadOptions { strict: true }).unwrap();
    assert_eq!(back, tracks);
    let (det, pred) = provenance_counts(&tracks);
    assert!(det > 0);
    assert_eq!(det + pred, tracks.len());
}

#[test]
fn smoothing_reduces_coasting() {
    let dets = corpus();
    let raw = track_detections(&dets, &TrackOptions::default()).unwrap();
    let smoothed = track_detections(
        &dets,
        &TrackOptions {
            smoothing: Some(0.3),
            ..TrackOptions::default()
        },
    )
    .unwrap();
    let coasting = |t: &[handtrack::data::TrackRecord]| t.iter().filter(|r| r.provenance == TrackProvenance::Predicted).count();
    assert!(coasting(&smoothed) < coasting(&raw));
    assert!(smooth_detections(&dets, 0.3).unwrap().len() >= dets.len() - 20);
}

#[test]
fn scripted_hands_keep_their_identities() {
    // Two hands, 10% of detections missing, judged against the scripted paths.
    let path = |id: usize, f: usize| {
        let (x, y, vx) = if id == 0 { (100.0, 100.0, 2.5) } else { (450.0, 300.0, -2.0) };
        let x = x + vx * f as f64;
        BoundingBox::new(x, y, x + 60.0, y + 70.0).unwrap()
    };
    let mut tracker = Tracker::new(TrackerConfig::default()).unwrap();
    let mut truth = Vec::new();
    let mut hyps = Vec::new();
    for f in 0..80 {
        let gt: Vec<(u64, BoundingBox)> = (0..2).map(|i| (i as u64, path(i, f))).collect();
        let dets: Vec<BoundingBox> = gt
            .iter()
            .filter(|(i, _)| f == 0 || !(f * 7 + *i as usize * 3).is_multiple_of(10))
            .map(|(_, b)| *b)
            .collect();
        let out = tracker.step(f as u64, &dets).unwrap();
        hyps.push(out.iter().map(|t| (t.identity, t.bbox)).collect());
        truth.push(gt);
    }
    let report = count_identity_switches(&truth, &hyps, 0.5).unwrap();
    assert_eq!(report.identity_switches, 0);
    assert_eq!(report.misses, 0);
    assert_eq!(report.false_positives, 0);
    assert_eq!(tracker.identities_minted(), 2);
}
