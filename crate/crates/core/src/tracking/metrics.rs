use std::collections::BTreeMap;

use crate::error::Result;
use crate::geometry::BoundingBox;
use crate::tracking::hungarian::hungarian;

/// CLEAR-MOT style identity bookkeeping against labelled ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IdentityReport {
    pub matches: usize,
    pub misses: usize,
    pub false_positives: usize,
    /// Times a ground-truth object was matched to a different track id than
    /// at its previous match.
    pub identity_switches: usize,
}

/// Scores per-frame hypotheses `(track_id, box)` against ground truth
/// `(object_id, box)`. Frames pair up by position in the two slices; a pair
/// counts as a match when IoU reaches `iou_min` under the optimal assignment.
pub fn count_identity_switches(
    truth: &[Vec<(u64, BoundingBox)>],
    hypotheses: &[Vec<(u64, BoundingBox)>],
    iou_min: f64,
) -> Result<IdentityReport> {
    let mut report = IdentityReport::default();
    let mut last_match: BTreeMap<u64, u64> = BTreeMap::new();
    let empty = Vec::new();
    for (f, gts) in truth.iter().enumerate() {
        let hyps = hypotheses.get(f).unwrap_or(&empty);
        let cost: Vec<Vec<f64>> = gts
            .iter()
            .map(|(_, g)| hyps.iter().map(|(_, h)| 1.0 - g.iou(h)).collect())
            .collect();
        let mut matched = 0;
        if !gts.is_empty() && !hyps.is_empty() {
            for (g, h) in hungarian(&cost)? {
                if gts[g].1.iou(&hyps[h].1) < iou_min {
                    continue;
                }
                matched += 1;
                let (obj, track) = (gts[g].0, hyps[h].0);
                if let Some(prev) = last_match.insert(obj, track) {
                    if prev != track {
                        report.identity_switches += 1;
                    }
                }
            }
        }
        report.matches += matched;
        report.misses += gts.len() - matched;
        report.false_positives += hyps.len() - matched;
    }
    Ok(report)
}
