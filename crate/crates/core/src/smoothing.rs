//! Three-frame max-voting cleanup of per-frame detections.
//!
//! Each interior frame is compared with its immediate neighbours. A box seen
//! in both neighbours but missing in the middle is filled in by midpoint
//! interpolation; a box seen only in the middle is dropped. Windows always
//! read the uncorrected input, so the result does not depend on the order in
//! which frames are processed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ScoredBox};

pub const DEFAULT_IOU_LINK: f64 = 0.3;

/// Coordinate-wise `(1 - alpha) * a + alpha * b`.
pub fn interpolate_box(a: &BoundingBox, b: &BoundingBox, alpha: f64) -> Result<BoundingBox> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!(
            "interpolation weight must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(*a);
    }
    if alpha == 1.0 {
        return Ok(*b);
    }
    let ca = a.corners();
    let cb = b.corners();
    let mix = |i: usize| (1.0 - alpha) * ca[i] + alpha * cb[i];
    BoundingBox::new(mix(0), mix(1), mix(2), mix(3))
}

/// Detections of three consecutive frames `t-1, t, t+1`.
#[derive(Debug, Clone, Copy)]
pub struct FrameWindow<'a> {
    pub prev: &'a [ScoredBox],
    pub mid: &'a [ScoredBox],
    pub next: &'a [ScoredBox],
}

/// One-to-one links between two box lists, taken greedily by descending IoU.
/// Equal IoUs resolve toward lower `(a, b)` indices.
fn greedy_links(a: &[ScoredBox], b: &[ScoredBox], iou_link: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let iou = x.bbox.iou(&y.bbox);
            if iou >= iou_link {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut links = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            links.push((i, j));
        }
    }
    links
}

fn check_link(iou_link: f64) -> Result<()> {
    if !(iou_link > 0.0 && iou_link < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "link IoU must lie in (0, 1), got {iou_link}"
        )));
    }
    Ok(())
}

/// Corrected middle frame. Kept boxes stay in input order; inserted boxes
/// follow, ordered by their supporting box in the previous frame.
pub fn smooth_window(w: &FrameWindow<'_>, iou_link: f64) -> Result<Vec<ScoredBox>> {
    check_link(iou_link)?;
    let mid_prev = greedy_links(w.mid, w.prev, iou_link);
    let mid_next = greedy_links(w.mid, w.next, iou_link);

    let mut mid_supported = vec![false; w.mid.len()];
    let mut prev_linked = vec![false; w.prev.len()];
    let mut next_linked = vec![false; w.next.len()];
    for &(m, p) in &mid_prev {
        mid_supported[m] = true;
        prev_linked[p] = true;
    }
    for &(m, n) in &mid_next {
        mid_supported[m] = true;
        next_linked[n] = true;
    }

    let mut out: Vec<ScoredBox> = w
        .mid
        .iter()
        .zip(&mid_supported)
        .filter(|(_, &keep)| keep)
        .map(|(b, _)| *b)
        .collect();

    let orphan_prev: Vec<ScoredBox> = (0..w.prev.len())
        .filter(|&i| !prev_linked[i])
        .map(|i| w.prev[i])
        .collect();
    let orphan_next: Vec<ScoredBox> = (0..w.next.len())
        .filter(|&i| !next_linked[i])
        .map(|i| w.next[i])
        .collect();
    let mut gaps = greedy_links(&orphan_prev, &orphan_next, iou_link);
    gaps.sort_unstable();
    for (p, n) in gaps {
        let (a, b) = (orphan_prev[p], orphan_next[n]);
        out.push(ScoredBox {
            bbox: interpolate_box(&a.bbox, &b.bbox, 0.5)?,
            score: (a.score + b.score) / 2.0,
        });
    }
    Ok(out)
}

/// Applies [`smooth_window`] at every interior frame with stride one. The
/// first and last frames, and sequences shorter than three frames, pass
/// through unchanged.
pub fn run_smoothing(frames: &[Vec<ScoredBox>], iou_link: f64) -> Result<Vec<Vec<ScoredBox>>> {
    check_link(iou_link)?;
    if frames.len() < 3 {
        return Ok(frames.to_vec());
    }
    let last = frames.len() - 1;
    (0..frames.len())
        .into_par_iter()
        .map(|t| {
            if t == 0 || t == last {
                return Ok(frames[t].clone());
            }
            smooth_window(
                &FrameWindow {
                    prev: &frames[t - 1],
                    mid: &frames[t],
                    next: &frames[t + 1],
                },
                iou_link,
            )
        })
        .collect()
}
