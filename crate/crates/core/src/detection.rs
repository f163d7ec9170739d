//! Detection-side math: focal loss, anchors, box regression loss and AP@IoU.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ScoredBox};

/// Lower clamp applied to `p_t` before taking the log.
pub const LOG_EPSILON: f64 = 1e-12;

/// Anchors and predictions at or above this IoU count as positive.
pub const POSITIVE_IOU: f64 = 0.5;

pub const DEFAULT_GAMMA: f64 = 2.0;

/// Ground-truth class of a binary classification target (`y` in `{-1, +1}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Positive,
    Negative,
}

impl Target {
    fn sign(self) -> f64 {
        match self {
            Target::Positive => 1.0,
            Target::Negative => -1.0,
        }
    }
}

impl TryFrom<i32> for Target {
    type Error = Error;

    fn try_from(y: i32) -> Result<Self> {
        match y {
            1 => Ok(Target::Positive),
            -1 => Ok(Target::Negative),
            other => Err(Error::InvalidArgument(format!(
                "class label must be -1 or +1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLossInput {
    pub p: f64,
    pub y: Target,
    pub gamma: f64,
}

impl FocalLossInput {
    pub fn new(p: f64, y: Target, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "probability must lie in [0, 1], got {p}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "focusing parameter must be >= 0, got {gamma}"
            )));
        }
        Ok(Self { p, y, gamma })
    }

    pub fn with_default_gamma(p: f64, y: Target) -> Result<Self> {
        Self::new(p, y, DEFAULT_GAMMA)
    }

    /// Probability assigned to the true class.
    pub fn p_t(&self) -> f64 {
        match self.y {
            Target::Positive => self.p,
            Target::Negative => 1.0 - self.p,
        }
    }
}

/// `FL(p_t) = -(1 - p_t)^gamma * log(p_t)`.
pub fn focal_loss(input: &FocalLossInput) -> Result<f64> {
    let input = FocalLossInput::new(input.p, input.y, input.gamma)?;
    let p_t = input.p_t();
    if p_t >= 1.0 {
        return Ok(0.0);
    }
    let p_t = p_t.max(LOG_EPSILON);
    Ok(-(1.0 - p_t).powf(input.gamma) * p_t.ln())
}

/// Analytic `d FL / d p`. Refuses `p` at 0 or 1 where the derivative blows up.
pub fn focal_loss_grad(input: &FocalLossInput) -> Result<f64> {
    let input = FocalLossInput::new(input.p, input.y, input.gamma)?;
    if input.p <= 0.0 || input.p >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "gradient requires p strictly inside (0, 1), got {}",
            input.p
        )));
    }
    let q = input.p_t();
    let g = input.gamma;
    let one_minus = 1.0 - q;
    // d/dq of -(1-q)^g ln q
    let modulating_term = if g == 0.0 {
        0.0
    } else {
        g * one_minus.powf(g - 1.0) * q.ln()
    };
    let d_dq = modulating_term - one_minus.powf(g) / q;
    Ok(input.y.sign() * d_dq)
}

/// Sum of squared differences over the four corner coordinates.
pub fn l2_box_loss(pred: &BoundingBox, target: &BoundingBox) -> f64 {
    pred.corners()
        .iter()
        .zip(target.corners())
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}

/// Anchor tiling parameters.
///
/// Anchors on the first pyramid level have side `base_size * scale`; deeper
/// levels grow proportionally to their stride relative to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    pub strides: Vec<f64>,
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    pub base_size: f64,
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("strides", &self.strides),
            ("scales", &self.scales),
            ("ratios", &self.ratios),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidArgument(format!("anchor {name} is empty")));
            }
            if let Some(bad) = list.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "anchor {name} must be positive, got {bad}"
                )));
            }
        }
        if !(self.base_size > 0.0 && self.base_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "anchor base size must be positive, got {}",
                self.base_size
            )));
        }
        Ok(())
    }

    /// Number of anchors [`generate_anchors`] produces for an image.
    pub fn anchor_count(&self, image_w: f64, image_h: f64) -> usize {
        let per_cell = self.scales.len() * self.ratios.len();
        self.strides
            .iter()
            .map(|s| (image_w / s).ceil() as usize * (image_h / s).ceil() as usize * per_cell)
            .sum()
    }
}

/// Tiles anchors over a grid per stride. Centers sit at `(i + 0.5) * stride`;
/// x varies fastest, then y, then scale, then ratio. Anchors are not clipped.
pub fn generate_anchors(
    config: &AnchorConfig,
    image_w: f64,
    image_h: f64,
) -> Result<Vec<BoundingBox>> {
    config.validate()?;
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "image size must be positive, got {image_w}x{image_h}"
        )));
    }
    let first_stride = config.strides[0];
    let mut anchors = Vec::with_capacity(config.anchor_count(image_w, image_h));
    for &stride in &config.strides {
        let nx = (image_w / stride).ceil() as usize;
        let ny = (image_h / stride).ceil() as usize;
        let level_size = config.base_size * stride / first_stride;
        for row in 0..ny {
            let cy = (row as f64 + 0.5) * stride;
            for col in 0..nx {
                let cx = (col as f64 + 0.5) * stride;
                for &scale in &config.scales {
                    let side = level_size * scale;
                    for &ratio in &config.ratios {
                        let w = side * ratio.sqrt();
                        let h = side / ratio.sqrt();
                        anchors.push(BoundingBox::from_center(cx, cy, w, h)?);
                    }
                }
            }
        }
    }
    Ok(anchors)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorLabel {
    Positive { gt_index: usize },
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorMatch {
    pub label: AnchorLabel,
    /// Best IoU against any ground-truth box (0 when there are none).
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnchorAssignment {
    pub anchors: Vec<AnchorMatch>,
}

impl AnchorAssignment {
    pub fn positive_count(&self) -> usize {
        self.anchors
            .iter()
            .filter(|m| matches!(m.label, AnchorLabel::Positive { .. }))
            .count()
    }

    pub fn background_count(&self) -> usize {
        self.anchors.len() - self.positive_count()
    }
}

/// Labels each anchor positive for its best ground truth when IoU >= 0.5,
/// background otherwise. Ties between ground truths go to the lower index.
pub fn assign_anchors(anchors: &[BoundingBox], gts: &[BoundingBox]) -> AnchorAssignment {
    let anchors = anchors
        .iter()
        .map(|anchor| {
            let best = gts
                .iter()
                .enumerate()
                .map(|(i, gt)| (i, anchor.iou(gt)))
                .fold(None::<(usize, f64)>, |best, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                });
            match best {
                Some((gt_index, iou)) if iou >= POSITIVE_IOU => AnchorMatch {
                    label: AnchorLabel::Positive { gt_index },
                    iou,
                },
                Some((_, iou)) => AnchorMatch {
                    label: AnchorLabel::Background,
                    iou,
                },
                None => AnchorMatch {
                    label: AnchorLabel::Background,
                    iou: 0.0,
                },
            }
        })
        .collect();
    AnchorAssignment { anchors }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredOutcome {
    pub score: f64,
    pub true_positive: bool,
}

/// Per-prediction TP/FP outcomes plus the ground-truth count they were
/// matched against. Records from several frames merge by concatenation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalRecord {
    pub outcomes: Vec<ScoredOutcome>,
    pub num_gt: usize,
}

impl EvalRecord {
    pub fn merge(&mut self, other: EvalRecord) {
        self.outcomes.extend(other.outcomes);
        self.num_gt += other.num_gt;
    }

    pub fn true_positives(&self) -> usize {
        self.outcomes.iter().filter(|o| o.true_positive).count()
    }

    pub fn false_positives(&self) -> usize {
        self.outcomes.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.num_gt - self.true_positives()
    }
}

/// Greedy matching in descending confidence order (ties keep input order).
/// Each prediction takes the highest-IoU ground truth that is still free,
/// provided that IoU reaches `iou_min`. Outcomes keep the input order.
pub fn match_detections(
    preds: &[ScoredBox],
    gts: &[BoundingBox],
    iou_min: f64,
) -> Result<EvalRecord> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "IoU threshold must lie in (0, 1], got {iou_min}"
        )));
    }
    let order = descending_order(preds.iter().map(|p| p.score));
    let mut taken = vec![false; gts.len()];
    let mut outcomes: Vec<ScoredOutcome> = preds
        .iter()
        .map(|p| ScoredOutcome {
            score: p.score,
            true_positive: false,
        })
        .collect();
    for idx in order {
        let pred = &preds[idx].bbox;
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let iou = pred.iou(gt);
            if iou >= iou_min && best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            outcomes[idx].true_positive = true;
        }
    }
    Ok(EvalRecord {
        outcomes,
        num_gt: gts.len(),
    })
}

fn descending_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Cumulative precision/recall after each prediction in descending score order.
pub fn precision_recall_curve(record: &EvalRecord) -> Result<Vec<PrPoint>> {
    if record.num_gt == 0 {
        return Err(Error::UndefinedAp);
    }
    let order = descending_order(record.outcomes.iter().map(|o| o.score));
    let (mut tp, mut fp) = (0usize, 0usize);
    Ok(order
        .into_iter()
        .map(|i| {
            let o = record.outcomes[i];
            if o.true_positive {
                tp += 1;
            } else {
                fp += 1;
            }
            PrPoint {
                score: o.score,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / record.num_gt as f64,
            }
        })
        .collect())
}

/// All-point interpolated AP: area under the monotone precision envelope.
pub fn average_precision(record: &EvalRecord) -> Result<f64> {
    let curve = precision_recall_curve(record)?;
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (point, precision) in curve.iter().zip(envelope) {
        if point.recall > prev_recall {
            ap += (point.recall - prev_recall) * precision;
            prev_recall = point.recall;
        }
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn fl(p: f64, y: i32, gamma: f64) -> FocalLossInput {
        FocalLossInput::new(p, Target::try_from(y).unwrap(), gamma).unwrap()
    }

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn focal_loss_examples() {
        for g in [0.0, 0.5, 2.0, 5.0] {
            assert_eq!(focal_loss(&fl(1.0, 1, g)).unwrap(), 0.0);
        }
        let ce = focal_loss(&fl(0.5, 1, 0.0)).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        // p = 0.9, y = -1, gamma = 2: p_t = 0.1, FL = -(0.9)^2 ln(0.1) = 0.81 ln 10.
        let v = focal_loss(&fl(0.9, -1, 2.0)).unwrap();
        assert!((v - 1.865_093_925_325_177).abs() < 1e-12, "{v}");
    }

    #[test]
    fn focal_loss_rejects_bad_inputs() {
        assert!(FocalLossInput::new(1.2, Target::Positive, 2.0).is_err());
        assert!(FocalLossInput::new(-0.1, Target::Positive, 2.0).is_err());
        assert!(FocalLossInput::new(0.5, Target::Positive, -1.0).is_err());
        assert!(Target::try_from(0).is_err());
        let raw = FocalLossInput {
            p: 2.0,
            y: Target::Positive,
            gamma: 1.0,
        };
        assert!(focal_loss(&raw).is_err());
    }

    #[test]
    fn focal_loss_clamps_log() {
        let v = focal_loss(&fl(0.0, 1, 0.0)).unwrap();
        assert!((v - (-(LOG_EPSILON).ln())).abs() < 1e-9);
    }

    #[test]
    fn focal_grad_examples() {
        assert_eq!(focal_loss_grad(&fl(0.5, 1, 0.0)).unwrap(), -2.0);
        assert_eq!(focal_loss_grad(&fl(0.5, -1, 0.0)).unwrap(), 2.0);
        let input = fl(0.7, 1, 2.0);
        let h = 1e-6;
        let fd = (focal_loss(&fl(0.7 + h, 1, 2.0)).unwrap()
            - focal_loss(&fl(0.7 - h, 1, 2.0)).unwrap())
            / (2.0 * h);
        let g = focal_loss_grad(&input).unwrap();
        assert!(((g - fd) / fd).abs() < 1e-5);
        assert!(focal_loss_grad(&fl(0.0, 1, 2.0)).is_err());
        assert!(focal_loss_grad(&fl(1.0, -1, 2.0)).is_err());
    }

    #[test]
    fn focal_loss_properties() {
        for y in [1, -1] {
            for g in [0.0, 0.5, 1.0, 2.0, 5.0] {
                let mut last = f64::INFINITY;
                for i in 1..100 {
                    let p = i as f64 / 100.0;
                    let input = fl(p, y, g);
                    let v = focal_loss(&input).unwrap();
                    assert!(v >= 0.0);
                    if y == 1 {
                        assert!(v < last, "not decreasing in p_t");
                        last = v;
                    }
                }
            }
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let mut prev = f64::INFINITY;
                for g in [0.0, 0.5, 1.0, 2.0, 5.0] {
                    let v = focal_loss(&fl(p, y, g)).unwrap();
                    assert!(v <= prev);
                    prev = v;
                }
                let ce = focal_loss(&fl(p, y, 0.0)).unwrap();
                assert!((ce + fl(p, y, 0.0).p_t().ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l2_examples() {
        let a = bx(0., 0., 1., 1.);
        assert_eq!(l2_box_loss(&a, &a), 0.0);
        assert_eq!(l2_box_loss(&a, &bx(1., 1., 2., 2.)), 4.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut rb = || {
                let x = rng.gen_range(0.0..100.0);
                let y = rng.gen_range(0.0..100.0);
                bx(x, y, x + rng.gen_range(0.0..50.0), y + rng.gen_range(0.0..50.0))
            };
            let (p, t) = (rb(), rb());
            let mut acc = 0.0;
            acc += (p.x1() - t.x1()) * (p.x1() - t.x1());
            acc += (p.y1() - t.y1()) * (p.y1() - t.y1());
            acc += (p.x2() - t.x2()) * (p.x2() - t.x2());
            acc += (p.y2() - t.y2()) * (p.y2() - t.y2());
            assert_eq!(l2_box_loss(&p, &t), acc);
        }
    }

    #[test]
    fn anchor_grid_example() {
        let cfg = AnchorConfig {
            strides: vec![8.0],
            scales: vec![1.0],
            ratios: vec![1.0],
            base_size: 8.0,
        };
        let anchors = generate_anchors(&cfg, 16.0, 16.0).unwrap();
        let expected = [(4., 4.), (12., 4.), (4., 12.), (12., 12.)];
        assert_eq!(anchors.len(), 4);
        for (a, c) in anchors.iter().zip(expected) {
            assert_eq!(a.center(), c);
            assert_eq!((a.width(), a.height()), (8.0, 8.0));
        }
    }

    #[test]
    fn anchor_counts_and_ratios() {
        let cfg = AnchorConfig {
            strides: vec![8.0, 16.0, 32.0],
            scales: vec![1.0, 1.26, 1.59],
            ratios: vec![0.5, 1.0, 2.0],
            base_size: 32.0,
        };
        let (w, h) = (100.0, 70.0);
        let anchors = generate_anchors(&cfg, w, h).unwrap();
        let expected: usize = [8.0f64, 16.0, 32.0]
            .iter()
            .map(|s| ((w / s).ceil() * (h / s).ceil()) as usize * 9)
            .sum();
        assert_eq!(anchors.len(), expected);
        assert_eq!(cfg.anchor_count(w, h), expected);

        let square = AnchorConfig {
            ratios: vec![1.0],
            ..cfg.clone()
        };
        for a in generate_anchors(&square, w, h).unwrap() {
            assert!((a.width() - a.height()).abs() < 1e-9);
        }
        for a in &anchors {
            let r = a.width() / a.height();
            assert!([0.5, 1.0, 2.0].iter().any(|x| (x - r).abs() < 1e-9));
        }
    }

    #[test]
    fn anchor_config_errors() {
        let cfg = AnchorConfig {
            strides: vec![],
            scales: vec![1.0],
            ratios: vec![1.0],
            base_size: 8.0,
        };
        assert!(generate_anchors(&cfg, 16.0, 16.0).is_err());
        let cfg = AnchorConfig {
            strides: vec![8.0],
            ..cfg
        };
        assert!(generate_anchors(&cfg, 0.0, 16.0).is_err());
        let cfg = AnchorConfig {
            ratios: vec![-1.0],
            ..cfg
        };
        assert!(generate_anchors(&cfg, 16.0, 16.0).is_err());
    }

    #[test]
    fn assignment_examples() {
        let gt = bx(0., 0., 10., 10.);
        let a = assign_anchors(&[gt], &[gt]);
        assert_eq!(a.anchors[0].label, AnchorLabel::Positive { gt_index: 0 });
        assert_eq!(a.anchors[0].iou, 1.0);

        let a = assign_anchors(&[gt, bx(5., 5., 9., 9.)], &[]);
        assert!(a.anchors.iter().all(|m| m.label == AnchorLabel::Background));

        // Overlap of width w with a 10x10 box shifted horizontally:
        // IoU = 10w / (200 - 10w) = 0.45 at w = 90/14.5.
        let w = 90.0 / 14.5;
        let anchor = bx(10.0 - w, 0., 20.0 - w, 10.);
        let a = assign_anchors(&[anchor], &[gt]);
        assert!((a.anchors[0].iou - 0.45).abs() < 1e-12);
        assert_eq!(a.anchors[0].label, AnchorLabel::Background);

        // Exactly 0.5 is positive: half of the gt, inside it.
        let a = assign_anchors(&[bx(0., 0., 10., 5.)], &[gt]);
        assert_eq!(a.anchors[0].iou, 0.5);
        assert_eq!(a.anchors[0].label, AnchorLabel::Positive { gt_index: 0 });
        assert_eq!(a.positive_count() + a.background_count(), 1);
    }

    #[test]
    fn assignment_picks_best_gt() {
        let gts = [bx(0., 0., 10., 10.), bx(1., 0., 11., 10.)];
        let a = assign_anchors(&[bx(1., 0., 11., 10.)], &gts);
        assert_eq!(a.anchors[0].label, AnchorLabel::Positive { gt_index: 1 });
    }

    fn sb(b: BoundingBox, score: f64) -> ScoredBox {
        ScoredBox { bbox: b, score }
    }

    #[test]
    fn matching_examples() {
        let gt = bx(0., 0., 10., 10.);
        let r = match_detections(&[sb(gt, 0.9)], &[gt], 0.5).unwrap();
        assert_eq!((r.true_positives(), r.false_positives()), (1, 0));

        let r = match_detections(&[sb(gt, 0.3), sb(gt, 0.8)], &[gt], 0.5).unwrap();
        assert!(!r.outcomes[0].true_positive);
        assert!(r.outcomes[1].true_positive);

        // Equal confidence: first in input order wins.
        let r = match_detections(&[sb(gt, 0.5), sb(gt, 0.5)], &[gt], 0.5).unwrap();
        assert!(r.outcomes[0].true_positive && !r.outcomes[1].true_positive);

        assert!(match_detections(&[], &[gt], 0.0).is_err());
        assert!(match_detections(&[], &[gt], 1.5).is_err());
    }

    /// Independent greedy: walk predictions by rank, consume free gts by set lookup.
    fn oracle_match(preds: &[ScoredBox], gts: &[BoundingBox], iou_min: f64) -> Vec<bool> {
        let mut ranked: Vec<usize> = (0..preds.len()).collect();
        for i in 0..ranked.len() {
            for j in 0..ranked.len() - 1 - i {
                if preds[ranked[j]].score < preds[ranked[j + 1]].score {
                    ranked.swap(j, j + 1);
                }
            }
        }
        let mut free: std::collections::BTreeSet<usize> = (0..gts.len()).collect();
        let mut tp = vec![false; preds.len()];
        for i in ranked {
            let cand = free
                .iter()
                .copied()
                .filter(|&g| preds[i].bbox.iou(&gts[g]) >= iou_min)
                .max_by(|&a, &b| {
                    preds[i].bbox.iou(&gts[a]).total_cmp(&preds[i].bbox.iou(&gts[b])).then(b.cmp(&a))
                });
            if let Some(g) = cand {
                free.remove(&g);
                tp[i] = true;
            }
        }
        tp
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
    fn matching_agrees_with_oracle_over_orderings() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let gts: Vec<BoundingBox> = (0..3)
                .map(|_| {
                    let x = rng.gen_range(0.0..30.0);
                    let y = rng.gen_range(0.0..30.0);
                    bx(x, y, x + 10.0, y + 10.0)
                })
                .collect();
            let preds: Vec<ScoredBox> = (0..5)
                .map(|_| {
                    let g = gts[rng.gen_range(0..3)];
                    let b = g
                        .translate(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0))
                        .unwrap();
                    sb(b, rng.gen_range(0.0..1.0))
                })
                .collect();
            let expected = oracle_match(&preds, &gts, 0.5);
            for perm in permutations(5) {
                let shuffled: Vec<ScoredBox> = perm.iter().map(|&i| preds[i]).collect();
                let r = match_detections(&shuffled, &gts, 0.5).unwrap();
                for (k, &i) in perm.iter().enumerate() {
                    assert_eq!(r.outcomes[k].true_positive, expected[i]);
                }
            }
        }
    }

    #[test]
    fn ap_examples() {
        let perfect = EvalRecord {
            outcomes: (0..4)
                .map(|i| ScoredOutcome {
                    score: 0.5 + i as f64 / 10.0,
                    true_positive: true,
                })
                .collect(),
            num_gt: 4,
        };
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);

        let none = EvalRecord {
            outcomes: vec![ScoredOutcome {
                score: 0.9,
                true_positive: false,
            }],
            num_gt: 2,
        };
        assert_eq!(average_precision(&none).unwrap(), 0.0);
        let empty = EvalRecord {
            outcomes: vec![],
            num_gt: 2,
        };
        assert_eq!(average_precision(&empty).unwrap(), 0.0);
        assert!(matches!(
            average_precision(&EvalRecord::default()),
            Err(Error::UndefinedAp)
        ));
    }

    #[test]
    fn ap_hand_computed_staircase() {
        // Ranked: TP, FP, TP, FP, TP with 4 gts.
        // precision: 1, 1/2, 2/3, 2/4, 3/5; recall steps at ranks 1, 3, 5.
        // envelope at those ranks: 1, 2/3, 3/5 -> AP = (1 + 2/3 + 3/5) / 4.
        let pattern = [true, false, true, false, true];
        let record = EvalRecord {
            outcomes: pattern
                .iter()
                .enumerate()
                .map(|(i, &tp)| ScoredOutcome {
                    score: 1.0 - i as f64 * 0.1,
                    true_positive: tp,
                })
                .collect(),
            num_gt: 4,
        };
        let expected = (1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 4.0;
        assert!((average_precision(&record).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ap_invariant_under_monotone_rescoring() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.gen_range(1..12);
            let outcomes: Vec<ScoredOutcome> = (0..n)
                .map(|_| ScoredOutcome {
                    score: rng.gen_range(0.0..1.0),
                    true_positive: rng.gen_bool(0.5),
                })
                .collect();
            let tp = outcomes.iter().filter(|o| o.true_positive).count();
            let record = EvalRecord {
                outcomes: outcomes.clone(),
                num_gt: tp + rng.gen_range(1..4),
            };
            let mapped = EvalRecord {
                outcomes: outcomes
                    .iter()
                    .map(|o| ScoredOutcome {
                        score: (3.0 * o.score).exp() - 7.0,
                        true_positive: o.true_positive,
                    })
                    .collect(),
                num_gt: record.num_gt,
            };
            assert_eq!(
                average_precision(&record).unwrap(),
                average_precision(&mapped).unwrap()
            );
        }
    }
}
