//! Hand tracking and detection-evaluation toolkit for open-surgery video.
//!
//! Per-frame hand boxes go in; identity-stable tracks, trajectory maps and
//! motion statistics come out. The detection side covers focal loss, anchor
//! labelling and AP at an IoU threshold.

pub mod analytics;
pub mod data;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod pipeline;
pub mod smoothing;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{iou, BoundingBox, CsrBox, ScoredBox};
