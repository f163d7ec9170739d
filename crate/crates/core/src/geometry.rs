//! Axis-aligned boxes, the SORT measurement parameterization and IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in continuous pixel coordinates, origin top-left.
///
/// Width is `x2 - x1` with no pixel-inclusive `+1`. Zero-area boxes are
/// valid; negative extents and non-finite coordinates are not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::InvalidBox(format!(
                "negative extent in ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Geometric center (the box epicenter).
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn scale(&self, k: f64) -> Result<Self> {
        Self::new(self.x1 * k, self.y1 * k, self.x2 * k, self.y2 * k)
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    /// Intersection over union. Zero when the union has zero area.
    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Converts to the `[u, v, s, r]` measurement space.
    pub fn to_csr(&self) -> Result<CsrBox> {
        let w = self.width();
        let h = self.height();
        if h <= 0.0 || w <= 0.0 {
            return Err(Error::Degenerate(format!(
                "box {:?} has zero width or height",
                self.corners()
            )));
        }
        let (u, v) = self.center();
        Ok(CsrBox {
            u,
            v,
            s: w * h,
            r: w / h,
        })
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.corners()
    }
}

/// IoU of two boxes. See [`BoundingBox::iou`].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

/// A box with a detector confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BoundingBox, score: f64) -> Self {
        Self { bbox, score }
    }

    /// Unscored boxes count as fully confident.
    pub fn unscored(bbox: BoundingBox) -> Self {
        Self { bbox, score: 1.0 }
    }
}

/// Center / scale / ratio form used as the Kalman measurement.
///
/// `s` is the box area in px² and `r` the width/height ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsrBox {
    pub u: f64,
    pub v: f64,
    pub s: f64,
    pub r: f64,
}

impl CsrBox {
    pub fn new(u: f64, v: f64, s: f64, r: f64) -> Result<Self> {
        let c = Self { u, v, s, r };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u.is_finite() && self.v.is_finite() && self.s.is_finite() && self.r.is_finite())
        {
            return Err(Error::InvalidBox(format!("non-finite csr {self:?}")));
        }
        if self.s < 0.0 {
            return Err(Error::InvalidBox(format!("negative scale {}", self.s)));
        }
        if self.r <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "aspect ratio must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// Inverse of [`BoundingBox::to_csr`]: `w = sqrt(s r)`, `h = s / w`.
    pub fn to_bbox(&self) -> Result<BoundingBox> {
        self.validate()?;
        let w = (self.s * self.r).sqrt();
        let h = if w > 0.0 { self.s / w } else { 0.0 };
        BoundingBox::new(
            self.u - w / 2.0,
            self.v - h / 2.0,
            self.u + w / 2.0,
            self.v + h / 2.0,
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.u, self.v, self.s, self.r]
    }
}
