//! Axis-aligned pixel boxes and the overlap measures built on them.
//!
//! Boxes are half-open rectangles `[xmin, xmax) x [ymin, ymax)` on the integer
//! pixel grid, so a box covers exactly `(xmax - xmin) * (ymax - ymin)` pixels
//! and intersection/union areas are exact integers.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BoundingBox {
    xmin: u32,
    ymin: u32,
    xmax: u32,
    ymax: u32,
}

impl BoundingBox {
    /// Builds a box, rejecting zero-area rectangles and inverted corners.
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Result<Self> {
        if xmin >= xmax || ymin >= ymax {
            return Err(Error::InvalidBox {
                xmin: xmin.into(),
                ymin: ymin.into(),
                xmax: xmax.into(),
                ymax: ymax.into(),
                reason: "degenerate or inverted box (need xmin < xmax and ymin < ymax)",
            });
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    /// Box of the given size with its top-left corner at `(x, y)`.
    pub fn from_origin_size(x: u32, y: u32, width: u32, height: u32) -> Result<Self> {
        Self::new(x, y, x.saturating_add(width), y.saturating_add(height))
    }

    pub fn xmin(&self) -> u32 {
        self.xmin
    }

    pub fn ymin(&self) -> u32 {
        self.ymin
    }

    pub fn xmax(&self) -> u32 {
        self.xmax
    }

    pub fn ymax(&self) -> u32 {
        self.ymax
    }

    pub fn width(&self) -> u32 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> u32 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Height over width.
    pub fn aspect_ratio(&self) -> f64 {
        f64::from(self.height()) / f64::from(self.width())
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let w = self.xmax.min(other.xmax).saturating_sub(self.xmin.max(other.xmin));
        let h = self.ymax.min(other.ymax).saturating_sub(self.ymin.max(other.ymin));
        u64::from(w) * u64::from(h)
    }

    /// Intersection and union areas as exact integers.
    pub fn overlap(&self, other: &BoundingBox) -> (u64, u64) {
        let inter = self.intersection_area(other);
        (inter, self.area() + other.area() - inter)
    }

    /// Intersection over union. The union of two valid boxes is never zero,
    /// so this is always defined; the single division is correctly rounded.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let (inter, union) = self.overlap(other);
        inter as f64 / union as f64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.xmax <= width && self.ymax <= height
    }

    /// Clamps the box into `[0, width) x [0, height)`; `None` if nothing is left.
    pub fn clamped(&self, width: u32, height: u32) -> Option<BoundingBox> {
        BoundingBox::new(
            self.xmin.min(width),
            self.ymin.min(height),
            self.xmax.min(width),
            self.ymax.min(height),
        )
        .ok()
    }

    /// Mirror across the vertical axis of an image of the given width.
    pub fn hflipped(&self, image_width: u32) -> Option<BoundingBox> {
        if self.xmax > image_width {
            return None;
        }
        BoundingBox::new(
            image_width - self.xmax,
            self.ymin,
            image_width - self.xmin,
            self.ymax,
        )
        .ok()
    }

    /// Multiplies every coordinate by an integer factor.
    pub fn scaled_by(&self, factor: u32) -> Option<BoundingBox> {
        BoundingBox::new(
            self.xmin.checked_mul(factor)?,
            self.ymin.checked_mul(factor)?,
            self.xmax.checked_mul(factor)?,
            self.ymax.checked_mul(factor)?,
        )
        .ok()
    }
}

impl std::fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.xmin, self.ymin, self.xmax, self.ymax)
    }
}

/// Free-function form of [`BoundingBox::iou`].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}
