//! Integer screen rectangles and overlap measures.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in screen pixels, edges inclusive-exclusive
/// (`right` and `bottom` are one past the last covered pixel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub left: u32,
    pub top: u32,
    pub right: u32,
    pub bottom: u32,
}

impl BoundingBox {
    pub const fn new(left: u32, top: u32, right: u32, bottom: u32) -> Self {
        Self {
            left,
            top,
            right,
            bottom,
        }
    }

    /// `left <= right` and `top <= bottom`. Non-negativity is carried by the type.
    pub fn is_well_formed(&self) -> bool {
        self.left <= self.right && self.top <= self.bottom
    }

    pub fn width(&self) -> u32 {
        self.right.saturating_sub(self.left)
    }

    pub fn height(&self) -> u32 {
        self.bottom.saturating_sub(self.top)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        other.left >= self.left
            && other.top >= self.top
            && other.right <= self.right
            && other.bottom <= self.bottom
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let left = self.left.max(other.left);
        let top = self.top.max(other.top);
        let right = self.right.min(other.right);
        let bottom = self.bottom.min(other.bottom);
        (left < right && top < bottom).then(|| BoundingBox::new(left, top, right, bottom))
    }

    /// True when `self` is at least partly visible inside `viewport`.
    ///
    /// Zero-area boxes count as visible when they lie inside the viewport.
    pub fn is_visible_in(&self, viewport: &BoundingBox) -> bool {
        if self.area() == 0 {
            return viewport.contains(self);
        }
        self.intersection(viewport).is_some()
    }

    pub fn translate(&self, dx: u32, dy: u32) -> BoundingBox {
        BoundingBox::new(
            self.left + dx,
            self.top + dy,
            self.right + dx,
            self.bottom + dy,
        )
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
///
/// Two identical degenerate (zero-area) boxes have IoU 1; any other pair with
/// an empty union has IoU 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |r| r.area());
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    inter as f64 / union as f64
}
