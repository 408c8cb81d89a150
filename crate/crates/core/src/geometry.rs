//! Axis-aligned box arithmetic in continuous pixel coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box coordinate {0} is not finite")]
    NonFinite(&'static str),
    #[error("box has negative extent: {axis}_min {min} > {axis}_max {max}")]
    NegativeExtent { axis: &'static str, min: f64, max: f64 },
}

/// Corner-based rectangle `(x_min, y_min, x_max, y_max)` in pixels.
///
/// Fields are public so that raw records can be carried around and
/// checked later by `validate`; [`BoundingBox::new`] is the checked
/// constructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<[f64; 4]> for BoundingBox {
    fn from(c: [f64; 4]) -> Self {
        Self { x_min: c[0], y_min: c[1], x_max: c[2], y_max: c[3] }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let b = Self { x_min, y_min, x_max, y_max };
        b.check()?;
        Ok(b)
    }

    /// Builds a box from its top-left corner and size.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(x, y, x + w, y + h)
    }

    pub fn check(&self) -> Result<(), GeometryError> {
        for (name, v) in [
            ("x_min", self.x_min),
            ("y_min", self.y_min),
            ("x_max", self.x_max),
            ("y_max", self.y_max),
        ] {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(name));
            }
        }
        if self.x_min > self.x_max {
            return Err(GeometryError::NegativeExtent { axis: "x", min: self.x_min, max: self.x_max });
        }
        if self.y_min > self.y_max {
            return Err(GeometryError::NegativeExtent { axis: "y", min: self.y_min, max: self.y_max });
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    /// Overlap rectangle, or `None` when the boxes do not overlap with
    /// positive area.
    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_max > x_min && y_max > y_min).then_some(Self { x_min, y_min, x_max, y_max })
    }

    #[inline]
    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Zero when the union has zero area.
    #[inline]
    pub fn iou(&self, other: &Self) -> f64 {
        iou_with_areas(self, self.area(), other, other.area())
    }

    /// Smallest box enclosing both.
    pub fn union_hull(&self, other: &Self) -> Self {
        Self {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            x_min: self.x_min * s,
            y_min: self.y_min * s,
            x_max: self.x_max * s,
            y_max: self.y_max * s,
        }
    }

    /// Parts of `self` not covered by `cutter`, as up to four disjoint
    /// rectangles of positive area.
    pub fn subtract(&self, cutter: &Self) -> Vec<Self> {
        let Some(hole) = self.intersection(cutter) else {
            return if self.area() > 0.0 { vec![*self] } else { Vec::new() };
        };
        let mut out = Vec::with_capacity(4);
        let mut push = |b: Self| {
            if b.area() > 0.0 {
                out.push(b);
            }
        };
        // full-width bands above and below, then left/right slabs beside the hole
        push(Self { y_max: hole.y_min, ..*self });
        push(Self { y_min: hole.y_max, ..*self });
        push(Self { x_max: hole.x_min, y_min: hole.y_min, y_max: hole.y_max, ..*self });
        push(Self { x_min: hole.x_max, y_min: hole.y_min, y_max: hole.y_max, ..*self });
        out
    }
}

/// IoU with precomputed areas, used by the suppression kernels.
#[inline]
pub(crate) fn iou_with_areas(a: &BoundingBox, area_a: f64, b: &BoundingBox, area_b: f64) -> f64 {
    let inter = a.intersection_area(b);
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.intersection_area(b)
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

pub fn min_side(b: &BoundingBox) -> f64 {
    b.min_side()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    /// Counts covered cells on a grid of `1/res` px; independent of the
    /// analytic overlap formula.
    fn raster_iou(a: &BoundingBox, b: &BoundingBox, res: f64) -> f64 {
        let lo_x = a.x_min.min(b.x_min);
        let lo_y = a.y_min.min(b.y_min);
        let hi_x = a.x_max.max(b.x_max);
        let hi_y = a.y_max.max(b.y_max);
        let nx = ((hi_x - lo_x) * res).round() as i64;
        let ny = ((hi_y - lo_y) * res).round() as i64;
        let inside = |bx: &BoundingBox, cx: f64, cy: f64| {
            cx > bx.x_min && cx < bx.x_max && cy > bx.y_min && cy < bx.y_max
        };
        let (mut inter, mut uni) = (0u64, 0u64);
        for ix in 0..nx {
            let cx = lo_x + (ix as f64 + 0.5) / res;
            for iy in 0..ny {
                let cy = lo_y + (iy as f64 + 0.5) / res;
                let (ia, ib) = (inside(a, cx, cy), inside(b, cx, cy));
                inter += (ia && ib) as u64;
                uni += (ia || ib) as u64;
            }
        }
        inter as f64 / uni as f64
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&bb(0.0, 0.0, 2.0, 2.0)), 4.0);
        assert_eq!(area(&bb(1.0, 1.0, 1.0, 5.0)), 0.0);
        assert_eq!(area(&bb(0.0, 0.0, 3.5, 2.0)), 7.0);
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(intersection_area(&bb(0.0, 0.0, 2.0, 2.0), &bb(1.0, 0.0, 3.0, 2.0)), 2.0);
        assert_eq!(intersection_area(&bb(0.0, 0.0, 1.0, 1.0), &bb(2.0, 2.0, 3.0, 3.0)), 0.0);
        assert_eq!(intersection_area(&bb(0.0, 0.0, 4.0, 4.0), &bb(1.0, 1.0, 2.0, 2.0)), 1.0);
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        let b = bb(1.0, 0.0, 3.0, 2.0);
        let oracle = raster_iou(&a, &b, 100.0);
        assert!((oracle - 1.0 / 3.0).abs() < 1e-9, "raster oracle {oracle}");
        assert!((iou(&a, &b) - oracle).abs() < 1e-9);
    }

    #[test]
    fn zero_union_is_zero() {
        let p = bb(1.0, 1.0, 1.0, 1.0);
        assert_eq!(iou(&p, &p), 0.0);
        assert_eq!(iou(&p, &bb(0.0, 0.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn min_side_examples() {
        assert_eq!(min_side(&bb(0.0, 0.0, 20.0, 40.0)), 20.0);
        assert_eq!(min_side(&bb(0.0, 0.0, 19.9, 100.0)), 19.9);
        assert_eq!(min_side(&bb(0.0, 0.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn construction_rejects_bad_boxes() {
        assert!(matches!(
            BoundingBox::new(2.0, 0.0, 1.0, 1.0),
            Err(GeometryError::NegativeExtent { axis: "x", .. })
        ));
        assert!(matches!(
            BoundingBox::new(0.0, f64::NAN, 1.0, 1.0),
            Err(GeometryError::NonFinite("y_min"))
        ));
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn subtract_covers_remainder() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let parts = a.subtract(&bb(3.0, 3.0, 6.0, 6.0));
        let total: f64 = parts.iter().map(BoundingBox::area).sum();
        assert_eq!(total, 91.0);
        for (i, p) in parts.iter().enumerate() {
            for q in &parts[i + 1..] {
                assert_eq!(p.intersection_area(q), 0.0);
            }
        }
        assert!(a.subtract(&bb(-1.0, -1.0, 11.0, 11.0)).is_empty());
        assert_eq!(a.subtract(&bb(20.0, 20.0, 30.0, 30.0)), vec![a]);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.0..80.0f64, 0.0..80.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox::from_xywh(x, y, w, h).unwrap())
    }

    fn arb_pos_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.5..80.0f64, 0.5..80.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox::from_xywh(x, y, w, h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn self_iou_is_one(a in arb_pos_box()) {
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_one_only_when_identical(a in arb_pos_box(), b in arb_pos_box()) {
            if a != b {
                prop_assert!(iou(&a, &b) < 1.0);
            }
        }

        #[test]
        fn translation_invariant(a in arb_pos_box(), b in arb_pos_box(),
                                 dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
            let moved = iou(&a.translate(dx, dy), &b.translate(dx, dy));
            prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn scale_invariant(a in arb_pos_box(), b in arb_pos_box(), s in 0.01..100.0f64) {
            let base = iou(&a, &b);
            let scaled = iou(&a.scale(s), &b.scale(s));
            prop_assert!((scaled - base).abs() <= 1e-12 * base.max(1.0));
        }
    }
}
