//! Points, axis-aligned boxes, oriented quads and the page rotation transform.
//!
//! Coordinates are real-valued pixels with the origin at the top-left corner
//! of the page and `y` growing downwards. Pixel `(i, j)` covers the unit
//! square `[i, i+1) x [j, j+1)`; rounding only happens when a mask or raster
//! is touched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("box corners out of order: ({x1}, {y1}, {x2}, {y2})")]
    Inverted { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("invalid rotation angle {0}")]
    InvalidAngle(f64),
    #[error("source canvas must be non-empty, got {0}x{1}")]
    EmptyCanvas(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box `(x1, y1, x2, y2)` with `x1 <= x2` and `y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aabb {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Aabb {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if x1 > x2 || y1 > y2 {
            return Err(GeometryError::Inverted { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from two arbitrary corners.
    pub fn from_corners(a: Point, b: Point) -> Self {
        Self {
            x1: a.x.min(b.x),
            y1: a.y.min(b.y),
            x2: a.x.max(b.x),
            y2: a.y.max(b.y),
        }
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

    pub fn center(&self) -> Point {
        Point::new((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn is_empty(&self) -> bool {
        self.width() <= 0.0 || self.height() <= 0.0
    }

    /// Overlap of two boxes, or `None` when they are disjoint. Boxes that only
    /// touch along an edge yield a zero-area box.
    pub fn intersect(&self, other: &Aabb) -> Option<Aabb> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 <= x2 && y1 <= y2).then_some(Aabb { x1, y1, x2, y2 })
    }

    /// Like [`Aabb::intersect`] but discards zero-area overlaps.
    pub fn overlap(&self, other: &Aabb) -> Option<Aabb> {
        self.intersect(other).filter(|b| !b.is_empty())
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        other.x1 >= self.x1 && other.y1 >= self.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl<'de> Deserialize<'de> for Aabb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x1: f64,
            y1: f64,
            x2: f64,
            y2: f64,
        }
        let r = Raw::deserialize(d)?;
        Aabb::new(r.x1, r.y1, r.x2, r.y2).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`Aabb::intersect`].
pub fn intersect(a: &Aabb, b: &Aabb) -> Option<Aabb> {
    a.intersect(b)
}

/// Four-corner polygon. Before rotation the corners run top-left, top-right,
/// bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedQuad {
    pub corners: [Point; 4],
}

const DEGENERATE_AREA: f64 = 1e-9;

impl OrientedQuad {
    pub fn new(corners: [Point; 4]) -> Self {
        Self { corners }
    }

    /// Polygon from the flat `x0 y0 x1 y1 x2 y2 x3 y3` layout.
    pub fn from_flat(c: [f64; 8]) -> Self {
        Self {
            corners: [
                Point::new(c[0], c[1]),
                Point::new(c[2], c[3]),
                Point::new(c[4], c[5]),
                Point::new(c[6], c[7]),
            ],
        }
    }

    pub fn to_flat(&self) -> [f64; 8] {
        let c = &self.corners;
        [c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y]
    }

    /// Shoelace area (absolute value).
    pub fn area(&self) -> f64 {
        let c = &self.corners;
        let mut twice = 0.0;
        for k in 0..4 {
            let (a, b) = (c[k], c[(k + 1) % 4]);
            twice += a.x * b.y - b.x * a.y;
        }
        twice.abs() / 2.0
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= DEGENERATE_AREA
    }

    pub fn bounding_box(&self) -> Aabb {
        let xs = self.corners.iter().map(|p| p.x);
        let ys = self.corners.iter().map(|p| p.y);
        Aabb {
            x1: xs.clone().fold(f64::INFINITY, f64::min),
            y1: ys.clone().fold(f64::INFINITY, f64::min),
            x2: xs.fold(f64::NEG_INFINITY, f64::max),
            y2: ys.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Expresses a box as the polygon `(x1,y1, x2,y1, x2,y2, x1,y2)`.
pub fn aabb_to_quad(b: &Aabb) -> OrientedQuad {
    OrientedQuad::from_flat([b.x1, b.y1, b.x2, b.y1, b.x2, b.y2, b.x1, b.y2])
}

/// Rotation about the source centre followed by a shift onto an expanded
/// canvas that holds the whole rotated source.
///
/// `matrix` is the 2x3 affine map `[cos -sin a; sin cos b]` where the third
/// column combines the centre rotation with the canvas offsets
/// `t_x = W'/2 - W/2`, `t_y = H'/2 - H/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationTransform {
    pub angle_deg: f64,
    pub matrix: [[f64; 3]; 2],
    pub src_size: (u32, u32),
    pub dst_size: (u32, u32),
    pub offset: (f64, f64),
}

// Rotated extents are snapped before taking the ceiling so that a quarter
// turn of 100x200 yields exactly 200x100.
const EXTENT_SNAP: f64 = 1e-6;

pub fn make_rotation(angle_deg: f64, src_size: (u32, u32)) -> Result<RotationTransform, GeometryError> {
    if !angle_deg.is_finite() || angle_deg.abs() > 180.0 {
        return Err(GeometryError::InvalidAngle(angle_deg));
    }
    let (w, h) = src_size;
    if w == 0 || h == 0 {
        return Err(GeometryError::EmptyCanvas(w, h));
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (wf, hf) = (w as f64, h as f64);
    let ext_w = wf * cos.abs() + hf * sin.abs();
    let ext_h = wf * sin.abs() + hf * cos.abs();
    let dst_w = ((ext_w - EXTENT_SNAP).ceil() as u32).max(1);
    let dst_h = ((ext_h - EXTENT_SNAP).ceil() as u32).max(1);
    let t_x = dst_w as f64 / 2.0 - wf / 2.0;
    let t_y = dst_h as f64 / 2.0 - hf / 2.0;
    let (cx, cy) = (wf / 2.0, hf / 2.0);
    let matrix = [
        [cos, -sin, cx - cos * cx + sin * cy + t_x],
        [sin, cos, cy - sin * cx - cos * cy + t_y],
    ];
    Ok(RotationTransform {
        angle_deg,
        matrix,
        src_size,
        dst_size: (dst_w, dst_h),
        offset: (t_x, t_y),
    })
}

impl RotationTransform {
    pub fn identity(size: (u32, u32)) -> Self {
        Self {
            angle_deg: 0.0,
            matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            src_size: size,
            dst_size: size,
            offset: (0.0, 0.0),
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let m = &self.matrix;
        Point::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        )
    }

    /// Exact inverse affine map, taking destination-canvas points back to the
    /// source frame.
    pub fn inverse(&self) -> RotationTransform {
        let m = &self.matrix;
        // Orthonormal linear part: inverse is the transpose.
        let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
        let (tx, ty) = (m[0][2], m[1][2]);
        let matrix = [
            [a, c, -(a * tx + c * ty)],
            [b, d, -(b * tx + d * ty)],
        ];
        RotationTransform {
            angle_deg: -self.angle_deg,
            matrix,
            src_size: self.dst_size,
            dst_size: self.src_size,
            offset: (-self.offset.0, -self.offset.1),
        }
    }
}

pub fn transform_quad(t: &RotationTransform, q: &OrientedQuad) -> OrientedQuad {
    OrientedQuad::new(q.corners.map(|p| t.apply(p)))
}
