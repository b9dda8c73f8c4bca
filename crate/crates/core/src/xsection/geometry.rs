//! Planar section geometry: polygon moments and normalization.
//!
//! Sections live in the (x2, x3) plane of the rod frame. The solver needs
//! every section translated to its centroid and rotated to principal axes so
//! that the first moments and the product moment all vanish; `normalize`
//! performs that rigid motion and reports it.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Named section shapes plus free polygons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionGeometry {
    /// Disk of the given radius centered at `center`.
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Axis-aligned rectangle with side `a` along x2 and `b` along x3,
    /// centered at `center`.
    Rectangle {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Simple closed polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<[f64; 2]> },
}

/// Rigid motion applied by [`normalize_section`]: the original geometry maps
/// to the normalized one by `x -> R(-angle) (x - centroid)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub centroid: [f64; 2],
    pub rotation_angle: f64,
}

/// Area and second moments of a section about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMoments {
    pub area: f64,
    /// First moments: (int x2, int x3).
    pub first: Vector2<f64>,
    /// int x2^2
    pub ixx: f64,
    /// int x3^2
    pub iyy: f64,
    /// int x2 x3
    pub ixy: f64,
}

impl SectionGeometry {
    pub fn circle(radius: f64) -> Self {
        SectionGeometry::Circle {
            radius,
            center: [0.0, 0.0],
        }
    }

    pub fn rectangle(a: f64, b: f64) -> Self {
        SectionGeometry::Rectangle {
            a,
            b,
            center: [0.0, 0.0],
        }
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Self {
        SectionGeometry::Polygon { vertices }
    }

    /// Validates the invariants a section must satisfy before any further
    /// processing: positive size, and for polygons simplicity (no
    /// self-intersection) and nonzero area.
    pub fn validate(&self) -> Result<()> {
        match self {
            SectionGeometry::Circle { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::DegenerateSection(format!(
                        "circle radius must be positive, got {radius}"
                    )));
                }
            }
            SectionGeometry::Rectangle { a, b, .. } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::DegenerateSection(format!(
                        "rectangle sides must be positive, got a={a}, b={b}"
                    )));
                }
            }
            SectionGeometry::Polygon { vertices } => {
                validate_polygon(vertices)?;
            }
        }
        Ok(())
    }

    /// Exact moments (closed forms for named shapes, Green's theorem for
    /// polygons).
    pub fn moments(&self) -> SectionMoments {
        match self {
            SectionGeometry::Circle { radius, center } => {
                let r = *radius;
                let (cx, cy) = (center[0], center[1]);
                let area = std::f64::consts::PI * r * r;
                let i0 = std::f64::consts::PI * r.powi(4) / 4.0;
                SectionMoments {
                    area,
                    first: Vector2::new(cx * area, cy * area),
                    ixx: i0 + area * cx * cx,
                    iyy: i0 + area * cy * cy,
                    ixy: area * cx * cy,
                }
            }
            SectionGeometry::Rectangle { a, b, center } => {
                let (cx, cy) = (center[0], center[1]);
                let area = a * b;
                SectionMoments {
                    area,
                    first: Vector2::new(cx * area, cy * area),
                    ixx: a.powi(3) * b / 12.0 + area * cx * cx,
                    iyy: a * b.powi(3) / 12.0 + area * cy * cy,
                    ixy: area * cx * cy,
                }
            }
            SectionGeometry::Polygon { vertices } => polygon_moments(vertices),
        }
    }

    /// Characteristic diameter (bounding box diagonal) used in tolerance
    /// scalings.
    pub fn diameter(&self) -> f64 {
        match self {
            SectionGeometry::Circle { radius, .. } => 2.0 * radius,
            SectionGeometry::Rectangle { a, b, .. } => (a * a + b * b).sqrt(),
            SectionGeometry::Polygon { vertices } => {
                let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
                for v in vertices {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
            }
        }
    }
}

/// Translates a section to its centroid and rotates it to principal axes so
/// that `int x2 = int x3 = int x2 x3 = 0`. Returns the normalized geometry
/// and the rigid motion that was applied.
pub fn normalize_section(geometry: &SectionGeometry) -> Result<(SectionGeometry, Normalization)> {
    geometry.validate()?;
    match geometry {
        SectionGeometry::Circle { radius, center } => Ok((
            SectionGeometry::circle(*radius),
            Normalization {
                centroid: *center,
                rotation_angle: 0.0,
            },
        )),
        SectionGeometry::Rectangle { a, b, center } => Ok((
            SectionGeometry::rectangle(*a, *b),
            Normalization {
                centroid: *center,
                rotation_angle: 0.0,
            },
        )),
        SectionGeometry::Polygon { vertices } => {
            let m = polygon_moments(vertices);
            let cx = m.first.x / m.area;
            let cy = m.first.y / m.area;
            // central second moments
            let ixx = m.ixx - m.area * cx * cx;
            let iyy = m.iyy - m.area * cy * cy;
            let ixy = m.ixy - m.area * cx * cy;
            // principal-axis angle: rotating by -phi kills the product moment
            let phi = 0.5 * (2.0 * ixy).atan2(ixx - iyy);
            let (s, c) = phi.sin_cos();
            let rotated: Vec<[f64; 2]> = vertices
                .iter()
                .map(|v| {
                    let x = v[0] - cx;
                    let y = v[1] - cy;
                    // R(-phi) * (x, y)
                    [c * x + s * y, -s * x + c * y]
                })
                .collect();
            Ok((
                SectionGeometry::Polygon { vertices: rotated },
                Normalization {
                    centroid: [cx, cy],
                    rotation_angle: phi,
                },
            ))
        }
    }
}

/// Green's-theorem moments of a polygon (exact for the polygon itself).
pub fn polygon_moments(vertices: &[[f64; 2]]) -> SectionMoments {
    let n = vertices.len();
    let mut area = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut ixx = 0.0;
    let mut iyy = 0.0;
    let mut ixy = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        let cross = x0 * y1 - x1 * y0;
        area += cross;
        sx += (x0 + x1) * cross;
        sy += (y0 + y1) * cross;
        ixx += (x0 * x0 + x0 * x1 + x1 * x1) * cross;
        iyy += (y0 * y0 + y0 * y1 + y1 * y1) * cross;
        ixy += (2.0 * x0 * y0 + x0 * y1 + x1 * y0 + 2.0 * x1 * y1) * cross;
    }
    let sign = if area >= 0.0 { 1.0 } else { -1.0 };
    SectionMoments {
        area: sign * area / 2.0,
        first: Vector2::new(sign * sx / 6.0, sign * sy / 6.0),
        ixx: sign * ixx / 12.0,
        iyy: sign * iyy / 12.0,
        ixy: sign * ixy / 24.0,
    }
}

fn validate_polygon(vertices: &[[f64; 2]]) -> Result<()> {
    if vertices.len() < 3 {
        return Err(Error::DegenerateSection(format!(
            "polygon needs at least 3 vertices, got {}",
            vertices.len()
        )));
    }
    let m = polygon_moments(vertices);
    let diam = SectionGeometry::Polygon {
        vertices: vertices.to_vec(),
    }
    .diameter();
    if !(m.area > 1e-12 * diam * diam) || !m.area.is_finite() {
        return Err(Error::DegenerateSection(format!(
            "polygon area {} is not positive",
            m.area
        )));
    }
    // simplicity: no two non-adjacent edges may intersect
    let n = vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(Error::DegenerateSection(format!(
                    "polygon self-intersects between edges {i} and {j}"
                )));
            }
        }
    }
    Ok(())
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| -> f64 {
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_normalizes_to_centered_square() {
        let sq = SectionGeometry::polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let (norm, motion) = normalize_section(&sq).unwrap();
        assert_relative_eq!(motion.centroid[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(motion.centroid[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(motion.rotation_angle, 0.0, epsilon = 1e-15);
        let m = norm.moments();
        assert_relative_eq!(m.area, 1.0, epsilon = 1e-14);
        assert!(m.first.norm() < 1e-14);
        assert!(m.ixy.abs() < 1e-14);
    }

    #[test]
    fn offset_circle_recenters_without_rotation() {
        let c = SectionGeometry::Circle {
            radius: 1.0,
            center: [2.0, 3.0],
        };
        let (norm, motion) = normalize_section(&c).unwrap();
        assert_eq!(motion.centroid, [2.0, 3.0]);
        assert_eq!(motion.rotation_angle, 0.0);
        let m = norm.moments();
        assert_relative_eq!(m.area, std::f64::consts::PI, epsilon = 1e-14);
        assert!(m.first.norm() < 1e-14);
    }

    #[test]
    fn right_triangle_normalizes_to_principal_axes() {
        let tri = SectionGeometry::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let (norm, motion) = normalize_section(&tri).unwrap();
        assert_relative_eq!(motion.centroid[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(motion.centroid[1], 1.0 / 3.0, epsilon = 1e-14);
        // oracle: recompute the three integrals from the transformed polygon
        // with the Green's-theorem formulas and require they vanish
        let m = norm.moments();
        let scale = m.area * norm.diameter() * norm.diameter();
        assert!(m.first.x.abs() < 1e-12 * scale, "int x2 = {}", m.first.x);
        assert!(m.first.y.abs() < 1e-12 * scale, "int x3 = {}", m.first.y);
        assert!(m.ixy.abs() < 1e-12 * scale, "int x2 x3 = {}", m.ixy);
        // area is preserved by a rigid motion
        assert_relative_eq!(m.area, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let line = SectionGeometry::polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(
            normalize_section(&line),
            Err(Error::DegenerateSection(_))
        ));
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bow = SectionGeometry::polygon(vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(matches!(
            normalize_section(&bow),
            Err(Error::DegenerateSection(_))
        ));
    }

    #[test]
    fn clockwise_polygon_moments_match_ccw() {
        let ccw = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let cw: Vec<[f64; 2]> = ccw.iter().rev().cloned().collect();
        let a = polygon_moments(&ccw);
        let b = polygon_moments(&cw);
        assert_relative_eq!(a.area, b.area, epsilon = 1e-15);
        assert_relative_eq!(a.ixx, b.ixx, epsilon = 1e-15);
        assert_relative_eq!(a.ixy, b.ixy, epsilon = 1e-15);
    }

    #[test]
    fn rectangle_moments_closed_form() {
        let r = SectionGeometry::rectangle(2.0, 1.0);
        let m = r.moments();
        assert_relative_eq!(m.area, 2.0, epsilon = 1e-15);
        assert_relative_eq!(m.ixx, 8.0 / 12.0 * 1.0, epsilon = 1e-15); // a^3 b / 12
        assert_relative_eq!(m.iyy, 2.0 / 12.0, epsilon = 1e-15); // a b^3 / 12
    }
}
