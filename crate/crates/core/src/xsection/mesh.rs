//! Conforming triangulation of section geometry.
//!
//! Meshing goes through a constrained Delaunay triangulation with Ruppert
//! refinement (angle floor 30 degrees) and an area cap tied to the target
//! edge length. Curved boundaries (circles) are polygonized first with a
//! vertex count that keeps both the boundary sagitta below
//! `target_edge^2 / (8 r)` and the polygon-vs-disk area defect below 1e-3.
//!
//! The input polygon is scaled to unit area before triangulation and the
//! node coordinates are scaled back afterwards, so meshing is exactly
//! scale-equivariant: scaling the geometry by a power of two scales every
//! node coordinate bitwise and leaves the connectivity untouched.

use nalgebra::Vector2;
use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::geometry::SectionGeometry;
use crate::{Error, Result};

/// Minimum vertex count for polygonized circles; keeps the polygon-vs-disk
/// area defect (2 pi / n)^2 / 6 below 1e-3 regardless of target edge.
const MIN_CIRCLE_VERTICES: usize = 96;

/// Ratio between the refinement area cap and target_edge^2. With the 30
/// degree angle floor this bounds the longest edge by 1.5 * target_edge.
const AREA_CAP_FACTOR: f64 = 0.3;

/// Triangle mesh of a section.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<Vector2<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
}

impl TriMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn max_edge(&self) -> f64 {
        let mut m: f64 = 0.0;
        for t in &self.triangles {
            for e in 0..3 {
                let d = (self.nodes[t[e]] - self.nodes[t[(e + 1) % 3]]).norm();
                m = m.max(d);
            }
        }
        m
    }

    /// Splits every triangle into four congruent children through the edge
    /// midpoints. Nested refinement: the coarse P1 space is a subspace of
    /// the fine one, so discrete minimum energies are non-increasing.
    pub fn refine_uniform(&self) -> TriMesh {
        use std::collections::BTreeMap;
        let mut nodes = self.nodes.clone();
        let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<Vector2<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                nodes.push((nodes[a] + nodes[b]) * 0.5);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let [a, b, c] = *t;
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let areas = triangle_areas(&nodes, &triangles);
        TriMesh {
            nodes,
            triangles,
            areas,
        }
    }
}

/// Polygonizes a (normalized) section boundary. Circles get a regular
/// polygon with chord length at most `target_edge`.
pub fn boundary_polygon(geometry: &SectionGeometry, target_edge: f64) -> Result<Vec<[f64; 2]>> {
    match geometry {
        SectionGeometry::Circle { radius, center } => {
            let r = *radius;
            let n_chord = (2.0 * std::f64::consts::PI * r / target_edge).ceil() as usize;
            let n = n_chord.max(MIN_CIRCLE_VERTICES);
            Ok((0..n)
                .map(|i| {
                    let phi = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
                    [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
                })
                .collect())
        }
        SectionGeometry::Rectangle { a, b, center } => {
            let (hx, hy) = (a / 2.0, b / 2.0);
            let (cx, cy) = (center[0], center[1]);
            Ok(vec![
                [cx - hx, cy - hy],
                [cx + hx, cy - hy],
                [cx + hx, cy + hy],
                [cx - hx, cy + hy],
            ])
        }
        SectionGeometry::Polygon { vertices } => Ok(vertices.clone()),
    }
}

/// Builds a conforming triangulation with max edge <= 1.5 * target_edge.
pub fn triangulate(geometry: &SectionGeometry, target_edge: f64) -> Result<TriMesh> {
    if !(target_edge > 0.0) {
        return Err(Error::OutOfRange(format!(
            "target_edge must be positive, got {target_edge}"
        )));
    }
    geometry.validate()?;
    let polygon = boundary_polygon(geometry, target_edge)?;

    // scale to unit area for exact scale equivariance
    let area = super::geometry::polygon_moments(&polygon).area;
    let scale = area.sqrt();
    let scaled: Vec<[f64; 2]> = polygon
        .iter()
        .map(|v| [v[0] / scale, v[1] / scale])
        .collect();
    let edge = target_edge / scale;

    let mesh = triangulate_unit(&scaled, edge)?;
    let nodes: Vec<Vector2<f64>> = mesh.0.into_iter().map(|p| p * scale).collect();
    let areas = triangle_areas(&nodes, &mesh.1);
    for (i, &a) in areas.iter().enumerate() {
        if !(a > 0.0) {
            return Err(Error::MeshingFailure {
                vertex: mesh.1[i][0],
                reason: format!("triangle {i} has non-positive area {a}"),
            });
        }
    }
    Ok(TriMesh {
        nodes,
        triangles: mesh.1,
        areas,
    })
}

fn triangulate_unit(
    polygon: &[[f64; 2]],
    target_edge: f64,
) -> Result<(Vec<Vector2<f64>>, Vec<[usize; 3]>)> {
    // split boundary edges so constraint segments never exceed target_edge
    let mut boundary: Vec<[f64; 2]> = Vec::new();
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let pieces = (len / target_edge).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t = k as f64 / pieces as f64;
            boundary.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(boundary.len());
    for (i, v) in boundary.iter().enumerate() {
        let h = cdt
            .insert(Point2::new(v[0], v[1]))
            .map_err(|e| Error::MeshingFailure {
                vertex: i * n / boundary.len().max(1),
                reason: format!("{e:?}"),
            })?;
        handles.push(h);
    }
    for i in 0..handles.len() {
        let (a, b) = (handles[i], handles[(i + 1) % handles.len()]);
        if a != b && !cdt.exists_constraint(a, b) {
            cdt.add_constraint(a, b);
        }
    }

    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .with_max_allowed_area(AREA_CAP_FACTOR * target_edge * target_edge);
    let outcome = cdt.refine(params);
    if !outcome.refinement_complete {
        return Err(Error::MeshingFailure {
            vertex: 0,
            reason: "refinement did not complete (sliver input?)".into(),
        });
    }

    // gather kept triangles, then compact to referenced nodes only
    let mut vertex_index = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes: Vec<Vector2<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        if outcome.excluded_faces.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices();
        let mut idx = [0usize; 3];
        for (slot, v) in vs.iter().enumerate() {
            let vi = v.index();
            if vertex_index[vi] == usize::MAX {
                vertex_index[vi] = nodes.len();
                let p = v.position();
                nodes.push(Vector2::new(p.x, p.y));
            }
            idx[slot] = vertex_index[vi];
        }
        // enforce counterclockwise orientation
        let e1 = nodes[idx[1]] - nodes[idx[0]];
        let e2 = nodes[idx[2]] - nodes[idx[0]];
        if e1.x * e2.y - e1.y * e2.x < 0.0 {
            idx.swap(1, 2);
        }
        triangles.push(idx);
    }
    if triangles.is_empty() {
        return Err(Error::MeshingFailure {
            vertex: 0,
            reason: "no interior triangles produced".into(),
        });
    }
    Ok((nodes, triangles))
}

fn triangle_areas(nodes: &[Vector2<f64>], triangles: &[[usize; 3]]) -> Vec<f64> {
    triangles
        .iter()
        .map(|t| {
            let e1 = nodes[t[1]] - nodes[t[0]];
            let e2 = nodes[t[2]] - nodes[t[0]];
            0.5 * (e1.x * e2.y - e1.y * e2.x)
        })
        .collect()
}
