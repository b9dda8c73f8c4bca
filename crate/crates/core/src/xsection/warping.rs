//! Finite-element minimization of the section warping energy.
//!
//! For a strain axial vector `s` (twist rate, two curvatures) the reduced
//! section energy is
//!
//! ```text
//! q2(s) = min_alpha  int_S  q3( [ s x (0, x2, x3) | d2 alpha | d3 alpha ] )  dx2 dx3
//! ```
//!
//! with `q3(G) = 2 mu |sym G|^2 + lambda (tr G)^2`. The minimization is done
//! over piecewise-linear vector fields `alpha` on a triangle mesh. The
//! energy is invariant under adding constants to `alpha` (3 dims) and under
//! in-plane infinitesimal rotations (1 dim); exactly those four directions
//! are pinned with Lagrange multipliers (zero componentwise mean and zero
//! mean in-plane curl), which leaves the minimum value unchanged.
//!
//! Element integrands that involve the coordinate-linear first column are
//! evaluated with the 3-point edge-midpoint rule (exact for quadratics);
//! the pure gradient terms are constant per element.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use std::sync::Once;

use super::mesh::TriMesh;
use super::Material;
use crate::{Error, Result};

/// Nodal warping displacements (3-vector per mesh node).
#[derive(Debug, Clone)]
pub struct WarpingField {
    pub values: Vec<Vector3<f64>>,
}

impl WarpingField {
    /// Area-weighted mean of the field (zero for admissible minimizers).
    pub fn mean(&self, mesh: &TriMesh) -> Vector3<f64> {
        let mut acc = Vector3::zeros();
        for (t, &a) in mesh.triangles.iter().zip(&mesh.areas) {
            acc += (self.values[t[0]] + self.values[t[1]] + self.values[t[2]]) * (a / 3.0);
        }
        acc / mesh.total_area()
    }

    /// Mean in-plane rotation measure `int (d2 alpha_3 - d3 alpha_2) / area`.
    pub fn mean_inplane_rotation(&self, mesh: &TriMesh) -> f64 {
        let mut acc = 0.0;
        for (t, &a) in mesh.triangles.iter().zip(&mesh.areas) {
            let g = shape_gradients(mesh, t, a);
            for (m, gm) in g.iter().enumerate() {
                acc += a * (gm.x * self.values[t[m]].z - gm.y * self.values[t[m]].y);
            }
        }
        acc / mesh.total_area()
    }
}

/// Quadratic energy density `q3(G) = 2 mu |sym G|^2 + lambda (tr G)^2`.
pub fn q3_isotropic(g: &Matrix3<f64>, material: &Material) -> f64 {
    let sym = (g + g.transpose()) * 0.5;
    let tr = g.trace();
    2.0 * material.mu * sym.norm_squared() + material.lambda * tr * tr
}

/// First column of the strain matrix: `c(x) = s x (0, x2, x3)`.
fn coupling_column(s: &Vector3<f64>, x: &Vector2<f64>) -> Vector3<f64> {
    Vector3::new(s.y * x.y - s.z * x.x, -s.x * x.y, s.x * x.x)
}

/// P1 shape-function gradients of a triangle.
fn shape_gradients(mesh: &TriMesh, t: &[usize; 3], area: f64) -> [Vector2<f64>; 3] {
    let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
    let mut g = [Vector2::zeros(); 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        g[i] = Vector2::new(a.y - b.y, b.x - a.x) / (2.0 * area);
    }
    g
}

static FAER_SEQ: Once = Once::new();

fn use_sequential_solver() {
    // the sparse factorization is kept single-threaded so results do not
    // depend on the worker pool size
    FAER_SEQ.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Assembled and factorized constrained warping system for one mesh and
/// material; supports repeated solves for different strain vectors.
pub struct WarpSystem<'a> {
    mesh: &'a TriMesh,
    /// Material with mu factored out; the minimizer depends only on the
    /// ratio lambda/mu, so solving with the normalized material keeps the
    /// factorization identical across material scalings and makes
    /// `q2(t * material) = t * q2(material)` exact.
    normalized: Material,
    mu_scale: f64,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    dim: usize,
}

impl<'a> WarpSystem<'a> {
    pub fn new(mesh: &'a TriMesh, material: &Material) -> Result<Self> {
        material.validate()?;
        use_sequential_solver();
        let n = mesh.num_nodes();
        let dim = 3 * n + 4;
        let total_area = mesh.total_area();
        let normalized = Material {
            lambda: material.lambda / material.mu,
            mu: 1.0,
        };

        let triplets = assemble_triplets(mesh, &normalized, total_area, n, dim);
        let mat = SparseColMat::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::SingularWarpSystem(format!("assembly: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::SingularWarpSystem(format!("factorization: {e:?}")))?;
        Ok(WarpSystem {
            mesh,
            normalized,
            mu_scale: material.mu,
            lu,
            dim,
        })
    }

    /// Minimizes the warping energy for strain `s`; returns the minimizer
    /// and the minimum value `q2(s)`.
    pub fn solve(&self, s: &Vector3<f64>) -> Result<(WarpingField, f64)> {
        let n = self.mesh.num_nodes();
        let (f, e0) = linear_term(self.mesh, &self.normalized, s);

        let mut rhs = faer::Mat::<f64>::zeros(self.dim, 1);
        for i in 0..3 * n {
            rhs[(i, 0)] = -f[i];
        }
        let sol = self.lu.solve(&rhs);

        let mut values = Vec::with_capacity(n);
        let mut fdota = 0.0;
        for i in 0..n {
            let v = Vector3::new(sol[(3 * i, 0)], sol[(3 * i + 1, 0)], sol[(3 * i + 2, 0)]);
            values.push(v);
        }
        for i in 0..3 * n {
            fdota += f[i] * sol[(i, 0)];
        }
        if !fdota.is_finite() {
            return Err(Error::SingularWarpSystem(
                "solution is non-finite".into(),
            ));
        }
        // at the constrained minimum: q2 = e0 + f.alpha / 2
        let q2 = self.mu_scale * (e0 + 0.5 * fdota);
        Ok((WarpingField { values }, q2))
    }

    /// Minimum energy only.
    pub fn q2(&self, s: &Vector3<f64>) -> Result<f64> {
        Ok(self.solve(s)?.1)
    }
}

/// One-off warping solve (builds and factorizes the system).
pub fn solve_warping(
    mesh: &TriMesh,
    material: &Material,
    strain: &Vector3<f64>,
) -> Result<(WarpingField, f64)> {
    WarpSystem::new(mesh, material)?.solve(strain)
}

fn assemble_triplets(
    mesh: &TriMesh,
    material: &Material,
    total_area: f64,
    n: usize,
    dim: usize,
) -> Vec<Triplet<usize, usize, f64>> {
    let (mu, la) = (material.mu, material.lambda);
    let elements: Vec<([[f64; 9]; 9], [usize; 3], [Vector2<f64>; 3], f64)> = mesh
        .triangles
        .par_iter()
        .zip(mesh.areas.par_iter())
        .map(|(t, &a)| {
            let g = shape_gradients(mesh, t, a);
            (element_stiffness(&g, a, mu, la), *t, g, a)
        })
        .collect();

    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for (k, t, _, _) in &elements {
        for m in 0..3 {
            for j in 0..3 {
                let row = 3 * t[m] + j;
                for nn in 0..3 {
                    for l in 0..3 {
                        let val = k[3 * m + j][3 * nn + l];
                        if val != 0.0 {
                            triplets.push(Triplet::new(row, 3 * t[nn] + l, val));
                        }
                    }
                }
            }
        }
    }

    // constraint rows: componentwise zero mean (3) + zero mean in-plane curl
    let base = 3 * n;
    let inv_area = 1.0 / total_area;
    let mut cons: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for (_, t, g, a) in &elements {
        for m in 0..3 {
            let w = a / 3.0 * inv_area;
            for j in 0..3 {
                cons.push(Triplet::new(base + j, 3 * t[m] + j, w));
            }
            // int (d2 alpha_3 - d3 alpha_2)
            cons.push(Triplet::new(base + 3, 3 * t[m] + 2, a * g[m].x * inv_area));
            cons.push(Triplet::new(base + 3, 3 * t[m] + 1, -a * g[m].y * inv_area));
        }
    }
    for c in cons {
        triplets.push(Triplet::new(c.col, c.row, c.val)); // C^T block
        triplets.push(c); // C block
    }
    for j in 0..4 {
        triplets.push(Triplet::new(base + j, base + j, 0.0));
    }
    debug_assert!(triplets.iter().all(|t| t.row < dim && t.col < dim));
    triplets
}

/// 9x9 element stiffness (3 nodes x 3 components), ordered node-major.
fn element_stiffness(g: &[Vector2<f64>; 3], area: f64, mu: f64, la: f64) -> [[f64; 9]; 9] {
    let mut k = [[0.0f64; 9]; 9];
    for m in 0..3 {
        for nn in 0..3 {
            let (g2m, g3m) = (g[m].x, g[m].y);
            let (g2n, g3n) = (g[nn].x, g[nn].y);
            // component indices: 0 = axial warp, 1 = in-plane x2, 2 = in-plane x3
            let mut block = [[0.0f64; 3]; 3];
            block[0][0] = 2.0 * mu * (g2m * g2n + g3m * g3n);
            block[1][1] = (4.0 * mu + 2.0 * la) * g2m * g2n + 2.0 * mu * g3m * g3n;
            block[2][2] = (4.0 * mu + 2.0 * la) * g3m * g3n + 2.0 * mu * g2m * g2n;
            block[1][2] = 2.0 * la * g2m * g3n + 2.0 * mu * g3m * g2n;
            block[2][1] = 2.0 * la * g3m * g2n + 2.0 * mu * g2m * g3n;
            for j in 0..3 {
                for l in 0..3 {
                    k[3 * m + j][3 * nn + l] = area * block[j][l];
                }
            }
        }
    }
    k
}

/// Linear coefficient vector `f` and constant term `e0` of the discrete
/// energy `E(alpha) = alpha^T K alpha / 2 + f . alpha + e0` for strain `s`.
fn linear_term(mesh: &TriMesh, material: &Material, s: &Vector3<f64>) -> (Vec<f64>, f64) {
    let (mu, la) = (material.mu, material.lambda);
    let n = mesh.num_nodes();
    let parts: Vec<([ (usize, [f64; 3]) ; 3], f64)> = mesh
        .triangles
        .par_iter()
        .zip(mesh.areas.par_iter())
        .map(|(t, &a)| {
            let g = shape_gradients(mesh, t, a);
            let p = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
            let centroid = (p[0] + p[1] + p[2]) / 3.0;
            let cbar = coupling_column(s, &centroid);
            let mut fe = [(0usize, [0.0f64; 3]); 3];
            for m in 0..3 {
                let coeff = [
                    2.0 * mu * a * (g[m].x * cbar.y + g[m].y * cbar.z),
                    2.0 * la * a * g[m].x * cbar.x,
                    2.0 * la * a * g[m].y * cbar.x,
                ];
                fe[m] = (t[m], coeff);
            }
            // constant term by edge-midpoint rule (exact for quadratics)
            let mut e0 = 0.0;
            for e in 0..3 {
                let mid = (p[e] + p[(e + 1) % 3]) * 0.5;
                let c = coupling_column(s, &mid);
                e0 += a / 3.0 * ((2.0 * mu + la) * c.x * c.x + mu * (c.y * c.y + c.z * c.z));
            }
            (fe, e0)
        })
        .collect();

    let mut f = vec![0.0f64; 3 * n];
    let mut e0 = 0.0;
    for (fe, e) in parts {
        for (node, coeff) in fe {
            f[3 * node] += coeff[0];
            f[3 * node + 1] += coeff[1];
            f[3 * node + 2] += coeff[2];
        }
        e0 += e;
    }
    (f, e0)
}
