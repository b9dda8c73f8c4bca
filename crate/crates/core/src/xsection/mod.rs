//! Cross-section analysis: from planar geometry and an isotropic material to
//! the 3x3 stiffness form acting on rod strains.

pub mod geometry;
pub mod mesh;
pub mod warping;

pub use geometry::{normalize_section, Normalization, SectionGeometry};
pub use mesh::{triangulate, TriMesh};
pub use warping::{q3_isotropic, solve_warping, WarpSystem, WarpingField};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Isotropic material in Lamé form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        let m = Material { lambda, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::Config(format!(
                "shear modulus mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "first Lamé parameter lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Young's modulus `E = mu (3 lambda + 2 mu) / (lambda + mu)`.
    pub fn youngs_modulus(&self) -> f64 {
        self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu)
    }
}

/// 3x3 symmetric positive-definite stiffness form `H`, acting on material
/// strain axial vectors: elastic line density is `H s . s / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessForm {
    h: Matrix3<f64>,
}

impl StiffnessForm {
    /// Relative threshold for the positive-definiteness check.
    const SPD_TOL: f64 = 1e-10;

    /// Validates symmetry and positive definiteness, symmetrizing exactly.
    pub fn new(h: Matrix3<f64>) -> Result<Self> {
        let sym = (h + h.transpose()) * 0.5;
        let rel = (h - sym).norm() / sym.norm().max(1e-300);
        if rel > 1e-12 {
            return Err(Error::Config(format!(
                "stiffness matrix is not symmetric (relative asymmetry {rel:.3e})"
            )));
        }
        let min_eig = sym.symmetric_eigenvalues().min();
        if !(min_eig > Self::SPD_TOL * sym.trace() / 3.0) {
            return Err(Error::NonSpdStiffness { min_eig });
        }
        Ok(StiffnessForm { h: sym })
    }

    pub fn from_diagonal(d: Vector3<f64>) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&d))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn apply(&self, s: &Vector3<f64>) -> Vector3<f64> {
        self.h * s
    }

    /// Quadratic form `H s . s`.
    pub fn energy_density(&self, s: &Vector3<f64>) -> f64 {
        (self.h * s).dot(s)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.h.symmetric_eigenvalues().min()
    }
}

/// Everything the section pipeline produces, for reporting.
#[derive(Debug, Clone)]
pub struct SectionAnalysis {
    pub stiffness: StiffnessForm,
    pub normalization: Normalization,
    pub num_nodes: usize,
    pub num_triangles: usize,
}

/// Computes the stiffness form of a section by normalizing the geometry,
/// meshing it, and polarizing the minimum warping energy over the canonical
/// strain basis: `H_jj = q2(e_j)`, `H_jk = (q2(e_j + e_k) - H_jj - H_kk)/2`.
pub fn compute_h(
    geometry: &SectionGeometry,
    material: &Material,
    target_edge: f64,
) -> Result<StiffnessForm> {
    Ok(analyze_section(geometry, material, target_edge)?.stiffness)
}

/// [`compute_h`] plus mesh statistics and the applied normalization.
pub fn analyze_section(
    geometry: &SectionGeometry,
    material: &Material,
    target_edge: f64,
) -> Result<SectionAnalysis> {
    let (normalized, motion) = normalize_section(geometry)?;
    let mesh = triangulate(&normalized, target_edge)?;
    let stiffness = stiffness_from_mesh(&mesh, material)?;
    Ok(SectionAnalysis {
        stiffness,
        normalization: motion,
        num_nodes: mesh.num_nodes(),
        num_triangles: mesh.num_triangles(),
    })
}

/// Polarization of `q2` over the strain basis on an existing mesh.
pub fn stiffness_from_mesh(mesh: &TriMesh, material: &Material) -> Result<StiffnessForm> {
    let sys = WarpSystem::new(mesh, material)?;
    let basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    let mut h = Matrix3::zeros();
    let mut diag = [0.0f64; 3];
    for j in 0..3 {
        diag[j] = sys.q2(&basis[j])?;
        h[(j, j)] = diag[j];
    }
    for j in 0..3 {
        for k in (j + 1)..3 {
            let q_jk = sys.q2(&(basis[j] + basis[k]))?;
            let off = 0.5 * (q_jk - diag[j] - diag[k]);
            h[(j, k)] = off;
            h[(k, j)] = off;
        }
    }
    StiffnessForm::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_stiffness_matches_classical_constants() {
        // mu J_t = mu pi r^4 / 2 for torsion, E I = 2 mu * pi r^4 / 4 for
        // bending when lambda = 0
        let m = Material::new(0.0, 1.0).unwrap();
        let h = compute_h(&SectionGeometry::circle(1.0), &m, 0.1).unwrap();
        let exact = std::f64::consts::PI / 2.0;
        for j in 0..3 {
            let rel = (h.matrix()[(j, j)] - exact).abs() / exact;
            assert!(rel < 0.01, "H[{j}{j}] = {}, rel {rel}", h.matrix()[(j, j)]);
        }
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!(h.matrix()[(j, k)].abs() < 1e-3 * h.matrix().norm());
                }
            }
        }
    }

    #[test]
    fn square_bending_entries_are_polygon_moments() {
        // with lambda = 0: H22 = E int x3^2, H33 = E int x2^2, E = 2 mu
        let m = Material::new(0.0, 1.0).unwrap();
        let sq = SectionGeometry::rectangle(1.0, 1.0);
        let h = compute_h(&sq, &m, 0.08).unwrap();
        let exact = 2.0 * (1.0 / 12.0);
        assert_relative_eq!(h.matrix()[(1, 1)], exact, max_relative = 0.01);
        assert_relative_eq!(h.matrix()[(2, 2)], exact, max_relative = 0.01);
        // doubly symmetric section: torsion-bending coupling vanishes
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!(
                        h.matrix()[(j, k)].abs() < 1e-3 * h.matrix().norm(),
                        "H[{j}{k}] = {}",
                        h.matrix()[(j, k)]
                    );
                }
            }
        }
    }

    #[test]
    fn geometry_scaling_law_fourth_power() {
        let m = Material::new(0.0, 1.0).unwrap();
        let h1 = compute_h(&SectionGeometry::rectangle(1.0, 1.0), &m, 0.1).unwrap();
        for c in [0.5f64, 2.0] {
            let hc = compute_h(&SectionGeometry::rectangle(c, c), &m, 0.1 * c).unwrap();
            let factor = c.powi(4);
            for j in 0..3 {
                for k in 0..3 {
                    let expect = factor * h1.matrix()[(j, k)];
                    let got = hc.matrix()[(j, k)];
                    let scale = factor * h1.matrix().norm();
                    assert!(
                        (got - expect).abs() <= 0.005 * scale,
                        "c={c}: H[{j}{k}] = {got}, expected {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn material_scaling_is_exact_on_fixed_mesh() {
        let sq = SectionGeometry::rectangle(1.0, 1.0);
        let (norm, _) = normalize_section(&sq).unwrap();
        let mesh = triangulate(&norm, 0.25).unwrap();
        let h1 = stiffness_from_mesh(&mesh, &Material::new(1.0, 1.0).unwrap()).unwrap();
        let h2 = stiffness_from_mesh(&mesh, &Material::new(2.0, 2.0).unwrap()).unwrap();
        let h3 = stiffness_from_mesh(&mesh, &Material::new(3.0, 3.0).unwrap()).unwrap();
        // power-of-two factor reproduces every float exactly
        assert_eq!(h2.matrix(), &(h1.matrix() * 2.0));
        let scale = h1.matrix().norm();
        for j in 0..3 {
            for k in 0..3 {
                let diff = (h3.matrix()[(j, k)] - 3.0 * h1.matrix()[(j, k)]).abs();
                assert!(diff <= 1e-12 * scale, "H[{j}{k}] differs by {diff}");
            }
        }
    }

    #[test]
    fn poisson_coupling_raises_bending_to_youngs_modulus() {
        // lambda > 0: the in-plane relaxation must bring the bending entry
        // down from (2 mu + lambda) I to E I
        let m = Material::new(2.0, 1.0).unwrap();
        let h = compute_h(&SectionGeometry::circle(1.0), &m, 0.12).unwrap();
        let ei = m.youngs_modulus() * std::f64::consts::PI / 4.0;
        assert_relative_eq!(h.matrix()[(1, 1)], ei, max_relative = 0.015);
    }

    #[test]
    fn stiffness_form_rejects_indefinite_matrix() {
        let bad = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(matches!(
            StiffnessForm::new(bad),
            Err(Error::NonSpdStiffness { .. })
        ));
    }

    #[test]
    fn stiffness_form_rejects_asymmetric_matrix() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.5;
        assert!(StiffnessForm::new(m).is_err());
    }
}
