//! Independent oracles for tests and verification.
//!
//! Deliberately built with different numerics than the production path:
//! the linearized junction solver integrates explicit closed-form couple
//! fields with composite Simpson quadrature, the single-rod integrator is
//! a fourth-order Magnus method, and the classical section constants come
//! from closed forms and the Saint-Venant series. Nothing here touches the
//! finite-element assembly or the energy minimizer; shared code is limited
//! to elementary rotation algebra (see `docs/linearized_model.md` for the
//! derivation of the linear system).

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::model::Network;
use crate::rot;
use crate::xsection::{Material, SectionGeometry};
use crate::{Error, Result};

/// Infinitesimal solution of the linearized junction problem, sampled on
/// `n + 1` uniform nodes per rod.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    /// displacement u_i of the centerline
    pub displacement: Vec<Vec<Vector3<f64>>>,
    /// infinitesimal rotation phi_i of the cross-sections
    pub rotation: Vec<Vec<Vector3<f64>>>,
    /// shared junction rotation vector
    pub junction_rotation: Vector3<f64>,
}

/// Solves the small-displacement junction rod system about the straight
/// state:
///
/// ```text
/// (H~_i phi_i')' + t_i x p_i = 0,   H~_i phi_i'(L) = 0
/// phi_1(0) = ... = phi_n(0),        sum_i H~_i phi_i'(0) = 0
/// u_i' = phi_i x t_i,               u_i(0) shared,  u_1(L_1) = 0
/// ```
///
/// with `H~_i = Q_i H_i Q_i^T`. The couple field integrates in closed form
/// to `m_i(x) = t_i x int_x^L p_i`, which already satisfies both couple
/// boundary conditions when the loads are torque-balanced; the remaining
/// junction rotation is fixed by the second-order moment-balance condition
/// `sum_i int (phi_i x t_i) x p_i = 0` (the direction a finite-load
/// equilibrium actually selects). Requires force- and torque-balanced
/// loads; a degenerate load geometry makes the 3x3 junction system
/// singular and is reported as an error.
pub fn solve_linearized(network: &Network, n: usize) -> Result<LinearSolution> {
    if n < 2 {
        return Err(Error::OutOfRange(format!(
            "need at least 2 segments, got {n}"
        )));
    }
    let num = network.num_rods();
    let scale = network.load_scale() + f64::EPSILON;

    // resultants P_i = int_0^L p_i (exact closed forms)
    let resultants: Vec<Vector3<f64>> = network
        .rods
        .iter()
        .map(|r| r.load_resultant_moment())
        .collect();

    // solvability: forces and torques about the junction must balance
    let force: Vector3<f64> = network.junction_force
        + network
            .rods
            .iter()
            .map(|r| r.cumulative_load(0.0).expect("in range"))
            .sum::<Vector3<f64>>();
    let torque: Vector3<f64> = network
        .rods
        .iter()
        .zip(&resultants)
        .map(|(r, p)| r.tangent().cross(p))
        .sum();
    if force.norm() > 1e-9 * scale * network.max_length().max(1.0) {
        return Err(Error::UnbalancedLoads {
            residual: force.norm(),
            tol: 1e-9 * scale,
        });
    }
    if torque.norm() > 1e-9 * scale * network.max_length().max(1.0) {
        return Err(Error::SingularLinearSystem(format!(
            "loads are not torque-balanced about the junction (|torque| = {:.3e})",
            torque.norm()
        )));
    }

    // spatial compliance per rod and exact couple field m_i(x)
    let compliance: Vec<Matrix3<f64>> = network
        .rods
        .iter()
        .map(|r| {
            let q = *r.frame.to_rotation_matrix().matrix();
            let h_spatial = q * r.stiffness.matrix() * q.transpose();
            h_spatial
                .try_inverse()
                .ok_or_else(|| Error::SingularLinearSystem("stiffness not invertible".into()))
        })
        .collect::<Result<_>>()?;

    let couple = |i: usize, x: f64| -> Vector3<f64> {
        let r = &network.rods[i];
        // int_x^L p(z) dz = int_x^L (w - x) f(w) dw + (L - x) F
        let int_p = r.distributed.moment(x, r.length) - r.distributed.integral(x, r.length) * x
            + r.end_force * (r.length - x);
        r.tangent().cross(&int_p)
    };

    // psi_i = int_0^x C_i m_i on a half-step grid (composite Simpson)
    let mut psi: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(num); // fine grid, 2n+1 values
    for i in 0..num {
        let l = network.rods[i].length;
        let hf = l / (2 * n) as f64;
        let mut acc = Vector3::zeros();
        let mut vals = vec![acc];
        let g = |x: f64| compliance[i] * couple(i, x);
        let mut prev = g(0.0);
        for k in 1..=(2 * n) {
            let x = k as f64 * hf;
            let mid = g(x - 0.5 * hf);
            let cur = g(x);
            acc += (prev + mid * 4.0 + cur) * (hf / 6.0);
            vals.push(acc);
            prev = cur;
        }
        psi.push(vals);
    }

    // junction gauge: M phi_J = - sum_i int (psi_i x t_i) x p_i
    let mut m = Matrix3::<f64>::zeros();
    for i in 0..num {
        let t = network.rods[i].tangent();
        let p = resultants[i];
        m += t * p.transpose() - Matrix3::identity() * t.dot(&p);
    }
    let mut rhs = Vector3::zeros();
    for i in 0..num {
        let r = &network.rods[i];
        let t = r.tangent();
        let hf = r.length / (2 * n) as f64;
        let integrand = |k: usize| -> Vector3<f64> {
            let x = k as f64 * hf;
            let p = r.cumulative_load(x.min(r.length)).expect("in range");
            (psi[i][k].cross(&t)).cross(&p)
        };
        let mut acc = Vector3::zeros();
        for k in 0..n {
            acc += (integrand(2 * k) + integrand(2 * k + 1) * 4.0 + integrand(2 * k + 2))
                * (2.0 * hf / 6.0);
        }
        rhs -= acc;
    }
    // minimal-norm solve: symmetric load patterns leave some junction
    // rotations energetically neutral (M has a kernel with rhs consistent);
    // a genuinely degenerate geometry shows up as an inconsistent system
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let phi_j = if sigma_max == 0.0 {
        Vector3::zeros()
    } else {
        let mut inv = svd;
        let cutoff = 1e-10 * sigma_max;
        inv.pseudo_inverse(cutoff)
            .map(|pinv| pinv * rhs)
            .map_err(|e| Error::SingularLinearSystem(e.to_string()))?
    };
    let residual = (m * phi_j - rhs).norm();
    if residual > 1e-9 * (rhs.norm() + scale) {
        return Err(Error::SingularLinearSystem(format!(
            "junction moment system is inconsistent (residual {residual:.3e}); \
             degenerate load/rod geometry"
        )));
    }

    // rotations on the coarse grid and displacements u' = phi x t
    let mut rotation: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(num);
    let mut displacement: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(num);
    let mut u_junction = Vector3::zeros();
    for i in 0..num {
        let r = &network.rods[i];
        let t = r.tangent();
        let phi: Vec<Vector3<f64>> = (0..=(2 * n)).map(|k| phi_j + psi[i][k]).collect();
        let hf = r.length / (2 * n) as f64;
        let mut u = vec![Vector3::zeros()];
        let mut acc = Vector3::zeros();
        for k in 0..n {
            let a = phi[2 * k].cross(&t);
            let b = phi[2 * k + 1].cross(&t);
            let c = phi[2 * k + 2].cross(&t);
            acc += (a + b * 4.0 + c) * (2.0 * hf / 6.0);
            u.push(acc);
        }
        if i == 0 {
            u_junction = -acc; // anchor: u_1(L_1) = 0
        }
        rotation.push((0..=n).map(|k| phi[2 * k]).collect());
        displacement.push(u);
    }
    for u in &mut displacement {
        for v in u.iter_mut() {
            *v += u_junction;
        }
    }

    Ok(LinearSolution {
        displacement,
        rotation,
        junction_rotation: phi_j,
    })
}

/// Frame and centerline of a single rod with prescribed spatial strain,
/// integrated with a fourth-order Magnus scheme (two-point Gauss) for the
/// frame and Simpson quadrature for the centerline.
pub fn integrate_single_rod(
    r0: &UnitQuaternion<f64>,
    spatial_strain: impl Fn(f64) -> Vector3<f64>,
    length: f64,
    n: usize,
) -> (Vec<UnitQuaternion<f64>>, Vec<Vector3<f64>>) {
    let h = length / n as f64;
    let c1 = 0.5 - 3f64.sqrt() / 6.0;
    let c2 = 0.5 + 3f64.sqrt() / 6.0;
    let mut rotations = Vec::with_capacity(n + 1);
    let mut positions = Vec::with_capacity(n + 1);
    rotations.push(*r0);
    positions.push(Vector3::zeros());
    let mut r = *r0;
    let mut y = Vector3::zeros();
    for k in 0..n {
        let x = k as f64 * h;
        let a1 = spatial_strain(x + c1 * h);
        let a2 = spatial_strain(x + c2 * h);
        // Magnus: Omega = h (a1 + a2)/2 + sqrt(3) h^2 / 12 [a2, a1]
        let omega = (a1 + a2) * (0.5 * h) + a2.cross(&a1) * (3f64.sqrt() * h * h / 12.0);
        // half-step rotation for the Simpson midpoint
        let a1h = spatial_strain(x + 0.5 * c1 * h);
        let a2h = spatial_strain(x + 0.5 * c2 * h);
        let omega_half =
            (a1h + a2h) * (0.25 * h) + a2h.cross(&a1h) * (3f64.sqrt() * h * h / 48.0);
        let r_mid = rot::exp(&omega_half) * r;
        let r_next = rot::exp(&omega) * r;
        let e1 = Vector3::x();
        y += (r * e1 + r_mid * e1 * 4.0 + r_next * e1) * (h / 6.0);
        r = r_next;
        rotations.push(r);
        positions.push(y);
    }
    (rotations, positions)
}

/// Classical closed-form section constants: torsional rigidity `mu K` and
/// the two bending stiffnesses `E I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalConstants {
    pub torsional_rigidity: f64,
    /// bending about the x2 axis (integrand x3^2) and about x3 (x2^2)
    pub bending_stiffness: [f64; 2],
}

/// Supported sections: circle and rectangle. The rectangle torsion constant
/// uses the Saint-Venant series truncated at 10 terms (truncation error
/// below 1e-6 relative), evaluated on the canonical (long side, short side)
/// ordering so the constant is exactly symmetric under axis swap.
pub fn classical_constants(
    geometry: &SectionGeometry,
    material: &Material,
) -> Result<ClassicalConstants> {
    material.validate()?;
    let e = material.youngs_modulus();
    match geometry {
        SectionGeometry::Circle { radius, .. } => {
            let r4 = radius.powi(4);
            Ok(ClassicalConstants {
                torsional_rigidity: material.mu * std::f64::consts::PI * r4 / 2.0,
                bending_stiffness: [
                    e * std::f64::consts::PI * r4 / 4.0,
                    e * std::f64::consts::PI * r4 / 4.0,
                ],
            })
        }
        SectionGeometry::Rectangle { a, b, .. } => {
            let long = a.max(*b);
            let short = a.min(*b);
            let mut series = 0.0;
            for term in 0..10 {
                let nn = (2 * term + 1) as f64;
                series += (nn * std::f64::consts::PI * long / (2.0 * short)).tanh() / nn.powi(5);
            }
            let k = long * short.powi(3) / 3.0
                - 64.0 / std::f64::consts::PI.powi(5) * short.powi(4) * series;
            Ok(ClassicalConstants {
                torsional_rigidity: material.mu * k,
                bending_stiffness: [e * a * b.powi(3) / 12.0, e * a.powi(3) * b / 12.0],
            })
        }
        SectionGeometry::Polygon { .. } => Err(Error::UnsupportedSection(
            "classical constants exist only for circle and rectangle".into(),
        )),
    }
}
