//! Shared fixtures for integration tests.

use nalgebra::{UnitQuaternion, Vector3};
use rodnet_core::model::{LoadProfile, Network, RodSpec};
use rodnet_core::xsection::StiffnessForm;

/// Planar three-rod star with tangents at 120 degrees.
pub fn star_rods(h: Vector3<f64>, length: f64) -> Vec<RodSpec> {
    (0..3)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
            RodSpec {
                length,
                frame: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
                stiffness: StiffnessForm::from_diagonal(h).unwrap(),
                distributed: LoadProfile::zero(),
                end_force: Vector3::zeros(),
            }
        })
        .collect()
}

/// Balanced and torque-balanced star loads at scale `eps`: axial end pulls
/// of magnitude `axial * eps` pin the junction orientation, an out-of-plane
/// constant distributed load on rod 0 drives bending, and out-of-plane end
/// forces close both balances:
/// `beta_0 = -2qL/3, beta_1 = beta_2 = -qL/6` for distributed magnitude `q`.
pub fn loaded_star(eps: f64, axial: f64, h: Vector3<f64>, length: f64) -> Network {
    let mut rods = star_rods(h, length);
    let q = eps;
    rods[0].distributed = LoadProfile::Constant(Vector3::z() * q);
    for (i, rod) in rods.iter_mut().enumerate() {
        let t = rod.frame * Vector3::x();
        let beta = if i == 0 {
            -2.0 * q * length / 3.0
        } else {
            -q * length / 6.0
        };
        rod.end_force = t * (axial * eps) + Vector3::z() * beta;
    }
    Network::new(rods).unwrap()
}

/// Umbrella loading: every rod carries the same constant out-of-plane
/// distributed load `3 eps e3` closed by the end force `-3 eps L e3`. Fully
/// symmetric under the star's dihedral group, which pins the junction
/// orientation without any load work at the straight state (the load
/// resultant of each rod is normal to its tangent), so the energy scale
/// stays O(eps^2) and the optimizer can converge deeply.
pub fn umbrella_star(eps: f64, h: Vector3<f64>, length: f64) -> Network {
    let mut rods = star_rods(h, length);
    let q = 3.0 * eps;
    for rod in rods.iter_mut() {
        rod.distributed = LoadProfile::Constant(Vector3::z() * q);
        rod.end_force = Vector3::z() * (-q * length);
    }
    Network::new(rods).unwrap()
}

/// Default star used by the acceptance scenarios.
pub fn acceptance_star(eps: f64) -> Network {
    umbrella_star(eps, Vector3::new(1.5, 1.0, 2.0), 1.0)
}
