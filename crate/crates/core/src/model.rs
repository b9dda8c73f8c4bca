//! Network data model: rods, frames, loads, and the cumulative load
//! primitive `p(x) = int_x^L f(z) dz + F` that drives the reduced energy.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::xsection::StiffnessForm;
use crate::{Error, Result};

/// Distributed load along a rod (force per unit length), in one of three
/// closed-form-integrable representations.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadProfile {
    Constant(Vector3<f64>),
    /// Coefficients of `sum_j c_j x^j`, low order first.
    Polynomial(Vec<Vector3<f64>>),
    /// Piecewise-linear interpolant through `(x, value)` samples with
    /// strictly increasing abscissae spanning `[0, L]`.
    Samples(Vec<(f64, Vector3<f64>)>),
}

impl LoadProfile {
    pub fn zero() -> Self {
        LoadProfile::Constant(Vector3::zeros())
    }

    pub fn validate(&self, length: f64) -> Result<()> {
        match self {
            LoadProfile::Constant(c) => {
                if !c.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidLoad("constant load is not finite".into()));
                }
            }
            LoadProfile::Polynomial(coeffs) => {
                if coeffs.iter().any(|c| !c.iter().all(|v| v.is_finite())) {
                    return Err(Error::InvalidLoad(
                        "polynomial coefficients are not finite".into(),
                    ));
                }
            }
            LoadProfile::Samples(samples) => {
                if samples.len() < 2 {
                    return Err(Error::InvalidLoad(
                        "sampled load needs at least two samples".into(),
                    ));
                }
                for w in samples.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::InvalidLoad(format!(
                            "sample abscissae must strictly increase, got {} then {}",
                            w[0].0, w[1].0
                        )));
                    }
                }
                let first = samples.first().unwrap().0;
                let last = samples.last().unwrap().0;
                if first != 0.0 || (last - length).abs() > 1e-12 * length.max(1.0) {
                    return Err(Error::InvalidLoad(format!(
                        "samples must span [0, L] = [0, {length}], got [{first}, {last}]"
                    )));
                }
                if samples
                    .iter()
                    .any(|(x, v)| !x.is_finite() || !v.iter().all(|c| c.is_finite()))
                {
                    return Err(Error::InvalidLoad("sample values are not finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LoadProfile::Constant(c) => *c == Vector3::zeros(),
            LoadProfile::Polynomial(coeffs) => coeffs.iter().all(|c| *c == Vector3::zeros()),
            LoadProfile::Samples(samples) => samples.iter().all(|(_, v)| *v == Vector3::zeros()),
        }
    }

    pub fn evaluate(&self, x: f64) -> Vector3<f64> {
        match self {
            LoadProfile::Constant(c) => *c,
            LoadProfile::Polynomial(coeffs) => {
                let mut acc = Vector3::zeros();
                for c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc
            }
            LoadProfile::Samples(samples) => {
                if x <= samples[0].0 {
                    return samples[0].1;
                }
                if x >= samples.last().unwrap().0 {
                    return samples.last().unwrap().1;
                }
                let idx = samples.partition_point(|(xs, _)| *xs <= x) - 1;
                let (x0, v0) = samples[idx];
                let (x1, v1) = samples[idx + 1];
                let t = (x - x0) / (x1 - x0);
                v0 * (1.0 - t) + v1 * t
            }
        }
    }

    /// Exact integral of the profile over `[a, b]` (trapezoid is exact for
    /// the piecewise-linear interpolant).
    pub fn integral(&self, a: f64, b: f64) -> Vector3<f64> {
        match self {
            LoadProfile::Constant(c) => c * (b - a),
            LoadProfile::Polynomial(coeffs) => {
                let mut acc = Vector3::zeros();
                for (j, c) in coeffs.iter().enumerate() {
                    let p = (j + 1) as i32;
                    acc += c * ((b.powi(p) - a.powi(p)) / p as f64);
                }
                acc
            }
            LoadProfile::Samples(samples) => {
                piecewise_integral(samples, a, b, |x0, v0, x1, v1, lo, hi| {
                    let mid0 = interp(x0, v0, x1, v1, lo);
                    let mid1 = interp(x0, v0, x1, v1, hi);
                    (mid0 + mid1) * (0.5 * (hi - lo))
                })
            }
        }
    }

    /// Exact first moment `int_a^b x f(x) dx`.
    pub fn moment(&self, a: f64, b: f64) -> Vector3<f64> {
        match self {
            LoadProfile::Constant(c) => c * ((b * b - a * a) / 2.0),
            LoadProfile::Polynomial(coeffs) => {
                let mut acc = Vector3::zeros();
                for (j, c) in coeffs.iter().enumerate() {
                    let p = (j + 2) as i32;
                    acc += c * ((b.powi(p) - a.powi(p)) / p as f64);
                }
                acc
            }
            LoadProfile::Samples(samples) => {
                piecewise_integral(samples, a, b, |x0, v0, x1, v1, lo, hi| {
                    // int x (v0 + (v1-v0)(x-x0)/(x1-x0)) dx over [lo, hi]
                    let slope = (v1 - v0) / (x1 - x0);
                    let c0 = v0 - slope * x0;
                    c0 * ((hi * hi - lo * lo) / 2.0) + slope * ((hi.powi(3) - lo.powi(3)) / 3.0)
                })
            }
        }
    }
}

fn interp(x0: f64, v0: Vector3<f64>, x1: f64, v1: Vector3<f64>, x: f64) -> Vector3<f64> {
    let t = (x - x0) / (x1 - x0);
    v0 * (1.0 - t) + v1 * t
}

fn piecewise_integral(
    samples: &[(f64, Vector3<f64>)],
    a: f64,
    b: f64,
    piece: impl Fn(f64, Vector3<f64>, f64, Vector3<f64>, f64, f64) -> Vector3<f64>,
) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for w in samples.windows(2) {
        let (x0, v0) = w[0];
        let (x1, v1) = w[1];
        let lo = x0.max(a);
        let hi = x1.min(b);
        if hi > lo {
            acc += piece(x0, v0, x1, v1, lo, hi);
        }
    }
    acc
}

/// One straight rod: length, reference frame, stiffness, loads.
#[derive(Debug, Clone)]
pub struct RodSpec {
    pub length: f64,
    /// Reference rotation; column 1 of the matrix is the rod tangent.
    pub frame: UnitQuaternion<f64>,
    pub stiffness: StiffnessForm,
    pub distributed: LoadProfile,
    pub end_force: Vector3<f64>,
}

impl RodSpec {
    pub fn validate(&self, index: usize) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidRod {
                rod: index,
                reason: format!("length must be positive, got {}", self.length),
            });
        }
        self.distributed
            .validate(self.length)
            .map_err(|e| Error::InvalidRod {
                rod: index,
                reason: e.to_string(),
            })?;
        if !self.end_force.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRod {
                rod: index,
                reason: "end force is not finite".into(),
            });
        }
        Ok(())
    }

    /// Undeformed tangent direction `t = Q e1`.
    pub fn tangent(&self) -> Vector3<f64> {
        self.frame * Vector3::x()
    }

    /// Cumulative load `p(x) = int_x^L f(z) dz + F`; `p(L) = F` exactly.
    pub fn cumulative_load(&self, x: f64) -> Result<Vector3<f64>> {
        if !(0.0..=self.length).contains(&x) {
            return Err(Error::OutOfRange(format!(
                "arclength {x} outside [0, {}]",
                self.length
            )));
        }
        if x == self.length {
            return Ok(self.end_force);
        }
        Ok(self.distributed.integral(x, self.length) + self.end_force)
    }

    /// `int_0^L p(x) dx`, exact: equals `int_0^L z f(z) dz + L F`.
    pub fn load_resultant_moment(&self) -> Vector3<f64> {
        self.distributed.moment(0.0, self.length) + self.end_force * self.length
    }

    /// Sup norm of `p` over the rod (dense sampling, exact at breakpoints
    /// for constant and linear profiles).
    pub fn cumulative_load_inf_norm(&self) -> f64 {
        let n = 128;
        let mut m: f64 = 0.0;
        for k in 0..=n {
            let x = self.length * k as f64 / n as f64;
            let p = self.distributed.integral(x, self.length) + self.end_force;
            m = m.max(p.amax());
        }
        m
    }
}

/// The junction network: `n >= 1` rods meeting at one point, plus an
/// optional dead point load applied at the junction itself (used to close
/// the force balance for single-strut scenarios).
#[derive(Debug, Clone)]
pub struct Network {
    pub rods: Vec<RodSpec>,
    pub junction_force: Vector3<f64>,
}

impl Network {
    pub fn new(rods: Vec<RodSpec>) -> Result<Self> {
        Self::with_junction_force(rods, Vector3::zeros())
    }

    pub fn with_junction_force(rods: Vec<RodSpec>, junction_force: Vector3<f64>) -> Result<Self> {
        if rods.is_empty() {
            return Err(Error::Config("network needs at least one rod".into()));
        }
        for (i, rod) in rods.iter().enumerate() {
            rod.validate(i)?;
        }
        Ok(Network {
            rods,
            junction_force,
        })
    }

    pub fn num_rods(&self) -> usize {
        self.rods.len()
    }

    /// Pairs of rods sharing the same reference frame. Allowed by the
    /// model, but worth surfacing: the rods overlap geometrically.
    pub fn coincident_frame_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for i in 0..self.rods.len() {
            for j in (i + 1)..self.rods.len() {
                if crate::rot::distance(&self.rods[i].frame, &self.rods[j].frame) < 1e-12 {
                    warnings.push(format!(
                        "rods {i} and {j} share the same frame and overlap geometrically"
                    ));
                }
            }
        }
        warnings
    }

    /// Largest load magnitude, used to scale balance/residual tolerances.
    pub fn load_scale(&self) -> f64 {
        self.rods
            .iter()
            .map(|r| r.cumulative_load_inf_norm())
            .fold(self.junction_force.amax(), f64::max)
    }

    pub fn max_length(&self) -> f64 {
        self.rods.iter().map(|r| r.length).fold(0.0, f64::max)
    }
}

/// Force-balance report for the pure traction problem.
#[derive(Debug, Clone)]
pub struct BalanceReport {
    /// `junction_force + sum_i p_i(0)`; zero for admissible loads.
    pub residual: Vector3<f64>,
    /// `p_i(0)` per rod.
    pub per_rod: Vec<Vector3<f64>>,
    pub load_scale: f64,
    pub pass: bool,
}

/// Checks the structural force-balance identity: the contact forces of all
/// rods at the junction (plus any applied junction point load) must cancel.
pub fn check_balance(network: &Network, tol: f64) -> BalanceReport {
    let per_rod: Vec<Vector3<f64>> = network
        .rods
        .iter()
        .map(|r| r.cumulative_load(0.0).expect("0 is always in range"))
        .collect();
    let residual = network.junction_force + per_rod.iter().sum::<Vector3<f64>>();
    let load_scale = network.load_scale();
    let pass = residual.norm() <= tol * (load_scale + f64::EPSILON);
    BalanceReport {
        residual,
        per_rod,
        load_scale,
        pass,
    }
}

/// Builds a frame from a rotation matrix, re-orthonormalizing by polar
/// projection when the drift is small and rejecting anything worse (or any
/// reflection), with the rod index in the error message.
pub fn frame_from_matrix(m: &Matrix3<f64>, rod: usize) -> Result<UnitQuaternion<f64>> {
    let drift = (m.transpose() * m - Matrix3::identity()).norm();
    if drift > 1e-6 {
        return Err(Error::InvalidRod {
            rod,
            reason: format!("frame is not orthonormal (drift {drift:.3e})"),
        });
    }
    if m.determinant() < 0.0 {
        return Err(Error::InvalidRod {
            rod,
            reason: "frame has determinant -1 (reflection, not a rotation)".into(),
        });
    }
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    // polar factor of a near-rotation with det > 0 is a rotation
    if r.determinant() < 0.0 {
        return Err(Error::InvalidRod {
            rod,
            reason: "frame projects to a reflection".into(),
        });
    }
    // guard rounding drift out of the projection itself
    let correction = (r.transpose() * r - Matrix3::identity()).norm();
    if correction > 1e-12 {
        let svd2 = r.svd(true, true);
        r = svd2.u.unwrap() * svd2.v_t.unwrap();
    }
    Ok(UnitQuaternion::from_rotation_matrix(
        &nalgebra::Rotation3::from_matrix_unchecked(r),
    ))
}
