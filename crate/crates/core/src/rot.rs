//! Rotation-vector calculus on SO(3).
//!
//! Rotations are stored as unit quaternions (`nalgebra::UnitQuaternion`,
//! convention `(w, x, y, z)`); tangent vectors are rotation vectors in R^3
//! (axis times angle). The exponential/logarithm pair and the left/right
//! tangent Jacobians below are the only Lie-group machinery the rest of the
//! crate needs. All maps use Taylor fallbacks for small angles so they stay
//! smooth enough for tight finite-difference checks.
//!
//! Conventions used throughout (`V` is the skew matrix of `v`, `Vx = v x x`):
//!
//! * `exp(v)` is the rotation by angle `|v|` about `v/|v|`.
//! * `log` returns the rotation vector with angle in `[0, pi]`.
//! * `J_l(v) = int_0^1 exp(xi V) dxi` is the left Jacobian, satisfying
//!   `exp(u) exp(v) = exp(v + J_l(v)^-1 u + O(|u|^2))`.
//! * `J_r(v) = J_l(-v) = J_l(v)^T` is the right Jacobian, satisfying
//!   `exp(v + d) = exp(v) exp(J_r(v) d + O(|d|^2))`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Angle threshold below which Taylor series replace the closed forms.
const SMALL_ANGLE: f64 = 1e-4;

/// Skew-symmetric matrix of `v`, i.e. the matrix with `skew(v) * x = v x x`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map: rotation vector to unit quaternion.
pub fn exp(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    // half-angle sinc: sin(theta/2) / theta
    let (w, k) = if theta < SMALL_ANGLE {
        (
            1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0,
            0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0,
        )
    } else {
        ((0.5 * theta).cos(), (0.5 * theta).sin() / theta)
    };
    UnitQuaternion::new_unchecked(Quaternion::new(w, k * v.x, k * v.y, k * v.z))
}

/// Logarithm map: unit quaternion to rotation vector with angle in `[0, pi]`.
pub fn log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    // Canonicalize to the hemisphere w >= 0 so the returned angle is the
    // geodesic (shortest) one.
    let (w, v) = if q.w >= 0.0 {
        (q.w, Vector3::new(q.i, q.j, q.k))
    } else {
        (-q.w, Vector3::new(-q.i, -q.j, -q.k))
    };
    let s = v.norm();
    if s < SMALL_ANGLE {
        // theta/sin(theta/2) expanded around 0 with sin(theta/2) = s, cos = w
        let s2 = s * s;
        let f = (2.0 / w) * (1.0 - s2 / (3.0 * w * w) + s2 * s2 / (5.0 * w.powi(4)));
        v * f
    } else {
        let theta = 2.0 * s.atan2(w);
        v * (theta / s)
    }
}

/// Renormalizes a quaternion in place; cheap guard against drift after
/// repeated multiplicative updates.
pub fn renormalize(q: &mut UnitQuaternion<f64>) {
    let n = q.as_ref().norm();
    if (n - 1.0).abs() > 1e-15 {
        *q = UnitQuaternion::new_unchecked(q.as_ref() / n);
    }
}

/// Left Jacobian `J_l(v) = I + (1-cos t)/t^2 V + (t - sin t)/t^3 V^2`.
///
/// This is also the tangent integral `int_0^1 exp(xi V) dxi`, which is what
/// the centerline recovery uses to integrate a rotating unit tangent in
/// closed form over one geodesic segment.
pub fn jac_left(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let vx = skew(v);
    let (c1, c2) = if theta2.sqrt() < SMALL_ANGLE {
        (
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0,
        )
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + vx * c1 + vx * vx * c2
}

/// Inverse left Jacobian `J_l(v)^-1 = I - V/2 + c(t) V^2`.
pub fn jac_left_inv(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let vx = skew(v);
    let c = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - vx * 0.5 + vx * vx * c
}

/// Right Jacobian `J_r(v) = J_l(-v)`.
pub fn jac_right(v: &Vector3<f64>) -> Matrix3<f64> {
    jac_left(&(-v))
}

/// Inverse right Jacobian `J_r(v)^-1 = J_l(-v)^-1`.
pub fn jac_right_inv(v: &Vector3<f64>) -> Matrix3<f64> {
    jac_left_inv(&(-v))
}

/// Geodesic midpoint of two rotations.
pub fn midpoint(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let v = log(&(a.inverse() * b));
    a * exp(&(v * 0.5))
}

/// Geodesic distance (relative rotation angle) between two rotations.
pub fn distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    log(&(a.inverse() * b)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample_vectors() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1e-9, -2e-9, 1e-10),
            Vector3::new(1e-5, 2e-5, -1.5e-5),
            Vector3::new(0.3, -0.4, 0.5),
            Vector3::new(-1.2, 0.7, 2.0),
            Vector3::new(3.0, 0.1, -0.2),
        ]
    }

    #[test]
    fn exp_log_roundtrip() {
        for v in sample_vectors() {
            let q = exp(&v);
            let w = log(&q);
            assert_relative_eq!(v, w, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn exp_matches_rotation_matrix() {
        for v in sample_vectors() {
            let q = exp(&v);
            let r = q.to_rotation_matrix();
            // Rodrigues formula as an independent expression
            let theta = v.norm();
            let expected = if theta == 0.0 {
                Matrix3::identity()
            } else {
                let vx = skew(&v);
                Matrix3::identity()
                    + vx * (theta.sin() / theta)
                    + vx * vx * ((1.0 - theta.cos()) / (theta * theta))
            };
            assert_relative_eq!(r.matrix(), &expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_takes_shortest_branch() {
        // A quaternion and its negation encode the same rotation.
        let v = Vector3::new(0.1, 0.2, -0.3);
        let q = exp(&v);
        let neg = UnitQuaternion::new_unchecked(-q.as_ref());
        assert_relative_eq!(log(&neg), v, epsilon = 1e-12);
    }

    #[test]
    fn left_jacobian_is_tangent_integral() {
        // J_l(v) e = int_0^1 exp(xi v) e dxi, checked by fine quadrature.
        for v in sample_vectors() {
            let n = 20_000;
            let mut acc = Vector3::zeros();
            for i in 0..n {
                let xi = (i as f64 + 0.5) / n as f64;
                acc += exp(&(v * xi)) * Vector3::x();
            }
            acc /= n as f64;
            let jl = jac_left(&v) * Vector3::x();
            assert_relative_eq!(acc, jl, epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobian_inverse_consistency() {
        for v in sample_vectors() {
            let prod = jac_left(&v) * jac_left_inv(&v);
            assert_relative_eq!(prod, Matrix3::identity(), epsilon = 1e-12);
            let prod_r = jac_right(&v) * jac_right_inv(&v);
            assert_relative_eq!(prod_r, Matrix3::identity(), epsilon = 1e-12);
            // transpose identities
            assert_relative_eq!(jac_left(&v).transpose(), jac_right(&v), epsilon = 1e-13);
        }
    }

    #[test]
    fn bch_first_order() {
        // log(exp(u) exp(v)) = v + J_l(v)^-1 u + O(|u|^2)
        let v = Vector3::new(0.4, -0.2, 0.7);
        let u = Vector3::new(1e-6, 2e-6, -1e-6);
        let lhs = log(&(exp(&u) * exp(&v)));
        let rhs = v + jac_left_inv(&v) * u;
        assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn midpoint_halves_the_geodesic() {
        let a = exp(&Vector3::new(0.2, 0.1, -0.3));
        let b = exp(&Vector3::new(-0.5, 0.4, 0.8));
        let m = midpoint(&a, &b);
        assert_relative_eq!(distance(&a, &m), distance(&m, &b), epsilon = 1e-12);
        assert_relative_eq!(
            distance(&a, &m) * 2.0,
            distance(&a, &b),
            epsilon = 1e-12
        );
    }
}
