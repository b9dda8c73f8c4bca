//! Stability diagnostics: smallest eigenvalue of the discrete Hessian.
//!
//! The Hessian acts on left-trivialized tangent vectors through central
//! finite differences of the exact gradient under the retraction (valid at
//! stationary points). The three global-rotation directions (the same
//! tangent vector at every node including the junction) are the exact
//! nullspace of the elastic energy; under dead loads they carry pure
//! load-geometry curvature and say nothing about the deformation modes, so
//! they are deflated out of the probe space by shifting them far up the
//! spectrum. The smallest remaining eigenvalue is estimated by Lanczos
//! iteration with full reorthogonalization; its sign flags local stability
//! of the deformation modes (bifurcation detector).

use nalgebra::DMatrix;

use super::energy::Discretization;
use super::field::RotationField;
use crate::Result;

/// Outcome of the eigenvalue probe. `converged == false` means the Lanczos
/// residual did not drop below the target within the probe budget and the
/// value is an estimate with a warning attached.
#[derive(Debug, Clone, Copy)]
pub struct EigEstimate {
    pub value: f64,
    pub converged: bool,
}

/// Finite-difference step for Hessian-vector products.
const FD_STEP: f64 = 1e-5;

/// Smallest deformation-mode eigenvalue of the discrete Hessian at `field`
/// (meaningful at stationary points). `probes` bounds the number of Lanczos
/// iterations; 100 is plenty for the bifurcation scenarios.
pub fn hessian_min_eig(
    disc: &Discretization,
    field: &RotationField,
    probes: usize,
) -> Result<EigEstimate> {
    let op = HessianOp::new(disc, field)?;
    lanczos_smallest(&op, probes.max(8))
}

/// Dense eigenvalue oracle for small instances (test use): assembles the
/// full deflated Hessian by finite differences and diagonalizes it.
pub fn dense_min_eig(disc: &Discretization, field: &RotationField) -> Result<f64> {
    let op = HessianOp::new(disc, field)?;
    let n = op.dim;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.apply(&e)?;
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    // symmetrize away the finite-difference noise
    let sym = (&a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
}

struct HessianOp<'a> {
    disc: &'a Discretization<'a>,
    field: &'a RotationField,
    dim: usize,
    /// orthonormal global-rotation directions
    null_basis: [Vec<f64>; 3],
    /// shift pushing the deflated directions above the spectrum of interest
    shift: f64,
}

impl<'a> HessianOp<'a> {
    fn new(disc: &'a Discretization<'a>, field: &'a RotationField) -> Result<Self> {
        field.check_shape(disc.network)?;
        let dim = field.tangent_dim();
        let n_nodes = dim / 3;
        let scale = 1.0 / (n_nodes as f64).sqrt();
        let mut null_basis = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
        for axis in 0..3 {
            for node in 0..n_nodes {
                null_basis[axis][3 * node + axis] = scale;
            }
        }
        // upper bound for the elastic spectrum: h |Hs| ~ 4 |H| / h per node
        // pair, plus the load curvature
        let mut shift = 0.0f64;
        for (i, rod) in disc.network.rods.iter().enumerate() {
            let h = disc.step[i];
            let hn = rod.stiffness.matrix().norm();
            let p = rod.cumulative_load_inf_norm();
            shift = shift.max(8.0 * hn / h + 2.0 * h * p);
        }
        Ok(HessianOp {
            disc,
            field,
            dim,
            null_basis,
            shift: 10.0 * shift.max(1.0),
        })
    }

    fn project(&self, v: &mut [f64]) {
        for basis in &self.null_basis {
            let c: f64 = v.iter().zip(basis).map(|(a, b)| a * b).sum();
            for (vi, bi) in v.iter_mut().zip(basis) {
                *vi -= c * bi;
            }
        }
    }

    /// `v -> P Hfd P v + shift * (I - P) v`
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut pv = v.to_vec();
        self.project(&mut pv);
        let norm = pv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut out = if norm > 0.0 {
            let scaled: Vec<f64> = pv.iter().map(|x| x / norm).collect();
            let gp = self
                .disc
                .energy_and_gradient(&self.field.retract(&scaled, FD_STEP))?
                .1;
            let gm = self
                .disc
                .energy_and_gradient(&self.field.retract(&scaled, -FD_STEP))?
                .1;
            let mut hv: Vec<f64> = gp
                .iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * FD_STEP) * norm)
                .collect();
            self.project(&mut hv);
            hv
        } else {
            vec![0.0; self.dim]
        };
        // lift the deflated directions out of the bottom of the spectrum
        for basis in &self.null_basis {
            let c: f64 = v.iter().zip(basis).map(|(a, b)| a * b).sum();
            for (oi, bi) in out.iter_mut().zip(basis) {
                *oi += self.shift * c * bi;
            }
        }
        Ok(out)
    }
}

/// Lanczos iteration with full reorthogonalization for the smallest
/// eigenvalue of a symmetric operator.
fn lanczos_smallest(op: &HessianOp, max_iter: usize) -> Result<EigEstimate> {
    let n = op.dim;
    let m_max = max_iter.min(n);
    // deterministic, well-spread starting vector
    let mut v: Vec<f64> = (0..n)
        .map(|i| (0.7 + i as f64 * 2.399963).sin())
        .collect();
    op.project(&mut v);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }

    let mut basis: Vec<Vec<f64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut breakdown = false;

    for j in 0..m_max {
        let mut w = op.apply(&basis[j])?;
        let alpha: f64 = w.iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // w -= alpha v_j + beta v_{j-1}, then full reorthogonalization
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta * vi;
            }
        }
        for b in &basis {
            let c: f64 = w.iter().zip(b).map(|(a, x)| a * x).sum();
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta < 1e-12 * alphas[0].abs().max(1.0) || j + 1 == m_max {
            if beta < 1e-12 * alphas[0].abs().max(1.0) {
                breakdown = true;
            }
            break;
        }
        betas.push(beta);
        for x in w.iter_mut() {
            *x /= beta;
        }
        basis.push(w);
    }

    // Ritz values of the tridiagonal
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.clone().symmetric_eigen();
    let mut min_val = f64::INFINITY;
    let mut min_idx = 0;
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val < min_val {
            min_val = val;
            min_idx = i;
        }
    }
    // residual bound: |beta_m * last component of the Ritz vector|
    let converged = breakdown
        || m == op.dim
        || {
            let last = eig.eigenvectors[(m - 1, min_idx)].abs();
            let beta_last = betas.last().copied().unwrap_or(0.0);
            beta_last * last <= 1e-6 * (min_val.abs() + alphas[0].abs().max(1.0))
        };
    Ok(EigEstimate {
        value: min_val,
        converged,
    })
}
