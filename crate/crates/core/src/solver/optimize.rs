//! First-order minimization over the product of rotation groups.
//!
//! Two optimizers share one Armijo backtracking line search: plain
//! steepest descent and limited-memory BFGS with identity vector transport
//! (history vectors live in the left-trivialized tangent coordinates; when
//! a quasi-Newton direction fails to be a descent direction the memory is
//! dropped and the step falls back to steepest descent).

use std::collections::VecDeque;

use super::energy::Discretization;
use super::field::RotationField;
use crate::model::{check_balance, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    GradientDescent,
    Lbfgs,
}

/// How the iteration starts.
#[derive(Debug, Clone)]
pub enum InitialState {
    /// Zero-strain state aligned with the reference frames.
    Straight,
    /// User-provided field.
    Provided(RotationField),
    /// Straight state with seeded per-node random rotations.
    Perturbed { seed: u64, amplitude: f64 },
}

/// Segments per rod: one shared count or an explicit per-rod list.
#[derive(Debug, Clone)]
pub enum Segments {
    Uniform(usize),
    PerRod(Vec<usize>),
}

impl Segments {
    pub fn resolve(&self, num_rods: usize) -> Result<Vec<usize>> {
        let counts = match self {
            Segments::Uniform(n) => vec![*n; num_rods],
            Segments::PerRod(v) => {
                if v.len() != num_rods {
                    return Err(Error::ShapeMismatch(format!(
                        "{} segment counts for {} rods",
                        v.len(),
                        num_rods
                    )));
                }
                v.clone()
            }
        };
        if let Some((i, &n)) = counts.iter().enumerate().find(|(_, &n)| n < 2) {
            return Err(Error::ShapeMismatch(format!(
                "rod {i}: at least 2 segments required, got {n}"
            )));
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub segments: Segments,
    /// Gradient tolerance; convergence at `|g| <= g_tol * (1 + |E|)`.
    pub g_tol: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease constant, in (0, 1/2).
    pub armijo_c1: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub backtrack: f64,
    pub optimizer: OptimizerKind,
    pub init: InitialState,
    /// Skip the force-balance validation (exploration mode).
    pub allow_unbalanced: bool,
    /// Force-balance tolerance relative to the load scale.
    pub balance_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            segments: Segments::Uniform(64),
            g_tol: 1e-8,
            max_iterations: 50_000,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            optimizer: OptimizerKind::Lbfgs,
            init: InitialState::Straight,
            allow_unbalanced: false,
            balance_tol: 1e-9,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_tol > 0.0) {
            return Err(Error::Config(format!(
                "g_tol must be positive, got {}",
                self.g_tol
            )));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 0.5) {
            return Err(Error::Config(format!(
                "armijo_c1 must lie in (0, 1/2), got {}",
                self.armijo_c1
            )));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config(format!(
                "backtrack factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm reached the tolerance.
    Converged,
    MaxIterations,
    /// Backtracking underflowed; the returned field is the best iterate.
    LineSearchFailure,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    pub iterations: usize,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_energy(&self) -> f64 {
        self.rows.last().map(|r| r.energy).unwrap_or(f64::NAN)
    }
}

/// Builds the initial field from the options.
pub fn init_field(network: &Network, options: &SolverOptions) -> Result<RotationField> {
    let segments = options.segments.resolve(network.num_rods())?;
    Ok(match &options.init {
        InitialState::Straight => RotationField::straight(network, &segments),
        InitialState::Provided(field) => {
            field.check_shape(network)?;
            field.clone()
        }
        InitialState::Perturbed { seed, amplitude } => {
            RotationField::perturbed(network, &segments, *seed, *amplitude)
        }
    })
}

/// Minimizes the reduced energy; returns the final field and the trace.
///
/// Unbalanced loads are rejected up front unless `allow_unbalanced` is set;
/// line-search failure and iteration exhaustion are reported through the
/// trace rather than as errors so the caller still gets the best iterate.
pub fn solve(network: &Network, options: &SolverOptions) -> Result<(RotationField, SolveTrace)> {
    options.validate()?;
    if !options.allow_unbalanced {
        let report = check_balance(network, options.balance_tol);
        if !report.pass {
            return Err(Error::UnbalancedLoads {
                residual: report.residual.norm(),
                tol: options.balance_tol * (report.load_scale + f64::EPSILON),
            });
        }
    }
    let segments = options.segments.resolve(network.num_rods())?;
    let disc = Discretization::new(network, &segments)?;
    let field = init_field(network, options)?;
    minimize(&disc, field, options)
}

/// Optimizer core, reusable with a prebuilt discretization.
pub fn minimize(
    disc: &Discretization,
    mut field: RotationField,
    options: &SolverOptions,
) -> Result<(RotationField, SolveTrace)> {
    options.validate()?;
    // per-step rotation cap: keeps segment logs on the shortest branch
    const MAX_NODE_ROTATION: f64 = 1.0;
    const MAX_BACKTRACKS: usize = 80;

    let (mut energy, mut grad) = disc.energy_and_gradient(&field)?;
    let mut grad_norm = Discretization::grad_norm(&grad);
    let mut rows = vec![TraceRow {
        iteration: 0,
        energy,
        grad_norm,
        step: 0.0,
    }];

    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, rho)
    let lbfgs_memory = 10;
    let mut prev_step: f64 = 1.0;

    let mut iteration = 0;
    loop {
        if grad_norm <= options.g_tol * (1.0 + energy.abs()) {
            return Ok((
                field,
                SolveTrace {
                    rows,
                    termination: Termination::Converged,
                    iterations: iteration,
                },
            ));
        }
        if iteration >= options.max_iterations {
            return Ok((
                field,
                SolveTrace {
                    rows,
                    termination: Termination::MaxIterations,
                    iterations: iteration,
                },
            ));
        }
        iteration += 1;

        // search direction
        let mut direction = match options.optimizer {
            OptimizerKind::GradientDescent => grad.iter().map(|g| -g).collect::<Vec<f64>>(),
            OptimizerKind::Lbfgs => two_loop(&memory, &grad),
        };
        let mut slope = dot(&direction, &grad);
        if !(slope < 0.0) {
            // not a descent direction: drop memory, fall back to -g
            memory.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = -grad_norm * grad_norm;
        }

        // initial trial step
        let dir_max = direction
            .chunks_exact(3)
            .map(|c| (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt())
            .fold(0.0f64, f64::max);
        let mut t: f64 = match options.optimizer {
            OptimizerKind::Lbfgs if !memory.is_empty() => 1.0,
            _ => (2.0 * prev_step).max(1.0 / (1.0 + grad_norm)).min(1e3),
        };
        if t * dir_max > MAX_NODE_ROTATION {
            t = MAX_NODE_ROTATION / dir_max;
        }

        // Armijo backtracking
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = field.retract(&direction, t);
            let e_new = disc.energy(&candidate)?;
            if !e_new.is_finite() {
                return Err(Error::NonFiniteEnergy(iteration));
            }
            if e_new <= energy + options.armijo_c1 * t * slope {
                accepted = Some((candidate, e_new));
                break;
            }
            t *= options.backtrack;
        }
        let Some((new_field, new_energy)) = accepted else {
            return Ok((
                field,
                SolveTrace {
                    rows,
                    termination: Termination::LineSearchFailure,
                    iterations: iteration,
                },
            ));
        };

        let (e_check, new_grad) = disc.energy_and_gradient(&new_field)?;
        debug_assert_eq!(e_check, new_energy);
        let new_grad_norm = Discretization::grad_norm(&new_grad);

        if options.optimizer == OptimizerKind::Lbfgs {
            let s: Vec<f64> = direction.iter().map(|d| d * t).collect();
            let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            let ss = dot(&s, &s).sqrt();
            let yy = dot(&y, &y).sqrt();
            // cautious update: skip pairs with negligible curvature
            if sy > 1e-12 * ss * yy {
                if memory.len() == lbfgs_memory {
                    memory.pop_front();
                }
                memory.push_back((s, y, 1.0 / sy));
            }
        }

        field = new_field;
        energy = new_energy;
        grad = new_grad;
        grad_norm = new_grad_norm;
        prev_step = t;
        rows.push(TraceRow {
            iteration,
            energy,
            grad_norm,
            step: t,
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Standard L-BFGS two-loop recursion with identity transport.
fn two_loop(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, grad: &[f64]) -> Vec<f64> {
    if memory.is_empty() {
        return grad.iter().map(|g| -g).collect();
    }
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    // initial Hessian scaling from the most recent pair
    let (s_last, y_last, _) = memory.back().unwrap();
    let gamma = dot(s_last, y_last) / dot(y_last, y_last);
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), alpha) in memory.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}
