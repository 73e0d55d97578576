//! ADMM for the regularized atomic-norm problem.
//!
//! The solver minimizes
//! `|Phi Z - Y|_F^2 / 2 + tau / 2 (tr W + tr T(u))` subject to
//! `[[T(u), Z], [Z^H, W]]` being positive semidefinite, splitting the
//! constraint through a PSD copy `V` with multiplier `Lambda`. One iteration
//! runs the `u`, `W` and `Z` block minimizations, assembles `T`, projects onto
//! the PSD cone and takes a dual ascent step with step size `rho`.

mod psd;
mod state;
mod updates;

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;

pub use psd::{hermitian_eigenvalues, hermitize, project_psd};
pub use state::{assemble_t, init_state, partition, AdmmState, Blocks, InitMode};
pub use updates::{
    grad_u, grad_w, grad_z, lagrangian, update_dual, update_u, update_v, update_w, update_z,
};

use crate::toeplitz::{DimSpec, OccurrenceCounts, ToeplitzLayout};
use crate::{CMatrix, Error, Result, C64};

/// Observations, compressor and hyperparameters, with the per-problem
/// precomputation the iteration reuses.
#[derive(Debug, Clone)]
pub struct Problem {
    dims: DimSpec,
    y: CMatrix,
    phi: CMatrix,
    tau: f64,
    rho: f64,
    layout: ToeplitzLayout,
    counts: OccurrenceCounts,
    phi_h_y: CMatrix,
    z_system: Cholesky<C64, Dyn>,
}

impl Problem {
    pub fn new(dims: DimSpec, y: CMatrix, phi: CMatrix, tau: f64, rho: f64) -> Result<Self> {
        let m = dims.size();
        if phi.ncols() != m {
            return Err(Error::Shape(format!(
                "compressor has {} columns but dims {:?} give M = {m}",
                phi.ncols(),
                dims.dims()
            )));
        }
        if phi.nrows() != y.nrows() {
            return Err(Error::Shape(format!(
                "compressor has {} rows but observations have {}",
                phi.nrows(),
                y.nrows()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::Shape("at least one snapshot is required".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
        }
        let layout = ToeplitzLayout::new(&dims);
        let counts = layout.occurrence_counts();
        let phi_h = phi.adjoint();
        let phi_h_y = &phi_h * &y;
        let system = &phi_h * &phi + CMatrix::identity(m, m) * C64::new(2.0 * rho, 0.0);
        let z_system = Cholesky::new(system)
            .ok_or_else(|| Error::InvalidArgument("Phi^H Phi + 2 rho I is not positive definite".into()))?;
        Ok(Self {
            dims,
            y,
            phi,
            tau,
            rho,
            layout,
            counts,
            phi_h_y,
            z_system,
        })
    }

    pub fn dims(&self) -> &DimSpec {
        &self.dims
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn phi(&self) -> &CMatrix {
        &self.phi
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `M`.
    pub fn size(&self) -> usize {
        self.dims.size()
    }

    /// `K`.
    pub fn snapshots(&self) -> usize {
        self.y.ncols()
    }

    pub fn layout(&self) -> &ToeplitzLayout {
        &self.layout
    }

    pub fn counts(&self) -> &OccurrenceCounts {
        &self.counts
    }

    pub(crate) fn phi_h_y(&self) -> &CMatrix {
        &self.phi_h_y
    }

    pub(crate) fn z_system(&self) -> &Cholesky<C64, Dyn> {
        &self.z_system
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Threshold on `|V - T|_F / max(1, |T|_F)` for the `converged` flag.
    pub primal_tol: f64,
    /// Stop as soon as the relative primal residual reaches `primal_tol`.
    pub early_stop: bool,
    pub init: InitMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            primal_tol: 1e-6,
            early_stop: false,
            init: InitMode::Zero,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub state: AdmmState,
    /// Lagrangian after every iteration.
    pub objective: Vec<f64>,
    /// `|V - T|_F` after every iteration.
    pub primal_residual: Vec<f64>,
    /// Covariance estimate `T(u*)`.
    pub toeplitz: CMatrix,
    pub converged: bool,
}

impl SolveResult {
    pub fn iterations(&self) -> usize {
        self.objective.len()
    }
}

/// One full ADMM sweep; returns the new state and `|V - T|_F`, `|T|_F`.
pub fn step(state: &AdmmState, problem: &Problem) -> Result<(AdmmState, f64, f64)> {
    let mut next = state.clone();
    next.u = update_u(state, problem);
    next.w = update_w(state, problem);
    next.z = update_z(state, problem);
    let t = assemble_t(&next, problem);
    next.v = update_v(&next, problem, &t)?;
    next.lambda = update_dual(&next, problem, &t);
    next.iteration += 1;
    let residual = (&next.v - &t).norm();
    Ok((next, residual, t.norm()))
}

pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveResult> {
    let mut state = init_state(problem, config.init);
    let mut objective = Vec::with_capacity(config.max_iters);
    let mut primal_residual = Vec::with_capacity(config.max_iters);
    let mut converged = false;
    for _ in 0..config.max_iters {
        let (next, residual, t_norm) = step(&state, problem)?;
        state = next;
        objective.push(lagrangian(&state, problem));
        primal_residual.push(residual);
        converged = residual / t_norm.max(1.0) <= config.primal_tol;
        if converged && config.early_stop {
            break;
        }
    }
    let toeplitz = problem.layout().build(&state.u);
    Ok(SolveResult {
        state,
        objective,
        primal_residual,
        toeplitz,
        converged,
    })
}
