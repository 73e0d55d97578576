//! Objective, block gradients and closed-form block updates.
//!
//! Gradients are Wirtinger derivatives with respect to the conjugate variable,
//! `dL/d conj(x) = (dL/d Re x + j dL/d Im x) / 2`, taken over the free entries
//! of `W` and `Z` and over the canonical Toeplitz parameters (the real center
//! gets half its ordinary derivative). `V` and `Lambda` are assumed Hermitian,
//! which every update keeps true.

use super::psd::project_psd;
use super::state::{assemble_t, partition, AdmmState};
use super::Problem;
use crate::toeplitz::ToeplitzParams;
use crate::{CMatrix, Result, C64};

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `Re<Lambda, V - T> + |Phi Z - Y|^2 / 2 + tau/2 (tr W + tr T(u)) + rho/2 |V - T|^2`.
pub fn lagrangian(state: &AdmmState, problem: &Problem) -> f64 {
    let t = assemble_t(state, problem);
    let gap = &state.v - &t;
    let coupling = state.lambda.dotc(&gap).re;
    let data = 0.5 * (problem.phi() * &state.z - problem.y()).norm_squared();
    let trace = state.w.trace().re + problem.size() as f64 * state.u.center;
    coupling + data + 0.5 * problem.tau() * trace + 0.5 * problem.rho() * gap.norm_squared()
}

pub fn grad_w(state: &AdmmState, problem: &Problem) -> CMatrix {
    let m = problem.size();
    let k = problem.snapshots();
    let lambda = partition(&state.lambda, m);
    let v = partition(&state.v, m);
    let rho = problem.rho();
    let eye = CMatrix::identity(k, k) * re(problem.tau() / 4.0);
    eye - lambda.tail * re(0.5) + (&state.w - v.tail) * re(rho / 2.0)
}

pub fn grad_u(state: &AdmmState, problem: &Problem) -> ToeplitzParams {
    let m = problem.size();
    let rho = problem.rho();
    let lead = partition(&state.lambda, m).lead + partition(&state.v, m).lead * re(rho);
    let sums = problem
        .layout()
        .diag_sums(&lead)
        .expect("leading block has the layout size");
    let counts = problem.counts();
    let center =
        0.5 * (rho * m as f64 * state.u.center - sums.center + problem.tau() * m as f64 / 2.0);
    let coeffs = state
        .u
        .coeffs
        .iter()
        .zip(&sums.coeffs)
        .zip(&counts.shifts)
        .map(|((&u, &s), &f)| u * re(rho * f as f64) - s.conj())
        .collect();
    ToeplitzParams {
        dims: problem.dims().clone(),
        center,
        coeffs,
    }
}

pub fn grad_z(state: &AdmmState, problem: &Problem) -> CMatrix {
    let m = problem.size();
    let lambda = partition(&state.lambda, m);
    let v = partition(&state.v, m);
    let residual = problem.phi() * &state.z - problem.y();
    problem.phi().adjoint() * residual * re(0.5) - lambda.off
        + (&state.z - v.off) * re(problem.rho())
}

/// `W = V_0 + Lambda_0 / rho - tau / (2 rho) I`.
pub fn update_w(state: &AdmmState, problem: &Problem) -> CMatrix {
    let m = problem.size();
    let k = problem.snapshots();
    let rho = problem.rho();
    let lambda = partition(&state.lambda, m);
    let v = partition(&state.v, m);
    v.tail + lambda.tail * re(1.0 / rho) - CMatrix::identity(k, k) * re(problem.tau() / (2.0 * rho))
}

/// Entrywise minimizer over the canonical Toeplitz parameters.
///
/// With `B = Lambda_hat / rho + V_hat`, the center is
/// `(Re tr B - tau M / (2 rho)) / M` and each coefficient is the conjugate of
/// the shifted-diagonal sum of `B` divided by its occurrence count.
pub fn update_u(state: &AdmmState, problem: &Problem) -> ToeplitzParams {
    let m = problem.size();
    let rho = problem.rho();
    let b = partition(&state.lambda, m).lead * re(1.0 / rho) + partition(&state.v, m).lead;
    let sums = problem
        .layout()
        .diag_sums(&b)
        .expect("leading block has the layout size");
    let counts = problem.counts();
    let center = (sums.center - problem.tau() * m as f64 / (2.0 * rho)) / m as f64;
    let coeffs = sums
        .coeffs
        .iter()
        .zip(&counts.shifts)
        .map(|(&s, &f)| s.conj() / f as f64)
        .collect();
    ToeplitzParams {
        dims: problem.dims().clone(),
        center,
        coeffs,
    }
}

/// Solves `(Phi^H Phi + 2 rho I) Z = Phi^H Y + 2 Lambda_1 + 2 rho V_1`.
pub fn update_z(state: &AdmmState, problem: &Problem) -> CMatrix {
    let m = problem.size();
    let lambda = partition(&state.lambda, m);
    let v = partition(&state.v, m);
    let rhs = problem.phi_h_y() + lambda.off * re(2.0) + v.off * re(2.0 * problem.rho());
    problem.z_system().solve(&rhs)
}

/// `V = P_psd(T - Lambda / rho)`.
pub fn update_v(state: &AdmmState, problem: &Problem, t: &CMatrix) -> Result<CMatrix> {
    project_psd(&(t - &state.lambda * re(1.0 / problem.rho())))
}

/// `Lambda + rho (V - T)`.
pub fn update_dual(state: &AdmmState, problem: &Problem, t: &CMatrix) -> CMatrix {
    &state.lambda + (&state.v - t) * re(problem.rho())
}
