//! Deterministic Cramér-Rao bound for frequency estimation from compressed snapshots.

use std::f64::consts::PI;

use nalgebra::linalg::Cholesky;
use nalgebra::DMatrix;

use crate::model::{atom_periodic, AmplitudeMatrix, FrequencySet};
use crate::toeplitz::DimSpec;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Derivative of `a(f)` with respect to coordinate `axis` (zero-based).
pub fn atom_derivative(f: &[f64], dims: &DimSpec, axis: usize) -> Result<CVector> {
    if axis >= dims.ndim() || f.len() != dims.ndim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} with {} coordinates for dims {:?}",
            f.len(),
            dims.dims()
        )));
    }
    let mut a = atom_periodic(f, dims);
    for (flat, x) in a.iter_mut().enumerate() {
        let k = dims.multi_index(flat)[axis] as f64 + 1.0;
        *x *= C64::new(0.0, -2.0 * PI * k);
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct CrbInputs {
    /// Effective steering matrix, `m x r`.
    pub g: CMatrix,
    /// `d` matrices `dG / d theta_i`, each `m x r`.
    pub derivs: Vec<CMatrix>,
    /// `S S^H / K`.
    pub rhat: CMatrix,
    pub sigma2: f64,
    pub snapshots: usize,
}

impl CrbInputs {
    /// Inputs for the frequency model `Y = Phi A S + N`.
    pub fn lse(freqs: &FrequencySet, phi: &CMatrix, s: &AmplitudeMatrix, sigma2: f64) -> Result<Self> {
        let dims = freqs.dims();
        if phi.ncols() != dims.size() {
            return Err(Error::Shape(format!(
                "compressor has {} columns, dims {:?} need {}",
                phi.ncols(),
                dims.dims(),
                dims.size()
            )));
        }
        if s.sources() != freqs.len() {
            return Err(Error::Shape(format!(
                "{} frequencies but {} amplitude rows",
                freqs.len(),
                s.sources()
            )));
        }
        let r = freqs.len();
        let mut derivs = Vec::with_capacity(dims.ndim());
        for axis in 0..dims.ndim() {
            let mut da = CMatrix::zeros(dims.size(), r);
            for (j, f) in freqs.points().iter().enumerate() {
                da.set_column(j, &atom_derivative(f, dims, axis)?);
            }
            derivs.push(phi * da);
        }
        Ok(Self {
            g: phi * crate::model::steering_matrix(freqs),
            derivs,
            rhat: s.sample_covariance(),
            sigma2,
            snapshots: s.snapshots(),
        })
    }
}

/// `I - G (G^H G)^{-1} G^H`, or `None` when `G^H G` is singular.
pub fn orthogonal_projector(g: &CMatrix) -> Option<CMatrix> {
    let m = g.nrows();
    let gram = Cholesky::new(g.ad_mul(g))?;
    let coef = gram.solve(&g.adjoint());
    Some(CMatrix::identity(m, m) - g * coef)
}

/// `sigma^2 / (2K) tr([Re(D^H Pi D .* (1_{dxd} kron R)^T)]^{-1})`, summed over
/// all `d r` parameters. Singular `G^H G` or Fisher matrix gives infinity.
pub fn crb(inputs: &CrbInputs) -> Result<f64> {
    let (m, r) = inputs.g.shape();
    let d = inputs.derivs.len();
    if inputs.derivs.iter().any(|x| x.shape() != (m, r)) {
        return Err(Error::Shape("derivative matrices must match G".into()));
    }
    if inputs.rhat.shape() != (r, r) {
        return Err(Error::Shape(format!(
            "sample covariance is {:?}, expected {r}x{r}",
            inputs.rhat.shape()
        )));
    }
    if inputs.snapshots == 0 {
        return Err(Error::InvalidArgument("snapshot count must be positive".into()));
    }
    if r == 0 || d == 0 {
        return Ok(0.0);
    }
    let Some(proj) = orthogonal_projector(&inputs.g) else {
        return Ok(f64::INFINITY);
    };
    let mut stacked = CMatrix::zeros(m, d * r);
    for (i, di) in inputs.derivs.iter().enumerate() {
        stacked.view_mut((0, i * r), (m, r)).copy_from(di);
    }
    let inner = stacked.ad_mul(&(proj * &stacked));
    let n = d * r;
    let fim = DMatrix::<f64>::from_fn(n, n, |a, b| {
        // (1 kron R)^T at (a, b) is R[b mod r, a mod r]
        (inner[(a, b)] * inputs.rhat[(b % r, a % r)]).re
    });
    let fim = (&fim + fim.transpose()) * 0.5;
    let Some(chol) = Cholesky::new(fim) else {
        return Ok(f64::INFINITY);
    };
    let trace = chol.inverse().trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(inputs.sigma2 / (2.0 * inputs.snapshots as f64) * trace)
}
