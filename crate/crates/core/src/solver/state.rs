use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::psd::hermitize;
use super::Problem;
use crate::rng::standard_complex_matrix;
use crate::toeplitz::ToeplitzParams;
use crate::{CMatrix, C64};

/// ADMM iterate `(W, u, Z, V, Lambda)`.
///
/// `V` and `Lambda` are `(M + K) x (M + K)` and are partitioned like the
/// assembled matrix `T`: an `M x M` leading block, an `M x K` off-diagonal
/// block and a `K x K` trailing block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub w: CMatrix,
    pub u: ToeplitzParams,
    pub z: CMatrix,
    pub v: CMatrix,
    pub lambda: CMatrix,
    pub iteration: usize,
}

/// Views of a partitioned `(M + K)` square matrix.
#[derive(Debug, Clone)]
pub struct Blocks {
    /// Leading `M x M` block.
    pub lead: CMatrix,
    /// Upper-right `M x K` block.
    pub off: CMatrix,
    /// Trailing `K x K` block.
    pub tail: CMatrix,
}

/// Split an `(M + K)` square matrix into its leading, off-diagonal and trailing blocks.
pub fn partition(a: &CMatrix, m: usize) -> Blocks {
    let n = a.nrows();
    let k = n - m;
    Blocks {
        lead: a.view((0, 0), (m, m)).into_owned(),
        off: a.view((0, m), (m, k)).into_owned(),
        tail: a.view((m, m), (k, k)).into_owned(),
    }
}

/// How to fill the first iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Every block zero.
    Zero,
    /// Independent standard normal real and imaginary parts; `V`, `Lambda`
    /// and `W` are made Hermitian and the Toeplitz center is real.
    Gaussian { seed: u64 },
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::Zero
    }
}

pub fn init_state(problem: &Problem, mode: InitMode) -> AdmmState {
    let m = problem.size();
    let k = problem.snapshots();
    let n = m + k;
    match mode {
        InitMode::Zero => AdmmState {
            w: CMatrix::zeros(k, k),
            u: ToeplitzParams::zeros(problem.dims()),
            z: CMatrix::zeros(m, k),
            v: CMatrix::zeros(n, n),
            lambda: CMatrix::zeros(n, n),
            iteration: 0,
        },
        InitMode::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w = standard_complex_matrix(&mut rng, k, k);
            hermitize(&mut w);
            let mut u = ToeplitzParams::zeros(problem.dims());
            u.center = rng.sample(StandardNormal);
            for c in u.coeffs.iter_mut() {
                *c = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            }
            let z = standard_complex_matrix(&mut rng, m, k);
            let mut v = standard_complex_matrix(&mut rng, n, n);
            hermitize(&mut v);
            let mut lambda = standard_complex_matrix(&mut rng, n, n);
            hermitize(&mut lambda);
            AdmmState {
                w,
                u,
                z,
                v,
                lambda,
                iteration: 0,
            }
        }
    }
}

/// `T = [[T(u), Z], [Z^H, W]]`.
pub fn assemble_t(state: &AdmmState, problem: &Problem) -> CMatrix {
    let m = problem.size();
    let k = problem.snapshots();
    let mut t = CMatrix::zeros(m + k, m + k);
    t.view_mut((0, 0), (m, m))
        .copy_from(&problem.layout().build(&state.u));
    t.view_mut((0, m), (m, k)).copy_from(&state.z);
    t.view_mut((m, 0), (k, m)).copy_from(&state.z.adjoint());
    t.view_mut((m, m), (k, k)).copy_from(&state.w);
    t
}
