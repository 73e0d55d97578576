//! Python bindings. Matrices cross the boundary as lists of rows of complex numbers.

use mdanm::crb::{crb, CrbInputs};
use mdanm::experiment::{run_doa as run_doa_rs, run_lse as run_lse_rs, ScenarioConfig};
use mdanm::extract::{match_frequencies as match_rs, music_extract, MusicConfig};
use mdanm::model::{atom as atom_rs, AmplitudeMatrix, FrequencySet};
use mdanm::solver::{solve as solve_rs, InitMode, Problem, SolverConfig};
use mdanm::toeplitz::{DimSpec, ToeplitzParams};
use mdanm::{CMatrix, Error, C64};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

type Rows = Vec<Vec<C64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn from_matrix(m: &CMatrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn dim_spec(dims: Vec<usize>) -> PyResult<DimSpec> {
    DimSpec::new(dims).map_err(err)
}

/// Atom `a(f)` for frequency `f` in `(0, 1]^d`.
#[pyfunction]
fn atom(f: Vec<f64>, dims: Vec<usize>) -> PyResult<Vec<C64>> {
    Ok(atom_rs(&f, &dim_spec(dims)?).map_err(err)?.iter().copied().collect())
}

/// Hermitian multilevel Toeplitz matrix from its center and canonical coefficients.
#[pyfunction]
fn build_toeplitz(dims: Vec<usize>, center: f64, coeffs: Vec<C64>) -> PyResult<Rows> {
    let u = ToeplitzParams::new(dim_spec(dims)?, center, coeffs).map_err(err)?;
    Ok(from_matrix(&mdanm::toeplitz::build_toeplitz(&u)))
}

/// Shifted-diagonal sums `(center, coeffs)` of a Hermitian matrix.
#[pyfunction]
fn diag_sums(a: Rows, dims: Vec<usize>) -> PyResult<(f64, Vec<C64>)> {
    let u = mdanm::toeplitz::diag_sums(&to_matrix(&a)?, &dim_spec(dims)?).map_err(err)?;
    Ok((u.center, u.coeffs))
}

#[pyclass(frozen)]
struct SolveResult {
    #[pyo3(get)]
    toeplitz: Rows,
    #[pyo3(get)]
    objective: Vec<f64>,
    #[pyo3(get)]
    primal_residual: Vec<f64>,
    #[pyo3(get)]
    converged: bool,
}

#[pymethods]
impl SolveResult {
    #[getter]
    fn iterations(&self) -> usize {
        self.objective.len()
    }
}

/// Run the ADMM solver; `phi` defaults to the identity.
#[pyfunction]
#[pyo3(signature = (y, dims, tau, rho=0.05, phi=None, max_iters=1000, tol=1e-6, init_seed=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    y: Rows,
    dims: Vec<usize>,
    tau: f64,
    rho: f64,
    phi: Option<Rows>,
    max_iters: usize,
    tol: f64,
    init_seed: Option<u64>,
) -> PyResult<SolveResult> {
    let dims = dim_spec(dims)?;
    let m = dims.size();
    let phi = match phi {
        Some(p) => to_matrix(&p)?,
        None => CMatrix::identity(m, m),
    };
    let problem = Problem::new(dims, to_matrix(&y)?, phi, tau, rho).map_err(err)?;
    let config = SolverConfig {
        max_iters,
        primal_tol: tol,
        early_stop: false,
        init: init_seed.map_or(InitMode::Zero, |seed| InitMode::Gaussian { seed }),
    };
    let res = solve_rs(&problem, &config).map_err(err)?;
    Ok(SolveResult {
        toeplitz: from_matrix(&res.toeplitz),
        objective: res.objective,
        primal_residual: res.primal_residual,
        converged: res.converged,
    })
}

/// MUSIC estimate of `r` frequencies from a covariance estimate.
#[pyfunction]
#[pyo3(signature = (t, dims, r, grid_factor=8, refine_iters=3))]
fn music(t: Rows, dims: Vec<usize>, r: usize, grid_factor: usize, refine_iters: usize) -> PyResult<Vec<Vec<f64>>> {
    let config = MusicConfig {
        grid_factor,
        refine_iters,
    };
    let est = music_extract(&to_matrix(&t)?, &dim_spec(dims)?, r, &config).map_err(err)?;
    Ok(est.frequencies.points().to_vec())
}

/// Optimal pairing `[(estimate, truth)]` and the per-coordinate MSE.
#[pyfunction]
fn match_frequencies(est: Vec<Vec<f64>>, truth: Vec<Vec<f64>>, dims: Vec<usize>) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let d = dim_spec(dims)?;
    let e = FrequencySet::new(d.clone(), est).map_err(err)?;
    let t = FrequencySet::new(d, truth).map_err(err)?;
    let rep = match_rs(&e, &t);
    Ok((rep.pairs, rep.mse))
}

/// Total Cramér-Rao bound over all `d r` frequency coordinates.
#[pyfunction]
#[pyo3(signature = (freqs, dims, s, sigma2, phi=None))]
fn crb_lse(freqs: Vec<Vec<f64>>, dims: Vec<usize>, s: Rows, sigma2: f64, phi: Option<Rows>) -> PyResult<f64> {
    let d = dim_spec(dims)?;
    let m = d.size();
    let f = FrequencySet::new(d, freqs).map_err(err)?;
    let phi = match phi {
        Some(p) => to_matrix(&p)?,
        None => CMatrix::identity(m, m),
    };
    let s = AmplitudeMatrix::new(to_matrix(&s)?).map_err(err)?;
    crb(&CrbInputs::lse(&f, &phi, &s, sigma2).map_err(err)?).map_err(err)
}

/// LSE sweep from TOML text; rows of `(snr, admm_mean, admm_median, crb_mean, crb_median, trials_used)`.
#[pyfunction]
fn run_lse(config: &str) -> PyResult<Vec<(f64, f64, f64, f64, f64, usize)>> {
    let cfg = ScenarioConfig::from_toml(config).map_err(err)?;
    let report = run_lse_rs(&cfg).map_err(err)?;
    Ok(report
        .rows
        .iter()
        .map(|r| (r.snr, r.admm_mean, r.admm_median, r.crb_mean, r.crb_median, r.trials_used))
        .collect())
}

/// DOA run from TOML text; rows of `(t1, t2, e1, e2)`.
#[pyfunction]
fn run_doa(config: &str) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let cfg = ScenarioConfig::from_toml(config).map_err(err)?;
    let rows = run_doa_rs(&cfg).map_err(err)?;
    Ok(rows.iter().map(|r| (r.t1, r.t2, r.e1, r.e2)).collect())
}

#[pymodule]
fn pymdanm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(atom, m)?)?;
    m.add_function(wrap_pyfunction!(build_toeplitz, m)?)?;
    m.add_function(wrap_pyfunction!(diag_sums, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(music, m)?)?;
    m.add_function(wrap_pyfunction!(match_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(crb_lse, m)?)?;
    m.add_function(wrap_pyfunction!(run_lse, m)?)?;
    m.add_function(wrap_pyfunction!(run_doa, m)?)?;
    Ok(())
}
