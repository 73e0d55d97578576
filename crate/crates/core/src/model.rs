//! Atoms, steering matrices, snapshot synthesis and compressive observation.

use std::f64::consts::PI;

use rand::Rng;

use crate::rng::{complex_normal, standard_complex_matrix};
use crate::toeplitz::DimSpec;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Map any real number into `(0, 1]`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    if w == 0.0 {
        1.0
    } else {
        w
    }
}

/// Distance on the unit circle, `min(|a - b|, 1 - |a - b|)` after reduction.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `r` points in `(0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    dims: DimSpec,
    points: Vec<Vec<f64>>,
}

impl FrequencySet {
    pub fn new(dims: DimSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        for p in &points {
            if p.len() != dims.ndim() {
                return Err(Error::Shape(format!(
                    "frequency {p:?} has {} coordinates, dims {:?} need {}",
                    p.len(),
                    dims.dims(),
                    dims.ndim()
                )));
            }
            if !p.iter().all(|&x| x > 0.0 && x <= 1.0) {
                return Err(Error::FrequencyDomain(p.clone()));
            }
        }
        Ok(Self { dims, points })
    }

    /// Wrap every coordinate into `(0, 1]` before validating.
    pub fn from_wrapped(dims: DimSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        let points = points
            .into_iter()
            .map(|p| p.into_iter().map(wrap_unit).collect())
            .collect();
        Self::new(dims, points)
    }

    pub fn empty(dims: DimSpec) -> Self {
        Self {
            dims,
            points: Vec::new(),
        }
    }

    pub fn dims(&self) -> &DimSpec {
        &self.dims
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Source amplitudes, one row per source and one column per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix(CMatrix);

impl AmplitudeMatrix {
    pub fn new(s: CMatrix) -> Result<Self> {
        if s.ncols() == 0 {
            return Err(Error::Shape("at least one snapshot is required".into()));
        }
        Ok(Self(s))
    }

    /// Unit-modulus amplitudes with independent uniform phases.
    pub fn unit_modulus<R: Rng + ?Sized>(rng: &mut R, sources: usize, snapshots: usize) -> Self {
        let mut s = CMatrix::zeros(sources, snapshots);
        for c in 0..snapshots {
            for r in 0..sources {
                let phase: f64 = rng.random::<f64>() * 2.0 * PI;
                s[(r, c)] = C64::from_polar(1.0, phase);
            }
        }
        Self(s)
    }

    /// Circular complex Gaussian amplitudes with unit variance.
    pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, sources: usize, snapshots: usize) -> Self {
        Self(standard_complex_matrix(rng, sources, snapshots) / C64::new(2f64.sqrt(), 0.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn sources(&self) -> usize {
        self.0.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.0.ncols()
    }

    /// Sample covariance `S S^H / K`.
    pub fn sample_covariance(&self) -> CMatrix {
        &self.0 * self.0.adjoint() / C64::new(self.snapshots() as f64, 0.0)
    }
}

/// Compression (combining) matrix `Phi`, `m x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Compressor {
    phi: CMatrix,
}

impl Compressor {
    pub fn new(phi: CMatrix) -> Result<Self> {
        if phi.nrows() == 0 || phi.nrows() > phi.ncols() {
            return Err(Error::Shape(format!(
                "compressor must have 1 <= m <= M rows, got {}x{}",
                phi.nrows(),
                phi.ncols()
            )));
        }
        Ok(Self { phi })
    }

    /// Uncompressed measurements, `Phi = I_M`.
    pub fn identity(dims: &DimSpec) -> Self {
        let m = dims.size();
        Self {
            phi: CMatrix::identity(m, m),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.phi
    }

    pub fn into_matrix(self) -> CMatrix {
        self.phi
    }

    /// Compression rate `m / M`.
    pub fn rate(&self) -> f64 {
        self.phi.nrows() as f64 / self.phi.ncols() as f64
    }
}

/// Observations `Y = Phi Z + N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: CMatrix,
    pub noise_var: f64,
}

/// Number of measurements `floor(rate * M)` for a compression rate in `(0, 1]`.
pub fn rows_for_rate(rate: f64, m: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "compression rate must lie in (0, 1], got {rate}"
        )));
    }
    let rows = (rate * m as f64).floor() as usize;
    if rows == 0 {
        return Err(Error::InvalidArgument(format!(
            "rate {rate} leaves no measurements for M = {m}"
        )));
    }
    Ok(rows)
}

/// Atom `a(f)`, validated to lie in `(0, 1]^d`.
pub fn atom(f: &[f64], dims: &DimSpec) -> Result<CVector> {
    if f.len() != dims.ndim() {
        return Err(Error::Shape(format!(
            "frequency has {} coordinates, dims need {}",
            f.len(),
            dims.ndim()
        )));
    }
    if !f.iter().all(|&x| x > 0.0 && x <= 1.0) {
        return Err(Error::FrequencyDomain(f.to_vec()));
    }
    Ok(atom_periodic(f, dims))
}

/// The atom's 1-periodic extension to all of `R^d`.
///
/// Entry `k` (one-based per dimension) is `exp(-j 2 pi <k, f>) / sqrt(M)`.
pub fn atom_periodic(f: &[f64], dims: &DimSpec) -> CVector {
    debug_assert_eq!(f.len(), dims.ndim());
    let factors: Vec<Vec<C64>> = dims
        .dims()
        .iter()
        .zip(f)
        .map(|(&n, &fp)| {
            let scale = 1.0 / (n as f64).sqrt();
            (1..=n)
                .map(|k| C64::from_polar(scale, -2.0 * PI * (k as f64) * fp))
                .collect()
        })
        .collect();
    kron_vectors(&factors)
}

// Kronecker product of vectors, first factor varying slowest.
pub(crate) fn kron_vectors(factors: &[Vec<C64>]) -> CVector {
    let mut acc = vec![C64::new(1.0, 0.0)];
    for v in factors {
        let mut next = Vec::with_capacity(acc.len() * v.len());
        for a in &acc {
            next.extend(v.iter().map(|b| a * b));
        }
        acc = next;
    }
    CVector::from_vec(acc)
}

/// `A(f_1, ..., f_r)`, one atom per column.
pub fn steering_matrix(freqs: &FrequencySet) -> CMatrix {
    let m = freqs.dims().size();
    let mut a = CMatrix::zeros(m, freqs.len());
    for (i, f) in freqs.points().iter().enumerate() {
        a.set_column(i, &atom_periodic(f, freqs.dims()));
    }
    a
}

/// Noise-free snapshots `Z = A S`.
pub fn synthesize(freqs: &FrequencySet, s: &AmplitudeMatrix) -> Result<CMatrix> {
    if s.sources() != freqs.len() {
        return Err(Error::Shape(format!(
            "{} frequencies but {} amplitude rows",
            freqs.len(),
            s.sources()
        )));
    }
    Ok(steering_matrix(freqs) * s.matrix())
}

/// Gaussian compressor with columns projected onto the complex unit sphere.
pub fn gaussian_compressor<R: Rng + ?Sized>(
    m: usize,
    dims: &DimSpec,
    rng: &mut R,
) -> Result<Compressor> {
    let big_m = dims.size();
    if m == 0 || m > big_m {
        return Err(Error::InvalidArgument(format!(
            "compressor rows must satisfy 1 <= m <= {big_m}, got {m}"
        )));
    }
    let mut phi = standard_complex_matrix(rng, m, big_m);
    for mut col in phi.column_iter_mut() {
        let norm = col.norm();
        col /= C64::new(norm, 0.0);
    }
    Compressor::new(phi)
}

/// `Y = Phi Z + N` with circular Gaussian noise of variance `noise_var` per entry.
pub fn observe<R: Rng + ?Sized>(
    compressor: &Compressor,
    z: &CMatrix,
    noise_var: f64,
    rng: &mut R,
) -> Result<Observation> {
    let phi = compressor.matrix();
    if z.nrows() != phi.ncols() {
        return Err(Error::Shape(format!(
            "compressor has {} columns, snapshots have {} rows",
            phi.ncols(),
            z.nrows()
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be nonnegative, got {noise_var}"
        )));
    }
    let mut y = phi * z;
    if noise_var > 0.0 {
        for c in 0..y.ncols() {
            for r in 0..y.nrows() {
                y[(r, c)] += complex_normal(rng, noise_var);
            }
        }
    }
    Ok(Observation { y, noise_var })
}
