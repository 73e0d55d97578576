//! Gridless estimation of d-dimensional frequencies from multiple compressive
//! snapshots.
//!
//! The estimator solves a regularized atomic-norm problem with an ADMM
//! iteration over a Hermitian multilevel Toeplitz covariance, then reads the
//! frequencies off the covariance estimate with a MUSIC search. The crate also
//! carries the deterministic Cramér-Rao bound used to judge estimates, an EADF
//! (Fourier-series) array model that turns 2D direction-of-arrival estimation
//! into a 2D frequency problem, and the seeded Monte-Carlo harness behind the
//! `mdanm` command line tool.

pub mod crb;
pub mod doa;
mod error;
pub mod experiment;
pub mod extract;
pub mod io;
pub mod model;
pub mod rng;
pub mod solver;
pub mod toeplitz;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

pub mod prelude {
    pub use crate::crb::{atom_derivative, crb, CrbInputs};
    pub use crate::doa::{
        angles_from_frequencies, doa_problem, eadf_response, fit_eadf, frequencies_from_angles,
        ideal_response, stacked_circular_array, ArrayGeometry, EadfModel, SampledManifold,
    };
    pub use crate::extract::{match_frequencies, music_extract, MatchReport, MusicConfig};
    pub use crate::model::{
        atom, gaussian_compressor, observe, steering_matrix, synthesize, AmplitudeMatrix,
        Compressor, FrequencySet, Observation,
    };
    pub use crate::solver::{solve, InitMode, Problem, SolveResult, SolverConfig};
    pub use crate::toeplitz::{
        build_toeplitz, canonical_shifts, diag_sums, occurrence_counts, shift_positions,
        DimSpec, ShiftVector, ToeplitzParams,
    };
    pub use crate::{CMatrix, CVector, Error, Result, C64};
}
