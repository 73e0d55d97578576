//! Named, seeded random substreams.
//!
//! Every random draw of an experiment comes from a ChaCha stream keyed by the
//! base seed, the trial index, the noise-level index and the purpose of the
//! draw, so a single trial can be replayed without running the ones before it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Frequencies = 1,
    Amplitudes = 2,
    Compressor = 3,
    Noise = 4,
    Init = 5,
}

/// Generator for one (trial, noise level, purpose) triple.
pub fn substream(seed: u64, trial: u64, level: u32, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 32) | (u64::from(level) << 8) | stream as u64);
    rng
}

/// Circular complex Gaussian with total variance `var` (each part `var / 2`).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Matrix with independent standard normal real and imaginary parts.
pub fn standard_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut out = CMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(r, c)] = C64::new(re, im);
        }
    }
    out
}
