//! Two-dimensional direction finding as a 2D frequency problem.
//!
//! An array response `r(theta)` over azimuth `theta_1` and elevation
//! `theta_2` is approximated by a truncated 2D Fourier series (EADF),
//! `r_m(theta) ~ 1/sqrt(L1 L2) sum g_{m,l1,l2} exp(j (theta_1 l1 + theta_2 l2))`
//! with centered `l`. Stacking the coefficient blocks into `G` (one row per
//! antenna, `l1` slow, both ascending) gives `G a(f(theta)) = exp(j <c, theta>) r(theta)`
//! for the atom `a` at `f_p = (-theta_p / 2 pi) mod 1` and `c_p = (L_p + 1) / 2`,
//! so `Phi = Psi G` turns direction finding into frequency estimation. The
//! phase factor is absorbed into the amplitudes.

use std::f64::consts::PI;

use rand::Rng;

use crate::extract::{music_extract, MusicConfig};
use crate::model::{observe, wrap_unit, AmplitudeMatrix, Compressor, FrequencySet, Observation};
use crate::solver::Problem;
use crate::toeplitz::DimSpec;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Azimuth and elevation in radians.
pub type Angles = [f64; 2];

/// Element positions in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("element positions must be finite".into()));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `rings` stacked uniform circular arrays, `dz` apart along z and centered
/// about the origin.
pub fn stacked_circular_array(
    rings: usize,
    per_ring: usize,
    dz: f64,
    diameter: f64,
) -> Result<ArrayGeometry> {
    if rings == 0 || per_ring == 0 {
        return Err(Error::InvalidArgument("ring and element counts must be positive".into()));
    }
    let radius = diameter / 2.0;
    let mid = (rings as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(rings * per_ring);
    for ring in 0..rings {
        let z = (ring as f64 - mid) * dz;
        for i in 0..per_ring {
            let phi = 2.0 * PI * i as f64 / per_ring as f64;
            positions.push([radius * phi.cos(), radius * phi.sin(), z]);
        }
    }
    ArrayGeometry::new(positions)
}

/// Isotropic plane-wave response `exp(j 2 pi <p_m, kappa(theta)>)`.
pub fn ideal_response(geom: &ArrayGeometry, theta: Angles) -> CVector {
    let [t1, t2] = theta;
    let kappa = [t2.sin() * t1.cos(), t2.sin() * t1.sin(), t2.cos()];
    CVector::from_iterator(
        geom.len(),
        geom.positions().iter().map(|p| {
            let phase = 2.0 * PI * (p[0] * kappa[0] + p[1] * kappa[1] + p[2] * kappa[2]);
            C64::from_polar(1.0, phase)
        }),
    )
}

/// Array responses on the periodic grid `theta = (2 pi i1 / Q1, 2 pi i2 / Q2)`.
///
/// Column `i1 * Q2 + i2` holds the response at grid point `(i1, i2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledManifold {
    grid: [usize; 2],
    samples: CMatrix,
}

impl SampledManifold {
    pub fn new(grid: [usize; 2], samples: CMatrix) -> Result<Self> {
        if grid[0] == 0 || grid[1] == 0 || samples.ncols() != grid[0] * grid[1] {
            return Err(Error::Shape(format!(
                "{} manifold columns do not fill a {}x{} grid",
                samples.ncols(),
                grid[0],
                grid[1]
            )));
        }
        Ok(Self { grid, samples })
    }

    /// Sample `geom` over the full torus, elevation included.
    pub fn from_geometry(geom: &ArrayGeometry, grid: [usize; 2]) -> Result<Self> {
        Self::from_fn(geom.len(), grid, |theta| ideal_response(geom, theta))
    }

    pub fn from_fn(antennas: usize, grid: [usize; 2], f: impl Fn(Angles) -> CVector) -> Result<Self> {
        let mut samples = CMatrix::zeros(antennas, grid[0] * grid[1]);
        for i1 in 0..grid[0] {
            for i2 in 0..grid[1] {
                let col = i1 * grid[1] + i2;
                samples.set_column(col, &f(grid_angle(grid, i1, i2)));
            }
        }
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> [usize; 2] {
        self.grid
    }

    pub fn samples(&self) -> &CMatrix {
        &self.samples
    }

    pub fn angle(&self, i1: usize, i2: usize) -> Angles {
        grid_angle(self.grid, i1, i2)
    }
}

fn grid_angle(grid: [usize; 2], i1: usize, i2: usize) -> Angles {
    [
        2.0 * PI * i1 as f64 / grid[0] as f64,
        2.0 * PI * i2 as f64 / grid[1] as f64,
    ]
}

/// Truncated Fourier-series array model.
#[derive(Debug, Clone, PartialEq)]
pub struct EadfModel {
    lengths: [usize; 2],
    g: CMatrix,
}

impl EadfModel {
    /// `g` has one row per antenna and column `a * L2 + b` for
    /// `l1 = a - (L1 - 1) / 2`, `l2 = b - (L2 - 1) / 2`.
    pub fn new(lengths: [usize; 2], g: CMatrix) -> Result<Self> {
        check_odd(lengths)?;
        if g.ncols() != lengths[0] * lengths[1] {
            return Err(Error::Shape(format!(
                "coefficient matrix has {} columns, expected {}",
                g.ncols(),
                lengths[0] * lengths[1]
            )));
        }
        Ok(Self { lengths, g })
    }

    pub fn lengths(&self) -> [usize; 2] {
        self.lengths
    }

    pub fn antennas(&self) -> usize {
        self.g.nrows()
    }

    /// Stacked coefficient matrix `G`.
    pub fn matrix(&self) -> &CMatrix {
        &self.g
    }

    pub fn coeff(&self, antenna: usize, l1: i64, l2: i64) -> C64 {
        let h1 = (self.lengths[0] as i64 - 1) / 2;
        let h2 = (self.lengths[1] as i64 - 1) / 2;
        let col = (l1 + h1) as usize * self.lengths[1] + (l2 + h2) as usize;
        self.g[(antenna, col)]
    }

    /// Frequency-domain dimensions `[L1, L2]`.
    pub fn dims(&self) -> DimSpec {
        DimSpec::new(self.lengths.to_vec()).expect("odd lengths are positive")
    }
}

fn check_odd(lengths: [usize; 2]) -> Result<()> {
    if lengths.iter().any(|&l| l % 2 == 0) {
        return Err(Error::InvalidArgument(format!(
            "EADF lengths must be odd, got {lengths:?}"
        )));
    }
    Ok(())
}

fn centered(l: usize) -> impl Iterator<Item = f64> {
    let h = (l as i64 - 1) / 2;
    (-h..=h).map(|x| x as f64)
}

/// `exp(j theta l)` over centered `l`, Kronecker-stacked with `l1` slow.
fn fourier_basis(lengths: [usize; 2], theta: Angles, sign: f64) -> CVector {
    let e1: Vec<C64> = centered(lengths[0]).map(|l| C64::from_polar(1.0, sign * theta[0] * l)).collect();
    let e2: Vec<C64> = centered(lengths[1]).map(|l| C64::from_polar(1.0, sign * theta[1] * l)).collect();
    crate::model::kron_vectors(&[e1, e2])
}

/// Centered `L1 x L2` Fourier coefficients of every antenna's sampled response.
pub fn fit_eadf(manifold: &SampledManifold, l1: usize, l2: usize) -> Result<EadfModel> {
    let lengths = [l1, l2];
    check_odd(lengths)?;
    let [q1, q2] = manifold.grid();
    if q1 < 2 * l1 || q2 < 2 * l2 {
        return Err(Error::InvalidArgument(format!(
            "a {q1}x{q2} grid is too coarse for {l1}x{l2} coefficients"
        )));
    }
    let mut kernel = CMatrix::zeros(q1 * q2, l1 * l2);
    for i1 in 0..q1 {
        for i2 in 0..q2 {
            let row = fourier_basis(lengths, grid_angle([q1, q2], i1, i2), -1.0);
            kernel.row_mut(i1 * q2 + i2).copy_from(&row.transpose());
        }
    }
    let scale = ((l1 * l2) as f64).sqrt() / (q1 * q2) as f64;
    EadfModel::new(lengths, manifold.samples() * kernel * C64::new(scale, 0.0))
}

/// Evaluate the Fourier series at `theta`.
pub fn eadf_response(model: &EadfModel, theta: Angles) -> CVector {
    let [l1, l2] = model.lengths;
    let basis = fourier_basis(model.lengths, theta, 1.0);
    model.matrix() * basis / C64::new(((l1 * l2) as f64).sqrt(), 0.0)
}

/// `f_p = (-theta_p / 2 pi) mod 1`, in `(0, 1]`.
pub fn frequencies_from_angles(dims: &DimSpec, angles: &[Angles]) -> Result<FrequencySet> {
    if dims.ndim() != 2 {
        return Err(Error::InvalidDims(format!("angles need two dimensions, got {:?}", dims.dims())));
    }
    let points = angles
        .iter()
        .map(|t| t.iter().map(|&x| wrap_unit(-x / (2.0 * PI))).collect())
        .collect();
    FrequencySet::new(dims.clone(), points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleEstimate {
    pub theta: Angles,
    /// The raw elevation exceeded `pi` and was reflected to the physical
    /// direction `(theta_1 + pi, 2 pi - theta_2)`.
    pub folded: bool,
}

fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}

/// Inverse of [`frequencies_from_angles`] with elevations folded into `[0, pi]`.
pub fn angles_from_frequencies(freqs: &FrequencySet) -> Vec<AngleEstimate> {
    freqs
        .points()
        .iter()
        .map(|f| {
            let t1 = wrap_angle(-2.0 * PI * f[0]);
            let t2 = wrap_angle(-2.0 * PI * f[1]);
            if t2 > PI {
                AngleEstimate {
                    theta: [wrap_angle(t1 + PI), 2.0 * PI - t2],
                    folded: true,
                }
            } else {
                AngleEstimate {
                    theta: [t1, t2],
                    folded: false,
                }
            }
        })
        .collect()
}

/// Distance on the circle of circumference `2 pi`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(2.0 * PI - d)
}

/// A direction-finding instance in frequency form.
#[derive(Debug, Clone)]
pub struct DoaInstance {
    pub dims: DimSpec,
    /// `Psi G`.
    pub phi: CMatrix,
    pub observation: Observation,
    pub truth: FrequencySet,
    pub angles: Vec<Angles>,
    /// Source amplitudes with the per-source phase `exp(-j <c, theta>)` folded in.
    pub amplitudes: AmplitudeMatrix,
}

impl DoaInstance {
    pub fn problem(&self, tau: f64, rho: f64) -> Result<Problem> {
        Problem::new(self.dims.clone(), self.observation.y.clone(), self.phi.clone(), tau, rho)
    }
}

/// `Y = Psi G A S + N` with the array responses taken from the EADF model.
pub fn doa_problem<R: Rng + ?Sized>(
    model: &EadfModel,
    psi: &CMatrix,
    angles: &[Angles],
    s: &AmplitudeMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<DoaInstance> {
    let mut responses = CMatrix::zeros(model.antennas(), angles.len());
    for (i, &t) in angles.iter().enumerate() {
        responses.set_column(i, &eadf_response(model, t));
    }
    doa_problem_with_responses(model, psi, &responses, angles, s, sigma2, rng)
}

/// `Y = Psi R S + N` for given true responses `R`, one column per source,
/// with `Phi = Psi G` from the EADF model.
pub fn doa_problem_with_responses<R: Rng + ?Sized>(
    model: &EadfModel,
    psi: &CMatrix,
    responses: &CMatrix,
    angles: &[Angles],
    s: &AmplitudeMatrix,
    sigma2: f64,
    rng: &mut R,
) -> Result<DoaInstance> {
    if psi.ncols() != model.antennas() || responses.nrows() != model.antennas() {
        return Err(Error::Shape(format!(
            "Psi is {}x{} and responses have {} rows for {} antennas",
            psi.nrows(),
            psi.ncols(),
            responses.nrows(),
            model.antennas()
        )));
    }
    if responses.ncols() != angles.len() || s.sources() != angles.len() {
        return Err(Error::Shape(format!(
            "{} angles, {} responses, {} amplitude rows",
            angles.len(),
            responses.ncols(),
            s.sources()
        )));
    }
    let dims = model.dims();
    let truth = frequencies_from_angles(&dims, angles)?;
    let compressor = Compressor::new(psi.clone())?;
    let observation = observe(&compressor, &(responses * s.matrix()), sigma2, rng)?;

    let c: Vec<f64> = model.lengths().iter().map(|&l| (l as f64 + 1.0) / 2.0).collect();
    let mut absorbed = s.matrix().clone();
    for (i, t) in angles.iter().enumerate() {
        let phase = C64::from_polar(1.0, -(c[0] * t[0] + c[1] * t[1]));
        for x in absorbed.row_mut(i).iter_mut() {
            *x *= phase;
        }
    }
    Ok(DoaInstance {
        dims,
        phi: psi * model.matrix(),
        observation,
        truth,
        angles: angles.to_vec(),
        amplitudes: AmplitudeMatrix::new(absorbed)?,
    })
}

/// MUSIC on a covariance estimate in EADF frequency form, returning `r`
/// physical directions.
///
/// A direction and its reflection `(theta_1 + pi, 2 pi - theta_2)` share a
/// response, so the search asks for up to `2r` peaks, folds them into the
/// physical domain, merges twins that land within two grid cells and keeps
/// the `r` strongest.
pub fn estimate_angles(
    t: &CMatrix,
    dims: &DimSpec,
    r: usize,
    config: &MusicConfig,
) -> Result<Vec<AngleEstimate>> {
    let wanted = (2 * r).min(dims.size().saturating_sub(1)).max(r);
    let est = music_extract(t, dims, wanted, config)?;
    let tol: Vec<f64> = dims
        .dims()
        .iter()
        .map(|&n| 2.0 * 2.0 * PI / (config.grid_factor * n) as f64)
        .collect();
    let mut ranked: Vec<(AngleEstimate, f64)> = angles_from_frequencies(&est.frequencies)
        .into_iter()
        .zip(est.peak_values.iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<AngleEstimate> = Vec::with_capacity(r);
    for (cand, _) in ranked {
        let twin = kept.iter().any(|k| {
            (0..2).all(|p| angle_distance(k.theta[p], cand.theta[p]) <= tol[p])
        });
        if !twin {
            kept.push(cand);
        }
        if kept.len() == r {
            break;
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{atom, steering_matrix};
    use crate::rng::{substream, Stream};

    fn default_array() -> ArrayGeometry {
        stacked_circular_array(3, 12, 0.375, 0.75).unwrap()
    }

    #[test]
    fn array_construction() {
        let g = default_array();
        assert_eq!(g.len(), 36);
        for p in g.positions() {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 0.375).abs() < 1e-12);
        }
        let zs: Vec<f64> = g.positions().iter().map(|p| p[2]).collect();
        assert!((zs[0] + 0.375).abs() < 1e-12 && zs[12].abs() < 1e-12 && (zs[35] - 0.375).abs() < 1e-12);
        let single = stacked_circular_array(1, 1, 0.375, 0.75).unwrap();
        assert_eq!(single.positions(), &[[0.375, 0.0, 0.0]]);
        assert!(stacked_circular_array(0, 3, 0.1, 0.1).is_err());
    }

    #[test]
    fn ideal_response_properties() {
        let origin = ArrayGeometry::new(vec![[0.0; 3]]).unwrap();
        assert_eq!(ideal_response(&origin, [1.3, 0.4])[0], C64::new(1.0, 0.0));
        let g = default_array();
        let a = ideal_response(&g, [0.7, 1.1]);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let b = ideal_response(&g, [0.7 + 2.0 * PI, 1.1]);
        assert!((a - b).norm() < 1e-12);
        let twin = ideal_response(&g, [0.7 + PI, 2.0 * PI - 1.1]);
        assert!((ideal_response(&g, [0.7, 1.1]) - twin).norm() < 1e-12);
    }

    #[test]
    fn isotropic_element_is_a_delta() {
        let origin = ArrayGeometry::new(vec![[0.0; 3]]).unwrap();
        let m = fit_eadf(&SampledManifold::from_geometry(&origin, [10, 14]).unwrap(), 5, 7).unwrap();
        for l1 in -2..=2 {
            for l2 in -3..=3 {
                let c = m.coeff(0, l1, l2);
                if l1 == 0 && l2 == 0 {
                    assert!((c - C64::new(35f64.sqrt(), 0.0)).norm() < 1e-10);
                } else {
                    assert!(c.norm() <= 1e-10);
                }
            }
        }
        assert!((eadf_response(&m, [0.3, 2.0])[0] - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn fit_rejects_bad_sizes() {
        let m = SampledManifold::from_geometry(&default_array(), [30, 30]).unwrap();
        assert!(fit_eadf(&m, 14, 15).is_err());
        assert!(fit_eadf(&m, 17, 15).is_err());
    }

    #[test]
    fn response_matches_direct_double_sum() {
        let m = fit_eadf(&SampledManifold::from_geometry(&default_array(), [14, 10]).unwrap(), 7, 5).unwrap();
        let theta = [2.1, 0.8];
        let fast = eadf_response(&m, theta);
        for ant in [0, 17, 35] {
            let mut sum = C64::new(0.0, 0.0);
            for l1 in -3i64..=3 {
                for l2 in -2i64..=2 {
                    sum += m.coeff(ant, l1, l2)
                        * C64::from_polar(1.0, theta[0] * l1 as f64 + theta[1] * l2 as f64);
                }
            }
            sum /= C64::new(35f64.sqrt(), 0.0);
            assert!((sum - fast[ant]).norm() < 1e-12);
        }
    }

    #[test]
    fn response_is_linear_and_periodic() {
        let m = fit_eadf(&SampledManifold::from_geometry(&default_array(), [18, 18]).unwrap(), 9, 9).unwrap();
        let doubled = EadfModel::new(m.lengths(), m.matrix() * C64::new(2.0, 0.0)).unwrap();
        let t = [0.4, 2.5];
        assert!((eadf_response(&doubled, t) - eadf_response(&m, t) * C64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((eadf_response(&m, [t[0] + 2.0 * PI, t[1]]) - eadf_response(&m, t)).norm() < 1e-10);
    }

    #[test]
    fn reconstruction_on_default_array() {
        let sampled = SampledManifold::from_geometry(&default_array(), [30, 30]).unwrap();
        let m = fit_eadf(&sampled, 15, 15).unwrap();
        let mut worst = 0.0f64;
        for i1 in 0..30 {
            for i2 in 0..30 {
                let col = sampled.samples().column(i1 * 30 + i2);
                let rec = eadf_response(&m, sampled.angle(i1, i2));
                worst = worst.max((rec - col).norm() / col.norm());
            }
        }
        assert!(worst <= 1e-3, "{worst}");

        let total: f64 = m.matrix().iter().map(|x| x.norm_sqr()).sum();
        let mut outer = 0.0;
        for ant in 0..36 {
            for l in -7i64..=7 {
                for (a, b) in [(l, 7), (l, -7), (7, l), (-7, l)] {
                    outer += m.coeff(ant, a, b).norm_sqr();
                }
            }
        }
        assert!(outer < 0.01 * total);
    }

    #[test]
    fn refitting_a_reconstruction_is_exact() {
        let m = fit_eadf(&SampledManifold::from_geometry(&default_array(), [22, 18]).unwrap(), 11, 9).unwrap();
        let rebuilt = SampledManifold::from_fn(36, [22, 18], |t| eadf_response(&m, t)).unwrap();
        let again = fit_eadf(&rebuilt, 11, 9).unwrap();
        assert!((again.matrix() - m.matrix()).norm() <= 1e-10 * m.matrix().norm());
    }

    #[test]
    fn two_model_forms_agree() {
        let m = fit_eadf(&SampledManifold::from_geometry(&default_array(), [30, 30]).unwrap(), 15, 15).unwrap();
        let dims = m.dims();
        for theta in [[0.0, 0.0], [1.0, 1.2], [4.3, 2.9], [6.1, 0.05]] {
            let f = frequencies_from_angles(&dims, &[theta]).unwrap();
            let lhs = m.matrix() * steering_matrix(&f).column(0);
            let phase = C64::from_polar(1.0, 8.0 * (theta[0] + theta[1]));
            let rhs = eadf_response(&m, theta) * phase;
            assert!((lhs - &rhs).norm() <= 1e-10 * rhs.norm());
        }

        let s = AmplitudeMatrix::unit_modulus(&mut substream(0, 0, 0, Stream::Amplitudes), 1, 3);
        let psi = CMatrix::identity(36, 36);
        let inst = doa_problem(&m, &psi, &[[2.0, 1.0]], &s, 0.0, &mut substream(0, 0, 0, Stream::Noise)).unwrap();
        let a = atom(&inst.truth.points()[0], &dims).unwrap();
        let model_form = &inst.phi * a * inst.amplitudes.matrix();
        assert!((model_form - &inst.observation.y).norm() <= 1e-10 * inst.observation.y.norm());
        assert!(inst.problem(0.1, 0.05).is_ok());
    }

    #[test]
    fn angle_frequency_round_trip() {
        let dims = DimSpec::new(vec![15, 15]).unwrap();
        let angles = [[0.3, 0.2], [3.0, 3.1], [6.2, 1.5]];
        let f = frequencies_from_angles(&dims, &angles).unwrap();
        assert_eq!(f.len(), 3);
        assert_ne!(f.points()[0], f.points()[1]);
        for (back, want) in angles_from_frequencies(&f).iter().zip(&angles) {
            assert!(!back.folded);
            assert!((back.theta[0] - want[0]).abs() < 1e-12 && (back.theta[1] - want[1]).abs() < 1e-12);
        }
        let ones = FrequencySet::new(dims.clone(), vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(angles_from_frequencies(&ones)[0].theta, [0.0, 0.0]);

        let raw = FrequencySet::new(dims, vec![vec![0.5, 0.25]]).unwrap();
        let est = angles_from_frequencies(&raw)[0];
        // raw elevation 3 pi / 2
        assert!(est.folded);
        assert!((est.theta[0] - 0.0).abs() < 1e-12 && (est.theta[1] - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn twin_peaks_collapse_to_one_direction() {
        let m = fit_eadf(&SampledManifold::from_geometry(&default_array(), [30, 30]).unwrap(), 15, 15).unwrap();
        let dims = m.dims();
        let theta = [1.0, 1.2];
        let twin = [1.0 + PI, 2.0 * PI - 1.2];
        let f = frequencies_from_angles(&dims, &[theta, twin]).unwrap();
        let a = steering_matrix(&f);
        let t = &a * a.adjoint() + CMatrix::identity(225, 225) * C64::new(1e-9, 0.0);
        let est = estimate_angles(&t, &dims, 1, &MusicConfig::default()).unwrap();
        assert_eq!(est.len(), 1);
        assert!(angle_distance(est[0].theta[0], theta[0]) < 1e-3);
        assert!(angle_distance(est[0].theta[1], theta[1]) < 1e-3);
    }
}
