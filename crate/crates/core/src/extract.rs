//! Frequency recovery from a covariance estimate and scoring against truth.

use nalgebra::linalg::SymmetricEigen;

use crate::model::{kron_vectors, wrap_distance, wrap_unit, FrequencySet};
use crate::toeplitz::DimSpec;
use crate::{CMatrix, Error, Result, C64};

const SPECTRUM_FLOOR: f64 = 1e-12;
const GOLDEN_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    /// Grid points per dimension are `grid_factor * N_p`.
    pub grid_factor: usize,
    /// Coordinate sweeps of the golden-section refinement.
    pub refine_iters: usize,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self {
            grid_factor: 8,
            refine_iters: 3,
        }
    }
}

/// MUSIC pseudospectrum sampled at `(i + 1) / res_p` in every dimension,
/// flattened with the last dimension fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub resolutions: Vec<usize>,
    pub values: Vec<f64>,
}

impl SpectrumGrid {
    pub fn point(&self, flat: usize) -> Vec<f64> {
        unflatten(flat, &self.resolutions)
            .iter()
            .zip(&self.resolutions)
            .map(|(&i, &n)| (i + 1) as f64 / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    pub frequencies: FrequencySet,
    /// Pseudospectrum at each returned frequency.
    pub peak_values: Vec<f64>,
    /// Fewer than `r` local maxima existed and grid maxima filled the gap.
    pub padded: bool,
}

/// Signal subspace of a Hermitian covariance and the resulting pseudospectrum.
pub struct Pseudospectrum {
    dims: DimSpec,
    signal: CMatrix,
}

impl Pseudospectrum {
    pub fn new(t: &CMatrix, dims: &DimSpec, r: usize) -> Result<Self> {
        let m = dims.size();
        if t.nrows() != m || t.ncols() != m {
            return Err(Error::Shape(format!(
                "covariance is {}x{}, dims {:?} need {m}x{m}",
                t.nrows(),
                t.ncols(),
                dims.dims()
            )));
        }
        if r >= m {
            return Err(Error::InvalidArgument(format!(
                "model order {r} must be below M = {m}"
            )));
        }
        let eig = SymmetricEigen::try_new(t.clone(), 1e-14, 0).ok_or(Error::Eigen)?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut signal = CMatrix::zeros(m, r);
        for (j, &i) in order.iter().take(r).enumerate() {
            signal.set_column(j, &eig.eigenvectors.column(i));
        }
        Ok(Self {
            dims: dims.clone(),
            signal,
        })
    }

    /// `|E_n^H a(f)|^2`, floored.
    pub fn noise_energy(&self, f: &[f64]) -> f64 {
        let factors: Vec<Vec<C64>> = self
            .dims
            .dims()
            .iter()
            .zip(f)
            .map(|(&n, &fp)| atom_factor(n, fp))
            .collect();
        self.noise_energy_of(&kron_vectors(&factors))
    }

    fn noise_energy_of(&self, a: &crate::CVector) -> f64 {
        let total = a.norm_squared();
        let captured = self.signal.ad_mul(a).norm_squared();
        (total - captured).max(SPECTRUM_FLOOR)
    }

    pub fn value(&self, f: &[f64]) -> f64 {
        1.0 / self.noise_energy(f)
    }

    pub fn grid(&self, resolutions: &[usize]) -> SpectrumGrid {
        let tables: Vec<Vec<Vec<C64>>> = self
            .dims
            .dims()
            .iter()
            .zip(resolutions)
            .map(|(&n, &res)| {
                (0..res)
                    .map(|i| atom_factor(n, (i + 1) as f64 / res as f64))
                    .collect()
            })
            .collect();
        let total: usize = resolutions.iter().product();
        let values = (0..total)
            .map(|flat| {
                let idx = unflatten(flat, resolutions);
                let factors: Vec<Vec<C64>> = idx
                    .iter()
                    .zip(&tables)
                    .map(|(&i, t)| t[i].clone())
                    .collect();
                1.0 / self.noise_energy_of(&kron_vectors(&factors))
            })
            .collect();
        SpectrumGrid {
            resolutions: resolutions.to_vec(),
            values,
        }
    }
}

fn atom_factor(n: usize, f: f64) -> Vec<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    (1..=n)
        .map(|k| C64::from_polar(scale, -2.0 * std::f64::consts::PI * k as f64 * f))
        .collect()
}

fn unflatten(mut flat: usize, res: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; res.len()];
    for p in (0..res.len()).rev() {
        idx[p] = flat % res[p];
        flat /= res[p];
    }
    idx
}

fn flatten(idx: &[usize], res: &[usize]) -> usize {
    idx.iter().zip(res).fold(0, |acc, (&i, &n)| acc * n + i)
}

/// Grid indices that are strictly above all `3^d - 1` wrapped neighbours.
pub fn local_maxima(grid: &SpectrumGrid) -> Vec<usize> {
    let res = &grid.resolutions;
    let d = res.len();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(d as u32))
        .map(|mut c| {
            let mut o = vec![0i64; d];
            for p in (0..d).rev() {
                o[p] = (c % 3) as i64 - 1;
                c /= 3;
            }
            o
        })
        .filter(|o| o.iter().any(|&x| x != 0))
        .collect();
    (0..grid.values.len())
        .filter(|&flat| {
            let idx = unflatten(flat, res);
            let v = grid.values[flat];
            offsets.iter().all(|o| {
                let nb: Vec<usize> = idx
                    .iter()
                    .zip(o)
                    .zip(res)
                    .map(|((&i, &di), &n)| (i as i64 + di).rem_euclid(n as i64) as usize)
                    .collect();
                let j = flatten(&nb, res);
                j == flat || v > grid.values[j]
            })
        })
        .collect()
}

/// Maximize the pseudospectrum coordinate by coordinate within `+-step`.
fn refine(spec: &Pseudospectrum, start: &[f64], steps: &[f64], sweeps: usize) -> Vec<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut f = start.to_vec();
    for _ in 0..sweeps {
        for p in 0..f.len() {
            let centre = f[p];
            let eval = |x: f64, f: &mut Vec<f64>| {
                f[p] = x;
                spec.noise_energy(f)
            };
            let (mut a, mut b) = (centre - steps[p], centre + steps[p]);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let mut fc = eval(c, &mut f);
            let mut fd = eval(d, &mut f);
            for _ in 0..GOLDEN_STEPS {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = eval(c, &mut f);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = eval(d, &mut f);
                }
            }
            let best = 0.5 * (a + b);
            let start_val = eval(centre, &mut f);
            let best_val = eval(best, &mut f);
            f[p] = if best_val <= start_val { best } else { centre };
        }
    }
    f.into_iter().map(wrap_unit).collect()
}

/// MUSIC estimate of `r` frequencies from a Hermitian covariance estimate.
pub fn music_extract(
    t: &CMatrix,
    dims: &DimSpec,
    r: usize,
    config: &MusicConfig,
) -> Result<MusicEstimate> {
    if config.grid_factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid factor must be at least 2, got {}",
            config.grid_factor
        )));
    }
    let spec = Pseudospectrum::new(t, dims, r)?;
    if r == 0 {
        return Ok(MusicEstimate {
            frequencies: FrequencySet::empty(dims.clone()),
            peak_values: Vec::new(),
            padded: false,
        });
    }
    let res: Vec<usize> = dims.dims().iter().map(|&n| config.grid_factor * n).collect();
    let grid = spec.grid(&res);

    let mut peaks = local_maxima(&grid);
    peaks.sort_by(|&a, &b| grid.values[b].total_cmp(&grid.values[a]));
    peaks.truncate(r);
    let padded = peaks.len() < r;
    if padded {
        let mut rest: Vec<usize> = (0..grid.values.len()).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(|&a, &b| grid.values[b].total_cmp(&grid.values[a]));
        peaks.extend(rest.into_iter().take(r - peaks.len()));
    }

    let steps: Vec<f64> = res.iter().map(|&n| 1.0 / n as f64).collect();
    let mut points = Vec::with_capacity(r);
    let mut values = Vec::with_capacity(r);
    for &flat in &peaks {
        let f = refine(&spec, &grid.point(flat), &steps, config.refine_iters);
        values.push(spec.value(&f));
        points.push(f);
    }
    Ok(MusicEstimate {
        frequencies: FrequencySet::new(dims.clone(), points)?,
        peak_values: values,
        padded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// `(estimate, truth)` index pairs, ordered by truth index.
    pub pairs: Vec<(usize, usize)>,
    /// Per-coordinate wraparound errors of each pair.
    pub errors: Vec<Vec<f64>>,
    /// Mean squared wraparound error over matched sources and coordinates;
    /// zero when nothing is matched.
    pub mse: f64,
}

fn pair_cost(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| wrap_distance(x, y).powi(2)).sum()
}

/// Minimum-cost assignment of rows to distinct columns; needs `rows <= cols`.
/// Returns the column chosen for each row.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = j - 1;
        }
    }
    out
}

/// Pair estimates with true frequencies to minimize the summed squared
/// wraparound distance.
pub fn match_frequencies(est: &FrequencySet, truth: &FrequencySet) -> MatchReport {
    let e = est.points();
    let t = truth.points();
    let mut pairs: Vec<(usize, usize)> = if t.len() <= e.len() {
        let cost: Vec<Vec<f64>> = t.iter().map(|ti| e.iter().map(|ej| pair_cost(ej, ti)).collect()).collect();
        hungarian(&cost).into_iter().enumerate().map(|(ti, ei)| (ei, ti)).collect()
    } else {
        let cost: Vec<Vec<f64>> = e.iter().map(|ei| t.iter().map(|tj| pair_cost(ei, tj)).collect()).collect();
        hungarian(&cost).into_iter().enumerate().collect()
    };
    pairs.sort_by_key(|&(_, ti)| ti);
    let errors: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(ei, ti)| e[ei].iter().zip(&t[ti]).map(|(&a, &b)| wrap_distance(a, b)).collect())
        .collect();
    let count: usize = errors.iter().map(Vec::len).sum();
    let mse = if count == 0 {
        0.0
    } else {
        errors.iter().flatten().map(|x| x * x).sum::<f64>() / count as f64
    };
    MatchReport { pairs, errors, mse }
}
