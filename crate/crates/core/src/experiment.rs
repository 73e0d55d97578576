//! Seeded Monte-Carlo sweeps over noise levels.
//!
//! Every draw comes from [`substream`] keyed by `(seed, trial, level, stream)`.
//! Frequencies, amplitudes, compressor and solver initialization use level 0
//! so a trial sees the same scene at every noise variance; only the noise is
//! drawn per level.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crb::{crb, CrbInputs};
use crate::doa::{
    angle_distance, doa_problem, doa_problem_with_responses, estimate_angles, fit_eadf,
    frequencies_from_angles, ideal_response, stacked_circular_array, Angles, EadfModel,
    SampledManifold,
};
use crate::extract::{match_frequencies, music_extract, MusicConfig};
use crate::model::{
    gaussian_compressor, observe, rows_for_rate, synthesize, wrap_distance, wrap_unit,
    AmplitudeMatrix, Compressor, FrequencySet,
};
use crate::rng::{substream, Stream};
use crate::solver::{solve, InitMode, Problem, SolverConfig};
use crate::toeplitz::DimSpec;
use crate::{CMatrix, Error, Result};

const MAX_DRAWS: usize = 100_000;
const TAU_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Lse,
    Doa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    /// Unit modulus, uniform phase.
    #[default]
    Unit,
    /// Circular complex Gaussian, unit variance.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Zero,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Fixed `tau`; when absent, `tau = sigma^0.8` (floored at 1e-4).
    pub tau: Option<f64>,
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub early_stop: bool,
    pub init: InitKind,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tau: None,
            rho: 0.05,
            max_iters: 300,
            tol: 1e-6,
            early_stop: false,
            init: InitKind::Zero,
        }
    }
}

impl SolverSection {
    pub fn tau_for(&self, noise_var: f64) -> f64 {
        self.tau.unwrap_or_else(|| auto_tau(noise_var))
    }
}

/// `sigma^0.8`, floored so noiseless runs keep a positive weight.
pub fn auto_tau(noise_var: f64) -> f64 {
    noise_var.powf(0.4).max(TAU_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicSection {
    pub grid_factor: usize,
    pub refine_iters: usize,
}

impl Default for MusicSection {
    fn default() -> Self {
        let c = MusicConfig::default();
        Self {
            grid_factor: c.grid_factor,
            refine_iters: c.refine_iters,
        }
    }
}

impl MusicSection {
    pub fn config(&self) -> MusicConfig {
        MusicConfig {
            grid_factor: self.grid_factor,
            refine_iters: self.refine_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LseSection {
    pub dims: Vec<usize>,
    /// Compression rate; 1 means no compression (`Phi = I`).
    pub compression: f64,
    /// Every pair of drawn frequencies differs by at least this many grid
    /// cells `1 / N_p` in some dimension.
    pub min_separation: f64,
}

impl Default for LseSection {
    fn default() -> Self {
        Self {
            dims: vec![3, 3, 3],
            compression: 1.0,
            min_separation: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoaSection {
    pub rings: usize,
    pub per_ring: usize,
    pub dz: f64,
    pub diameter: f64,
    /// EADF truncation `[L1, L2]`.
    pub lengths: [usize; 2],
    /// Angle grid for the fit; defaults to twice the truncation lengths.
    pub grid: Option<[usize; 2]>,
    /// True `(azimuth, elevation)` per source, radians.
    pub angles: Vec<Angles>,
    /// Compression rate of `Psi`; 1 means `Psi = I`.
    pub compression: f64,
    /// Measured manifold file replacing the synthetic array.
    pub manifold: Option<PathBuf>,
}

impl Default for DoaSection {
    fn default() -> Self {
        Self {
            rings: 3,
            per_ring: 12,
            dz: 0.375,
            diameter: 0.75,
            lengths: [15, 15],
            grid: None,
            angles: vec![[1.0, 1.2], [3.0, 0.7], [5.0, 2.0]],
            compression: 1.0,
            manifold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    /// Defaults to 20 for `lse` and 1 for `doa`.
    pub trials: Option<usize>,
    pub workers: usize,
    /// Defaults to `[1e-4, 1e-3]` for `lse` and `[1e-4]` for `doa`.
    pub noise_vars: Option<Vec<f64>>,
    /// Source count for `lse`; `doa` uses the number of angles.
    pub sources: usize,
    pub snapshots: usize,
    pub amplitudes: AmplitudeMode,
    pub out: Option<PathBuf>,
    pub solver: SolverSection,
    pub music: MusicSection,
    pub lse: LseSection,
    pub doa: DoaSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Lse,
            seed: 0,
            trials: None,
            workers: 1,
            noise_vars: None,
            sources: 3,
            snapshots: 20,
            amplitudes: AmplitudeMode::Unit,
            out: None,
            solver: SolverSection::default(),
            music: MusicSection::default(),
            lse: LseSection::default(),
            doa: DoaSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.kind {
            ScenarioKind::Lse => 20,
            ScenarioKind::Doa => 1,
        })
    }

    /// Noise variances in ascending order.
    pub fn noise_vars(&self) -> Vec<f64> {
        let mut v = self.noise_vars.clone().unwrap_or_else(|| match self.kind {
            ScenarioKind::Lse => vec![1e-4, 1e-3],
            ScenarioKind::Doa => vec![1e-4],
        });
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn source_count(&self) -> usize {
        match self.kind {
            ScenarioKind::Lse => self.sources,
            ScenarioKind::Doa => self.doa.angles.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials() == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.snapshots == 0 {
            return bad("snapshots must be at least 1".into());
        }
        let vars = self.noise_vars();
        if vars.is_empty() || vars.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad(format!("noise variances must be finite and non-negative, got {vars:?}"));
        }
        let s = &self.solver;
        if !(s.rho > 0.0) || s.tau.is_some_and(|t| !(t > 0.0)) || !(s.tol >= 0.0) {
            return bad("solver needs rho > 0, tau > 0 and tol >= 0".into());
        }
        if self.music.grid_factor < 2 {
            return bad("music grid_factor must be at least 2".into());
        }
        match self.kind {
            ScenarioKind::Lse => {
                let dims = DimSpec::new(self.lse.dims.clone()).map_err(|e| Error::Config(e.to_string()))?;
                if self.sources >= dims.size() {
                    return bad(format!("{} sources need M > r, M = {}", self.sources, dims.size()));
                }
                rows_for_rate(self.lse.compression, dims.size()).map_err(|e| Error::Config(e.to_string()))?;
                if !(self.lse.min_separation >= 0.0) {
                    return bad("min_separation must be non-negative".into());
                }
            }
            ScenarioKind::Doa => {
                let d = &self.doa;
                if d.lengths.iter().any(|l| l % 2 == 0) {
                    return bad(format!("EADF lengths must be odd, got {:?}", d.lengths));
                }
                if d.angles.iter().flatten().any(|x| !x.is_finite()) {
                    return bad("angles must be finite".into());
                }
                if !(d.compression > 0.0 && d.compression <= 1.0) {
                    return bad(format!("compression must lie in (0, 1], got {}", d.compression));
                }
                if d.manifold.is_none() && (d.rings == 0 || d.per_ring == 0) {
                    return bad("array needs at least one ring and element".into());
                }
            }
        }
        Ok(())
    }

    fn solver_config(&self, trial: usize) -> SolverConfig {
        let init = match self.solver.init {
            InitKind::Zero => InitMode::Zero,
            InitKind::Gaussian => InitMode::Gaussian {
                seed: substream(self.seed, trial as u64, 0, Stream::Init).next_u64(),
            },
        };
        SolverConfig {
            max_iters: self.solver.max_iters,
            primal_tol: self.solver.tol,
            early_stop: self.solver.early_stop,
            init,
        }
    }

    fn draw_amplitudes(&self, trial: usize, sources: usize) -> AmplitudeMatrix {
        let mut rng = substream(self.seed, trial as u64, 0, Stream::Amplitudes);
        match self.amplitudes {
            AmplitudeMode::Unit => AmplitudeMatrix::unit_modulus(&mut rng, sources, self.snapshots),
            AmplitudeMode::Gaussian => AmplitudeMatrix::gaussian(&mut rng, sources, self.snapshots),
        }
    }
}

/// Uniform draws in `(0, 1]^d`, resampled until every pair is at least
/// `min_sep / N_p` apart (wraparound) in some dimension `p`.
pub fn draw_frequencies<R: Rng + ?Sized>(
    rng: &mut R,
    dims: &DimSpec,
    r: usize,
    min_sep: f64,
) -> Result<FrequencySet> {
    let n = dims.dims();
    for _ in 0..MAX_DRAWS {
        let pts: Vec<Vec<f64>> = (0..r)
            .map(|_| n.iter().map(|_| wrap_unit(1.0 - rng.random::<f64>())).collect())
            .collect();
        let separated = (0..r).all(|i| {
            (0..i).all(|j| {
                (0..n.len()).any(|p| n[p] as f64 * wrap_distance(pts[i][p], pts[j][p]) >= min_sep)
            })
        });
        if separated {
            return FrequencySet::new(dims.clone(), pts);
        }
    }
    Err(Error::Config(format!(
        "could not place {r} sources {min_sep} grid cells apart in dims {n:?}"
    )))
}

/// One Monte-Carlo trial at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub noise_var: f64,
    pub trial: usize,
    /// Frequency MSE per coordinate; NaN when the solve failed.
    pub mse: f64,
    /// CRB per coordinate (total bound over `d r`); infinite when singular.
    pub crb: f64,
    pub converged: bool,
    /// MUSIC had to pad with non-peak grid points.
    pub padded: bool,
}

impl TrialRecord {
    pub fn usable(&self) -> bool {
        self.mse.is_finite() && self.crb.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr: f64,
    pub admm_mean: f64,
    pub admm_median: f64,
    pub crb_mean: f64,
    pub crb_median: f64,
    pub trials_used: usize,
    /// Usable trials whose solver stopped short of the residual tolerance.
    pub not_converged: usize,
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn aggregate(noise_var: f64, records: &[&TrialRecord]) -> ResultRow {
    let used: Vec<&&TrialRecord> = records.iter().filter(|r| r.usable()).collect();
    let mse: Vec<f64> = used.iter().map(|r| r.mse).collect();
    let bound: Vec<f64> = used.iter().map(|r| r.crb).collect();
    ResultRow {
        snr: noise_var,
        admm_mean: mean(&mse),
        admm_median: median(&mse),
        crb_mean: mean(&bound),
        crb_median: median(&bound),
        trials_used: used.len(),
        not_converged: used.iter().filter(|r| !r.converged).count(),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn jobs(cfg: &ScenarioConfig) -> Vec<(usize, f64, usize)> {
    let vars = cfg.noise_vars();
    let trials = cfg.trials();
    vars.iter()
        .enumerate()
        .flat_map(|(level, &v)| (0..trials).map(move |t| (level, v, t)))
        .collect()
}

/// The noise-free part of an LSE trial: frequencies, amplitudes, compressor.
pub struct LseScene {
    pub dims: DimSpec,
    pub truth: FrequencySet,
    pub amplitudes: AmplitudeMatrix,
    pub compressor: Compressor,
}

pub fn lse_scene(cfg: &ScenarioConfig, trial: usize) -> Result<LseScene> {
    let dims = DimSpec::new(cfg.lse.dims.clone())?;
    let t = trial as u64;
    let truth = draw_frequencies(
        &mut substream(cfg.seed, t, 0, Stream::Frequencies),
        &dims,
        cfg.sources,
        cfg.lse.min_separation,
    )?;
    let amplitudes = cfg.draw_amplitudes(trial, cfg.sources);
    let compressor = if cfg.lse.compression >= 1.0 {
        Compressor::identity(&dims)
    } else {
        let rows = rows_for_rate(cfg.lse.compression, dims.size())?;
        gaussian_compressor(rows, &dims, &mut substream(cfg.seed, t, 0, Stream::Compressor))?
    };
    Ok(LseScene {
        dims,
        truth,
        amplitudes,
        compressor,
    })
}

fn per_coordinate_crb(scene: &LseScene, noise_var: f64) -> Result<f64> {
    let inputs = CrbInputs::lse(&scene.truth, scene.compressor.matrix(), &scene.amplitudes, noise_var)?;
    let params = (scene.truth.len() * scene.dims.ndim()).max(1);
    Ok(crb(&inputs)? / params as f64)
}

pub fn lse_trial(cfg: &ScenarioConfig, level: usize, noise_var: f64, trial: usize) -> Result<TrialRecord> {
    let scene = lse_scene(cfg, trial)?;
    let z = synthesize(&scene.truth, &scene.amplitudes)?;
    let mut noise = substream(cfg.seed, trial as u64, level as u32, Stream::Noise);
    let obs = observe(&scene.compressor, &z, noise_var, &mut noise)?;
    let bound = per_coordinate_crb(&scene, noise_var)?;
    let problem = Problem::new(
        scene.dims.clone(),
        obs.y,
        scene.compressor.matrix().clone(),
        cfg.solver.tau_for(noise_var),
        cfg.solver.rho,
    )?;
    let mut record = TrialRecord {
        noise_var,
        trial,
        mse: f64::NAN,
        crb: bound,
        converged: false,
        padded: false,
    };
    let Ok(result) = solve(&problem, &cfg.solver_config(trial)) else {
        return Ok(record);
    };
    record.converged = result.converged;
    if let Ok(est) = music_extract(&result.toeplitz, &scene.dims, cfg.sources, &cfg.music.config()) {
        record.mse = match_frequencies(&est.frequencies, &scene.truth).mse;
        record.padded = est.padded;
    }
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct LseReport {
    pub rows: Vec<ResultRow>,
    pub trials: Vec<TrialRecord>,
}

pub fn run_lse(cfg: &ScenarioConfig) -> Result<LseReport> {
    if cfg.kind != ScenarioKind::Lse {
        return Err(Error::Config("run_lse needs kind = \"lse\"".into()));
    }
    cfg.validate()?;
    let jobs = jobs(cfg);
    let records: Vec<TrialRecord> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(level, v, t)| lse_trial(cfg, level, v, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(LseReport {
        rows: summarize(cfg, &records),
        trials: records,
    })
}

fn summarize(cfg: &ScenarioConfig, records: &[TrialRecord]) -> Vec<ResultRow> {
    cfg.noise_vars()
        .iter()
        .enumerate()
        .map(|(level, &v)| {
            let trials = cfg.trials();
            let mine: Vec<&TrialRecord> = records[level * trials..(level + 1) * trials].iter().collect();
            aggregate(v, &mine)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbRow {
    pub snr: f64,
    pub crb_mean: f64,
    pub crb_median: f64,
    pub trials_used: usize,
}

/// Per-coordinate CRB over the same scenes `run_lse` or `run_doa` would draw,
/// without solving.
pub fn run_crb(cfg: &ScenarioConfig) -> Result<Vec<CrbRow>> {
    cfg.validate()?;
    let model = match cfg.kind {
        ScenarioKind::Doa => Some(doa_model(cfg)?),
        ScenarioKind::Lse => None,
    };
    let bound = |v: f64, t: usize| -> Result<f64> {
        match &model {
            None => per_coordinate_crb(&lse_scene(cfg, t)?, v),
            Some(m) => {
                let psi = doa_psi(cfg, m, t)?;
                let dims = m.dims();
                let truth = frequencies_from_angles(&dims, &cfg.doa.angles)?;
                let s = cfg.draw_amplitudes(t, cfg.doa.angles.len());
                let inputs = CrbInputs::lse(&truth, &(psi * m.matrix()), &s, v)?;
                Ok(crb(&inputs)? / (2 * truth.len()).max(1) as f64)
            }
        }
    };
    let jobs = jobs(cfg);
    let values: Vec<f64> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(_, v, t)| bound(v, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let trials = cfg.trials();
    Ok(cfg
        .noise_vars()
        .iter()
        .enumerate()
        .map(|(level, &v)| {
            let used: Vec<f64> = values[level * trials..(level + 1) * trials]
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .collect();
            CrbRow {
                snr: v,
                crb_mean: mean(&used),
                crb_median: median(&used),
                trials_used: used.len(),
            }
        })
        .collect())
}

/// EADF model of the configured array or measured manifold.
pub fn doa_model(cfg: &ScenarioConfig) -> Result<EadfModel> {
    let d = &cfg.doa;
    let [l1, l2] = d.lengths;
    let grid = d.grid.unwrap_or([2 * l1, 2 * l2]);
    let manifold = match &d.manifold {
        Some(path) => crate::io::read_manifold(path)?,
        None => {
            let geom = stacked_circular_array(d.rings, d.per_ring, d.dz, d.diameter)?;
            SampledManifold::from_geometry(&geom, grid)?
        }
    };
    fit_eadf(&manifold, l1, l2)
}

fn doa_psi(cfg: &ScenarioConfig, model: &EadfModel, trial: usize) -> Result<CMatrix> {
    let ant = model.antennas();
    if cfg.doa.compression >= 1.0 {
        return Ok(CMatrix::identity(ant, ant));
    }
    let dims = DimSpec::new(vec![ant])?;
    let rows = rows_for_rate(cfg.doa.compression, ant)?;
    let mut rng = substream(cfg.seed, trial as u64, 0, Stream::Compressor);
    Ok(gaussian_compressor(rows, &dims, &mut rng)?.into_matrix())
}

/// True and estimated `(azimuth, elevation)` of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaRow {
    pub noise_var: f64,
    pub trial: usize,
    pub t1: f64,
    pub t2: f64,
    /// NaN when no estimate was paired with this source.
    pub e1: f64,
    pub e2: f64,
}

impl DoaRow {
    /// Larger of the two wraparound angle errors.
    pub fn error(&self) -> f64 {
        angle_distance(self.t1, self.e1).max(angle_distance(self.t2, self.e2))
    }
}

pub fn doa_trial(
    cfg: &ScenarioConfig,
    model: &EadfModel,
    level: usize,
    noise_var: f64,
    trial: usize,
) -> Result<Vec<DoaRow>> {
    let angles = &cfg.doa.angles;
    let r = angles.len();
    let psi = doa_psi(cfg, model, trial)?;
    let s = cfg.draw_amplitudes(trial, r);
    let mut noise = substream(cfg.seed, trial as u64, level as u32, Stream::Noise);
    let inst = if cfg.doa.manifold.is_none() {
        let d = &cfg.doa;
        let geom = stacked_circular_array(d.rings, d.per_ring, d.dz, d.diameter)?;
        let mut responses = CMatrix::zeros(geom.len(), r);
        for (i, &t) in angles.iter().enumerate() {
            responses.set_column(i, &ideal_response(&geom, t));
        }
        doa_problem_with_responses(model, &psi, &responses, angles, &s, noise_var, &mut noise)?
    } else {
        doa_problem(model, &psi, angles, &s, noise_var, &mut noise)?
    };
    let problem = inst.problem(cfg.solver.tau_for(noise_var), cfg.solver.rho)?;
    let est: Vec<Angles> = match solve(&problem, &cfg.solver_config(trial)) {
        Ok(res) => estimate_angles(&res.toeplitz, &inst.dims, r, &cfg.music.config())
            .map(|v| v.into_iter().map(|a| a.theta).collect())
            .unwrap_or_default(),
        Err(_) => Vec::new(),
    };
    let est_freqs = frequencies_from_angles(&inst.dims, &est)?;
    let report = match_frequencies(&est_freqs, &inst.truth);
    let mut rows: Vec<DoaRow> = angles
        .iter()
        .map(|t| DoaRow {
            noise_var,
            trial,
            t1: t[0],
            t2: t[1],
            e1: f64::NAN,
            e2: f64::NAN,
        })
        .collect();
    for (ei, ti) in report.pairs {
        rows[ti].e1 = est[ei][0];
        rows[ti].e2 = est[ei][1];
    }
    Ok(rows)
}

/// Rows ordered by noise variance, trial, then source.
pub fn run_doa(cfg: &ScenarioConfig) -> Result<Vec<DoaRow>> {
    if cfg.kind != ScenarioKind::Doa {
        return Err(Error::Config("run_doa needs kind = \"doa\"".into()));
    }
    cfg.validate()?;
    let model = doa_model(cfg)?;
    let jobs = jobs(cfg);
    let rows: Vec<Vec<DoaRow>> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(level, v, t)| doa_trial(cfg, &model, level, v, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(rows.into_iter().flatten().collect())
}

pub const LSE_HEADER: &str = "snr,admm_mean,admm_median,crb_mean,crb_median,trials_used";
pub const DOA_HEADER: &str = "t1,t2,e1,e2";
pub const CRB_HEADER: &str = "snr,crb_mean,crb_median,trials_used";

fn csv_err(e: std::io::Error) -> Error {
    Error::io("<csv>", e)
}

pub fn write_lse_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    writeln!(w, "{LSE_HEADER}").map_err(csv_err)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.snr, r.admm_mean, r.admm_median, r.crb_mean, r.crb_median, r.trials_used
        )
        .map_err(csv_err)?;
    }
    Ok(())
}

pub fn write_doa_csv<W: Write>(rows: &[DoaRow], mut w: W) -> Result<()> {
    writeln!(w, "{DOA_HEADER}").map_err(csv_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t1, r.t2, r.e1, r.e2).map_err(csv_err)?;
    }
    Ok(())
}

pub fn write_crb_csv<W: Write>(rows: &[CrbRow], mut w: W) -> Result<()> {
    writeln!(w, "{CRB_HEADER}").map_err(csv_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.snr, r.crb_mean, r.crb_median, r.trials_used).map_err(csv_err)?;
    }
    Ok(())
}

/// Write CSV text produced by `f` to `path`.
pub fn write_csv_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new(ScenarioKind::Lse);
        cfg.lse.dims = vec![3, 3];
        cfg.sources = 2;
        cfg.snapshots = 4;
        cfg.trials = Some(2);
        cfg.noise_vars = Some(vec![1e-3]);
        cfg.solver.max_iters = 30;
        cfg
    }

    fn csv(cfg: &ScenarioConfig) -> String {
        let mut buf = Vec::new();
        write_lse_csv(&run_lse(cfg).unwrap().rows, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn one_row_per_noise_level() {
        let text = csv(&tiny());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], LSE_HEADER);
        assert_eq!(lines.len(), 2);
        assert!(lines[1].ends_with(",2"));
    }

    #[test]
    fn rows_ascend_in_noise() {
        let mut cfg = tiny();
        cfg.trials = Some(1);
        cfg.solver.max_iters = 5;
        cfg.noise_vars = Some(vec![1e-1, 1e-3, 1e-5, 1e-2, 1e-4]);
        let rows = run_lse(&cfg).unwrap().rows;
        assert_eq!(rows.len(), 5);
        assert!(rows.windows(2).all(|w| w[0].snr < w[1].snr));
    }

    #[test]
    fn same_seed_same_bytes_any_worker_count() {
        let mut cfg = tiny();
        let a = csv(&cfg);
        cfg.workers = 2;
        assert_eq!(a, csv(&cfg));
        cfg.seed = 1;
        assert_ne!(a, csv(&cfg));
    }

    #[test]
    fn scenes_do_not_depend_on_noise_level() {
        let cfg = tiny();
        let a = lse_trial(&cfg, 0, 1e-3, 1).unwrap();
        let b = lse_trial(&cfg, 1, 1e-3, 1).unwrap();
        assert_eq!(a.crb, b.crb);
        assert_ne!(a.mse, b.mse);
        assert_eq!(a, lse_trial(&cfg, 0, 1e-3, 1).unwrap());
        let s0 = lse_scene(&cfg, 1).unwrap();
        let s1 = lse_scene(&cfg, 1).unwrap();
        assert_eq!(s0.truth, s1.truth);
        assert_eq!(s0.amplitudes, s1.amplitudes);
    }

    #[test]
    fn separation_is_enforced() {
        let dims = DimSpec::new(vec![5, 4]).unwrap();
        let mut rng = substream(3, 0, 0, Stream::Frequencies);
        for _ in 0..50 {
            let f = draw_frequencies(&mut rng, &dims, 3, 1.0).unwrap();
            let p = f.points();
            for i in 0..3 {
                for j in 0..i {
                    assert!((0..2).any(|k| dims.dims()[k] as f64 * wrap_distance(p[i][k], p[j][k]) >= 1.0));
                }
            }
        }
        assert!(draw_frequencies(&mut rng, &DimSpec::new(vec![2]).unwrap(), 3, 1.0).is_err());
    }

    #[test]
    fn config_parsing() {
        let cfg = ScenarioConfig::from_toml(
            "kind = \"doa\"\nseed = 7\n[solver]\nrho = 0.1\n[doa]\nangles = [[1.0, 0.5]]\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Doa);
        assert_eq!(cfg.trials(), 1);
        assert_eq!(cfg.noise_vars(), vec![1e-4]);
        assert_eq!(cfg.solver.rho, 0.1);
        assert_eq!(cfg.solver.max_iters, 300);
        assert_eq!(cfg.source_count(), 1);
        assert!(ScenarioConfig::from_toml("kind = \"lse\"\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml("kind = \"xyz\"\n").is_err());
        let mut bad = tiny();
        bad.trials = Some(0);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = tiny();
        bad.noise_vars = Some(vec![-1.0]);
        assert!(bad.validate().is_err());
        bad = tiny();
        bad.lse.compression = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn auto_tau_rule() {
        assert!((auto_tau(1e-4) - 1e-4f64.sqrt().powf(0.8)).abs() < 1e-15);
        assert_eq!(auto_tau(0.0), TAU_FLOOR);
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(mean(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn crb_sweep_matches_trial_records() {
        let cfg = tiny();
        let report = run_lse(&cfg).unwrap();
        let rows = run_crb(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let bounds: Vec<f64> = report.trials.iter().map(|t| t.crb).collect();
        assert_eq!(rows[0].crb_median, median(&bounds));
    }
}
