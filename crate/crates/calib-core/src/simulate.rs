//! Monte Carlo harness: synthetic origin generation, noise injection,
//! repeated estimation, and error aggregation.
//!
//! Randomness comes from ChaCha12 seeded through a counter-based splitting
//! scheme (see [`trial_seed`]), so every trial is reproducible in isolation
//! and results are independent of execution order or parallelism.

use alloc::format;
use alloc::vec::Vec;

use rand::distributions::Uniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::data::{AffineTransform, CalibrationResult, DataMatrix};
use crate::error::{Error, Result};
use crate::estimate::{apply_transform, fit_gleser_watson, fit_hybrid, fit_least_squares};
use crate::matrix::Matrix;

/// Isotropic Gaussian measurement noise, `N(0, sigma^2 I)` per element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// One of the estimator variants under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Augmented Gleser-Watson; `denoise` restores the augmentation row of
    /// the projected origins to exact ones.
    GleserWatson { denoise: bool },
    /// Simple least squares on augmented data.
    LeastSquares,
    /// Least-squares transform with eigenprojected origins; `None` keeps the
    /// default rank `p`.
    Hybrid { denoise_rank: Option<usize> },
}

impl Estimator {
    /// All four table variants, in comparison order.
    pub fn all() -> Vec<Estimator> {
        alloc::vec![
            Estimator::GleserWatson { denoise: false },
            Estimator::GleserWatson { denoise: true },
            Estimator::LeastSquares,
            Estimator::Hybrid { denoise_rank: None },
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Estimator::GleserWatson { denoise: false } => "gleser-watson",
            Estimator::GleserWatson { denoise: true } => "gleser-watson-denoised",
            Estimator::LeastSquares => "least-squares",
            Estimator::Hybrid { .. } => "hybrid",
        }
    }

    pub fn fit(&self, x: &DataMatrix, y: &DataMatrix) -> Result<CalibrationResult> {
        match self {
            Estimator::GleserWatson { denoise } => fit_gleser_watson(x, y, *denoise),
            Estimator::LeastSquares => fit_least_squares(x, y),
            Estimator::Hybrid { denoise_rank } => fit_hybrid(x, y, *denoise_rank),
        }
    }
}

/// Monte Carlo configuration.
#[derive(Debug, Clone)]
pub struct McConfig {
    /// Simulation runs per sigma.
    pub runs: usize,
    /// Data vectors per run.
    pub samples: usize,
    /// Feature dimension q.
    pub dim: usize,
    /// True transform applied to the origins.
    pub transform: AffineTransform,
    pub sigmas: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    /// Origins are drawn uniformly from this axis-aligned box, per coordinate.
    pub origin_box: (f64, f64),
    /// Retain per-run raw errors in the report.
    pub retain_raw: bool,
}

impl McConfig {
    /// Standard defaults for everything but runs/samples/seed.
    pub fn new(runs: usize, samples: usize, transform: AffineTransform, seed: u64) -> Self {
        Self {
            runs,
            samples,
            dim: transform.dim(),
            transform,
            sigmas: alloc::vec![1.0],
            estimators: Estimator::all(),
            seed,
            origin_box: (0.0, 100.0),
            retain_raw: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be >= 1".into()));
        }
        let min = 2 * (self.dim + 1);
        if self.samples < min {
            return Err(Error::TooFewSamples {
                n: self.samples,
                min,
            });
        }
        if self.dim != self.transform.dim() {
            return Err(Error::ShapeMismatch(format!(
                "config dim {} does not match transform dim {}",
                self.dim,
                self.transform.dim()
            )));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument("sigmas must be finite and >= 0".into()));
        }
        if self.sigmas.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one sigma and one estimator are required".into(),
            ));
        }
        if self.origin_box.1 <= self.origin_box.0 {
            return Err(Error::InvalidArgument("origin box must have lo < hi".into()));
        }
        Ok(())
    }
}

/// Aggregated errors for one (sigma, estimator) pair.
#[derive(Debug, Clone)]
pub struct ErrorCell {
    pub sigma: f64,
    pub estimator: Estimator,
    pub mean_ex: f64,
    pub mean_ey: f64,
    /// Sample standard deviations across runs.
    pub std_ex: f64,
    pub std_ey: f64,
    /// Trials dropped because the estimator hit a singular system.
    pub skips: usize,
    /// Per-run `(e_x, e_y)` values when retention is enabled.
    pub raw: Option<Vec<(f64, f64)>>,
}

/// Full report: one cell per (sigma, estimator), sigma-major in config order.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub cells: Vec<ErrorCell>,
}

/// Per-run errors, one entry per configured estimator; `None` marks a
/// skipped (singular) fit.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub errors: Vec<Option<(f64, f64)>>,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the ChaCha12 seed for one trial from the master seed by chained
/// SplitMix64 mixing of the sigma index and the trial index.
pub fn trial_seed(master: u64, sigma_index: usize, trial: usize) -> u64 {
    mix64(mix64(mix64(master) ^ sigma_index as u64) ^ trial as u64)
}

/// Deterministic synthetic origins, uniform per coordinate in `[0, 100)`.
pub fn generate_origins(n: usize, q: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    generate_origins_in(&mut rng, n, q, (0.0, 100.0))
}

fn generate_origins_in(
    rng: &mut ChaCha12Rng,
    n: usize,
    q: usize,
    origin_box: (f64, f64),
) -> DataMatrix {
    let dist = Uniform::new(origin_box.0, origin_box.1);
    DataMatrix::for_apply(Matrix::from_fn(q, n, |_, _| rng.sample(dist)))
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every element, deterministic per seed.
pub fn add_noise(data: &DataMatrix, spec: &NoiseSpec) -> DataMatrix {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    DataMatrix::for_apply(add_noise_with(data.values(), spec.sigma, &mut rng))
}

fn add_noise_with(m: &Matrix, sigma: f64, rng: &mut ChaCha12Rng) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| {
        m[(i, j)] + sigma * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Mean origin estimation error, `(1/n) sum ||theta_est_i - theta_true_i||`.
pub fn error_ex(theta_est: &DataMatrix, theta_true: &DataMatrix) -> Result<f64> {
    mean_column_distance(theta_est.values(), theta_true.values())
}

/// Mean transformed-data error,
/// `(1/n) sum ||(A_est theta_est_i + b_est) - (A theta_i + b)||`.
pub fn error_ey(
    result: &CalibrationResult,
    origins: &DataMatrix,
    truth: &AffineTransform,
) -> Result<f64> {
    let est = apply_transform(&result.transform, &result.theta_e)?;
    let target = apply_transform(truth, origins)?;
    mean_column_distance(est.values(), target.values())
}

fn mean_column_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.cols();
    let mut sum = 0.0;
    for j in 0..n {
        let mut d2 = 0.0;
        for i in 0..a.rows() {
            let d = a[(i, j)] - b[(i, j)];
            d2 += d * d;
        }
        sum += libm::sqrt(d2);
    }
    Ok(sum / n as f64)
}

/// Runs a single trial: fresh origins and noise, then one fit per configured
/// estimator on the same `(X, Y)` pair.
pub fn run_trial(cfg: &McConfig, sigma_index: usize, trial: usize) -> Result<TrialResult> {
    let sigma = cfg.sigmas[sigma_index];
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(cfg.seed, sigma_index, trial));

    let origins = generate_origins_in(&mut rng, cfg.samples, cfg.dim, cfg.origin_box);
    let x_vals = add_noise_with(origins.values(), sigma, &mut rng);
    let y_clean = apply_transform(&cfg.transform, &origins)?;
    let y_vals = add_noise_with(y_clean.values(), sigma, &mut rng);
    let x = DataMatrix::for_estimation(x_vals)?;
    let y = DataMatrix::for_estimation(y_vals)?;

    let mut errors = Vec::with_capacity(cfg.estimators.len());
    for est in &cfg.estimators {
        match est.fit(&x, &y) {
            Ok(result) => {
                let ex = error_ex(&result.theta_e, &origins)?;
                let ey = error_ey(&result, &origins, &cfg.transform)?;
                errors.push(Some((ex, ey)));
            }
            Err(Error::Singular { .. }) => errors.push(None),
            Err(other) => return Err(other),
        }
    }
    Ok(TrialResult { errors })
}

/// Aggregates the trials of one sigma into per-estimator cells. Accumulation
/// walks trials in index order, so serial and parallel drivers agree exactly.
pub fn aggregate_sigma(
    cfg: &McConfig,
    sigma_index: usize,
    trials: &[TrialResult],
) -> Vec<ErrorCell> {
    let sigma = cfg.sigmas[sigma_index];
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(e, est)| {
            let raw: Vec<(f64, f64)> = trials
                .iter()
                .filter_map(|t| t.errors[e])
                .collect();
            let skips = trials.len() - raw.len();
            let (mean_ex, std_ex) = mean_std(raw.iter().map(|r| r.0));
            let (mean_ey, std_ey) = mean_std(raw.iter().map(|r| r.1));
            ErrorCell {
                sigma,
                estimator: *est,
                mean_ex,
                mean_ey,
                std_ex,
                std_ey,
                skips,
                raw: cfg.retain_raw.then_some(raw),
            }
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, libm::sqrt(var))
}

/// Runs the full protocol serially and aggregates per (sigma, estimator).
pub fn run_monte_carlo(cfg: &McConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for sigma_index in 0..cfg.sigmas.len() {
        let trials: Vec<TrialResult> = (0..cfg.runs)
            .map(|t| run_trial(cfg, sigma_index, t))
            .collect::<Result<_>>()?;
        cells.extend(aggregate_sigma(cfg, sigma_index, &trials));
    }
    Ok(ErrorReport { cells })
}
