//! IO, file formats, and the board-evaluation pipeline behind the `calib`
//! binary. The estimators themselves live in `calib-core`.

pub mod dataset;
pub mod io;
pub mod simrun;

use anyhow::{bail, Result};
use calib_core::simulate::Estimator;
use calib_core::{AffineTransform, Matrix};

/// Exit code for usage and input errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numerical/model failures (singular systems, no convergence).
pub const EXIT_NUMERICAL: i32 = 3;

/// Maps an error chain to the process exit code: numerical failures from the
/// core crate give [`EXIT_NUMERICAL`], everything else [`EXIT_USAGE`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<calib_core::Error>() {
            if matches!(
                core,
                calib_core::Error::Singular { .. }
                    | calib_core::Error::NoConvergence { .. }
                    | calib_core::Error::NotSymmetric { .. }
            ) {
                return EXIT_NUMERICAL;
            }
        }
    }
    EXIT_USAGE
}

/// The built-in q=2 demo transform used by `simulate` when no transform file
/// is given.
pub fn demo_transform() -> AffineTransform {
    AffineTransform::new(
        Matrix::new(2, 2, vec![0.3430, 0.3430, 0.1715, 0.8575]).unwrap(),
        vec![52.0, -58.0],
    )
    .unwrap()
}

/// Parses a method list: `all` or comma-separated labels as printed in
/// reports (`gleser-watson`, `gleser-watson-denoised`, `least-squares`,
/// `hybrid`).
pub fn parse_methods(spec: &str) -> Result<Vec<Estimator>> {
    if spec == "all" {
        return Ok(Estimator::all());
    }
    spec.split(',').map(|s| parse_method(s.trim())).collect()
}

pub fn parse_method(name: &str) -> Result<Estimator> {
    Ok(match name {
        "gleser-watson" | "gw" => Estimator::GleserWatson { denoise: false },
        "gleser-watson-denoised" | "gw-denoised" => Estimator::GleserWatson { denoise: true },
        "least-squares" | "ls" => Estimator::LeastSquares,
        "hybrid" => Estimator::Hybrid { denoise_rank: None },
        other => bail!(
            "unknown method {other:?}; expected gleser-watson, gleser-watson-denoised, \
             least-squares, hybrid, or all"
        ),
    })
}

/// Parses a sigma grid: either an inclusive integer range `a..b` or a
/// comma-separated list of values.
pub fn parse_sigmas(spec: &str) -> Result<Vec<f64>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: i64 = lo.trim().parse()?;
        let hi: i64 = hi.trim().parse()?;
        if hi < lo {
            bail!("sigma range {spec:?} is empty");
        }
        return Ok((lo..=hi).map(|v| v as f64).collect());
    }
    let out: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        bail!("no sigmas given");
    }
    Ok(out)
}

/// Parses `lo,hi` into an origin box.
pub fn parse_box(spec: &str) -> Result<(f64, f64)> {
    let Some((lo, hi)) = spec.split_once(',') else {
        bail!("origin box must be `lo,hi`, got {spec:?}");
    };
    let lo: f64 = lo.trim().parse()?;
    let hi: f64 = hi.trim().parse()?;
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        bail!("origin box needs lo < hi, got {spec:?}");
    }
    Ok((lo, hi))
}
