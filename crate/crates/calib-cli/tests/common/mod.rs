//! Shared fixtures: a synthetic 8-sensor board recording built by applying
//! known affine maps plus noise to one base signal.

use std::fmt::Write as _;

use calib_core::estimate::apply_transform;
use calib_core::{AffineTransform, DataMatrix, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Smooth two-feature base signal with nondegenerate spread.
pub fn base_signal(n: usize) -> DataMatrix {
    DataMatrix::for_apply(Matrix::from_fn(2, n, |i, j| {
        let t = j as f64 / n as f64;
        if i == 0 {
            2.0 + 1.5 * (4.0 * t).sin() + 3.0 * t
        } else {
            5.0 - 2.0 * t + 0.8 * (9.0 * t).cos()
        }
    }))
}

/// The known per-sensor maps; sensor 1 is the identity.
pub fn sensor_maps() -> Vec<AffineTransform> {
    let specs: [([f64; 4], [f64; 2]); 8] = [
        ([1.0, 0.0, 0.0, 1.0], [0.0, 0.0]),
        ([1.15, 0.05, -0.03, 0.92], [0.4, -0.2]),
        ([0.85, -0.08, 0.06, 1.10], [-0.3, 0.5]),
        ([1.30, 0.12, 0.02, 0.78], [0.1, 0.3]),
        ([0.95, 0.00, -0.10, 1.25], [-0.6, -0.4]),
        ([1.05, -0.15, 0.08, 0.88], [0.8, 0.1]),
        ([0.80, 0.07, -0.05, 1.02], [-0.2, -0.7]),
        ([1.20, -0.04, 0.11, 0.95], [0.5, 0.6]),
    ];
    specs
        .iter()
        .map(|(a, b)| {
            AffineTransform::new(Matrix::new(2, 2, a.to_vec()).unwrap(), b.to_vec()).unwrap()
        })
        .collect()
}

/// Per-sensor q=2 samples: known map applied to the base signal plus
/// Gaussian noise of the given sigma.
pub fn sensor_samples(n: usize, sigma: f64, seed: u64) -> Vec<DataMatrix> {
    let base = base_signal(n);
    sensor_maps()
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let clean = apply_transform(t, &base).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(seed ^ (k as u64 + 1));
            DataMatrix::for_apply(Matrix::from_fn(2, n, |i, j| {
                clean.values()[(i, j)] + sigma * rng.sample::<f64, _>(StandardNormal)
            }))
        })
        .collect()
}

/// Renders the samples as a raw board CSV: each sample becomes one heater
/// cycle whose five 200 C steps carry feature 1 and five 400 C steps carry
/// feature 2, so aggregation recovers the samples exactly.
pub fn board_csv(n: usize, sigma: f64, seed: u64) -> String {
    let sensors = sensor_samples(n, sigma, seed);
    let mut out = String::from("sensor_id,timestamp_ms,heater_step,raw_value,label\n");
    for (k, samples) in sensors.iter().enumerate() {
        let id = k + 1;
        let mut t: i64 = 0;
        for j in 0..n {
            for step in 1..=10u8 {
                let v = if step <= 5 {
                    samples.values()[(0, j)]
                } else {
                    samples.values()[(1, j)]
                };
                writeln!(out, "{id},{t},{step},{v},apple juice").unwrap();
                t += 1260;
            }
        }
    }
    out
}
