//! Multi-sensor board pipeline: ingest heater-cycle recordings, aggregate
//! them into two-feature samples, normalize, and run all-pairs calibration
//! transfer with per-source error summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use calib_core::estimate::apply_transform;
use calib_core::simulate::Estimator;
use calib_core::{DataMatrix, Matrix};
use serde::Serialize;

/// Heater steps per cycle; the first half runs at 200 C, the second at 400 C.
pub const STEPS_PER_CYCLE: u8 = 10;

/// One raw heater-step reading.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRow {
    pub timestamp_ms: i64,
    pub heater_step: u8,
    pub raw_value: f64,
}

/// All raw readings of one sensor, in file order.
#[derive(Debug, Clone)]
pub struct RawRecording {
    pub sensor_id: u32,
    pub label: String,
    pub rows: Vec<CycleRow>,
}

/// Aggregated q=2 samples of one sensor: feature 1 is the mean of the five
/// 200 C readings per cycle, feature 2 the mean of the five 400 C readings.
#[derive(Debug, Clone)]
pub struct SensorSamples {
    pub sensor_id: u32,
    pub samples: DataMatrix,
    /// Cycles dropped because a heater step was missing or out of order.
    pub dropped_cycles: usize,
    /// Per-feature `(min, max)` recorded by [`normalize_featurewise`].
    pub bounds: Option<Vec<(f64, f64)>>,
}

/// All K x K mean errors of one method, plus the per-source means.
#[derive(Debug, Clone, Serialize)]
pub struct PairwiseErrorTable {
    pub method: String,
    pub sensor_ids: Vec<u32>,
    /// `errors[j][k]` is the mean error transferring source j onto target k.
    pub errors: Vec<Vec<f64>>,
    /// Row means over all K targets, including the self pair.
    pub per_source: Vec<f64>,
}

/// Per-source means of every compared method jointly rescaled so the global
/// minimum maps to 0 and the global maximum to 1.
#[derive(Debug, Clone, Serialize)]
pub struct BoardSummary {
    pub sensor_ids: Vec<u32>,
    pub methods: Vec<String>,
    /// `normalized[m][j]`, same method order as `methods`.
    pub normalized: Vec<Vec<f64>>,
    pub raw: Vec<Vec<f64>>,
    pub min: f64,
    pub max: f64,
}

/// Reads board CSV (`sensor_id,timestamp_ms,heater_step,raw_value,label`),
/// transparently gunzipping `.gz` paths. Returns one recording per sensor,
/// ordered by sensor id.
pub fn ingest(path: &Path) -> Result<Vec<RawRecording>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::read::GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    ingest_from(reader).with_context(|| format!("reading {}", path.display()))
}

pub fn ingest_from<R: Read>(reader: R) -> Result<Vec<RawRecording>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["sensor_id", "timestamp_ms", "heater_step", "raw_value", "label"];
    let actual: Vec<&str> = headers.iter().map(str::trim).collect();
    if actual != expected {
        bail!("unexpected header {:?}; expected {:?}", actual, expected);
    }
    let mut recordings: BTreeMap<u32, RawRecording> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("").trim();
        let sensor_id: u32 = field(0)
            .parse()
            .with_context(|| format!("line {line}: bad sensor_id {:?}", field(0)))?;
        let timestamp_ms: i64 = field(1)
            .parse()
            .with_context(|| format!("line {line}: bad timestamp_ms {:?}", field(1)))?;
        let heater_step: u8 = field(2)
            .parse()
            .with_context(|| format!("line {line}: bad heater_step {:?}", field(2)))?;
        if !(1..=STEPS_PER_CYCLE).contains(&heater_step) {
            bail!("line {line}: heater_step {heater_step} outside 1..={STEPS_PER_CYCLE}");
        }
        let raw_value: f64 = field(3)
            .parse()
            .with_context(|| format!("line {line}: bad raw_value {:?}", field(3)))?;
        if !raw_value.is_finite() {
            bail!("line {line}: non-finite raw_value");
        }
        let label = field(4).to_string();
        let rec = recordings.entry(sensor_id).or_insert_with(|| RawRecording {
            sensor_id,
            label: label.clone(),
            rows: Vec::new(),
        });
        rec.rows.push(CycleRow {
            timestamp_ms,
            heater_step,
            raw_value,
        });
    }
    if recordings.is_empty() {
        bail!("no data rows");
    }
    Ok(recordings.into_values().collect())
}

/// Collapses heater cycles into q=2 samples. A cycle is a run of steps
/// 1..=10 in order; on any break the partial cycle is dropped and counted.
pub fn aggregate(rec: &RawRecording) -> Result<SensorSamples> {
    let mut samples: Vec<[f64; 2]> = Vec::new();
    let mut dropped = 0usize;
    let mut next_step: u8 = 1;
    let mut skipping = false;
    let mut low_sum = 0.0;
    let mut high_sum = 0.0;
    let half = f64::from(STEPS_PER_CYCLE / 2);
    for row in &rec.rows {
        if row.heater_step != next_step {
            // a broken cycle or the start of a stray fragment; count it once
            // and resynchronize on the next cycle start
            if next_step != 1 || !skipping {
                dropped += 1;
            }
            if row.heater_step != 1 {
                next_step = 1;
                skipping = true;
                continue;
            }
            low_sum = 0.0;
            high_sum = 0.0;
        }
        skipping = false;
        if row.heater_step <= STEPS_PER_CYCLE / 2 {
            low_sum += row.raw_value;
        } else {
            high_sum += row.raw_value;
        }
        if row.heater_step == STEPS_PER_CYCLE {
            samples.push([low_sum / half, high_sum / half]);
            low_sum = 0.0;
            high_sum = 0.0;
            next_step = 1;
        } else {
            next_step = row.heater_step + 1;
        }
    }
    if next_step != 1 {
        dropped += 1;
    }
    if samples.is_empty() {
        bail!(
            "sensor {}: no complete heater cycles ({dropped} partial)",
            rec.sensor_id
        );
    }
    let n = samples.len();
    let m = Matrix::from_fn(2, n, |i, j| samples[j][i]);
    Ok(SensorSamples {
        sensor_id: rec.sensor_id,
        samples: DataMatrix::for_apply(m),
        dropped_cycles: dropped,
        bounds: None,
    })
}

/// Per-feature min-max rescaling to [0, 1] using the sensor's own bounds,
/// which are retained for de-normalization.
pub fn normalize_featurewise(s: &SensorSamples) -> Result<SensorSamples> {
    let v = s.samples.values();
    let mut bounds = Vec::with_capacity(v.rows());
    for i in 0..v.rows() {
        let row = v.row(i);
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            bail!("sensor {}: feature {} is constant, cannot normalize", s.sensor_id, i + 1);
        }
        bounds.push((min, max));
    }
    let m = Matrix::from_fn(v.rows(), v.cols(), |i, j| {
        (v[(i, j)] - bounds[i].0) / (bounds[i].1 - bounds[i].0)
    });
    Ok(SensorSamples {
        sensor_id: s.sensor_id,
        samples: DataMatrix::for_apply(m),
        dropped_cycles: s.dropped_cycles,
        bounds: Some(bounds),
    })
}

/// Mean error transferring source j onto target k with the given estimator:
/// fit on the full paired data, then average `||T(x_j(i)) - y_k(i)||` over
/// the measured source samples.
pub fn pairwise_error(
    source: &SensorSamples,
    target: &SensorSamples,
    estimator: Estimator,
) -> Result<f64> {
    if source.samples.n_samples() != target.samples.n_samples() {
        bail!(
            "sensors {} and {} have {} vs {} samples; pairwise transfer needs aligned data",
            source.sensor_id,
            target.sensor_id,
            source.samples.n_samples(),
            target.samples.n_samples()
        );
    }
    let x = DataMatrix::for_estimation(source.samples.values().clone())?;
    let y = DataMatrix::for_estimation(target.samples.values().clone())?;
    let fit = estimator.fit(&x, &y)?;
    let mapped = apply_transform(&fit.transform, &source.samples)?;
    Ok(mean_distance(mapped.values(), target.samples.values()))
}

/// Direct distance between the (already normalized) source and target data,
/// with no fitted transform. The baseline row of the summary.
pub fn baseline_error(source: &SensorSamples, target: &SensorSamples) -> Result<f64> {
    if source.samples.n_samples() != target.samples.n_samples() {
        bail!(
            "sensors {} and {} have unequal sample counts",
            source.sensor_id,
            target.sensor_id
        );
    }
    Ok(mean_distance(source.samples.values(), target.samples.values()))
}

fn mean_distance(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.cols();
    let mut sum = 0.0;
    for j in 0..n {
        let mut d2 = 0.0;
        for i in 0..a.rows() {
            let d = a[(i, j)] - b[(i, j)];
            d2 += d * d;
        }
        sum += d2.sqrt();
    }
    sum / n as f64
}

pub const BASELINE_LABEL: &str = "feature-wise-normalized";

/// Runs all K^2 pairs (self pairs included) for every estimator, builds the
/// baseline row, and jointly rescales the per-source means so the global
/// minimum maps to 0 and the global maximum to 1.
pub fn evaluate_board(
    samples: &[SensorSamples],
    estimators: &[Estimator],
) -> Result<(Vec<PairwiseErrorTable>, BoardSummary)> {
    if samples.len() < 2 {
        bail!("board evaluation needs at least 2 sensors, got {}", samples.len());
    }
    let k = samples.len();
    let ids: Vec<u32> = samples.iter().map(|s| s.sensor_id).collect();

    let mut tables = Vec::with_capacity(estimators.len() + 1);
    for est in estimators {
        let mut errors = vec![vec![0.0; k]; k];
        for (j, src) in samples.iter().enumerate() {
            for (t, tgt) in samples.iter().enumerate() {
                errors[j][t] = pairwise_error(src, tgt, *est)
                    .with_context(|| format!("pair {} -> {}", src.sensor_id, tgt.sensor_id))?;
            }
        }
        tables.push(make_table(est.label().to_string(), &ids, errors));
    }
    let mut errors = vec![vec![0.0; k]; k];
    for (j, src) in samples.iter().enumerate() {
        for (t, tgt) in samples.iter().enumerate() {
            errors[j][t] = baseline_error(src, tgt)?;
        }
    }
    tables.push(make_table(BASELINE_LABEL.to_string(), &ids, errors));

    let raw: Vec<Vec<f64>> = tables.iter().map(|t| t.per_source.clone()).collect();
    let flat = raw.iter().flatten().copied();
    let min = flat.clone().fold(f64::INFINITY, f64::min);
    let max = flat.fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        bail!("degenerate per-source errors: min {min}, max {max}");
    }
    let normalized = raw
        .iter()
        .map(|row| row.iter().map(|v| (v - min) / (max - min)).collect())
        .collect();
    let summary = BoardSummary {
        sensor_ids: ids,
        methods: tables.iter().map(|t| t.method.clone()).collect(),
        normalized,
        raw,
        min,
        max,
    };
    Ok((tables, summary))
}

fn make_table(method: String, ids: &[u32], errors: Vec<Vec<f64>>) -> PairwiseErrorTable {
    let k = ids.len();
    let per_source = errors
        .iter()
        .map(|row| row.iter().sum::<f64>() / k as f64)
        .collect();
    PairwiseErrorTable {
        method,
        sensor_ids: ids.to_vec(),
        errors,
        per_source,
    }
}
