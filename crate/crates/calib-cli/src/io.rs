//! File formats: sample CSV, transform JSON, and simulation reports.
//!
//! Sample CSV is the transpose of the internal layout: rows are samples,
//! columns are features, with a mandatory header row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use calib_core::simulate::{ErrorReport, McConfig};
use calib_core::{AffineTransform, DataMatrix, Matrix};
use serde::{Deserialize, Serialize};

/// On-disk representation of an [`AffineTransform`], row-major `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformFile {
    pub q: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub denoise_rank: Option<usize>,
}

impl TransformFile {
    pub fn from_transform(t: &AffineTransform, method: Option<String>, denoise_rank: Option<usize>) -> Self {
        let q = t.dim();
        let a = (0..q).map(|i| t.a().row(i).to_vec()).collect();
        Self {
            q,
            a,
            b: t.b().to_vec(),
            method,
            denoise_rank,
        }
    }

    pub fn to_transform(&self) -> Result<AffineTransform> {
        if self.a.len() != self.q || self.a.iter().any(|r| r.len() != self.q) {
            bail!("transform file: `a` must be a {0}x{0} matrix", self.q);
        }
        let flat: Vec<f64> = self.a.iter().flatten().copied().collect();
        let a = Matrix::new(self.q, self.q, flat)?;
        Ok(AffineTransform::new(a, self.b.clone())?)
    }
}

pub fn read_transform(path: &Path) -> Result<AffineTransform> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let tf: TransformFile = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing transform JSON {}", path.display()))?;
    tf.to_transform()
}

pub fn write_transform(
    path: &Path,
    t: &AffineTransform,
    method: Option<String>,
    denoise_rank: Option<usize>,
) -> Result<()> {
    let tf = TransformFile::from_transform(t, method, denoise_rank);
    let mut out = Vec::new();
    serde_json::to_writer_pretty(&mut out, &tf)?;
    out.push(b'\n');
    write_atomic(path, &out)
}

/// Reads sample CSV (rows = samples) into the internal column-sample layout.
pub fn read_samples(path: &Path) -> Result<DataMatrix> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_samples_from(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

pub fn read_samples_from<R: Read>(reader: R) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let q = rdr.headers()?.len();
    if q == 0 {
        bail!("sample CSV has an empty header");
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != q {
            bail!("row {}: expected {} fields, found {}", i + 2, q, record.len());
        }
        let row: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("row {}: non-numeric field", i + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("sample CSV contains no data rows");
    }
    let n = rows.len();
    let m = Matrix::from_fn(q, n, |i, j| rows[j][i]);
    Ok(DataMatrix::for_apply(m))
}

/// Writes samples as CSV with features as columns `f1..fq`.
pub fn write_samples(path: &Path, data: &DataMatrix) -> Result<()> {
    let mut out = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut out);
        let header: Vec<String> = (1..=data.dim()).map(|i| format!("f{i}")).collect();
        wtr.write_record(&header)?;
        for j in 0..data.n_samples() {
            let row: Vec<String> = (0..data.dim())
                .map(|i| fmt_f64(data.values()[(i, j)]))
                .collect();
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
    }
    write_atomic(path, &out)
}

/// Shortest-roundtrip float formatting, shared by every CSV writer so equal
/// values always produce equal bytes.
pub fn fmt_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

/// Simulation report CSV: one row per (sigma, method) cell.
pub fn report_to_csv(report: &ErrorReport) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut out);
        wtr.write_record(["sigma", "method", "mean_ex", "mean_ey", "std_ex", "std_ey", "skips"])?;
        for cell in &report.cells {
            wtr.write_record([
                fmt_f64(cell.sigma),
                cell.estimator.label().to_string(),
                fmt_f64(cell.mean_ex),
                fmt_f64(cell.mean_ey),
                fmt_f64(cell.std_ex),
                fmt_f64(cell.std_ey),
                cell.skips.to_string(),
            ])?;
        }
        wtr.flush()?;
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    config: ConfigEcho<'a>,
    cells: Vec<CellJson<'a>>,
}

#[derive(Debug, Serialize)]
struct ConfigEcho<'a> {
    runs: usize,
    samples: usize,
    dim: usize,
    transform: TransformFile,
    sigmas: &'a [f64],
    methods: Vec<&'static str>,
    seed: u64,
    origin_box: (f64, f64),
}

#[derive(Debug, Serialize)]
struct CellJson<'a> {
    sigma: f64,
    method: &'static str,
    mean_ex: f64,
    mean_ey: f64,
    std_ex: f64,
    std_ey: f64,
    skips: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<&'a Vec<(f64, f64)>>,
}

/// Simulation report JSON with a full config echo.
pub fn report_to_json(cfg: &McConfig, report: &ErrorReport) -> Result<Vec<u8>> {
    let doc = ReportJson {
        config: ConfigEcho {
            runs: cfg.runs,
            samples: cfg.samples,
            dim: cfg.dim,
            transform: TransformFile::from_transform(&cfg.transform, None, None),
            sigmas: &cfg.sigmas,
            methods: cfg.estimators.iter().map(|e| e.label()).collect(),
            seed: cfg.seed,
            origin_box: cfg.origin_box,
        },
        cells: report
            .cells
            .iter()
            .map(|c| CellJson {
                sigma: c.sigma,
                method: c.estimator.label(),
                mean_ex: c.mean_ex,
                mean_ey: c.mean_ey,
                std_ex: c.std_ex,
                std_ey: c.std_ey,
                skips: c.skips,
                raw: c.raw.as_ref(),
            })
            .collect(),
    };
    let mut out = Vec::new();
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp~");
    {
        let mut f = BufWriter::new(
            File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?,
        );
        f.write_all(bytes)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
