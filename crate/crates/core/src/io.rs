//! File formats: tensor trains and pseudoinverses as JSON, snapshot sets as
//! CSV plus a JSON sidecar, benchmark tables as CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use faer::Mat;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::basis::Dictionary;
use crate::diagnostics::BenchRecord;
use crate::error::{Error, Result};
use crate::mandy::{CoefficientTensor, Coefficients, FitMeta};
use crate::pinv::TTPseudoinverse;
use crate::systems::{SnapshotMeta, SnapshotSet, System};
use crate::tt::{Core, TensorTrain};

/// Core `i` is nested as `[r_{i-1}][n_i][r_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtDocument {
    pub mode_sizes: Vec<usize>,
    pub ranks: Vec<usize>,
    pub cores: Vec<Vec<Vec<Vec<f64>>>>,
}

fn nest(core: &Core) -> Vec<Vec<Vec<f64>>> {
    let (r0, n, r1) = core.shape();
    (0..r0)
        .map(|a| (0..n).map(|x| (0..r1).map(|b| core.get(a, x, b)).collect()).collect())
        .collect()
}

fn unnest(nested: &[Vec<Vec<f64>>], r0: usize, n: usize, r1: usize) -> Result<Core> {
    let bad = || Error::Format(format!("core is not {r0} x {n} x {r1}"));
    if nested.len() != r0 {
        return Err(bad());
    }
    let mut core = Core::zeros(r0, n, r1);
    for (a, plane) in nested.iter().enumerate() {
        if plane.len() != n {
            return Err(bad());
        }
        for (x, fiber) in plane.iter().enumerate() {
            if fiber.len() != r1 {
                return Err(bad());
            }
            for (b, &v) in fiber.iter().enumerate() {
                core.set(a, x, b, v);
            }
        }
    }
    Ok(core)
}

impl From<&TensorTrain> for TtDocument {
    fn from(t: &TensorTrain) -> Self {
        Self {
            mode_sizes: t.mode_sizes(),
            ranks: t.ranks(),
            cores: t.cores().iter().map(nest).collect(),
        }
    }
}

impl TtDocument {
    pub fn to_tensor_train(&self) -> Result<TensorTrain> {
        let d = self.mode_sizes.len();
        if self.ranks.len() != d + 1 || self.cores.len() != d {
            return Err(Error::Format(format!(
                "{} modes need {} ranks and {d} cores",
                d,
                d + 1
            )));
        }
        let cores = (0..d)
            .map(|i| unnest(&self.cores[i], self.ranks[i], self.mode_sizes[i], self.ranks[i + 1]))
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::new(cores)
    }
}

/// Left cores, an `s x m` right factor (nested by row) and the kept
/// singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinvDocument {
    pub feature_modes: Vec<usize>,
    pub snapshots: usize,
    pub threshold: f64,
    pub singular_values: Vec<f64>,
    pub left_ranks: Vec<usize>,
    pub left_cores: Vec<Vec<Vec<Vec<f64>>>>,
    pub right_core: Vec<Vec<f64>>,
}

impl From<&TTPseudoinverse> for PinvDocument {
    fn from(p: &TTPseudoinverse) -> Self {
        let right = p.right_core();
        let mut left_ranks: Vec<usize> = p.left_cores().iter().map(Core::rank_left).collect();
        left_ranks.push(p.rank());
        Self {
            feature_modes: p.feature_modes(),
            snapshots: p.snapshots(),
            threshold: p.threshold(),
            singular_values: p.singular_values().to_vec(),
            left_ranks,
            left_cores: p.left_cores().iter().map(nest).collect(),
            right_core: (0..right.nrows())
                .map(|a| (0..right.ncols()).map(|k| right[(a, k)]).collect())
                .collect(),
        }
    }
}

impl PinvDocument {
    pub fn to_pseudoinverse(&self) -> Result<TTPseudoinverse> {
        let d = self.feature_modes.len();
        if self.left_ranks.len() != d + 1 || self.left_cores.len() != d {
            return Err(Error::Format("pseudoinverse ranks and cores disagree with its modes".into()));
        }
        let cores = (0..d)
            .map(|i| unnest(&self.left_cores[i], self.left_ranks[i], self.feature_modes[i], self.left_ranks[i + 1]))
            .collect::<Result<Vec<_>>>()?;
        let (s, m) = (self.singular_values.len(), self.snapshots);
        if self.right_core.len() != s || self.right_core.iter().any(|row| row.len() != m) {
            return Err(Error::Format(format!("right factor must be {s} x {m}")));
        }
        let mut right = vec![0.0; s * m];
        for (a, row) in self.right_core.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                right[a + s * k] = v;
            }
        }
        TTPseudoinverse::from_parts(cores, right, self.singular_values.clone(), self.threshold, m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum CoefficientData {
    Tt(TtDocument),
    /// `rows[i][j]`: feature `i`, output `j`.
    Dense { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientDocument {
    pub meta: FitMeta,
    pub dictionary: Dictionary,
    /// The system the data came from, when known; lets readers build the
    /// exact tensor for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<System>,
    pub coefficients: CoefficientData,
}

impl From<&CoefficientTensor> for CoefficientDocument {
    fn from(c: &CoefficientTensor) -> Self {
        let coefficients = match &c.coefficients {
            Coefficients::Tt(t) => CoefficientData::Tt(t.into()),
            Coefficients::Dense(xi) => CoefficientData::Dense {
                rows: (0..xi.nrows())
                    .map(|i| (0..xi.ncols()).map(|j| xi[(i, j)]).collect())
                    .collect(),
            },
        };
        Self {
            meta: c.meta.clone(),
            dictionary: c.dictionary.clone(),
            system: None,
            coefficients,
        }
    }
}

impl CoefficientDocument {
    pub fn to_coefficients(&self) -> Result<CoefficientTensor> {
        self.dictionary.validate()?;
        let n = self.dictionary.feature_count(self.meta.d);
        let coefficients = match &self.coefficients {
            CoefficientData::Tt(doc) => {
                let t = doc.to_tensor_train()?;
                let modes = t.mode_sizes();
                if modes[..modes.len() - 1] != self.dictionary.mode_sizes(self.meta.d)[..] {
                    return Err(Error::Format("coefficient modes do not match the dictionary".into()));
                }
                Coefficients::Tt(t)
            }
            CoefficientData::Dense { rows } => {
                let outputs = rows.first().map_or(0, Vec::len);
                if rows.len() != n || outputs == 0 || rows.iter().any(|r| r.len() != outputs) {
                    return Err(Error::Format(format!("dense coefficients must be {n} rows of equal length")));
                }
                Coefficients::Dense(Mat::from_fn(n, outputs, |i, j| rows[i][j]))
            }
        };
        Ok(CoefficientTensor {
            coefficients,
            dictionary: self.dictionary.clone(),
            meta: self.meta.clone(),
        })
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

pub fn write_tt(t: &TensorTrain, path: &Path) -> Result<()> {
    write_json(&TtDocument::from(t), path)
}

pub fn read_tt(path: &Path) -> Result<TensorTrain> {
    read_json::<TtDocument>(path)?.to_tensor_train()
}

pub fn write_coefficients(c: &CoefficientTensor, path: &Path) -> Result<()> {
    write_json(&CoefficientDocument::from(c), path)
}

pub fn read_coefficients(path: &Path) -> Result<CoefficientTensor> {
    read_json::<CoefficientDocument>(path)?.to_coefficients()
}

/// Header `x_1..x_d, y_1..y_d`, one row per snapshot.
pub fn write_snapshot_csv(set: &SnapshotSet, path: &Path) -> Result<()> {
    let d = set.dim();
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=d)
        .map(|i| format!("x_{i}"))
        .chain((1..=d).map(|i| format!("y_{i}")))
        .collect();
    w.write_record(&header)?;
    for k in 0..set.len() {
        let row: Vec<String> = (0..d)
            .map(|i| set.x[(i, k)])
            .chain((0..d).map(|i| set.y[(i, k)]))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.csv` data and its `<stem>.json` metadata.
pub fn write_snapshots(set: &SnapshotSet, csv_path: &Path, meta_path: &Path) -> Result<()> {
    write_snapshot_csv(set, csv_path)?;
    write_json(&set.meta, meta_path)
}

/// Reads the state and derivative matrices (`d x m` each) from a snapshot CSV.
pub fn read_snapshot_csv(path: &Path) -> Result<(Mat<f64>, Mat<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols == 0 || cols % 2 != 0 {
        return Err(Error::Format(format!("snapshot CSV needs 2d columns, found {cols}")));
    }
    let d = cols / 2;
    for (i, h) in header.iter().enumerate() {
        let want = if i < d { format!("x_{}", i + 1) } else { format!("y_{}", i - d + 1) };
        if h.trim() != want {
            return Err(Error::Format(format!("column {} is '{h}', expected '{want}'", i + 1)));
        }
    }
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("row {} has a non-finite value", line + 1)));
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::Format("snapshot CSV has no rows".into()));
    }
    let m = values.len();
    Ok((
        Mat::from_fn(d, m, |i, k| values[k][i]),
        Mat::from_fn(d, m, |i, k| values[k][d + i]),
    ))
}

pub fn read_snapshots(csv_path: &Path, meta_path: &Path) -> Result<SnapshotSet> {
    let (x, y) = read_snapshot_csv(csv_path)?;
    let meta: SnapshotMeta = read_json(meta_path)?;
    if meta.system.dim() != x.nrows() {
        return Err(Error::Format(format!(
            "metadata describes d = {}, data has d = {}",
            meta.system.dim(),
            x.nrows()
        )));
    }
    Ok(SnapshotSet { x, y, meta })
}

pub fn write_bench_csv(rows: &[BenchRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "method",
            "d",
            "m",
            "epsilon",
            "seconds",
            "storage_entries",
            "rel_error",
            "status",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<BenchRecord>, _>>()?;
    Ok(rows)
}
