//! Correlation diagnostics of dense vectors across TT cuts, and the
//! benchmark harness that times both identification routes.

use serde::{Deserialize, Serialize};

use crate::basis::Dictionary;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;
use crate::mandy::{mandy_identify, relative_error, sindy_identify, CoefficientTensor, Method};
use crate::systems::{generate_snapshots, Sampling, SnapshotSpec, System};
use crate::tt::DenseTensor;

/// Per-cut spectra of `R_l = tr_{l+1..d}(x x^T)` for the cuts `l = 1..d-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationProfile {
    pub mode_sizes: Vec<usize>,
    /// Eigenvalues of `R_l`, descending, padded with zeros to the full row
    /// dimension `n_1 * .. * n_l`.
    pub spectra: Vec<Vec<f64>>,
    /// `eps_of_r[l][r]` = sum of the eigenvalues beyond the first `r`.
    pub eps_of_r: Vec<Vec<f64>>,
    /// `2 log tr(R_l^{1/2})`.
    pub renyi_half: Vec<f64>,
    /// `bound[r] = 2 sum_l eps_l(r)`, for `r` up to the largest cut dimension.
    pub bound: Vec<f64>,
}

impl TruncationProfile {
    pub fn cuts(&self) -> usize {
        self.spectra.len()
    }

    /// `eps_l(r)`, zero once `r` reaches the cut dimension.
    pub fn eps(&self, cut: usize, r: usize) -> f64 {
        let e = &self.eps_of_r[cut];
        e.get(r).copied().unwrap_or(0.0)
    }

    pub fn bound_at(&self, r: usize) -> f64 {
        self.bound.get(r).copied().unwrap_or(0.0)
    }
}

/// Profile of `x` reshaped to `modes` (first index fastest).
pub fn truncation_profile(x: &[f64], modes: &[usize], cap: usize) -> Result<TruncationProfile> {
    if modes.len() < 2 {
        return Err(Error::InvalidArgument("need at least two modes to form a cut".into()));
    }
    let n = modes
        .iter()
        .try_fold(1usize, |acc, &k| acc.checked_mul(k))
        .unwrap_or(usize::MAX);
    if n > cap {
        return Err(Error::SizeCapExceeded { requested: n, cap });
    }
    let tensor = DenseTensor::new(modes.to_vec(), x.to_vec())?;
    let mut spectra = Vec::with_capacity(modes.len() - 1);
    for l in 1..modes.len() {
        let unf = tensor.matricize(l)?;
        let rows = unf.matrix.nrows();
        // the Gram matrix eigenvalues are the squared singular values of the unfolding
        let mut mu: Vec<f64> = linalg::singular_values(unf.matrix.as_ref())?
            .into_iter()
            .map(|s| s * s)
            .collect();
        mu.resize(rows, 0.0);
        spectra.push(mu);
    }
    let eps_of_r: Vec<Vec<f64>> = spectra
        .iter()
        .map(|mu| {
            let mut tail = vec![0.0; mu.len() + 1];
            for i in (0..mu.len()).rev() {
                tail[i] = tail[i + 1] + mu[i];
            }
            tail
        })
        .collect();
    let renyi_half = spectra
        .iter()
        .map(|mu| 2.0 * mu.iter().map(|v| v.sqrt()).sum::<f64>().ln())
        .collect();
    let widest = eps_of_r.iter().map(Vec::len).max().unwrap_or(1);
    let bound = (0..widest)
        .map(|r| 2.0 * eps_of_r.iter().map(|e| e.get(r).copied().unwrap_or(0.0)).sum::<f64>())
        .collect();
    Ok(TruncationProfile {
        mode_sizes: modes.to_vec(),
        spectra,
        eps_of_r,
        renyi_half,
        bound,
    })
}

/// One grid point: a data set plus the routes to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCell {
    #[serde(flatten)]
    pub system: System,
    pub sampling: Sampling,
    #[serde(default)]
    pub epsilon: f64,
    /// Defaults to the system's natural dictionary.
    #[serde(default)]
    pub dictionary: Option<Dictionary>,
    pub methods: Vec<Method>,
}

/// Cartesian grid over `d`, `m` and `epsilon` for uniformly sampled states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchGrid {
    /// `"fpu"` or `"kuramoto"`.
    pub system: String,
    pub d: Vec<usize>,
    pub m: Vec<usize>,
    #[serde(default = "default_epsilons")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Sampling box; the system default when absent.
    #[serde(default)]
    pub low: Option<f64>,
    #[serde(default)]
    pub high: Option<f64>,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}

fn default_methods() -> Vec<Method> {
    vec![Method::Sindy, Method::Mandy]
}

/// The system of the given family and dimension with default parameters.
pub fn system_by_name(name: &str, d: usize) -> Result<System> {
    use crate::systems::{ChuaParams, FpuParams, KuramotoParams};
    let s = match name {
        "chua" => {
            if d != 3 {
                return Err(Error::InvalidArgument("Chua's circuit has d = 3".into()));
            }
            System::Chua(ChuaParams::default())
        }
        "fpu" => System::Fpu(FpuParams::new(d)),
        "kuramoto" => {
            let p = KuramotoParams::default();
            System::Kuramoto(KuramotoParams::equidistant(d, p.k, p.h))
        }
        other => return Err(Error::InvalidArgument(format!("unknown system '{other}'"))),
    };
    s.validate()?;
    Ok(s)
}

/// Default uniform sampling box of a system family.
pub fn default_box(system: &System) -> (f64, f64) {
    match system {
        System::Kuramoto(_) => (0.0, 2.0 * std::f64::consts::PI),
        System::Chua(_) => (-1.0, 1.0),
        System::Fpu(_) => (-0.1, 0.1),
    }
}

impl BenchGrid {
    /// Cells in `d`-major, then `m`, then `epsilon` order. The matrix route
    /// does not depend on `epsilon`, so it is attached to the first
    /// `epsilon` of every `(d, m)` pair only.
    pub fn expand(&self) -> Result<Vec<BenchCell>> {
        if self.d.is_empty() || self.m.is_empty() || self.epsilon.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidArgument("benchmark grid has an empty axis".into()));
        }
        let mut cells = Vec::new();
        for &d in &self.d {
            let system = system_by_name(&self.system, d)?;
            let (dl, dh) = default_box(&system);
            let (low, high) = (self.low.unwrap_or(dl), self.high.unwrap_or(dh));
            for &m in &self.m {
                for (k, &epsilon) in self.epsilon.iter().enumerate() {
                    let methods: Vec<Method> = self
                        .methods
                        .iter()
                        .copied()
                        .filter(|&mt| mt == Method::Mandy || (mt == Method::Sindy && k == 0))
                        .collect();
                    if methods.is_empty() {
                        continue;
                    }
                    cells.push(BenchCell {
                        system: system.clone(),
                        sampling: Sampling::Uniform { m, low, high },
                        epsilon,
                        dictionary: None,
                        methods,
                    });
                }
            }
        }
        Ok(cells)
    }
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub d: usize,
    pub m: usize,
    pub epsilon: f64,
    pub seconds: Option<f64>,
    /// Basis storage: nonzeros of the basis TT or entries of the dense matrix.
    pub storage_entries: usize,
    /// Against the exact coefficients, when known.
    pub rel_error: Option<f64>,
    /// `ok`, `skipped` or `failed: <reason>`.
    pub status: String,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of a cell's data, derived from the master seed and the data
/// description only, so every route of a `(system, sampling)` pair sees the
/// same snapshots.
pub fn cell_seed(master: u64, system: &System, sampling: &Sampling) -> u64 {
    let key = serde_json::to_string(&(system, sampling)).unwrap_or_default();
    // FNV-1a, stable across platforms and toolchains
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(master ^ h)
}

/// Runs every cell. Cells run one after another so that wall times are not
/// contended; each solve uses `exec` internally. Matrix routes whose dense
/// basis would exceed `cap` entries are recorded as skipped, and failures
/// are recorded without stopping the run.
pub fn run_benchmark(cells: &[BenchCell], seed: u64, cap: usize, exec: Execution) -> Vec<BenchRecord> {
    let mut out = Vec::new();
    for cell in cells {
        run_cell(cell, seed, cap, exec, &mut out);
    }
    out
}

fn failed(method: Method, d: usize, m: usize, epsilon: f64, storage: usize, e: &Error) -> BenchRecord {
    BenchRecord {
        method,
        d,
        m,
        epsilon,
        seconds: None,
        storage_entries: storage,
        rel_error: None,
        status: format!("failed: {e}"),
    }
}

fn run_cell(cell: &BenchCell, seed: u64, cap: usize, exec: Execution, out: &mut Vec<BenchRecord>) {
    let d = cell.system.dim();
    let dict = cell.dictionary.clone().unwrap_or_else(|| cell.system.default_dictionary());
    let m_hint = match &cell.sampling {
        Sampling::Uniform { m, .. } => *m,
        Sampling::Trajectory { grid, .. } => grid.len(),
    };
    let n = dict.feature_count(d);
    let dense = n.saturating_mul(m_hint);
    let nnz = dict.mode_sizes(d).iter().sum::<usize>() * m_hint + m_hint;
    let storage = |method: Method| if method == Method::Sindy { dense } else { nnz };

    let spec = SnapshotSpec {
        system: cell.system.clone(),
        sampling: cell.sampling.clone(),
        seed: cell_seed(seed, &cell.system, &cell.sampling),
    };
    let data = match dict.validate().and_then(|_| generate_snapshots(&spec)) {
        Ok(s) => s,
        Err(e) => {
            for &method in &cell.methods {
                out.push(failed(method, d, m_hint, cell.epsilon, storage(method), &e));
            }
            return;
        }
    };
    let m = data.len();
    let exact = cell.system.exact_coefficients(&dict).ok().map(|tt| {
        let mut c = CoefficientTensor::exact(tt, dict.clone());
        c.meta.d = d;
        c
    });
    for &method in &cell.methods {
        // the matrix route is always solved without thresholding
        let epsilon = if method == Method::Sindy { 0.0 } else { cell.epsilon };
        let fit = match method {
            Method::Mandy => {
                mandy_identify(data.x.as_ref(), data.y.as_ref(), &dict, cell.epsilon, exec).map(|c| (c, nnz))
            }
            Method::Sindy => {
                if dense > cap {
                    out.push(BenchRecord {
                        method,
                        d,
                        m,
                        epsilon,
                        seconds: None,
                        storage_entries: dense,
                        rel_error: None,
                        status: "skipped".into(),
                    });
                    continue;
                }
                sindy_identify(data.x.as_ref(), data.y.as_ref(), &dict, 0.0, cap, exec).map(|(c, _)| (c, dense))
            }
            Method::Exact => Err(Error::InvalidArgument("the exact tensor is not a fitting route".into())),
        };
        match fit {
            Ok((c, storage_entries)) => {
                let rel_error = exact.as_ref().and_then(|e| relative_error(&c, e).ok());
                out.push(BenchRecord {
                    method,
                    d,
                    m,
                    epsilon,
                    seconds: Some(c.meta.wall_time),
                    storage_entries,
                    rel_error,
                    status: "ok".into(),
                });
            }
            Err(e) => out.push(failed(method, d, m, epsilon, storage(method), &e)),
        }
    }
}
