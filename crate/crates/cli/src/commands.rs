use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use mandy_core::basis::{BasisTensorTT, Dictionary};
use mandy_core::diagnostics::{run_benchmark, truncation_profile, BenchCell, BenchRecord};
use mandy_core::io::{self, CoefficientDocument, TtDocument};
use mandy_core::mandy::{mandy_identify, relative_error, sindy_identify, CoefficientTensor, Method};
use mandy_core::systems::{generate_snapshots, SnapshotSet, System};
use mandy_core::{Error, Execution};
use serde::{Deserialize, Serialize};

use crate::config::{MethodChoice, RunConfig};
use crate::{Failure, Outcome, CONFIG, SIMULATION, SOLVE};

trait Code<T> {
    fn code(self, code: i32) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Code<T> for std::result::Result<T, E> {
    fn code(self, code: i32) -> Outcome<T> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn emit<T: Serialize>(value: &T) -> Outcome<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).code(CONFIG)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).code(CONFIG),
        _ => Ok(()),
    }
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn simulate(cfg: &RunConfig) -> Outcome<()> {
    let spec = cfg.snapshot_spec().code(CONFIG)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("snapshots.csv"));
    let set = generate_snapshots(&spec).map_err(|e| Failure {
        code: if matches!(e, Error::StepFailure { .. }) { SIMULATION } else { CONFIG },
        error: e.into(),
    })?;
    io::write_snapshots(&set, &out, &sidecar(&out))
        .with_context(|| format!("writing {}", out.display()))
        .code(CONFIG)?;
    eprintln!("wrote {} snapshots of {} to {}", set.len(), set.meta.system.name(), out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub method: Method,
    pub epsilon: f64,
    pub lambda: f64,
    /// `||Y - Xi^T psi(X)||_F` on the training data.
    pub residual: f64,
    pub rel_error_vs_exact: Option<f64>,
    pub wall_time: f64,
    /// Entries of the basis representation the method works on.
    pub storage: usize,
    pub coefficient_storage: usize,
    pub coefficients: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifyReport {
    pub system: System,
    pub dictionary: Dictionary,
    pub d: usize,
    pub m: usize,
    pub fits: Vec<FitReport>,
    /// `||Xi_mandy - Xi_sindy|| / ||Xi_sindy||` when both ran.
    pub mutual_rel_diff: Option<f64>,
}

fn load_snapshots(cfg: &RunConfig) -> Outcome<SnapshotSet> {
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| anyhow!("identify needs --input <snapshots.csv>"))
        .code(CONFIG)?;
    io::read_snapshots(&input, &sidecar(&input))
        .with_context(|| format!("reading {} and its metadata", input.display()))
        .code(CONFIG)
}

fn residual(fit: &CoefficientTensor, data: &SnapshotSet) -> f64 {
    let pred = fit.evaluate_batch(data.x.as_ref());
    let mut acc = 0.0;
    for k in 0..data.len() {
        for i in 0..data.dim() {
            acc += (data.y[(i, k)] - pred[(i, k)]).powi(2);
        }
    }
    acc.sqrt()
}

fn exact_for(system: &System, dict: &Dictionary) -> Option<CoefficientTensor> {
    system.exact_coefficients(dict).ok().map(|tt| {
        let mut c = CoefficientTensor::exact(tt, dict.clone());
        c.meta.d = system.dim();
        c
    })
}

fn write_fit(fit: &CoefficientTensor, system: &System, path: &Path) -> Outcome<()> {
    let mut doc = CoefficientDocument::from(fit);
    doc.system = Some(system.clone());
    io::write_json(&doc, path)
        .with_context(|| format!("writing {}", path.display()))
        .code(CONFIG)
}

pub fn identify(cfg: &RunConfig) -> Outcome<()> {
    let data = load_snapshots(cfg)?;
    let system = data.meta.system.clone();
    let dict = cfg.dictionary(&system).code(CONFIG)?;
    let epsilon = cfg.epsilon().code(CONFIG)?;
    let lambda = cfg.lambda().code(CONFIG)?;
    let choice = cfg.method.unwrap_or(MethodChoice::Mandy);
    let cap = cfg.cap();
    let (d, m) = (data.dim(), data.len());
    let dense = dict.feature_count(d).saturating_mul(m);
    if choice != MethodChoice::Mandy && dense > cap {
        return Err(Failure {
            code: CONFIG,
            error: anyhow!(
                "the dense basis matrix would hold {dense} entries, over the cap of {cap}; use --method mandy or raise the cap"
            ),
        });
    }
    let prefix = cfg.output.clone().unwrap_or_else(|| PathBuf::from("fit"));
    let exact = exact_for(&system, &dict);
    let exec = Execution::default();
    let mut fits = Vec::new();
    let mut reports = Vec::new();
    for method in choice.methods() {
        let (fit, storage, res) = match method {
            Method::Mandy => {
                let fit = mandy_identify(data.x.as_ref(), data.y.as_ref(), &dict, epsilon, exec).code(SOLVE)?;
                let storage = BasisTensorTT::build(&dict, data.x.as_ref(), exec).code(SOLVE)?.nnz_count();
                let res = residual(&fit, &data);
                (fit, storage, res)
            }
            _ => {
                let (fit, raw) =
                    sindy_identify(data.x.as_ref(), data.y.as_ref(), &dict, lambda, cap, exec).code(SOLVE)?;
                (fit, dense, raw.residual)
            }
        };
        if !res.is_finite() {
            return Err(Failure {
                code: SOLVE,
                error: anyhow!("{} produced non-finite coefficients", method.as_str()),
            });
        }
        let path = with_suffix(&prefix, &format!(".{}.json", method.as_str()));
        write_fit(&fit, &system, &path)?;
        let rel_error_vs_exact = match &exact {
            Some(e) => Some(relative_error(&fit, e).code(SOLVE)?),
            None => None,
        };
        reports.push(FitReport {
            method,
            epsilon: if method == Method::Mandy { epsilon } else { 0.0 },
            lambda: if method == Method::Sindy { lambda } else { 0.0 },
            residual: res,
            rel_error_vs_exact,
            wall_time: fit.meta.wall_time,
            storage,
            coefficient_storage: fit.storage(),
            coefficients: path,
        });
        fits.push(fit);
    }
    let mutual_rel_diff = if fits.len() == 2 {
        Some(relative_error(&fits[1], &fits[0]).code(SOLVE)?)
    } else {
        None
    };
    let report = IdentifyReport {
        system,
        dictionary: dict,
        d,
        m,
        fits: reports,
        mutual_rel_diff,
    };
    let path = with_suffix(&prefix, ".report.json");
    io::write_json(&report, &path)
        .with_context(|| format!("writing {}", path.display()))
        .code(CONFIG)?;
    emit(&report)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparePair {
    pub a: String,
    pub b: String,
    /// `||a - b||_F / ||b||_F`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareReport {
    pub pairs: Vec<ComparePair>,
}

pub fn compare(cfg: &RunConfig) -> Outcome<()> {
    let mut inputs = cfg.inputs.clone().unwrap_or_default();
    if let Some(i) = &cfg.input {
        inputs.insert(0, i.clone());
    }
    let exact = cfg.exact.unwrap_or(false);
    if inputs.is_empty() || (inputs.len() < 2 && !exact) {
        return Err(Failure {
            code: CONFIG,
            error: anyhow!("compare needs two coefficient files, or one with --exact"),
        });
    }
    let docs = inputs
        .iter()
        .map(|p| {
            let doc: CoefficientDocument =
                io::read_json(p).with_context(|| format!("reading {}", p.display()))?;
            let fit = doc.to_coefficients().with_context(|| format!("decoding {}", p.display()))?;
            Ok((p.display().to_string(), doc.system, fit))
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .code(CONFIG)?;
    let mut pairs = Vec::new();
    for i in 0..docs.len() {
        for j in i + 1..docs.len() {
            let rel_error = relative_error(&docs[i].2, &docs[j].2).code(CONFIG)?;
            pairs.push(ComparePair {
                a: docs[i].0.clone(),
                b: docs[j].0.clone(),
                rel_error,
            });
        }
    }
    if exact {
        for (name, system, fit) in &docs {
            let system = system
                .as_ref()
                .ok_or_else(|| anyhow!("{name} does not record its system"))
                .code(CONFIG)?;
            let reference = exact_for(system, &fit.dictionary)
                .ok_or_else(|| anyhow!("no exact tensor for {} with this dictionary", system.name()))
                .code(CONFIG)?;
            pairs.push(ComparePair {
                a: name.clone(),
                b: "exact".into(),
                rel_error: relative_error(fit, &reference).code(CONFIG)?,
            });
        }
    }
    let report = CompareReport { pairs };
    if let Some(out) = &cfg.output {
        io::write_json(&report, out).code(CONFIG)?;
    }
    emit(&report)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchManifest {
    pub version: String,
    pub seed: u64,
    pub cap: usize,
    pub parallel: bool,
    pub cells: Vec<BenchCell>,
    pub rows: usize,
    pub skipped: usize,
    pub failed: usize,
    pub table: PathBuf,
}

pub fn bench(cfg: &RunConfig) -> Outcome<()> {
    let cells = cfg.bench_cells().code(CONFIG)?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("bench.csv"));
    let exec = Execution::default();
    let rows: Vec<BenchRecord> = run_benchmark(&cells, cfg.seed(), cfg.cap(), exec);
    io::write_bench_csv(&rows, &out)
        .with_context(|| format!("writing {}", out.display()))
        .code(CONFIG)?;
    let manifest = BenchManifest {
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed(),
        cap: cfg.cap(),
        parallel: exec.is_parallel(),
        cells,
        rows: rows.len(),
        skipped: rows.iter().filter(|r| r.status == "skipped").count(),
        failed: rows.iter().filter(|r| r.status.starts_with("failed")).count(),
        table: out.clone(),
    };
    io::write_json(&manifest, &out.with_extension("manifest.json")).code(CONFIG)?;
    eprintln!(
        "{} rows ({} skipped, {} failed) written to {}",
        manifest.rows,
        manifest.skipped,
        manifest.failed,
        out.display()
    );
    Ok(())
}

/// A plain vector with its mode sizes, first index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorDocument {
    pub modes: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn diagnose(cfg: &RunConfig) -> Outcome<()> {
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| anyhow!("diagnose needs --input <vector or tensor train JSON>"))
        .code(CONFIG)?;
    let text = std::fs::read_to_string(&input)
        .with_context(|| format!("reading {}", input.display()))
        .code(CONFIG)?;
    let (modes, values) = if let Ok(v) = serde_json::from_str::<VectorDocument>(&text) {
        (cfg.modes.clone().unwrap_or(v.modes), v.values)
    } else if let Ok(t) = serde_json::from_str::<TtDocument>(&text) {
        let tt = t.to_tensor_train().code(CONFIG)?;
        let full = tt.to_full_with_cap(cfg.cap()).code(CONFIG)?;
        (cfg.modes.clone().unwrap_or_else(|| tt.mode_sizes()), full.into_data())
    } else {
        return Err(Failure {
            code: CONFIG,
            error: anyhow!("{} is neither a vector document nor a tensor train", input.display()),
        });
    };
    let profile = truncation_profile(&values, &modes, cfg.cap()).code(CONFIG)?;
    match &cfg.output {
        Some(out) => io::write_json(&profile, out).code(CONFIG)?,
        None => emit(&profile)?,
    }
    Ok(())
}

pub fn require_exists(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    Ok(())
}
