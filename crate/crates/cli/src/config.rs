//! Run configuration shared by command-line flags and `--config` files.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use mandy_core::basis::Dictionary;
use mandy_core::diagnostics::{default_box, system_by_name, BenchCell, BenchGrid};
use mandy_core::mandy::Method;
use mandy_core::systems::{Sampling, SnapshotSpec, System, TimeGrid};
use mandy_core::tt::DEFAULT_DENSE_CAP;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Simulate,
    Identify,
    Compare,
    Bench,
    Diagnose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Sindy,
    Mandy,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Sindy => vec![Method::Sindy],
            MethodChoice::Mandy => vec![Method::Mandy],
            MethodChoice::Both => vec![Method::Sindy, Method::Mandy],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Uniform,
    Trajectory,
}

/// A family name (`"fpu"`) or a full `{ "system": .., "params": .. }` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Name(String),
    Full(System),
}

/// A preset name (`"fpu-cubic"`) or an explicit dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DictSpec {
    Preset(String),
    Custom(Dictionary),
}

/// Everything a run can be configured with. Fields that a command does not
/// use are ignored by it; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub system: Option<SystemSpec>,
    pub d: Option<usize>,
    pub sampling: Option<SamplingKind>,
    pub m: Option<usize>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub include_end: Option<bool>,
    pub x0: Option<Vec<f64>>,
    pub dictionary: Option<DictSpec>,
    pub method: Option<MethodChoice>,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub inputs: Option<Vec<PathBuf>>,
    pub exact: Option<bool>,
    pub grid: Option<BenchGrid>,
    pub ds: Option<Vec<usize>>,
    pub ms: Option<Vec<usize>>,
    pub epsilons: Option<Vec<f64>>,
    pub modes: Option<Vec<usize>>,
    pub cap: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    /// Values set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RunConfig) -> RunConfig {
        overlay!(self, top; command, system, d, sampling, m, low, high, t0, t_end, dt, include_end, x0,
            dictionary, method, epsilon, lambda, seed, input, output, inputs, exact, grid, ds, ms,
            epsilons, modes, cap);
        self
    }

    pub fn cap(&self) -> usize {
        self.cap.unwrap_or(DEFAULT_DENSE_CAP)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn system(&self) -> Result<System> {
        let system = match &self.system {
            None => bail!("no system given (chua, fpu or kuramoto)"),
            Some(SystemSpec::Full(s)) => s.clone(),
            Some(SystemSpec::Name(name)) => {
                let d = match (name.as_str(), self.d) {
                    ("chua", None) => 3,
                    (_, Some(d)) => d,
                    ("fpu", None) => 10,
                    ("kuramoto", None) => 10,
                    (other, None) => bail!("unknown system '{other}'"),
                };
                system_by_name(name, d)?
            }
        };
        system.validate()?;
        if let Some(d) = self.d {
            if d != system.dim() {
                bail!("d = {d} conflicts with the system dimension {}", system.dim());
            }
        }
        Ok(system)
    }

    /// Per-system defaults: Chua and Kuramoto follow one trajectory, FPU
    /// draws i.i.d. displacements.
    pub fn snapshot_spec(&self) -> Result<SnapshotSpec> {
        let system = self.system()?;
        let (grid_default, kind_default) = match system {
            System::Chua(_) => ((0.0, 20.0, 0.01, false), SamplingKind::Trajectory),
            System::Kuramoto(_) => ((0.0, 1020.0, 0.1, true), SamplingKind::Trajectory),
            System::Fpu(_) => ((0.0, 10.0, 0.01, false), SamplingKind::Uniform),
        };
        let kind = self.sampling.unwrap_or(if self.m.is_some() && self.t_end.is_none() {
            SamplingKind::Uniform
        } else if self.t_end.is_some() || self.dt.is_some() {
            SamplingKind::Trajectory
        } else {
            kind_default
        });
        let sampling = match kind {
            SamplingKind::Uniform => {
                let (dl, dh) = default_box(&system);
                let (low, high) = (self.low.unwrap_or(dl), self.high.unwrap_or(dh));
                let m = self.m.unwrap_or(1000);
                if m == 0 || !(low < high) || !low.is_finite() || !high.is_finite() {
                    bail!("uniform sampling needs m >= 1 and finite low < high");
                }
                Sampling::Uniform { m, low, high }
            }
            SamplingKind::Trajectory => {
                let grid = TimeGrid {
                    t0: self.t0.unwrap_or(grid_default.0),
                    t_end: self.t_end.unwrap_or(grid_default.1),
                    dt: self.dt.unwrap_or(grid_default.2),
                    include_end: self.include_end.unwrap_or(grid_default.3),
                };
                grid.validate()?;
                if let Some(x0) = &self.x0 {
                    let want = system.dim() * usize::from(system.derivative_order());
                    if x0.len() != want || x0.iter().any(|v| !v.is_finite()) {
                        bail!("x0 must hold {want} finite values");
                    }
                }
                Sampling::Trajectory {
                    x0: self.x0.clone(),
                    grid,
                }
            }
        };
        Ok(SnapshotSpec {
            system,
            sampling,
            seed: self.seed(),
        })
    }

    /// The configured dictionary, or `fallback` when none is given.
    pub fn dictionary(&self, fallback: &System) -> Result<Dictionary> {
        let dict = match &self.dictionary {
            None => fallback.default_dictionary(),
            Some(DictSpec::Preset(name)) => {
                Dictionary::preset(name).ok_or_else(|| anyhow!("unknown dictionary preset '{name}'"))?
            }
            Some(DictSpec::Custom(d)) => d.clone(),
        };
        dict.validate()?;
        Ok(dict)
    }

    pub fn epsilon(&self) -> Result<f64> {
        let e = self.epsilon.unwrap_or(0.0);
        if !(0.0..1.0).contains(&e) {
            bail!("epsilon {e} not in [0, 1)");
        }
        Ok(e)
    }

    pub fn lambda(&self) -> Result<f64> {
        let l = self.lambda.unwrap_or(0.0);
        if !(l >= 0.0) || !l.is_finite() {
            bail!("lambda {l} must be a finite value >= 0");
        }
        Ok(l)
    }

    pub fn bench_cells(&self) -> Result<Vec<BenchCell>> {
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => {
                let name = match &self.system {
                    Some(SystemSpec::Name(n)) => n.clone(),
                    Some(SystemSpec::Full(s)) => s.name().to_string(),
                    None => bail!("bench needs a grid or a system"),
                };
                BenchGrid {
                    system: name,
                    d: self.ds.clone().or(self.d.map(|d| vec![d])).unwrap_or_else(|| vec![6]),
                    m: self.ms.clone().or(self.m.map(|m| vec![m])).unwrap_or_else(|| vec![500, 1000, 2000]),
                    epsilon: self.epsilons.clone().unwrap_or_else(|| vec![self.epsilon.unwrap_or(0.0)]),
                    methods: self.method.unwrap_or(MethodChoice::Both).methods(),
                    low: self.low,
                    high: self.high,
                }
            }
        };
        if grid.epsilon.iter().any(|e| !(0.0..1.0).contains(e)) {
            bail!("every epsilon must lie in [0, 1)");
        }
        if grid.m.contains(&0) {
            bail!("every m must be >= 1");
        }
        let mut cells = grid.expand()?;
        if let Some(spec) = &self.dictionary {
            let probe = cells.first().map(|c| c.system.clone()).ok_or_else(|| anyhow!("empty grid"))?;
            let dict = RunConfig {
                dictionary: Some(spec.clone()),
                ..Default::default()
            }
            .dictionary(&probe)?;
            for c in &mut cells {
                c.dictionary = Some(dict.clone());
            }
        }
        Ok(cells)
    }
}
