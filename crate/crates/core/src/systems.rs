//! Benchmark systems: right-hand sides, exact coefficient tensors and
//! snapshot generation.

use std::f64::consts::PI;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{Dictionary, Layout};
use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::tt::{Core, TensorTrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChuaParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for ChuaParams {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 14.87,
            delta1: -8.0 / 7.0,
            delta2: 4.0 / 63.0,
        }
    }
}

/// Chain of `d` oscillators with fixed ends `x_0 = x_{d+1} = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpuParams {
    pub d: usize,
    pub beta: f64,
}

impl FpuParams {
    pub fn new(d: usize) -> Self {
        Self { d, beta: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuramotoParams {
    pub d: usize,
    pub k: f64,
    pub h: f64,
    pub omega: Vec<f64>,
}

impl KuramotoParams {
    /// Natural frequencies equidistant in `[-5, 5]`.
    pub fn equidistant(d: usize, k: f64, h: f64) -> Self {
        let omega = if d == 1 {
            vec![0.0]
        } else {
            (0..d).map(|i| -5.0 + 10.0 * i as f64 / (d - 1) as f64).collect()
        };
        Self { d, k, h, omega }
    }
}

impl Default for KuramotoParams {
    fn default() -> Self {
        Self::equidistant(10, 2.0, 0.2)
    }
}

pub fn chua_rhs(p: &ChuaParams, x: &[f64]) -> Vec<f64> {
    let g = p.delta1 * x[0] + p.delta2 * x[0] * x[0].abs();
    vec![
        p.alpha * (x[1] - x[0] - g),
        x[0] - x[1] + x[2],
        -p.beta * x[1],
    ]
}

pub fn fpu_rhs(p: &FpuParams, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= d {
            0.0
        } else {
            x[i as usize]
        }
    };
    (0..d as isize)
        .map(|i| {
            let (l, c, r) = (at(i - 1), at(i), at(i + 1));
            (r - 2.0 * c + l) + p.beta * ((r - c).powi(3) - (c - l).powi(3))
        })
        .collect()
}

pub fn kuramoto_rhs(p: &KuramotoParams, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|v| v.sin_cos()).unzip();
    let ssum: f64 = s.iter().sum();
    let csum: f64 = c.iter().sum();
    // sum_j sin(x_j - x_i) = cos x_i sum_j sin x_j - sin x_i sum_j cos x_j
    (0..d)
        .map(|i| p.omega[i] + p.k / d as f64 * (c[i] * ssum - s[i] * csum) + p.h * s[i])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", content = "params", rename_all = "snake_case")]
pub enum System {
    Chua(ChuaParams),
    Fpu(FpuParams),
    Kuramoto(KuramotoParams),
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Chua(_) => "chua",
            System::Fpu(_) => "fpu",
            System::Kuramoto(_) => "kuramoto",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            System::Chua(_) => 3,
            System::Fpu(p) => p.d,
            System::Kuramoto(p) => p.d,
        }
    }

    /// 1 for `x' = F(x)`, 2 for `x'' = F(x)`.
    pub fn derivative_order(&self) -> u8 {
        match self {
            System::Fpu(_) => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            System::Chua(p) => {
                if !finite(&[p.alpha, p.beta, p.delta1, p.delta2]) {
                    return Err(Error::InvalidArgument("Chua parameters must be finite".into()));
                }
            }
            System::Fpu(p) => {
                if p.d == 0 || !p.beta.is_finite() {
                    return Err(Error::InvalidArgument("FPU needs d >= 1 and finite beta".into()));
                }
            }
            System::Kuramoto(p) => {
                if p.d == 0 || p.omega.len() != p.d || !finite(&p.omega) || !finite(&[p.k, p.h]) {
                    return Err(Error::InvalidArgument(
                        "Kuramoto needs d >= 1, finite K and h, and d frequencies".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        match self {
            System::Chua(p) => chua_rhs(p, x),
            System::Fpu(p) => fpu_rhs(p, x),
            System::Kuramoto(p) => kuramoto_rhs(p, x),
        }
    }

    /// The dictionary in which the exact coefficient tensor is known.
    pub fn default_dictionary(&self) -> Dictionary {
        match self {
            System::Chua(_) => Dictionary::abs_pair(),
            System::Fpu(_) => Dictionary::monomials(3),
            System::Kuramoto(_) => Dictionary::trig_pair(),
        }
    }

    /// Closed-form coefficient tensor for the system's natural dictionary.
    pub fn exact_coefficients(&self, dict: &Dictionary) -> Result<TensorTrain> {
        if *dict != self.default_dictionary() {
            let layout = match dict.layout {
                Layout::CoordinateMajor => "coordinate-major",
                Layout::FunctionMajor => "function-major",
            };
            return Err(Error::UnsupportedLayout(format!(
                "no exact tensor for {} with this {layout} dictionary",
                self.name()
            )));
        }
        match self {
            System::Chua(p) => chua_exact(p),
            System::Fpu(p) => fpu_exact(p),
            System::Kuramoto(p) => kuramoto_exact(p),
        }
    }
}

fn chua_exact(p: &ChuaParams) -> Result<TensorTrain> {
    let a = p.alpha;
    let first: [[f64; 4]; 4] = [
        [0.0, -a * (1.0 + p.delta1), a, 0.0],
        [0.0, -a * p.delta2, 0.0, 0.0],
        [0.0, 1.0, -1.0, 1.0],
        [0.0, 0.0, -p.beta, 0.0],
    ];
    let c1 = Core::from_fn(1, 4, 4, |_, x, r| first[r][x]);
    // (rank row, |x| index, output)
    let c2 = Core::from_fn(4, 4, 3, |r, j, k| match (r, j, k) {
        (0, 0, 0) | (1, 1, 0) | (2, 0, 1) | (3, 0, 2) => 1.0,
        _ => 0.0,
    });
    let c3 = Core::from_fn(3, 3, 1, |a, x, _| if a == x { 1.0 } else { 0.0 });
    TensorTrain::new(vec![c1, c2, c3])
}

/// `[-2e2 - 2b e4, e1 + 3b e3, -3b e2, b e1]`: the polynomial factors in the
/// centre coordinate paired with powers 0..3 of a neighbour.
fn fpu_row(beta: f64) -> [[f64; 4]; 4] {
    [
        [0.0, -2.0, 0.0, -2.0 * beta],
        [1.0, 0.0, 3.0 * beta, 0.0],
        [0.0, -3.0 * beta, 0.0, 0.0],
        [beta, 0.0, 0.0, 0.0],
    ]
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn fpu_exact(p: &FpuParams) -> Result<TensorTrain> {
    let d = p.d;
    let row = fpu_row(p.beta);
    let mut total: Option<TensorTrain> = None;
    for k in 0..d {
        // one term per output k, a TT over d feature cores + output core
        let mut cores = Vec::with_capacity(d + 1);
        let has_left = k > 0;
        let has_right = k + 1 < d;
        for i in 0..d {
            let core = if has_left && i + 1 == k {
                // x_{k-1}: pick power a
                Core::from_fn(1, 4, 4, |_, x, a| if x == a { 1.0 } else { 0.0 })
            } else if i == k {
                let rl = if has_left { 4 } else { 1 };
                let rr = if has_right { 4 } else { 1 };
                Core::from_fn(rl, 4, rr, |a, x, b| match (has_left, has_right) {
                    (true, true) => {
                        if a == 0 {
                            row[b][x]
                        } else if b == 0 {
                            row[a][x]
                        } else {
                            0.0
                        }
                    }
                    (false, true) => row[b][x],
                    (true, false) => row[a][x],
                    (false, false) => row[0][x],
                })
            } else if has_right && i == k + 1 {
                Core::from_fn(4, 4, 1, |b, x, _| if x == b { 1.0 } else { 0.0 })
            } else {
                Core::vector(&unit(4, 0))
            };
            cores.push(core);
        }
        cores.push(Core::vector(&unit(d, k)));
        let term = TensorTrain::new(cores)?;
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term)?,
        });
    }
    Ok(total.expect("d >= 1"))
}

fn kuramoto_exact(p: &KuramotoParams) -> Result<TensorTrain> {
    let d = p.d;
    let kd = p.k / d as f64;
    // output k uses A_k B_k^T with three columns:
    // A_k = [w_k e1 + h e_{k+1}, kd s_k, -kd e_{k+1}], B_k = [e1, e_{k+1}, s_k]
    let a_entry = |k: usize, i: usize, c: usize| -> f64 {
        match c {
            0 => {
                if i == 0 {
                    p.omega[k]
                } else if i == k + 1 {
                    p.h
                } else {
                    0.0
                }
            }
            1 => {
                if i > 0 && i != k + 1 {
                    kd
                } else {
                    0.0
                }
            }
            _ => {
                if i == k + 1 {
                    -kd
                } else {
                    0.0
                }
            }
        }
    };
    let b_entry = |k: usize, j: usize, c: usize| -> f64 {
        match c {
            0 => f64::from(u8::from(j == 0)),
            1 => f64::from(u8::from(j == k + 1)),
            _ => f64::from(u8::from(j > 0 && j != k + 1)),
        }
    };
    let c1 = Core::from_fn(1, d + 1, 3 * d, |_, i, r| a_entry(r / 3, i, r % 3));
    let c2 = Core::from_fn(3 * d, d + 1, d, |r, j, k| if r / 3 == k { b_entry(k, j, r % 3) } else { 0.0 });
    let c3 = Core::from_fn(d, d, 1, |a, x, _| if a == x { 1.0 } else { 0.0 });
    TensorTrain::new(vec![c1, c2, c3])
}

/// Uniform time grid `t0, t0 + dt, ..`; the endpoint is included only when
/// `include_end` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub include_end: bool,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end >= self.t0) || !self.t0.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid time grid {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let steps = ((self.t_end - self.t0) / self.dt).round() as usize;
        if self.include_end {
            steps + 1
        } else {
            steps.max(1)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t0 + k as f64 * self.dt).collect()
    }
}

/// Integrates a system on a grid. For second-order systems the state is the
/// companion vector `(x, x')` of length `2d`.
pub fn integrate(system: &System, x0: &[f64], grid: &TimeGrid, opts: &OdeOptions) -> Result<Vec<Vec<f64>>> {
    grid.validate()?;
    let d = system.dim();
    let n = d * usize::from(system.derivative_order());
    if x0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has length {}, expected {n}",
            x0.len()
        )));
    }
    let times = grid.times();
    if system.derivative_order() == 2 {
        ode::integrate(
            |_, s, ds| {
                let acc = system.rhs(&s[..d]);
                ds[..d].copy_from_slice(&s[d..]);
                ds[d..].copy_from_slice(&acc);
            },
            x0,
            &times,
            opts,
        )
    } else {
        ode::integrate(|_, s, ds| ds.copy_from_slice(&system.rhs(s)), x0, &times, opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampling {
    /// i.i.d. uniform states in `[low, high)^d`, no integration.
    Uniform { m: usize, low: f64, high: f64 },
    /// States along one trajectory. A missing `x0` means the system default:
    /// the fixed Chua start, uniform phases in `[0, 2pi)` for Kuramoto, and
    /// uniform displacements in `[-0.1, 0.1)` at rest for FPU.
    Trajectory {
        #[serde(default)]
        x0: Option<Vec<f64>>,
        grid: TimeGrid,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSpec {
    #[serde(flatten)]
    pub system: System,
    pub sampling: Sampling,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    #[serde(flatten)]
    pub system: System,
    pub seed: u64,
    pub derivative_order: u8,
    pub time_grid: Option<TimeGrid>,
    pub sampling: Sampling,
}

/// States `x` and exact derivatives `y`, both `d x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    pub meta: SnapshotMeta,
}

impl SnapshotSet {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

pub const CHUA_START: [f64; 3] = [-1.13, 0.004, 0.45];

/// Default initial state for trajectory sampling.
pub fn default_initial_state<R: Rng + ?Sized>(system: &System, rng: &mut R) -> Vec<f64> {
    match system {
        System::Chua(_) => CHUA_START.to_vec(),
        System::Kuramoto(p) => (0..p.d).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        System::Fpu(p) => {
            let mut s: Vec<f64> = (0..p.d).map(|_| rng.gen_range(-0.1..0.1)).collect();
            s.extend(std::iter::repeat_n(0.0, p.d));
            s
        }
    }
}

pub fn generate_snapshots(spec: &SnapshotSpec) -> Result<SnapshotSet> {
    generate_snapshots_with(spec, &OdeOptions::default())
}

pub fn generate_snapshots_with(spec: &SnapshotSpec, opts: &OdeOptions) -> Result<SnapshotSet> {
    spec.system.validate()?;
    let d = spec.system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (states, time_grid): (Vec<Vec<f64>>, Option<TimeGrid>) = match &spec.sampling {
        Sampling::Uniform { m, low, high } => {
            if *m == 0 || !(low < high) {
                return Err(Error::InvalidArgument("uniform sampling needs m >= 1 and low < high".into()));
            }
            let states = (0..*m)
                .map(|_| (0..d).map(|_| rng.gen_range(*low..*high)).collect())
                .collect();
            (states, None)
        }
        Sampling::Trajectory { x0, grid } => {
            let start = match x0 {
                Some(v) => v.clone(),
                None => default_initial_state(&spec.system, &mut rng),
            };
            let traj = integrate(&spec.system, &start, grid, opts)?;
            let states = traj.into_iter().map(|s| s[..d].to_vec()).collect();
            (states, Some(*grid))
        }
    };
    let m = states.len();
    let x = Mat::from_fn(d, m, |i, k| states[k][i]);
    let derivs: Vec<Vec<f64>> = states.iter().map(|s| spec.system.rhs(s)).collect();
    let y = Mat::from_fn(d, m, |i, k| derivs[k][i]);
    Ok(SnapshotSet {
        x,
        y,
        meta: SnapshotMeta {
            system: spec.system.clone(),
            seed: spec.seed,
            derivative_order: spec.system.derivative_order(),
            time_grid,
            sampling: spec.sampling.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chua_values() {
        let p = ChuaParams::default();
        assert_eq!(chua_rhs(&p, &[0.0; 3]), vec![0.0; 3]);
        let v = chua_rhs(&p, &[1.0, 0.0, 0.0]);
        assert!((v[0] - 50.0 / 63.0).abs() < 1e-14);
        assert_eq!(&v[1..], &[1.0, 0.0]);
    }

    #[test]
    fn fpu_value_and_symmetry() {
        let p = FpuParams::new(3);
        let a = 0.1;
        let v = fpu_rhs(&p, &[a, 0.0, 0.0]);
        assert!((v[0] - (-2.0 * a - 2.0 * 0.7 * a * a * a)).abs() < 1e-15);
        assert!((v[0] + 0.2014).abs() < 1e-12);
        let x = [0.03, -0.07, 0.01, 0.09, -0.02];
        let p = FpuParams::new(5);
        let mut rev = x;
        rev.reverse();
        let mut fr = fpu_rhs(&p, &rev);
        fr.reverse();
        assert_eq!(fr, fpu_rhs(&p, &x));
    }

    #[test]
    fn kuramoto_at_zero_and_antisymmetry() {
        let p = KuramotoParams::default();
        assert_eq!(kuramoto_rhs(&p, &[0.0; 10]), p.omega);
        assert_eq!(p.omega[0], -5.0);
        assert_eq!(p.omega[9], 5.0);
        let x: Vec<f64> = (0..10).map(|i| 0.7 * i as f64 + 0.3).collect();
        let v = kuramoto_rhs(&p, &x);
        let s: f64 = (0..10).map(|i| v[i] - p.omega[i] - p.h * x[i].sin()).sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn time_grids() {
        let chua = TimeGrid {
            t0: 0.0,
            t_end: 20.0,
            dt: 0.01,
            include_end: false,
        };
        assert_eq!(chua.len(), 2000);
        let kura = TimeGrid {
            t0: 0.0,
            t_end: 1020.0,
            dt: 0.1,
            include_end: true,
        };
        assert_eq!(kura.len(), 10201);
    }

    #[test]
    fn unsupported_layout() {
        let s = System::Chua(ChuaParams::default());
        assert!(matches!(
            s.exact_coefficients(&Dictionary::monomials(2)),
            Err(Error::UnsupportedLayout(_))
        ));
    }

    #[test]
    fn exact_tensor_shapes() {
        let c = System::Chua(ChuaParams::default());
        let t = c.exact_coefficients(&c.default_dictionary()).unwrap();
        assert_eq!(t.mode_sizes(), vec![4, 4, 3]);
        let k = System::Kuramoto(KuramotoParams::default());
        let t = k.exact_coefficients(&k.default_dictionary()).unwrap();
        assert_eq!(t.mode_sizes(), vec![11, 11, 10]);
        assert_eq!(t.ranks(), vec![1, 30, 10, 1]);
    }

    #[test]
    fn fpu_uniform_sampling() {
        let spec = SnapshotSpec {
            system: System::Fpu(FpuParams::new(10)),
            sampling: Sampling::Uniform {
                m: 1000,
                low: -0.1,
                high: 0.1,
            },
            seed: 7,
        };
        let a = generate_snapshots(&spec).unwrap();
        assert_eq!((a.x.nrows(), a.x.ncols()), (10, 1000));
        for k in 0..1000 {
            for i in 0..10 {
                assert!(a.x[(i, k)].abs() <= 0.1);
            }
        }
        let b = generate_snapshots(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fpu_trajectory_uses_companion_form() {
        let system = System::Fpu(FpuParams::new(4));
        let grid = TimeGrid {
            t0: 0.0,
            t_end: 1.0,
            dt: 0.1,
            include_end: true,
        };
        let x0 = [0.05, 0.0, 0.0, -0.05, 0.0, 0.0, 0.0, 0.0];
        let traj = integrate(&system, &x0, &grid, &OdeOptions::default()).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj[0].len(), 8);
        assert!(integrate(&system, &x0[..4], &grid, &OdeOptions::default()).is_err());
    }
}
