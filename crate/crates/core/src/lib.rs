pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod io;
pub mod linalg;
pub mod mandy;
pub mod ode;
pub mod pinv;
pub mod sindy;
pub mod systems;
pub mod tt;

pub use basis::{BasisFunction, BasisTensorTT, Dictionary, Layout};
pub use error::{Error, Result};
pub use exec::Execution;
pub use mandy::{mandy_identify, relative_error, sindy_identify, CoefficientTensor, Coefficients, Method};
pub use pinv::{pinv_apply_left, pinv_basis, tt_pinv, TTPseudoinverse};
pub use sindy::{sindy_lstsq, sindy_threshold, SindyResult};
pub use systems::{generate_snapshots, SnapshotSet, SnapshotSpec, System};
pub use tt::{Core, DenseTensor, TensorTrain};
