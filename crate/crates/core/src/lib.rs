//! Regularized rank-(Lr,Lr,1) block-term decomposition of dense third-order
//! tensors.
//!
//! The main solver is a multi-step inertial, doubly stochastic proximal
//! gradient method: each iteration picks one factor block (mode), samples a
//! batch of mode fibers, forms a (possibly variance-reduced) gradient estimate
//! at an extrapolated point and takes a proximal step from a second
//! extrapolated point. Deterministic baselines (block proximal gradient and
//! multiplicative updates) and reconstruction metrics are included.
//!
//! Conventions: the mode-n unfolding `X_(n)` is stored as a `J_n x I_n`
//! matrix (one mode-n fiber per row), which is the transpose of the layout
//! used by several other tensor toolkits. Tensor data is column-major with
//! the first index fastest. Indices are 0-based in the API.

pub mod error;
pub mod estimators;
pub mod io;
pub mod metrics;
pub mod model;
pub mod prox;
pub mod rng;
pub mod solver;
pub mod tensor;

pub use error::{MidasError, Result};
pub use estimators::{Estimator, EstimatorKind, MseEstimate};
pub use metrics::MetricReport;
pub use model::{LL1Factors, ObjectiveValue, RankVector};
pub use prox::{Regularizer, RegularizerSpec};
pub use solver::{
    als_mu_baseline, palm_baseline, run, InertialSchedule, Init, MidasSolver, ModePolicy,
    RunTrace, SolverConfig, StepSize, TraceLevel, TraceRecord,
};
pub use tensor::{DenseTensor3, FiberBatch, Mode, UnfoldedMatrix};
