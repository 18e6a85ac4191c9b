use crate::error::{MidasError, Result};
use crate::estimators::EstimatorKind;
use crate::model::{LL1Factors, RankVector};
use crate::prox::RegularizerSpec;

/// Inertial coefficient schedule `k -> c_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InertialSchedule {
    Constant(f64),
    /// `scale * (k - 1) / (k + 2)`, rising to `scale`.
    Ramp { scale: f64 },
}

impl InertialSchedule {
    /// Coefficient at iteration index `k`. Indices before the first
    /// iteration get 0; the history differences they multiply are zero
    /// anyway.
    pub fn at(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match *self {
            InertialSchedule::Constant(c) => c,
            InertialSchedule::Ramp { scale } => scale * (k - 1) as f64 / (k + 2) as f64,
        }
    }

    pub fn limit(&self) -> f64 {
        match *self {
            InertialSchedule::Constant(c) => c,
            InertialSchedule::Ramp { scale } => scale,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.limit().is_finite() {
            return Err(MidasError::Config(format!("{name} schedule must be finite")));
        }
        Ok(())
    }
}

/// Step size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `1 / lipschitz_bound` of the updated block at the current point.
    InverseLipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModePolicy {
    UniformRandom,
    Cyclic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// I.i.d. Uniform(0, 1) factors from the init stream.
    UniformRandom01,
    Provided(LL1Factors),
}

/// How often the trace records the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLevel {
    Epoch,
    Iteration,
}

/// Everything a solver run needs besides the tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub ranks: RankVector,
    pub estimator: EstimatorKind,
    /// Inertial depth `t`.
    pub depth: usize,
    pub alpha: InertialSchedule,
    pub beta: InertialSchedule,
    pub step: StepSize,
    /// Fiber batch size; `None` means `2 * max L_r`.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub mode_policy: ModePolicy,
    pub reg: RegularizerSpec,
    pub init: Init,
    /// `gamma` used by the Lyapunov surrogate; the surrogate is recorded
    /// only when set.
    pub gamma_diag: Option<f64>,
    /// Stop once `phi` drops below this at a record point.
    pub abs_tol: f64,
    /// Hard cap on iterations, on top of the epoch budget.
    pub max_iters: Option<u64>,
    pub trace_level: TraceLevel,
}

impl SolverConfig {
    /// Defaults: 3-step inertia with `alpha_k = 0.3 (k-1)/(k+2)`,
    /// `beta_k = 0.8 (k-1)/(k+2)`, constant step 0.1, SAGA, 200 epochs,
    /// uniform mode sampling, nonnegativity.
    pub fn new(ranks: RankVector) -> Self {
        SolverConfig {
            ranks,
            estimator: EstimatorKind::Saga,
            depth: 3,
            alpha: InertialSchedule::Ramp { scale: 0.3 },
            beta: InertialSchedule::Ramp { scale: 0.8 },
            step: StepSize::Constant(0.1),
            batch_size: None,
            epochs: 200,
            seed: 0,
            mode_policy: ModePolicy::UniformRandom,
            reg: RegularizerSpec::uniform(crate::prox::Regularizer::NonNegative),
            init: Init::UniformRandom01,
            gamma_diag: None,
            abs_tol: 1e-12,
            max_iters: None,
            trace_level: TraceLevel::Epoch,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(2 * self.ranks.max_rank())
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size() == 0 {
            return Err(MidasError::Config("batch size must be >= 1".into()));
        }
        if let StepSize::Constant(eta) = self.step {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(MidasError::Config(format!("step size must be > 0, got {eta}")));
            }
        }
        if let EstimatorKind::Sarah { period: Some(0) } = self.estimator {
            return Err(MidasError::Config("sarah_q must be >= 1".into()));
        }
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")?;
        if let Some(g) = self.gamma_diag {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(MidasError::Config(format!("gamma_diag must be >= 0, got {g}")));
            }
        }
        if let Init::Provided(f) = &self.init {
            if f.ranks() != &self.ranks {
                return Err(MidasError::Config(
                    "provided init has a different rank vector".into(),
                ));
            }
        }
        Ok(())
    }
}
