//! Midas-LL1 iterations and deterministic baselines.

mod baselines;
mod config;
pub mod diagnostics;
mod history;
mod midas;
mod trace;

use std::collections::VecDeque;
use std::time::Instant;

pub use baselines::{als_mu_baseline, palm_baseline};
pub use config::{InertialSchedule, Init, ModePolicy, SolverConfig, StepSize, TraceLevel};
pub use diagnostics::{feasibility_check, feasibility_from_limits, lyapunov_surrogate, FeasibilityReport};
pub use history::InertialHistory;
pub use midas::{run, MidasSolver, StepInfo};
pub use trace::{RunTrace, TraceRecord};

use crate::error::{MidasError, Result};
use crate::model::{lipschitz_bound, objective, LL1Factors};
use crate::rng::{stream, Stream};
use crate::tensor::{DenseTensor3, Mode};

/// Starting factors for any solver.
pub fn initial_factors(config: &SolverConfig, t: &DenseTensor3) -> Result<LL1Factors> {
    match &config.init {
        Init::UniformRandom01 => {
            let mut rng = stream(config.seed, Stream::Init);
            Ok(LL1Factors::random_uniform(t.dims(), config.ranks.clone(), &mut rng))
        }
        Init::Provided(f) => {
            f.check_tensor(t)?;
            if !f.is_finite() {
                return Err(MidasError::NonFinite("provided initial factors".into()));
            }
            Ok(f.clone())
        }
    }
}

/// Shared bookkeeping for trace rows.
struct Recorder {
    clock: Instant,
    mode_updates: [u64; 3],
    /// Squared step norms, newest first, up to `t + 1` of them.
    recent_steps: VecDeque<f64>,
    depth: usize,
}

impl Recorder {
    fn new(depth: usize) -> Self {
        Recorder {
            clock: Instant::now(),
            mode_updates: [0; 3],
            recent_steps: VecDeque::with_capacity(depth + 2),
            depth,
        }
    }

    fn note_step(&mut self, mode: Mode, step_sq: f64) {
        self.mode_updates[mode.index()] += 1;
        self.recent_steps.push_front(step_sq);
        self.recent_steps.truncate(self.depth + 1);
    }

    fn record(
        &self,
        config: &SolverConfig,
        t: &DenseTensor3,
        factors: &LL1Factors,
        epoch: usize,
        iter: u64,
    ) -> Result<TraceRecord> {
        let obj = objective(factors, t, &config.reg)?;
        let lyapunov_surrogate = config.gamma_diag.map(|gamma| {
            let lip = Mode::ALL
                .iter()
                .map(|&m| lipschitz_bound(factors, m))
                .fold(0.0, f64::max);
            let report = feasibility_check(config, lip, gamma);
            let steps: Vec<f64> = self.recent_steps.iter().copied().collect();
            lyapunov_surrogate(obj.phi, &steps, &report.a_bar)
        });
        Ok(TraceRecord {
            epoch,
            iter,
            phi: obj.phi,
            f: obj.f,
            elapsed_seconds: self.clock.elapsed().as_secs_f64(),
            mode_updates: self.mode_updates,
            step_norm: self.recent_steps.front().copied().unwrap_or(0.0).sqrt(),
            lyapunov_surrogate,
        })
    }
}
