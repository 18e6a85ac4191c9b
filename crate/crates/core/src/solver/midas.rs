//! Multi-step inertial doubly stochastic proximal gradient (Midas-LL1).
//!
//! Iteration `k`:
//! 1. pick a mode `n` (uniformly or cyclically);
//! 2. draw a fiber batch (a bin for SAGA);
//! 3. `Y = A_n^k + sum_i alpha_{k+1-i} (A_n^{k+1-i} - A_n^{k-i})` and
//!    `U` likewise with `beta`;
//! 4. estimate the block gradient at the factors with `A_n = U`;
//! 5. `A_n^{k+1} = prox_{eta h_n}(Y - eta g)`; other blocks stay.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{initial_factors, InertialHistory, Recorder, RunTrace, SolverConfig, StepSize, TraceLevel};
use crate::error::{MidasError, Result};
use crate::estimators::{saga_batch_sizes, Estimator, EstimatorKind};
use crate::model::{frobenius_sq, lipschitz_bound, objective, LL1Factors};
use crate::rng::{stream, Stream};
use crate::solver::config::ModePolicy;
use crate::tensor::{DenseTensor3, Mode};

/// What one iteration did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub iteration: u64,
    pub mode: Mode,
    pub eta: f64,
    pub step_norm: f64,
}

/// Solver state for one run over a borrowed tensor.
pub struct MidasSolver<'a> {
    config: SolverConfig,
    tensor: &'a DenseTensor3,
    factors: LL1Factors,
    history: InertialHistory,
    estimator: Estimator,
    batch_sizes: [usize; 3],
    mode_rng: ChaCha8Rng,
    fiber_rng: ChaCha8Rng,
    iter: u64,
    recorder: Recorder,
}

/// Per-mode batch sizes actually used: SAGA needs `B | J_n` and gets the
/// largest divisor not above `B`; otherwise `B` is capped at `J_n`.
pub fn effective_batch_sizes(config: &SolverConfig, dims: [usize; 3]) -> [usize; 3] {
    let b = config.batch_size();
    match config.estimator {
        EstimatorKind::Saga => saga_batch_sizes(dims, b),
        _ => Mode::ALL.map(|m| b.min(crate::tensor::fiber_count(dims, m))),
    }
}

impl<'a> MidasSolver<'a> {
    pub fn new(config: SolverConfig, tensor: &'a DenseTensor3) -> Result<Self> {
        config.validate()?;
        let factors = initial_factors(&config, tensor)?;
        let dims = tensor.dims();
        let batch_sizes = effective_batch_sizes(&config, dims);
        if batch_sizes.iter().any(|&b| b != config.batch_size()) {
            log::warn!(
                "batch size {} adjusted per mode to {:?}",
                config.batch_size(),
                batch_sizes
            );
        }
        let estimator = Estimator::new(config.estimator, &factors, tensor, batch_sizes, config.seed)?;
        let history = InertialHistory::new(&factors, config.depth);
        Ok(MidasSolver {
            mode_rng: stream(config.seed, Stream::ModeSelection),
            fiber_rng: stream(config.seed, Stream::FiberSampling),
            recorder: Recorder::new(config.depth),
            config,
            tensor,
            factors,
            history,
            estimator,
            batch_sizes,
            iter: 0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn factors(&self) -> &LL1Factors {
        &self.factors
    }

    pub fn into_factors(self) -> LL1Factors {
        self.factors
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn batch_sizes(&self) -> [usize; 3] {
        self.batch_sizes
    }

    /// Iterations completed.
    pub fn iteration(&self) -> u64 {
        self.iter
    }

    /// `sum_n ceil(J_n / B_n)`.
    pub fn iters_per_epoch(&self) -> u64 {
        Mode::ALL
            .iter()
            .map(|&m| self.tensor.fiber_count(m).div_ceil(self.batch_sizes[m.index()]) as u64)
            .sum()
    }

    fn coefficients(&self, schedule: &super::InertialSchedule) -> Vec<f64> {
        let k = self.iter as i64;
        (1..=self.config.depth as i64).map(|i| schedule.at(k + 1 - i)).collect()
    }

    fn select_mode(&mut self) -> Mode {
        match self.config.mode_policy {
            ModePolicy::UniformRandom => Mode::ALL[self.mode_rng.random_range(0..3)],
            ModePolicy::Cyclic => Mode::ALL[(self.iter % 3) as usize],
        }
    }

    /// One iteration. Aborts on a non-finite update.
    pub fn step(&mut self) -> Result<StepInfo> {
        let mode = self.select_mode();
        let draw = self.estimator.draw(
            self.tensor.dims(),
            mode,
            self.batch_sizes[mode.index()],
            &mut self.fiber_rng,
        )?;
        let y = self.history.extrapolate(mode, &self.coefficients(&self.config.alpha));
        let u = self.history.extrapolate(mode, &self.coefficients(&self.config.beta));
        let point = self.factors.with_factor(mode, u)?;
        let grad = self.estimator.estimate(&point, self.tensor, &draw)?;

        let eta = match self.config.step {
            StepSize::Constant(eta) => eta,
            StepSize::InverseLipschitz => {
                let l = lipschitz_bound(&self.factors, mode);
                if l > 0.0 {
                    1.0 / l
                } else {
                    1.0
                }
            }
        };
        let mut target = y;
        target.scaled_add(-eta, &grad);
        let next = self.config.reg.prox(mode, target, eta);
        if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
            return Err(MidasError::Diverged {
                iteration: self.iter + 1,
                mode,
                detail: format!("update produced {bad} (eta = {eta})"),
            });
        }

        let step_sq = frobenius_sq(&(&next - self.factors.factor(mode)));
        self.factors.set_factor(mode, next.clone())?;
        self.history.push(mode, next);
        self.recorder.note_step(mode, step_sq);
        self.iter += 1;
        Ok(StepInfo {
            iteration: self.iter,
            mode,
            eta,
            step_norm: step_sq.sqrt(),
        })
    }

    /// Runs the configured epoch budget and returns the final factors and
    /// trace. Stops early once `phi < abs_tol` at a record point or when
    /// `max_iters` is reached.
    pub fn run(mut self) -> Result<(LL1Factors, RunTrace)> {
        let initial = objective(&self.factors, self.tensor, &self.config.reg)?;
        let mut trace = RunTrace::new(initial);
        let per_epoch = self.iters_per_epoch();
        let cap = self.config.max_iters.unwrap_or(u64::MAX);
        'epochs: for epoch in 1..=self.config.epochs {
            for _ in 0..per_epoch {
                if self.iter >= cap {
                    if self.config.trace_level == TraceLevel::Epoch {
                        trace.records.push(self.record(epoch)?);
                    }
                    break 'epochs;
                }
                self.step()?;
                if self.config.trace_level == TraceLevel::Iteration {
                    let rec = self.record(epoch)?;
                    let done = rec.phi < self.config.abs_tol;
                    trace.records.push(rec);
                    if done {
                        break 'epochs;
                    }
                }
            }
            if self.config.trace_level == TraceLevel::Epoch {
                let rec = self.record(epoch)?;
                let done = rec.phi < self.config.abs_tol;
                trace.records.push(rec);
                if done {
                    break;
                }
            }
        }
        Ok((self.factors, trace))
    }

    fn record(&self, epoch: usize) -> Result<super::TraceRecord> {
        self.recorder
            .record(&self.config, self.tensor, &self.factors, epoch, self.iter)
    }
}

/// Runs Midas-LL1 with `config` on `t`.
pub fn run(config: &SolverConfig, t: &DenseTensor3) -> Result<(LL1Factors, RunTrace)> {
    MidasSolver::new(config.clone(), t)?.run()
}
