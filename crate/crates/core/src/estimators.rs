//! Stochastic block-gradient estimators over mode fibers.
//!
//! Every estimator returns, for a sampled mode `n` and a point `P` (the
//! factors with `A_n` replaced by its extrapolated value), a matrix shaped
//! like `A_n` that approximates `grad_{A_n} f(P)`. Following the
//! variance-reduction contract used in the convergence analysis, an
//! estimator is called variance-reduced with constants `V1, V2, V_Gamma >= 0`,
//! depth `t >= 1` and `tau in (0, 1]` when:
//!
//! 1. (MSE bound) there are random sequences `Gamma_k`, `Upsilon_k` with
//!    `E_k ||g_k - grad_k||^2 <= Gamma_k + V1 * sum_{i=1}^{t+1} ||A^{k+1-i} - A^{k-i}||^2`
//!    and
//!    `E_k ||g_k - grad_k|| <= Upsilon_k + V2 * sum_{i=1}^{t+1} ||A^{k+1-i} - A^{k-i}||`;
//! 2. (geometric decay)
//!    `E_k Gamma_{k+1} <= (1 - tau) Gamma_k + V_Gamma * sum_{i=1}^{t+1} ||A^{k+1-i} - A^{k-i}||^2`;
//! 3. (convergence) `E ||A^k - A^{k-1}||^2 -> 0` implies `E Gamma_k -> 0`
//!    and `E Upsilon_k -> 0`.
//!
//! The sequences and constants above are analysis devices and have no
//! runtime representation here. What can be observed is the left-hand side
//! of the MSE bound, which [`Estimator::mse_probe`] estimates by Monte Carlo.
//!
//! SAGA keeps one stored gradient per fixed disjoint bin of `B` fibers rather
//! than one per fiber; fresh per-bin gradients replace the per-sample
//! gradients of the textbook estimator. SARAH uses the recursive difference
//! `v <- g(P_k; F) - g(P_{k-1}; F) + v` with a full-gradient restart every
//! `q` updates of the mode.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{MidasError, Result};
use crate::model::{batch_gradient, frobenius_sq, full_gradient, LL1Factors};
use crate::rng::{stream, Stream};
use crate::tensor::{fiber_count, DenseTensor3, FiberBatch, Mode};

/// Which estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Sgd,
    Saga,
    /// Restart period in mode-n updates; `None` means one epoch's worth,
    /// `ceil(J_n / B)`.
    Sarah { period: Option<usize> },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Sgd => "sgd",
            EstimatorKind::Saga => "saga",
            EstimatorKind::Sarah { .. } => "sarah",
        }
    }
}

/// Plain minibatch estimate
/// `(A_n H_F^T H_F - X_F^T H_F) / (I_n |F|)` at `point`. A batch holding
/// every fiber of the mode is the exact gradient (`I_n J_n = I1 I2 I3`) and
/// goes through [`full_gradient`].
pub fn sgd_estimate(point: &LL1Factors, t: &DenseTensor3, batch: &FiberBatch) -> Result<Array2<f64>> {
    if batch.len() == t.fiber_count(batch.mode()) {
        return full_gradient(point, t, batch.mode());
    }
    batch_gradient(point, t, batch)
}

/// Largest divisor of `J_n` not above `batch`, per mode. SAGA bins need
/// `B | J_n`.
pub fn saga_batch_sizes(dims: [usize; 3], batch: usize) -> [usize; 3] {
    Mode::ALL.map(|m| {
        let j = fiber_count(dims, m);
        (1..=batch.clamp(1, j)).rev().find(|d| j % d == 0).unwrap_or(1)
    })
}

/// Samples `size` distinct fibers of `mode`, returned in increasing order.
pub fn sample_batch<R: Rng + ?Sized>(dims: [usize; 3], mode: Mode, size: usize, rng: &mut R) -> Result<FiberBatch> {
    let fibers = fiber_count(dims, mode);
    if size == 0 || size > fibers {
        return Err(MidasError::InvalidBatch(format!(
            "batch size {size} outside 1..={fibers} for mode {mode}"
        )));
    }
    let mut idx = sample(rng, fibers, size).into_vec();
    idx.sort_unstable();
    FiberBatch::new(mode, idx, fibers)
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Stored per-bin gradients and their running mean.
#[derive(Debug, Clone)]
pub struct SagaState {
    bins: [Vec<FiberBatch>; 3],
    table: [Vec<Array2<f64>>; 3],
    mean: [Array2<f64>; 3],
    since_refresh: [usize; 3],
}

impl SagaState {
    /// Partitions each mode's fibers into `J_n / B_n` random disjoint bins.
    /// The table is empty until [`SagaState::warm_start`].
    pub fn with_random_bins<R: Rng + ?Sized>(dims: [usize; 3], batch_sizes: [usize; 3], rng: &mut R) -> Result<Self> {
        let mut bins: [Vec<FiberBatch>; 3] = Default::default();
        for mode in Mode::ALL {
            let fibers = fiber_count(dims, mode);
            let b = batch_sizes[mode.index()];
            if b == 0 || fibers % b != 0 {
                return Err(MidasError::Config(format!(
                    "SAGA bins need B | J_n: B = {b}, J_{mode} = {fibers}"
                )));
            }
            let mut perm: Vec<usize> = (0..fibers).collect();
            perm.shuffle(rng);
            bins[mode.index()] = perm
                .chunks(b)
                .map(|c| {
                    let mut c = c.to_vec();
                    c.sort_unstable();
                    FiberBatch::new(mode, c, fibers)
                })
                .collect::<Result<_>>()?;
        }
        Ok(SagaState {
            bins,
            table: Default::default(),
            mean: Default::default(),
            since_refresh: [0; 3],
        })
    }

    /// Fills every bin with its gradient at `point`.
    pub fn warm_start(&mut self, point: &LL1Factors, t: &DenseTensor3) -> Result<()> {
        for mode in Mode::ALL {
            let grads = self.bins[mode.index()]
                .iter()
                .map(|b| sgd_estimate(point, t, b))
                .collect::<Result<Vec<_>>>()?;
            self.mean[mode.index()] = exact_mean(&grads);
            self.table[mode.index()] = grads;
            self.since_refresh[mode.index()] = 0;
        }
        Ok(())
    }

    pub fn is_initialized(&self) -> bool {
        Mode::ALL
            .iter()
            .all(|m| self.table[m.index()].len() == self.bins[m.index()].len())
    }

    pub fn bin_count(&self, mode: Mode) -> usize {
        self.bins[mode.index()].len()
    }

    pub fn bin(&self, mode: Mode, id: usize) -> &FiberBatch {
        &self.bins[mode.index()][id]
    }

    pub fn running_mean(&self, mode: Mode) -> &Array2<f64> {
        &self.mean[mode.index()]
    }

    pub fn stored(&self, mode: Mode, id: usize) -> &Array2<f64> {
        &self.table[mode.index()][id]
    }

    /// Largest entrywise gap between the running mean and the mean of the
    /// table recomputed from scratch.
    pub fn mean_drift(&self, mode: Mode) -> f64 {
        max_abs_diff(&self.mean[mode.index()], &exact_mean(&self.table[mode.index()]))
    }

    fn check(&self, mode: Mode, bin: usize) -> Result<()> {
        if !self.is_initialized() {
            return Err(MidasError::Uninitialized(
                "SAGA table must be warm-started before estimating".into(),
            ));
        }
        if bin >= self.bin_count(mode) {
            return Err(MidasError::InvalidBatch(format!(
                "bin {bin} out of range for mode {mode} ({} bins)",
                self.bin_count(mode)
            )));
        }
        Ok(())
    }

    /// `fresh - stored[bin] + mean` without touching the state.
    pub fn peek(&self, point: &LL1Factors, t: &DenseTensor3, mode: Mode, bin: usize) -> Result<Array2<f64>> {
        self.check(mode, bin)?;
        let fresh = sgd_estimate(point, t, self.bin(mode, bin))?;
        Ok(&fresh - self.stored(mode, bin) + self.running_mean(mode))
    }

    /// Returns `fresh - stored[bin] + mean`, then stores `fresh`.
    pub fn estimate(&mut self, point: &LL1Factors, t: &DenseTensor3, mode: Mode, bin: usize) -> Result<Array2<f64>> {
        self.check(mode, bin)?;
        let m = mode.index();
        let fresh = sgd_estimate(point, t, &self.bins[m][bin])?;
        let delta = &fresh - &self.table[m][bin];
        let out = &delta + &self.mean[m];
        let nbins = self.bins[m].len();
        self.mean[m].scaled_add(1.0 / nbins as f64, &delta);
        self.table[m][bin] = fresh;
        self.since_refresh[m] += 1;
        if self.since_refresh[m] >= nbins {
            self.mean[m] = exact_mean(&self.table[m]);
            self.since_refresh[m] = 0;
        }
        Ok(out)
    }
}

fn exact_mean(grads: &[Array2<f64>]) -> Array2<f64> {
    let mut acc = Array2::zeros(grads[0].dim());
    for g in grads {
        acc += g;
    }
    acc / grads.len() as f64
}

/// Recursive SARAH direction per mode.
#[derive(Debug, Clone)]
pub struct SarahState {
    period: [usize; 3],
    direction: [Option<Array2<f64>>; 3],
    prev_point: [Option<LL1Factors>; 3],
    counter: [usize; 3],
}

impl SarahState {
    pub fn new(period: [usize; 3]) -> Result<Self> {
        if period.contains(&0) {
            return Err(MidasError::Config("SARAH restart period must be >= 1".into()));
        }
        Ok(SarahState {
            period,
            direction: Default::default(),
            prev_point: Default::default(),
            counter: [0; 3],
        })
    }

    pub fn period(&self, mode: Mode) -> usize {
        self.period[mode.index()]
    }

    /// Updates of `mode` since its last restart.
    pub fn counter(&self, mode: Mode) -> usize {
        self.counter[mode.index()]
    }

    pub fn direction(&self, mode: Mode) -> Option<&Array2<f64>> {
        self.direction[mode.index()].as_ref()
    }

    pub fn peek(&self, point: &LL1Factors, t: &DenseTensor3, batch: &FiberBatch) -> Result<Array2<f64>> {
        let m = batch.mode().index();
        match (&self.direction[m], &self.prev_point[m]) {
            (Some(v), Some(prev)) if self.counter[m] != 0 => {
                let now = sgd_estimate(point, t, batch)?;
                let before = sgd_estimate(prev, t, batch)?;
                Ok(now - before + v)
            }
            _ => full_gradient(point, t, batch.mode()),
        }
    }

    pub fn estimate(&mut self, point: &LL1Factors, t: &DenseTensor3, batch: &FiberBatch) -> Result<Array2<f64>> {
        let m = batch.mode().index();
        let v = self.peek(point, t, batch)?;
        self.direction[m] = Some(v.clone());
        self.prev_point[m] = Some(point.clone());
        self.counter[m] = (self.counter[m] + 1) % self.period[m];
        Ok(v)
    }
}

/// What the solver sampled for one iteration.
#[derive(Debug, Clone)]
pub struct Draw {
    pub batch: FiberBatch,
    /// SAGA bin id, when the estimator is bin based.
    pub bin: Option<usize>,
}

/// Monte Carlo estimate of `E ||g - grad f||_F^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_err: f64,
    pub draws: usize,
}

/// An estimator together with its persistent state.
#[derive(Debug, Clone)]
pub enum Estimator {
    Sgd,
    Saga(SagaState),
    Sarah(SarahState),
}

impl Estimator {
    /// Builds the estimator. SAGA bins are drawn from the `seed`-derived
    /// stream and warm-started at `point`.
    pub fn new(
        kind: EstimatorKind,
        point: &LL1Factors,
        t: &DenseTensor3,
        batch_sizes: [usize; 3],
        seed: u64,
    ) -> Result<Self> {
        let dims = t.dims();
        Ok(match kind {
            EstimatorKind::Sgd => Estimator::Sgd,
            EstimatorKind::Saga => {
                let mut rng = stream(seed, Stream::SagaBins);
                let mut state = SagaState::with_random_bins(dims, batch_sizes, &mut rng)?;
                state.warm_start(point, t)?;
                Estimator::Saga(state)
            }
            EstimatorKind::Sarah { period } => {
                let q = Mode::ALL.map(|m| {
                    period.unwrap_or_else(|| fiber_count(dims, m).div_ceil(batch_sizes[m.index()]))
                });
                Estimator::Sarah(SarahState::new(q)?)
            }
        })
    }

    /// Samples the fibers for one update of `mode`: a uniform bin for SAGA,
    /// `batch_size` distinct fibers otherwise.
    pub fn draw<R: Rng + ?Sized>(&self, dims: [usize; 3], mode: Mode, batch_size: usize, rng: &mut R) -> Result<Draw> {
        match self {
            Estimator::Saga(s) => {
                let bin = rng.random_range(0..s.bin_count(mode));
                Ok(Draw {
                    batch: s.bin(mode, bin).clone(),
                    bin: Some(bin),
                })
            }
            _ => Ok(Draw {
                batch: sample_batch(dims, mode, batch_size, rng)?,
                bin: None,
            }),
        }
    }

    pub fn estimate(&mut self, point: &LL1Factors, t: &DenseTensor3, draw: &Draw) -> Result<Array2<f64>> {
        match self {
            Estimator::Sgd => sgd_estimate(point, t, &draw.batch),
            Estimator::Saga(s) => s.estimate(point, t, draw.batch.mode(), saga_bin(draw)?),
            Estimator::Sarah(s) => s.estimate(point, t, &draw.batch),
        }
    }

    /// Same value as [`Estimator::estimate`] without updating any state.
    pub fn peek(&self, point: &LL1Factors, t: &DenseTensor3, draw: &Draw) -> Result<Array2<f64>> {
        match self {
            Estimator::Sgd => sgd_estimate(point, t, &draw.batch),
            Estimator::Saga(s) => s.peek(point, t, draw.batch.mode(), saga_bin(draw)?),
            Estimator::Sarah(s) => s.peek(point, t, &draw.batch),
        }
    }

    /// Monte Carlo estimate of the estimator's mean squared error against
    /// the exact block gradient at `point`, over `n_draws` independent draws.
    /// Persistent state is left untouched.
    pub fn mse_probe<R: Rng + ?Sized>(
        &self,
        point: &LL1Factors,
        t: &DenseTensor3,
        mode: Mode,
        batch_size: usize,
        n_draws: usize,
        rng: &mut R,
    ) -> Result<MseEstimate> {
        if n_draws == 0 {
            return Err(MidasError::Config("mse probe needs at least one draw".into()));
        }
        let exact = full_gradient(point, t, mode)?;
        let mut samples = Vec::with_capacity(n_draws);
        for _ in 0..n_draws {
            let draw = self.draw(t.dims(), mode, batch_size, rng)?;
            let g = self.peek(point, t, &draw)?;
            samples.push(frobenius_sq(&(g - &exact)));
        }
        let n = n_draws as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if n_draws > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(MseEstimate {
            mean,
            std_err: (var / n).sqrt(),
            draws: n_draws,
        })
    }
}

fn saga_bin(draw: &Draw) -> Result<usize> {
    draw.bin
        .ok_or_else(|| MidasError::InvalidBatch("SAGA needs a bin draw".into()))
}
