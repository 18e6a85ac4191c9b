//! Deterministic baselines: cyclic block proximal gradient (PALM) and
//! multiplicative updates for nonnegative LL1 fitting.

use ndarray::Array2;

use super::{initial_factors, Recorder, RunTrace, SolverConfig, StepSize, TraceLevel};
use crate::error::{MidasError, Result};
use crate::model::{frobenius_sq, full_gradient, gram, lipschitz_bound, mttkrp, objective, LL1Factors};
use crate::tensor::{DenseTensor3, Mode};

const MU_EPS: f64 = 1e-12;

/// Drives a cyclic block update `update(factors, mode) -> new A_mode` for
/// `epochs` sweeps of three blocks, honoring `max_iters`, `abs_tol` and the
/// trace level.
fn cyclic_driver(
    config: &SolverConfig,
    t: &DenseTensor3,
    mut factors: LL1Factors,
    mut update: impl FnMut(&LL1Factors, Mode, u64) -> Result<Array2<f64>>,
) -> Result<(LL1Factors, RunTrace)> {
    let mut trace = RunTrace::new(objective(&factors, t, &config.reg)?);
    let mut recorder = Recorder::new(config.depth);
    let cap = config.max_iters.unwrap_or(u64::MAX);
    let mut iter = 0u64;
    'epochs: for epoch in 1..=config.epochs {
        for mode in Mode::ALL {
            if iter >= cap {
                if config.trace_level == TraceLevel::Epoch {
                    trace.records.push(recorder.record(config, t, &factors, epoch, iter)?);
                }
                break 'epochs;
            }
            let next = update(&factors, mode, iter)?;
            if let Some(bad) = next.iter().find(|v| !v.is_finite()) {
                return Err(MidasError::Diverged {
                    iteration: iter + 1,
                    mode,
                    detail: format!("update produced {bad}"),
                });
            }
            let step_sq = frobenius_sq(&(&next - factors.factor(mode)));
            factors.set_factor(mode, next)?;
            recorder.note_step(mode, step_sq);
            iter += 1;
            if config.trace_level == TraceLevel::Iteration {
                let rec = recorder.record(config, t, &factors, epoch, iter)?;
                let done = rec.phi < config.abs_tol;
                trace.records.push(rec);
                if done {
                    break 'epochs;
                }
            }
        }
        if config.trace_level == TraceLevel::Epoch {
            let rec = recorder.record(config, t, &factors, epoch, iter)?;
            let done = rec.phi < config.abs_tol;
            trace.records.push(rec);
            if done {
                break;
            }
        }
    }
    Ok((factors, trace))
}

/// Cyclic full-gradient proximal updates
/// `A_n <- prox_{eta h_n}(A_n - eta grad_{A_n} f)`, one sweep per epoch.
/// With [`StepSize::InverseLipschitz`] every block step minimizes a
/// majorizer, so `phi` never increases.
pub fn palm_baseline(config: &SolverConfig, t: &DenseTensor3) -> Result<(LL1Factors, RunTrace)> {
    config.validate()?;
    let init = initial_factors(config, t)?;
    cyclic_driver(config, t, init, |factors, mode, _| {
        let eta = match config.step {
            StepSize::Constant(eta) => eta,
            StepSize::InverseLipschitz => {
                let l = lipschitz_bound(factors, mode);
                if l > 0.0 {
                    1.0 / l
                } else {
                    1.0
                }
            }
        };
        let grad = full_gradient(factors, t, mode)?;
        let mut target = factors.factor(mode).clone();
        target.scaled_add(-eta, &grad);
        Ok(config.reg.prox(mode, target, eta))
    })
}

/// Cyclic multiplicative updates
/// `A_n <- A_n * (X_(n)^T H_n) / (A_n H_n^T H_n + 1e-12)`.
/// Needs a nonnegative tensor and a strictly positive start.
pub fn als_mu_baseline(config: &SolverConfig, t: &DenseTensor3) -> Result<(LL1Factors, RunTrace)> {
    config.validate()?;
    if t.data().iter().any(|&v| v < 0.0) {
        return Err(MidasError::NegativeTensor);
    }
    let init = initial_factors(config, t)?;
    for mode in Mode::ALL {
        if init.factor(mode).iter().any(|&v| v <= 0.0) {
            return Err(MidasError::Config(
                "multiplicative updates need a strictly positive initialization".into(),
            ));
        }
    }
    cyclic_driver(config, t, init, |factors, mode, _| {
        let a = factors.factor(mode);
        let numer = mttkrp(factors, t, mode);
        let denom = a.dot(&gram(factors, mode));
        let mut next = a.clone();
        ndarray::Zip::from(&mut next)
            .and(&numer)
            .and(&denom)
            .for_each(|x, &n, &d| *x *= n / (d + MU_EPS));
        Ok(next)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reconstruct, RankVector};
    use crate::prox::RegularizerSpec;
    use crate::rng::{stream, Stream};
    use crate::solver::Init;

    fn nonneg_instance(seed: u64) -> (LL1Factors, DenseTensor3) {
        let mut rng = stream(seed, Stream::Noise);
        let truth = LL1Factors::random_uniform([6, 5, 4], RankVector::new(vec![2, 1]).unwrap(), &mut rng);
        (truth.clone(), reconstruct(&truth))
    }

    #[test]
    fn palm_is_monotone() {
        let (truth, x) = nonneg_instance(1);
        let mut c = SolverConfig::new(truth.ranks().clone());
        c.step = StepSize::InverseLipschitz;
        c.reg = RegularizerSpec::none();
        c.epochs = 30;
        c.trace_level = TraceLevel::Iteration;
        c.seed = 4;
        let (_, trace) = palm_baseline(&c, &x).unwrap();
        let mut prev = trace.initial.phi;
        for r in &trace.records {
            assert!(r.phi <= prev + 1e-10, "{} > {}", r.phi, prev);
            prev = r.phi;
        }
    }

    #[test]
    fn mu_fixed_point_is_kept() {
        let (truth, x) = nonneg_instance(2);
        let mut c = SolverConfig::new(truth.ranks().clone());
        c.init = Init::Provided(truth.clone());
        c.epochs = 1;
        let (out, _) = als_mu_baseline(&c, &x).unwrap();
        for m in Mode::ALL {
            for (a, b) in out.factor(m).iter().zip(truth.factor(m).iter()) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0));
            }
        }
    }

    #[test]
    fn mu_stays_positive_and_monotone() {
        let (truth, x) = nonneg_instance(3);
        let mut c = SolverConfig::new(truth.ranks().clone());
        c.epochs = 40;
        c.seed = 9;
        c.trace_level = TraceLevel::Iteration;
        let (out, trace) = als_mu_baseline(&c, &x).unwrap();
        for m in Mode::ALL {
            assert!(out.factor(m).iter().all(|&v| v > 0.0));
        }
        let mut prev = trace.initial.phi;
        for r in &trace.records {
            assert!(r.phi <= prev + 1e-8);
            prev = r.phi;
        }
    }

    #[test]
    fn mu_rejects_negative_tensor() {
        let x = DenseTensor3::from_fn([2, 2, 2], |a, _, _| a as f64 - 0.5).unwrap();
        let c = SolverConfig::new(RankVector::new(vec![1]).unwrap());
        assert!(matches!(als_mu_baseline(&c, &x), Err(MidasError::NegativeTensor)));
    }
}
