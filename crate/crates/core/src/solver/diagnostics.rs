//! Step-size feasibility and the Lyapunov surrogate.
//!
//! With limits `alpha`, `beta` of the inertial schedules, step bound
//! `eta`, Lipschitz constant `L` and variance constant `gamma`:
//!
//! ```text
//! b       = (1 - t alpha - 2 L eta - gamma eta) / (2 eta)
//! a_i     = 3 L t beta^2 / 2 + gamma / 2 + alpha / (2 eta)      i = 1..t+1
//! delta   = b - sum_{j=1}^{t+1} (j + 1) a_j
//! tail    = (t + 2) a_{t+1} - gamma / 2
//! ```
//!
//! Descent of the Lyapunov function in expectation needs `delta > 0` and
//! `tail > 0`. The surrogate drops the unobservable estimator-error term:
//! `Psi = Phi + sum_{i=1}^{t+1} sum_{j=i}^{t+1} (j + 1) a_j ||A^{k+1-i} - A^{k-i}||^2`.

use crate::solver::config::{SolverConfig, StepSize};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub depth: usize,
    pub eta_bar: f64,
    pub b_lower: f64,
    /// `a_1 .. a_{t+1}`.
    pub a_bar: Vec<f64>,
    pub delta: f64,
    pub tail_margin: f64,
    pub feasible: bool,
    /// Largest step for which `delta > 0` under the same limits, if any.
    pub eta_max: Option<f64>,
}

/// Feasibility from explicit schedule limits.
pub fn feasibility_from_limits(
    depth: usize,
    alpha: f64,
    beta: f64,
    eta_bar: f64,
    lipschitz: f64,
    gamma: f64,
) -> FeasibilityReport {
    let t = depth as f64;
    let b_lower = (1.0 - t * alpha - 2.0 * lipschitz * eta_bar - gamma * eta_bar) / (2.0 * eta_bar);
    let a = 1.5 * lipschitz * t * beta * beta + 0.5 * gamma + alpha / (2.0 * eta_bar);
    let a_bar = vec![a; depth + 1];
    let weighted: f64 = a_bar.iter().enumerate().map(|(j, a)| (j + 2) as f64 * a).sum();
    let delta = b_lower - weighted;
    let tail_margin = (t + 2.0) * a_bar[depth] - 0.5 * gamma;
    // With gamma = 0 and no inertia the tail term vanishes from the
    // Lyapunov function altogether, so zero counts as satisfied.
    let tail_ok = tail_margin > 0.0 || (gamma == 0.0 && tail_margin >= 0.0);

    // delta > 0  <=>  1 - t alpha - S alpha > eta (2L + gamma + S (3 L t beta^2 + gamma))
    let s = ((depth + 1) * (depth + 4)) as f64 / 2.0;
    let numer = 1.0 - t * alpha - s * alpha;
    let denom = 2.0 * lipschitz + gamma + s * (3.0 * lipschitz * t * beta * beta + gamma);
    let eta_max = if numer > 0.0 {
        Some(if denom > 0.0 { numer / denom } else { f64::INFINITY })
    } else {
        None
    };

    FeasibilityReport {
        depth,
        eta_bar,
        b_lower,
        a_bar,
        delta,
        tail_margin,
        feasible: delta > 0.0 && tail_ok,
        eta_max,
    }
}

/// Feasibility of a solver configuration. For the `1/L` step rule the step
/// bound is `1 / lipschitz`.
pub fn feasibility_check(config: &SolverConfig, lipschitz: f64, gamma: f64) -> FeasibilityReport {
    let eta_bar = match config.step {
        StepSize::Constant(eta) => eta,
        StepSize::InverseLipschitz => 1.0 / lipschitz,
    };
    feasibility_from_limits(
        config.depth,
        config.alpha.limit(),
        config.beta.limit(),
        eta_bar,
        lipschitz,
        gamma,
    )
}

/// `step_sq[i-1] = ||A^{k+1-i} - A^{k-i}||_F^2` for `i = 1..=t+1`, newest
/// first. Missing entries count as zero.
pub fn lyapunov_surrogate(phi: f64, step_sq: &[f64], a_bar: &[f64]) -> f64 {
    let mut psi = phi;
    for (i, s) in step_sq.iter().enumerate().take(a_bar.len()) {
        let weight: f64 = (i..a_bar.len()).map(|j| (j + 2) as f64 * a_bar[j]).sum();
        psi += weight * s;
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_inertia_depth_zero_bound() {
        let (l, g) = (2.0, 0.5);
        let bound = 2.0 / (4.0 * l + g * 6.0);
        assert!(feasibility_from_limits(0, 0.0, 0.0, bound * 0.999, l, g).feasible);
        assert!(!feasibility_from_limits(0, 0.0, 0.0, bound * 1.001, l, g).feasible);
        let eta_max = feasibility_from_limits(0, 0.0, 0.0, 0.01, l, g).eta_max.unwrap();
        assert!((eta_max - bound).abs() <= 1e-12 * bound);
    }

    #[test]
    fn gamma_zero_reduces_to_half_inverse_l() {
        let r = feasibility_from_limits(0, 0.0, 0.0, 0.1, 3.0, 0.0);
        assert!((r.eta_max.unwrap() - 1.0 / 6.0).abs() <= 1e-15);
        assert!(r.feasible);
        assert!(!feasibility_from_limits(0, 0.0, 0.0, 0.17, 3.0, 0.0).feasible);
    }

    #[test]
    fn hand_computed_delta() {
        let r = feasibility_from_limits(1, 0.0, 0.0, 0.1, 1.0, 0.0);
        assert!((r.delta - (1.0 - 0.2) / 0.2).abs() <= 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn surrogate_cases() {
        assert_eq!(lyapunov_surrogate(1.5, &[0.0, 0.0], &[3.0, 4.0]), 1.5);
        // t = 0: Phi + 2 a_1 s_1
        assert_eq!(lyapunov_surrogate(1.0, &[0.5], &[3.0]), 1.0 + 2.0 * 3.0 * 0.5);
        // t = 2: weights (2a1+3a2+4a3, 3a2+4a3, 4a3)
        let a = [1.0, 2.0, 3.0];
        let s = [0.1, 0.2, 0.3];
        let want = 5.0 + (2.0 + 6.0 + 12.0) * 0.1 + (6.0 + 12.0) * 0.2 + 12.0 * 0.3;
        assert!((lyapunov_surrogate(5.0, &s, &a) - want).abs() <= 1e-12);
    }
}
