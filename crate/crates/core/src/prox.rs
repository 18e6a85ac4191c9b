//! Regularizers and their proximal maps.

use ndarray::Array2;

use crate::error::{MidasError, Result};
use crate::tensor::Mode;

/// Regularizer on one factor matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    None,
    /// Indicator of the nonnegative orthant.
    NonNegative,
    /// `lambda / 2 * ||A||_F^2`.
    Ridge(f64),
}

impl Regularizer {
    pub fn validate(self) -> Result<Self> {
        match self {
            Regularizer::Ridge(l) if !(l.is_finite() && l >= 0.0) => Err(MidasError::Config(
                format!("ridge weight must be finite and >= 0, got {l}"),
            )),
            r => Ok(r),
        }
    }

    pub fn value(self, a: &Array2<f64>) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::NonNegative => {
                if a.iter().all(|&v| v >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Regularizer::Ridge(l) => 0.5 * l * a.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// `argmin_Z h(Z) + ||Z - M||_F^2 / (2 eta)`.
    pub fn prox(self, m: Array2<f64>, eta: f64) -> Array2<f64> {
        debug_assert!(eta > 0.0);
        match self {
            Regularizer::None => m,
            Regularizer::NonNegative => m.mapv_into(|v| v.max(0.0)),
            Regularizer::Ridge(l) => {
                let shrink = 1.0 / (1.0 + eta * l);
                m.mapv_into(|v| v * shrink)
            }
        }
    }
}

/// Per-mode regularizer choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizerSpec {
    modes: [Regularizer; 3],
}

impl RegularizerSpec {
    pub fn new(modes: [Regularizer; 3]) -> Result<Self> {
        for r in modes {
            r.validate()?;
        }
        Ok(RegularizerSpec { modes })
    }

    pub fn uniform(r: Regularizer) -> Self {
        RegularizerSpec { modes: [r; 3] }
    }

    pub fn none() -> Self {
        Self::uniform(Regularizer::None)
    }

    pub fn get(&self, mode: Mode) -> Regularizer {
        self.modes[mode.index()]
    }

    pub fn modes(&self) -> [Regularizer; 3] {
        self.modes
    }

    pub fn value(&self, mode: Mode, a: &Array2<f64>) -> f64 {
        self.get(mode).value(a)
    }

    /// Applied to all column blocks of `A_mode` at once; every supported
    /// regularizer is separable over blocks.
    pub fn prox(&self, mode: Mode, m: Array2<f64>, eta: f64) -> Array2<f64> {
        self.get(mode).prox(m, eta)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.modes.iter().all(|r| *r == Regularizer::NonNegative)
    }
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self::none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn dist(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn nonnegative_projection() {
        let z = Regularizer::NonNegative.prox(array![[-1.0, 2.0], [0.0, -3.0]], 0.5);
        assert_eq!(z, array![[0.0, 2.0], [0.0, 0.0]]);
    }

    #[test]
    fn ridge_closed_forms() {
        let m = array![[2.0, -1.5]];
        assert_eq!(Regularizer::Ridge(0.0).prox(m.clone(), 0.3), m);
        assert_eq!(Regularizer::Ridge(1.0).prox(array![[2.0]], 1.0), array![[1.0]]);
    }

    #[test]
    fn none_is_identity() {
        let m = array![[1.0, -2.0], [3.5, 0.0]];
        assert_eq!(Regularizer::None.prox(m.clone(), 7.0), m);
    }

    #[test]
    fn values() {
        assert_eq!(Regularizer::NonNegative.value(&array![[0.0, 1.0]]), 0.0);
        assert_eq!(Regularizer::NonNegative.value(&array![[-1e-300]]), f64::INFINITY);
        assert_eq!(Regularizer::Ridge(2.0).value(&array![[1.0, 2.0]]), 5.0);
    }

    #[test]
    fn invalid_ridge_rejected() {
        assert!(RegularizerSpec::new([Regularizer::Ridge(-1.0); 3]).is_err());
        assert!(RegularizerSpec::new([Regularizer::Ridge(f64::NAN); 3]).is_err());
    }

    fn matrix() -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(-10.0..10.0f64, 6).prop_map(|v| Array2::from_shape_vec((2, 3), v).unwrap())
    }

    fn regularizer() -> impl Strategy<Value = Regularizer> {
        prop_oneof![
            Just(Regularizer::None),
            Just(Regularizer::NonNegative),
            (0.0..5.0f64).prop_map(Regularizer::Ridge),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_nonexpansive(r in regularizer(), a in matrix(), b in matrix(), eta in 0.01..10.0f64) {
            let pa = r.prox(a.clone(), eta);
            let pb = r.prox(b.clone(), eta);
            prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-12);
        }

        #[test]
        fn nonnegative_prox_optimality(m in matrix(), eta in 0.01..10.0f64) {
            let z = Regularizer::NonNegative.prox(m.clone(), eta);
            for (zij, mij) in z.iter().zip(m.iter()) {
                prop_assert!(*zij >= 0.0);
                prop_assert!(*zij == *mij || (*zij == 0.0 && *mij < 0.0));
            }
        }
    }
}
