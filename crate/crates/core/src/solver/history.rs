use std::collections::VecDeque;

use ndarray::Array2;

use crate::model::LL1Factors;
use crate::tensor::Mode;

/// Last `t + 2` iterates of each factor block, newest first. A block's
/// history advances only when that block is updated; before that it is
/// padded with the initial value.
#[derive(Debug, Clone)]
pub struct InertialHistory {
    depth: usize,
    blocks: [VecDeque<Array2<f64>>; 3],
}

impl InertialHistory {
    pub fn new(init: &LL1Factors, depth: usize) -> Self {
        let blocks = Mode::ALL.map(|m| std::iter::repeat_n(init.factor(m).clone(), depth + 2).collect());
        InertialHistory { depth, blocks }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `i`-th most recent iterate of `mode` (0 is the current one).
    pub fn get(&self, mode: Mode, i: usize) -> &Array2<f64> {
        &self.blocks[mode.index()][i]
    }

    /// `A^k + sum_{i=1}^{t} coeffs[i-1] (A^{k+1-i} - A^{k-i})`.
    pub fn extrapolate(&self, mode: Mode, coeffs: &[f64]) -> Array2<f64> {
        debug_assert!(coeffs.len() <= self.depth);
        let h = &self.blocks[mode.index()];
        let mut out = h[0].clone();
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                out.scaled_add(c, &(&h[i] - &h[i + 1]));
            }
        }
        out
    }

    pub fn push(&mut self, mode: Mode, value: Array2<f64>) {
        let h = &mut self.blocks[mode.index()];
        h.pop_back();
        h.push_front(value);
    }
}
