//! Rank-(Lr,Lr,1) factors, reconstruction, objective and exact gradients.
//!
//! The model is `X ~ sum_r (A1_r A2_r^T) o c_r` with `A1 = [A1_1 .. A1_R]`
//! (`I1 x L`), `A2 = [A2_1 .. A2_R]` (`I2 x L`) and `A3 = [c_1 .. c_R]`
//! (`I3 x R`), `L = sum_r L_r`. Fixing two factors, the mode-n unfolding is
//! linear in the third: `X_(n) = H_n A_n^T` with
//!
//! ```text
//! H_1 = [c_1 (x) A2_1, ..., c_R (x) A2_R]                 J_1 x L
//! H_2 = [c_1 (x) A1_1, ..., c_R (x) A1_R]                 J_2 x L
//! H_3 = [(A2_1 (.) A1_1) 1, ..., (A2_R (.) A1_R) 1]        J_3 x R
//! ```
//!
//! The smooth loss is `f = ||X - Xhat||_F^2 / (2 I1 I2 I3)`, whose block
//! gradient is `(A_n H_n^T H_n - X_(n)^T H_n) / (I1 I2 I3)`.

use std::ops::Range;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{MidasError, Result};
use crate::prox::RegularizerSpec;
use crate::tensor::{unfold, DenseTensor3, FiberBatch, Mode};

/// Block widths `[L_1, ..., L_R]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankVector {
    ranks: Vec<usize>,
    offsets: Vec<usize>,
    block_of: Vec<usize>,
}

impl RankVector {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(MidasError::Config("rank vector must have R >= 1".into()));
        }
        if ranks.contains(&0) {
            return Err(MidasError::Config(format!(
                "all block ranks must be >= 1, got {ranks:?}"
            )));
        }
        let mut offsets = Vec::with_capacity(ranks.len() + 1);
        let mut block_of = Vec::new();
        offsets.push(0);
        for (r, &l) in ranks.iter().enumerate() {
            offsets.push(offsets[r] + l);
            block_of.extend(std::iter::repeat_n(r, l));
        }
        Ok(RankVector {
            ranks,
            offsets,
            block_of,
        })
    }

    /// `R` copies of `l`.
    pub fn uniform(terms: usize, l: usize) -> Result<Self> {
        RankVector::new(vec![l; terms])
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Number of terms `R`.
    pub fn terms(&self) -> usize {
        self.ranks.len()
    }

    /// `L = sum_r L_r`.
    pub fn total(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(1)
    }

    /// Column range of block `r` inside `A1` / `A2`.
    pub fn block(&self, r: usize) -> Range<usize> {
        self.offsets[r]..self.offsets[r + 1]
    }

    /// Term index owning column `l` of `A1` / `A2`.
    pub fn block_of(&self, l: usize) -> usize {
        self.block_of[l]
    }

    /// Column count of factor `mode`: `L` for modes 1 and 2, `R` for mode 3.
    pub fn width(&self, mode: Mode) -> usize {
        match mode {
            Mode::One | Mode::Two => self.total(),
            Mode::Three => self.terms(),
        }
    }
}

/// Partitioned factor triple.
#[derive(Debug, Clone, PartialEq)]
pub struct LL1Factors {
    factors: [Array2<f64>; 3],
    ranks: RankVector,
}

impl LL1Factors {
    pub fn new(a1: Array2<f64>, a2: Array2<f64>, a3: Array2<f64>, ranks: RankVector) -> Result<Self> {
        let f = LL1Factors {
            factors: [a1, a2, a3],
            ranks,
        };
        for mode in Mode::ALL {
            let m = f.factor(mode);
            let want = f.ranks.width(mode);
            if m.ncols() != want {
                return Err(MidasError::Shape(format!(
                    "A{} has {} columns, rank vector needs {}",
                    mode,
                    m.ncols(),
                    want
                )));
            }
            if m.nrows() == 0 {
                return Err(MidasError::Shape(format!("A{mode} has no rows")));
            }
        }
        Ok(f)
    }

    pub fn zeros(dims: [usize; 3], ranks: RankVector) -> Self {
        let factors = Mode::ALL.map(|m| Array2::zeros((dims[m.index()], ranks.width(m))));
        LL1Factors { factors, ranks }
    }

    /// I.i.d. Uniform(0, 1) entries.
    pub fn random_uniform<R: Rng + ?Sized>(dims: [usize; 3], ranks: RankVector, rng: &mut R) -> Self {
        let factors = Mode::ALL.map(|m| {
            Array2::from_shape_simple_fn((dims[m.index()], ranks.width(m)), || rng.random::<f64>())
        });
        LL1Factors { factors, ranks }
    }

    pub fn ranks(&self) -> &RankVector {
        &self.ranks
    }

    pub fn dims(&self) -> [usize; 3] {
        Mode::ALL.map(|m| self.factors[m.index()].nrows())
    }

    pub fn factor(&self, mode: Mode) -> &Array2<f64> {
        &self.factors[mode.index()]
    }

    /// Replaces one factor; the shape must not change.
    pub fn set_factor(&mut self, mode: Mode, value: Array2<f64>) -> Result<()> {
        if value.dim() != self.factors[mode.index()].dim() {
            return Err(MidasError::Shape(format!(
                "A{} must stay {:?}, got {:?}",
                mode,
                self.factors[mode.index()].dim(),
                value.dim()
            )));
        }
        self.factors[mode.index()] = value;
        Ok(())
    }

    /// Copy with factor `mode` replaced.
    pub fn with_factor(&self, mode: Mode, value: Array2<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.set_factor(mode, value)?;
        Ok(out)
    }

    pub fn into_factors(self) -> [Array2<f64>; 3] {
        self.factors
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn check_tensor(&self, t: &DenseTensor3) -> Result<()> {
        if self.dims() != t.dims() {
            return Err(MidasError::Shape(format!(
                "factors describe {:?}, tensor is {:?}",
                self.dims(),
                t.dims()
            )));
        }
        Ok(())
    }

    /// `||A^a - A^b||_F^2` summed over the three factors.
    pub fn distance_sq(&self, other: &LL1Factors) -> f64 {
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| frobenius_sq(&(a - b)))
            .sum()
    }
}

/// Objective split into smooth and regularizer parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub f: f64,
    pub h: f64,
    pub phi: f64,
}

pub(crate) fn frobenius_sq(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `I1 * I2 * I3`, the `I^N` normalizer of the loss.
pub fn normalizer(dims: [usize; 3]) -> f64 {
    dims.iter().product::<usize>() as f64
}

/// `Xhat = sum_r (A1_r A2_r^T) o c_r`.
pub fn reconstruct(factors: &LL1Factors) -> DenseTensor3 {
    let [i1, i2, i3] = factors.dims();
    let a1 = factors.factor(Mode::One);
    let a2 = factors.factor(Mode::Two);
    let a3 = factors.factor(Mode::Three);
    let ranks = factors.ranks();
    let a2t = a2.t();
    // Slices are independent, so the result does not depend on the pool size.
    let slices: Vec<Vec<f64>> = (0..i3)
        .into_par_iter()
        .map(|k| {
            let mut scaled = a1.clone();
            for l in 0..ranks.total() {
                let w = a3[[k, ranks.block_of(l)]];
                scaled.column_mut(l).mapv_inplace(|v| v * w);
            }
            // slice(i1, i2) = A1 diag(w) A2^T, written first index fastest
            scaled.dot(&a2t).t().iter().copied().collect()
        })
        .collect();
    let data = slices.concat();
    DenseTensor3::from_parts_unchecked([i1, i2, i3], data)
}

/// Rows `rows` of `H_mode`, built without forming the full matrix.
pub fn h_rows(factors: &LL1Factors, mode: Mode, rows: &[usize]) -> Array2<f64> {
    let dims = factors.dims();
    let ranks = factors.ranks();
    let width = ranks.width(mode);
    let a1 = factors.factor(Mode::One);
    let a2 = factors.factor(Mode::Two);
    let a3 = factors.factor(Mode::Three);
    let mut h = Array2::zeros((rows.len(), width));
    for (b, &j) in rows.iter().enumerate() {
        let mut out = h.row_mut(b);
        match mode {
            Mode::One => {
                let (ip, iq) = (j % dims[1], j / dims[1]);
                for l in 0..width {
                    out[l] = a3[[iq, ranks.block_of(l)]] * a2[[ip, l]];
                }
            }
            Mode::Two => {
                let (ip, iq) = (j % dims[0], j / dims[0]);
                for l in 0..width {
                    out[l] = a3[[iq, ranks.block_of(l)]] * a1[[ip, l]];
                }
            }
            Mode::Three => {
                let (ip, iq) = (j % dims[0], j / dims[0]);
                for l in 0..ranks.total() {
                    out[ranks.block_of(l)] += a1[[ip, l]] * a2[[iq, l]];
                }
            }
        }
    }
    h
}

/// Full `H_mode` (`J_n x L` or `J_3 x R`), rows aligned with `unfold`.
pub fn build_h(factors: &LL1Factors, mode: Mode) -> Array2<f64> {
    let fibers = crate::tensor::fiber_count(factors.dims(), mode);
    let rows: Vec<usize> = (0..fibers).collect();
    h_rows(factors, mode, &rows)
}

/// `H_mode^T H_mode` from small Gram blocks of the other factors.
pub fn gram(factors: &LL1Factors, mode: Mode) -> Array2<f64> {
    let ranks = factors.ranks();
    let g1 = || {
        let a = factors.factor(Mode::One);
        a.t().dot(a)
    };
    let g2 = || {
        let a = factors.factor(Mode::Two);
        a.t().dot(a)
    };
    match mode {
        Mode::One | Mode::Two => {
            let a3 = factors.factor(Mode::Three);
            let c = a3.t().dot(a3);
            let inner = if mode == Mode::One { g2() } else { g1() };
            let w = ranks.total();
            Array2::from_shape_fn((w, w), |(l, m)| {
                c[[ranks.block_of(l), ranks.block_of(m)]] * inner[[l, m]]
            })
        }
        Mode::Three => {
            let prod = g1() * g2();
            let r = ranks.terms();
            Array2::from_shape_fn((r, r), |(a, b)| {
                prod.slice(s![ranks.block(a), ranks.block(b)]).sum()
            })
        }
    }
}

/// `X_(n)^T H_n`, the MTTKRP for this model.
pub fn mttkrp(factors: &LL1Factors, t: &DenseTensor3, mode: Mode) -> Array2<f64> {
    let h = build_h(factors, mode);
    unfold(t, mode).matrix.t().dot(&h)
}

/// `f` and `h` at the given factors.
pub fn objective(factors: &LL1Factors, t: &DenseTensor3, reg: &RegularizerSpec) -> Result<ObjectiveValue> {
    factors.check_tensor(t)?;
    let xhat = reconstruct(factors);
    let f = t.distance_sq(&xhat)? / (2.0 * normalizer(t.dims()));
    let h: f64 = Mode::ALL
        .iter()
        .map(|&m| reg.value(m, factors.factor(m)))
        .sum();
    Ok(ObjectiveValue { f, h, phi: f + h })
}

/// Exact block gradient `(A_n H_n^T H_n - X_(n)^T H_n) / (I1 I2 I3)`.
/// Columns of block `r` are the partition-wise gradient for `A_{n,r}`.
pub fn full_gradient(factors: &LL1Factors, t: &DenseTensor3, mode: Mode) -> Result<Array2<f64>> {
    factors.check_tensor(t)?;
    let g = gram(factors, mode);
    let m = mttkrp(factors, t, mode);
    let a = factors.factor(mode);
    Ok((a.dot(&g) - m) / normalizer(t.dims()))
}

/// Block gradient from an explicit fiber batch, scaled by `1 / (I_n |F|)`.
/// Identical to [`full_gradient`] in expectation over uniform batches.
pub fn batch_gradient(factors: &LL1Factors, t: &DenseTensor3, batch: &FiberBatch) -> Result<Array2<f64>> {
    factors.check_tensor(t)?;
    let mode = batch.mode();
    let h = h_rows(factors, mode, batch.indices());
    let x = crate::tensor::gather_fiber_rows(t, batch)?;
    let a = factors.factor(mode);
    let scale = (t.dim(mode) * batch.len()) as f64;
    Ok((a.dot(&h.t().dot(&h)) - x.t().dot(&h)) / scale)
}

const POWER_MAX_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-6;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// normalized all-ones vector. Stops once `||G v - lambda v|| <= 1e-6 lambda`
/// or after 1000 iterations.
pub fn lambda_max_psd(g: &Array2<f64>) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = g.dot(&v);
        lambda = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let residual = (&w - &(&v * lambda)).mapv(|x| x * x).sum().sqrt();
        if residual <= POWER_TOL * lambda.abs() {
            break;
        }
        v = w / norm;
    }
    lambda
}

/// `lambda_max(H_n^T H_n) / (I1 I2 I3)`, a Lipschitz constant of the block
/// gradient in `A_n`. It does not depend on `A_n` itself.
pub fn lipschitz_bound(factors: &LL1Factors, mode: Mode) -> f64 {
    lambda_max_psd(&gram(factors, mode)) / normalizer(factors.dims())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::Regularizer;
    use crate::tensor::FiberBatch;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_factors(dims: [usize; 3], ranks: Vec<usize>, seed: u64) -> LL1Factors {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = LL1Factors::random_uniform(dims, RankVector::new(ranks).unwrap(), &mut rng);
        let [a1, a2, a3] = f.clone().into_factors();
        LL1Factors::new(
            a1.mapv(|v| v - 0.5),
            a2.mapv(|v| v - 0.5),
            a3.mapv(|v| v - 0.5),
            f.ranks().clone(),
        )
        .unwrap()
    }

    fn brute_reconstruct(f: &LL1Factors) -> DenseTensor3 {
        let ranks = f.ranks();
        DenseTensor3::from_fn(f.dims(), |i1, i2, i3| {
            let mut s = 0.0;
            for r in 0..ranks.terms() {
                for l in ranks.block(r) {
                    s += f.factor(Mode::One)[[i1, l]]
                        * f.factor(Mode::Two)[[i2, l]]
                        * f.factor(Mode::Three)[[i3, r]];
                }
            }
            s
        })
        .unwrap()
    }

    #[test]
    fn rank_vector_layout() {
        let r = RankVector::new(vec![2, 1, 3]).unwrap();
        assert_eq!(r.total(), 6);
        assert_eq!(r.block(2), 3..6);
        assert_eq!(r.block_of(2), 1);
        assert_eq!(r.width(Mode::Three), 3);
        assert!(RankVector::new(vec![]).is_err());
        assert!(RankVector::new(vec![1, 0]).is_err());
    }

    #[test]
    fn reconstruct_rank_one_outer_product() {
        let f = LL1Factors::new(
            array![[1.0], [0.0]],
            array![[1.0], [0.0]],
            array![[1.0], [1.0]],
            RankVector::new(vec![1]).unwrap(),
        )
        .unwrap();
        let x = reconstruct(&f);
        for i1 in 0..2 {
            for i2 in 0..2 {
                for i3 in 0..2 {
                    let want = if i1 == 0 && i2 == 0 { 1.0 } else { 0.0 };
                    assert_eq!(x.get(i1, i2, i3), want);
                }
            }
        }
    }

    #[test]
    fn reconstruct_zero_a3_is_zero() {
        let mut f = rand_factors([3, 4, 2], vec![2], 1);
        f.set_factor(Mode::Three, Array2::zeros((2, 1))).unwrap();
        assert!(reconstruct(&f).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reconstruct_matches_triple_loop() {
        let f = rand_factors([4, 5, 3], vec![2, 2], 3);
        let x = reconstruct(&f);
        let y = brute_reconstruct(&f);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn h_factorizes_unfolding() {
        let f = rand_factors([4, 5, 3], vec![2, 1, 3], 4);
        let x = reconstruct(&f);
        for mode in Mode::ALL {
            let h = build_h(&f, mode);
            let diff = unfold(&x, mode).matrix - h.dot(&f.factor(mode).t());
            assert!(frobenius_sq(&diff).sqrt() <= 1e-10);
        }
    }

    #[test]
    fn h1_all_ones() {
        let ones = Array2::from_elem((2, 1), 1.0);
        let f = LL1Factors::new(ones.clone(), ones.clone(), ones, RankVector::new(vec![1]).unwrap()).unwrap();
        assert_eq!(build_h(&f, Mode::One), Array2::from_elem((4, 1), 1.0));
    }

    #[test]
    fn h3_with_unit_block_is_kronecker() {
        let f = rand_factors([3, 2, 2], vec![1, 2], 8);
        let h3 = build_h(&f, Mode::Three);
        let a1 = f.factor(Mode::One);
        let a2 = f.factor(Mode::Two);
        for i2 in 0..2 {
            for i1 in 0..3 {
                assert_eq!(h3[[i1 + 3 * i2, 0]], a2[[i2, 0]] * a1[[i1, 0]]);
            }
        }
    }

    #[test]
    fn gram_matches_materialized_h() {
        let f = rand_factors([4, 3, 5], vec![2, 1], 9);
        for mode in Mode::ALL {
            let h = build_h(&f, mode);
            let direct = h.t().dot(&h);
            let g = gram(&f, mode);
            for ((i, j), v) in g.indexed_iter() {
                assert!((v - direct[[i, j]]).abs() <= 1e-12 * direct[[i, j]].abs().max(1.0));
                assert!((v - g[[j, i]]).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn objective_zero_at_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = LL1Factors::random_uniform([3, 3, 3], RankVector::new(vec![2]).unwrap(), &mut rng);
        let x = reconstruct(&f);
        let obj = objective(&f, &x, &RegularizerSpec::uniform(Regularizer::NonNegative)).unwrap();
        assert_eq!(obj.f, 0.0);
        assert_eq!(obj.phi, 0.0);
    }

    #[test]
    fn objective_of_zero_factors() {
        let x = DenseTensor3::from_fn([2, 3, 4], |a, b, c| (a + b * c) as f64).unwrap();
        let f = LL1Factors::zeros([2, 3, 4], RankVector::new(vec![1, 1]).unwrap());
        let obj = objective(&f, &x, &RegularizerSpec::none()).unwrap();
        assert_eq!(obj.f, x.frobenius_norm_sq() / (2.0 * 24.0));
    }

    #[test]
    fn objective_matches_triple_loop() {
        let f = rand_factors([4, 5, 3], vec![2, 2], 10);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = DenseTensor3::from_fn([4, 5, 3], |_, _, _| rng.random::<f64>()).unwrap();
        let y = brute_reconstruct(&f);
        let mut rss = 0.0;
        for i3 in 0..3 {
            for i2 in 0..5 {
                for i1 in 0..4 {
                    rss += (x.get(i1, i2, i3) - y.get(i1, i2, i3)).powi(2);
                }
            }
        }
        let obj = objective(&f, &x, &RegularizerSpec::none()).unwrap();
        assert!((obj.f - rss / 120.0).abs() <= 1e-12);
    }

    #[test]
    fn objective_flags_infeasible_factors() {
        let f = rand_factors([3, 3, 3], vec![1], 11);
        let x = DenseTensor3::zeros([3, 3, 3]).unwrap();
        let obj = objective(&f, &x, &RegularizerSpec::uniform(Regularizer::NonNegative)).unwrap();
        assert_eq!(obj.phi, f64::INFINITY);
        assert!(obj.f >= 0.0);
    }

    #[test]
    fn gradient_vanishes_at_exact_factors() {
        let f = rand_factors([4, 3, 5], vec![2, 1], 12);
        let x = reconstruct(&f);
        for mode in Mode::ALL {
            let g = full_gradient(&f, &x, mode).unwrap();
            assert!(frobenius_sq(&g).sqrt() <= 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = rand_factors([4, 5, 3], vec![2, 1], 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = DenseTensor3::from_fn([4, 5, 3], |_, _, _| rng.random::<f64>()).unwrap();
        let reg = RegularizerSpec::none();
        let h = 1e-6;
        for mode in Mode::ALL {
            let g = full_gradient(&f, &x, mode).unwrap();
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for ((i, j), &gij) in g.indexed_iter() {
                let mut plus = f.factor(mode).clone();
                plus[[i, j]] += h;
                let mut minus = f.factor(mode).clone();
                minus[[i, j]] -= h;
                let fp = objective(&f.with_factor(mode, plus).unwrap(), &x, &reg).unwrap().f;
                let fm = objective(&f.with_factor(mode, minus).unwrap(), &x, &reg).unwrap().f;
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - gij).abs() <= 1e-5 * scale, "mode {mode} ({i},{j}): {fd} vs {gij}");
            }
        }
    }

    #[test]
    fn full_batch_gradient_equals_full_gradient() {
        let f = rand_factors([3, 4, 5], vec![2, 1], 15);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = DenseTensor3::from_fn([3, 4, 5], |_, _, _| rng.random::<f64>()).unwrap();
        for mode in Mode::ALL {
            let batch = FiberBatch::full(mode, x.fiber_count(mode));
            let a = batch_gradient(&f, &x, &batch).unwrap();
            let b = full_gradient(&f, &x, mode).unwrap();
            assert!(frobenius_sq(&(&a - &b)).sqrt() <= 1e-12 * frobenius_sq(&b).sqrt().max(1e-300));
        }
    }

    #[test]
    fn lipschitz_small_cases() {
        assert_eq!(lambda_max_psd(&array![[4.0]]), 4.0);
        // 1x1 Gram [4] with I^3 = 8
        let f = LL1Factors::new(
            array![[1.0], [1.0]],
            array![[1.0], [1.0]],
            array![[1.0], [1.0]],
            RankVector::new(vec![1]).unwrap(),
        )
        .unwrap();
        assert_eq!(gram(&f, Mode::Three), array![[4.0]]);
        assert_eq!(lipschitz_bound(&f, Mode::Three), 0.5);
        let sigma = 3.0;
        let g = Array2::<f64>::eye(4) * (sigma * sigma);
        assert!((lambda_max_psd(&g) - 9.0).abs() <= 1e-12);
    }
}
