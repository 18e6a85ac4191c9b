//! Checks of the Gram and Lipschitz helpers against a dense eigensolver.

use midas_ll1::model::{build_h, gram, lipschitz_bound, normalizer};
use midas_ll1::{LL1Factors, Mode, RankVector};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn factors(dims: [usize; 3], ranks: &[usize], seed: u64) -> LL1Factors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LL1Factors::random_uniform(dims, RankVector::new(ranks.to_vec()).unwrap(), &mut rng)
}

// H built entry by entry from the definition, independent of the library.
fn oracle_h(f: &LL1Factors, mode: Mode) -> DMatrix<f64> {
    let [i1, i2, i3] = f.dims();
    let ranks = f.ranks().ranks().to_vec();
    let (a1, a2, a3) = (f.factor(Mode::One), f.factor(Mode::Two), f.factor(Mode::Three));
    let mut block = Vec::new();
    for (r, &lr) in ranks.iter().enumerate() {
        block.extend(std::iter::repeat(r).take(lr));
    }
    let total = block.len();
    match mode {
        Mode::One => DMatrix::from_fn(i2 * i3, total, |j, l| a2[[j % i2, l]] * a3[[j / i2, block[l]]]),
        Mode::Two => DMatrix::from_fn(i1 * i3, total, |j, l| a1[[j % i1, l]] * a3[[j / i1, block[l]]]),
        Mode::Three => DMatrix::from_fn(i1 * i2, ranks.len(), |j, r| {
            (0..total)
                .filter(|&l| block[l] == r)
                .map(|l| a1[[j % i1, l]] * a2[[j / i1, l]])
                .sum()
        }),
    }
}

const MODES: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

#[test]
fn h_matches_definition() {
    let f = factors([4, 5, 3], &[2, 1, 3], 11);
    for mode in MODES {
        let h = build_h(&f, mode);
        let o = oracle_h(&f, mode);
        assert_eq!((h.nrows(), h.ncols()), (o.nrows(), o.ncols()));
        for j in 0..o.nrows() {
            for l in 0..o.ncols() {
                assert!((h[[j, l]] - o[(j, l)]).abs() <= 1e-12, "{mode:?} ({j},{l})");
            }
        }
    }
}

#[test]
fn gram_matches_dense_product() {
    let f = factors([6, 4, 5], &[3, 2], 12);
    for mode in MODES {
        let g = gram(&f, mode);
        let h = oracle_h(&f, mode);
        let o = h.transpose() * &h;
        for a in 0..o.nrows() {
            for b in 0..o.ncols() {
                let tol = 1e-10 * o[(a, b)].abs().max(1.0);
                assert!((g[[a, b]] - o[(a, b)]).abs() <= tol, "{mode:?} ({a},{b})");
            }
        }
    }
}

#[test]
fn lipschitz_matches_symmetric_eigensolver() {
    for seed in 0..8 {
        let dims = [5 + seed as usize % 3, 4, 6];
        let f = factors(dims, &[2, 2, 1], 100 + seed);
        for mode in MODES {
            let h = oracle_h(&f, mode);
            let eig = (h.transpose() * &h).symmetric_eigen();
            let expected = eig.eigenvalues.max() / normalizer(dims);
            let got = lipschitz_bound(&f, mode);
            assert!(
                (got - expected).abs() <= 1e-5 * expected,
                "seed {seed} {mode:?}: {got} vs {expected}"
            );
        }
    }
}
