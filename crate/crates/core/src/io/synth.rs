//! Synthetic LL1 tensors with Gaussian noise at a requested SNR.

use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{MidasError, Result};
use crate::io::factors_dir::write_factors;
use crate::io::tensor_file::write_tensor;
use crate::model::{reconstruct, LL1Factors, RankVector};
use crate::rng::{stream, Stream};
use crate::tensor::DenseTensor3;

/// Ground-truth factors with i.i.d. Uniform(0, 1) entries and
/// `X = reconstruct(F) + N`, where `N` is Gaussian noise rescaled so that
/// `10 log10(||X_clean||^2 / ||N||^2)` equals `snr_db` exactly. `None` or an
/// infinite SNR gives a noiseless tensor.
pub fn synthesize(
    dims: [usize; 3],
    ranks: RankVector,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<(DenseTensor3, LL1Factors)> {
    DenseTensor3::zeros(dims)?;
    if let Some(s) = snr_db {
        if s.is_nan() {
            return Err(MidasError::Config("snr must be a number or inf".into()));
        }
    }
    let truth = LL1Factors::random_uniform(dims, ranks, &mut stream(seed, Stream::Truth));
    let clean = reconstruct(&truth);
    let snr = match snr_db {
        Some(s) if s.is_finite() => s,
        _ => return Ok((clean, truth)),
    };
    let mut rng = stream(seed, Stream::Noise);
    let noise: Vec<f64> = (0..clean.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise_sq: f64 = noise.iter().map(|v| v * v).sum();
    let target_sq = clean.frobenius_norm_sq() / 10f64.powf(snr / 10.0);
    let scale = if noise_sq > 0.0 { (target_sq / noise_sq).sqrt() } else { 0.0 };
    let data = clean
        .data()
        .iter()
        .zip(&noise)
        .map(|(c, n)| c + scale * n)
        .collect();
    Ok((DenseTensor3::new(dims, data)?, truth))
}

/// Sidecar directory for the ground truth of `out`: `<out>.factors`.
pub fn sidecar_dir(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".factors");
    PathBuf::from(name)
}

/// Writes the tensor to `out` and its factors to [`sidecar_dir`].
pub fn write_synth(out: &Path, x: &DenseTensor3, truth: &LL1Factors) -> Result<PathBuf> {
    write_tensor(out, x)?;
    let side = sidecar_dir(out);
    write_factors(&side, truth)?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranks() -> RankVector {
        RankVector::new(vec![2, 3]).unwrap()
    }

    #[test]
    fn noiseless_is_exact() {
        let (x, f) = synthesize([5, 6, 7], ranks(), None, 1).unwrap();
        assert_eq!(x.distance_sq(&reconstruct(&f)).unwrap(), 0.0);
        let (y, _) = synthesize([5, 6, 7], ranks(), Some(f64::INFINITY), 1).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn snr_is_hit() {
        for snr in [0.0, 20.0, 45.5] {
            let (x, f) = synthesize([6, 5, 4], ranks(), Some(snr), 7).unwrap();
            let clean = reconstruct(&f);
            let measured = 10.0 * (clean.frobenius_norm_sq() / x.distance_sq(&clean).unwrap()).log10();
            assert!((measured - snr).abs() < 1e-9, "{measured} vs {snr}");
        }
    }

    #[test]
    fn factors_in_unit_interval() {
        let (_, f) = synthesize([4, 4, 4], ranks(), None, 3).unwrap();
        for m in crate::tensor::Mode::ALL {
            assert!(f.factor(m).iter().all(|&v| (0.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_dir(Path::new("a/x.dtensor")), PathBuf::from("a/x.dtensor.factors"));
    }
}
