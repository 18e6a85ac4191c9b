//! Reconstruction quality: PSNR, RMSE, SAM and CC.
//!
//! Mode 3 is treated as the spectral (band) mode: SAM averages the angle
//! between mode-3 fibers over the `I1 * I2` spatial positions, CC averages
//! the Pearson correlation of each band slice.

use std::fmt;

use crate::error::Result;
use crate::tensor::DenseTensor3;

/// All four metrics plus the number of fibers / bands that had to be
/// skipped (zero norm or zero variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// dB; `+inf` when the reconstruction is exact.
    pub psnr: f64,
    pub rmse: f64,
    /// Radians.
    pub sam: f64,
    pub cc: f64,
    pub sam_skipped: usize,
    pub cc_skipped: usize,
}

/// `10 log10(X_max^2 I1 I2 I3 / ||Xhat - X||_F^2)`.
pub fn psnr(x: &DenseTensor3, xhat: &DenseTensor3) -> Result<f64> {
    let err = x.distance_sq(xhat)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = x.max();
    Ok(10.0 * (peak * peak * x.len() as f64 / err).log10())
}

/// `||Xhat - X||_F / sqrt(I1 I2 I3)`.
pub fn rmse(x: &DenseTensor3, xhat: &DenseTensor3) -> Result<f64> {
    Ok((x.distance_sq(xhat)? / x.len() as f64).sqrt())
}

/// Mean spectral angle and the number of skipped zero-norm fibers.
pub fn sam(x: &DenseTensor3, xhat: &DenseTensor3) -> Result<(f64, usize)> {
    x.check_same_dims(xhat)?;
    let [i1, i2, i3] = x.dims();
    let mut total = 0.0;
    let mut used = 0usize;
    for b in 0..i2 {
        for a in 0..i1 {
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for c in 0..i3 {
                let (u, v) = (x.get(a, b, c), xhat.get(a, b, c));
                dot += u * v;
                nx += u * u;
                ny += v * v;
            }
            if nx == 0.0 || ny == 0.0 {
                continue;
            }
            total += (dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0).acos();
            used += 1;
        }
    }
    let mean = if used == 0 { 0.0 } else { total / used as f64 };
    Ok((mean, i1 * i2 - used))
}

/// Mean per-band Pearson correlation and the number of skipped bands.
pub fn cc(x: &DenseTensor3, xhat: &DenseTensor3) -> Result<(f64, usize)> {
    x.check_same_dims(xhat)?;
    let [i1, i2, i3] = x.dims();
    let band = i1 * i2;
    let mut total = 0.0;
    let mut used = 0usize;
    for c in 0..i3 {
        let xs = &x.data()[c * band..(c + 1) * band];
        let ys = &xhat.data()[c * band..(c + 1) * band];
        let mx = xs.iter().sum::<f64>() / band as f64;
        let my = ys.iter().sum::<f64>() / band as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (u, v) in xs.iter().zip(ys) {
            let (du, dv) = (u - mx, v - my);
            sxy += du * dv;
            sxx += du * du;
            syy += dv * dv;
        }
        if sxx == 0.0 || syy == 0.0 {
            continue;
        }
        total += sxy / (sxx.sqrt() * syy.sqrt());
        used += 1;
    }
    if used < i3 {
        log::debug!("cc: skipped {} zero-variance bands", i3 - used);
    }
    let mean = if used == 0 { 0.0 } else { total / used as f64 };
    Ok((mean, i3 - used))
}

pub fn evaluate(x: &DenseTensor3, xhat: &DenseTensor3) -> Result<MetricReport> {
    let (sam, sam_skipped) = sam(x, xhat)?;
    let (cc, cc_skipped) = cc(x, xhat)?;
    Ok(MetricReport {
        psnr: psnr(x, xhat)?,
        rmse: rmse(x, xhat)?,
        sam,
        cc,
        sam_skipped,
        cc_skipped,
    })
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr,rmse,sam,cc,sam_skipped,cc_skipped";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.psnr, self.rmse, self.sam, self.cc, self.sam_skipped, self.cc_skipped
        )
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "psnr {:>14.6} dB   (ideal inf)", self.psnr)?;
        writeln!(f, "rmse {:>14.6e}      (ideal 0)", self.rmse)?;
        writeln!(f, "sam  {:>14.6e} rad  (ideal 0)", self.sam)?;
        write!(f, "cc   {:>14.6}      (ideal 1)", self.cc)?;
        if self.sam_skipped > 0 || self.cc_skipped > 0 {
            write!(
                f,
                "\nskipped: {} zero fibers (sam), {} flat bands (cc)",
                self.sam_skipped, self.cc_skipped
            )?;
        }
        Ok(())
    }
}
