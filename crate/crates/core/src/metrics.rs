//! Reconstruction quality: NRMSE, HFEN, SSIM and two sharpness measures.
//!
//! Everything except NRMSE is computed on magnitude images.

use ndarray::Array2;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{ImageSequence, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nrmse: f64,
    pub nrmse_per_frame: Vec<f64>,
    pub hfen: f64,
    pub hfen_per_frame: Vec<f64>,
    pub ssim: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Full report for a reconstruction against its reference.
pub fn evaluate(x: &ImageSequence, x_hat: &ImageSequence) -> Result<MetricsReport> {
    Ok(MetricsReport {
        nrmse: nrmse(x, x_hat)?,
        nrmse_per_frame: nrmse_per_frame(x, x_hat)?,
        hfen: hfen(x, x_hat)?,
        hfen_per_frame: hfen_per_frame(x, x_hat)?,
        ssim: ssim(x, x_hat)?,
        m1: sharpness_m1(x_hat),
        m2: sharpness_m2(x_hat),
    })
}

fn sq_norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum()
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den > 0.0 {
        Ok((num / den).sqrt())
    } else {
        Err(Error::Numerical(format!("{what}: reference has zero norm")))
    }
}

/// `‖X − X̂‖_F / ‖X‖_F`.
pub fn nrmse(x: &ImageSequence, x_hat: &ImageSequence) -> Result<f64> {
    x.same_shape(x_hat)?;
    let num = sq_norm(x.data().iter().zip(x_hat.data()).map(|(a, b)| (a - b).norm()));
    let den = sq_norm(x.data().iter().map(|a| a.norm()));
    ratio(num, den, "nrmse")
}

pub fn nrmse_per_frame(x: &ImageSequence, x_hat: &ImageSequence) -> Result<Vec<f64>> {
    x.same_shape(x_hat)?;
    x.frames()
        .zip(x_hat.frames())
        .map(|(a, b)| {
            let num = sq_norm(a.iter().zip(b).map(|(p, q)| (p - q).norm()));
            let den = sq_norm(a.iter().map(|p| p.norm()));
            ratio(num, den, "frame nrmse")
        })
        .collect()
}

fn magnitude_frame(x: &ImageSequence, t: usize) -> Array2<f64> {
    let f = x.frame(t);
    let n_p = x.n_p();
    Array2::from_shape_fn((n_p, x.n_f()), |(r, c)| f[r + n_p * c].norm())
}

pub const LOG_SIZE: usize = 15;
pub const LOG_SIGMA: f64 = 1.5;

/// Rotationally symmetric Laplacian-of-Gaussian kernel.
///
/// The Gaussian is normalized to unit sum, multiplied by
/// `(x² + y² − 2σ²)/σ⁴`, then shifted so the kernel sums to zero.
pub fn log_kernel(size: usize, sigma: f64) -> Array2<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let s2 = sigma * sigma;
    let g = Array2::from_shape_fn((size, size), |(i, j)| {
        let (y, x) = (i as f64 - half, j as f64 - half);
        (-(x * x + y * y) / (2.0 * s2)).exp()
    });
    let g_sum = g.sum();
    let mut h = Array2::from_shape_fn((size, size), |(i, j)| {
        let (y, x) = (i as f64 - half, j as f64 - half);
        g[[i, j]] / g_sum * (x * x + y * y - 2.0 * s2) / (s2 * s2)
    });
    let mean = h.sum() / (size * size) as f64;
    h.mapv_inplace(|v| v - mean);
    h
}

/// Zero-padded "same" convolution of each magnitude frame, via FFT.
fn log_filtered(x: &ImageSequence, kernel: &Array2<f64>) -> Vec<Array2<f64>> {
    let (n_p, n_f) = (x.n_p(), x.n_f());
    let (kr, kc) = kernel.dim();
    let (pr, pc) = (n_p + kr - 1, n_f + kc - 1);
    let mut planner = FftPlanner::<f64>::new();
    let fr = planner.plan_fft_forward(pr);
    let fc = planner.plan_fft_forward(pc);
    let ir = planner.plan_fft_inverse(pr);
    let ic = planner.plan_fft_inverse(pc);

    let fft2 = |buf: &mut Array2<C64>, inverse: bool| {
        let (row_plan, col_plan) = if inverse { (&ir, &ic) } else { (&fr, &fc) };
        for mut col in buf.columns_mut() {
            let mut v: Vec<C64> = col.to_vec();
            row_plan.process(&mut v);
            col.iter_mut().zip(v).for_each(|(d, s)| *d = s);
        }
        for mut row in buf.rows_mut() {
            let mut v: Vec<C64> = row.to_vec();
            col_plan.process(&mut v);
            row.iter_mut().zip(v).for_each(|(d, s)| *d = s);
        }
    };

    let mut kspec = Array2::<C64>::zeros((pr, pc));
    for ((i, j), &v) in kernel.indexed_iter() {
        kspec[[i, j]] = C64::new(v, 0.0);
    }
    fft2(&mut kspec, false);

    let (or, oc) = ((kr - 1) / 2, (kc - 1) / 2);
    let scale = 1.0 / (pr * pc) as f64;
    (0..x.n_fr())
        .map(|t| {
            let mag = magnitude_frame(x, t);
            let mut buf = Array2::<C64>::zeros((pr, pc));
            for ((i, j), &v) in mag.indexed_iter() {
                buf[[i, j]] = C64::new(v, 0.0);
            }
            fft2(&mut buf, false);
            buf.zip_mut_with(&kspec, |a, b| *a *= b);
            fft2(&mut buf, true);
            Array2::from_shape_fn((n_p, n_f), |(i, j)| buf[[i + or, j + oc]].re * scale)
        })
        .collect()
}

fn hfen_parts(x: &ImageSequence, x_hat: &ImageSequence) -> Result<Vec<(f64, f64)>> {
    x.same_shape(x_hat)?;
    let k = log_kernel(LOG_SIZE, LOG_SIGMA);
    let a = log_filtered(x, &k);
    let b = log_filtered(x_hat, &k);
    Ok(a.iter()
        .zip(&b)
        .map(|(fa, fb)| {
            let num = sq_norm(fa.iter().zip(fb.iter()).map(|(p, q)| p - q));
            let den = sq_norm(fa.iter().copied());
            (num, den)
        })
        .collect())
}

/// `‖LoG(|X|) − LoG(|X̂|)‖ / ‖LoG(|X|)‖` over the whole stack.
pub fn hfen(x: &ImageSequence, x_hat: &ImageSequence) -> Result<f64> {
    let parts = hfen_parts(x, x_hat)?;
    let (num, den) = parts.iter().fold((0.0, 0.0), |(n, d), (a, b)| (n + a, d + b));
    ratio(num, den, "hfen")
}

pub fn hfen_per_frame(x: &ImageSequence, x_hat: &ImageSequence) -> Result<Vec<f64>> {
    hfen_parts(x, x_hat)?
        .into_iter()
        .map(|(n, d)| ratio(n, d, "frame hfen"))
        .collect()
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// 1-D Gaussian taps, unit sum.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable, border-renormalized Gaussian average along both axes.
fn local_mean(img: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (n_p, n_f) = img.dim();
    let half = taps.len() as isize / 2;
    let pass = |src: &Array2<f64>, along_rows: bool| -> Array2<f64> {
        Array2::from_shape_fn((n_p, n_f), |(r, c)| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (k, &w) in taps.iter().enumerate() {
                let off = k as isize - half;
                let (rr, cc) = if along_rows {
                    (r as isize + off, c as isize)
                } else {
                    (r as isize, c as isize + off)
                };
                if rr >= 0 && cc >= 0 && (rr as usize) < n_p && (cc as usize) < n_f {
                    acc += w * src[[rr as usize, cc as usize]];
                    wsum += w;
                }
            }
            acc / wsum
        })
    };
    pass(&pass(img, true), false)
}

/// Mean single-scale SSIM of the magnitude images over every pixel-centered
/// window and every frame. Windows are Gaussian (11×11, σ = 1.5), truncated
/// at the image border and renormalized; the dynamic range is `max|X|`.
pub fn ssim(x: &ImageSequence, x_hat: &ImageSequence) -> Result<f64> {
    x.same_shape(x_hat)?;
    let range = x.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if range <= 0.0 {
        return Err(Error::Numerical("ssim: reference is identically zero".into()));
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..x.n_fr() {
        let a = magnitude_frame(x, t);
        let b = magnitude_frame(x_hat, t);
        let mu_a = local_mean(&a, &taps);
        let mu_b = local_mean(&b, &taps);
        let aa = local_mean(&(&a * &a), &taps);
        let bb = local_mean(&(&b * &b), &taps);
        let ab = local_mean(&(&a * &b), &taps);
        for idx in 0..a.len() {
            let (r, c) = (idx / a.ncols(), idx % a.ncols());
            let (ma, mb) = (mu_a[[r, c]], mu_b[[r, c]]);
            let va = aa[[r, c]] - ma * ma;
            let vb = bb[[r, c]] - mb * mb;
            let cov = ab[[r, c]] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Variance of the magnitude over all pixels and frames.
pub fn sharpness_m1(x_hat: &ImageSequence) -> f64 {
    let n = x_hat.data().len() as f64;
    let mean = x_hat.data().iter().map(|z| z.norm()).sum::<f64>() / n;
    x_hat
        .data()
        .iter()
        .map(|z| (z.norm() - mean).powi(2))
        .sum::<f64>()
        / n
}

/// Forward-difference gradient energy of the magnitude, summed over frames
/// and divided by the total pixel count.
pub fn sharpness_m2(x_hat: &ImageSequence) -> f64 {
    let (n_p, n_f, n_fr) = x_hat.shape();
    let mut energy = 0.0;
    for t in 0..n_fr {
        let m = magnitude_frame(x_hat, t);
        for r in 0..n_p {
            for c in 0..n_f {
                if c + 1 < n_f {
                    energy += (m[[r, c + 1]] - m[[r, c]]).powi(2);
                }
                if r + 1 < n_p {
                    energy += (m[[r + 1, c]] - m[[r, c]]).powi(2);
                }
            }
        }
    }
    energy / (n_p * n_f * n_fr) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real_cube(n_p: usize, n_f: usize, vals: &[f64]) -> ImageSequence {
        let n_fr = vals.len() / (n_p * n_f);
        ImageSequence::new(n_p, n_f, n_fr, vals.iter().map(|&v| C64::new(v, 0.0)).collect()).unwrap()
    }

    #[test]
    fn nrmse_hand_cases() {
        let x = real_cube(2, 1, &[1.0, 0.0]);
        let y = real_cube(2, 1, &[0.0, 1.0]);
        assert!((nrmse(&x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(nrmse(&x, &x).unwrap(), 0.0);
        let zero = ImageSequence::zeros(2, 1, 1);
        assert_eq!(nrmse(&x, &zero).unwrap(), 1.0);
        assert!(nrmse(&zero, &x).is_err());
    }

    #[test]
    fn log_kernel_sums_to_zero() {
        let k = log_kernel(LOG_SIZE, LOG_SIGMA);
        assert!(k.sum().abs() <= 1e-12);
        assert!(k[[7, 7]] < 0.0);
        assert_eq!(k[[0, 3]], k[[3, 0]]);
    }

    #[test]
    fn sharpness_hand_cases() {
        // frame [[0, 1], [0, 1]] stored column-major: (0, 0, 1, 1)
        let x = real_cube(2, 2, &[0.0, 0.0, 1.0, 1.0]);
        assert!((sharpness_m1(&x) - 0.25).abs() < 1e-15);
        assert!((sharpness_m2(&x) - 0.5).abs() < 1e-15);
        let flat = real_cube(2, 2, &[0.3; 8]);
        assert_eq!(sharpness_m1(&flat), 0.0);
        assert_eq!(sharpness_m2(&flat), 0.0);
    }

    #[test]
    fn identities() {
        let vals: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let x = real_cube(8, 4, &vals);
        assert_eq!(hfen(&x, &x).unwrap(), 0.0);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let inv = real_cube(8, 4, &vals.iter().map(|v| 1.1 - v).collect::<Vec<_>>());
        assert!(ssim(&x, &inv).unwrap() < 1.0);
        assert!(ssim(&ImageSequence::zeros(8, 4, 2), &x).is_err());
    }
}
