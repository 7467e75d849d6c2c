//! Full-reference quality metrics: MSE, PSNR, MAE and mean SSIM.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::pgm::fmt_num;

pub const PEAK: f64 = 255.0;
pub const METRICS_HEADER: [&str; 4] = ["psnr_db", "mae", "mse", "mssim"];

/// Side of the SSIM weighting window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    /// `+inf` for identical images.
    pub psnr: f64,
    pub mae: f64,
    pub mssim: f64,
}

impl MetricsReport {
    /// Cells in `psnr_db,mae,mse,mssim` order.
    pub fn csv_cells(&self) -> Vec<String> {
        [self.psnr, self.mae, self.mse, self.mssim]
            .into_iter()
            .map(fmt_num)
            .collect()
    }

    /// `psnr_db=..,mae=..,mse=..,mssim=..`
    pub fn summary_line(&self) -> String {
        METRICS_HEADER
            .iter()
            .zip(self.csv_cells())
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// `10 log10(255^2 / mse)`, infinite when `mse == 0`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::InvalidPair(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    check_pair(reference, test)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

pub fn mae(reference: &Image, test: &Image) -> Result<f64> {
    check_pair(reference, test)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / reference.len() as f64)
}

pub fn compute_metrics(reference: &Image, test: &Image) -> Result<MetricsReport> {
    let mse = mse(reference, test)?;
    Ok(MetricsReport {
        mse,
        psnr: psnr_from_mse(mse),
        mae: mae(reference, test)?,
        mssim: mssim(reference, test)?,
    })
}

/// Normalised 1-D Gaussian taps.
fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable valid-region correlation of a row-major plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * horiz[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all valid 11x11 Gaussian-weighted windows.
pub fn mssim(reference: &Image, test: &Image) -> Result<f64> {
    check_pair(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidSize(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let a = reference.pixels();
    let b = test.pixels();
    let product = |f: fn(f64, f64) -> f64| -> Vec<f64> {
        a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    };
    let mu_a = filter_valid(a, w, h, &taps);
    let mu_b = filter_valid(b, w, h, &taps);
    let aa = filter_valid(&product(|x, _| x * x), w, h, &taps);
    let bb = filter_valid(&product(|_, y| y * y), w, h, &taps);
    let ab = filter_valid(&product(|x, y| x * y), w, h, &taps);

    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (va + vb + C2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
