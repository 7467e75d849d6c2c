//! Global image statistics: histogram entropy, mean/std, the
//! entropy-guided switching threshold and the diffusion threshold.

use crate::error::{Error, Result};
use crate::image::{quantize, Image};
use crate::noise::{density_seed, inject_salt_pepper, NoiseSpec};
use crate::pgm::{fmt_num, CsvTable};

/// Header of the table produced by [`stats_sweep`].
pub const STATS_HEADER: [&str; 5] = ["density", "mean", "std", "entropy", "extreme_fraction"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats {
    pub mean: f64,
    pub std: f64,
    /// Shannon entropy of the 256-bin histogram, in bits.
    pub entropy: f64,
    /// Fraction of pixels equal to 0 or 255 after rounding.
    pub extreme_fraction: f64,
}

impl ImageStats {
    pub fn of(img: &Image) -> Self {
        let (mean, std) = global_mean_std(img);
        Self {
            mean,
            std,
            entropy: image_entropy(img),
            extreme_fraction: estimate_noise_density(img),
        }
    }
}

/// 256-bin histogram over gray levels rounded half-away-from-zero.
pub fn histogram(img: &Image) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[quantize(v) as usize] += 1;
    }
    hist
}

/// Histogram entropy in bits.
pub fn image_entropy(img: &Image) -> f64 {
    let n = img.len() as f64;
    let h: f64 = histogram(img)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum();
    // negate after summing so a single bin gives +0 rather than -0
    0.0 - h
}

/// Arithmetic mean and population standard deviation, summed in
/// row-major order so the result is reproducible.
pub fn global_mean_std(img: &Image) -> (f64, f64) {
    let n = img.len() as f64;
    let mean = img.pixels().iter().sum::<f64>() / n;
    let var = img
        .pixels()
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

/// `(mean - std) * entropy`. Not clamped: a negative threshold makes the
/// switching filter replace every pixel.
pub fn entropy_threshold(img: &Image) -> f64 {
    let (mean, std) = global_mean_std(img);
    (mean - std) * image_entropy(img)
}

/// `mean / std` of the given iterate.
pub fn diffusion_kappa(img: &Image) -> Result<f64> {
    let (mean, std) = global_mean_std(img);
    if std == 0.0 {
        return Err(Error::DegenerateImage(
            "zero standard deviation, kappa undefined".into(),
        ));
    }
    Ok(mean / std)
}

/// Fraction of pixels sitting at either extreme gray level.
pub fn estimate_noise_density(img: &Image) -> f64 {
    let extremes = img
        .pixels()
        .iter()
        .filter(|&&v| matches!(quantize(v), 0 | 255))
        .count();
    extremes as f64 / img.len() as f64
}

/// Injects noise at each density and records the resulting statistics.
/// Each density uses the seed `seed + round(1000 * density)`.
pub fn stats_sweep(img: &Image, densities: &[f64], seed: u64) -> Result<CsvTable> {
    let mut table = CsvTable::new(STATS_HEADER);
    for &density in densities {
        let spec = NoiseSpec::new(density, density_seed(seed, density))?;
        let (noisy, _) = inject_salt_pepper(img, &spec);
        let s = ImageStats::of(&noisy);
        table.push_row(vec![
            fmt_num(density),
            fmt_num(s.mean),
            fmt_num(s.std),
            fmt_num(s.entropy),
            fmt_num(s.extreme_fraction),
        ]);
    }
    Ok(table)
}
