//! Switching trimmed-mean deviation filter.
//!
//! Each pixel's neighbourhood is sorted and its symmetric trimmed mean
//! computed. The centred deviation `trimmed_mean - centre` decides whether
//! the pixel is kept (`|deviation| <= tau`) or replaced by the trimmed mean.

use crate::error::{Error, Result};
use crate::image::{check_window_size, fill_window, Image, Window};

/// Trim fraction and window size of the trimmed mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimSpec {
    trim_fraction: f64,
    window_size: usize,
}

impl TrimSpec {
    pub fn new(trim_fraction: f64, window_size: usize) -> Result<Self> {
        check_window_size(window_size)?;
        check_trim(trim_fraction, window_size * window_size)?;
        Ok(Self {
            trim_fraction,
            window_size,
        })
    }

    pub fn trim_fraction(&self) -> f64 {
        self.trim_fraction
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    /// Samples dropped from each end of a sorted window.
    pub fn trim_count(&self) -> usize {
        trim_count(self.trim_fraction, self.window_size * self.window_size)
    }
}

impl Default for TrimSpec {
    /// One third of a 3x3 window: the mean of the middle three order statistics.
    fn default() -> Self {
        Self {
            trim_fraction: 1.0 / 3.0,
            window_size: 3,
        }
    }
}

/// Deviations of a window from its trimmed mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSet {
    /// `trimmed_mean - x_j`, in window order.
    pub deviation_vector: Vec<f64>,
    /// `|trimmed_mean - x_j|`.
    pub tmad: Vec<f64>,
    /// `trimmed_mean - centre`.
    pub ctmd: f64,
    pub trimmed_mean: f64,
}

// Products like (1/3) * 9 must floor to 3, not 2.
fn trim_count(trim_fraction: f64, n: usize) -> usize {
    (trim_fraction * n as f64 + 1e-9).floor() as usize
}

fn check_trim(trim_fraction: f64, n: usize) -> Result<usize> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::InvalidParameter(format!(
            "trim fraction must lie in [0, 0.5), got {trim_fraction}"
        )));
    }
    let m = trim_count(trim_fraction, n);
    if n == 0 || 2 * m >= n {
        return Err(Error::InvalidParameter(format!(
            "trimming {m} from each end of {n} samples leaves nothing"
        )));
    }
    Ok(m)
}

/// Mean of an already sorted slice after dropping `m` values per end.
#[inline]
fn trimmed_mean_sorted(sorted: &[f64], m: usize) -> f64 {
    let kept = &sorted[m..sorted.len() - m];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Symmetric trimmed mean: sort, drop `floor(trim_fraction * n)` samples
/// from each end and average the rest.
pub fn trimmed_mean(samples: &[f64], trim_fraction: f64) -> Result<f64> {
    let m = check_trim(trim_fraction, samples.len())?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(trimmed_mean_sorted(&sorted, m))
}

pub fn deviations(win: &Window, trim_fraction: f64) -> Result<DeviationSet> {
    let mean = trimmed_mean(&win.samples, trim_fraction)?;
    let deviation_vector: Vec<f64> = win.samples.iter().map(|&x| mean - x).collect();
    let tmad = deviation_vector.iter().map(|d| d.abs()).collect();
    Ok(DeviationSet {
        deviation_vector,
        tmad,
        ctmd: mean - win.center_value,
        trimmed_mean: mean,
    })
}

/// Applies the switching rule to every pixel, reading only from `img`.
pub fn stmdf_filter(img: &Image, spec: &TrimSpec, tau: f64) -> Result<Image> {
    if tau.is_nan() {
        return Err(Error::InvalidParameter("tau must not be NaN".into()));
    }
    let k = spec.window_size;
    let m = spec.trim_count();
    let out = img.map_rows_with(
        || Vec::with_capacity(k * k),
        |buf, x, y| {
            fill_window(img, x, y, k, buf);
            buf.sort_unstable_by(f64::total_cmp);
            let mean = trimmed_mean_sorted(buf, m);
            let center = img.get(x, y);
            if (mean - center).abs() <= tau {
                center
            } else {
                mean
            }
        },
    );
    Image::new(img.width(), img.height(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::window_at;
    use proptest::prelude::*;

    /// Sort, drop m from each end, average. Kept deliberately naive.
    fn oracle(samples: &[f64], trim: f64) -> f64 {
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = (trim * s.len() as f64 + 1e-9).floor() as usize;
        let mut total = 0.0;
        let mut count = 0.0;
        for v in &s[m..s.len() - m] {
            total += v;
            count += 1.0;
        }
        total / count
    }

    #[test]
    fn trimmed_mean_examples() {
        let one_to_nine: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(trimmed_mean(&one_to_nine, 0.0).unwrap(), 5.0);
        let mixed = [0.0, 0.0, 0.0, 10.0, 20.0, 30.0, 255.0, 255.0, 255.0];
        assert_eq!(oracle(&mixed, 1.0 / 3.0), 20.0);
        assert_eq!(trimmed_mean(&mixed, 1.0 / 3.0).unwrap(), 20.0);
        assert_eq!(trimmed_mean(&[128.0; 9], 0.4).unwrap(), 128.0);
    }

    #[test]
    fn trimmed_mean_guards() {
        assert!(trimmed_mean(&[], 0.0).is_err());
        assert!(trimmed_mean(&[1.0, 2.0], 0.5).is_err());
        assert!(trimmed_mean(&[1.0; 9], -0.1).is_err());
        assert!(TrimSpec::new(0.2, 4).is_err());
        assert_eq!(TrimSpec::new(1.0 / 3.0, 3).unwrap().trim_count(), 3);
        assert_eq!(TrimSpec::new(0.25, 3).unwrap().trim_count(), 2);
        assert_eq!(TrimSpec::new(1.0 / 3.0, 7).unwrap().trim_count(), 16);
    }

    #[test]
    fn deviation_examples() {
        let flat = Window {
            samples: vec![128.0; 9],
            center_value: 128.0,
        };
        let d = deviations(&flat, 1.0 / 3.0).unwrap();
        assert!(d.deviation_vector.iter().all(|&v| v == 0.0));
        assert_eq!(d.ctmd, 0.0);

        // 255 at the centre position
        let samples = vec![0.0, 0.0, 0.0, 10.0, 255.0, 20.0, 30.0, 255.0, 255.0];
        let win = Window {
            center_value: samples[4],
            samples,
        };
        let d = deviations(&win, 1.0 / 3.0).unwrap();
        assert_eq!(d.trimmed_mean, 20.0);
        assert_eq!(d.ctmd, -235.0);
        assert_eq!(d.deviation_vector[3], 10.0);
        for (dv, t) in d.deviation_vector.iter().zip(&d.tmad) {
            assert_eq!(dv.abs(), *t);
        }

        let pepper = Window {
            samples: vec![0.0; 9],
            center_value: 0.0,
        };
        let d = deviations(&pepper, 0.25).unwrap();
        assert_eq!((d.trimmed_mean, d.ctmd), (0.0, 0.0));
    }

    #[test]
    fn filter_on_constant_and_huge_tau() {
        let flat = Image::filled(6, 5, 90.0).unwrap();
        assert_eq!(stmdf_filter(&flat, &TrimSpec::default(), 0.0).unwrap(), flat);
        let img = Image::from_fn(7, 7, |x, y| ((x * 37 + y * 91) % 256) as f64).unwrap();
        assert_eq!(stmdf_filter(&img, &TrimSpec::default(), 1e300).unwrap(), img);
        assert!(stmdf_filter(&img, &TrimSpec::default(), f64::NAN).is_err());
    }

    #[test]
    fn single_impulse_is_replaced() {
        let img = Image::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { 255.0 } else { 128.0 }).unwrap();
        let spec = TrimSpec::default();
        // every window holding the impulse has eight 128s, trimmed mean 128:
        // neighbours see ctmd 0, the centre sees -127
        for y in 0..5 {
            for x in 0..5 {
                let d = deviations(&window_at(&img, x, y, 3).unwrap(), 1.0 / 3.0).unwrap();
                assert_eq!(d.trimmed_mean, 128.0);
            }
        }
        let out = stmdf_filter(&img, &spec, 10.0).unwrap();
        assert_eq!(out, Image::filled(5, 5, 128.0).unwrap());
    }

    #[test]
    fn negative_tau_replaces_everything() {
        let img = Image::from_fn(6, 6, |x, y| ((x * 53 + y * 17) % 256) as f64).unwrap();
        let out = stmdf_filter(&img, &TrimSpec::default(), -1.0).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let w = window_at(&img, x, y, 3).unwrap();
                assert_eq!(out.get(x, y), oracle(&w.samples, 1.0 / 3.0));
            }
        }
    }

    proptest! {
        #[test]
        fn matches_oracle_and_stays_in_range(
            samples in prop::collection::vec(0.0f64..=255.0, 9),
            trim in prop::sample::select(vec![0.0, 1.0 / 9.0, 0.25, 1.0 / 3.0, 4.0 / 9.0]),
        ) {
            let t = trimmed_mean(&samples, trim).unwrap();
            prop_assert!((t - oracle(&samples, trim)).abs() <= 1e-12);
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(t >= lo - 1e-12 && t <= hi + 1e-12);
        }

        #[test]
        fn translation_equivariant(
            samples in prop::collection::vec(0.0f64..=200.0, 9),
            c in -50.0f64..50.0,
        ) {
            let shifted: Vec<f64> = samples.iter().map(|v| v + c).collect();
            let a = trimmed_mean(&shifted, 1.0 / 3.0).unwrap();
            let b = trimmed_mean(&samples, 1.0 / 3.0).unwrap() + c;
            prop_assert!((a - b).abs() <= 1e-9);
        }

        #[test]
        fn filter_preserves_range(px in prop::collection::vec(0.0f64..=255.0, 36), tau in -20.0f64..300.0) {
            let img = Image::new(6, 6, px).unwrap();
            let out = stmdf_filter(&img, &TrimSpec::default(), tau).unwrap();
            prop_assert!(out.pixels().iter().all(|v| (0.0..=255.0).contains(v)));
        }
    }
}
