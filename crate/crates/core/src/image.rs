//! Grayscale image container and neighbourhood access.
//!
//! Pixels are stored row-major as `f64` with 8-bit gray-level semantics.
//! Out-of-bounds neighbours are resolved by replicate (clamp-to-edge)
//! padding everywhere in the crate.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest representable gray level.
pub const MAX_GRAY: f64 = 255.0;

/// A real-valued grid without range constraints, e.g. a divergence or
/// curvature field, or a filter update before clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Grayscale image with every pixel in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Builds an image, rejecting empty dimensions, length mismatches and
    /// pixels outside `[0, 255]` (including NaN).
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        if let Some((i, v)) = pixels
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=MAX_GRAY).contains(*v))
        {
            return Err(Error::InvalidImage(format!(
                "pixel {i} has value {v}, outside [0, 255]"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with replicate padding for signed coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[cy * self.width + cx]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixels rounded half-away-from-zero and clamped into `[0, 255]`.
    pub fn quantized(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| quantize(v)).collect()
    }

    /// Image with every pixel rounded to the nearest integer gray level.
    pub fn rounded(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f64::from(quantize(v))).collect(),
        }
    }

    pub fn to_field(&self) -> Field {
        Field {
            width: self.width,
            height: self.height,
            values: self.pixels.clone(),
        }
    }

    /// Applies `f(x, y)` to every pixel, one row per task, writing into a
    /// fresh buffer. The output never depends on how rows are scheduled.
    pub(crate) fn map_rows<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        self.map_rows_with(|| (), |_, x, y| f(x, y))
    }

    /// Like [`Image::map_rows`] with a per-row scratch value.
    pub(crate) fn map_rows_with<S, I, F>(&self, init: I, f: F) -> Vec<f64>
    where
        I: Fn() -> S + Sync,
        F: Fn(&mut S, usize, usize) -> f64 + Sync,
    {
        let width = self.width;
        let mut out = vec![0.0; self.pixels.len()];
        out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            let mut scratch = init();
            for (x, v) in row.iter_mut().enumerate() {
                *v = f(&mut scratch, x, y);
            }
        });
        out
    }
}

/// A `k x k` neighbourhood gathered row-major around a centre pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<f64>,
    pub center_value: f64,
}

impl Window {
    pub fn size(&self) -> usize {
        (self.samples.len() as f64).sqrt().round() as usize
    }
}

pub(crate) fn check_window_size(k: usize) -> Result<()> {
    if k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "window size must be odd and >= 1, got {k}"
        )));
    }
    Ok(())
}

/// Fills `buf` with the replicate-padded `k x k` neighbourhood of `(x, y)`.
/// `k` must already be validated as odd.
#[inline]
pub(crate) fn fill_window(img: &Image, x: usize, y: usize, k: usize, buf: &mut Vec<f64>) {
    let r = (k / 2) as isize;
    let (x, y) = (x as isize, y as isize);
    buf.clear();
    for dy in -r..=r {
        for dx in -r..=r {
            buf.push(img.get_clamped(x + dx, y + dy));
        }
    }
}

/// Returns the `k x k` window centred on `(x, y)`.
pub fn window_at(img: &Image, x: usize, y: usize, k: usize) -> Result<Window> {
    check_window_size(k)?;
    if x >= img.width || y >= img.height {
        return Err(Error::InvalidParameter(format!(
            "pixel ({x}, {y}) outside {}x{} image",
            img.width, img.height
        )));
    }
    let mut samples = Vec::with_capacity(k * k);
    fill_window(img, x, y, k, &mut samples);
    Ok(Window {
        samples,
        center_value: img.get(x, y),
    })
}

/// Clamps every value of `field` into `[0, 255]`. NaN maps to 0.
pub fn clamp_image(field: &Field) -> Image {
    Image {
        width: field.width,
        height: field.height,
        pixels: field.values.iter().map(|&v| clamp_gray(v)).collect(),
    }
}

#[inline]
pub(crate) fn clamp_gray(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, MAX_GRAY)
    }
}

/// Round half-away-from-zero, then clamp to an octet.
#[inline]
pub fn quantize(v: f64) -> u8 {
    clamp_gray(v.round()) as u8
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidImage(format!(
            "{width}x{height} image needs {} pixels, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}
