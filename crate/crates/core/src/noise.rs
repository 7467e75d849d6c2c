//! Reproducible fixed-value (salt-and-pepper) impulse noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

pub const SALT: f64 = 255.0;
pub const PEPPER: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    density: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(density: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidParameter(format!(
                "density out of range [0, 1]: {density}"
            )));
        }
        Ok(Self { density, seed })
    }

    pub fn density(&self) -> f64 {
        self.density
    }
}

/// Seed used for one density of a sweep: `seed + round(1000 * density)`.
pub fn density_seed(seed: u64, density: f64) -> u64 {
    seed.wrapping_add((1000.0 * density).round() as u64)
}

/// Row-major corruption flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseMask {
    pub width: usize,
    pub height: usize,
    pub flags: Vec<bool>,
}

impl NoiseMask {
    pub fn corrupted(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Corrupts `img`. One uniform draw per pixel in row-major order:
/// `u < p/2` gives pepper, `p/2 <= u < p` gives salt.
pub fn inject_salt_pepper(img: &Image, spec: &NoiseSpec) -> (Image, NoiseMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.density / 2.0;
    let mut pixels = img.pixels().to_vec();
    let mut flags = vec![false; pixels.len()];
    for (px, flag) in pixels.iter_mut().zip(flags.iter_mut()) {
        let u: f64 = rng.gen();
        if u < half {
            *px = PEPPER;
            *flag = true;
        } else if u < spec.density {
            *px = SALT;
            *flag = true;
        }
    }
    let noisy = Image::new(img.width(), img.height(), pixels).expect("same shape, in range");
    let mask = NoiseMask {
        width: img.width(),
        height: img.height(),
        flags,
    };
    (noisy, mask)
}

/// `MASK <w> <h>\n` followed by the flags packed MSB-first, 8 per octet.
pub fn write_mask(mask: &NoiseMask) -> Vec<u8> {
    let mut out = format!("MASK {} {}\n", mask.width, mask.height).into_bytes();
    for chunk in mask.flags.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &f)| acc | (u8::from(f) << (7 - i)));
        out.push(byte);
    }
    out
}

pub fn read_mask(bytes: &[u8]) -> Result<NoiseMask> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptFile("mask header not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::CorruptFile("mask header is not text".into()))?;
    let mut parts = header.split(' ');
    if parts.next() != Some("MASK") {
        return Err(Error::UnsupportedFormat("expected MASK header".into()));
    }
    let mut dim = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::CorruptFile(format!("bad mask {what}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    if parts.next().is_some() {
        return Err(Error::CorruptFile("trailing mask header fields".into()));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptFile("mask dimensions overflow".into()))?;
    let payload = &bytes[nl + 1..];
    if payload.len() < n.div_ceil(8) {
        return Err(Error::CorruptFile(format!(
            "mask payload has {} of {} bytes",
            payload.len(),
            n.div_ceil(8)
        )));
    }
    let flags = (0..n)
        .map(|i| payload[i / 8] & (0x80 >> (i % 8)) != 0)
        .collect();
    Ok(NoiseMask {
        width,
        height,
        flags,
    })
}
