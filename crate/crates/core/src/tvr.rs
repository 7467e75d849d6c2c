//! Total-variation regularised variant with a switching trimmed-mean source.

use crate::diffusion::check_iterations;
use crate::error::{Error, Result};
use crate::image::{clamp_image, Field, Image};
use crate::stmdf::{stmdf_filter, TrimSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvrParams {
    /// Regulariser of the gradient norm.
    pub epsilon: f64,
    /// Fidelity weight towards the filtered source.
    pub lambda: f64,
    /// Weight of the source term added outside the time step.
    pub source_strength: f64,
    pub dt: f64,
    pub trim: TrimSpec,
    pub max_iterations: usize,
    pub stop_tolerance: f64,
}

impl Default for TvrParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            lambda: 0.1,
            source_strength: 0.1,
            dt: 0.2,
            trim: TrimSpec::new(1.0 / 3.0, 7).expect("valid 7x7 trim"),
            max_iterations: 200,
            stop_tolerance: 0.05,
        }
    }
}

impl TvrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.dt >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be >= 0, got {}",
                self.dt
            )));
        }
        if !(self.lambda >= 0.0) || !(self.source_strength >= 0.0) {
            return Err(Error::InvalidParameter(
                "lambda and source strength must be >= 0".into(),
            ));
        }
        check_iterations(self.max_iterations, self.stop_tolerance)
    }
}

/// Curvature `div(grad U / |grad U|_eps)` from central differences.
pub fn tv_curvature(img: &Image, epsilon: f64) -> Result<Field> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let eps2 = epsilon * epsilon;
    let values = img.map_rows(|x, y| {
        let (x, y) = (x as isize, y as isize);
        let at = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
        let c = at(0, 0);
        let (n, s, e, w) = (at(0, -1), at(0, 1), at(1, 0), at(-1, 0));
        let ux = (e - w) / 2.0;
        let uy = (s - n) / 2.0;
        let uxx = e - 2.0 * c + w;
        let uyy = s - 2.0 * c + n;
        let uxy = (at(1, 1) - at(-1, 1) - at(1, -1) + at(-1, -1)) / 4.0;
        let num = (ux * ux + eps2) * uyy + (uy * uy + eps2) * uxx - 2.0 * ux * uy * uxy;
        num / (ux * ux + uy * uy + eps2).powf(1.5)
    });
    Field::new(img.width(), img.height(), values)
}

/// `U + (curvature + lambda (f - U)) dt + alpha f`, clamped, where `f`
/// is the switching trimmed-mean filter of `U` at threshold `tau`.
pub fn tvr_stmdf_step(img: &Image, params: &TvrParams, tau: f64) -> Result<Image> {
    params.validate()?;
    let source = stmdf_filter(img, &params.trim, tau)?;
    let curvature = tv_curvature(img, params.epsilon)?;
    let values = img
        .pixels()
        .iter()
        .zip(curvature.values())
        .zip(source.pixels())
        .map(|((&u, &k), &f)| {
            u + (k + params.lambda * (f - u)) * params.dt + params.source_strength * f
        })
        .collect();
    Ok(clamp_image(&Field::new(img.width(), img.height(), values)?))
}
