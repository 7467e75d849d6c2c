//! Salt-and-pepper impulse noise removal with an entropy-guided switching
//! trimmed-mean deviation filter fused into Perona-Malik diffusion, plus
//! the median, MF-AD and TVR comparison filters and the evaluation tools
//! around them (noise injection, image statistics, quality metrics).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod pgm;
pub mod stats;
pub mod stmdf;
pub mod tvr;

pub use diffusion::{
    diffusion_coefficient, median3, mf_ad_step, pm_divergence, run_filter, stmdf_ad_step,
    CoefficientKind, DiffusionParams, FilterParams, KappaPolicy, RunTrace, TauPolicy, Variant,
};
pub use error::{Error, Result};
pub use image::{clamp_image, window_at, Field, Image, Window};
pub use metrics::{compute_metrics, mssim, MetricsReport};
pub use noise::{inject_salt_pepper, read_mask, write_mask, NoiseMask, NoiseSpec};
pub use pgm::{read_pgm, write_csv, write_pgm, CsvTable};
pub use stats::{
    diffusion_kappa, entropy_threshold, estimate_noise_density, global_mean_std, image_entropy,
    stats_sweep, ImageStats,
};
pub use stmdf::{deviations, stmdf_filter, trimmed_mean, DeviationSet, TrimSpec};
pub use tvr::{tv_curvature, tvr_stmdf_step, TvrParams};
