//! Perona-Malik diffusion and the source-boosted iterations built on it.
//!
//! Every boosted step has the form
//!
//! ```text
//! U' = clamp((1 - beta) * U + div(D(|grad U|) grad U) / 4 + beta * f(U))
//! ```
//!
//! where `f` is the switching trimmed-mean filter (STMDF-AD) or a 3x3
//! median (MF-AD). The divergence uses 4-neighbour differences with
//! replicate padding and a fixed time step of 1/4.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{clamp_image, fill_window, Field, Image};
use crate::pgm::{fmt_num, CsvTable};
use crate::stats::{diffusion_kappa, entropy_threshold};
use crate::stmdf::{stmdf_filter, TrimSpec};
use crate::tvr::{tvr_stmdf_step, TvrParams};

/// Kappa used when the iterate has zero variance.
pub const KAPPA_FALLBACK: f64 = 1.0;

/// Edge-stopping function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientKind {
    /// `exp(-(s/k)^2)`
    Gaussian,
    /// `1 / (1 + (s/k)^2)`
    #[default]
    Cauchy,
    /// `(1 - (s/k)^2)^2` for `s <= k`, else 0
    Tukey,
}

impl FromStr for CoefficientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "cauchy" => Ok(Self::Cauchy),
            "tukey" => Ok(Self::Tukey),
            _ => Err(Error::InvalidParameter(format!(
                "unknown coefficient {s:?} (expected gaussian, cauchy or tukey)"
            ))),
        }
    }
}

/// When the switching threshold is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauPolicy {
    /// Once, from the noisy input.
    #[default]
    Fixed,
    /// From the current iterate before every step.
    Refresh,
}

/// When the diffusion threshold is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaPolicy {
    #[default]
    Refresh,
    Fixed,
}

macro_rules! policy_from_str {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    "fixed" => Ok(Self::Fixed),
                    "refresh" => Ok(Self::Refresh),
                    _ => Err(Error::InvalidParameter(format!(
                        "unknown policy {s:?} (expected fixed or refresh)"
                    ))),
                }
            }
        }
    };
}

policy_from_str!(TauPolicy);
policy_from_str!(KappaPolicy);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Weight `beta` of the source term, in `[0, 1]`.
    pub source_strength: f64,
    pub coefficient: CoefficientKind,
    pub trim: TrimSpec,
    pub max_iterations: usize,
    /// Stop once the mean absolute per-pixel change drops below this.
    pub stop_tolerance: f64,
    pub tau_policy: TauPolicy,
    pub kappa_policy: KappaPolicy,
    /// Clamp a negative switching threshold to zero.
    pub clamp_tau: bool,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            source_strength: 0.25,
            coefficient: CoefficientKind::Cauchy,
            trim: TrimSpec::default(),
            max_iterations: 50,
            stop_tolerance: 0.05,
            tau_policy: TauPolicy::Fixed,
            kappa_policy: KappaPolicy::Refresh,
            clamp_tau: false,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        check_beta(self.source_strength)?;
        check_iterations(self.max_iterations, self.stop_tolerance)
    }
}

/// Tunables for every filter variant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterParams {
    pub diffusion: DiffusionParams,
    pub tvr: TvrParams,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "source strength must lie in [0, 1], got {beta}"
        )));
    }
    Ok(())
}

pub(crate) fn check_iterations(max_iterations: usize, stop_tolerance: f64) -> Result<()> {
    if max_iterations == 0 {
        return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
    }
    if !(stop_tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "stop tolerance must be >= 0, got {stop_tolerance}"
        )));
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || kappa.is_infinite() {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive and finite, got {kappa}"
        )));
    }
    Ok(())
}

#[inline]
fn coefficient(s: f64, kappa: f64, kind: CoefficientKind) -> f64 {
    let r = s / kappa;
    let r2 = r * r;
    match kind {
        CoefficientKind::Gaussian => (-r2).exp(),
        CoefficientKind::Cauchy => 1.0 / (1.0 + r2),
        CoefficientKind::Tukey => {
            if r.abs() <= 1.0 {
                (1.0 - r2) * (1.0 - r2)
            } else {
                0.0
            }
        }
    }
}

/// Diffusion coefficient `D(s)` for gradient magnitude `s`.
pub fn diffusion_coefficient(s: f64, kappa: f64, kind: CoefficientKind) -> Result<f64> {
    check_kappa(kappa)?;
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gradient magnitude must be >= 0, got {s}"
        )));
    }
    Ok(coefficient(s, kappa, kind))
}

/// `sum_d D(|g_d|) g_d` over the four axis neighbours, `g_d = U_d - U`.
pub fn pm_divergence(img: &Image, kappa: f64, kind: CoefficientKind) -> Result<Field> {
    check_kappa(kappa)?;
    let values = img.map_rows(|x, y| divergence_at(img, x, y, kappa, kind));
    Field::new(img.width(), img.height(), values)
}

#[inline]
fn divergence_at(img: &Image, x: usize, y: usize, kappa: f64, kind: CoefficientKind) -> f64 {
    let (xi, yi) = (x as isize, y as isize);
    let c = img.get(x, y);
    [(0, -1), (0, 1), (1, 0), (-1, 0)]
        .iter()
        .map(|&(dx, dy)| {
            let g = img.get_clamped(xi + dx, yi + dy) - c;
            coefficient(g.abs(), kappa, kind) * g
        })
        .sum()
}

/// `(1 - beta) * U + div / 4 + beta * f` before clamping.
pub fn boosted_update(img: &Image, div: &Field, source: &Image, beta: f64) -> Result<Field> {
    if div.width() != img.width()
        || div.height() != img.height()
        || !source.same_shape(img)
    {
        return Err(Error::InvalidPair("update operands differ in shape".into()));
    }
    let values = img
        .pixels()
        .iter()
        .zip(div.values())
        .zip(source.pixels())
        .map(|((&u, &d), &f)| (1.0 - beta) * u + d / 4.0 + beta * f)
        .collect();
    Field::new(img.width(), img.height(), values)
}

/// One STMDF-AD iteration.
pub fn stmdf_ad_step(img: &Image, params: &DiffusionParams, tau: f64, kappa: f64) -> Result<Image> {
    params.validate()?;
    let source = stmdf_filter(img, &params.trim, tau)?;
    let div = pm_divergence(img, kappa, params.coefficient)?;
    Ok(clamp_image(&boosted_update(
        img,
        &div,
        &source,
        params.source_strength,
    )?))
}

/// One MF-AD iteration: the same update with a 3x3 median source.
pub fn mf_ad_step(img: &Image, beta: f64, kappa: f64, kind: CoefficientKind) -> Result<Image> {
    check_beta(beta)?;
    let source = median3(img);
    let div = pm_divergence(img, kappa, kind)?;
    Ok(clamp_image(&boosted_update(img, &div, &source, beta)?))
}

/// 3x3 median with replicate padding.
pub fn median3(img: &Image) -> Image {
    let out = img.map_rows_with(
        || Vec::with_capacity(9),
        |buf, x, y| {
            fill_window(img, x, y, 3, buf);
            let (_, mid, _) = buf.select_nth_unstable_by(4, f64::total_cmp);
            *mid
        },
    );
    Image::new(img.width(), img.height(), out).expect("median of in-range samples")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    StmdfAd,
    MfAd,
    Median,
    StmdfOnly,
    TvrStmdf,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::StmdfAd,
        Variant::MfAd,
        Variant::Median,
        Variant::StmdfOnly,
        Variant::TvrStmdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::StmdfAd => "stmdf-ad",
            Variant::MfAd => "mf-ad",
            Variant::Median => "median",
            Variant::StmdfOnly => "stmdf",
            Variant::TvrStmdf => "tvr-stmdf",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown variant {s:?} (expected one of stmdf-ad, mf-ad, median, stmdf, tvr-stmdf)"
                ))
            })
    }
}

/// Per-run record of the iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub iterations_executed: usize,
    pub mean_abs_change: Vec<f64>,
    /// Switching threshold of the last step, for variants that use one.
    pub final_tau: Option<f64>,
    /// Diffusion threshold of the last step, for variants that use one.
    pub final_kappa: Option<f64>,
}

impl RunTrace {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["iteration", "mean_abs_change"]);
        for (i, c) in self.mean_abs_change.iter().enumerate() {
            t.push_row(vec![(i + 1).to_string(), fmt_num(*c)]);
        }
        t
    }
}

fn mean_abs_change(a: &Image, b: &Image) -> f64 {
    let total: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .sum();
    total / a.len() as f64
}

fn kappa_or_fallback(img: &Image) -> f64 {
    diffusion_kappa(img).unwrap_or(KAPPA_FALLBACK)
}

/// Runs `variant` on `img` until `max_iterations` steps have executed or
/// the mean absolute per-pixel change of a step falls below the tolerance.
pub fn run_filter(img: &Image, variant: Variant, params: &FilterParams) -> Result<(Image, RunTrace)> {
    let dp = &params.diffusion;
    let (max_iterations, tolerance) = match variant {
        Variant::TvrStmdf => {
            params.tvr.validate()?;
            (params.tvr.max_iterations, params.tvr.stop_tolerance)
        }
        _ => {
            dp.validate()?;
            (dp.max_iterations, dp.stop_tolerance)
        }
    };

    let threshold = |u: &Image| {
        let t = entropy_threshold(u);
        if dp.clamp_tau {
            t.max(0.0)
        } else {
            t
        }
    };
    let input_tau = threshold(img);
    let input_kappa = kappa_or_fallback(img);

    let mut trace = RunTrace::default();
    let mut current = img.clone();
    for _ in 0..max_iterations {
        let tau = match dp.tau_policy {
            TauPolicy::Fixed => input_tau,
            TauPolicy::Refresh => threshold(&current),
        };
        let kappa = match dp.kappa_policy {
            KappaPolicy::Fixed => input_kappa,
            KappaPolicy::Refresh => kappa_or_fallback(&current),
        };
        let next = match variant {
            Variant::StmdfAd => {
                trace.final_tau = Some(tau);
                trace.final_kappa = Some(kappa);
                stmdf_ad_step(&current, dp, tau, kappa)?
            }
            Variant::MfAd => {
                trace.final_kappa = Some(kappa);
                mf_ad_step(&current, dp.source_strength, kappa, dp.coefficient)?
            }
            Variant::Median => median3(&current),
            Variant::StmdfOnly => {
                trace.final_tau = Some(tau);
                stmdf_filter(&current, &dp.trim, tau)?
            }
            Variant::TvrStmdf => {
                // the TVR source always uses the threshold of the noisy input
                trace.final_tau = Some(input_tau);
                tvr_stmdf_step(&current, &params.tvr, input_tau)?
            }
        };
        let change = mean_abs_change(&current, &next);
        trace.mean_abs_change.push(change);
        trace.iterations_executed += 1;
        current = next;
        if change < tolerance {
            break;
        }
    }
    Ok((current, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn impulse(w: usize, h: usize, bg: f64, fg: f64) -> Image {
        Image::from_fn(w, h, |x, y| if (x, y) == (w / 2, h / 2) { fg } else { bg }).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        for kind in [CoefficientKind::Gaussian, CoefficientKind::Cauchy, CoefficientKind::Tukey] {
            assert_eq!(diffusion_coefficient(0.0, 3.0, kind).unwrap(), 1.0);
            assert!(diffusion_coefficient(1.0, 0.0, kind).is_err());
            assert!(diffusion_coefficient(1.0, -1.0, kind).is_err());
            assert!(diffusion_coefficient(-1.0, 1.0, kind).is_err());
        }
        assert_eq!(diffusion_coefficient(7.0, 7.0, CoefficientKind::Cauchy).unwrap(), 0.5);
        let g = diffusion_coefficient(7.0, 7.0, CoefficientKind::Gaussian).unwrap();
        assert!((g - 0.367879).abs() < 1e-6);
        assert_eq!(diffusion_coefficient(14.0, 7.0, CoefficientKind::Tukey).unwrap(), 0.0);
        assert_eq!(diffusion_coefficient(7.0, 7.0, CoefficientKind::Tukey).unwrap(), 0.0);
        assert_eq!(diffusion_coefficient(3.5, 7.0, CoefficientKind::Tukey).unwrap(), 0.5625);
    }

    #[test]
    fn parsing() {
        assert_eq!("tukey".parse::<CoefficientKind>().unwrap(), CoefficientKind::Tukey);
        assert!("huber".parse::<CoefficientKind>().is_err());
        assert_eq!("refresh".parse::<TauPolicy>().unwrap(), TauPolicy::Refresh);
        assert_eq!("fixed".parse::<KappaPolicy>().unwrap(), KappaPolicy::Fixed);
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("wiener".parse::<Variant>().is_err());
    }

    #[test]
    fn divergence_of_single_spike() {
        let img = impulse(3, 3, 0.0, 100.0);
        let div = pm_divergence(&img, 50.0, CoefficientKind::Cauchy).unwrap();
        // four neighbours, each D(100) = 1/5 times -100
        assert!((div.get(1, 1) - -80.0).abs() < 1e-12);
        // an edge neighbour sees the spike through one face only
        assert!((div.get(1, 0) - 20.0).abs() < 1e-12);
        assert!((div.get(0, 0)).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_flat_and_ramp() {
        let flat = Image::filled(5, 4, 31.0).unwrap();
        let div = pm_divergence(&flat, 2.0, CoefficientKind::Gaussian).unwrap();
        assert!(div.values().iter().all(|&v| v == 0.0));

        let ramp = Image::from_fn(8, 6, |x, _| 10.0 * x as f64).unwrap();
        let div = pm_divergence(&ramp, 1e9, CoefficientKind::Cauchy).unwrap();
        for y in 0..6 {
            for x in 1..7 {
                assert!(div.get(x, y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn divergence_flux_is_antisymmetric() {
        // total flux over the image vanishes with replicate padding
        let img = Image::from_fn(9, 7, |x, y| ((x * 29 + y * 71) % 256) as f64).unwrap();
        for kind in [CoefficientKind::Gaussian, CoefficientKind::Cauchy, CoefficientKind::Tukey] {
            let div = pm_divergence(&img, 40.0, kind).unwrap();
            let total: f64 = div.values().iter().sum();
            assert!(total.abs() < 1e-9, "{kind:?}: {total}");
        }
    }

    #[test]
    fn steps_keep_constants_fixed() {
        let flat = Image::filled(6, 6, 73.0).unwrap();
        let p = DiffusionParams::default();
        assert_eq!(stmdf_ad_step(&flat, &p, 0.0, 1.0).unwrap(), flat);
        assert_eq!(mf_ad_step(&flat, 0.4, 1.0, CoefficientKind::Cauchy).unwrap(), flat);
        assert_eq!(median3(&flat), flat);
    }

    #[test]
    fn step_without_corrections_is_identity() {
        let img = Image::from_fn(6, 5, |x, y| (x * 40 + y * 3) as f64).unwrap();
        let p = DiffusionParams {
            source_strength: 0.0,
            ..DiffusionParams::default()
        };
        let out = stmdf_ad_step(&img, &p, 0.0, 1e-12).unwrap();
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn stmdf_ad_step_on_impulse() {
        let img = impulse(5, 5, 128.0, 255.0);
        let p = DiffusionParams {
            source_strength: 0.2,
            ..DiffusionParams::default()
        };
        let out = stmdf_ad_step(&img, &p, 10.0, 1.0).unwrap();
        // D(127; 1) = 1/(1 + 127^2) on each of the four faces
        let d = 1.0 / (1.0 + 127.0f64 * 127.0);
        let div = 4.0 * d * -127.0;
        let expected = 0.8 * 255.0 + div / 4.0 + 0.2 * 128.0;
        assert!((out.get(2, 2) - expected).abs() < 1e-9);
        // a face neighbour: kept by the switch, gains the inward flux
        let n = 0.8 * 128.0 + d * 127.0 / 4.0 + 0.2 * 128.0;
        assert!((out.get(2, 1) - n).abs() < 1e-9);
    }

    #[test]
    fn mf_ad_limits() {
        let img = impulse(5, 5, 0.0, 255.0);
        let out = mf_ad_step(&img, 0.5, 1.0, CoefficientKind::Cauchy).unwrap();
        assert!(out.get(2, 2) < 255.0);

        let noisy = Image::from_fn(7, 7, |x, y| ((x * 83 + y * 151) % 256) as f64).unwrap();
        let out = mf_ad_step(&noisy, 1.0, 1e-12, CoefficientKind::Cauchy).unwrap();
        let med = median3(&noisy);
        for (a, b) in out.pixels().iter().zip(med.pixels()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn median_examples() {
        let img = impulse(5, 5, 128.0, 255.0);
        assert_eq!(median3(&img), Image::filled(5, 5, 128.0).unwrap());
        let nine = Image::from_fn(3, 3, |x, y| (y * 3 + x + 1) as f64).unwrap();
        assert_eq!(median3(&nine).get(1, 1), 5.0);
    }

    #[test]
    fn run_filter_median_once() {
        let img = Image::from_fn(9, 9, |x, y| ((x * 47 + y * 13) % 256) as f64).unwrap();
        let mut p = FilterParams::default();
        p.diffusion.max_iterations = 1;
        let (out, trace) = run_filter(&img, Variant::Median, &p).unwrap();
        assert_eq!(out, median3(&img));
        assert_eq!(trace.iterations_executed, 1);
        assert_eq!(trace.mean_abs_change.len(), 1);
    }

    #[test]
    fn run_filter_constant_converges_immediately() {
        let flat = Image::filled(8, 8, 200.0).unwrap();
        for v in Variant::ALL {
            let mut p = FilterParams::default();
            p.tvr.source_strength = 0.0;
            let (out, trace) = run_filter(&flat, v, &p).unwrap();
            assert_eq!(out, flat, "{v}");
            assert_eq!(trace.iterations_executed, 1, "{v}");
            assert_eq!(trace.mean_abs_change, vec![0.0]);
        }
    }

    #[test]
    fn zero_tolerance_runs_all_iterations() {
        let img = Image::filled(4, 4, 10.0).unwrap();
        let mut p = FilterParams::default();
        p.diffusion.stop_tolerance = 0.0;
        p.diffusion.max_iterations = 7;
        let (_, trace) = run_filter(&img, Variant::StmdfAd, &p).unwrap();
        assert_eq!(trace.iterations_executed, 7);
        assert_eq!(trace.to_csv().rows.len(), 7);
        assert_eq!(trace.to_csv().rows[0], vec!["1", "0"]);
    }

    #[test]
    fn run_filter_rejects_bad_params() {
        let img = Image::filled(4, 4, 10.0).unwrap();
        let mut p = FilterParams::default();
        p.diffusion.source_strength = 1.5;
        assert!(run_filter(&img, Variant::StmdfAd, &p).is_err());
        let mut p = FilterParams::default();
        p.diffusion.max_iterations = 0;
        assert!(run_filter(&img, Variant::Median, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn coefficient_bounded_and_non_increasing(
            a in 0.0f64..500.0,
            b in 0.0f64..500.0,
            kappa in 0.01f64..100.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for kind in [CoefficientKind::Gaussian, CoefficientKind::Cauchy, CoefficientKind::Tukey] {
                let dl = diffusion_coefficient(lo, kappa, kind).unwrap();
                let dh = diffusion_coefficient(hi, kappa, kind).unwrap();
                prop_assert!((0.0..=1.0).contains(&dl) && (0.0..=1.0).contains(&dh));
                prop_assert!(dh <= dl);
            }
        }

        /// With beta + sum(D)/4 <= 1 the update is a convex combination.
        #[test]
        fn convex_update_needs_no_clamp(
            px in prop::collection::vec(0.0f64..=255.0, 64),
            kappa in 0.1f64..20.0,
        ) {
            let img = Image::new(8, 8, px).unwrap();
            let div = pm_divergence(&img, kappa, CoefficientKind::Cauchy).unwrap();
            let src = median3(&img);
            let raw = boosted_update(&img, &div, &src, 0.0).unwrap();
            for v in raw.values() {
                prop_assert!(*v >= -1e-9 && *v <= 255.0 + 1e-9);
            }
        }
    }
}
