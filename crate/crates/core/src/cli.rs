//! Command-line front end: `noise`, `denoise`, `metrics` and `sweep`.
//!
//! Exit codes: 0 success, 2 usage or validation, 3 I/O or file format,
//! 4 numeric or degenerate input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::diffusion::{run_filter, CoefficientKind, FilterParams, KappaPolicy, TauPolicy, Variant};
use crate::error::Error;
use crate::image::Image;
use crate::metrics::{compute_metrics, MetricsReport, METRICS_HEADER};
use crate::noise::{density_seed, inject_salt_pepper, write_mask, NoiseSpec};
use crate::pgm::{fmt_num, read_pgm, write_csv, write_pgm, CsvTable};
use crate::stats::stats_sweep;
use crate::stmdf::TrimSpec;

pub const SWEEP_HEADER: [&str; 6] = ["density", "variant", "psnr_db", "mae", "mse", "mssim"];

#[derive(Debug, Parser)]
#[command(name = "stmdf-ad", version, about = "Salt-and-pepper noise removal with switching trimmed-mean anisotropic diffusion")]
pub struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt an image with fixed-value impulse noise.
    Noise(NoiseArgs),
    /// Filter a noisy image.
    Denoise(DenoiseArgs),
    /// Compare two images: prints psnr_db,mae,mse,mssim as CSV.
    Metrics(MetricsArgs),
    /// Inject, filter and score over a list of densities.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct FilterArgs {
    /// Source strength of the diffusion variants.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_parser = ["fixed", "refresh"])]
    pub kappa_policy: Option<String>,
    #[arg(long, value_parser = ["fixed", "refresh"])]
    pub tau_policy: Option<String>,
    /// Clamp a negative switching threshold to zero.
    #[arg(long)]
    pub tau_clamp: bool,
    /// Trim fraction of the trimmed mean.
    #[arg(long)]
    pub trim: Option<f64>,
    /// Trimmed-mean window size (odd).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, value_parser = ["gaussian", "cauchy", "tukey"])]
    pub coeff: Option<String>,
    /// Maximum iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Stop once the mean absolute change per pixel drops below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// TVR gradient-norm regulariser.
    #[arg(long)]
    pub eps: Option<f64>,
    /// TVR fidelity weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// TVR source strength.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// TVR time step.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl FilterArgs {
    pub fn to_params(&self) -> Result<FilterParams, Error> {
        let mut p = FilterParams::default();
        let d = &mut p.diffusion;
        let t = &mut p.tvr;
        if let Some(beta) = self.beta {
            d.source_strength = beta;
        }
        if let Some(s) = &self.kappa_policy {
            d.kappa_policy = s.parse::<KappaPolicy>()?;
        }
        if let Some(s) = &self.tau_policy {
            d.tau_policy = s.parse::<TauPolicy>()?;
        }
        d.clamp_tau = self.tau_clamp;
        if let Some(s) = &self.coeff {
            d.coefficient = s.parse::<CoefficientKind>()?;
        }
        if self.trim.is_some() || self.window.is_some() {
            let trim = self.trim.unwrap_or(d.trim.trim_fraction());
            d.trim = TrimSpec::new(trim, self.window.unwrap_or(d.trim.window_size()))?;
            t.trim = TrimSpec::new(trim, self.window.unwrap_or(t.trim.window_size()))?;
        }
        if let Some(n) = self.iters {
            d.max_iterations = n;
            t.max_iterations = n;
        }
        if let Some(tol) = self.tol {
            d.stop_tolerance = tol;
            t.stop_tolerance = tol;
        }
        if let Some(v) = self.eps {
            t.epsilon = v;
        }
        if let Some(v) = self.lambda {
            t.lambda = v;
        }
        if let Some(v) = self.alpha {
            t.source_strength = v;
        }
        if let Some(v) = self.dt {
            t.dt = v;
        }
        p.diffusion.validate()?;
        p.tvr.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Clean reference; prints a metrics line when given.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Write the per-iteration change as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Clean reference image.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated densities in [0, 1].
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub densities: Vec<f64>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "median,stmdf-ad")]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Metrics table.
    #[arg(long)]
    pub out: PathBuf,
    /// Image statistics table.
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
    /// PSNR-versus-density chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        let message = if err.kind() == std::io::ErrorKind::NotFound {
            format!("file not found: {}", path.display())
        } else {
            format!("{}: {err}", path.display())
        };
        Self { code: 3, message }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::InvalidParameter(_)
            | Error::InvalidTable(_)
            | Error::InvalidPair(_)
            | Error::InvalidSize(_) => 2,
            Error::Io(_)
            | Error::CorruptFile(_)
            | Error::UnsupportedFormat(_)
            | Error::UnsupportedDepth(_) => 3,
            Error::InvalidImage(_) | Error::DegenerateImage(_) => 4,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

type CmdResult = Result<String, CliError>;

fn load(path: &Path) -> Result<Image, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    read_pgm(&bytes).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn save(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the noisy image and mask; returns the measured corruption fraction.
pub fn cmd_noise(args: &NoiseArgs) -> CmdResult {
    let spec = NoiseSpec::new(args.density, args.seed)?;
    let clean = load(&args.input)?;
    let (noisy, mask) = inject_salt_pepper(&clean, &spec);
    save(&args.out, &write_pgm(&noisy))?;
    if let Some(path) = &args.mask {
        save(path, &write_mask(&mask))?;
    }
    let fraction = mask.corrupted() as f64 / clean.len() as f64;
    Ok(format!("corrupted_fraction={}\n", fmt_num(fraction)))
}

pub fn cmd_denoise(args: &DenoiseArgs) -> CmdResult {
    let variant: Variant = args.variant.parse()?;
    let params = args.filter.to_params()?;
    let noisy = load(&args.input)?;
    let reference = args.reference.as_deref().map(load).transpose()?;
    let (filtered, trace) = run_filter(&noisy, variant, &params)?;
    save(&args.out, &write_pgm(&filtered))?;
    if let Some(path) = &args.trace {
        save(path, &write_csv(&trace.to_csv())?)?;
    }
    let mut out = String::new();
    if let Some(reference) = reference {
        // score what was written to disk
        let report = compute_metrics(&reference, &filtered.rounded())?;
        writeln!(out, "{}", report.summary_line()).unwrap();
    }
    Ok(out)
}

pub fn cmd_metrics(args: &MetricsArgs) -> CmdResult {
    let reference = load(&args.reference)?;
    let test = load(&args.test)?;
    let report = compute_metrics(&reference, &test)?;
    let mut table = CsvTable::new(METRICS_HEADER);
    table.push_row(report.csv_cells());
    Ok(String::from_utf8(write_csv(&table)?).expect("ascii"))
}

/// One scored cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub density: f64,
    pub variant: Variant,
    pub report: MetricsReport,
}

/// Injects noise at each density (seed `seed + round(1000 * density)`),
/// runs every variant and scores the rounded output. Cells come back
/// sorted by density, then variant name.
pub fn run_sweep(
    clean: &Image,
    densities: &[f64],
    variants: &[Variant],
    seed: u64,
    params: &FilterParams,
) -> Result<Vec<SweepCell>, Error> {
    if densities.is_empty() {
        return Err(Error::InvalidParameter("density list is empty".into()));
    }
    if variants.is_empty() {
        return Err(Error::InvalidParameter("variant list is empty".into()));
    }
    let noisy = densities
        .iter()
        .map(|&d| {
            let spec = NoiseSpec::new(d, density_seed(seed, d))?;
            Ok(inject_salt_pepper(clean, &spec).0)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let jobs: Vec<(usize, Variant)> = (0..densities.len())
        .flat_map(|i| variants.iter().map(move |&v| (i, v)))
        .collect();
    let mut cells = jobs
        .par_iter()
        .map(|&(i, variant)| {
            let (filtered, _) = run_filter(&noisy[i], variant, params)?;
            Ok(SweepCell {
                density: densities[i],
                variant,
                report: compute_metrics(clean, &filtered.rounded())?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    cells.sort_by(|a, b| {
        a.density
            .total_cmp(&b.density)
            .then_with(|| a.variant.name().cmp(b.variant.name()))
    });
    Ok(cells)
}

pub fn sweep_table(cells: &[SweepCell]) -> CsvTable {
    let mut table = CsvTable::new(SWEEP_HEADER);
    for c in cells {
        let mut row = vec![fmt_num(c.density), c.variant.name().to_string()];
        row.extend(c.report.csv_cells());
        table.push_row(row);
    }
    table
}

pub fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    if args.densities.is_empty() {
        return Err(CliError::usage("density list is empty"));
    }
    let variants = args
        .variants
        .iter()
        .map(|s| s.parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()?;
    let params = args.filter.to_params()?;
    let clean = load(&args.input)?;
    let cells = run_sweep(&clean, &args.densities, &variants, args.seed, &params)?;
    save(&args.out, &write_csv(&sweep_table(&cells))?)?;
    if let Some(path) = &args.stats_out {
        let stats = stats_sweep(&clean, &args.densities, args.seed)?;
        save(path, &write_csv(&stats)?)?;
    }
    if let Some(path) = &args.svg {
        save(path, psnr_chart(&cells).as_bytes())?;
    }
    Ok(format!("wrote {} rows to {}\n", cells.len(), args.out.display()))
}

/// Line chart of PSNR against density, one polyline per variant.
pub fn psnr_chart(cells: &[SweepCell]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let finite = |c: &&SweepCell| c.report.psnr.is_finite();
    let max_psnr = cells
        .iter()
        .filter(finite)
        .map(|c| c.report.psnr)
        .fold(10.0f64, f64::max)
        .ceil();
    let sx = |d: f64| M + d * (W - 2.0 * M);
    let sy = |p: f64| H - M - (p / max_psnr).clamp(0.0, 1.0) * (H - 2.0 * M);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<path d="M{M} {M} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12">noise density</text>"#,
        x = W / 2.0,
        y = H - 10.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="14" y="{y}" font-size="12" transform="rotate(-90 14 {y})" text-anchor="middle">PSNR (dB, max {max_psnr})</text>"#,
        y = H / 2.0
    )
    .unwrap();

    let mut variants: Vec<Variant> = cells.iter().map(|c| c.variant).collect();
    variants.sort_by_key(|v| v.name());
    variants.dedup();
    for (i, v) in variants.iter().enumerate() {
        let points: Vec<String> = cells
            .iter()
            .filter(|c| c.variant == *v)
            .filter(finite)
            .map(|c| format!("{:.2},{:.2}", sx(c.density), sy(c.report.psnr)))
            .collect();
        let color = COLORS[i % COLORS.len()];
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{x}" y="{y}" fill="{color}" font-size="12">{v}</text>"#,
            x = W - M - 80.0,
            y = M + 16.0 * (i as f64 + 1.0)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be >= 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command)),
            Err(e) => Err(CliError::usage(e.to_string())),
        },
        None => dispatch(&cli.command),
    };
    match outcome {
        Ok(stdout) => {
            print!("{stdout}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: &Command) -> CmdResult {
    match command {
        Command::Noise(a) => cmd_noise(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}
