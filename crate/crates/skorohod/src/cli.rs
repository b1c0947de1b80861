//! Command-line front end.
//!
//! One thin binary with four subcommands: `decompose`, `project`,
//! `polyimage` and `verify`. Exit codes: 0 when every check passes, 1 when
//! an inequality check fails, 2 for usage, schema or input errors. All
//! numeric output is rendered with 17 significant digits so files round-trip
//! exactly; given identical inputs and seeds every artifact is byte-stable
//! except for the report timestamp.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::measures1d::{decompose_mixture, pushforward_poly_1d, BVDensity, DecomposeOptions};
use crate::multilinear::SymmetricPolynomial;
use crate::pushforward::{histogram_1d, Binning, GridDensity, ProductMeasure};
use crate::regularity::{besov_ratio, small_ball, DensityInput};
use crate::verify::{self, FactorSpec, Report};

#[derive(Parser)]
#[command(
    name = "skorohod",
    version,
    about = "Exact and sampled computation with bounded-variation densities and their images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format for the main artifact.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a BV density file into a convex mixture of uniforms and
    /// print the derivative-norm identity.
    Decompose {
        /// JSON density document {breakpoints, pieces}.
        density: PathBuf,
        /// Level slabs per critical band.
        #[arg(long)]
        slabs: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact density of a linear functional of a product measure, or a
    /// sampled k-dimensional projection grid.
    Project {
        /// JSON measure document {factors: [...]}.
        measure: PathBuf,
        /// Unit vector as an inline JSON array, e.g. "[0.7071,0.7071]".
        #[arg(long, conflicts_with = "matrix")]
        vector: Option<String>,
        /// Orthonormal rows as inline JSON, e.g. "[[1,0],[0,1]]".
        #[arg(long)]
        matrix: Option<String>,
        /// Monte Carlo sample count for grid paths.
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Bins per axis for grid output.
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Histogram of a polynomial image with a regularity summary (Besov
    /// ratio at alpha = 1/d and a small-ball table).
    Polyimage {
        /// JSON measure document {factors: [...]}.
        measure: PathBuf,
        /// JSON polynomial document {dim, forms|monomials}.
        poly: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        bins: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a scenario file and write the verification report.
    Verify {
        scenarios: PathBuf,
        /// Override every scenario's Monte Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override every scenario's Monte Carlo sample count.
        #[arg(long)]
        samples: Option<usize>,
        /// Multiply every error budget by this factor.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_from_env() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Decompose { density, slabs, out } => cmd_decompose(&density, slabs, &out),
        Command::Project {
            measure,
            vector,
            matrix,
            samples,
            seed,
            bins,
            out,
        } => cmd_project(&measure, vector, matrix, samples, seed, bins, &out),
        Command::Polyimage {
            measure,
            poly,
            samples,
            seed,
            bins,
            out,
        } => cmd_polyimage(&measure, &poly, samples, seed, bins, &out),
        Command::Verify {
            scenarios,
            seed,
            samples,
            tolerance_scale,
            out,
        } => cmd_verify(&scenarios, seed, samples, tolerance_scale, &out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureFile {
    factors: Vec<FactorSpec>,
}

fn read_measure(path: &Path) -> Result<ProductMeasure, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let file: MeasureFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut factors = Vec::new();
    let mut mixtures = Vec::new();
    for (i, spec) in file.factors.iter().enumerate() {
        let (d, m) = spec
            .build()
            .map_err(|msg| format!("{}: factors[{i}]: {msg}", path.display()))?;
        factors.push(d);
        mixtures.push(m);
    }
    ProductMeasure::from_factors(factors, mixtures).map_err(|e| e.to_string())
}

fn write_artifact(out: &OutputArgs, content: &str) -> Result<(), String> {
    match &out.output {
        Some(path) => std::fs::write(path, content).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_decompose(path: &Path, slabs: Option<usize>, out: &OutputArgs) -> Result<i32, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let density: BVDensity = serde_json::from_str(&text)
        .map_err(|e| format!("{}: invalid density: {e}", path.display()))?;
    let mut opts = DecomposeOptions::default();
    if let Some(s) = slabs {
        opts.slabs_per_band = s;
    }
    let dec = decompose_mixture(&density, &opts).map_err(|e| e.to_string())?;
    let tv = density.tv_skorohod();
    let mtv = dec.mixture.total_tv();
    println!(
        "tv_skorohod={tv:.16e} mixture_tv={mtv:.16e} delta={:.16e} components={} bands={} slabs={} exact={}",
        (tv - mtv).abs(),
        dec.mixture.len(),
        dec.bands,
        dec.slabs_per_band,
        dec.exact
    );
    let content = match out.format {
        Format::Json => dec.mixture.to_json(),
        Format::Csv => {
            let mut s = String::from("weight,a,b\n");
            for c in dec.mixture.components() {
                s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", c.weight, c.a, c.b));
            }
            s
        }
    };
    write_artifact(out, &content)?;
    Ok(0)
}

fn grid_from_exact_density(
    density: &crate::pwpoly::PiecewisePoly,
    bins: usize,
) -> GridDensity {
    let (lo, hi) = density.support();
    let edges: Vec<f64> = (0..=bins)
        .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
        .collect();
    let masses: Vec<f64> = edges
        .windows(2)
        .map(|w| density.integral(w[0], w[1]))
        .collect();
    GridDensity::from_masses_1d(edges, masses, 0)
}

fn cmd_project(
    path: &Path,
    vector: Option<String>,
    matrix: Option<String>,
    samples: usize,
    seed: u64,
    bins: Option<usize>,
    out: &OutputArgs,
) -> Result<i32, String> {
    let measure = read_measure(path)?;
    match (vector, matrix) {
        (Some(v), None) => {
            let mut a: Vec<f64> = serde_json::from_str(&v).map_err(|e| format!("--vector: {e}"))?;
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 0.0 {
                return Err("--vector must be nonzero".to_string());
            }
            for x in a.iter_mut() {
                *x /= norm;
            }
            let bins = bins.unwrap_or(crate::tol::DEFAULT_BINS);
            match measure.linear_image(&a, &Default::default()) {
                Ok(img) => {
                    let lhs = img.density.variation();
                    let rhs = 2.0f64.sqrt() * measure.max_factor_tv();
                    println!(
                        "exact path: variation={lhs:.16e} bound={rhs:.16e} margin={:.16e}",
                        rhs - lhs
                    );
                    let grid = grid_from_exact_density(&img.density, bins);
                    write_artifact(out, &render_grid(&grid, out.format))?;
                }
                Err(crate::pushforward::Error::CellCap { cells, cap }) => {
                    println!(
                        "mc fallback (report-only): {cells} mixture cells exceed the cap of {cap}"
                    );
                    let table = measure.sample(samples, seed);
                    let values: Vec<f64> = (0..table.rows())
                        .map(|i| {
                            table
                                .row(i)
                                .iter()
                                .zip(&a)
                                .map(|(x, u)| x * u)
                                .sum::<f64>()
                        })
                        .collect();
                    let grid =
                        histogram_1d(&values, &Binning::with_bins(bins), seed, "projection");
                    write_artifact(out, &render_grid(&grid, out.format))?;
                }
                Err(e) => return Err(e.to_string()),
            }
            Ok(0)
        }
        (None, Some(m)) => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_str(&m).map_err(|e| format!("--matrix: {e}"))?;
            let k = rows.len();
            let binning = match bins {
                Some(b) => Binning::with_bins(b),
                None => Binning::default_for(k),
            };
            let grid = measure
                .projection_image(&rows, samples, seed, &binning)
                .map_err(|e| e.to_string())?;
            if k > 1 {
                println!(
                    "report-only: no explicit derivative-norm constant for k={k}; grid estimate written"
                );
            }
            write_artifact(out, &render_grid(&grid, out.format))?;
            Ok(0)
        }
        _ => Err("exactly one of --vector or --matrix is required".to_string()),
    }
}

fn render_grid(grid: &GridDensity, format: Format) -> String {
    match format {
        Format::Json => grid.to_json(),
        Format::Csv => grid.to_csv(),
    }
}

fn cmd_polyimage(
    measure_path: &Path,
    poly_path: &Path,
    samples: usize,
    seed: u64,
    bins: Option<usize>,
    out: &OutputArgs,
) -> Result<i32, String> {
    let measure = read_measure(measure_path)?;
    let text =
        std::fs::read_to_string(poly_path).map_err(|e| format!("{}: {e}", poly_path.display()))?;
    let poly: SymmetricPolynomial =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", poly_path.display()))?;
    if poly.dim() != measure.dim() {
        return Err(format!(
            "polynomial dimension {} does not match measure dimension {}",
            poly.dim(),
            measure.dim()
        ));
    }
    let bins = bins.unwrap_or(crate::tol::DEFAULT_BINS);
    let d = poly.degree().max(1);
    let alpha = 1.0 / d as f64;
    let shifts = [1e-3, 3.162e-3, 1e-2, 3.162e-2, 1e-1];
    let ladder = [1e-4, 1e-3, 1e-2, 1e-1];

    if measure.dim() == 1 {
        let coeffs = poly
            .to_univariate()
            .ok_or_else(|| "univariate polynomial expected".to_string())?;
        let ev =
            pushforward_poly_1d(measure.factor(0), &coeffs).map_err(|e| e.to_string())?;
        let (lo, hi) = ev.t_range();
        let edges: Vec<f64> = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        let masses: Vec<f64> = edges.windows(2).map(|w| ev.cdf(w[1]) - ev.cdf(w[0])).collect();
        let grid = GridDensity::from_masses_1d(edges.clone(), masses, 0);
        if !ev.singular_values().is_empty() {
            let flagged: Vec<usize> = ev
                .singular_values()
                .iter()
                .map(|s| {
                    (((s - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
                })
                .collect();
            let values: Vec<String> = ev
                .singular_values()
                .iter()
                .map(|s| format!("{s:.16e}"))
                .collect();
            println!(
                "singular values=[{}] flagged_bins={flagged:?}",
                values.join(",")
            );
        }
        let besov = besov_ratio(DensityInput::Evaluator(&ev), alpha, &shifts)
            .map_err(|e| e.to_string())?;
        println!(
            "besov_ratio(alpha={alpha:.16e})={:.16e} budget={:.16e}",
            besov.value, besov.error_budget
        );
        for lambda in ladder {
            let set = [(lo, lo + lambda)];
            let mass = small_ball(DensityInput::Evaluator(&ev), &set)
                .map_err(|e| e.to_string())?;
            println!(
                "small_ball(lambda={lambda:.1e} at range start)={:.16e} budget={:.16e}",
                mass.value, mass.error_budget
            );
        }
        write_artifact(out, &render_grid(&grid, out.format))?;
    } else {
        let grid = measure
            .polynomial_image(&poly, samples, seed, &Binning::with_bins(bins))
            .map_err(|e| e.to_string())?;
        let (vmin, vmax) = grid.value_range();
        println!("value_range=[{vmin:.16e},{vmax:.16e}] outside_mass={:.16e}", grid.outside_mass());
        let besov =
            besov_ratio(DensityInput::Grid(&grid), alpha, &shifts).map_err(|e| e.to_string())?;
        println!(
            "besov_ratio(alpha={alpha:.16e})={:.16e} budget={:.16e}",
            besov.value, besov.error_budget
        );
        for lambda in ladder {
            let set = [(vmin, vmin + lambda)];
            let mass =
                small_ball(DensityInput::Grid(&grid), &set).map_err(|e| e.to_string())?;
            println!(
                "small_ball(lambda={lambda:.1e} at range start)={:.16e} budget={:.16e}",
                mass.value, mass.error_budget
            );
        }
        write_artifact(out, &render_grid(&grid, out.format))?;
    }
    Ok(0)
}

fn cmd_verify(
    path: &Path,
    seed: Option<u64>,
    samples: Option<usize>,
    tolerance_scale: f64,
    out: &OutputArgs,
) -> Result<i32, String> {
    let mut file = verify::load_scenarios(path).map_err(|e| e.to_string())?;
    for s in file.scenarios.iter_mut() {
        if let Some(seed) = seed {
            s.mc.seed = seed;
        }
        if let Some(samples) = samples {
            s.mc.samples = samples;
        }
        s.tolerance_scale *= tolerance_scale;
    }
    let records = verify::run_scenarios(&file, verify::default_threads())
        .map_err(|e| e.to_string())?;
    let report = Report::new(records).stamped();
    print!("{}", report.summary_lines());
    let (pass, fail, ro) = report.records.iter().fold((0, 0, 0), |acc, r| {
        match r.verdict {
            verify::Verdict::Pass => (acc.0 + 1, acc.1, acc.2),
            verify::Verdict::Fail => (acc.0, acc.1 + 1, acc.2),
            verify::Verdict::ReportOnly => (acc.0, acc.1, acc.2 + 1),
        }
    });
    println!("{} checks: {pass} pass, {fail} fail, {ro} report-only", report.records.len());
    let content = match out.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    if let Some(path) = &out.output {
        std::fs::write(path, content).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(if report.has_failures() { 1 } else { 0 })
}
