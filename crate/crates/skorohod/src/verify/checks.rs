//! Implementations of the individual checks.
//!
//! Conventions shared by every check: `lhs` is the measured quantity, `rhs`
//! the bound, `margin = rhs - lhs`, and a non-report-only record fails only
//! when the margin undershoots minus the error budget (plus the exact-path
//! slack). Upper bounds substituted on the right-hand side and lower bounds
//! substituted on the left keep every verdict sound: a reported pass is a
//! pass of a bound at least as strict as the stated one.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    scenario_err, CheckSpec, Error, MapSpec, ReportRecord, Scenario,
};
use crate::measures1d::{decompose_mixture, pushforward_poly_1d, reconstruct, DecomposeOptions};
use crate::multilinear::{NormOptions, SymmetricPolynomial};
use crate::numeric::{adaptive_gl, gamma_half, gauss_legendre, poly_deriv, poly_eval, substream_seed};
use crate::pushforward::{histogram_1d, Binning, ProductMeasure};
use crate::regularity::{
    besov_ratio, directional_tv_grid, kr_norm, lp_norm, tv_distance, DensityInput, MetricReport,
    Method,
};
use crate::tol::DEFAULT_BINS;

pub(super) fn run_check(
    scenario: &Scenario,
    measure: &ProductMeasure,
    check: &CheckSpec,
) -> Result<Vec<ReportRecord>, Error> {
    match check {
        CheckSpec::MixtureIdentity {
            factor,
            slabs,
            tol,
            rhs_scale,
        } => mixture_identity(scenario, measure, *factor, *slabs, *tol, *rhs_scale),
        CheckSpec::LinearImageTv { rhs_scale } => linear_image_tv(scenario, measure, *rhs_scale),
        CheckSpec::ProjectionGrid {
            directions,
            bins,
            gamma_c,
            rhs_scale,
        } => projection_grid(scenario, measure, *directions, *bins, *gamma_c, *rhs_scale),
        CheckSpec::SmoothedDirection {
            epsilons,
            theta,
            rhs_scale,
        } => smoothed_direction(scenario, measure, epsilons, theta.as_deref(), *rhs_scale),
        CheckSpec::BesovSmallball {
            sets,
            shifts,
            strict_sup,
            rhs_scale,
        } => besov_smallball(scenario, measure, sets, shifts, *strict_sup, *rhs_scale),
        CheckSpec::LpBound { p_grid, rhs_scale } => lp_bound(scenario, measure, p_grid, *rhs_scale),
        CheckSpec::KrTvBound {
            poly2,
            grid,
            rhs_scale,
        } => kr_tv_bound(scenario, measure, poly2, *grid, *rhs_scale),
    }
}

fn bad(scenario: &Scenario, msg: impl Into<String>) -> Error {
    Error::BadScenario {
        id: scenario.id.clone(),
        msg: msg.into(),
    }
}

/// The polynomial a check operates on: explicit, or promoted from a linear
/// functional.
fn map_polynomial(scenario: &Scenario) -> Result<SymmetricPolynomial, Error> {
    match &scenario.map {
        Some(MapSpec::Polynomial { poly }) => Ok(poly.clone()),
        Some(MapSpec::Linear { a }) => {
            let monomials: Vec<(Vec<u32>, f64)> = (0..a.len())
                .map(|j| {
                    let mut p = vec![0u32; a.len()];
                    p[j] = 1;
                    (p, a[j])
                })
                .collect();
            SymmetricPolynomial::from_monomials(a.len(), &monomials)
                .map_err(scenario_err(&scenario.id))
        }
        _ => Err(bad(scenario, "this check needs a polynomial or linear map")),
    }
}

// ---------------------------------------------------------------------------
// mixture identity

fn mixture_identity(
    scenario: &Scenario,
    measure: &ProductMeasure,
    factor: usize,
    slabs: Option<usize>,
    tol: Option<f64>,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    if factor >= measure.dim() {
        return Err(bad(scenario, format!("factor index {factor} out of range")));
    }
    let density = measure.factor(factor);
    let mut opts = DecomposeOptions::default();
    if let Some(s) = slabs {
        opts.slabs_per_band = s;
    }
    let dec = decompose_mixture(density, &opts).map_err(scenario_err(&scenario.id))?;
    let lhs = density.tv_skorohod();
    let rhs = dec.mixture.total_tv() * rhs_scale;
    let default_tol = if dec.exact { 1e-8 } else { 1e-3 * lhs.max(1.0) };
    let budget = tol.unwrap_or(default_tol) * scenario.tolerance_scale;
    let method = if dec.exact { "exact" } else { "quadrature" };
    let mut records = vec![ReportRecord::judged_identity(
        &scenario.id,
        "mixture_identity".to_string(),
        "T1.3",
        lhs,
        rhs,
        budget,
        scenario.tolerance_scale,
        "exact",
        method,
        Some(format!(
            "components={} bands={} slabs={}",
            dec.mixture.len(),
            dec.bands,
            dec.slabs_per_band
        )),
    )];
    let rebuilt = reconstruct(&dec.mixture).map_err(scenario_err(&scenario.id))?;
    let l1 = rebuilt.density().l1_distance(density.density());
    // Step densities reconstruct exactly; for moving endpoints the box
    // approximation error scales with the derivative norm over the slab
    // count.
    let l1_tol = if dec.exact && density.density().max_degree() == 0 {
        1e-8
    } else {
        1e-3 * lhs.max(1.0)
            * (crate::tol::DEFAULT_SLABS_PER_BAND as f64 / dec.slabs_per_band.max(1) as f64)
                .max(1.0)
    } * scenario.tolerance_scale;
    records.push(ReportRecord::judged(
        &scenario.id,
        "mixture_l1".to_string(),
        "T1.3",
        l1,
        l1_tol,
        0.0,
        scenario.tolerance_scale,
        method,
        "tolerance",
        None,
    ));
    Ok(records)
}

// ---------------------------------------------------------------------------
// exact linear image

fn linear_image_tv(
    scenario: &Scenario,
    measure: &ProductMeasure,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let a = match &scenario.map {
        Some(MapSpec::Linear { a }) => a.clone(),
        _ => return Err(bad(scenario, "linear_image_tv needs a linear map")),
    };
    if a.len() != measure.dim() {
        return Err(bad(scenario, "direction length does not match the measure"));
    }
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(bad(scenario, "direction must be nonzero"));
    }
    let unit: Vec<f64> = a.iter().map(|v| v / norm).collect();
    let rhs = 2.0f64.sqrt() * measure.max_factor_tv() * rhs_scale;
    match measure.linear_image(&unit, &Default::default()) {
        Ok(img) => {
            let lhs = img.density.variation();
            Ok(vec![ReportRecord::judged(
                &scenario.id,
                "linear_image_tv".to_string(),
                "T3.1",
                lhs,
                rhs,
                img.thinning_l1,
                scenario.tolerance_scale,
                "exact",
                "closed-form",
                (img.thinning_l1 > 0.0).then(|| format!("thinned to {} cells", img.cells)),
            )])
        }
        Err(crate::pushforward::Error::CellCap { cells, cap }) => {
            // Monte Carlo fallback, report-only.
            let table = measure.sample(scenario.mc.samples, scenario.mc.seed);
            let values: Vec<f64> = (0..table.rows())
                .map(|i| {
                    table
                        .row(i)
                        .iter()
                        .zip(&unit)
                        .map(|(x, u)| x * u)
                        .sum::<f64>()
                })
                .collect();
            let grid = histogram_1d(&values, &Binning::with_bins(64), scenario.mc.seed, "fallback");
            let est = directional_tv_grid(&grid, &[1.0]).map_err(scenario_err(&scenario.id))?;
            Ok(vec![ReportRecord::report_only(
                &scenario.id,
                "linear_image_tv".to_string(),
                "T3.1",
                est.value,
                rhs,
                est.error_budget,
                "histogram",
                "closed-form",
                Some(format!(
                    "{cells} cells exceed the cap of {cap}; histogram estimate"
                )),
            )])
        }
        Err(e) => Err(scenario_err(&scenario.id)(e)),
    }
}

// ---------------------------------------------------------------------------
// projection grids

fn projection_grid(
    scenario: &Scenario,
    measure: &ProductMeasure,
    directions: usize,
    bins: Option<usize>,
    gamma_c: Option<f64>,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let rows = match &scenario.map {
        Some(MapSpec::Projection { rows }) => rows.clone(),
        Some(MapSpec::Linear { a }) => vec![a.clone()],
        _ => return Err(bad(scenario, "projection_grid needs a projection map")),
    };
    let k = rows.len();
    let binning = match bins {
        Some(b) => Binning::with_bins(b),
        None => Binning::default_for(k),
    };
    let grid = measure
        .projection_image(&rows, scenario.mc.samples, scenario.mc.seed, &binning)
        .map_err(scenario_err(&scenario.id))?;

    let mut dirs: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(scenario.mc.seed, 0xD1));
    while dirs.len() < directions.max(k) {
        let mut e: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-6 {
            continue;
        }
        for v in e.iter_mut() {
            *v /= n;
        }
        dirs.push(e);
    }
    let mut worst = 0.0f64;
    let mut budget = 0.0f64;
    let max_tv = measure.max_factor_tv();
    for e in &dirs {
        let est = directional_tv_grid(&grid, e).map_err(scenario_err(&scenario.id))?;
        worst = worst.max(est.value / max_tv);
        budget = budget.max(est.error_budget / max_tv);
    }
    let mut records = vec![ReportRecord::report_only(
        &scenario.id,
        "projection_grid".to_string(),
        "T3.2",
        worst,
        0.0,
        budget,
        "histogram",
        "none",
        Some(format!(
            "max directional derivative-norm ratio over {} directions; no explicit constant for k={k}",
            dirs.len()
        )),
    )];
    if let Some(c) = gamma_c {
        let lhs = gamma_surface_integral(k, c);
        let (oracle, oracle_budget) = gamma_integral_oracle(k, c);
        records.push(ReportRecord::judged_identity(
            &scenario.id,
            format!("gamma_reference(k={k},c={c})"),
            "R3.3",
            lhs,
            oracle * rhs_scale,
            oracle_budget + 1e-6,
            scenario.tolerance_scale,
            "closed-form",
            "quadrature",
            None,
        ));
    }
    Ok(records)
}

/// Closed form of `int_{R^{k-1}} exp(-c |x|) dx`.
pub fn gamma_surface_integral(k: usize, c: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let m = (k - 1) as f64;
    m * PI.powf(m / 2.0) * gamma_half(m) / (c.powf(m) * gamma_half(m / 2.0 + 1.0))
}

/// Independent quadrature of the same integral for k <= 3.
fn gamma_integral_oracle(k: usize, c: f64) -> (f64, f64) {
    match k {
        1 => (1.0, 0.0),
        2 => {
            let l = 50.0 / c;
            let (v, e) = adaptive_gl(|x: f64| (-c * x.abs()).exp(), -l, l, 1e-10, 30);
            (v, e)
        }
        3 => {
            let l = 50.0 / c;
            // iterated 1-D quadrature over the plane
            let inner = |x: f64| {
                let (v, _) =
                    adaptive_gl(move |y: f64| (-c * (x * x + y * y).sqrt()).exp(), -l, l, 1e-9, 22);
                v
            };
            let (v, e) = adaptive_gl(inner, -l, l, 1e-8, 22);
            (v, e + 1e-6)
        }
        _ => (f64::NAN, f64::INFINITY),
    }
}

// ---------------------------------------------------------------------------
// smoothed directional functional

struct TestFn {
    name: &'static str,
    deriv: fn(f64) -> f64,
}

const PHI_FAMILY: [TestFn; 3] = [
    TestFn {
        name: "sin",
        deriv: |t| t.cos(),
    },
    TestFn {
        name: "sin5",
        deriv: |t| 5.0 * (5.0 * t).cos(),
    },
    TestFn {
        name: "tanh2",
        deriv: |t| {
            let c = (2.0 * t).cosh();
            2.0 / (c * c)
        },
    },
];

fn smoothed_direction(
    scenario: &Scenario,
    measure: &ProductMeasure,
    epsilons: &[f64],
    theta: Option<&[f64]>,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let poly = map_polynomial(scenario)?;
    if poly.dim() != measure.dim() {
        return Err(bad(scenario, "polynomial dimension mismatch"));
    }
    if epsilons.is_empty() || epsilons.iter().any(|e| *e <= 0.0) {
        return Err(bad(scenario, "epsilons must be positive"));
    }
    let n = measure.dim();
    let mut th = match theta {
        Some(t) if t.len() == n => t.to_vec(),
        Some(_) => return Err(bad(scenario, "theta length mismatch")),
        None => {
            let mut t = vec![0.0; n];
            t[0] = 1.0;
            t
        }
    };
    let norm = th.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= 0.0 {
        return Err(bad(scenario, "theta must be nonzero"));
    }
    for v in th.iter_mut() {
        *v /= norm;
    }
    let d = poly.degree() as f64;
    // ||D_theta mu|| <= sum |theta_j| ||mu_j'|| for product measures
    let dtv_up: f64 = th
        .iter()
        .zip(measure.factors())
        .map(|(t, f)| t.abs() * f.tv_skorohod())
        .sum();

    // One sampling pass feeds every (phi, eps) combination.
    let mc_values: Option<Vec<(f64, f64)>> = if n == 1 {
        None
    } else {
        let table = measure.sample(scenario.mc.samples, scenario.mc.seed);
        let mut values = Vec::with_capacity(table.rows());
        for i in 0..table.rows() {
            let x = table.row(i);
            let f = poly.eval(x).map_err(scenario_err(&scenario.id))?;
            let g = poly.dir_deriv(x, &th).map_err(scenario_err(&scenario.id))?;
            values.push((f, g));
        }
        Some(values)
    };
    let mut records = Vec::new();
    for &eps in epsilons {
        for phi in &PHI_FAMILY {
            let (raw, budget, method) = match &mc_values {
                None => {
                    let coeffs = poly.to_univariate().expect("dim 1");
                    let fp = poly_deriv(&coeffs);
                    let rho = measure.factor(0).density();
                    let mut acc = 0.0;
                    let mut err = 0.0;
                    for i in 0..rho.piece_count() {
                        let (x0, x1) = rho.piece_bounds(i);
                        let c = rho.piece_center(i);
                        let pc = rho.piece_coeffs(i);
                        let th0 = th[0];
                        let integrand = |x: f64| {
                            let g = poly_eval(&fp, x) * th0;
                            (phi.deriv)(poly_eval(&coeffs, x)) * g * g / (g * g + eps)
                                * poly_eval(pc, x - c)
                        };
                        let (v, e) = adaptive_gl(&integrand, x0, x1, 1e-11, 22);
                        acc += v;
                        err += e;
                    }
                    (acc, err, "quadrature")
                }
                Some(values) => {
                    let mut sum = 0.0;
                    let mut sumsq = 0.0;
                    for &(f, g) in values {
                        let v = (phi.deriv)(f) * g * g / (g * g + eps);
                        sum += v;
                        sumsq += v * v;
                    }
                    let nn = values.len() as f64;
                    let mean = sum / nn;
                    let var = (sumsq / nn - mean * mean).max(0.0);
                    (mean, 3.0 * (var / nn).sqrt(), "histogram")
                }
            };
            let rhs = (3.0 * PI * d + 0.5) * dtv_up / eps.sqrt() * rhs_scale;
            records.push(ReportRecord::judged(
                &scenario.id,
                format!("smoothed_direction(phi={},eps={eps})", phi.name),
                "C4.2",
                raw.abs(),
                rhs,
                budget,
                scenario.tolerance_scale,
                method,
                "closed-form",
                None,
            ));
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Besov ratio and small-ball bounds

fn besov_smallball(
    scenario: &Scenario,
    measure: &ProductMeasure,
    sets: &[Vec<(f64, f64)>],
    shifts: &[f64],
    strict_sup: bool,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let poly = map_polynomial(scenario)?;
    if poly.dim() != measure.dim() {
        return Err(bad(scenario, "polynomial dimension mismatch"));
    }
    let d = poly.degree();
    if d == 0 {
        return Err(bad(scenario, "polynomial must have degree >= 1"));
    }
    let s_upper = measure.sup_dtv_upper();
    let bn = poly
        .leading_form_norm(&NormOptions::default())
        .map_err(scenario_err(&scenario.id))?;
    let alpha = 1.0 / d as f64;
    let b_neg = bn.value.powf(-alpha);
    let b_pos = bn.value.powf(alpha);
    let norm_note = (!bn.exact).then(|| "leading-form norm is an ascent lower bound".to_string());

    enum Image {
        Exact(crate::measures1d::DensityEvaluator),
        Sampled(Vec<f64>),
    }
    let image = if measure.dim() == 1 {
        let coeffs = poly.to_univariate().expect("dim 1");
        Image::Exact(
            pushforward_poly_1d(measure.factor(0), &coeffs).map_err(scenario_err(&scenario.id))?,
        )
    } else {
        let table = measure.sample(scenario.mc.samples, scenario.mc.seed);
        let mut values = Vec::with_capacity(table.rows());
        for i in 0..table.rows() {
            values.push(poly.eval(table.row(i)).map_err(scenario_err(&scenario.id))?);
        }
        Image::Sampled(values)
    };

    let mut records = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let lambda: f64 = set.iter().map(|(a, b)| (b - a).max(0.0)).sum();
        let (lhs, budget, method) = match &image {
            Image::Exact(ev) => (ev.mass_of_intervals(set), 1e-12, "exact"),
            Image::Sampled(values) => {
                let count = values
                    .iter()
                    .filter(|v| set.iter().any(|(a, b)| **v >= *a && **v <= *b))
                    .count();
                let n = values.len() as f64;
                let p = count as f64 / n;
                (p, 3.0 * (p.max(1e-12) * (1.0 - p) / n).sqrt(), "histogram")
            }
        };
        let rhs = 12.0 * PI * s_upper * b_neg * lambda.powf(alpha) * rhs_scale;
        records.push(ReportRecord::judged(
            &scenario.id,
            format!("small_ball[{i}]"),
            "T4.2",
            lhs,
            rhs,
            budget,
            scenario.tolerance_scale,
            method,
            "closed-form",
            norm_note.clone(),
        ));
    }

    if !shifts.is_empty() {
        let ratio: MetricReport = match &image {
            Image::Exact(ev) => besov_ratio(DensityInput::Evaluator(ev), alpha, shifts)
                .map_err(scenario_err(&scenario.id))?,
            Image::Sampled(values) => {
                let grid = histogram_1d(
                    values,
                    &Binning::with_bins(DEFAULT_BINS),
                    scenario.mc.seed,
                    "polynomial",
                );
                besov_ratio(DensityInput::Grid(&grid), alpha, shifts)
                    .map_err(scenario_err(&scenario.id))?
            }
        };
        let lhs = b_pos * ratio.value;
        let rhs = 24.0 * PI * s_upper * rhs_scale;
        let method = match ratio.method {
            Method::Exact => "exact",
            Method::Quadrature => "quadrature",
            Method::Histogram => "histogram",
        };
        records.push(ReportRecord::judged(
            &scenario.id,
            "besov_ratio".to_string(),
            "T4.2",
            lhs,
            rhs,
            b_pos * ratio.error_budget,
            scenario.tolerance_scale,
            method,
            "closed-form",
            norm_note.clone(),
        ));
    }

    if strict_sup {
        if measure.dim() > 3 {
            return Err(bad(scenario, "strict_sup needs dimension <= 3"));
        }
        let (lower, budget) = sampled_sup_dtv_lower(measure, scenario.mc.seed, 64);
        records.push(ReportRecord::report_only(
            &scenario.id,
            "sup_dtv_lower".to_string(),
            "T4.2",
            lower,
            s_upper,
            budget,
            "quadrature",
            "closed-form",
            Some("sampled-direction lower bound vs closed-form upper bound".to_string()),
        ));
    }
    Ok(records)
}

/// Lower bound on `sup_theta ||D_theta mu||` by tensor-grid quadrature of
/// `int |sum_j theta_j rho_j'(x_j) prod_{i != j} rho_i(x_i)| dx` plus the
/// exact jump mass, maximized over sampled directions.
fn sampled_sup_dtv_lower(measure: &ProductMeasure, seed: u64, directions: usize) -> (f64, f64) {
    let n = measure.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, 0x5D));
    let mut best = 0.0f64;
    let mut budget = 0.0f64;
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    while dirs.len() < directions {
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let nr = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nr < 1e-6 {
            continue;
        }
        for v in e.iter_mut() {
            *v /= nr;
        }
        dirs.push(e);
    }
    for theta in &dirs {
        let (v, e) = directional_tv_product(measure, theta);
        if v > best {
            best = v;
            budget = e;
        }
    }
    (best, budget)
}

fn directional_tv_product(measure: &ProductMeasure, theta: &[f64]) -> (f64, f64) {
    let n = measure.dim();
    let densities: Vec<_> = measure.factors().iter().map(|f| f.density()).collect();
    let derivs: Vec<_> = densities.iter().map(|d| d.derivative_pieces()).collect();
    // atoms of different factors live on disjoint hyperplanes: exact jump part
    let jump_part: f64 = theta
        .iter()
        .zip(&densities)
        .map(|(t, d)| t.abs() * d.jump_variation())
        .sum();
    // smooth part over the product of piece grids
    let integrand = |x: &[f64]| -> f64 {
        let mut acc = 0.0;
        for j in 0..n {
            if theta[j] == 0.0 {
                continue;
            }
            let mut term = theta[j] * derivs[j].eval(x[j]);
            for (i, d) in densities.iter().enumerate() {
                if i != j {
                    term *= d.eval(x[i]);
                }
            }
            acc += term;
        }
        acc.abs()
    };
    let eval_with_order = |order: usize, split: usize| -> f64 {
        let (nodes, weights) = gauss_legendre(order);
        let mut total = 0.0;
        let mut cell = vec![0usize; n];
        'cells: loop {
            // integrate this product piece-cell with per-axis subdivision
            let bounds: Vec<(f64, f64)> = cell
                .iter()
                .zip(&densities)
                .map(|(&c, d)| d.piece_bounds(c))
                .collect();
            let mut sub = vec![0usize; n];
            loop {
                let sub_bounds: Vec<(f64, f64)> = bounds
                    .iter()
                    .zip(&sub)
                    .map(|(&(lo, hi), &s)| {
                        let w = (hi - lo) / split as f64;
                        (lo + w * s as f64, lo + w * (s + 1) as f64)
                    })
                    .collect();
                // tensor Gauss rule
                let mut idx = vec![0usize; n];
                loop {
                    let mut point = Vec::with_capacity(n);
                    let mut w = 1.0;
                    for (axis, &k) in idx.iter().enumerate() {
                        let (lo, hi) = sub_bounds[axis];
                        let mid = 0.5 * (lo + hi);
                        let half = 0.5 * (hi - lo);
                        point.push(mid + half * nodes[k]);
                        w *= weights[k] * half;
                    }
                    total += w * integrand(&point);
                    let mut p = n;
                    loop {
                        if p == 0 {
                            break;
                        }
                        p -= 1;
                        idx[p] += 1;
                        if idx[p] < order {
                            break;
                        }
                        idx[p] = 0;
                        if p == 0 {
                            break;
                        }
                    }
                    if idx.iter().all(|&k| k == 0) {
                        break;
                    }
                }
                let mut p = n;
                loop {
                    if p == 0 {
                        break;
                    }
                    p -= 1;
                    sub[p] += 1;
                    if sub[p] < split {
                        break;
                    }
                    sub[p] = 0;
                    if p == 0 {
                        break;
                    }
                }
                if sub.iter().all(|&s| s == 0) {
                    break;
                }
            }
            let mut p = n;
            loop {
                if p == 0 {
                    break 'cells;
                }
                p -= 1;
                cell[p] += 1;
                if cell[p] < densities[p].piece_count() {
                    break;
                }
                cell[p] = 0;
            }
        }
        total
    };
    let coarse = eval_with_order(4, 2);
    let fine = eval_with_order(6, 3);
    (fine + jump_part, (fine - coarse).abs() * 2.0 + 1e-9)
}

// ---------------------------------------------------------------------------
// L^p bound

fn lp_bound(
    scenario: &Scenario,
    measure: &ProductMeasure,
    p_grid: &[f64],
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let poly = map_polynomial(scenario)?;
    if poly.dim() != measure.dim() {
        return Err(bad(scenario, "polynomial dimension mismatch"));
    }
    let d = poly.degree();
    if d <= 1 {
        return Ok(vec![ReportRecord::report_only(
            &scenario.id,
            "lp_bound".to_string(),
            "C4.3",
            0.0,
            0.0,
            0.0,
            "none",
            "none",
            Some("degree 1: the exponent range [1, d/(d-1)) has no interior; check skipped".into()),
        )]);
    }
    let df = d as f64;
    let p_max = df / (df - 1.0);
    let s_upper = measure.sup_dtv_upper();
    let bn = poly
        .leading_form_norm(&NormOptions::default())
        .map_err(scenario_err(&scenario.id))?;

    let mut records = Vec::new();
    for &p in p_grid {
        if !(1.0..p_max).contains(&p) {
            records.push(ReportRecord::report_only(
                &scenario.id,
                format!("lp_bound(p={p})"),
                "C4.3",
                0.0,
                0.0,
                0.0,
                "none",
                "none",
                Some(format!("p={p} outside [1, {p_max:.6}); skipped")),
            ));
            continue;
        }
        let (lhs, budget, method) = if measure.dim() == 1 {
            let coeffs = poly.to_univariate().expect("dim 1");
            let ev = pushforward_poly_1d(measure.factor(0), &coeffs)
                .map_err(scenario_err(&scenario.id))?;
            let r = lp_norm(DensityInput::Evaluator(&ev), p).map_err(scenario_err(&scenario.id))?;
            (r.value, r.error_budget, "quadrature")
        } else {
            let table = measure.sample(scenario.mc.samples, scenario.mc.seed);
            let mut values = Vec::with_capacity(table.rows());
            for i in 0..table.rows() {
                values.push(poly.eval(table.row(i)).map_err(scenario_err(&scenario.id))?);
            }
            let grid = histogram_1d(
                &values,
                &Binning::with_bins(DEFAULT_BINS),
                scenario.mc.seed,
                "polynomial",
            );
            let r = lp_norm(DensityInput::Grid(&grid), p).map_err(scenario_err(&scenario.id))?;
            (r.value, r.error_budget, "histogram")
        };
        let c_pd = (p + p / (p_max - p)).powf(1.0 / p) * (12.0 * PI).powf(df * (1.0 - 1.0 / p));
        let rhs =
            c_pd * s_upper.powf(df * (1.0 - 1.0 / p)) * bn.value.powf(1.0 / p - 1.0) * rhs_scale;
        records.push(ReportRecord::judged(
            &scenario.id,
            format!("lp_bound(p={p})"),
            "C4.3",
            lhs,
            rhs,
            budget,
            scenario.tolerance_scale,
            method,
            "closed-form",
            None,
        ));
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// KR vs TV

fn kr_tv_bound(
    scenario: &Scenario,
    measure: &ProductMeasure,
    poly2: &SymmetricPolynomial,
    grid_points: usize,
    rhs_scale: f64,
) -> Result<Vec<ReportRecord>, Error> {
    let poly1 = map_polynomial(scenario)?;
    if poly1.dim() != measure.dim() || poly2.dim() != measure.dim() {
        return Err(bad(scenario, "polynomial dimension mismatch"));
    }
    let d = poly1.degree().max(poly2.degree());
    if poly1.degree() != poly2.degree() {
        return Err(bad(scenario, "the two polynomials must share their degree"));
    }
    let grid_points = grid_points.clamp(16, crate::tol::KR_GRID_CAP);
    let s_upper = measure.sup_dtv_upper();
    let norm_opts = NormOptions::default();
    let bn1 = poly1
        .leading_form_norm(&norm_opts)
        .map_err(scenario_err(&scenario.id))?;
    let bn2 = poly2
        .leading_form_norm(&norm_opts)
        .map_err(scenario_err(&scenario.id))?;
    let alpha = 1.0 / d as f64;

    let (tv, kr_raw, kr_budget) = if measure.dim() == 1 {
        let c1 = poly1.to_univariate().expect("dim 1");
        let c2 = poly2.to_univariate().expect("dim 1");
        let e1 =
            pushforward_poly_1d(measure.factor(0), &c1).map_err(scenario_err(&scenario.id))?;
        let e2 =
            pushforward_poly_1d(measure.factor(0), &c2).map_err(scenario_err(&scenario.id))?;
        let tv = tv_distance(DensityInput::Evaluator(&e1), DensityInput::Evaluator(&e2))
            .map_err(scenario_err(&scenario.id))?;
        let (lo1, hi1) = e1.t_range();
        let (lo2, hi2) = e2.t_range();
        let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
        let width = (hi - lo) / grid_points as f64;
        let mut support = Vec::with_capacity(grid_points);
        let mut w1 = Vec::with_capacity(grid_points);
        let mut w2 = Vec::with_capacity(grid_points);
        for i in 0..grid_points {
            let a = lo + width * i as f64;
            let b = a + width;
            support.push(0.5 * (a + b));
            w1.push(e1.cdf(b) - e1.cdf(a));
            w2.push(e2.cdf(b) - e2.cdf(a));
        }
        let kr = kr_norm(&support, &w1, &w2).map_err(scenario_err(&scenario.id))?;
        (tv, kr.value, width)
    } else {
        let table = measure.sample(scenario.mc.samples, scenario.mc.seed);
        let mut v1 = Vec::with_capacity(table.rows());
        let mut v2 = Vec::with_capacity(table.rows());
        for i in 0..table.rows() {
            let x = table.row(i);
            v1.push(poly1.eval(x).map_err(scenario_err(&scenario.id))?);
            v2.push(poly2.eval(x).map_err(scenario_err(&scenario.id))?);
        }
        let lo = v1
            .iter()
            .chain(v2.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = v1
            .iter()
            .chain(v2.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.01 * (hi - lo).max(1e-9);
        let binning = Binning {
            bins: grid_points,
            range: Some(vec![(lo - pad, hi + pad)]),
        };
        let g1 = histogram_1d(&v1, &binning, scenario.mc.seed, "polynomial");
        let g2 = histogram_1d(&v2, &binning, scenario.mc.seed, "polynomial");
        let tv = tv_distance(DensityInput::Grid(&g1), DensityInput::Grid(&g2))
            .map_err(scenario_err(&scenario.id))?;
        let width = g1.bin_width(0);
        let support: Vec<f64> = (0..grid_points)
            .map(|i| 0.5 * (g1.edges(0)[i] + g1.edges(0)[i + 1]))
            .collect();
        let kr = kr_norm(&support, g1.masses(), g2.masses())
            .map_err(scenario_err(&scenario.id))?;
        // Sampling noise acts on the KR objective through cumulative sums:
        // summing by parts, |sum phi_i e_i| <= |E_m| + sum_i delta_i |E_i|
        // with E_i the cumulative noise, so the budget scales with CDF
        // standard errors rather than per-bin mass noise.
        let n = table.rows() as f64;
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        let mut noise = 0.0;
        for (a, b) in g1.masses().iter().zip(g2.masses()) {
            f1 += a;
            f2 += b;
            let se = ((f1 * (1.0 - f1)).max(0.0) / n + (f2 * (1.0 - f2)).max(0.0) / n).sqrt();
            noise += width * 3.0 * se;
        }
        let last_se = ((f1 * (1.0 - f1)).max(0.0) / n + (f2 * (1.0 - f2)).max(0.0) / n).sqrt();
        noise += 3.0 * last_se;
        (tv, kr.value, width + noise)
    };
    // the grid optimum is already a lower bound; subtract the discretization
    // slack to keep the right-hand side strictly on the safe side
    let kr_lower = (kr_raw - kr_budget).max(0.0);
    let c_const =
        2.0 * (1.0 + 12.0 * PI * s_upper * (bn1.value.powf(-alpha) + bn2.value.powf(-alpha)));
    let rhs = c_const * kr_lower.powf(1.0 / (1.0 + d as f64)) * rhs_scale;
    Ok(vec![ReportRecord::judged(
        &scenario.id,
        "kr_tv_bound".to_string(),
        "C4.4",
        tv.value,
        rhs,
        tv.error_budget,
        scenario.tolerance_scale,
        match tv.method {
            Method::Exact => "exact",
            Method::Quadrature => "quadrature",
            Method::Histogram => "histogram",
        },
        "closed-form",
        Some(format!("kr_lower={kr_lower:.6e} (grid LP lower bound)")),
    )])
}
