//! Regularity functionals: shift-L1 distances, Nikolskii-Besov ratios, L^p
//! norms, small-ball probabilities, total-variation and
//! Kantorovich-Rubinstein distances, and directional derivative-norm
//! estimates on grids.
//!
//! Every operation returns a [`MetricReport`] carrying the value, a method
//! tag, and an error budget combining discretization and Monte Carlo terms.
//! Exact paths report a zero budget.

mod kr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures1d::{DensityEvaluator, PointValue};
use crate::numeric::{gl_integrate, poly_eval};
use crate::pushforward::GridDensity;
use crate::pwpoly::PiecewisePoly;
use crate::tol::{KR_GRID_CAP, LP_DIVERGENCE};

#[derive(Debug, Error)]
pub enum Error {
    #[error("grids must share the same bin edges")]
    MismatchedGrids,
    #[error("exponent p = {p} must be >= 1")]
    BadExponent { p: f64 },
    #[error("Besov exponent alpha = {alpha} must lie in (0, 1]")]
    BadAlpha { alpha: f64 },
    #[error("need at least one positive shift")]
    EmptyShifts,
    #[error("intervals must be disjoint and ordered")]
    BadIntervals,
    #[error("this distance needs both densities in the same representation")]
    UnsupportedPair,
    #[error("support grid of size {m} exceeds the cap of {cap}")]
    GridTooLarge { m: usize, cap: usize },
    #[error("support grid must be strictly increasing")]
    UnsortedSupport,
    #[error("weight vectors must match the support grid")]
    LengthMismatch,
    #[error("direction must be a unit vector of the grid dimension")]
    BadDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Quadrature,
    Histogram,
}

/// A metric value with its combined discretization + Monte Carlo budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(with = "float_or_inf")]
    pub value: f64,
    pub error_budget: f64,
    pub method: Method,
}

impl MetricReport {
    fn exact(value: f64) -> Self {
        Self {
            value,
            error_budget: 0.0,
            method: Method::Exact,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// JSON has no infinity literal; encode it as the string "inf".
pub(crate) mod float_or_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        Ok(match Raw::deserialize(d)? {
            Raw::Num(v) => v,
            Raw::Str(s) if s == "inf" => f64::INFINITY,
            Raw::Str(s) if s == "-inf" => f64::NEG_INFINITY,
            Raw::Str(s) => {
                return Err(serde::de::Error::custom(format!("bad float string {s}")))
            }
        })
    }
}

/// A density in any of the three representations the metrics accept.
#[derive(Clone, Copy)]
pub enum DensityInput<'a> {
    Poly(&'a PiecewisePoly),
    Evaluator(&'a DensityEvaluator),
    Grid(&'a GridDensity),
}

// ---------------------------------------------------------------------------
// shift-L1

/// `int |rho(t + h) - rho(t)| dt`.
pub fn shift_l1(input: DensityInput<'_>, h: f64) -> Result<MetricReport, Error> {
    if h == 0.0 {
        return Ok(MetricReport::exact(0.0));
    }
    match input {
        DensityInput::Poly(p) => {
            let shifted = p.translate(-h); // density of t -> rho(t + h)
            Ok(MetricReport::exact(shifted.sub(p).abs_integral()))
        }
        DensityInput::Evaluator(ev) => {
            let mut knots = ev.t_knots();
            let extra: Vec<f64> = knots.iter().map(|k| k - h).collect();
            knots.extend(extra);
            knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
            let diff = |t: f64| finite_or_large(ev.eval(t + h)) - finite_or_large(ev.eval(t));
            let mass = |u: f64, v: f64| (ev.cdf(v + h) - ev.cdf(u + h)) - (ev.cdf(v) - ev.cdf(u));
            let (value, budget) = l1_by_crossings(&knots, &diff, &mass);
            Ok(MetricReport {
                value,
                error_budget: budget,
                method: Method::Quadrature,
            })
        }
        DensityInput::Grid(g) => {
            if g.dim() != 1 {
                return Err(Error::BadDirection);
            }
            let width = g.bin_width(0);
            let steps = (h / width).round() as i64;
            let m = g.masses();
            let bins = m.len() as i64;
            let mut value = 0.0;
            let mut noise = 0.0;
            let n = g.samples() as f64;
            for i in -steps.abs()..bins + steps.abs() {
                let take = |j: i64| {
                    if j >= 0 && j < bins {
                        m[j as usize]
                    } else {
                        0.0
                    }
                };
                let (a, b) = (take(i + steps), take(i));
                value += (a - b).abs();
                noise += (2.0 * (a + b) / (std::f64::consts::PI * n)).sqrt();
            }
            let var_est = grid_step_variation(g);
            let rounding = (h - steps as f64 * width).abs() * var_est;
            Ok(MetricReport {
                value,
                error_budget: rounding + noise + var_est * width,
                method: Method::Histogram,
            })
        }
    }
}

fn finite_or_large(v: PointValue) -> f64 {
    match v {
        PointValue::Finite(x) => x,
        PointValue::Singular => f64::MAX,
    }
}

/// Signed-segment integration of `|a - b|` between density representations
/// with exact interval masses: locate sign changes of the pointwise
/// difference, then sum exact mass differences per sign segment. The budget
/// is the disagreement between two probe resolutions.
fn l1_by_crossings(
    knots: &[f64],
    diff: &dyn Fn(f64) -> f64,
    mass_diff: &dyn Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let run = |probes: usize| -> f64 {
        let mut total = 0.0;
        for w in knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 1e-14 * (1.0 + a.abs()) {
                continue;
            }
            // locate crossings on a probe grid strictly inside the segment
            let mut cuts = vec![a];
            let mut prev_t = a + (b - a) * 0.5 / probes as f64;
            let mut prev_v = diff(prev_t);
            for i in 1..probes {
                let t = a + (b - a) * (i as f64 + 0.5) / probes as f64;
                let v = diff(t);
                if prev_v.signum() != v.signum() && prev_v != 0.0 && v != 0.0 {
                    // bisect the crossing
                    let (mut lo, mut hi) = (prev_t, t);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        let vm = diff(mid);
                        if vm == 0.0 {
                            break;
                        }
                        if vm.signum() == prev_v.signum() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                        if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                            break;
                        }
                    }
                    cuts.push(0.5 * (lo + hi));
                }
                prev_t = t;
                prev_v = v;
            }
            cuts.push(b);
            for seg in cuts.windows(2) {
                total += mass_diff(seg[0], seg[1]).abs();
            }
        }
        total
    };
    let coarse = run(64);
    let fine = run(128);
    (fine, (fine - coarse).abs() + 1e-12 * (1.0 + fine.abs()))
}

fn grid_step_variation(g: &GridDensity) -> f64 {
    let m = g.masses();
    let w = g.bin_width(0);
    let mut var = m[0] / w + m[m.len() - 1] / w;
    for i in 0..m.len() - 1 {
        var += (m[i + 1] - m[i]).abs() / w;
    }
    var
}

// ---------------------------------------------------------------------------
// Besov ratio

/// `max_h shift_l1(rho, h) / h^alpha` over a set of positive shifts.
pub fn besov_ratio(
    input: DensityInput<'_>,
    alpha: f64,
    shifts: &[f64],
) -> Result<MetricReport, Error> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::BadAlpha { alpha });
    }
    if shifts.is_empty() || shifts.iter().any(|h| *h <= 0.0) {
        return Err(Error::EmptyShifts);
    }
    let mut best = f64::NEG_INFINITY;
    let mut budget = 0.0f64;
    let mut method = Method::Exact;
    for &h in shifts {
        let r = shift_l1(input, h)?;
        let ratio = r.value / h.powf(alpha);
        if ratio > best {
            best = ratio;
        }
        budget = budget.max(r.error_budget / h.powf(alpha));
        method = worse_method(method, r.method);
    }
    Ok(MetricReport {
        value: best,
        error_budget: budget,
        method,
    })
}

fn worse_method(a: Method, b: Method) -> Method {
    use Method::*;
    match (a, b) {
        (Histogram, _) | (_, Histogram) => Histogram,
        (Quadrature, _) | (_, Quadrature) => Quadrature,
        _ => Exact,
    }
}

// ---------------------------------------------------------------------------
// L^p norms

/// `(int rho^p)^(1/p)`; divergent integrals are reported as infinite.
pub fn lp_norm(input: DensityInput<'_>, p: f64) -> Result<MetricReport, Error> {
    if p < 1.0 {
        return Err(Error::BadExponent { p });
    }
    match input {
        DensityInput::Poly(pp) => {
            let mut acc = 0.0;
            let mut budget = 0.0;
            for i in 0..pp.piece_count() {
                let (x0, x1) = pp.piece_bounds(i);
                let c = pp.piece_center(i);
                let coeffs = pp.piece_coeffs(i);
                let f = |x: f64| poly_eval(coeffs, x - c).max(0.0).powf(p);
                let (v, e) = crate::numeric::adaptive_gl(&f, x0, x1, 1e-13, 24);
                acc += v;
                budget += e;
            }
            let value = acc.powf(1.0 / p);
            let vb = if acc > 0.0 {
                value / acc * budget / p
            } else {
                budget
            };
            Ok(MetricReport {
                value,
                error_budget: vb,
                method: Method::Quadrature,
            })
        }
        DensityInput::Evaluator(ev) => lp_norm_evaluator(ev, p),
        DensityInput::Grid(g) => {
            if g.dim() != 1 {
                return Err(Error::BadDirection);
            }
            let w = g.bin_width(0);
            let acc: f64 = g.masses().iter().map(|m| (m / w).powf(p) * w).sum();
            let n = g.samples() as f64;
            let bins = g.masses().len() as f64;
            Ok(MetricReport {
                value: acc.powf(1.0 / p),
                error_budget: grid_step_variation(g) * w + (bins / n).sqrt(),
                method: Method::Histogram,
            })
        }
    }
}

/// Branch substitution: on each monotone branch,
/// `int rho_f(t)^p dt = int rho(x)^p |f'(x)|^(1-p) dx`, with geometric
/// refinement toward branch endpoints where `f'` vanishes.
fn lp_norm_evaluator(ev: &DensityEvaluator, p: f64) -> Result<MetricReport, Error> {
    let map = ev.map_coeffs().to_vec();
    let deriv = crate::numeric::poly_deriv(&map);
    let mut acc = 0.0;
    let mut budget = 0.0;
    for branch in ev.branch_windows() {
        let (x0, x1, rc, rcoeffs) = branch;
        let integrand = |x: f64| {
            let rho = poly_eval(&rcoeffs, x - rc).max(0.0);
            let slope = poly_eval(&deriv, x).abs();
            if slope == 0.0 {
                return 0.0;
            }
            rho.powf(p) * slope.powf(1.0 - p)
        };
        let sing_lo = poly_eval(&deriv, x0).abs() <= 1e-9;
        let sing_hi = poly_eval(&deriv, x1).abs() <= 1e-9;
        let width = x1 - x0;
        let (mut lo, mut hi) = (x0, x1);
        // geometric slabs walking into singular endpoints
        for (is_sing, from_low) in [(sing_lo, true), (sing_hi, false)] {
            if !is_sing {
                continue;
            }
            let mut step = width * 0.25;
            let mut contribs: Vec<f64> = Vec::new();
            for _ in 0..200 {
                let (a, b) = if from_low {
                    (lo + step * 0.5, lo + step)
                } else {
                    (hi - step, hi - step * 0.5)
                };
                let c = gl_integrate(integrand, a.min(b), a.max(b), 12);
                contribs.push(c);
                if acc + contribs.iter().sum::<f64>() > LP_DIVERGENCE {
                    return Ok(MetricReport {
                        value: f64::INFINITY,
                        error_budget: 0.0,
                        method: Method::Quadrature,
                    });
                }
                // halve toward the endpoint
                step *= 0.5;
                let k = contribs.len();
                if k >= 8 {
                    let tail = &contribs[k - 4..];
                    let growing = tail.windows(2).all(|w| w[1] >= w[0] * 0.999);
                    if growing && tail[3] > 1e-8 {
                        return Ok(MetricReport {
                            value: f64::INFINITY,
                            error_budget: 0.0,
                            method: Method::Quadrature,
                        });
                    }
                }
                if contribs.last().copied().unwrap_or(0.0) < 1e-16 * (1.0 + acc) {
                    break;
                }
            }
            // sum of the dyadic slabs; the geometric tail past the last slab
            // is charged to the budget
            let walked: f64 = contribs.iter().sum();
            acc += walked;
            budget += 4.0 * contribs.last().copied().unwrap_or(0.0);
            if from_low {
                lo += width * 0.25;
            } else {
                hi -= width * 0.25;
            }
        }
        if hi > lo {
            let (v, e) = crate::numeric::adaptive_gl(&integrand, lo, hi, 1e-12, 22);
            acc += v;
            budget += e;
        }
    }
    if acc > LP_DIVERGENCE {
        return Ok(MetricReport {
            value: f64::INFINITY,
            error_budget: 0.0,
            method: Method::Quadrature,
        });
    }
    let value = acc.powf(1.0 / p);
    let vb = if acc > 0.0 {
        value / acc * budget / p
    } else {
        budget
    };
    Ok(MetricReport {
        value,
        error_budget: vb,
        method: Method::Quadrature,
    })
}

// ---------------------------------------------------------------------------
// small-ball mass

/// Mass of a finite union of disjoint intervals under the image measure.
pub fn small_ball(input: DensityInput<'_>, sets: &[(f64, f64)]) -> Result<MetricReport, Error> {
    for w in sets.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::BadIntervals);
        }
    }
    if sets.iter().any(|(a, b)| b < a) {
        return Err(Error::BadIntervals);
    }
    match input {
        DensityInput::Poly(p) => Ok(MetricReport::exact(
            sets.iter().map(|&(a, b)| p.integral(a, b)).sum(),
        )),
        DensityInput::Evaluator(ev) => Ok(MetricReport::exact(ev.mass_of_intervals(sets))),
        DensityInput::Grid(g) => {
            if g.dim() != 1 {
                return Err(Error::BadDirection);
            }
            let edges = g.edges(0);
            let masses = g.masses();
            let mut value = 0.0;
            let mut partial = 0.0;
            for &(a, b) in sets {
                for i in 0..masses.len() {
                    let (lo, hi) = (edges[i], edges[i + 1]);
                    let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                    if overlap <= 0.0 {
                        continue;
                    }
                    let frac = overlap / (hi - lo);
                    value += masses[i] * frac;
                    if frac < 1.0 {
                        partial += masses[i] * 0.5;
                    }
                }
            }
            let n = g.samples() as f64;
            let se = (value.max(1e-12) * (1.0 - value).max(0.0) / n).sqrt();
            Ok(MetricReport {
                value,
                error_budget: partial + 3.0 * se,
                method: Method::Histogram,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// distances

/// `int |rho_1 - rho_2|`.
pub fn tv_distance(a: DensityInput<'_>, b: DensityInput<'_>) -> Result<MetricReport, Error> {
    match (a, b) {
        (DensityInput::Poly(p), DensityInput::Poly(q)) => {
            Ok(MetricReport::exact(p.sub(q).abs_integral()))
        }
        (DensityInput::Evaluator(e1), DensityInput::Evaluator(e2)) => {
            let mut knots = e1.t_knots();
            knots.extend(e2.t_knots());
            knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
            knots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + x.abs()));
            let diff = |t: f64| finite_or_large(e1.eval(t)) - finite_or_large(e2.eval(t));
            let mass =
                |u: f64, v: f64| (e1.cdf(v) - e1.cdf(u)) - (e2.cdf(v) - e2.cdf(u));
            let (value, budget) = l1_by_crossings(&knots, &diff, &mass);
            Ok(MetricReport {
                value,
                error_budget: budget,
                method: Method::Quadrature,
            })
        }
        (DensityInput::Grid(g1), DensityInput::Grid(g2)) => {
            if g1.dim() != 1 || g2.dim() != 1 {
                return Err(Error::BadDirection);
            }
            if g1.edges(0) != g2.edges(0) {
                return Err(Error::MismatchedGrids);
            }
            let n1 = g1.samples() as f64;
            let n2 = g2.samples() as f64;
            let mut value = 0.0;
            let mut noise = 0.0;
            for (m1, m2) in g1.masses().iter().zip(g2.masses()) {
                value += (m1 - m2).abs();
                noise += (2.0 / std::f64::consts::PI * (m1 / n1 + m2 / n2)).sqrt();
            }
            let w = g1.bin_width(0);
            let bias = (grid_step_variation(g1) + grid_step_variation(g2)) * w;
            Ok(MetricReport {
                value,
                error_budget: noise + bias,
                method: Method::Histogram,
            })
        }
        _ => Err(Error::UnsupportedPair),
    }
}

/// Kantorovich-Rubinstein norm of `nu1 - nu2` for weights on a shared sorted
/// support grid, solved exactly over grid-restricted test functions (a lower
/// bound for the underlying measures).
pub fn kr_norm(support: &[f64], w1: &[f64], w2: &[f64]) -> Result<MetricReport, Error> {
    let m = support.len();
    if m > KR_GRID_CAP {
        return Err(Error::GridTooLarge {
            m,
            cap: KR_GRID_CAP,
        });
    }
    if w1.len() != m || w2.len() != m || m == 0 {
        return Err(Error::LengthMismatch);
    }
    if support.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedSupport);
    }
    let diff: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a - b).collect();
    Ok(MetricReport::exact(kr::kr_optimum(support, &diff)))
}

/// First Wasserstein distance of two weight vectors on a shared grid
/// (integral of the CDF difference); used as a sanity companion to
/// [`kr_norm`].
pub fn w1_distance(support: &[f64], w1: &[f64], w2: &[f64]) -> Result<f64, Error> {
    let m = support.len();
    if w1.len() != m || w2.len() != m || m == 0 {
        return Err(Error::LengthMismatch);
    }
    let mut cum = 0.0;
    let mut acc = 0.0;
    for i in 0..m - 1 {
        cum += w1[i] - w2[i];
        acc += cum.abs() * (support[i + 1] - support[i]);
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// directional derivative-norm estimate on grids

/// Estimate of the directional derivative norm of a grid density along a
/// unit direction: the summed 1-D variation of bin densities over lines,
/// weighted by the transverse cell measure.
pub fn directional_tv_grid(grid: &GridDensity, e: &[f64]) -> Result<MetricReport, Error> {
    let k = grid.dim();
    if e.len() != k || k == 0 || k > 3 {
        return Err(Error::BadDirection);
    }
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::BadDirection);
    }
    // axis-aligned fast path
    if let Some(axis) = (0..k).find(|&i| (e[i].abs() - 1.0).abs() < 1e-12) {
        return Ok(directional_tv_axis(grid, axis));
    }
    Ok(directional_tv_oblique(grid, e))
}

fn directional_tv_axis(grid: &GridDensity, axis: usize) -> MetricReport {
    let k = grid.dim();
    let bins: Vec<usize> = (0..k).map(|a| grid.bins(a)).collect();
    let widths: Vec<f64> = (0..k).map(|a| grid.bin_width(a)).collect();
    let cell_volume: f64 = widths.iter().product();
    let transverse: f64 = widths
        .iter()
        .enumerate()
        .filter(|(a, _)| *a != axis)
        .map(|(_, w)| *w)
        .product();
    let n = grid.samples() as f64;

    // iterate over lines: all index combos of the other axes
    let mut line_count = 1usize;
    for (a, &b) in bins.iter().enumerate() {
        if a != axis {
            line_count *= b;
        }
    }
    let mut value = 0.0;
    let mut noise = 0.0;
    let masses = grid.masses();
    let flat_index = |coords: &[usize]| -> usize {
        let mut idx = 0;
        for (a, &c) in coords.iter().enumerate() {
            idx = idx * bins[a] + c;
        }
        idx
    };
    for line in 0..line_count {
        // unravel line index into the non-axis coords
        let mut rest = line;
        let mut coords = vec![0usize; k];
        for a in (0..k).rev() {
            if a == axis {
                continue;
            }
            coords[a] = rest % bins[a];
            rest /= bins[a];
        }
        let mut prev = 0.0;
        let mut var = 0.0;
        for c in 0..bins[axis] {
            coords[axis] = c;
            let rho = masses[flat_index(&coords)] / cell_volume;
            var += (rho - prev).abs();
            noise += (2.0 / std::f64::consts::PI
                * (masses[flat_index(&coords)] * 2.0 / n))
                .sqrt()
                / cell_volume
                * transverse;
            prev = rho;
        }
        var += prev; // jump back to zero past the last bin
        value += var * transverse;
    }
    // Bin averaging contracts variation; structure finer than a bin is
    // invisible, so the resolution term scales with the measured variation
    // times the bin width.
    let bias = value * widths[axis];
    MetricReport {
        value,
        error_budget: noise + bias,
        method: Method::Histogram,
    }
}

fn directional_tv_oblique(grid: &GridDensity, e: &[f64]) -> MetricReport {
    let k = grid.dim();
    let widths: Vec<f64> = (0..k).map(|a| grid.bin_width(a)).collect();
    let step = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    // bounding box corners
    let lo: Vec<f64> = (0..k).map(|a| grid.edges(a)[0]).collect();
    let hi: Vec<f64> = (0..k).map(|a| *grid.edges(a).last().unwrap()).collect();
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let radius: f64 = lo
        .iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
        * 0.5;
    // orthonormal transverse frame
    let mut frame: Vec<Vec<f64>> = Vec::new();
    for axis in 0..k {
        let mut v = vec![0.0; k];
        v[axis] = 1.0;
        let d: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
        for (vi, ei) in v.iter_mut().zip(e) {
            *vi -= d * ei;
        }
        for f in &frame {
            let d: f64 = v.iter().zip(f).map(|(a, b)| a * b).sum();
            for (vi, fi) in v.iter_mut().zip(f) {
                *vi -= d * fi;
            }
        }
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            for vi in v.iter_mut() {
                *vi /= n;
            }
            frame.push(v);
            if frame.len() == k - 1 {
                break;
            }
        }
    }
    let offsets = (2.0 * radius / step).ceil() as i64;
    let mut value = 0.0;
    let mut lines = vec![vec![0i64; frame.len()]];
    // enumerate transverse offsets on a (k-1)-dim grid
    for f in 0..frame.len() {
        let mut next = Vec::new();
        for base in lines {
            for o in -offsets..=offsets {
                let mut b = base.clone();
                b[f] = o;
                next.push(b);
            }
        }
        lines = next;
    }
    let samples_per_line = (2.0 * radius / step).ceil() as i64 * 2;
    for line in &lines {
        let mut origin = center.clone();
        for (f, &o) in frame.iter().zip(line.iter()) {
            for (oi, fi) in origin.iter_mut().zip(f) {
                *oi += o as f64 * step * fi;
            }
        }
        let mut prev = 0.0;
        let mut var = 0.0;
        let mut any = false;
        for s in -samples_per_line..=samples_per_line {
            let point: Vec<f64> = origin
                .iter()
                .zip(e)
                .map(|(o, ei)| o + s as f64 * step * ei)
                .collect();
            let rho = interpolate(grid, &point);
            if rho != 0.0 {
                any = true;
            }
            var += (rho - prev).abs();
            prev = rho;
        }
        var += prev;
        if any {
            value += var * step.powi(k as i32 - 1);
        }
    }
    MetricReport {
        value,
        error_budget: 0.2 * value + (grid.masses().len() as f64 / grid.samples() as f64).sqrt(),
        method: Method::Histogram,
    }
}

/// Multilinear interpolation of the bin density at a point.
fn interpolate(grid: &GridDensity, point: &[f64]) -> f64 {
    let k = grid.dim();
    let mut volume = 1.0;
    for a in 0..k {
        volume *= grid.bin_width(a);
    }
    // nearest-cell lookup (piecewise-constant interpolation)
    let mut idx = 0usize;
    for a in 0..k {
        let edges = grid.edges(a);
        let (lo, hi) = (edges[0], *edges.last().unwrap());
        if point[a] < lo || point[a] >= hi {
            return 0.0;
        }
        let b = ((point[a] - lo) / grid.bin_width(a)) as usize;
        idx = idx * grid.bins(a) + b.min(grid.bins(a) - 1);
    }
    grid.masses()[idx] / volume
}
