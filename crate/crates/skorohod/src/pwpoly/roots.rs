//! Real roots of dense polynomials on an interval.
//!
//! Closed forms through degree three; above that, roots of the derivative
//! (found recursively) bracket the monotone stretches and each bracket is
//! refined by safeguarded Newton.

use crate::numeric::{newton_bisect, poly_deriv, poly_eval};
use crate::tol::ROOT_TOL;

/// All real roots of `p(u) = 0` (coefficients in the local variable `u`)
/// inside [lo, hi], sorted ascending.
pub fn roots_in_interval(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Vec::new(); // identically zero: the caller reports an interval root
    }
    while let Some(&last) = c.last() {
        if last.abs() <= 1e-14 * scale {
            c.pop();
        } else {
            break;
        }
    }
    let mut roots = match c.len() {
        0 | 1 => Vec::new(),
        2 => vec![-c[0] / c[1]],
        3 => quadratic_roots(c[2], c[1], c[0]),
        4 => cubic_roots(c[3], c[2], c[1], c[0]),
        _ => high_degree_roots(&c, lo, hi),
    };
    let span_tol = ROOT_TOL * (1.0 + lo.abs().max(hi.abs()));
    roots.retain(|r| r.is_finite() && *r >= lo - span_tol && *r <= hi + span_tol);
    for r in roots.iter_mut() {
        *r = r.clamp(lo, hi);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= span_tol);
    roots
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { Vec::new() } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    if b == 0.0 {
        let r = (sq / (2.0 * a)).abs();
        return vec![-r, r];
    }
    // Stable split avoiding cancellation.
    let q = -0.5 * (b + b.signum() * sq);
    let mut out = vec![q / a];
    if q != 0.0 {
        out.push(c / q);
    } else {
        out.push(0.0);
    }
    out
}

fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    if a == 0.0 {
        return quadratic_roots(b, c, d);
    }
    // Depress: x = t - b/(3a), t^3 + p t + q = 0.
    let b1 = b / a;
    let c1 = c / a;
    let d1 = d / a;
    let shift = b1 / 3.0;
    let p = c1 - b1 * b1 / 3.0;
    let q = 2.0 * b1 * b1 * b1 / 27.0 - b1 * c1 / 3.0 + d1;
    let mut ts = Vec::new();
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc > 0.0 {
        // Three real roots: trigonometric form (p < 0 here).
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            ts.push(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
        }
    } else {
        // One real root: Cardano.
        let half_q = -q / 2.0;
        let inner = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        let u = (half_q + inner).cbrt();
        let v = if u != 0.0 { -p / (3.0 * u) } else { (half_q - inner).cbrt() };
        ts.push(u + v);
    }
    let coeffs = [d, c, b, a];
    let dcoeffs = [c, 2.0 * b, 3.0 * a];
    ts.into_iter()
        .map(|t| {
            let mut x = t - shift;
            // A couple of Newton polish steps on the original cubic.
            for _ in 0..3 {
                let f = poly_eval(&coeffs, x);
                let df = poly_eval(&dcoeffs, x);
                if df != 0.0 {
                    let nx = x - f / df;
                    if nx.is_finite() {
                        x = nx;
                    }
                }
            }
            x
        })
        .collect()
}

fn high_degree_roots(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let deriv = poly_deriv(coeffs);
    let mut cuts = roots_in_interval(&deriv, lo, hi);
    cuts.insert(0, lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + a.abs()));

    let f = |x: f64| poly_eval(coeffs, x);
    let df = |x: f64| poly_eval(&deriv, x);
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let val_tol = 1e-13 * scale * (1.0 + hi.abs().max(lo.abs())).powi(coeffs.len() as i32 - 1);

    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa.abs() <= val_tol {
            out.push(a);
        }
        if fa * fb < 0.0 && fa.abs() > val_tol && fb.abs() > val_tol {
            out.push(newton_bisect(f, df, a, b, ROOT_TOL));
        }
    }
    let (last, flast) = (*cuts.last().unwrap(), f(*cuts.last().unwrap()));
    if flast.abs() <= val_tol {
        out.push(last);
    }
    out
}

/// True when the polynomial is constantly equal to `t` within tolerance.
pub fn is_constant_eq(coeffs: &[f64], t: f64, span: f64) -> bool {
    let tol = 1e-12 * (1.0 + t.abs());
    let c0 = coeffs.first().copied().unwrap_or(0.0);
    if (c0 - t).abs() > tol {
        return false;
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .all(|(k, &c)| c.abs() * span.powi(k as i32) <= tol)
}
