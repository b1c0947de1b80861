//! Exact pushforward of a 1-D BV density under a univariate polynomial.
//!
//! The support is split at the polynomial's critical points and at the
//! density's breakpoints; on each resulting branch the map is strictly
//! monotone and the density is a single polynomial, so both the pointwise
//! density `rho_f(t) = sum rho(x) / |f'(x)|` and the CDF come from bracketed
//! inversion plus exact piece integrals.

use super::{BVDensity, Error};
use crate::numeric::{newton_bisect, poly_antideriv, poly_deriv, poly_eval};
use crate::pwpoly::roots_in_interval;
use crate::tol::ROOT_TOL;

/// A pointwise density value; `Singular` marks the integrable blow-up at a
/// critical value of the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointValue {
    Finite(f64),
    Singular,
}

impl PointValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PointValue::Finite(v) => Some(v),
            PointValue::Singular => None,
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, PointValue::Singular)
    }
}

#[derive(Debug, Clone)]
struct Branch {
    x_lo: f64,
    x_hi: f64,
    t_min: f64,
    t_max: f64,
    increasing: bool,
    rho_center: f64,
    rho_coeffs: Vec<f64>,
    rho_anti: Vec<f64>,
    mass: f64,
}

/// Pointwise-evaluable density of the image measure, with an exact CDF.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    branches: Vec<Branch>,
    singular: Vec<f64>,
    t_lo: f64,
    t_hi: f64,
    map: Vec<f64>,
    map_deriv: Vec<f64>,
}

/// Build the evaluator for the image of `density` under the polynomial with
/// the given ascending coefficients.
pub fn pushforward_poly_1d(
    density: &BVDensity,
    poly_coeffs: &[f64],
) -> Result<DensityEvaluator, Error> {
    let mut map = poly_coeffs.to_vec();
    while map.last().is_some_and(|c| *c == 0.0) {
        map.pop();
    }
    if map.len() < 2 {
        return Err(Error::ConstantPolynomial);
    }
    let map_deriv = poly_deriv(&map);
    let rho = density.density();
    let (lo, hi) = rho.support();

    let mut cuts: Vec<f64> = rho.breakpoints().to_vec();
    cuts.extend(roots_in_interval(&map_deriv, lo, hi));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + a.abs()));

    let mut branches = Vec::new();
    let mut singular = Vec::new();
    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for w in cuts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let mid = 0.5 * (x0 + x1);
        let (_, center, coeffs) = match rho.piece_at(mid) {
            Some(p) => p,
            None => continue,
        };
        let f0 = poly_eval(&map, x0);
        let f1 = poly_eval(&map, x1);
        if f0 == f1 {
            continue; // constant stretch cannot occur for degree >= 1 pieces
        }
        let rho_anti = poly_antideriv(coeffs);
        let mass = poly_eval(&rho_anti, x1 - center) - poly_eval(&rho_anti, x0 - center);
        let (t_min, t_max) = if f0 < f1 { (f0, f1) } else { (f1, f0) };
        t_lo = t_lo.min(t_min);
        t_hi = t_hi.max(t_max);
        branches.push(Branch {
            x_lo: x0,
            x_hi: x1,
            t_min,
            t_max,
            increasing: f1 > f0,
            rho_center: center,
            rho_coeffs: coeffs.to_vec(),
            rho_anti,
            mass,
        });
    }

    // Critical values with locally positive density blow the density up.
    for &x in cuts.iter() {
        if poly_eval(&map_deriv, x).abs() <= 1e-12 {
            let inside = x > lo - 1e-14 && x < hi + 1e-14;
            if !inside {
                continue;
            }
            let near = rho.eval((x - 1e-9).max(lo)).max(rho.eval((x + 1e-9).min(hi)));
            if near > 1e-12 {
                singular.push(poly_eval(&map, x));
            }
        }
    }
    singular.sort_by(|a, b| a.partial_cmp(b).unwrap());
    singular.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));

    Ok(DensityEvaluator {
        branches,
        singular,
        t_lo,
        t_hi,
        map,
        map_deriv,
    })
}

impl DensityEvaluator {
    /// Range of the image variable.
    pub fn t_range(&self) -> (f64, f64) {
        (self.t_lo, self.t_hi)
    }

    /// Values where the density has an integrable singularity.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    /// The map's ascending coefficients.
    pub fn map_coeffs(&self) -> &[f64] {
        &self.map
    }

    fn invert_on(&self, branch: &Branch, t: f64) -> f64 {
        let f = |x: f64| poly_eval(&self.map, x) - t;
        let df = |x: f64| poly_eval(&self.map_deriv, x);
        let (a, b) = (branch.x_lo, branch.x_hi);
        let fa = f(a);
        let fb = f(b);
        if fa == 0.0 || fa.signum() == fb.signum() {
            // clamp to the closer end when t grazes the branch boundary
            return if fa.abs() <= fb.abs() { a } else { b };
        }
        newton_bisect(f, df, a, b, ROOT_TOL)
    }

    /// Density of the image at `t`; `Singular` exactly at flagged critical
    /// values.
    pub fn eval(&self, t: f64) -> PointValue {
        let stol = 1e-12 * (1.0 + t.abs());
        if self.singular.iter().any(|s| (s - t).abs() <= stol) {
            return PointValue::Singular;
        }
        let mut acc = 0.0;
        for branch in &self.branches {
            // Half-open ownership in x-space ([x_lo, x_hi) per branch) so a
            // preimage shared by two branches is counted once.
            let owned = if branch.increasing {
                t >= branch.t_min && t < branch.t_max
            } else {
                t > branch.t_min && t <= branch.t_max
            };
            if !owned {
                continue;
            }
            let x = self.invert_on(branch, t);
            let slope = poly_eval(&self.map_deriv, x).abs();
            if slope <= 1e-12 {
                return PointValue::Singular;
            }
            acc += poly_eval(&branch.rho_coeffs, x - branch.rho_center) / slope;
        }
        PointValue::Finite(acc)
    }

    /// Density value as an `f64`, with singular points mapped to infinity.
    pub fn eval_or_inf(&self, t: f64) -> f64 {
        match self.eval(t) {
            PointValue::Finite(v) => v,
            PointValue::Singular => f64::INFINITY,
        }
    }

    /// Exact CDF of the image measure.
    pub fn cdf(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for branch in &self.branches {
            if t >= branch.t_max {
                acc += branch.mass;
                continue;
            }
            if t <= branch.t_min {
                continue;
            }
            let x = self.invert_on(branch, t);
            let lo_val = poly_eval(&branch.rho_anti, branch.x_lo - branch.rho_center);
            let hi_val = poly_eval(&branch.rho_anti, branch.x_hi - branch.rho_center);
            let xt_val = poly_eval(&branch.rho_anti, x - branch.rho_center);
            if branch.increasing {
                acc += xt_val - lo_val;
            } else {
                acc += hi_val - xt_val;
            }
        }
        acc
    }

    /// Exact mass of a union of disjoint intervals.
    pub fn mass_of_intervals(&self, intervals: &[(f64, f64)]) -> f64 {
        intervals
            .iter()
            .map(|&(a, b)| (self.cdf(b) - self.cdf(a)).max(0.0))
            .sum()
    }

    /// Total mass reachable through the branches (should be 1 for a full
    /// density).
    pub fn total_mass(&self) -> f64 {
        self.branches.iter().map(|b| b.mass).sum()
    }

    /// Branch windows `(x_lo, x_hi, rho_center, rho_coeffs)` for callers
    /// integrating in the source variable.
    pub fn branch_windows(&self) -> Vec<(f64, f64, f64, Vec<f64>)> {
        self.branches
            .iter()
            .map(|b| (b.x_lo, b.x_hi, b.rho_center, b.rho_coeffs.clone()))
            .collect()
    }

    /// Interesting abscissas for quadrature: branch images and singular
    /// values, sorted and deduplicated.
    pub fn t_knots(&self) -> Vec<f64> {
        let mut ts = vec![self.t_lo, self.t_hi];
        for b in &self.branches {
            ts.push(b.t_min);
            ts.push(b.t_max);
        }
        ts.extend_from_slice(&self.singular);
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs()));
        ts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures1d::ks_statistic;

    #[test]
    fn identity_map_reproduces_density() {
        let d = BVDensity::uniform(0.0, 1.0);
        let ev = pushforward_poly_1d(&d, &[0.0, 1.0]).unwrap();
        assert_eq!(ev.eval(0.5), PointValue::Finite(1.0));
        assert!((ev.cdf(0.25) - 0.25).abs() < 1e-13);
        assert!((ev.total_mass() - 1.0).abs() < 1e-13);
        assert!(ev.singular_values().is_empty());
    }

    #[test]
    fn square_map_on_uniform() {
        // t = x^2 on U[0,1]: rho_f(t) = 1 / (2 sqrt(t)), CDF sqrt(t)
        let d = BVDensity::uniform(0.0, 1.0);
        let ev = pushforward_poly_1d(&d, &[0.0, 0.0, 1.0]).unwrap();
        match ev.eval(0.25) {
            PointValue::Finite(v) => assert!((v - 1.0).abs() < 1e-12),
            PointValue::Singular => panic!("unexpected singularity"),
        }
        assert!((ev.cdf(0.01) - 0.1).abs() < 1e-12);
        assert!(ev.eval(0.0).is_singular());
        assert_eq!(ev.singular_values(), &[0.0]);
        assert!((ev.total_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_with_interior_critical_points() {
        // f(x) = x^3 - x on the triangle over [-1, 1]
        let d = BVDensity::triangle(-1.0, 1.0);
        let ev = pushforward_poly_1d(&d, &[0.0, -1.0, 0.0, 1.0]).unwrap();
        // t = 0 is a regular value hit by x in {-1, 0, 1}: rho_f(0) = rho(0) = 1
        match ev.eval(0.0) {
            PointValue::Finite(v) => assert!((v - 1.0).abs() < 1e-10, "{v}"),
            PointValue::Singular => panic!("0 is a regular value here"),
        }
        // two singular values at the critical images of +-1/sqrt(3)
        assert_eq!(ev.singular_values().len(), 2);
        assert!((ev.total_mass() - 1.0).abs() < 1e-13);
        // MC cross-check of the CDF
        let mut draws: Vec<f64> = d
            .sample(200_000, 5)
            .into_iter()
            .map(|x| x * x * x - x)
            .collect();
        let ks = ks_statistic(&mut draws, |t| ev.cdf(t));
        assert!(ks < 0.005, "ks {ks}");
    }

    #[test]
    fn constant_polynomial_rejected() {
        let d = BVDensity::uniform(0.0, 1.0);
        assert!(pushforward_poly_1d(&d, &[3.0]).is_err());
        assert!(pushforward_poly_1d(&d, &[3.0, 0.0]).is_err());
    }
}
