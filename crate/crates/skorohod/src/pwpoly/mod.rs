//! Exact piecewise-polynomial functions on the line.
//!
//! A [`PiecewisePoly`] is a finite list of strictly increasing breakpoints
//! and one polynomial per gap, stored in ascending powers of the local
//! variable `u = x - midpoint(piece)`; the function is zero outside the
//! first and last breakpoint. Jump discontinuities at breakpoints are
//! allowed and carried exactly through evaluation, integration, variation
//! and convolution.

mod roots;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numeric::{
    cheb_interpolate, gauss_legendre, poly_antideriv, poly_deriv, poly_eval, poly_shift, poly_trim,
};
use crate::tol::{BREAKPOINT_MERGE, DEGREE_CAP, ROOT_TOL};

pub use roots::roots_in_interval;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("need at least two breakpoints")]
    TooFewBreakpoints,
    #[error("breakpoints must be strictly increasing")]
    NonIncreasingBreakpoints,
    #[error("expected {expected} pieces for {breakpoints} breakpoints, got {got}")]
    PieceCount {
        expected: usize,
        breakpoints: usize,
        got: usize,
    },
    #[error("piece degree {degree} exceeds the cap of {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("non-finite breakpoint or coefficient")]
    NonFinite,
    #[error("scale factor must be nonzero")]
    ZeroScale,
}

/// Root of `p(x) = t`: an isolated crossing or a whole flat stretch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootLocus {
    Point(f64),
    Interval(f64, f64),
}

impl RootLocus {
    pub fn position(&self) -> f64 {
        match self {
            RootLocus::Point(x) => *x,
            RootLocus::Interval(a, _) => *a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    /// Build a piecewise polynomial; `pieces[i]` holds coefficients in
    /// ascending powers of `x - (breakpoints[i] + breakpoints[i+1]) / 2`.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, Error> {
        if breakpoints.len() < 2 {
            return Err(Error::TooFewBreakpoints);
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::PieceCount {
                expected: breakpoints.len() - 1,
                breakpoints: breakpoints.len(),
                got: pieces.len(),
            });
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || pieces.iter().flatten().any(|c| !c.is_finite())
        {
            return Err(Error::NonFinite);
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonIncreasingBreakpoints);
        }
        for p in &pieces {
            if p.len() > DEGREE_CAP + 1 {
                return Err(Error::DegreeCap {
                    degree: p.len() - 1,
                    cap: DEGREE_CAP,
                });
            }
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    /// The zero function represented on [a, b].
    pub fn zero_on(a: f64, b: f64) -> Self {
        Self {
            breakpoints: vec![a, b],
            pieces: vec![Vec::new()],
        }
    }

    /// Density of the uniform distribution on [a, b].
    pub fn uniform_density(a: f64, b: f64) -> Self {
        assert!(b > a, "uniform_density needs a < b");
        Self {
            breakpoints: vec![a, b],
            pieces: vec![vec![1.0 / (b - a)]],
        }
    }

    /// Continuous piecewise-linear interpolant of `(x, y)` points.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self, Error> {
        if points.len() < 2 {
            return Err(Error::TooFewBreakpoints);
        }
        let breakpoints: Vec<f64> = points.iter().map(|p| p.0).collect();
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonIncreasingBreakpoints);
        }
        let pieces = points
            .windows(2)
            .map(|w| {
                let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let vmid = 0.5 * (w[0].1 + w[1].1);
                vec![vmid, slope]
            })
            .collect();
        Self::new(breakpoints, pieces)
    }

    /// Step function with `values[i]` on `[edges[i], edges[i+1])`.
    pub fn step(edges: Vec<f64>, values: Vec<f64>) -> Result<Self, Error> {
        let pieces = values.into_iter().map(|v| vec![v]).collect();
        Self::new(edges, pieces)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    pub fn max_degree(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece_bounds(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn piece_center(&self, i: usize) -> f64 {
        self.mid(i)
    }

    pub fn piece_coeffs(&self, i: usize) -> &[f64] {
        &self.pieces[i]
    }

    /// Piece index, centre and coefficients at `x`, when inside the support.
    pub fn piece_at(&self, x: f64) -> Option<(usize, f64, &[f64])> {
        self.locate(x).map(|i| (i, self.mid(i), self.pieces[i].as_slice()))
    }

    fn mid(&self, i: usize) -> f64 {
        0.5 * (self.breakpoints[i] + self.breakpoints[i + 1])
    }

    fn eval_piece(&self, i: usize, x: f64) -> f64 {
        poly_eval(&self.pieces[i], x - self.mid(i))
    }

    fn locate(&self, x: f64) -> Option<usize> {
        let n = self.breakpoints.len();
        if x < self.breakpoints[0] || x > self.breakpoints[n - 1] {
            return None;
        }
        if x == self.breakpoints[n - 1] {
            return Some(n - 2);
        }
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        Some(idx - 1)
    }

    /// Pointwise value; at an interior breakpoint this is the right limit,
    /// at the final breakpoint the left limit, and zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some(i) => self.eval_piece(i, x),
            None => 0.0,
        }
    }

    /// One-sided limit from inside piece `i` at its left endpoint.
    pub fn limit_right_of(&self, k: usize) -> f64 {
        // value of piece k as x -> breakpoints[k]+
        self.eval_piece(k, self.breakpoints[k])
    }

    /// One-sided limit from inside piece `k-1` at breakpoint `k`.
    pub fn limit_left_of(&self, k: usize) -> f64 {
        self.eval_piece(k - 1, self.breakpoints[k])
    }

    /// Exact integral over [a, b] (zero outside the support).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return if b == a { 0.0 } else { -self.integral(b, a) };
        }
        let (lo, hi) = self.support();
        let a = a.max(lo);
        let b = b.min(hi);
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        let first = self.locate(a).unwrap_or(0);
        for i in first..self.pieces.len() {
            let x0 = self.breakpoints[i].max(a);
            let x1 = self.breakpoints[i + 1].min(b);
            if x1 <= x0 {
                if self.breakpoints[i] > b {
                    break;
                }
                continue;
            }
            let anti = poly_antideriv(&self.pieces[i]);
            let m = self.mid(i);
            acc += poly_eval(&anti, x1 - m) - poly_eval(&anti, x0 - m);
        }
        acc
    }

    /// Integral over the whole line.
    pub fn total_integral(&self) -> f64 {
        let (lo, hi) = self.support();
        self.integral(lo, hi)
    }

    /// Pointwise total variation over the whole line, counting jump
    /// discontinuities (including the jumps to zero at the support edges)
    /// exactly once.
    pub fn variation(&self) -> f64 {
        let mut var = 0.0;
        for i in 0..self.pieces.len() {
            let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let m = self.mid(i);
            let d = poly_deriv(&self.pieces[i]);
            let mut cuts = roots::roots_in_interval(&d, x0 - m, x1 - m);
            cuts.insert(0, x0 - m);
            cuts.push(x1 - m);
            for w in cuts.windows(2) {
                var += (poly_eval(&self.pieces[i], w[1]) - poly_eval(&self.pieces[i], w[0])).abs();
            }
        }
        for k in 1..self.pieces.len() {
            var += (self.limit_right_of(k) - self.limit_left_of(k)).abs();
        }
        var += self.limit_right_of(0).abs();
        var += self.limit_left_of(self.pieces.len()).abs();
        var
    }

    /// Piecewise derivative on the same grid (the absolutely continuous part
    /// only; jumps at breakpoints are not represented).
    pub fn derivative_pieces(&self) -> Self {
        let pieces = self.pieces.iter().map(|p| poly_deriv(p)).collect();
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces,
        }
    }

    /// Total jump mass: interior jumps plus the jumps to zero at the support
    /// edges.
    pub fn jump_variation(&self) -> f64 {
        let mut acc = self.limit_right_of(0).abs() + self.limit_left_of(self.pieces.len()).abs();
        for k in 1..self.pieces.len() {
            acc += (self.limit_right_of(k) - self.limit_left_of(k)).abs();
        }
        acc
    }

    /// Supremum over the support closure together with its location; one
    /// sided limits at breakpoints participate.
    pub fn extrema(&self) -> (f64, f64) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = self.breakpoints[0];
        let mut consider = |v: f64, x: f64| {
            if v > best {
                best = v;
                arg = x;
            }
        };
        for i in 0..self.pieces.len() {
            let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let m = self.mid(i);
            consider(self.eval_piece(i, x0), x0);
            consider(self.eval_piece(i, x1), x1);
            let d = poly_deriv(&self.pieces[i]);
            for r in roots::roots_in_interval(&d, x0 - m, x1 - m) {
                consider(poly_eval(&self.pieces[i], r), m + r);
            }
        }
        (best, arg)
    }

    /// Infimum over the support closure.
    pub fn min_value(&self) -> f64 {
        let neg = self.clone().scale(-1.0);
        -neg.extrema().0
    }

    /// Sorted solutions of `p(x) = t` inside the support. A piece identically
    /// equal to `t` is reported as an interval root.
    pub fn real_roots(&self, t: f64) -> Vec<RootLocus> {
        let mut points: Vec<f64> = Vec::new();
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for i in 0..self.pieces.len() {
            let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let m = self.mid(i);
            let mut shifted = self.pieces[i].clone();
            if shifted.is_empty() {
                shifted.push(0.0);
            }
            shifted[0] -= t;
            if roots::is_constant_eq(&self.pieces[i], t, x1 - x0) {
                intervals.push((x0, x1));
                continue;
            }
            for r in roots::roots_in_interval(&shifted, x0 - m, x1 - m) {
                points.push(m + r);
            }
        }
        let tol = ROOT_TOL * (1.0 + self.breakpoints.last().unwrap().abs());
        // merge touching flat stretches
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.0 - last.1 <= tol => last.1 = iv.1,
                _ => merged.push(iv),
            }
        }
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup_by(|a, b| (*a - *b).abs() <= tol);
        points.retain(|p| {
            !merged
                .iter()
                .any(|iv| *p >= iv.0 - tol && *p <= iv.1 + tol)
        });
        let mut out: Vec<RootLocus> = merged
            .into_iter()
            .map(|(a, b)| RootLocus::Interval(a, b))
            .chain(points.into_iter().map(RootLocus::Point))
            .collect();
        out.sort_by(|a, b| a.position().partial_cmp(&b.position()).unwrap());
        out
    }

    /// Multiply by a constant.
    pub fn scale(mut self, c: f64) -> Self {
        for p in self.pieces.iter_mut() {
            for v in p.iter_mut() {
                *v *= c;
            }
        }
        self
    }

    /// Exact density of `s X + c` when `self` is the density of `X`.
    pub fn affine_pushforward(&self, s: f64, c: f64) -> Result<Self, Error> {
        if s == 0.0 {
            return Err(Error::ZeroScale);
        }
        let m = self.pieces.len();
        let mut breakpoints: Vec<f64> = self.breakpoints.iter().map(|&b| s * b + c).collect();
        let mut pieces: Vec<Vec<f64>> = Vec::with_capacity(m);
        let order: Vec<usize> = if s > 0.0 {
            (0..m).collect()
        } else {
            breakpoints.reverse();
            (0..m).rev().collect()
        };
        let inv_abs = 1.0 / s.abs();
        for i in order {
            let mut coeffs = self.pieces[i].clone();
            let mut pw = inv_abs;
            for v in coeffs.iter_mut() {
                *v *= pw;
                pw /= s;
            }
            pieces.push(coeffs);
        }
        Self::new(breakpoints, pieces)
    }

    /// Density translated by `h` (the density of `X + h`).
    pub fn translate(&self, h: f64) -> Self {
        self.affine_pushforward(1.0, h).expect("unit scale")
    }

    /// Pointwise sum on the union grid.
    pub fn add(&self, other: &Self) -> Self {
        let mut grid: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = 1.0 + grid.last().unwrap().abs().max(grid[0].abs());
        grid.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_MERGE * scale);
        let mut pieces = Vec::with_capacity(grid.len() - 1);
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let probe = mid;
            let mut coeffs: Vec<f64> = Vec::new();
            for poly in [self, other] {
                if let Some(i) = poly.locate(probe) {
                    let shifted = poly_shift(&poly.pieces[i], mid - poly.mid(i));
                    if coeffs.len() < shifted.len() {
                        coeffs.resize(shifted.len(), 0.0);
                    }
                    for (dst, src) in coeffs.iter_mut().zip(shifted.iter()) {
                        *dst += *src;
                    }
                }
            }
            pieces.push(coeffs);
        }
        Self::new(grid, pieces).expect("union grid is valid").cleaned()
    }

    /// Pointwise difference.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.clone().scale(-1.0))
    }

    /// Exact integral of |p| over the line.
    pub fn abs_integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.pieces.len() {
            let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let m = self.mid(i);
            let mut cuts = roots::roots_in_interval(&self.pieces[i], x0 - m, x1 - m);
            cuts.insert(0, x0 - m);
            cuts.push(x1 - m);
            let anti = poly_antideriv(&self.pieces[i]);
            for w in cuts.windows(2) {
                if w[1] <= w[0] {
                    continue;
                }
                acc += (poly_eval(&anti, w[1]) - poly_eval(&anti, w[0])).abs();
            }
        }
        acc
    }

    /// L1 distance to another piecewise polynomial.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.sub(other).abs_integral()
    }

    /// Exact convolution. The output degree is `deg(p) + deg(q) + 1` per
    /// piece and may not exceed the degree cap.
    pub fn convolve(&self, other: &Self) -> Result<Self, Error> {
        let deg_out = self.max_degree() + other.max_degree() + 1;
        if deg_out > DEGREE_CAP {
            return Err(Error::DegreeCap {
                degree: deg_out,
                cap: DEGREE_CAP,
            });
        }
        let (plo, phi) = self.support();
        let (qlo, qhi) = other.support();
        let mut sums: Vec<f64> = Vec::with_capacity(self.breakpoints.len() * other.breakpoints.len());
        for &a in &self.breakpoints {
            for &b in &other.breakpoints {
                sums.push(a + b);
            }
        }
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = 1.0 + sums.last().unwrap().abs().max(sums[0].abs());
        sums.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_MERGE * scale);
        if sums.len() < 2 {
            return Ok(Self::zero_on(plo + qlo, phi + qhi));
        }

        let quad_n = (self.max_degree() + other.max_degree()) / 2 + 1;
        let (nodes, weights) = gauss_legendre(quad_n);
        let value_at = |t: f64| -> f64 {
            let xlo = plo.max(t - qhi);
            let xhi = phi.min(t - qlo);
            if xhi <= xlo {
                return 0.0;
            }
            let mut cuts: Vec<f64> = Vec::new();
            cuts.push(xlo);
            cuts.push(xhi);
            for &b in &self.breakpoints {
                if b > xlo && b < xhi {
                    cuts.push(b);
                }
            }
            for &b in &other.breakpoints {
                let x = t - b;
                if x > xlo && x < xhi {
                    cuts.push(x);
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut acc = 0.0;
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                let mut cell = 0.0;
                for (u, wt) in nodes.iter().zip(weights.iter()) {
                    let x = mid + half * u;
                    cell += wt * self.eval(x) * other.eval(t - x);
                }
                acc += cell * half;
            }
            acc
        };

        let npts = deg_out + 1;
        let mut pieces = Vec::with_capacity(sums.len() - 1);
        for w in sums.windows(2) {
            let mut coeffs = cheb_interpolate(value_at, w[0], w[1], npts);
            poly_trim(&mut coeffs, 1e-13);
            pieces.push(coeffs);
        }
        Ok(Self::new(sums, pieces)?.cleaned())
    }

    /// Drop exactly-zero leading and trailing cells (keeping at least one).
    pub(crate) fn cleaned(mut self) -> Self {
        let global = self
            .pieces
            .iter()
            .flatten()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        if global == 0.0 {
            let (lo, hi) = self.support();
            return Self::zero_on(lo, hi);
        }
        let is_zero = |p: &Vec<f64>| p.iter().all(|c| c.abs() <= 1e-13 * global);
        while self.pieces.len() > 1 && is_zero(&self.pieces[0]) {
            self.pieces.remove(0);
            self.breakpoints.remove(0);
        }
        while self.pieces.len() > 1 && is_zero(self.pieces.last().unwrap()) {
            self.pieces.pop();
            self.breakpoints.pop();
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl Serialize for PiecewisePoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            breakpoints: &'a [f64],
            pieces: &'a [Vec<f64>],
        }
        Raw {
            breakpoints: &self.breakpoints,
            pieces: &self.pieces,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PiecewisePoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            breakpoints: Vec<f64>,
            pieces: Vec<Vec<f64>>,
        }
        let raw = Raw::deserialize(deserializer)?;
        PiecewisePoly::new(raw.breakpoints, raw.pieces).map_err(D::Error::custom)
    }
}

/// Density of the triangle distribution on [a, b] (peak at the midpoint).
pub fn triangle_density(a: f64, b: f64) -> PiecewisePoly {
    assert!(b > a);
    let mid = 0.5 * (a + b);
    let peak = 2.0 / (b - a);
    PiecewisePoly::from_points(&[(a, 0.0), (mid, peak), (b, 0.0)]).expect("valid triangle")
}

/// Density of the symmetric trapezoid with support [a, d] and plateau [b, c],
/// normalized to unit mass.
pub fn trapezoid_density(a: f64, b: f64, c: f64, d: f64) -> PiecewisePoly {
    assert!(a < b && b <= c && c < d);
    let h = 2.0 / ((d - a) + (c - b));
    PiecewisePoly::from_points(&[(a, 0.0), (b, h), (c, h), (d, 0.0)]).expect("valid trapezoid")
}
