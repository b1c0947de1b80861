//! One-dimensional probability measures with densities of bounded variation:
//! derivative norms, decomposition into convex mixtures of uniform
//! distributions, deterministic sampling, and exact pushforwards under a
//! univariate polynomial.

mod decompose;
mod pushforward1d;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::numeric::{poly_antideriv, poly_eval};
use crate::pwpoly::{self, PiecewisePoly};
use crate::tol::{COMPONENT_CAP, DENSITY_NEG_TOL, MASS_TOL, ROOT_TOL, WEIGHT_SUM_TOL};

pub use decompose::{decompose, decompose_mixture, DecomposeOptions, Decomposition};
pub use pushforward1d::{pushforward_poly_1d, DensityEvaluator, PointValue};

#[derive(Debug, Error)]
pub enum Error {
    #[error("density dips to {min} below the tolerated floor")]
    NegativeDensity { min: f64 },
    #[error("density integrates to {integral}, not 1")]
    MassNotOne { integral: f64 },
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("component weight {weight} outside (0, 1]")]
    BadWeight { weight: f64 },
    #[error("component interval [{a}, {b}] is empty or reversed")]
    BadInterval { a: f64, b: f64 },
    #[error("weights sum to {sum}, not 1")]
    WeightSum { sum: f64 },
    #[error("{count} components exceed the cap of {cap}")]
    ComponentCap { count: usize, cap: usize },
    #[error("pushforward polynomial must have degree >= 1")]
    ConstantPolynomial,
    #[error(transparent)]
    Poly(#[from] pwpoly::Error),
}

/// A probability density of bounded variation on the line.
///
/// Wraps a [`PiecewisePoly`] validated to be nonnegative (up to rounding
/// slack) with unit mass, and caches the derivative-norm value
/// `variation(density)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BVDensity {
    density: PiecewisePoly,
    cached_tv: f64,
}

impl BVDensity {
    pub fn new(density: PiecewisePoly) -> Result<Self, Error> {
        let min = density.min_value();
        if min < -DENSITY_NEG_TOL {
            return Err(Error::NegativeDensity { min });
        }
        let integral = density.total_integral();
        if (integral - 1.0).abs() > MASS_TOL {
            return Err(Error::MassNotOne { integral });
        }
        let cached_tv = density.variation();
        Ok(Self { density, cached_tv })
    }

    /// Uniform distribution on [a, b].
    pub fn uniform(a: f64, b: f64) -> Self {
        Self::new(PiecewisePoly::uniform_density(a, b)).expect("uniform density is valid")
    }

    /// Triangle distribution on [a, b] with the peak at the midpoint.
    pub fn triangle(a: f64, b: f64) -> Self {
        Self::new(pwpoly::triangle_density(a, b)).expect("triangle density is valid")
    }

    /// Symmetric trapezoid with support [a, d] and plateau [b, c].
    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(pwpoly::trapezoid_density(a, b, c, d)).expect("trapezoid density is valid")
    }

    pub fn density(&self) -> &PiecewisePoly {
        &self.density
    }

    pub fn support(&self) -> (f64, f64) {
        self.density.support()
    }

    /// Total-variation norm of the distributional derivative.
    pub fn tv_skorohod(&self) -> f64 {
        self.cached_tv
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, _) = self.support();
        self.density.integral(lo, x)
    }

    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.density.piece_count() {
            let (x0, x1) = self.density.piece_bounds(i);
            let m = self.density.piece_center(i);
            // integrate x * rho(x) = (u + m) * p(u)
            let prod = crate::numeric::poly_mul(&[m, 1.0], self.density.piece_coeffs(i));
            let anti = poly_antideriv(&prod);
            acc += poly_eval(&anti, x1 - m) - poly_eval(&anti, x0 - m);
        }
        acc
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let mut acc = 0.0;
        for i in 0..self.density.piece_count() {
            let (x0, x1) = self.density.piece_bounds(i);
            let m = self.density.piece_center(i);
            let c = self.density.piece_coeffs(i);
            // (u + m - mean)^2 * p(u)
            let d = m - mean;
            let sq = [d * d, 2.0 * d, 1.0];
            let prod = crate::numeric::poly_mul(&sq, c);
            let anti = poly_antideriv(&prod);
            acc += poly_eval(&anti, x1 - m) - poly_eval(&anti, x0 - m);
        }
        acc
    }

    /// `n` i.i.d. draws by exact inverse-CDF sampling; deterministic in
    /// `(seed, n)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pp = &self.density;
        let m = pp.piece_count();
        let mut cum = Vec::with_capacity(m + 1);
        cum.push(0.0);
        for i in 0..m {
            let (x0, x1) = pp.piece_bounds(i);
            cum.push(cum[i] + pp.integral(x0, x1));
        }
        let total = cum[m];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen::<f64>() * total;
            let mut idx = cum.partition_point(|&c| c <= u);
            idx = idx.clamp(1, m);
            let i = idx - 1;
            let (x0, x1) = pp.piece_bounds(i);
            let center = pp.piece_center(i);
            let target = u - cum[i];
            let anti = poly_antideriv(pp.piece_coeffs(i));
            let base = poly_eval(&anti, x0 - center);
            let g = |x: f64| poly_eval(&anti, x - center) - base - target;
            let dg = |x: f64| pp.eval(x.clamp(x0, x1));
            let x = if g(x0) >= 0.0 {
                x0
            } else if g(x1) <= 0.0 {
                x1
            } else {
                crate::numeric::newton_bisect(g, dg, x0, x1, ROOT_TOL)
            };
            out.push(x);
        }
        out
    }
}

impl Serialize for BVDensity {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.density.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BVDensity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pp = PiecewisePoly::deserialize(deserializer)?;
        BVDensity::new(pp).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub a: f64,
    pub b: f64,
}

/// A convex mixture of uniform distributions, stored canonically sorted by
/// `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformMixture {
    components: Vec<MixtureComponent>,
}

impl UniformMixture {
    pub fn new(mut components: Vec<MixtureComponent>) -> Result<Self, Error> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if components.len() > COMPONENT_CAP {
            return Err(Error::ComponentCap {
                count: components.len(),
                cap: COMPONENT_CAP,
            });
        }
        let mut sum = 0.0;
        for c in &components {
            if !(c.weight > 0.0 && c.weight <= 1.0 + WEIGHT_SUM_TOL) {
                return Err(Error::BadWeight { weight: c.weight });
            }
            if !(c.b > c.a) || !c.a.is_finite() || !c.b.is_finite() {
                return Err(Error::BadInterval { a: c.a, b: c.b });
            }
            sum += c.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::WeightSum { sum });
        }
        components.sort_by(|x, y| {
            (x.a, x.b)
                .partial_cmp(&(y.a, y.b))
                .expect("finite intervals")
        });
        Ok(Self { components })
    }

    /// Single-component mixture: the uniform distribution on [a, b].
    pub fn single(a: f64, b: f64) -> Self {
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            a,
            b,
        }])
        .expect("valid single component")
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// The mixture side of the derivative-norm identity:
    /// sum of `weight * 2 / (b - a)`.
    pub fn total_tv(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * 2.0 / (c.b - c.a))
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * ((x - c.a) / (c.b - c.a)).clamp(0.0, 1.0))
            .sum()
    }

    /// `n` i.i.d. draws; deterministic in `(seed, n)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cum = Vec::with_capacity(self.components.len());
        let mut acc = 0.0;
        for c in &self.components {
            acc += c.weight;
            cum.push(acc);
        }
        let total = acc;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen::<f64>() * total;
            let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
            let c = &self.components[idx];
            out.push(c.a + (c.b - c.a) * rng.gen::<f64>());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

impl Serialize for UniformMixture {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Raw<'a> {
            components: &'a [MixtureComponent],
        }
        Raw {
            components: &self.components,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UniformMixture {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            components: Vec<MixtureComponent>,
        }
        let raw = Raw::deserialize(deserializer)?;
        UniformMixture::new(raw.components).map_err(D::Error::custom)
    }
}

/// Derivative-norm of a 1-D measure given by its density.
pub fn tv_skorohod(density: &BVDensity) -> f64 {
    density.tv_skorohod()
}

/// Assemble the density of a mixture of uniforms as an exact step function.
pub fn reconstruct(mixture: &UniformMixture) -> Result<BVDensity, Error> {
    if mixture.len() > COMPONENT_CAP {
        return Err(Error::ComponentCap {
            count: mixture.len(),
            cap: COMPONENT_CAP,
        });
    }
    // Height events at every interval endpoint, swept left to right.
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(mixture.len() * 2);
    for c in mixture.components() {
        let h = c.weight / (c.b - c.a);
        events.push((c.a, h));
        events.push((c.b, -h));
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite endpoints"));
    let scale = 1.0 + events.last().unwrap().0.abs().max(events[0].0.abs());
    let merge = crate::tol::BREAKPOINT_MERGE * scale;
    let mut edges: Vec<f64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    for (x, d) in events {
        match edges.last() {
            Some(&last) if (x - last).abs() <= merge => *deltas.last_mut().unwrap() += d,
            _ => {
                edges.push(x);
                deltas.push(d);
            }
        }
    }
    let mut values = Vec::with_capacity(edges.len().saturating_sub(1));
    let mut level = 0.0;
    for d in &deltas[..deltas.len() - 1] {
        level += d;
        values.push(level.max(0.0));
    }
    let pp = PiecewisePoly::step(edges, values)?;
    BVDensity::new(pp)
}

/// Kolmogorov-Smirnov statistic of a sample against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs());
        worst = worst.max((f - (i as f64 + 1.0) / n).abs());
    }
    worst
}
