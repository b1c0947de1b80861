//! Product measures on R^n and their images.
//!
//! The exact path decomposes every factor into a mixture of uniforms,
//! enumerates the product mixture, and assembles the density of a linear
//! functional from convolutions of scaled uniform distributions. Projections
//! to R^k and polynomial images are estimated by seeded Monte Carlo
//! histograms.

mod linalg;

use std::borrow::Cow;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures1d::{
    self, BVDensity, MixtureComponent, UniformMixture,
};
use crate::multilinear::SymmetricPolynomial;
use crate::numeric::{poly_shift, substream_seed};
use crate::pwpoly::PiecewisePoly;
use crate::tol::{BREAKPOINT_MERGE, CELL_CAP, DEFAULT_BINS};

pub(crate) use linalg::{inv_sqrt_spd, matvec};

#[derive(Debug, Error)]
pub enum Error {
    #[error("direction must be a unit vector (|a| = {norm})")]
    NotUnitVector { norm: f64 },
    #[error("projection rows must be orthonormal")]
    NonOrthonormalRows,
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{cells} product-mixture cells exceed the cap of {cap}")]
    CellCap { cells: usize, cap: usize },
    #[error("grid images support k <= 3, got {k}")]
    KTooLarge { k: usize },
    #[error("product measure needs at least one factor")]
    NoFactors,
    #[error(transparent)]
    Measure(#[from] measures1d::Error),
    #[error(transparent)]
    Poly(#[from] crate::pwpoly::Error),
    #[error(transparent)]
    Multilinear(#[from] crate::multilinear::Error),
}

/// Product of independent 1-D BV measures, with optionally cached exact
/// mixture decompositions per factor.
#[derive(Debug, Clone)]
pub struct ProductMeasure {
    factors: Vec<BVDensity>,
    mixtures: Vec<Option<UniformMixture>>,
}

impl ProductMeasure {
    pub fn from_densities(factors: Vec<BVDensity>) -> Result<Self, Error> {
        if factors.is_empty() {
            return Err(Error::NoFactors);
        }
        let mixtures = vec![None; factors.len()];
        Ok(Self { factors, mixtures })
    }

    /// Build from densities with exact mixtures attached where known.
    pub fn from_factors(
        factors: Vec<BVDensity>,
        mixtures: Vec<Option<UniformMixture>>,
    ) -> Result<Self, Error> {
        if factors.is_empty() || factors.len() != mixtures.len() {
            return Err(Error::NoFactors);
        }
        Ok(Self { factors, mixtures })
    }

    /// Build from exact mixtures; the factor densities are their exact step
    /// reconstructions.
    pub fn from_mixtures(mixtures: Vec<UniformMixture>) -> Result<Self, Error> {
        if mixtures.is_empty() {
            return Err(Error::NoFactors);
        }
        let factors = mixtures
            .iter()
            .map(measures1d::reconstruct)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            factors,
            mixtures: mixtures.into_iter().map(Some).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, j: usize) -> &BVDensity {
        &self.factors[j]
    }

    pub fn factors(&self) -> &[BVDensity] {
        &self.factors
    }

    pub fn cached_mixture(&self, j: usize) -> Option<&UniformMixture> {
        self.mixtures[j].as_ref()
    }

    /// The mixture of factor `j`: cached when exact, decomposed on demand.
    pub fn mixture_for(&self, j: usize) -> Result<Cow<'_, UniformMixture>, Error> {
        match &self.mixtures[j] {
            Some(m) => Ok(Cow::Borrowed(m)),
            None => Ok(Cow::Owned(
                measures1d::decompose(&self.factors[j])?.mixture,
            )),
        }
    }

    pub fn max_factor_tv(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.tv_skorohod())
            .fold(0.0, f64::max)
    }

    /// Closed-form upper bound on `sup_{|theta|=1} ||D_theta mu||_TV` for a
    /// product measure: the Euclidean norm of the per-factor derivative
    /// norms.
    pub fn sup_dtv_upper(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.tv_skorohod().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// N x n table of i.i.d. rows; coordinate `j` uses substream `j` of the
    /// base seed, so columns are independent and the table is deterministic.
    pub fn sample(&self, n: usize, seed: u64) -> SampleTable {
        let cols = self.dim();
        let mut data = vec![0.0; n * cols];
        for j in 0..cols {
            let s = substream_seed(seed, j as u64);
            let draws = match &self.mixtures[j] {
                Some(m) => m.sample(n, s),
                None => self.factors[j].sample(n, s),
            };
            for (i, v) in draws.into_iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        SampleTable {
            data,
            rows: n,
            cols,
        }
    }

    /// Exact density of `<a, x>` for a unit vector `a`.
    pub fn linear_image_exact(&self, a: &[f64]) -> Result<PiecewisePoly, Error> {
        self.linear_image(a, &ImageOptions::default()).map(|r| r.density)
    }

    pub fn linear_image(&self, a: &[f64], opts: &ImageOptions) -> Result<LinearImage, Error> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.len(),
            });
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitVector { norm });
        }
        // Coordinates with a_j = 0 contribute a point mass at zero and are
        // skipped outright.
        let active: Vec<(usize, f64)> = a
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        let mut mixtures: Vec<UniformMixture> = Vec::with_capacity(active.len());
        for (j, _) in &active {
            mixtures.push(self.mixture_for(*j)?.into_owned());
        }
        let mut cells: usize = mixtures.iter().map(|m| m.len()).product();
        let mut thinning_l1 = 0.0;
        if cells > opts.cell_cap {
            if !opts.thinning {
                return Err(Error::CellCap {
                    cells,
                    cap: opts.cell_cap,
                });
            }
            thinning_l1 = thin_mixtures(&mut mixtures, opts.cell_cap);
            cells = mixtures.iter().map(|m| m.len()).product();
        }

        // Scale the component intervals by the direction coordinates.
        let scaled: Vec<Vec<MixtureComponent>> = mixtures
            .iter()
            .zip(&active)
            .map(|(m, (_, aj))| {
                m.components()
                    .iter()
                    .map(|c| {
                        let (lo, hi) = if *aj > 0.0 {
                            (aj * c.a, aj * c.b)
                        } else {
                            (aj * c.b, aj * c.a)
                        };
                        MixtureComponent {
                            weight: c.weight,
                            a: lo,
                            b: hi,
                        }
                    })
                    .collect()
            })
            .collect();

        let density = if scaled.len() == 1 {
            step_density_of_mixture(&scaled[0])?
        } else if cells <= CHAIN_CELL_LIMIT {
            image_by_convolution_chain(&scaled)?
        } else {
            image_by_knot_sweep(&scaled)?
        };
        Ok(LinearImage {
            density,
            cells,
            thinning_l1,
        })
    }

    /// Histogram of `A x` for a k x n matrix with orthonormal rows, k <= 3.
    pub fn projection_image(
        &self,
        rows: &[Vec<f64>],
        n: usize,
        seed: u64,
        binning: &Binning,
    ) -> Result<GridDensity, Error> {
        let k = rows.len();
        if k == 0 || k > 3 {
            return Err(Error::KTooLarge { k });
        }
        for r in rows {
            if r.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: r.len(),
                });
            }
        }
        for i in 0..k {
            for j in i..k {
                let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-10 {
                    return Err(Error::NonOrthonormalRows);
                }
            }
        }
        // exact image window per output axis
        let range: Vec<(f64, f64)> = match &binning.range {
            Some(r) => r.clone(),
            None => rows
                .iter()
                .map(|row| {
                    let mut lo = 0.0;
                    let mut hi = 0.0;
                    for (j, &c) in row.iter().enumerate() {
                        let (slo, shi) = self.factors[j].support();
                        lo += (c * slo).min(c * shi);
                        hi += (c * slo).max(c * shi);
                    }
                    (lo, hi)
                })
                .collect(),
        };
        let table = self.sample(n, seed);
        let projected: Vec<f64> = (0..n)
            .flat_map(|i| {
                let row = table.row(i);
                rows.iter()
                    .map(move |r| r.iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect();
        Ok(GridDensity::from_flat_samples(
            &projected, k, n, &range, binning, seed, "projection",
        ))
    }

    /// 1-D histogram of `f(x)` over `n` samples.
    pub fn polynomial_image(
        &self,
        poly: &SymmetricPolynomial,
        n: usize,
        seed: u64,
        binning: &Binning,
    ) -> Result<GridDensity, Error> {
        if poly.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: poly.dim(),
            });
        }
        let table = self.sample(n, seed);
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            values.push(poly.eval(table.row(i))?);
        }
        let range = match &binning.range {
            Some(r) => vec![r[0]],
            None => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in &values {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                let pad = 0.01 * (hi - lo).max(1e-12);
                vec![(lo - pad, hi + pad)]
            }
        };
        let mut grid =
            GridDensity::from_flat_samples(&values, 1, n, &range, binning, seed, "polynomial");
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        grid.value_min = lo;
        grid.value_max = hi;
        Ok(grid)
    }
}

const CHAIN_CELL_LIMIT: usize = 64;

/// Exact image density and how it was obtained.
#[derive(Debug, Clone)]
pub struct LinearImage {
    pub density: PiecewisePoly,
    /// Product-mixture cells enumerated.
    pub cells: usize,
    /// Accumulated L1 error from mixture thinning (zero when no thinning
    /// happened).
    pub thinning_l1: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ImageOptions {
    pub cell_cap: usize,
    /// Merge smallest-weight components instead of failing once past the cap.
    pub thinning: bool,
}

impl Default for ImageOptions {
    fn default() -> Self {
        Self {
            cell_cap: CELL_CAP,
            thinning: false,
        }
    }
}

fn step_density_of_mixture(components: &[MixtureComponent]) -> Result<PiecewisePoly, Error> {
    let m = UniformMixture::new(components.to_vec())?;
    Ok(measures1d::reconstruct(&m)?.density().clone())
}

/// Per-cell pairwise convolution, used for small cell counts where it is
/// numerically bulletproof (values never exceed the density scale).
fn image_by_convolution_chain(scaled: &[Vec<MixtureComponent>]) -> Result<PiecewisePoly, Error> {
    let mut total: Option<PiecewisePoly> = None;
    let mut idx = vec![0usize; scaled.len()];
    loop {
        let mut weight = 1.0;
        let mut chain: Option<PiecewisePoly> = None;
        for (f, &i) in scaled.iter().zip(idx.iter()) {
            let c = &f[i];
            weight *= c.weight;
            let u = PiecewisePoly::uniform_density(c.a, c.b);
            chain = Some(match chain {
                None => u,
                Some(acc) => acc.convolve(&u)?,
            });
        }
        let cell = chain.expect("at least one factor").scale(weight);
        total = Some(match total {
            None => cell,
            Some(acc) => acc.add(&cell),
        });
        // lexicographic counter
        let mut pos = scaled.len();
        loop {
            if pos == 0 {
                return Ok(total.expect("at least one cell"));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < scaled[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Truncated-power assembly of the whole image in one sweep.
///
/// The convolution of `n` uniform cells is a spline combination of
/// `(t - k)_+^{n-1}` over the 2^n subset-sum knots; summing the knot
/// impulses of every cell and sweeping left to right with Taylor shifts
/// yields all pieces in near-linear time.
fn image_by_knot_sweep(scaled: &[Vec<MixtureComponent>]) -> Result<PiecewisePoly, Error> {
    let nf = scaled.len();
    let deg = nf - 1;
    let mut factorial = 1.0;
    for k in 1..=deg {
        factorial *= k as f64;
    }
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let mut idx = vec![0usize; nf];
    'cells: loop {
        let mut weight = 1.0;
        let mut base = 0.0;
        let mut lens = Vec::with_capacity(nf);
        for (f, &i) in scaled.iter().zip(idx.iter()) {
            let c = &f[i];
            weight *= c.weight;
            base += c.a;
            lens.push(c.b - c.a);
        }
        let mut wt = weight / factorial;
        for l in &lens {
            wt /= *l;
        }
        for mask in 0u32..(1 << nf) {
            let mut k = base;
            for (j, l) in lens.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    k += *l;
                }
            }
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            knots.push((k, sign * wt));
        }
        let mut pos = nf;
        loop {
            if pos == 0 {
                break 'cells;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < scaled[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }

    knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let scale = 1.0 + knots.last().unwrap().0.abs().max(knots[0].0.abs());
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
    for (k, g) in knots {
        match merged.last_mut() {
            Some(last) if (k - last.0).abs() <= BREAKPOINT_MERGE * scale => last.1 += g,
            _ => merged.push((k, g)),
        }
    }

    let mut cur = vec![0.0; deg + 1];
    let mut center = merged[0].0;
    let mut breakpoints = Vec::with_capacity(merged.len());
    let mut pieces = Vec::with_capacity(merged.len().saturating_sub(1));
    for (i, &(k, g)) in merged.iter().enumerate() {
        cur = poly_shift(&cur, k - center);
        center = k;
        cur[deg] += g;
        breakpoints.push(k);
        if i + 1 < merged.len() {
            let mid = 0.5 * (k + merged[i + 1].0);
            pieces.push(poly_shift(&cur, mid - k));
        }
    }
    Ok(PiecewisePoly::new(breakpoints, pieces)?.cleaned())
}

/// Merge smallest-weight components of the widest mixtures until the product
/// of counts fits the cap; returns the accumulated L1 merge error.
fn thin_mixtures(mixtures: &mut [UniformMixture], cap: usize) -> f64 {
    let mut err = 0.0;
    loop {
        let cells: usize = mixtures.iter().map(|m| m.len()).product();
        if cells <= cap {
            return err;
        }
        let widest = (0..mixtures.len())
            .max_by_key(|&j| mixtures[j].len())
            .expect("nonempty");
        let mut comps = mixtures[widest].components().to_vec();
        if comps.len() < 2 {
            return err;
        }
        // two smallest weights
        let mut order: Vec<usize> = (0..comps.len()).collect();
        order.sort_by(|&x, &y| comps[x].weight.partial_cmp(&comps[y].weight).unwrap());
        let (i1, i2) = (order[0].min(order[1]), order[0].max(order[1]));
        let c2 = comps.remove(i2);
        let c1 = comps.remove(i1);
        let w = c1.weight + c2.weight;
        let merged = MixtureComponent {
            weight: w,
            a: (c1.weight * c1.a + c2.weight * c2.a) / w,
            b: (c1.weight * c1.b + c2.weight * c2.b) / w,
        };
        err += merge_l1(&c1, &c2, &merged);
        comps.push(merged);
        mixtures[widest] = UniformMixture::new(comps).expect("thinned mixture stays valid");
    }
}

/// Exact L1 distance between `w1 U1 + w2 U2` and the merged component.
fn merge_l1(c1: &MixtureComponent, c2: &MixtureComponent, merged: &MixtureComponent) -> f64 {
    let mut edges = vec![c1.a, c1.b, c2.a, c2.b, merged.a, merged.b];
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let x = 0.5 * (w[0] + w[1]);
        let mut v = 0.0;
        for c in [c1, c2] {
            if x >= c.a && x < c.b {
                v += c.weight / (c.b - c.a);
            }
        }
        if x >= merged.a && x < merged.b {
            v -= merged.weight / (merged.b - merged.a);
        }
        acc += v.abs() * (w[1] - w[0]);
    }
    acc
}

/// Row-major sample table.
#[derive(Debug, Clone)]
pub struct SampleTable {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl SampleTable {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }
}

/// Histogram binning policy.
#[derive(Debug, Clone)]
pub struct Binning {
    /// Bins per axis.
    pub bins: usize,
    /// Explicit window per axis; derived from the data or the exact image
    /// range when absent.
    pub range: Option<Vec<(f64, f64)>>,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            range: None,
        }
    }
}

impl Binning {
    pub fn with_bins(bins: usize) -> Self {
        Self { bins, range: None }
    }

    /// Default bins per axis keeping the total cell count moderate.
    pub fn default_for(k: usize) -> Self {
        let bins = match k {
            0 | 1 => DEFAULT_BINS,
            2 => 64,
            _ => 16,
        };
        Self { bins, range: None }
    }
}

/// Histogram estimate of an image density on a k-dimensional grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDensity {
    /// Per-axis bin edges (length bins + 1 each).
    edges: Vec<Vec<f64>>,
    /// Bin masses in row-major order, summing to `1 - outside`.
    masses: Vec<f64>,
    /// Number of samples underlying the estimate.
    samples: usize,
    /// Mass that fell outside the binning window.
    outside: f64,
    seed: u64,
    generator: String,
    #[serde(default)]
    value_min: f64,
    #[serde(default)]
    value_max: f64,
}

impl GridDensity {
    fn from_flat_samples(
        flat: &[f64],
        k: usize,
        n: usize,
        range: &[(f64, f64)],
        binning: &Binning,
        seed: u64,
        generator: &str,
    ) -> Self {
        let bins = binning.bins.max(1);
        let edges: Vec<Vec<f64>> = range
            .iter()
            .map(|&(lo, hi)| {
                (0..=bins)
                    .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
                    .collect()
            })
            .collect();
        let mut counts = vec![0u64; bins.pow(k as u32)];
        let mut outside = 0u64;
        'points: for row in flat.chunks_exact(k) {
            let mut flat_idx = 0usize;
            for (axis, &v) in row.iter().enumerate() {
                let (lo, hi) = range[axis];
                if !(v >= lo && v <= hi) {
                    outside += 1;
                    continue 'points;
                }
                let w = (hi - lo) / bins as f64;
                let mut b = ((v - lo) / w) as usize;
                if b >= bins {
                    b = bins - 1;
                }
                flat_idx = flat_idx * bins + b;
            }
            counts[flat_idx] += 1;
        }
        let masses = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self {
            edges,
            masses,
            samples: n,
            outside: outside as f64 / n as f64,
            seed,
            generator: generator.to_string(),
            value_min: 0.0,
            value_max: 0.0,
        }
    }

    /// Build a 1-D grid directly from masses (used by exact paths that bin a
    /// known density).
    pub fn from_masses_1d(edges: Vec<f64>, masses: Vec<f64>, samples: usize) -> Self {
        Self {
            edges: vec![edges],
            masses,
            samples,
            outside: 0.0,
            seed: 0,
            generator: "exact".to_string(),
            value_min: 0.0,
            value_max: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn bins(&self, axis: usize) -> usize {
        self.edges[axis].len() - 1
    }

    pub fn edges(&self, axis: usize) -> &[f64] {
        &self.edges[axis]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn outside_mass(&self) -> f64 {
        self.outside
    }

    pub fn value_range(&self) -> (f64, f64) {
        (self.value_min, self.value_max)
    }

    pub fn bin_width(&self, axis: usize) -> f64 {
        let e = &self.edges[axis];
        (e[e.len() - 1] - e[0]) / (e.len() - 1) as f64
    }

    /// Density value of a bin (mass over bin volume).
    pub fn density_value(&self, flat_idx: usize) -> f64 {
        let mut volume = 1.0;
        for axis in 0..self.dim() {
            volume *= self.bin_width(axis);
        }
        self.masses[flat_idx] / volume
    }

    /// Marginal along one axis (1-D grid with the same sample count).
    pub fn marginal(&self, axis: usize) -> GridDensity {
        let k = self.dim();
        let bins: Vec<usize> = (0..k).map(|a| self.bins(a)).collect();
        let mut masses = vec![0.0; bins[axis]];
        for (flat, &m) in self.masses.iter().enumerate() {
            // unravel row-major index
            let mut rest = flat;
            let mut coord = 0;
            for (a, &b) in bins.iter().enumerate().rev() {
                let c = rest % b;
                rest /= b;
                if a == axis {
                    coord = c;
                }
            }
            masses[coord] += m;
        }
        GridDensity {
            edges: vec![self.edges[axis].clone()],
            masses,
            samples: self.samples,
            outside: self.outside,
            seed: self.seed,
            generator: format!("{}:marginal{axis}", self.generator),
            value_min: 0.0,
            value_max: 0.0,
        }
    }

    /// CSV rows `(bin_left_i, bin_right_i)* , mass` with 17 significant
    /// digits.
    pub fn to_csv(&self) -> String {
        let k = self.dim();
        let bins: Vec<usize> = (0..k).map(|a| self.bins(a)).collect();
        let mut out = String::new();
        if k == 1 {
            out.push_str("bin_left,bin_right,mass\n");
        } else {
            for axis in 0..k {
                let _ = write!(out, "bin_left_{axis},bin_right_{axis},");
            }
            out.push_str("mass\n");
        }
        for (flat, &m) in self.masses.iter().enumerate() {
            let mut rest = flat;
            let mut coords = vec![0usize; k];
            for a in (0..k).rev() {
                coords[a] = rest % bins[a];
                rest /= bins[a];
            }
            for (a, &c) in coords.iter().enumerate() {
                let _ = write!(out, "{:.16e},{:.16e},", self.edges[a][c], self.edges[a][c + 1]);
            }
            let _ = writeln!(out, "{m:.16e}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// 1-D histogram of raw values (range padded 1% unless pinned by the
/// binning).
pub fn histogram_1d(values: &[f64], binning: &Binning, seed: u64, generator: &str) -> GridDensity {
    let range = match &binning.range {
        Some(r) => vec![r[0]],
        None => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in values {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let pad = 0.01 * (hi - lo).max(1e-12);
            vec![(lo - pad, hi + pad)]
        }
    };
    GridDensity::from_flat_samples(values, 1, values.len(), &range, binning, seed, generator)
}

/// Empirical second moments of the whitened projection `W A (x - mean)`,
/// where `W = (A Cov A^T)^{-1/2}`: for each direction returns the sample
/// mean of `<y, theta>^2` (which should be `|theta|^2`) and its standard
/// error.
pub fn isotropy_second_moments(
    measure: &ProductMeasure,
    rows: &[Vec<f64>],
    thetas: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, Error> {
    let k = rows.len();
    if k == 0 || k > 3 {
        return Err(Error::KTooLarge { k });
    }
    let dim = measure.dim();
    let means: Vec<f64> = measure.factors().iter().map(|f| f.mean()).collect();
    let vars: Vec<f64> = measure.factors().iter().map(|f| f.variance()).collect();
    // A Cov A^T with Cov = diag(vars)
    let mut cov = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            cov[i][j] = (0..dim).map(|p| rows[i][p] * vars[p] * rows[j][p]).sum();
        }
    }
    let white = inv_sqrt_spd(&cov);
    let table = measure.sample(n, seed);
    let mut out = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let x = table.row(i);
            let centered: Vec<f64> = x.iter().zip(&means).map(|(a, b)| a - b).collect();
            let proj: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(&centered).map(|(a, b)| a * b).sum())
                .collect();
            let y = matvec(&white, &proj);
            let v: f64 = y.iter().zip(theta).map(|(a, b)| a * b).sum();
            sum += v * v;
            sumsq += v * v * v * v;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        out.push((mean, (var / n as f64).sqrt()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> ProductMeasure {
        ProductMeasure::from_mixtures(vec![UniformMixture::single(-0.5, 0.5); n]).unwrap()
    }

    #[test]
    fn coordinate_projection_is_the_factor() {
        let m = cube(2);
        let img = m.linear_image_exact(&[1.0, 0.0]).unwrap();
        assert!((img.eval(0.0) - 1.0).abs() < 1e-13);
        assert!((img.eval(0.49) - 1.0).abs() < 1e-13);
        assert_eq!(img.eval(0.6), 0.0);
    }

    #[test]
    fn diagonal_square_attains_equality() {
        let m = cube(2);
        let s = 1.0 / 2.0f64.sqrt();
        let img = m.linear_image_exact(&[s, s]).unwrap();
        assert!((img.eval(0.0) - 2.0f64.sqrt()).abs() < 1e-12);
        let lhs = img.variation();
        let rhs = 2.0f64.sqrt() * m.max_factor_tv();
        assert!((lhs - rhs).abs() < 1e-12, "lhs {lhs} rhs {rhs}");
        assert!((lhs - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_cube_matches_irwin_hall_peak() {
        let m = cube(3);
        let s = 1.0 / 3.0f64.sqrt();
        let img = m.linear_image_exact(&[s, s, s]).unwrap();
        // (U1+U2+U3)/sqrt(3) at 0: sqrt(3) * irwin_hall_3(1.5)
        let want = 3.0f64.sqrt() * 0.75;
        assert!((img.eval(0.0) - want).abs() < 1e-10, "{}", img.eval(0.0));
        assert!((img.total_integral() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn zero_coordinates_are_skipped() {
        let m = cube(3);
        let img = m.linear_image_exact(&[0.0, 1.0, 0.0]).unwrap();
        assert!((img.eval(0.2) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sweep_and_chain_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..6 {
            let n = rng.gen_range(2..=4);
            let mut mixtures = Vec::new();
            for _ in 0..n {
                let k = rng.gen_range(2..=3);
                let mut comps = Vec::new();
                let mut left = 1.0;
                for i in 0..k {
                    let w = if i + 1 == k {
                        left
                    } else {
                        let w = rng.gen_range(0.2..0.5) * left;
                        left -= w;
                        w
                    };
                    let a = rng.gen_range(-1.0..0.5);
                    let b = a + rng.gen_range(0.3..1.2);
                    comps.push(MixtureComponent { weight: w, a, b });
                }
                mixtures.push(UniformMixture::new(comps).unwrap());
            }
            let m = ProductMeasure::from_mixtures(mixtures).unwrap();
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..1.0)).collect();
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in a.iter_mut() {
                *v /= norm;
            }
            let chain = image_by_convolution_chain(
                &m.factors()
                    .iter()
                    .enumerate()
                    .map(|(j, _)| {
                        m.cached_mixture(j)
                            .unwrap()
                            .components()
                            .iter()
                            .map(|c| MixtureComponent {
                                weight: c.weight,
                                a: a[j] * c.a,
                                b: a[j] * c.b,
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let sweep = image_by_knot_sweep(
                &m.factors()
                    .iter()
                    .enumerate()
                    .map(|(j, _)| {
                        m.cached_mixture(j)
                            .unwrap()
                            .components()
                            .iter()
                            .map(|c| MixtureComponent {
                                weight: c.weight,
                                a: a[j] * c.a,
                                b: a[j] * c.b,
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let (lo, hi) = chain.support();
            for k in 0..200 {
                let t = lo + (hi - lo) * (k as f64 + 0.5) / 200.0;
                let d = (chain.eval(t) - sweep.eval(t)).abs();
                assert!(d < 1e-10, "trial {trial} t {t} diff {d}");
            }
            let dv = (chain.variation() - sweep.variation()).abs();
            assert!(dv < 1e-9, "trial {trial} variation diff {dv}");
        }
    }

    #[test]
    fn cell_cap_triggers_and_thinning_recovers() {
        let comps: Vec<MixtureComponent> = (0..10)
            .map(|i| MixtureComponent {
                weight: 0.1,
                a: i as f64 * 0.1,
                b: i as f64 * 0.1 + 0.15,
            })
            .collect();
        let m = ProductMeasure::from_mixtures(vec![
            UniformMixture::new(comps.clone()).unwrap(),
            UniformMixture::new(comps.clone()).unwrap(),
            UniformMixture::new(comps).unwrap(),
        ])
        .unwrap();
        let a = [1.0 / 3.0f64.sqrt(); 3];
        let small_cap = ImageOptions {
            cell_cap: 100,
            thinning: false,
        };
        assert!(matches!(
            m.linear_image(&a, &small_cap),
            Err(Error::CellCap { .. })
        ));
        let thin = ImageOptions {
            cell_cap: 100,
            thinning: true,
        };
        let img = m.linear_image(&a, &thin).unwrap();
        assert!(img.cells <= 100);
        assert!(img.thinning_l1 > 0.0);
        assert!((img.density.total_integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sampling_independence_and_determinism() {
        let m = ProductMeasure::from_mixtures(vec![
            UniformMixture::single(0.0, 1.0),
            UniformMixture::single(0.0, 1.0),
        ])
        .unwrap();
        let t1 = m.sample(1_000_000, 7);
        let t2 = m.sample(1_000_000, 7);
        assert_eq!(t1.row(12345), t2.row(12345));
        // empirical correlation
        let n = t1.rows() as f64;
        let mx: f64 = t1.column(0).sum::<f64>() / n;
        let my: f64 = t1.column(1).sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..t1.rows() {
            let r = t1.row(i);
            cov += (r[0] - mx) * (r[1] - my);
            vx += (r[0] - mx).powi(2);
            vy += (r[1] - my).powi(2);
        }
        let corr = cov / (vx.sqrt() * vy.sqrt());
        assert!(corr.abs() < 0.004, "corr {corr}");
    }

    #[test]
    fn product_marginals_match_exact_cdfs() {
        let m = ProductMeasure::from_densities(vec![
            crate::measures1d::BVDensity::triangle(0.0, 2.0),
            crate::measures1d::BVDensity::uniform(0.0, 1.0),
        ])
        .unwrap();
        let table = m.sample(1_000_000, 13);
        let tri = crate::measures1d::BVDensity::triangle(0.0, 2.0);
        let mut col0: Vec<f64> = table.column(0).collect();
        let ks0 = crate::measures1d::ks_statistic(&mut col0, |x| tri.cdf(x));
        assert!(ks0 < 0.002, "ks0 {ks0}");
        let mut col1: Vec<f64> = table.column(1).collect();
        let ks1 = crate::measures1d::ks_statistic(&mut col1, |x| x.clamp(0.0, 1.0));
        assert!(ks1 < 0.002, "ks1 {ks1}");
    }

    #[test]
    fn projection_image_identity_and_marginal() {
        let m = cube(2);
        let grid = m
            .projection_image(
                &[vec![1.0, 0.0], vec![0.0, 1.0]],
                200_000,
                3,
                &Binning::default_for(2),
            )
            .unwrap();
        assert_eq!(grid.dim(), 2);
        let total: f64 = grid.masses().iter().sum();
        assert!((total + grid.outside_mass() - 1.0).abs() < 1e-12);
        // uniform masses within 3 standard errors (plus a coarse floor)
        let bins = grid.bins(0) * grid.bins(1);
        let p = 1.0 / bins as f64;
        let se = (p * (1.0 - p) / 200_000.0).sqrt();
        for &m in grid.masses() {
            assert!((m - p).abs() < 4.0 * se + 1e-6, "mass {m} vs {p}");
        }
    }

    #[test]
    fn projection_marginal_matches_exact_image() {
        let m = cube(3);
        let s = 1.0 / 2.0f64.sqrt();
        let rows = vec![vec![s, s, 0.0], vec![0.0, 0.0, 1.0]];
        let n = 400_000;
        let grid = m
            .projection_image(&rows, n, 5, &Binning { bins: 32, range: None })
            .unwrap();
        let marg = grid.marginal(0);
        let exact = m.linear_image_exact(&rows[0]).unwrap();
        for i in 0..marg.bins(0) {
            let (a, b) = (marg.edges(0)[i], marg.edges(0)[i + 1]);
            let want = exact.integral(a, b);
            let got = marg.masses()[i];
            let se = (want.max(1e-9) * (1.0 - want) / n as f64).sqrt();
            assert!(
                (got - want).abs() < 4.0 * se + 1e-4,
                "bin {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn rejects_bad_projection_rows() {
        let m = cube(2);
        assert!(matches!(
            m.projection_image(
                &[vec![1.0, 1.0]],
                10_000,
                1,
                &Binning::default_for(1)
            ),
            Err(Error::NonOrthonormalRows)
        ));
    }

    #[test]
    fn polynomial_image_of_identity_coordinate() {
        let m = ProductMeasure::from_mixtures(vec![
            UniformMixture::single(0.0, 1.0),
            UniformMixture::single(0.0, 1.0),
        ])
        .unwrap();
        let p = crate::multilinear::SymmetricPolynomial::from_monomials(
            2,
            &[(vec![1, 0], 1.0)],
        )
        .unwrap();
        let grid = m
            .polynomial_image(&p, 200_000, 9, &Binning::with_bins(64))
            .unwrap();
        // near-uniform masses
        let bins = grid.bins(0);
        for i in 2..bins - 2 {
            let got = grid.masses()[i] * bins as f64;
            assert!((got - 1.0).abs() < 0.08, "bin {i}: {got}");
        }
    }

    #[test]
    fn product_of_uniform_coordinates_mass_near_zero() {
        // f(x) = x1 x2 on U[0,1]^2: P(f <= 0.1) = 0.1 (1 - ln 0.1)
        let m = ProductMeasure::from_mixtures(vec![
            UniformMixture::single(0.0, 1.0),
            UniformMixture::single(0.0, 1.0),
        ])
        .unwrap();
        let p = crate::multilinear::SymmetricPolynomial::from_monomials(
            2,
            &[(vec![1, 1], 1.0)],
        )
        .unwrap();
        let n = 1_000_000;
        let grid = m
            .polynomial_image(
                &p,
                n,
                17,
                &Binning {
                    bins: 100,
                    range: Some(vec![(0.0, 1.0)]),
                },
            )
            .unwrap();
        let mass: f64 = grid.masses()[..10].iter().sum();
        let want = 0.1 * (1.0 - 0.1f64.ln());
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((mass - want).abs() < 3.0 * se, "mass {mass} want {want}");
    }

    #[test]
    fn isotropy_of_whitened_projection() {
        let m = ProductMeasure::from_mixtures(vec![
            UniformMixture::single(-0.5, 0.5),
            UniformMixture::single(-1.5, 1.5),
            UniformMixture::single(-0.25, 0.25),
        ])
        .unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        let rows = vec![vec![s, s, 0.0], vec![0.0, 0.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let thetas: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let checks = isotropy_second_moments(&m, &rows, &thetas, 400_000, 21).unwrap();
        for (theta, (mean, se)) in thetas.iter().zip(checks) {
            let want: f64 = theta.iter().map(|t| t * t).sum();
            assert!(
                (mean - want).abs() < 3.0 * se + 1e-3,
                "theta {theta:?}: {mean} vs {want} (se {se})"
            );
        }
    }

    #[test]
    fn grid_csv_shape() {
        let m = cube(1);
        let g = m
            .projection_image(&[vec![1.0]], 10_000, 1, &Binning::with_bins(8))
            .unwrap();
        let csv = g.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "bin_left,bin_right,mass");
        assert_eq!(lines.count(), 8);
    }
}
