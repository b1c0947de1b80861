//! Level-set sweep turning a BV density into a convex mixture of uniform
//! distributions.
//!
//! Between consecutive critical levels of the density the superlevel set
//! `{rho > t}` is a fixed union of intervals whose endpoints move smoothly
//! with `t`. Each critical band is cut into level slabs; a slab contributes
//! one component per interval family, carrying the integrated interval
//! length as weight and the slab-averaged endpoints as its interval. For
//! affine endpoint trajectories (piecewise-linear densities) the slab
//! integrals are closed-form, which makes the mass and derivative-norm
//! identities exact at any slab count; endpoints frozen at jump
//! discontinuities make the reconstruction itself exact.

use super::{BVDensity, Error, MixtureComponent, UniformMixture};
use crate::numeric::{gauss_legendre, poly_deriv, poly_eval};
use crate::pwpoly::{roots_in_interval, PiecewisePoly, RootLocus};
use crate::tol::{COMPONENT_CAP, DEFAULT_SLABS_PER_BAND};

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    /// Level slabs per critical band (bands whose endpoints do not move
    /// collapse to a single slab).
    pub slabs_per_band: usize,
    /// Maximum number of emitted components.
    pub component_cap: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            slabs_per_band: DEFAULT_SLABS_PER_BAND,
            component_cap: COMPONENT_CAP,
        }
    }
}

/// Result of the sweep, with bookkeeping about how it was discretized.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub mixture: UniformMixture,
    /// Number of critical bands swept.
    pub bands: usize,
    /// Effective slabs per band after respecting the component cap.
    pub slabs_per_band: usize,
    /// True when every weight and endpoint came from a closed form
    /// (fixed or affine endpoint trajectories).
    pub exact: bool,
}

#[derive(Debug, Clone, Copy)]
enum Endpoint {
    /// Pinned at a jump discontinuity or support edge for the whole band.
    Fixed(f64),
    /// Crosses level `t` inside a monotone stretch of one piece.
    Crossing {
        piece: usize,
        seg_lo: f64,
        seg_hi: f64,
    },
}

struct Family {
    left: Endpoint,
    right: Endpoint,
}

struct Band {
    t_lo: f64,
    t_hi: f64,
    families: Vec<Family>,
    /// All endpoints fixed: one slab reproduces the band exactly.
    all_fixed: bool,
    /// Endpoint trajectories affine in the level.
    affine: bool,
}

/// Decompose with default options.
pub fn decompose(density: &BVDensity) -> Result<Decomposition, Error> {
    decompose_mixture(density, &DecomposeOptions::default())
}

pub fn decompose_mixture(
    density: &BVDensity,
    opts: &DecomposeOptions,
) -> Result<Decomposition, Error> {
    let rho = density.density();
    let levels = critical_levels(rho);
    let mut bands = Vec::new();
    for w in levels.windows(2) {
        let (t_lo, t_hi) = (w[0], w[1]);
        if t_hi - t_lo <= 1e-14 * (1.0 + t_hi.abs()) {
            continue;
        }
        if let Some(band) = analyze_band(rho, t_lo, t_hi) {
            bands.push(band);
        }
    }

    // Slab budget: collapse fixed bands to one slab, scale the rest down if
    // the requested resolution would blow through the component cap.
    let fixed_components: usize = bands
        .iter()
        .filter(|b| b.all_fixed)
        .map(|b| b.families.len())
        .sum();
    let moving_families: usize = bands
        .iter()
        .filter(|b| !b.all_fixed)
        .map(|b| b.families.len())
        .sum();
    let mut slabs = opts.slabs_per_band.max(1);
    if moving_families > 0 {
        let budget = opts
            .component_cap
            .saturating_sub(fixed_components)
            .max(moving_families);
        slabs = slabs.min(budget / moving_families).max(1);
    }
    if fixed_components + moving_families * slabs > opts.component_cap {
        return Err(Error::ComponentCap {
            count: fixed_components + moving_families * slabs,
            cap: opts.component_cap,
        });
    }

    let (gl_nodes, gl_weights) = gauss_legendre(3);
    let mut components: Vec<MixtureComponent> = Vec::new();
    let mut exact = true;
    for band in &bands {
        let band_slabs = if band.all_fixed { 1 } else { slabs };
        if !(band.all_fixed || band.affine) {
            exact = false;
        }
        let dt = (band.t_hi - band.t_lo) / band_slabs as f64;
        for s in 0..band_slabs {
            let tau0 = band.t_lo + dt * s as f64;
            let tau1 = tau0 + dt;
            let tm = 0.5 * (tau0 + tau1);
            for fam in &band.families {
                let (weight, a, b) = if band.all_fixed || band.affine {
                    // Midpoint values are the exact slab averages for affine
                    // trajectories, and the weight integral is exact too.
                    let a = solve_endpoint(rho, &fam.left, tm);
                    let b = solve_endpoint(rho, &fam.right, tm);
                    ((tau1 - tau0) * (b - a), a, b)
                } else {
                    let mut w = 0.0;
                    let mut abar = 0.0;
                    let mut bbar = 0.0;
                    for (x, gw) in gl_nodes.iter().zip(gl_weights.iter()) {
                        let t = tm + 0.5 * dt * x;
                        let a = solve_endpoint(rho, &fam.left, t);
                        let b = solve_endpoint(rho, &fam.right, t);
                        w += gw * (b - a);
                        abar += gw * a;
                        bbar += gw * b;
                    }
                    // GL weights sum to 2 on (-1, 1).
                    (w * 0.5 * dt, abar * 0.5, bbar * 0.5)
                };
                if weight > 1e-15 && b - a > 1e-12 {
                    components.push(MixtureComponent { weight, a, b });
                }
            }
        }
    }

    // Merge exact duplicates, then bring the total weight back to one
    // (quadrature drift on curved bands, dust dropped above).
    components.sort_by(|x, y| (x.a, x.b).partial_cmp(&(y.a, y.b)).unwrap());
    let mut merged: Vec<MixtureComponent> = Vec::new();
    for c in components {
        match merged.last_mut() {
            Some(last) if last.a == c.a && last.b == c.b => last.weight += c.weight,
            _ => merged.push(c),
        }
    }
    let total: f64 = merged.iter().map(|c| c.weight).sum();
    if total <= 0.0 {
        return Err(Error::EmptyMixture);
    }
    if (total - 1.0).abs() > 1e-13 {
        for c in merged.iter_mut() {
            c.weight /= total;
        }
    }
    let bands_count = bands.len();
    Ok(Decomposition {
        mixture: UniformMixture::new(merged)?,
        bands: bands_count,
        slabs_per_band: slabs,
        exact,
    })
}

/// All levels where the superlevel topology can change: zero, one-sided
/// limits at breakpoints, and interior critical values.
fn critical_levels(rho: &PiecewisePoly) -> Vec<f64> {
    let mut levels = vec![0.0];
    let m = rho.piece_count();
    for k in 0..m {
        levels.push(rho.limit_right_of(k));
        levels.push(rho.limit_left_of(k + 1));
        let (x0, x1) = rho.piece_bounds(k);
        let c = rho.piece_center(k);
        let d = poly_deriv(rho.piece_coeffs(k));
        for r in roots_in_interval(&d, x0 - c, x1 - c) {
            levels.push(poly_eval(rho.piece_coeffs(k), r));
        }
    }
    let max = rho.extrema().0;
    levels.push(max);
    levels.retain(|t| t.is_finite() && *t >= 0.0 && *t <= max + 1e-14 * (1.0 + max));
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + max));
    levels
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Grid,
    Root,
}

/// Interval families of the superlevel set on one critical band, probed at
/// the band midpoint.
fn analyze_band(rho: &PiecewisePoly, t_lo: f64, t_hi: f64) -> Option<Band> {
    let tm = 0.5 * (t_lo + t_hi);
    let (lo, hi) = rho.support();
    let span_tol = 1e-11 * (1.0 + hi.abs().max(lo.abs()));

    let mut bounds: Vec<(f64, Kind)> = rho
        .breakpoints()
        .iter()
        .map(|&b| (b, Kind::Grid))
        .collect();
    for r in rho.real_roots(tm) {
        match r {
            RootLocus::Point(x) => bounds.push((x, Kind::Root)),
            // flat stretches sit exactly at critical levels, not inside a
            // band; treat defensively as pinned boundaries
            RootLocus::Interval(a, b) => {
                bounds.push((a, Kind::Grid));
                bounds.push((b, Kind::Grid));
            }
        }
    }
    bounds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    bounds.dedup_by(|a, b| {
        if (a.0 - b.0).abs() <= span_tol {
            if a.1 == Kind::Root {
                b.1 = Kind::Root;
            }
            true
        } else {
            false
        }
    });

    let mut above = Vec::with_capacity(bounds.len().saturating_sub(1));
    for w in bounds.windows(2) {
        let probe = 0.5 * (w[0].0 + w[1].0);
        above.push(rho.eval(probe) > tm);
    }

    let mut families = Vec::new();
    let mut i = 0;
    while i < above.len() {
        if !above[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < above.len() && above[i] {
            i += 1;
        }
        let left = classify(rho, bounds[start], tm);
        let right = classify(rho, bounds[i], tm);
        families.push(Family { left, right });
    }
    if families.is_empty() {
        return None;
    }
    let all_fixed = families
        .iter()
        .all(|f| matches!(f.left, Endpoint::Fixed(_)) && matches!(f.right, Endpoint::Fixed(_)));
    let is_affine = |e: &Endpoint| match e {
        Endpoint::Fixed(_) => true,
        Endpoint::Crossing { piece, .. } => rho.piece_coeffs(*piece).len() <= 2,
    };
    let affine = families.iter().all(|f| is_affine(&f.left) && is_affine(&f.right));
    Some(Band {
        t_lo,
        t_hi,
        families,
        all_fixed,
        affine,
    })
}

/// Root boundaries move with the level inside one monotone stretch of one
/// piece; grid boundaries (breakpoints, support edges) are pinned for the
/// whole band.
fn classify(rho: &PiecewisePoly, bound: (f64, Kind), tm: f64) -> Endpoint {
    let (x, kind) = bound;
    if kind == Kind::Grid {
        return Endpoint::Fixed(x);
    }
    let (piece, center, coeffs) = match rho.piece_at(x) {
        Some(p) => p,
        None => return Endpoint::Fixed(x),
    };
    let (x0, x1) = rho.piece_bounds(piece);
    let mut cuts = vec![x0];
    for r in roots_in_interval(&poly_deriv(coeffs), x0 - center, x1 - center) {
        cuts.push(center + r);
    }
    cuts.push(x1);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Prefer the stretch that actually straddles the level at tm.
    let mut best: Option<(f64, f64, f64)> = None;
    for w in cuts.windows(2) {
        let (s_lo, s_hi) = (w[0], w[1]);
        if s_hi <= s_lo {
            continue;
        }
        let flo = poly_eval(coeffs, s_lo - center) - tm;
        let fhi = poly_eval(coeffs, s_hi - center) - tm;
        if flo * fhi <= 0.0 {
            let dist = if x < s_lo {
                s_lo - x
            } else if x > s_hi {
                x - s_hi
            } else {
                0.0
            };
            if best.map_or(true, |(d, _, _)| dist < d) {
                best = Some((dist, s_lo, s_hi));
            }
        }
    }
    match best {
        Some((_, seg_lo, seg_hi)) => Endpoint::Crossing {
            piece,
            seg_lo,
            seg_hi,
        },
        None => Endpoint::Fixed(x),
    }
}

fn solve_endpoint(rho: &PiecewisePoly, e: &Endpoint, t: f64) -> f64 {
    match e {
        Endpoint::Fixed(x) => *x,
        Endpoint::Crossing {
            piece,
            seg_lo,
            seg_hi,
        } => {
            let c = rho.piece_center(*piece);
            let coeffs = rho.piece_coeffs(*piece);
            if coeffs.len() == 2 {
                return c + (t - coeffs[0]) / coeffs[1];
            }
            let mut shifted = coeffs.to_vec();
            if shifted.is_empty() {
                shifted.push(0.0);
            }
            shifted[0] -= t;
            let roots = roots_in_interval(&shifted, seg_lo - c, seg_hi - c);
            match roots.len() {
                0 => {
                    // level grazes the segment boundary; pick the closer end
                    let flo = poly_eval(coeffs, seg_lo - c);
                    let fhi = poly_eval(coeffs, seg_hi - c);
                    if (flo - t).abs() <= (fhi - t).abs() {
                        *seg_lo
                    } else {
                        *seg_hi
                    }
                }
                _ => c + roots[0],
            }
        }
    }
}
