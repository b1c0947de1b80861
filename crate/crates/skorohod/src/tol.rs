//! Central tolerances and caps. Every threshold used by the library is
//! defined here rather than inlined at call sites.

/// Breakpoints closer than this are merged into one.
pub const BREAKPOINT_MERGE: f64 = 1e-12;

/// Root refinement stops when the bracket is this small (scaled by 1 + |x|).
pub const ROOT_TOL: f64 = 1e-12;

/// Hard cap on per-piece polynomial degree. Exceeding it is an error, not a
/// silent degradation.
pub const DEGREE_CAP: usize = 16;

/// A density must integrate to 1 within this.
pub const MASS_TOL: f64 = 1e-10;

/// A density may dip below zero by at most this (rounding slack).
pub const DENSITY_NEG_TOL: f64 = 1e-12;

/// Mixture weights must sum to 1 within this.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Slack added to every exact-path inequality verdict.
pub const EXACT_SLACK: f64 = 1e-9;

/// Maximum number of mixture components a decomposition may emit.
pub const COMPONENT_CAP: usize = 10_000;

/// Default level slabs per critical band in the decomposition sweep.
pub const DEFAULT_SLABS_PER_BAND: usize = 512;

/// Maximum number of product-mixture cells enumerated on the exact
/// linear-image path.
pub const CELL_CAP: usize = 100_000;

/// Maximum support-grid size accepted by the Kantorovich-Rubinstein solver.
pub const KR_GRID_CAP: usize = 4096;

/// Half-width of the neighbourhood excised around an integrable singularity.
pub const SINGULARITY_EXCISION: f64 = 1e-9;

/// Default random restarts for the sphere ascent estimating a leading-form
/// norm of degree three or higher.
pub const NORM_RESTARTS: usize = 64;

/// Default bins per axis for histogram images.
pub const DEFAULT_BINS: usize = 512;

/// An L^p integral larger than this is reported as infinite.
pub const LP_DIVERGENCE: f64 = 1e12;
