//! Computation with bounded-variation probability densities on the line and
//! their images under linear and polynomial maps.
//!
//! The crate provides, end to end:
//!
//! * [`pwpoly`] — an exact piecewise-polynomial engine (evaluation,
//!   integration, convolution, total variation, extrema, root finding);
//! * [`measures1d`] — one-dimensional densities of bounded variation:
//!   derivative norms, decomposition into convex mixtures of uniform
//!   distributions, sampling, and exact pushforwards under a univariate
//!   polynomial;
//! * [`multilinear`] — symmetric multilinear forms and polynomials on R^n,
//!   directional derivatives and leading-form norms;
//! * [`pushforward`] — product measures and their images: exact densities of
//!   linear functionals via mixture expansion and convolution, sampled
//!   projections and polynomial images as histograms;
//! * [`regularity`] — shift-L1 distances, Nikolskii-Besov ratios, L^p norms,
//!   small-ball probabilities, total-variation and Kantorovich-Rubinstein
//!   distances, and directional derivative-norm estimates on grids;
//! * [`verify`] — a scenario runner that evaluates both sides of a catalog of
//!   quantitative inequalities and emits pass/fail records with margins and
//!   error budgets;
//! * [`cli`] — the implementation behind the `skorohod` command-line tool.
//!
//! The `examples/` directory of this crate is the front door: each example is
//! a small runnable program exercising one capability. The single `skorohod`
//! binary exposes the same functionality for batch use.

pub mod cli;
pub mod measures1d;
pub mod multilinear;
pub(crate) mod numeric;
pub mod pushforward;
pub mod pwpoly;
pub mod regularity;
pub mod tol;
pub mod verify;

pub use measures1d::{BVDensity, DensityEvaluator, UniformMixture};
pub use multilinear::{SymmetricForm, SymmetricPolynomial};
pub use pushforward::{GridDensity, ProductMeasure};
pub use pwpoly::PiecewisePoly;
pub use regularity::MetricReport;
