//! Scenario runner: instantiates measures and polynomials, evaluates both
//! sides of a catalog of quantitative inequalities, and emits pass/fail
//! records with margins and error budgets.
//!
//! A scenario file is JSON with a `schema_version` field and a list of
//! scenarios; each scenario names its factor measures, an optional map
//! (linear functional, orthonormal projection, or polynomial), a list of
//! checks, and Monte Carlo parameters. Reports are deterministic given the
//! file: all sampling is seeded and scenarios never share state.

mod checks;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures1d::{BVDensity, MixtureComponent, UniformMixture};
use crate::multilinear::SymmetricPolynomial;
use crate::pushforward::ProductMeasure;
use crate::pwpoly::PiecewisePoly;
use crate::tol::EXACT_SLACK;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario file: {0}")]
    Schema(String),
    #[error("unsupported schema_version {0} (expected 1)")]
    SchemaVersion(u32),
    #[error("scenario `{id}`: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("scenario `{id}`: {msg}")]
    BadScenario { id: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn scenario_err<E: std::error::Error + Send + Sync + 'static>(
    id: &str,
) -> impl FnOnce(E) -> Error + '_ {
    move |source| Error::Scenario {
        id: id.to_string(),
        source: Box::new(source),
    }
}

// ---------------------------------------------------------------------------
// scenario model

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub factors: Vec<FactorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub mc: McParams,
    #[serde(default = "default_tolerance_scale")]
    pub tolerance_scale: f64,
}

fn default_tolerance_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McParams {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McParams {
    fn default() -> Self {
        Self {
            samples: 200_000,
            seed: 12345,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Uniform { a: f64, b: f64 },
    Triangle { a: f64, b: f64 },
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
    /// Random continuous piecewise-linear density pinned to zero at the
    /// support edges.
    PiecewiseLinear { seed: u64, pieces: usize },
    /// Random step density (exact mixture path).
    Step { seed: u64, pieces: usize },
    Mixture { components: Vec<MixtureComponent> },
    Density {
        breakpoints: Vec<f64>,
        pieces: Vec<Vec<f64>>,
    },
}

impl FactorSpec {
    /// Build the density and, when exact, its mixture.
    pub fn build(&self) -> Result<(BVDensity, Option<UniformMixture>), String> {
        match self {
            FactorSpec::Uniform { a, b } => {
                if b <= a {
                    return Err(format!("uniform needs a < b, got [{a}, {b}]"));
                }
                Ok((
                    BVDensity::uniform(*a, *b),
                    Some(UniformMixture::single(*a, *b)),
                ))
            }
            FactorSpec::Triangle { a, b } => {
                if b <= a {
                    return Err(format!("triangle needs a < b, got [{a}, {b}]"));
                }
                Ok((BVDensity::triangle(*a, *b), None))
            }
            FactorSpec::Trapezoid { a, b, c, d } => {
                if !(a < b && b <= c && c < d) {
                    return Err("trapezoid needs a < b <= c < d".to_string());
                }
                Ok((BVDensity::trapezoid(*a, *b, *c, *d), None))
            }
            FactorSpec::PiecewiseLinear { seed, pieces } => {
                Ok((random_piecewise_linear(*seed, *pieces), None))
            }
            FactorSpec::Step { seed, pieces } => {
                let d = random_step(*seed, *pieces);
                Ok((d, None))
            }
            FactorSpec::Mixture { components } => {
                let m = UniformMixture::new(components.clone()).map_err(|e| e.to_string())?;
                let d = crate::measures1d::reconstruct(&m).map_err(|e| e.to_string())?;
                Ok((d, Some(m)))
            }
            FactorSpec::Density {
                breakpoints,
                pieces,
            } => {
                let pp = PiecewisePoly::new(breakpoints.clone(), pieces.clone())
                    .map_err(|e| e.to_string())?;
                let d = BVDensity::new(pp).map_err(|e| e.to_string())?;
                Ok((d, None))
            }
        }
    }
}

/// Random continuous piecewise-linear density with `pieces` segments,
/// positive interior knot values, unit mass.
pub fn random_piecewise_linear(seed: u64, pieces: usize) -> BVDensity {
    let pieces = pieces.clamp(2, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(pieces + 1);
    let mut x = rng.gen_range(-1.0..1.0);
    pts.push((x, 0.0));
    for i in 1..=pieces {
        x += rng.gen_range(0.3..1.0);
        let y = if i == pieces { 0.0 } else { rng.gen_range(0.1..1.0) };
        pts.push((x, y));
    }
    let pp = PiecewisePoly::from_points(&pts).expect("increasing knots");
    let mass = pp.total_integral();
    BVDensity::new(pp.scale(1.0 / mass)).expect("normalized piecewise-linear density")
}

/// Random step density with `pieces` constant segments, unit mass.
pub fn random_step(seed: u64, pieces: usize) -> BVDensity {
    let pieces = pieces.clamp(1, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(pieces + 1);
    let mut x = rng.gen_range(-1.0..1.0);
    edges.push(x);
    for _ in 0..pieces {
        x += rng.gen_range(0.3..1.0);
        edges.push(x);
    }
    let values: Vec<f64> = (0..pieces).map(|_| rng.gen_range(0.1..1.0)).collect();
    let pp = PiecewisePoly::step(edges, values).expect("increasing edges");
    let mass = pp.total_integral();
    BVDensity::new(pp.scale(1.0 / mass)).expect("normalized step density")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Linear { a: Vec<f64> },
    Projection { rows: Vec<Vec<f64>> },
    Polynomial { poly: SymmetricPolynomial },
}

fn default_rhs_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    /// Mass and derivative-norm identities of the mixture decomposition.
    MixtureIdentity {
        #[serde(default)]
        factor: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slabs: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// Derivative norm of an exact 1-D linear image against
    /// `sqrt(2) max_j ||mu_j'||`.
    LinearImageTv {
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// Report-only grid estimate of directional derivative norms of a
    /// k-dimensional projection, plus the closed-form surface-integral
    /// reference when `gamma_c` is given.
    ProjectionGrid {
        #[serde(default = "default_directions")]
        directions: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bins: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_c: Option<f64>,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// Smoothed directional-derivative functional bound
    /// `(3 pi d + 1/2) ||D_theta mu|| eps^{-1/2}` over a fixed family of
    /// bounded test functions.
    SmoothedDirection {
        epsilons: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// Small-ball and Besov-ratio bounds for a polynomial image.
    BesovSmallball {
        sets: Vec<Vec<(f64, f64)>>,
        shifts: Vec<f64>,
        #[serde(default)]
        strict_sup: bool,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// L^p-norm bound for a polynomial image over a grid of exponents.
    LpBound {
        p_grid: Vec<f64>,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
    /// Total variation of two polynomial images against the
    /// Kantorovich-Rubinstein norm of their difference.
    KrTvBound {
        poly2: SymmetricPolynomial,
        #[serde(default = "default_kr_grid")]
        grid: usize,
        #[serde(default = "default_rhs_scale")]
        rhs_scale: f64,
    },
}

fn default_directions() -> usize {
    8
}

fn default_kr_grid() -> usize {
    1024
}

// ---------------------------------------------------------------------------
// report model

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    ReportOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub scenario: String,
    pub check: String,
    /// Tag identifying which inequality family the record verifies.
    pub anchor: String,
    #[serde(with = "crate::regularity::float_or_inf")]
    pub lhs: f64,
    #[serde(with = "crate::regularity::float_or_inf")]
    pub rhs: f64,
    #[serde(with = "crate::regularity::float_or_inf")]
    pub margin: f64,
    pub error_budget: f64,
    pub verdict: Verdict,
    pub borderline: bool,
    pub lhs_method: String,
    pub rhs_method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportRecord {
    /// Assemble a record with the standard verdict policy: fail when the
    /// margin undershoots the budget plus the exact-path slack; flag
    /// borderline rows whose magnitude sits inside the budget.
    #[allow(clippy::too_many_arguments)]
    fn judged(
        scenario: &str,
        check: String,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        error_budget: f64,
        tolerance_scale: f64,
        lhs_method: &str,
        rhs_method: &str,
        note: Option<String>,
    ) -> Self {
        let margin = rhs - lhs;
        let allowance = error_budget + EXACT_SLACK * tolerance_scale;
        let verdict = if margin >= -allowance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            scenario: scenario.to_string(),
            check,
            anchor: anchor.to_string(),
            lhs,
            rhs,
            margin,
            error_budget,
            verdict,
            borderline: margin.abs() <= error_budget,
            lhs_method: lhs_method.to_string(),
            rhs_method: rhs_method.to_string(),
            note,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn report_only(
        scenario: &str,
        check: String,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        error_budget: f64,
        lhs_method: &str,
        rhs_method: &str,
        note: Option<String>,
    ) -> Self {
        Self {
            scenario: scenario.to_string(),
            check,
            anchor: anchor.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            error_budget,
            verdict: Verdict::ReportOnly,
            borderline: false,
            lhs_method: lhs_method.to_string(),
            rhs_method: rhs_method.to_string(),
            note,
        }
    }

    /// Two-sided identity verdict: pass when |lhs - rhs| fits the budget.
    #[allow(clippy::too_many_arguments)]
    fn judged_identity(
        scenario: &str,
        check: String,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        error_budget: f64,
        tolerance_scale: f64,
        lhs_method: &str,
        rhs_method: &str,
        note: Option<String>,
    ) -> Self {
        let margin = rhs - lhs;
        let allowance = error_budget + EXACT_SLACK * tolerance_scale;
        let verdict = if margin.abs() <= allowance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            scenario: scenario.to_string(),
            check,
            anchor: anchor.to_string(),
            lhs,
            rhs,
            margin,
            error_budget,
            verdict,
            borderline: margin.abs() <= error_budget && margin != 0.0,
            lhs_method: lhs_method.to_string(),
            rhs_method: rhs_method.to_string(),
            note,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Wall-clock stamp (seconds since the epoch); the only
    /// run-to-run-varying field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub records: Vec<ReportRecord>,
}

impl Report {
    pub fn new(records: Vec<ReportRecord>) -> Self {
        Self {
            schema_version: 1,
            generated_at: None,
            records,
        }
    }

    pub fn stamped(mut self) -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.generated_at = Some(format!("unix:{secs}"));
        self
    }

    pub fn has_failures(&self) -> bool {
        self.records.iter().any(|r| r.verdict == Verdict::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    /// CSV with the columns `scenario,check,lhs,rhs,margin,budget,verdict`,
    /// floats rendered with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,check,lhs,rhs,margin,budget,verdict\n");
        for r in &self.records {
            let verdict = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::ReportOnly => "report-only",
            };
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.scenario, r.check, r.lhs, r.rhs, r.margin, r.error_budget, verdict
            );
        }
        out
    }

    /// One human-readable line per record.
    pub fn summary_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let verdict = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::ReportOnly => "report-only",
            };
            let _ = writeln!(
                out,
                "[{verdict}] {} / {} ({}): lhs={:.6e} rhs={:.6e} margin={:.3e} budget={:.3e}",
                r.scenario, r.check, r.anchor, r.lhs, r.rhs, r.margin, r.error_budget
            );
        }
        out
    }
}

// ---------------------------------------------------------------------------
// execution

pub fn parse_scenarios(text: &str) -> Result<ScenarioFile, Error> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if file.schema_version != 1 {
        return Err(Error::SchemaVersion(file.schema_version));
    }
    Ok(file)
}

pub fn load_scenarios(path: &std::path::Path) -> Result<ScenarioFile, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_scenarios(&text)
}

/// Execute every scenario in file order. Scenarios are independent; when
/// `threads > 1` they run concurrently but the report order is still the
/// file order.
pub fn run_scenarios(file: &ScenarioFile, threads: usize) -> Result<Vec<ReportRecord>, Error> {
    let n = file.scenarios.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let threads = threads.clamp(1, n);
    if threads == 1 {
        let mut records = Vec::new();
        for s in &file.scenarios {
            records.extend(run_scenario(s)?);
        }
        return Ok(records);
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<Vec<ReportRecord>, Error>>> = Vec::new();
    slots.resize_with(n, || None);
    let slots = std::sync::Mutex::new(slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_scenario(&file.scenarios[i]);
                slots.lock().expect("runner mutex")[i] = Some(result);
            });
        }
    });
    let mut records = Vec::new();
    for slot in slots.into_inner().expect("runner mutex") {
        records.extend(slot.expect("every scenario executed")?);
    }
    Ok(records)
}

/// Thread count from `SKOROHOD_THREADS`, defaulting to the machine's
/// available parallelism.
pub fn default_threads() -> usize {
    if let Ok(v) = std::env::var("SKOROHOD_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Execute one scenario's checks in order.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<ReportRecord>, Error> {
    if scenario.mc.samples < 10_000 {
        return Err(Error::BadScenario {
            id: scenario.id.clone(),
            msg: format!(
                "mc.samples = {} but Monte Carlo checks need at least 10000",
                scenario.mc.samples
            ),
        });
    }
    let mut factors = Vec::new();
    let mut mixtures = Vec::new();
    for (i, spec) in scenario.factors.iter().enumerate() {
        let (d, m) = spec.build().map_err(|msg| Error::BadScenario {
            id: scenario.id.clone(),
            msg: format!("factors[{i}]: {msg}"),
        })?;
        factors.push(d);
        mixtures.push(m);
    }
    let measure =
        ProductMeasure::from_factors(factors, mixtures).map_err(scenario_err(&scenario.id))?;
    let mut records = Vec::new();
    for check in &scenario.checks {
        records.extend(checks::run_check(scenario, &measure, check)?);
    }
    Ok(records)
}
