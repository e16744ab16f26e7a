//! Experiment configuration, orchestration and report emission.
//!
//! A run validates the profile, samples pointwise quantities, runs the
//! comparison and asymptotic suites (and the Jacobi suite when configured),
//! and assembles an [`ExperimentReport`]. Everything except the `timing`
//! section is a deterministic function of the configuration; the
//! `determinism_hash` is the SHA-256 of that part.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comparison::{
    check_bishop_gromov, check_jacobi_bishop_gromov, check_slope_bound, geometric_grid,
    lemma22_limits, log_spaced_pairs, ComparisonError, InequalityReport, MeanValueRadii,
    SlopeSource,
};
use crate::geometry::{GeometryError, PointQuantities, WarpedManifold};
use crate::jacobi::{integrate_all, JacobiError, RadialCurvatureField, DEFAULT_DIRECTIONS};
use crate::profile::{ProfileError, RadialProfile, ValidationReport};
use crate::quadrature::{QuadError, QuadTolerance};
use crate::theorem::{
    corollary_experiment, estimate_avr, flatness_test, lemma32_experiment,
    main_theorem_consistency, main_theorem_experiment, pinching_infimum, ConvergenceReport,
    Diagnostic, PinchingReport, TheoremError, TheoremResult, VerdictTolerance,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_DUAL_PATH: i32 = 4;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Comparison(#[from] ComparisonError),
    #[error(transparent)]
    Theorem(#[from] TheoremError),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// True for internal two-route consistency failures.
    pub fn is_dual_path(&self) -> bool {
        let quad = |q: &QuadError| matches!(q, QuadError::DualPathMismatch { .. });
        let theorem = |t: &TheoremError| match t {
            TheoremError::AvrDisagreement { .. } => true,
            TheoremError::Quad(q) => quad(q),
            _ => false,
        };
        match self {
            ExperimentError::Quad(q) => quad(q),
            ExperimentError::Theorem(t) => theorem(t),
            ExperimentError::Comparison(c) => match c {
                ComparisonError::Quad(q) => quad(q),
                ComparisonError::Theorem(t) => theorem(t),
                _ => false,
            },
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_dual_path() {
            EXIT_DUAL_PATH
        } else {
            EXIT_ERROR
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    BishopGromov,
    SlopeBound,
    Lemma22,
    Avr,
    MainTheorem,
    Corollary,
    Lemma32,
    Pinching,
    Flatness,
    Riccati,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::BishopGromov,
        Suite::SlopeBound,
        Suite::Lemma22,
        Suite::Avr,
        Suite::MainTheorem,
        Suite::Corollary,
        Suite::Lemma32,
        Suite::Pinching,
        Suite::Flatness,
        Suite::Riccati,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::BishopGromov => "bishop_gromov",
            Suite::SlopeBound => "slope_bound",
            Suite::Lemma22 => "lemma22",
            Suite::Avr => "avr",
            Suite::MainTheorem => "main_theorem",
            Suite::Corollary => "corollary",
            Suite::Lemma32 => "lemma32",
            Suite::Pinching => "pinching",
            Suite::Flatness => "flatness",
            Suite::Riccati => "riccati",
        }
    }
}

/// Radii `base·factorᵏ`, `k = 0..count`, dropping any beyond `r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RSequenceSpec {
    pub base: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for RSequenceSpec {
    fn default() -> Self {
        Self {
            base: 10.0,
            factor: 2.0,
            count: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiccatiConfig {
    /// `isotropic:<profile>`, `constant:<k>` or `aniso:<k,β>`.
    pub field: String,
    #[serde(default = "default_riccati_h")]
    pub h: f64,
    #[serde(default = "default_riccati_t_max")]
    pub t_max: f64,
    #[serde(default = "default_directions")]
    pub n_directions: usize,
    #[serde(default = "default_riccati_points")]
    pub grid_size: usize,
}

fn default_riccati_h() -> f64 {
    1e-3
}
fn default_riccati_t_max() -> f64 {
    50.0
}
fn default_directions() -> usize {
    DEFAULT_DIRECTIONS
}
fn default_riccati_points() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub json: Option<String>,
    pub csv_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub profile_spec: String,
    /// Largest sample radius; defaults to the last radius of `r_sequence`.
    pub r_max: Option<f64>,
    pub r_sequence: RSequenceSpec,
    pub eps: f64,
    pub annulus_base: f64,
    pub quad: QuadTolerance,
    pub verdict: VerdictTolerance,
    pub lemma22_verdict: VerdictTolerance,
    pub pairs: usize,
    pub slope_grid: usize,
    pub pinching_t_max: f64,
    pub pinching_grid: usize,
    pub riccati: Option<RiccatiConfig>,
    /// Suites to run; all of them when absent (the Jacobi suite only if
    /// `riccati` is set).
    pub suites: Option<Vec<Suite>>,
    /// Record wall-clock timing. Disable for byte-identical output.
    pub timing: bool,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile_spec: "builtin:euclidean".to_string(),
            r_max: None,
            r_sequence: RSequenceSpec::default(),
            eps: 0.2,
            annulus_base: 1.0,
            quad: QuadTolerance::default(),
            verdict: VerdictTolerance::default(),
            lemma22_verdict: VerdictTolerance {
                rel: 0.02,
                abs: 0.05,
            },
            pairs: 64,
            slope_grid: 256,
            pinching_t_max: 1e3,
            pinching_grid: 256,
            riccati: None,
            suites: None,
            timing: true,
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn radii(&self) -> Vec<f64> {
        let s = &self.r_sequence;
        let cap = self.r_max.unwrap_or(f64::INFINITY);
        (0..s.count)
            .map(|k| s.base * s.factor.powi(k as i32))
            .filter(|&r| r <= cap * (1.0 + 1e-12))
            .collect()
    }

    /// Largest radius the profile must be valid on.
    pub fn domain(&self) -> f64 {
        let last = self.radii().last().copied().unwrap_or(0.0);
        ((1.0 + self.eps) * last).max(self.pinching_t_max)
    }

    pub fn suites(&self) -> Vec<Suite> {
        let mut suites = match &self.suites {
            Some(list) => list.clone(),
            None => Suite::ALL
                .into_iter()
                .filter(|s| *s != Suite::Riccati || self.riccati.is_some())
                .collect(),
        };
        suites.sort();
        suites.dedup();
        suites
    }

    pub fn check(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        let s = &self.r_sequence;
        if !(s.base > 0.0 && s.factor > 1.0 && s.base.is_finite() && s.factor.is_finite()) {
            return bad(format!(
                "r_sequence needs base > 0 and factor > 1, got {s:?}"
            ));
        }
        if self.radii().len() < crate::theorem::MIN_SAMPLES {
            return bad(format!(
                "r_sequence must keep at least {} radii below r_max",
                crate::theorem::MIN_SAMPLES
            ));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} must lie in (0, 1)", self.eps));
        }
        if !(self.quad.rel_tol > 0.0 && self.quad.abs_tol > 0.0) {
            return bad("quadrature tolerances must be positive".into());
        }
        if !(self.annulus_base > 0.0 && self.annulus_base < self.radii()[0]) {
            return bad(format!(
                "annulus_base = {} must lie in (0, {})",
                self.annulus_base,
                self.radii()[0]
            ));
        }
        if self.pairs == 0 || self.slope_grid == 0 {
            return bad("pairs and slope_grid must be positive".into());
        }
        if !(self.pinching_t_max > 0.0) || self.pinching_grid < 64 {
            return bad("pinching needs t_max > 0 and at least 64 grid points".into());
        }
        if let Some(r) = &self.riccati {
            if !(r.h > 0.0 && r.t_max >= 10.0 * r.h && r.n_directions > 0 && r.grid_size > 0) {
                return bad(format!("invalid riccati settings {r:?}"));
            }
        }
        if self.suites().contains(&Suite::Riccati) && self.riccati.is_none() {
            return bad("the riccati suite needs a `riccati` section".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteVerdict {
    pub suite: Suite,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub direction: usize,
    pub theta: f64,
    pub conjugate_point: Option<f64>,
    pub slope_bound: InequalityReport,
    pub bishop_gromov: InequalityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiResult {
    pub field: String,
    pub h: f64,
    pub t_max: f64,
    /// Whether the radial lemmas apply: `tr R_rad ≥ 0` on the grid and no
    /// conjugate point in any direction.
    pub asserted: bool,
    pub directions: Vec<DirectionResult>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Results {
    pub quantities: Vec<PointQuantities>,
    pub inequalities: Vec<InequalityReport>,
    pub mean_value_radii: Vec<MeanValueRadii>,
    pub avr: Option<ConvergenceReport>,
    pub avr_volume: Option<ConvergenceReport>,
    pub theorems: Vec<TheoremResult>,
    pub consistency: Option<Diagnostic>,
    pub pinching: Option<PinchingReport>,
    pub flat: Option<bool>,
    pub riccati: Option<RiccatiResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    VerdictFailure,
    ValidationFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub suites: Vec<(String, f64)>,
}

/// Field order here is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub status: Status,
    pub validation: ValidationReport,
    pub results: Option<Results>,
    pub verdicts: Vec<SuiteVerdict>,
    pub determinism_hash: String,
    pub timing: Option<Timing>,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => EXIT_OK,
            Status::VerdictFailure => EXIT_VERDICT,
            Status::ValidationFailure => EXIT_VALIDATION,
        }
    }

    /// SHA-256 over everything except `timing` and the hash itself.
    pub fn compute_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            version: &'a str,
            config: &'a ExperimentConfig,
            status: Status,
            validation: &'a ValidationReport,
            results: &'a Option<Results>,
            verdicts: &'a [SuiteVerdict],
        }
        let bytes = serde_json::to_vec(&Hashed {
            version: &self.version,
            config: &self.config,
            status: self.status,
            validation: &self.validation,
            results: &self.results,
            verdicts: &self.verdicts,
        })
        .expect("report serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}

struct Clock {
    enabled: bool,
    start: Instant,
    suites: Vec<(String, f64)>,
}

impl Clock {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        if self.enabled {
            self.suites
                .push((name.to_string(), t0.elapsed().as_secs_f64()));
        }
        out
    }

    fn finish(self) -> Option<Timing> {
        self.enabled.then(|| Timing {
            total_seconds: self.start.elapsed().as_secs_f64(),
            suites: self.suites,
        })
    }
}

/// Parses and validates the configured profile on `(0, config.domain()]`.
pub fn load_profile(config: &ExperimentConfig) -> Result<RadialProfile, ExperimentError> {
    Ok(RadialProfile::from_spec(
        &config.profile_spec,
        config.domain(),
    )?)
}

fn inverse_theorem(
    name: &str,
    convergence: ConvergenceReport,
    predicted: f64,
    tol: &VerdictTolerance,
) -> TheoremResult {
    TheoremResult {
        name: name.to_string(),
        verdict: tol.accepts(convergence.limit, predicted),
        convergence,
        predicted: Some(predicted),
        diagnostics: Vec::new(),
    }
}

/// The Jacobi suite on its own; needs no warped profile.
pub fn run_riccati(cfg: &RiccatiConfig) -> Result<RiccatiResult, ExperimentError> {
    let field = RadialCurvatureField::from_label(&cfg.field, cfg.n_directions)?;
    let solutions = integrate_all(&field, cfg.t_max, cfg.h)?;
    let lo = 10.0 * cfg.h;
    let grid = geometric_grid(lo, cfg.t_max, cfg.grid_size);
    let pairs = log_spaced_pairs(lo, cfg.t_max, cfg.grid_size.min(64));
    let mut directions = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        directions.push(DirectionResult {
            direction: sol.direction,
            theta: sol.theta,
            conjugate_point: sol.conjugate_point,
            slope_bound: check_slope_bound(SlopeSource::Jacobi(sol), &grid)?,
            bishop_gromov: check_jacobi_bishop_gromov(sol, &pairs)?,
        });
    }
    let asserted =
        field.trace_nonnegative(&grid) && directions.iter().all(|d| d.conjugate_point.is_none());
    Ok(RiccatiResult {
        field: field.label().to_string(),
        h: cfg.h,
        t_max: cfg.t_max,
        asserted,
        directions,
    })
}

/// Runs every requested suite. A profile that fails validation yields a
/// report holding only the validation section.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.check()?;
    let mut clock = Clock {
        enabled: config.timing,
        start: Instant::now(),
        suites: Vec::new(),
    };
    let profile = clock.time("validate", || load_profile(config))?;
    let validation = profile.validation().clone();
    if !validation.passed {
        let mut report = ExperimentReport {
            version: VERSION.to_string(),
            config: config.clone(),
            status: Status::ValidationFailure,
            validation,
            results: None,
            verdicts: Vec::new(),
            determinism_hash: String::new(),
            timing: None,
        };
        report.determinism_hash = report.compute_hash();
        report.timing = clock.finish();
        return Ok(report);
    }
    let m = WarpedManifold::new(profile)?;
    let rs = config.radii();
    let r_last = *rs.last().expect("checked");
    let tol = &config.quad;
    let suites = config.suites();
    let wants = |s: Suite| suites.contains(&s);
    let mut res = Results::default();
    let mut verdicts = Vec::new();

    res.quantities = clock.time("quantities", || {
        rs.iter()
            .map(|&r| m.point_curvatures(r))
            .collect::<Result<Vec<_>, _>>()
    })?;

    if wants(Suite::BishopGromov) {
        let rep = clock.time("bishop_gromov", || {
            check_bishop_gromov(
                &m,
                &log_spaced_pairs(0.1f64.min(r_last), r_last, config.pairs),
                tol,
            )
        })?;
        verdicts.push(SuiteVerdict {
            suite: Suite::BishopGromov,
            verdict: rep.passed(),
        });
        res.inequalities.push(rep);
    }
    if wants(Suite::SlopeBound) {
        let grid = geometric_grid(1e-3f64.min(r_last), r_last, config.slope_grid);
        let rep = clock.time("slope_bound", || {
            check_slope_bound(SlopeSource::Warped(&m), &grid)
        })?;
        verdicts.push(SuiteVerdict {
            suite: Suite::SlopeBound,
            verdict: rep.passed(),
        });
        res.inequalities.push(rep);
    }

    let needs_avr = [
        Suite::Avr,
        Suite::Lemma22,
        Suite::MainTheorem,
        Suite::Corollary,
    ]
    .into_iter()
    .any(wants);
    let avr = if needs_avr {
        Some(clock.time("avr", || estimate_avr(&m, &rs, tol))?)
    } else {
        None
    };
    if let Some(avr) = &avr {
        if wants(Suite::Avr) {
            verdicts.push(SuiteVerdict {
                suite: Suite::Avr,
                verdict: (-1e-3..=1.0 + 1e-3).contains(&avr.limit()),
            });
            res.avr = Some(avr.sphere.clone());
            res.avr_volume = Some(avr.volume.clone());
        }
    }
    let v = avr.as_ref().map_or(f64::NAN, |a| a.limit());

    if wants(Suite::Lemma22) {
        let limits = clock.time("lemma22", || {
            lemma22_limits(&m, config.annulus_base, config.eps, &rs, tol)
        })?;
        let four_pi_v = 4.0 * std::f64::consts::PI * v;
        let upper = inverse_theorem(
            "lemma22_upper",
            limits.upper,
            four_pi_v * (-2.0 - config.eps),
            &config.lemma22_verdict,
        );
        let lower = inverse_theorem(
            "lemma22_lower",
            limits.lower,
            four_pi_v * (-2.0 + config.eps),
            &config.lemma22_verdict,
        );
        verdicts.push(SuiteVerdict {
            suite: Suite::Lemma22,
            verdict: upper.verdict && lower.verdict,
        });
        res.theorems.push(upper);
        res.theorems.push(lower);
        res.mean_value_radii = limits.radii;
    }
    let mut main = None;
    let mut corollary = None;
    if wants(Suite::MainTheorem) {
        let r = clock.time("main_theorem", || {
            main_theorem_experiment(&m, &rs, config.annulus_base, tol, &config.verdict)
        })?;
        main = Some(r);
    }
    if wants(Suite::Corollary) {
        let r = clock.time("corollary", || {
            corollary_experiment(&m, &rs, tol, &config.verdict)
        })?;
        corollary = Some(r);
    }
    if let (Some(a), Some(b), Some(avr)) = (&main, &corollary, &avr) {
        res.consistency = Some(main_theorem_consistency(a, b, avr));
    }
    if let Some(r) = main {
        let ok = r.verdict && res.consistency.as_ref().is_none_or(|d| d.passed);
        verdicts.push(SuiteVerdict {
            suite: Suite::MainTheorem,
            verdict: ok,
        });
        res.theorems.push(r);
    }
    if let Some(r) = corollary {
        verdicts.push(SuiteVerdict {
            suite: Suite::Corollary,
            verdict: r.verdict,
        });
        res.theorems.push(r);
    }
    if wants(Suite::Lemma32) {
        let r = clock.time("lemma32", || lemma32_experiment(&m, &rs, tol))?;
        verdicts.push(SuiteVerdict {
            suite: Suite::Lemma32,
            verdict: r.verdict,
        });
        res.theorems.push(r);
    }

    let mut pinching = None;
    if wants(Suite::Pinching) || wants(Suite::Flatness) {
        pinching = Some(clock.time("pinching", || {
            pinching_infimum(&m, config.pinching_t_max, config.pinching_grid)
        })?);
    }
    if wants(Suite::Pinching) {
        let p = pinching.expect("computed above");
        // A non-flat complete manifold with a pole cannot be uniformly pinched.
        verdicts.push(SuiteVerdict {
            suite: Suite::Pinching,
            verdict: p.flat || p.eps_star <= 1e-3,
        });
        res.pinching = Some(p);
    }
    if wants(Suite::Flatness) {
        let flat = clock.time("flatness", || flatness_test(&m, config.pinching_t_max))?;
        let p = pinching.expect("computed above");
        verdicts.push(SuiteVerdict {
            suite: Suite::Flatness,
            verdict: flat == p.flat,
        });
        res.flat = Some(flat);
    }
    if wants(Suite::Riccati) {
        let cfg = config.riccati.as_ref().expect("checked");
        let r = clock.time("riccati", || run_riccati(cfg))?;
        verdicts.push(SuiteVerdict {
            suite: Suite::Riccati,
            verdict: riccati_verdict(&r),
        });
        res.riccati = Some(r);
    }

    verdicts.sort_by_key(|v| v.suite);
    let status = if verdicts.iter().all(|v| v.verdict) {
        Status::Ok
    } else {
        Status::VerdictFailure
    };
    let mut report = ExperimentReport {
        version: VERSION.to_string(),
        config: config.clone(),
        status,
        validation,
        results: Some(res),
        verdicts,
        determinism_hash: String::new(),
        timing: None,
    };
    report.determinism_hash = report.compute_hash();
    report.timing = clock.finish();
    Ok(report)
}

/// Violations only count when the radial lemmas apply to the field.
pub fn riccati_verdict(r: &RiccatiResult) -> bool {
    !r.asserted
        || r.directions
            .iter()
            .all(|d| d.slope_bound.passed() && d.bishop_gromov.passed())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Pretty-printed JSON with keys in struct order and shortest round-trip floats.
pub fn emit_json(report: &ExperimentReport) -> Result<String, ExperimentError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_report(text: &str) -> Result<ExperimentReport, ExperimentError> {
    Ok(serde_json::from_str(text)?)
}

/// Every convergence sequence in the report as `(file name, CSV text)` with
/// header `r,value,fit_residual`.
pub fn emit_csv(report: &ExperimentReport) -> Result<Vec<(String, String)>, ExperimentError> {
    let Some(res) = &report.results else {
        return Ok(Vec::new());
    };
    let mut tables: Vec<(String, &ConvergenceReport)> = Vec::new();
    if let Some(a) = &res.avr {
        tables.push(("avr".into(), a));
    }
    if let Some(a) = &res.avr_volume {
        tables.push(("avr_volume".into(), a));
    }
    for t in &res.theorems {
        tables.push((t.name.clone(), &t.convergence));
    }
    tables
        .into_iter()
        .map(|(name, conv)| {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["r", "value", "fit_residual"])?;
            for s in &conv.samples {
                w.serialize((s.r, s.value, s.fit_residual))?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok((
                format!("{name}.csv"),
                String::from_utf8(bytes).expect("ascii"),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(spec: &str) -> ExperimentConfig {
        ExperimentConfig {
            profile_spec: spec.to_string(),
            r_sequence: RSequenceSpec {
                base: 10.0,
                factor: 2.0,
                count: 5,
            },
            pairs: 16,
            slope_grid: 32,
            timing: false,
            ..Default::default()
        }
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c =
            ExperimentConfig::from_json(r#"{"profile_spec": "builtin:cone_tanh[0.5]"}"#).unwrap();
        assert_eq!(c.radii().len(), 8);
        assert_eq!(c.radii()[7], 1280.0);
        assert_eq!(c.domain(), 1536.0);
        let c = ExperimentConfig::from_json(r#"{"profile_spec": "t", "r_max": 300}"#).unwrap();
        assert_eq!(c.radii(), vec![10.0, 20.0, 40.0, 80.0, 160.0]);
        assert!(ExperimentConfig::from_json(r#"{"eps": 1.5}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"suites": ["riccati"]}"#).is_err());
    }

    #[test]
    fn euclidean_run() {
        let r = run_experiment(&quick("builtin:euclidean")).unwrap();
        assert_eq!(r.status, Status::Ok, "{:?}", r.verdicts);
        assert_eq!(r.exit_code(), 0);
        let res = r.results.as_ref().unwrap();
        let main = res
            .theorems
            .iter()
            .find(|t| t.name == "main_theorem")
            .unwrap();
        assert!(main.convergence.limit.abs() < 1e-9);
        let suites: Vec<Suite> = r.verdicts.iter().map(|v| v.suite).collect();
        assert_eq!(suites, Suite::ALL[..9].to_vec());
        let csv = emit_csv(&r).unwrap();
        let (_, main_csv) = csv.iter().find(|(n, _)| n == "main_theorem.csv").unwrap();
        let mut lines = main_csv.lines();
        assert_eq!(lines.next(), Some("r,value,fit_residual"));
        for line in lines {
            let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn validation_failure_report() {
        let r = run_experiment(&quick("t + t^2")).unwrap();
        assert_eq!(r.status, Status::ValidationFailure);
        assert_eq!(r.exit_code(), EXIT_VALIDATION);
        assert!(r.results.is_none() && r.verdicts.is_empty());
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let mut c = quick("builtin:cone_tanh[0.5]");
        c.riccati = Some(RiccatiConfig {
            field: "aniso:0.5,0.5".into(),
            h: 1e-2,
            t_max: 10.0,
            n_directions: 4,
            grid_size: 32,
        });
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        let ja = emit_json(&a).unwrap();
        assert_eq!(ja, emit_json(&b).unwrap());
        assert_eq!(parse_report(&ja).unwrap(), a);
        assert_eq!(a.compute_hash(), a.determinism_hash);
        assert!(
            a.results
                .as_ref()
                .unwrap()
                .riccati
                .as_ref()
                .unwrap()
                .asserted
        );
        assert_eq!(a.status, Status::Ok, "{:?}", a.verdicts);

        c.timing = true;
        let t = run_experiment(&c).unwrap();
        assert!(t.timing.is_some());
        assert_eq!(t.compute_hash(), t.determinism_hash);
    }
}
