//! Radial profiles `φ(t)` describing rotationally symmetric metrics
//! `dr² + φ(r)²·g_{S²}`.
//!
//! Profiles are written in a small expression language (see [`parser`]),
//! evaluated as second-order jets, and validated on a sample grid for the
//! pole conditions `φ(0) = 0`, `φ'(0) = 1`, `φ > 0` and for nonnegative Ricci
//! curvature, which for warped products is the pair
//! `-φ'' ≥ 0` and `φ φ'' ≤ 1 - φ'²`.
//!
//! Validation is grid-based: it certifies the sampled radii only.

mod expr;
mod jet;
mod parser;

pub use expr::{BinaryOp, Node, ProfileExpr, UnaryOp};
pub use jet::Jet2;
pub use parser::parse_profile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius at which the pole conditions are probed.
pub const POLE_PROBE_T: f64 = 1e-8;
/// Tolerance for `φ(0) = 0` and `φ'(0) = 1` at the probe radius.
pub const POLE_TOLERANCE: f64 = 1e-6;
/// Relative rounding headroom for the curvature-sign conditions.
pub const SIGN_TOLERANCE: f64 = 1e-10;
/// Domain on which builtin profiles are validated.
pub const BUILTIN_T_MAX: f64 = 1e4;
pub const DEFAULT_GRID_SIZE: usize = 256;
pub const MIN_GRID_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} must be a numeric literal")]
    NonConstantExponent { offset: usize },
    #[error("domain error at t = {t}: {what} ({value})")]
    Domain {
        t: f64,
        what: &'static str,
        value: f64,
    },
    #[error("unknown builtin profile `{0}`")]
    UnknownBuiltin(String),
    #[error("invalid parameters for builtin `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("invalid validation request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub condition: String,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub failures: Vec<ValidationFailure>,
    pub grid: Vec<f64>,
}

/// A profile expression together with its validated domain `(0, t_max]`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    source: String,
    expr: ProfileExpr,
    t_max: f64,
    validation: ValidationReport,
}

impl RadialProfile {
    /// Parses and validates `src` (either DSL source or `builtin:name[params]`).
    pub fn from_spec(spec: &str, t_max: f64) -> Result<Self, ProfileError> {
        match spec.trim().strip_prefix("builtin:") {
            Some(rest) => {
                let (name, params) = split_builtin(rest)?;
                builtin_profile_on(&name, &params, t_max)
            }
            None => Self::from_source(spec, t_max, DEFAULT_GRID_SIZE),
        }
    }

    pub fn from_source(src: &str, t_max: f64, grid_size: usize) -> Result<Self, ProfileError> {
        let expr = parse_profile(src)?;
        Self::from_expr(src.trim().to_string(), expr, t_max, grid_size)
    }

    pub fn from_expr(
        source: String,
        expr: ProfileExpr,
        t_max: f64,
        grid_size: usize,
    ) -> Result<Self, ProfileError> {
        let validation = validate_pole_profile(&expr, t_max, grid_size)?;
        Ok(Self {
            source,
            expr,
            t_max,
            validation,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &ProfileExpr {
        &self.expr
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    pub fn jet(&self, t: f64) -> Result<Jet2, ProfileError> {
        self.expr.eval_jet2(t)
    }
}

/// Sample radii used by validation: a geometric grid resolving the pole
/// region merged with a uniform grid resolving large radii.
pub fn validation_grid(t_max: f64, grid_size: usize) -> Vec<f64> {
    let t_min = t_max * 1e-6;
    let ratio = (t_max / t_min).ln();
    let n = grid_size.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|i| t_min * (ratio * i as f64 / (n - 1) as f64).exp())
        .chain((1..=n).map(|i| t_max * i as f64 / n as f64))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    if let Some(last) = grid.last_mut() {
        *last = t_max;
    }
    grid
}

/// Checks the pole and Ricci-sign conditions on a sample grid over `(0, t_max]`.
///
/// Evaluation failures are reported as `evaluation` failures (with value 0)
/// rather than returned as errors.
pub fn validate_pole_profile(
    expr: &ProfileExpr,
    t_max: f64,
    grid_size: usize,
) -> Result<ValidationReport, ProfileError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(ProfileError::BadRequest(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    if grid_size < MIN_GRID_SIZE {
        return Err(ProfileError::BadRequest(format!(
            "grid_size must be at least {MIN_GRID_SIZE}, got {grid_size}"
        )));
    }
    let mut failures = Vec::new();
    let mut fail = |condition: &str, t: f64, value: f64| {
        failures.push(ValidationFailure {
            condition: condition.to_string(),
            t,
            value,
        })
    };

    match expr.eval_jet2(POLE_PROBE_T) {
        Ok(j) => {
            if j.v.abs() > POLE_TOLERANCE {
                fail("pole_value", POLE_PROBE_T, j.v);
            }
            if (j.d1 - 1.0).abs() > POLE_TOLERANCE {
                fail("pole_slope", POLE_PROBE_T, j.d1);
            }
        }
        Err(_) => fail("evaluation", POLE_PROBE_T, 0.0),
    }

    let grid = validation_grid(t_max, grid_size);
    for &t in &grid {
        let j = match expr.eval_jet2(t) {
            Ok(j) => j,
            Err(_) => {
                fail("evaluation", t, 0.0);
                continue;
            }
        };
        if j.v <= 0.0 {
            fail("positivity", t, j.v);
        }
        // -φ'' ≥ 0
        if -j.d2 < -SIGN_TOLERANCE * (1.0 + j.d2.abs()) {
            fail("radial_ricci", t, -j.d2);
        }
        // 1 - φ'² - φφ'' ≥ 0
        let lhs = j.v * j.d2;
        let rhs = 1.0 - j.d1 * j.d1;
        if lhs > rhs + SIGN_TOLERANCE * (1.0 + lhs.abs() + rhs.abs()) {
            fail("tangential_ricci", t, rhs - lhs);
        }
    }
    Ok(ValidationReport {
        passed: failures.is_empty(),
        failures,
        grid,
    })
}

/// DSL source of the cone/cylinder interpolation `α t + (1-α) tanh t`.
pub fn cone_tanh_source(alpha: f64) -> String {
    format!("{alpha}*t + {}*tanh(t)", 1.0 - alpha)
}

/// Builtin profiles validated on `[0, BUILTIN_T_MAX]`.
///
/// * `euclidean`: `φ = t`
/// * `cone_tanh[α]`: `φ = α t + (1-α) tanh t`, `α ∈ [0, 1]`
/// * `cylinderizing`: `cone_tanh[0]`
/// * `paraboloidal`: `φ = log(1 + t)`
pub fn builtin_profile(name: &str, params: &[f64]) -> Result<RadialProfile, ProfileError> {
    builtin_profile_on(name, params, BUILTIN_T_MAX)
}

pub fn builtin_profile_on(
    name: &str,
    params: &[f64],
    t_max: f64,
) -> Result<RadialProfile, ProfileError> {
    let bad = |reason: &str| ProfileError::BadParameter {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    let (label, src) = match name {
        "euclidean" => {
            if !params.is_empty() {
                return Err(bad("takes no parameters"));
            }
            ("euclidean".to_string(), "t".to_string())
        }
        "cone_tanh" => {
            let [alpha] = params else {
                return Err(bad("expects exactly one parameter α"));
            };
            if !(0.0..=1.0).contains(alpha) {
                return Err(bad(&format!("α = {alpha} outside [0, 1]")));
            }
            (format!("cone_tanh[{alpha}]"), cone_tanh_source(*alpha))
        }
        "cylinderizing" => {
            if !params.is_empty() {
                return Err(bad("takes no parameters"));
            }
            ("cylinderizing".to_string(), cone_tanh_source(0.0))
        }
        "paraboloidal" => {
            if !params.is_empty() {
                return Err(bad("takes no parameters"));
            }
            ("paraboloidal".to_string(), "log(1 + t)".to_string())
        }
        other => return Err(ProfileError::UnknownBuiltin(other.to_string())),
    };
    let expr = parse_profile(&src)?;
    RadialProfile::from_expr(format!("builtin:{label}"), expr, t_max, DEFAULT_GRID_SIZE)
}

fn split_builtin(rest: &str) -> Result<(String, Vec<f64>), ProfileError> {
    let rest = rest.trim();
    let Some(open) = rest.find('[') else {
        return Ok((rest.to_string(), Vec::new()));
    };
    let name = rest[..open].trim().to_string();
    let inner = rest[open + 1..]
        .strip_suffix(']')
        .ok_or_else(|| ProfileError::BadParameter {
            name: name.clone(),
            reason: "missing closing `]`".into(),
        })?;
    let params = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| ProfileError::BadParameter {
                name: name.clone(),
                reason: format!("`{s}` is not a number"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name, params))
}
