//! Checkers for the comparison inequalities on manifolds with a pole and
//! `Rc ≥ 0`, the mean-value radii of the sphere-area function, and the
//! annulus limits built from them.
//!
//! Every checker reports its worst margin and all violations instead of
//! stopping at the first one, and is exercised against inputs designed to
//! violate it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, WarpedManifold};
use crate::jacobi::{shape_data, JacobiError, JacobiSolution};
use crate::quadrature::{
    annulus_neg_jpp_integral, ball_volume, sphere_area_increment, QuadError, QuadTolerance,
};
use crate::theorem::{extrapolate_limit, ConvergenceReport, TheoremError};

pub const BISHOP_GROMOV_TOLERANCE: f64 = 1e-9;
pub const SLOPE_TOLERANCE: f64 = 1e-9;
pub const JACOBI_BG_TOLERANCE: f64 = 1e-8;
pub const MEAN_VALUE_SCAN: usize = 64;
pub const DEFAULT_ANNULUS_BASE: f64 = 1.0;
const OMEGA_3: f64 = 4.0 * PI / 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparisonError {
    #[error("no sign change of 𝒜'(x) - {target} on ({lo}, {hi}); samples {samples:?}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        target: f64,
        samples: Vec<(f64, f64)>,
    },
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Jacobi(#[from] JacobiError),
    #[error(transparent)]
    Theorem(#[from] Box<TheoremError>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub inequality: String,
    pub inputs: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    pub tolerance: f64,
    /// Minimum normalised margin `RHS - LHS` over all samples.
    pub worst_margin: f64,
    pub violations: Vec<Violation>,
    /// Set when a Jacobi source hit a conjugate point before the end of the grid.
    pub stopped_at: Option<f64>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Check {
    inequality: &'static str,
    inputs: Vec<f64>,
    lhs: f64,
    rhs: f64,
    margin: f64,
}

impl Check {
    /// `lhs ≤ rhs` measured relative to `|rhs|`.
    fn relative(inequality: &'static str, inputs: Vec<f64>, lhs: f64, rhs: f64) -> Self {
        Self {
            inequality,
            inputs,
            lhs,
            rhs,
            margin: (rhs - lhs) / rhs.abs(),
        }
    }

    fn scaled(inequality: &'static str, t: f64, lhs: f64, rhs: f64) -> Self {
        Self {
            inequality,
            inputs: vec![t],
            lhs,
            rhs,
            margin: t * (rhs - lhs),
        }
    }
}

fn assemble(
    name: &str,
    tolerance: f64,
    checks: Vec<Check>,
    stopped_at: Option<f64>,
) -> InequalityReport {
    let mut worst = f64::INFINITY;
    let mut violations = Vec::new();
    for c in &checks {
        // NaN margins count as violations.
        if !(c.margin >= -tolerance) {
            violations.push(Violation {
                inequality: c.inequality.to_string(),
                inputs: c.inputs.clone(),
                lhs: c.lhs,
                rhs: c.rhs,
            });
        }
        worst = worst.min(c.margin);
    }
    InequalityReport {
        name: name.to_string(),
        samples: checks.len(),
        tolerance,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        violations,
        stopped_at,
    }
}

/// `n` log-spaced pairs `(t, s)` with `lo ≤ t ≤ s ≤ hi`: the `t` values are
/// log-spaced and each `s` is the mirror point `lo·hi/t` or `t` itself.
pub fn log_spaced_pairs(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let radii = geometric_grid(lo, hi, n);
    radii
        .iter()
        .zip(radii.iter().rev())
        .map(|(&a, &b)| if a <= b { (a, b) } else { (b, a) })
        .collect()
}

/// `n ≥ 2` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// The five Bishop–Gromov comparisons at each pair `(t, s)`, `s ≥ t > 0`:
/// `J(s)/J(t) ≤ (s/t)²`, `J'/J(t) ≤ 2/t`, `J(t) ≤ t²`,
/// `Vol B(s)/Vol B(t) ≤ (s/t)³` and `Vol B(t) ≤ ω₃t³`.
pub fn check_bishop_gromov(
    m: &WarpedManifold,
    pairs: &[(f64, f64)],
    tol: &QuadTolerance,
) -> Result<InequalityReport, ComparisonError> {
    if pairs.is_empty() {
        return Err(ComparisonError::BadRequest("no pairs".into()));
    }
    if let Some(&(t, s)) = pairs.iter().find(|(t, s)| !(*t > 0.0 && s >= t)) {
        return Err(ComparisonError::BadRequest(format!(
            "pair ({t}, {s}) needs s ≥ t > 0"
        )));
    }
    let per_pair: Vec<Vec<Check>> = pairs
        .par_iter()
        .map(|&(t, s)| -> Result<Vec<Check>, ComparisonError> {
            let (jt, j1t, _) = m.jacobian_data(t)?;
            let (js, _, _) = m.jacobian_data(s)?;
            let vt = ball_volume(m, t, tol)?.value;
            let vs = ball_volume(m, s, tol)?.value;
            let q = s / t;
            let inputs = vec![t, s];
            Ok(vec![
                Check::relative("jacobian_ratio", inputs.clone(), js / jt, q * q),
                Check::relative("jacobian_slope", inputs.clone(), j1t / jt, 2.0 / t),
                Check::relative("jacobian_bound", inputs.clone(), jt, t * t),
                Check::relative("volume_ratio", inputs.clone(), vs / vt, q * q * q),
                Check::relative("volume_bound", inputs, vt, OMEGA_3 * t * t * t),
            ])
        })
        .collect::<Result<_, _>>()?;
    Ok(assemble(
        "bishop_gromov",
        BISHOP_GROMOV_TOLERANCE,
        per_pair.into_iter().flatten().collect(),
        None,
    ))
}

/// Where `J'/J` comes from: closed-form warped-product data or the trace of
/// the shape operator along a Jacobi solution.
#[derive(Debug, Clone, Copy)]
pub enum SlopeSource<'a> {
    Warped(&'a WarpedManifold),
    Jacobi(&'a JacobiSolution),
}

/// `0 ≤ J'/J ≤ 2/t` at each grid radius, margins scaled by `t`. For a Jacobi
/// source the report stops at the first conjugate point.
pub fn check_slope_bound(
    source: SlopeSource<'_>,
    grid: &[f64],
) -> Result<InequalityReport, ComparisonError> {
    let (name, stop) = match source {
        SlopeSource::Warped(_) => ("slope_bound".to_string(), None),
        SlopeSource::Jacobi(sol) => (
            format!("slope_bound[{}#{}]", sol.field().label(), sol.direction),
            sol.conjugate_point,
        ),
    };
    let usable: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&t| stop.is_none_or(|c| t < c))
        .collect();
    let stopped_at = stop.filter(|_| usable.len() < grid.len());
    let checks: Vec<[Check; 2]> = usable
        .par_iter()
        .map(|&t| -> Result<[Check; 2], ComparisonError> {
            let slope = match source {
                SlopeSource::Warped(m) => {
                    let (j, j1, _) = m.jacobian_data(t)?;
                    j1 / j
                }
                SlopeSource::Jacobi(sol) => shape_data(sol, t)?.j_over_j,
            };
            Ok([
                Check::scaled("slope_lower", t, 0.0, slope),
                Check::scaled("slope_upper", t, slope, 2.0 / t),
            ])
        })
        .collect::<Result<_, _>>()?;
    Ok(assemble(
        &name,
        SLOPE_TOLERANCE,
        checks.into_iter().flatten().collect(),
        stopped_at,
    ))
}

/// Per-direction Jacobian comparisons `J(s)/J(t) ≤ (s/t)²` and `J(t) ≤ t²`
/// along a Jacobi solution, with `J = det U`. Pairs past a conjugate point or
/// outside the integrated range are skipped.
pub fn check_jacobi_bishop_gromov(
    sol: &JacobiSolution,
    pairs: &[(f64, f64)],
) -> Result<InequalityReport, ComparisonError> {
    let limit = sol.conjugate_point.unwrap_or(f64::INFINITY);
    let usable: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(t, s)| t >= sol.t_start() && s <= sol.t_end() && s < limit)
        .collect();
    let stopped_at = sol.conjugate_point.filter(|_| usable.len() < pairs.len());
    let checks: Vec<[Check; 2]> = usable
        .par_iter()
        .map(|&(t, s)| -> Result<[Check; 2], ComparisonError> {
            let jt = sol.det_at(t)?;
            let js = sol.det_at(s)?;
            let q = s / t;
            Ok([
                Check::relative("jacobian_ratio", vec![t, s], js / jt, q * q),
                Check::relative("jacobian_bound", vec![t, s], jt, t * t),
            ])
        })
        .collect::<Result<_, _>>()?;
    Ok(assemble(
        &format!("bishop_gromov[{}#{}]", sol.field().label(), sol.direction),
        JACOBI_BG_TOLERANCE,
        checks.into_iter().flatten().collect(),
        stopped_at,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanValueRadii {
    pub s: f64,
    pub eps: f64,
    /// Smallest root of `𝒜'(x) = slope_b` in `((1-ε)s, s)`.
    pub b_s: f64,
    /// Smallest root of `𝒜'(x) = slope_c` in `(s, (1+ε)s)`.
    pub c_s: f64,
    pub slope_b: f64,
    pub slope_c: f64,
    pub residual_b: f64,
    pub residual_c: f64,
}

fn area_slope(m: &WarpedManifold, x: f64) -> Result<f64, ComparisonError> {
    Ok(m.sphere_area_and_derivative(x)?.1)
}

/// Smallest root of `𝒜' - target` in `(lo, hi)`: a 64-interval scan for the
/// first sign change (or exact interior zero), then bisection to `1e-12·s`.
fn smallest_root(
    m: &WarpedManifold,
    lo: f64,
    hi: f64,
    target: f64,
    s: f64,
) -> Result<f64, ComparisonError> {
    let n = MEAN_VALUE_SCAN;
    let xs: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let fs: Vec<f64> = xs
        .iter()
        .map(|&x| area_slope(m, x).map(|a| a - target))
        .collect::<Result<_, _>>()?;
    for i in 0..n {
        if i > 0 && fs[i] == 0.0 {
            return Ok(xs[i]);
        }
        // Compare signs rather than the product, which can underflow.
        if (fs[i] < 0.0 && fs[i + 1] > 0.0) || (fs[i] > 0.0 && fs[i + 1] < 0.0) {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let fa_neg = fs[i] < 0.0;
            while b - a > 1e-12 * s {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = area_slope(m, mid)? - target;
                if fm == 0.0 {
                    return Ok(mid);
                }
                if (fm < 0.0) == fa_neg {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(0.5 * (a + b));
        }
    }
    Err(ComparisonError::NoSignChange {
        lo,
        hi,
        target,
        samples: xs.into_iter().zip(fs).collect(),
    })
}

/// Radii `b_s ∈ ((1-ε)s, s)` and `c_s ∈ (s, (1+ε)s)` where `𝒜'` equals the
/// difference quotient of `𝒜` over `[(1-ε)s, s]` and `[s, (1+ε)s]`.
pub fn mean_value_radii(
    m: &WarpedManifold,
    s: f64,
    eps: f64,
) -> Result<MeanValueRadii, ComparisonError> {
    if !(eps > 0.0 && eps < 1.0 && s > 0.0 && (1.0 + eps) * s <= m.t_max()) {
        return Err(ComparisonError::BadRequest(format!(
            "mean-value radii need 0 < eps < 1 and (1+eps)s ≤ t_max (s = {s}, eps = {eps})"
        )));
    }
    // Relative accuracy only: on cylindrical ends 𝒜' is exponentially small.
    let tol = QuadTolerance {
        rel_tol: 1e-13,
        abs_tol: f64::MIN_POSITIVE,
    };
    let lo = (1.0 - eps) * s;
    let hi = (1.0 + eps) * s;
    let slope_b = sphere_area_increment(m, lo, s, &tol)? / (eps * s);
    let slope_c = sphere_area_increment(m, s, hi, &tol)? / (eps * s);
    let b_s = smallest_root(m, lo, s, slope_b, s)?;
    let c_s = smallest_root(m, s, hi, slope_c, s)?;
    Ok(MeanValueRadii {
        s,
        eps,
        b_s,
        c_s,
        slope_b,
        slope_c,
        residual_b: area_slope(m, b_s)? - slope_b,
        residual_c: area_slope(m, c_s)? - slope_c,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusLimits {
    /// `(1/s)∫_{A_{a,c_s}} (-J''/J) dμ`.
    pub upper: ConvergenceReport,
    /// `(1/s)∫_{A_{a,b_s}} (-J''/J) dμ`.
    pub lower: ConvergenceReport,
    pub radii: Vec<MeanValueRadii>,
}

/// The two annulus sequences over the mean-value radii, with extrapolated
/// limits. For `V` the volume ratio they tend to `4πV(-2-ε)` and `4πV(-2+ε)`.
pub fn lemma22_limits(
    m: &WarpedManifold,
    a: f64,
    eps: f64,
    s_sequence: &[f64],
    tol: &QuadTolerance,
) -> Result<AnnulusLimits, ComparisonError> {
    if !(a > 0.0) {
        return Err(ComparisonError::BadRequest(format!(
            "annulus base {a} must be positive"
        )));
    }
    let rows: Vec<(MeanValueRadii, f64, f64)> = s_sequence
        .par_iter()
        .map(|&s| -> Result<_, ComparisonError> {
            let mv = mean_value_radii(m, s, eps)?;
            if !(mv.b_s > a) {
                return Err(ComparisonError::BadRequest(format!(
                    "b_s = {} does not exceed the annulus base {a}",
                    mv.b_s
                )));
            }
            let up = annulus_neg_jpp_integral(m, a, mv.c_s, tol)? / s;
            let low = annulus_neg_jpp_integral(m, a, mv.b_s, tol)? / s;
            Ok((mv, up, low))
        })
        .collect::<Result<_, _>>()?;
    let fit = |pick: fn(&(MeanValueRadii, f64, f64)) -> f64| {
        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.0.s, pick(r))).collect();
        extrapolate_limit(&samples).map_err(|e| ComparisonError::Theorem(Box::new(e)))
    };
    Ok(AnnulusLimits {
        upper: fit(|r| r.1)?,
        lower: fit(|r| r.2)?,
        radii: rows.iter().map(|r| r.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{integrate_jacobi, RadialCurvatureField};
    use crate::profile::{builtin_profile, RadialProfile};

    fn manifold(name: &str, params: &[f64]) -> WarpedManifold {
        WarpedManifold::new(builtin_profile(name, params).unwrap()).unwrap()
    }

    #[test]
    fn pairs_are_ordered() {
        let pairs = log_spaced_pairs(0.1, 1e3, 64);
        assert_eq!(pairs.len(), 64);
        assert!(pairs.iter().all(|(t, s)| t <= s));
        assert_eq!(pairs[0], (0.1, 1e3));
    }

    #[test]
    fn euclidean_saturates_bishop_gromov() {
        let m = manifold("euclidean", &[]);
        let r = check_bishop_gromov(
            &m,
            &log_spaced_pairs(0.1, 1e3, 64),
            &QuadTolerance::default(),
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.samples, 320);
        assert!(r.worst_margin.abs() <= 1e-12, "{}", r.worst_margin);
    }

    #[test]
    fn cone_satisfies_bishop_gromov() {
        let m = manifold("cone_tanh", &[0.5]);
        let r = check_bishop_gromov(
            &m,
            &log_spaced_pairs(0.1, 1e3, 64),
            &QuadTolerance::default(),
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.violations.first());
        assert!(r.worst_margin >= 0.0);
    }

    #[test]
    fn convex_profile_is_flagged() {
        let p = RadialProfile::from_source("t + 0.1*t^2", 1e3, 64).unwrap();
        assert!(!p.validation().passed);
        let m = WarpedManifold::unvalidated(p);
        let r = check_bishop_gromov(
            &m,
            &log_spaced_pairs(0.1, 1e3, 16),
            &QuadTolerance::default(),
        )
        .unwrap();
        assert!(r
            .violations
            .iter()
            .any(|v| v.inequality == "jacobian_slope"));
        assert!(r.worst_margin < 0.0);
        let s =
            check_slope_bound(SlopeSource::Warped(&m), &geometric_grid(0.1, 100.0, 32)).unwrap();
        assert!(s.violations.iter().all(|v| v.inequality == "slope_upper"));
        assert_eq!(s.violations.len(), 32);
    }

    #[test]
    fn slope_bound_warped() {
        let m = manifold("euclidean", &[]);
        let grid = geometric_grid(1e-3, 1e3, 256);
        let r = check_slope_bound(SlopeSource::Warped(&m), &grid).unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() <= 1e-12);
        let m = manifold("cylinderizing", &[]);
        let r = check_slope_bound(SlopeSource::Warped(&m), &geometric_grid(1.0, 1e3, 256)).unwrap();
        assert!(r.passed() && r.samples == 512);
    }

    #[test]
    fn slope_bound_jacobi_stops_at_conjugate_point() {
        let f = RadialCurvatureField::constant(1.0, 1);
        let sol = integrate_jacobi(&f, 0, 4.0, 1e-3).unwrap();
        let grid: Vec<f64> = (1..=35).map(|i| 0.1 * i as f64).collect();
        let r = check_slope_bound(SlopeSource::Jacobi(&sol), &grid).unwrap();
        assert!((r.stopped_at.unwrap() - PI).abs() < 1e-6);
        assert_eq!(r.samples, 2 * 31);
        // cot t ≤ 1/t holds, but the slope turns negative past π/2
        assert!(r.violations.iter().all(|v| v.inequality == "slope_lower"));
        assert!(r.violations.iter().all(|v| v.inputs[0] > PI / 2.0));
        assert!(!r.violations.is_empty());
    }

    #[test]
    fn jacobi_negative_trace_is_flagged() {
        let f = RadialCurvatureField::constant(-1.0, 1);
        let sol = integrate_jacobi(&f, 0, 5.0, 1e-3).unwrap();
        let bg = check_jacobi_bishop_gromov(&sol, &log_spaced_pairs(0.1, 5.0, 16)).unwrap();
        assert!(!bg.passed());
        let sl =
            check_slope_bound(SlopeSource::Jacobi(&sol), &geometric_grid(0.1, 5.0, 16)).unwrap();
        assert!(sl.violations.iter().any(|v| v.inequality == "slope_upper"));
    }

    #[test]
    fn mean_value_radii_examples() {
        let m = manifold("euclidean", &[]);
        let r = mean_value_radii(&m, 10.0, 0.2).unwrap();
        assert!(
            (r.b_s - 9.0).abs() < 1e-10 && (r.c_s - 11.0).abs() < 1e-10,
            "{r:?}"
        );

        let m = manifold("cone_tanh", &[0.5]);
        let r = mean_value_radii(&m, 100.0, 0.05).unwrap();
        assert!(r.b_s > 95.0 && r.b_s < 100.0);
        assert!(r.residual_b.abs() <= 1e-9 * r.slope_b);
        assert!(r.c_s > 100.0 && r.c_s < 105.0);

        let m = manifold("cylinderizing", &[]);
        let r = mean_value_radii(&m, 50.0, 0.5).unwrap();
        assert!(r.c_s > 50.0 && r.c_s < 75.0);
        assert!(r.residual_c.abs() <= 1e-9 * r.slope_c.abs());
        assert!(r.b_s > 25.0 && r.b_s < 50.0);

        assert!(mean_value_radii(&m, 50.0, 1.0).is_err());
        assert!(mean_value_radii(&m, 9e3, 0.5).is_err());
    }

    #[test]
    fn annulus_limits() {
        let tol = QuadTolerance::default();
        let seq: Vec<f64> = (0..8).map(|k| 10.0 * 2f64.powi(k)).collect();
        let m = manifold("euclidean", &[]);
        let l = lemma22_limits(&m, 1.0, 0.1, &seq, &tol).unwrap();
        assert!((l.upper.limit + 8.4 * PI).abs() < 1e-6, "{}", l.upper.limit);
        assert!((l.lower.limit + 7.6 * PI).abs() < 1e-6, "{}", l.lower.limit);

        let m = manifold("cone_tanh", &[0.5]);
        let l = lemma22_limits(&m, 1.0, 0.2, &seq, &tol).unwrap();
        assert!(
            (l.upper.limit / (-2.2 * PI) - 1.0).abs() < 0.02,
            "{}",
            l.upper.limit
        );
        assert!(
            (l.lower.limit / (-1.8 * PI) - 1.0).abs() < 0.02,
            "{}",
            l.lower.limit
        );

        let m = manifold("cylinderizing", &[]);
        let l = lemma22_limits(&m, 1.0, 0.2, &seq, &tol).unwrap();
        assert!(l.upper.limit.abs() <= 0.05 && l.lower.limit.abs() <= 0.05);
    }
}
