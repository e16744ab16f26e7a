//! Asymptotic experiments: the volume ratio, the limits of `∫R/r`,
//! `𝒜'(s)/s` and `∫Rc(∇ρ)/r`, the Ricci-pinching infimum and flatness.
//!
//! Every limit is extrapolated from a finite radius sequence with the model
//! `value(r) = L + c/r`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::geometric_grid;
use crate::geometry::{point_quantities, GeometryError, WarpedManifold};
use crate::profile::{ProfileError, RadialProfile, DEFAULT_GRID_SIZE};
use crate::quadrature::{
    annulus_ricci_minus_jpp_integral, ball_radial_ricci_integral, ball_scalar_integral,
    ball_volume, QuadError, QuadTolerance,
};

pub const MIN_SAMPLES: usize = 4;
const OMEGA_3: f64 = 4.0 * PI / 3.0;
pub const DECOMPOSITION_TOL: f64 = 1e-8;
pub const PINCHING_TOL_R: f64 = 1e-10;
pub const FLAT_CURVATURE_TOL: f64 = 1e-10;
pub const FLAT_PROFILE_TOL: f64 = 1e-8;
pub const LEMMA32_LIMIT_TOL: f64 = 0.02;
pub const NONNEGATIVITY_TOL: f64 = 1e-10;
/// Absolute slack added to combined error estimates when comparing two
/// extrapolated limits; covers rounding in limits that are exactly equal.
pub const AGREEMENT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoremError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample radii must be positive, finite and strictly increasing")]
    NotIncreasing,
    #[error("degenerate fit: all sample radii coincide")]
    Degenerate,
    #[error("non-finite sample value at r = {0}")]
    NonFinite(f64),
    #[error(
        "volume ratio estimates disagree: sphere form {sphere} vs volume form {volume} \
         (combined error {combined_error})"
    )]
    AvrDisagreement {
        sphere: f64,
        volume: f64,
        combined_error: f64,
    },
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub r: f64,
    pub value: f64,
    /// `value - (limit + c/r)` for the tail fit.
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub samples: Vec<Sample>,
    pub model: String,
    pub limit: f64,
    pub c: f64,
    pub rms_residual: f64,
    pub error_estimate: f64,
}

impl ConvergenceReport {
    pub fn last_value(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.value)
    }
}

fn fit_inverse(samples: &[(f64, f64)]) -> Result<(f64, f64), TheoremError> {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|(r, _)| 1.0 / r).sum::<f64>() / n;
    let my = samples.iter().map(|(_, v)| v).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (r, v) in samples {
        let dx = 1.0 / r - mx;
        sxx += dx * dx;
        sxy += dx * (v - my);
    }
    if !(sxx > 0.0) {
        return Err(TheoremError::Degenerate);
    }
    let c = sxy / sxx;
    Ok((my - c * mx, c))
}

/// Least-squares fit of `L + c/r` over the last `⌈n/2⌉` samples.
/// `error_estimate = max(rms residual, |fit(last) - value(last)|, |L_tail - L_all|)`.
pub fn extrapolate_limit(samples: &[(f64, f64)]) -> Result<ConvergenceReport, TheoremError> {
    if samples.len() < MIN_SAMPLES {
        return Err(TheoremError::TooFewSamples(samples.len()));
    }
    if let Some(&(r, _)) = samples.iter().find(|(_, v)| !v.is_finite()) {
        return Err(TheoremError::NonFinite(r));
    }
    if samples.iter().any(|(r, _)| !(r.is_finite() && *r > 0.0)) {
        return Err(TheoremError::NotIncreasing);
    }
    if samples.windows(2).any(|w| w[1].0 == w[0].0) {
        if samples.iter().all(|(r, _)| *r == samples[0].0) {
            return Err(TheoremError::Degenerate);
        }
        return Err(TheoremError::NotIncreasing);
    }
    if samples.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(TheoremError::NotIncreasing);
    }
    let tail = &samples[samples.len() / 2..];
    let (limit, c) = fit_inverse(tail)?;
    let (limit_all, _) = fit_inverse(samples)?;
    let fitted = |r: f64| limit + c / r;
    let rms = (tail
        .iter()
        .map(|&(r, v)| (v - fitted(r)).powi(2))
        .sum::<f64>()
        / tail.len() as f64)
        .sqrt();
    let &(r_last, v_last) = samples.last().expect("nonempty");
    let error_estimate = rms
        .max((fitted(r_last) - v_last).abs())
        .max((limit - limit_all).abs());
    Ok(ConvergenceReport {
        samples: samples
            .iter()
            .map(|&(r, value)| Sample {
                r,
                value,
                fit_residual: value - fitted(r),
            })
            .collect(),
        model: "constant_plus_c_over_r".to_string(),
        limit,
        c,
        rms_residual: rms,
        error_estimate,
    })
}

/// Verdict tolerance `|limit - predicted| ≤ max(rel·|predicted|, abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictTolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for VerdictTolerance {
    fn default() -> Self {
        Self {
            rel: 0.01,
            abs: 0.02,
        }
    }
}

impl VerdictTolerance {
    pub fn accepts(&self, limit: f64, predicted: f64) -> bool {
        (limit - predicted).abs() <= (self.rel * predicted.abs()).max(self.abs)
    }
}

/// A secondary identity checked alongside an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    /// Largest observed deviation, in the units the tolerance is stated in.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Diagnostic {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremResult {
    pub name: String,
    pub convergence: ConvergenceReport,
    pub predicted: Option<f64>,
    pub verdict: bool,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvrEstimate {
    /// `𝒜(r)/(4πr²)`; its limit is the reported volume ratio.
    pub sphere: ConvergenceReport,
    /// `Vol B(r)/(ω₃r³)`.
    pub volume: ConvergenceReport,
}

impl AvrEstimate {
    pub fn limit(&self) -> f64 {
        self.sphere.limit
    }
}

fn check_sequence(m: &WarpedManifold, rs: &[f64]) -> Result<(), TheoremError> {
    if rs.len() < MIN_SAMPLES {
        return Err(TheoremError::TooFewSamples(rs.len()));
    }
    if rs.windows(2).any(|w| !(w[1] > w[0])) || !(rs[0] > 0.0) {
        return Err(TheoremError::NotIncreasing);
    }
    let last = *rs.last().expect("nonempty");
    if last > m.t_max() {
        return Err(GeometryError::OutOfDomain {
            t: last,
            t_max: m.t_max(),
        }
        .into());
    }
    Ok(())
}

fn agree(a: &ConvergenceReport, b: &ConvergenceReport) -> (f64, f64) {
    let gap = (a.limit - b.limit).abs();
    let allowed = a.error_estimate + b.error_estimate + AGREEMENT_FLOOR;
    (gap, allowed)
}

/// Volume ratio from both the sphere-area and the ball-volume sequences;
/// fails if their limits disagree beyond the combined error estimates.
pub fn estimate_avr(
    m: &WarpedManifold,
    rs: &[f64],
    tol: &QuadTolerance,
) -> Result<AvrEstimate, TheoremError> {
    check_sequence(m, rs)?;
    let rows: Vec<(f64, f64, f64)> = rs
        .par_iter()
        .map(|&r| -> Result<_, TheoremError> {
            let (area, _) = m.sphere_area_and_derivative(r)?;
            let vol = ball_volume(m, r, tol)?.value;
            Ok((r, area / (4.0 * PI * r * r), vol / (OMEGA_3 * r * r * r)))
        })
        .collect::<Result<_, _>>()?;
    let sphere = extrapolate_limit(&rows.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>())?;
    let volume = extrapolate_limit(&rows.iter().map(|x| (x.0, x.2)).collect::<Vec<_>>())?;
    let (gap, allowed) = agree(&sphere, &volume);
    if !(gap <= allowed) {
        return Err(TheoremError::AvrDisagreement {
            sphere: sphere.limit,
            volume: volume.limit,
            combined_error: allowed,
        });
    }
    Ok(AvrEstimate { sphere, volume })
}

/// `(1/r)∫_{B(r)} R` against `8π(1 - V)`. Also checks at each `r`, relative to
/// `|∫_{B(r)} R|`, the decomposition
/// `∫_{B(r)} R = ∫_{B(a)} R + 8π(r - a) + ∫_{A_{a,r}} (Rc(∇ρ) - J''/J)` with
/// `a` the annulus base, and the bound `∫_{B(r)} R ≤ 8πr + ∫_{B(r)} Rc(∇ρ)`.
pub fn main_theorem_experiment(
    m: &WarpedManifold,
    rs: &[f64],
    a: f64,
    tol: &QuadTolerance,
    verdict_tol: &VerdictTolerance,
) -> Result<TheoremResult, TheoremError> {
    check_sequence(m, rs)?;
    if !(a > 0.0 && a < rs[0]) {
        return Err(TheoremError::BadRequest(format!(
            "annulus base {a} must lie in (0, {})",
            rs[0]
        )));
    }
    let avr = estimate_avr(m, rs, tol)?;
    let inner = ball_scalar_integral(m, a, tol)?.value;
    let rows: Vec<(f64, f64, f64, f64)> = rs
        .par_iter()
        .map(|&r| -> Result<_, TheoremError> {
            let total = ball_scalar_integral(m, r, tol)?.value;
            let annulus = annulus_ricci_minus_jpp_integral(m, a, r, tol)?.value;
            let ricci = ball_radial_ricci_integral(m, r, tol)?.value;
            let decomposed = inner + 8.0 * PI * (r - a) + annulus;
            let decomposition = (total - decomposed).abs() / total.abs().max(f64::MIN_POSITIVE);
            let bound = (total - (8.0 * PI * r + ricci)) / (8.0 * PI * r);
            Ok((r, total / r, decomposition, bound))
        })
        .collect::<Result<_, _>>()?;
    let convergence = extrapolate_limit(&rows.iter().map(|x| (x.0, x.1)).collect::<Vec<_>>())?;
    let predicted = 8.0 * PI * (1.0 - avr.limit());
    let decomposition = rows.iter().map(|x| x.2).fold(0.0, f64::max);
    let bound = rows.iter().map(|x| x.3).fold(f64::NEG_INFINITY, f64::max);
    let diagnostics = vec![
        Diagnostic::new("decomposition", decomposition, DECOMPOSITION_TOL),
        Diagnostic::new("upper_bound", bound, DECOMPOSITION_TOL),
        Diagnostic::new(
            "lower_bound",
            -rows.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
            NONNEGATIVITY_TOL,
        ),
    ];
    let verdict =
        verdict_tol.accepts(convergence.limit, predicted) && diagnostics.iter().all(|d| d.passed);
    Ok(TheoremResult {
        name: "main_theorem".to_string(),
        convergence,
        predicted: Some(predicted),
        verdict,
        diagnostics,
    })
}

/// `𝒜'(s)/s` against `8πV`.
pub fn corollary_experiment(
    m: &WarpedManifold,
    rs: &[f64],
    tol: &QuadTolerance,
    verdict_tol: &VerdictTolerance,
) -> Result<TheoremResult, TheoremError> {
    check_sequence(m, rs)?;
    let avr = estimate_avr(m, rs, tol)?;
    let samples: Vec<(f64, f64)> = rs
        .iter()
        .map(|&s| Ok((s, m.sphere_area_and_derivative(s)?.1 / s)))
        .collect::<Result<_, TheoremError>>()?;
    let convergence = extrapolate_limit(&samples)?;
    let predicted = 8.0 * PI * avr.limit();
    Ok(TheoremResult {
        name: "corollary".to_string(),
        verdict: verdict_tol.accepts(convergence.limit, predicted),
        convergence,
        predicted: Some(predicted),
        diagnostics: Vec::new(),
    })
}

/// `(1/r)∫_{B(r)} Rc(∇ρ,∇ρ)`, which tends to zero and is nonnegative.
pub fn lemma32_experiment(
    m: &WarpedManifold,
    rs: &[f64],
    tol: &QuadTolerance,
) -> Result<TheoremResult, TheoremError> {
    check_sequence(m, rs)?;
    let samples: Vec<(f64, f64)> = rs
        .par_iter()
        .map(|&r| Ok((r, ball_radial_ricci_integral(m, r, tol)?.value / r)))
        .collect::<Result<_, TheoremError>>()?;
    let convergence = extrapolate_limit(&samples)?;
    let negative = -samples.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let diagnostics = vec![Diagnostic::new(
        "nonnegativity",
        negative,
        NONNEGATIVITY_TOL,
    )];
    Ok(TheoremResult {
        name: "lemma32".to_string(),
        verdict: convergence.limit.abs() <= LEMMA32_LIMIT_TOL && diagnostics[0].passed,
        convergence,
        predicted: Some(0.0),
        diagnostics,
    })
}

/// Pairwise agreement of the extrapolated `∫R/r` limit, `8π(1 - V)` and
/// `8π - lim 𝒜'(s)/s` within combined error estimates.
pub fn main_theorem_consistency(
    main: &TheoremResult,
    corollary: &TheoremResult,
    avr: &AvrEstimate,
) -> Diagnostic {
    let a = (main.convergence.limit, main.convergence.error_estimate);
    let b = (
        8.0 * PI * (1.0 - avr.limit()),
        8.0 * PI * avr.sphere.error_estimate,
    );
    let c = (
        8.0 * PI - corollary.convergence.limit,
        corollary.convergence.error_estimate,
    );
    // Report the worst gap in units of its allowance, so the tolerance is 1.
    let ratio = |x: (f64, f64), y: (f64, f64)| (x.0 - y.0).abs() / (x.1 + y.1 + AGREEMENT_FLOOR);
    let worst = ratio(a, b).max(ratio(a, c)).max(ratio(b, c));
    Diagnostic::new("three_way_consistency", worst, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchingReport {
    /// Minimum over the scan of (smallest Ricci eigenvalue)/R.
    pub eps_star: f64,
    pub argmin_t: f64,
    pub r_max: f64,
    pub flat: bool,
    pub t_max: f64,
    pub grid_size: usize,
}

/// Scans a geometric grid on `[10⁻⁶t_max, t_max]`. Points with `R ≤ 10⁻¹⁰`
/// count as ratio `1/3`.
pub fn pinching_infimum(
    m: &WarpedManifold,
    t_max: f64,
    grid_size: usize,
) -> Result<PinchingReport, TheoremError> {
    if grid_size < 64 {
        return Err(TheoremError::BadRequest(format!(
            "pinching scan needs at least 64 points, got {grid_size}"
        )));
    }
    let grid = geometric_grid(t_max * 1e-6, t_max, grid_size);
    let mut eps_star = f64::INFINITY;
    let mut argmin_t = grid[0];
    let mut r_max = f64::NEG_INFINITY;
    for &t in &grid {
        let q = point_quantities(t, m.jet(t)?);
        r_max = r_max.max(q.scalar);
        let ratio = if q.scalar > PINCHING_TOL_R {
            q.ric_radial.min(q.ric_tangential) / q.scalar
        } else {
            1.0 / 3.0
        };
        if ratio < eps_star {
            eps_star = ratio;
            argmin_t = t;
        }
    }
    Ok(PinchingReport {
        eps_star,
        argmin_t,
        r_max,
        flat: r_max <= PINCHING_TOL_R,
        t_max,
        grid_size,
    })
}

/// The manifold `(M, c²g)`, with profile `c·φ(t/c)` on `(0, c·t_max]`.
pub fn scaled_manifold(m: &WarpedManifold, c: f64) -> Result<WarpedManifold, TheoremError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(TheoremError::BadRequest(format!(
            "scale {c} must be positive"
        )));
    }
    let p = m.profile();
    let profile = RadialProfile::from_expr(
        format!("{c}*({})(t/{c})", p.source()),
        p.expr().rescaled(c),
        c * p.t_max(),
        DEFAULT_GRID_SIZE,
    )?;
    Ok(WarpedManifold::new(profile)?)
}

/// Whether `max|R| ≤ 10⁻¹⁰` and `|φ(t) - t| ≤ 10⁻⁸t` on a geometric grid
/// over `[10⁻⁶t_max, t_max]`.
pub fn flatness_test(m: &WarpedManifold, t_max: f64) -> Result<bool, TheoremError> {
    for t in geometric_grid(t_max * 1e-6, t_max, DEFAULT_GRID_SIZE) {
        let p = m.jet(t)?;
        let q = point_quantities(t, p);
        if !(q.scalar.abs() <= FLAT_CURVATURE_TOL && (p.v - t).abs() <= FLAT_PROFILE_TOL * t) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtin_profile;

    fn manifold(name: &str, params: &[f64]) -> WarpedManifold {
        WarpedManifold::new(builtin_profile(name, params).unwrap()).unwrap()
    }

    fn radii() -> Vec<f64> {
        (0..8).map(|k| 10.0 * 2f64.powi(k)).collect()
    }

    #[test]
    fn extrapolation_examples() {
        let rs = [10.0, 20.0, 40.0, 80.0];
        let exact: Vec<_> = rs.iter().map(|&r| (r, 5.0 + 3.0 / r)).collect();
        let rep = extrapolate_limit(&exact).unwrap();
        assert!((rep.limit - 5.0).abs() < 1e-10 && (rep.c - 3.0).abs() < 1e-8);
        assert!(rep.error_estimate < 1e-10);

        let rs: Vec<f64> = (0..7).map(|k| 15.625 * 2f64.powi(k)).collect();
        let quad: Vec<_> = rs
            .iter()
            .map(|&r| (r, 2.0 - 1.0 / r + 0.5 / (r * r)))
            .collect();
        let rep = extrapolate_limit(&quad).unwrap();
        assert!((rep.limit - 2.0).abs() < 5e-3);
        assert!((rep.limit - 2.0).abs() <= rep.error_estimate);

        let flat: Vec<_> = rs.iter().map(|&r| (r, 7.0)).collect();
        let rep = extrapolate_limit(&flat).unwrap();
        assert_eq!((rep.limit, rep.c), (7.0, 0.0));
        assert_eq!(rep.samples.len(), 7);

        assert!(matches!(
            extrapolate_limit(&[(1.0, 1.0); 4]),
            Err(TheoremError::Degenerate)
        ));
        assert!(matches!(
            extrapolate_limit(&exact[..3]),
            Err(TheoremError::TooFewSamples(3))
        ));
        let mut shuffled = exact.clone();
        shuffled.swap(0, 1);
        assert!(matches!(
            extrapolate_limit(&shuffled),
            Err(TheoremError::NotIncreasing)
        ));
    }

    #[test]
    fn avr_examples() {
        let tol = QuadTolerance::default();
        let e = estimate_avr(&manifold("euclidean", &[]), &radii(), &tol).unwrap();
        assert!(e.sphere.samples.iter().all(|s| s.value == 1.0));
        assert!((e.limit() - 1.0).abs() < 1e-12);
        let e = estimate_avr(&manifold("cone_tanh", &[0.5]), &radii(), &tol).unwrap();
        assert!((e.limit() / 0.25 - 1.0).abs() < 5e-3, "{}", e.limit());
        let e = estimate_avr(&manifold("cylinderizing", &[]), &radii(), &tol).unwrap();
        assert!(e.limit().abs() < 1e-3, "{}", e.limit());
    }

    #[test]
    fn main_theorem_examples() {
        let tol = QuadTolerance::default();
        let v = VerdictTolerance::default();
        for (alpha, target) in [(1.0, 0.0), (0.5, 6.0 * PI), (0.0, 8.0 * PI)] {
            let m = manifold("cone_tanh", &[alpha]);
            let res = main_theorem_experiment(&m, &radii(), 1.0, &tol, &v).unwrap();
            assert!(res.verdict, "alpha={alpha} {res:?}");
            assert!(
                v.accepts(res.convergence.limit, target),
                "{}",
                res.convergence.limit
            );
            let cor = corollary_experiment(&m, &radii(), &tol, &v).unwrap();
            assert!(cor.verdict);
            assert!(v.accepts(cor.convergence.limit, 8.0 * PI * alpha * alpha));
            let avr = estimate_avr(&m, &radii(), &tol).unwrap();
            let d = main_theorem_consistency(&res, &cor, &avr);
            assert!(d.passed, "alpha={alpha} {d:?}");
        }
    }

    #[test]
    fn lemma32_examples() {
        let tol = QuadTolerance::default();
        let res = lemma32_experiment(&manifold("euclidean", &[]), &radii(), &tol).unwrap();
        assert!(res.convergence.samples.iter().all(|s| s.value == 0.0));
        for alpha in [0.0, 0.5] {
            let res = lemma32_experiment(&manifold("cone_tanh", &[alpha]), &radii(), &tol).unwrap();
            assert!(res.verdict, "{res:?}");
        }
    }

    #[test]
    fn pinching_and_flatness() {
        let e = manifold("euclidean", &[]);
        let p = pinching_infimum(&e, 1e3, 256).unwrap();
        assert!(p.flat && p.eps_star == 1.0 / 3.0);
        assert!(flatness_test(&e, 1e3).unwrap());
        for alpha in [0.0, 0.5] {
            let m = manifold("cone_tanh", &[alpha]);
            let p = pinching_infimum(&m, 1e3, 256).unwrap();
            assert!(!p.flat && p.eps_star <= 1e-3 && p.eps_star >= 0.0, "{p:?}");
        }
        assert!(!flatness_test(&manifold("cone_tanh", &[0.999]), 1e3).unwrap());
        assert!(pinching_infimum(&e, 1e3, 10).is_err());
    }

    #[test]
    fn pinching_is_scale_invariant() {
        let m = manifold("cone_tanh", &[0.5]);
        for t_max in [5.0, 1e3] {
            let base = pinching_infimum(&m, t_max, 256).unwrap();
            for c in [2.0, 3.0] {
                let scaled = scaled_manifold(&m, c).unwrap();
                let p = pinching_infimum(&scaled, c * t_max, 256).unwrap();
                assert!(
                    (p.eps_star - base.eps_star).abs() <= 1e-12,
                    "{p:?} {base:?}"
                );
            }
        }
    }
}
