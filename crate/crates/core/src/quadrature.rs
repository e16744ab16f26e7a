//! Adaptive Gauss–Kronrod quadrature and the radial ball/annulus integrals.
//!
//! Rotational symmetry reduces every ball integral to a radial one:
//! `∫_{B(r)} f dμ = ∫₀^r f(t)·4πφ(t)² dt`. Integrands are always assembled in
//! measure form (already multiplied by `4πφ²`) so the pole is a removable
//! point; the Gauss–Kronrod nodes never touch the endpoints anyway.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_quantities, GeometryError, WarpedManifold};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
pub const MAX_DEPTH: u32 = 60;
const MAX_INTERVALS: usize = 20_000;
/// Relative agreement demanded of the two routes in [`annulus_neg_jpp_integral`].
pub const DUAL_PATH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand is not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid interval [{a}, {b}] or tolerances")]
    BadRequest { a: f64, b: f64 },
    #[error(
        "dual-path mismatch on [{a}, {s}]: quadrature {quadrature} vs closed form {closed_form}"
    )]
    DualPathMismatch {
        a: f64,
        s: f64,
        quadrature: f64,
        closed_form: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadTolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

// Kronrod 15-point abscissae (descending, last is the centre) and weights,
// with the embedded 7-point Gauss weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        // Largest error first; ties broken by position for determinism.
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One 15-point Kronrod panel; the error is `|K15 - G7|` over the panel.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sample = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { t: x })
        }
    };
    let fc = sample(centre)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = sample(centre - dx)? + sample(centre + dx)?;
        kronrod += w * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Globally adaptive bisection: the panel with the largest error estimate is
/// split until the summed estimate meets `max(abs_tol, rel_tol·|value|)`.
pub fn integrate_adaptive<F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError>
where
    F: FnMut(f64) -> f64,
{
    if !(a <= b && a.is_finite() && b.is_finite() && tol.rel_tol > 0.0 && tol.abs_tol > 0.0) {
        return Err(QuadError::BadRequest { a, b });
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let (value, error) = gk15(&mut f, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value,
        error,
        depth: 0,
    });
    let mut done: Vec<Panel> = Vec::new();
    let mut total_value = value;
    let mut total_error = error;
    let mut converged = true;

    while total_error > tol.abs_tol.max(tol.rel_tol * total_value.abs()) {
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= MAX_DEPTH || mid <= worst.a || mid >= worst.b {
            // Cannot be refined further; keep its contribution as is.
            converged = false;
            done.push(worst);
            continue;
        }
        if heap.len() + done.len() >= MAX_INTERVALS {
            converged = false;
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        for (lo, hi, v, e) in [(worst.a, mid, v1, e1), (mid, worst.b, v2, e2)] {
            heap.push(Panel {
                a: lo,
                b: hi,
                value: v,
                error: e,
                depth: worst.depth + 1,
            });
        }
    }

    // Re-sum in positional order so the result does not depend on the
    // running-update history.
    done.extend(heap);
    done.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = done.iter().map(|p| p.value).sum();
    let error_estimate = done.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error_estimate,
        evaluations,
        converged,
    })
}

fn check_radius(m: &WarpedManifold, r: f64) -> Result<(), QuadError> {
    if r > 0.0 && r <= m.t_max() {
        Ok(())
    } else {
        Err(GeometryError::OutOfDomain {
            t: r,
            t_max: m.t_max(),
        }
        .into())
    }
}

/// Integrates `g(φ, φ', φ'')` over `[a, b]`; jet failures become non-finite samples.
fn radial<G>(
    m: &WarpedManifold,
    a: f64,
    b: f64,
    tol: &QuadTolerance,
    g: G,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64, f64, f64, f64) -> f64,
{
    integrate_adaptive(
        |t| match m.jet_unchecked(t) {
            Some(p) => g(t, p.v, p.d1, p.d2),
            None => f64::NAN,
        },
        a,
        b,
        tol,
    )
}

/// `Vol(B_p(r)) = ∫₀^r 4πφ² dt`.
pub fn ball_volume(
    m: &WarpedManifold,
    r: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, r)?;
    radial(m, 0.0, r, tol, |_, f, _, _| 4.0 * PI * f * f)
}

/// Scalar-curvature integrand in measure form, `R·4πφ² = 4π(-4φφ'' + 2 - 2φ'²)`.
fn scalar_density(f: f64, f1: f64, f2: f64) -> f64 {
    4.0 * PI * (-4.0 * f * f2 + 2.0 - 2.0 * f1 * f1)
}

/// `∫_{B_p(r)} R dμ`.
pub fn ball_scalar_integral(
    m: &WarpedManifold,
    r: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, r)?;
    radial(m, 0.0, r, tol, |_, f, f1, f2| scalar_density(f, f1, f2))
}

/// `∫_{A_{a,s}} R dμ` over the annulus `a ≤ ρ ≤ s` (`a` may be 0).
pub fn annulus_scalar_integral(
    m: &WarpedManifold,
    a: f64,
    s: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, s)?;
    radial(m, a, s, tol, |_, f, f1, f2| scalar_density(f, f1, f2))
}

/// `8πr - 16πφ'(r)φ(r) + 8π∫₀^r φ'² dt`, obtained from the warped-product
/// formulas by integrating `φφ''` by parts. Uses no second derivatives.
pub fn scalar_integral_closed_form(
    m: &WarpedManifold,
    r: f64,
    tol: &QuadTolerance,
) -> Result<f64, QuadError> {
    check_radius(m, r)?;
    let p = m.jet(r)?;
    let slope_sq = radial(m, 0.0, r, tol, |_, _, f1, _| f1 * f1)?;
    Ok(8.0 * PI * r - 16.0 * PI * p.d1 * p.v + 8.0 * PI * slope_sq.value)
}

/// `∫_{B_p(r)} Rc(∇ρ,∇ρ) dμ = -8π∫₀^r φφ'' dt`.
pub fn ball_radial_ricci_integral(
    m: &WarpedManifold,
    r: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, r)?;
    radial(m, 0.0, r, tol, |_, f, _, f2| -8.0 * PI * f * f2)
}

/// `∫_{∂B(t), a ≤ t ≤ s} R(∂B_p(t)) dμ`, integrating the intrinsic sphere
/// curvature times the area element. Gauss–Bonnet predicts `8π(s - a)`.
pub fn annulus_sphere_scalar_integral(
    m: &WarpedManifold,
    a: f64,
    s: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, s)?;
    integrate_adaptive(
        |t| match m.jet_unchecked(t) {
            Some(p) => {
                let q = point_quantities(t, p);
                q.scalar_sphere * 4.0 * PI * q.j
            }
            None => f64::NAN,
        },
        a,
        s,
        tol,
    )
}

/// `∫_{A_{a,s}} (Rc(∇ρ,∇ρ) - J''/J) dμ = ∫_a^s 4π(-4φφ'' - 2φ'²) dt`.
pub fn annulus_ricci_minus_jpp_integral(
    m: &WarpedManifold,
    a: f64,
    s: f64,
    tol: &QuadTolerance,
) -> Result<QuadResult, QuadError> {
    check_radius(m, s)?;
    radial(m, a, s, tol, |_, f, f1, f2| {
        4.0 * PI * (-4.0 * f * f2 - 2.0 * f1 * f1)
    })
}

/// `∫_{A_{a,s}} (-J''/J) dμ`, returned as `𝒜'(a) - 𝒜'(s)` after checking it
/// against direct quadrature of `-4πJ''`.
pub fn annulus_neg_jpp_integral(
    m: &WarpedManifold,
    a: f64,
    s: f64,
    tol: &QuadTolerance,
) -> Result<f64, QuadError> {
    if !(a > 0.0 && a < s) {
        return Err(QuadError::BadRequest { a, b: s });
    }
    check_radius(m, s)?;
    let quad = radial(m, a, s, tol, |_, f, f1, f2| {
        -4.0 * PI * (2.0 * f1 * f1 + 2.0 * f * f2)
    })?;
    let (_, da) = m.sphere_area_and_derivative(a)?;
    let (_, ds) = m.sphere_area_and_derivative(s)?;
    let closed = da - ds;
    if (quad.value - closed).abs() > DUAL_PATH_TOL * (1.0 + closed.abs()) {
        return Err(QuadError::DualPathMismatch {
            a,
            s,
            quadrature: quad.value,
            closed_form: closed,
        });
    }
    Ok(closed)
}

/// `𝒜(s) - 𝒜(a) = ∫_a^s 8πφφ' dt` by quadrature. Stays accurate where the
/// two areas agree to machine precision.
pub fn sphere_area_increment(
    m: &WarpedManifold,
    a: f64,
    s: f64,
    tol: &QuadTolerance,
) -> Result<f64, QuadError> {
    check_radius(m, s)?;
    Ok(radial(m, a, s, tol, |_, f, f1, _| 8.0 * PI * f * f1)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::builtin_profile;

    fn tight() -> QuadTolerance {
        QuadTolerance {
            rel_tol: 1e-13,
            abs_tol: 1e-15,
        }
    }

    fn manifold(name: &str, params: &[f64]) -> WarpedManifold {
        WarpedManifold::new(builtin_profile(name, params).unwrap()).unwrap()
    }

    #[test]
    fn elementary_integrals() {
        let tol = QuadTolerance::default();
        let r = integrate_adaptive(|_| 1.0, 0.0, 5.0, &tol).unwrap();
        assert!((r.value - 5.0).abs() < 1e-14 && r.converged);
        let r = integrate_adaptive(|t| t * t, 0.0, 1.0, &tol).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        // tanh - tanh³/3 from 0 to 40 is 2/3 to double precision
        let r = integrate_adaptive(|t| (1.0 / t.cosh()).powi(4), 0.0, 40.0, &tol).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10, "{}", r.value);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn degenerate_and_invalid() {
        let tol = QuadTolerance::default();
        assert_eq!(
            integrate_adaptive(|t| t, 2.0, 2.0, &tol).unwrap().value,
            0.0
        );
        assert!(integrate_adaptive(|t| t, 3.0, 2.0, &tol).is_err());
        let bad = QuadTolerance {
            rel_tol: 0.0,
            abs_tol: 1e-12,
        };
        assert!(integrate_adaptive(|t| t, 0.0, 1.0, &bad).is_err());
        assert!(matches!(
            integrate_adaptive(|t| 1.0 / (t - 0.5), 0.0, 1.0, &tol),
            Err(QuadError::NonFinite { .. })
        ));
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        // 1/sqrt(t) is integrable but its singularity defeats GK15 bisection
        // at these tolerances.
        let tol = QuadTolerance {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
        };
        let r = integrate_adaptive(|t| t.abs().sqrt().recip(), 0.0, 1.0, &tol).unwrap();
        assert!(!r.converged);
        assert!((r.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ball_volume_examples() {
        let tol = QuadTolerance::default();
        let v = ball_volume(&manifold("euclidean", &[]), 2.0, &tol).unwrap();
        assert!((v.value - 32.0 * PI / 3.0).abs() < 1e-12);

        // ∫ tanh² = t - tanh t
        let v = ball_volume(&manifold("cone_tanh", &[0.0]), 100.0, &tol).unwrap();
        assert!((v.value / (4.0 * PI * 99.0) - 1.0).abs() < 1e-3);

        // brute-force midpoint rule with 10⁶ panels
        let m = manifold("cone_tanh", &[0.5]);
        let n = 1_000_000;
        let h = 10.0 / n as f64;
        let brute: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                let phi = 0.5 * t + 0.5 * t.tanh();
                4.0 * PI * phi * phi * h
            })
            .sum();
        let v = ball_volume(&m, 10.0, &tol).unwrap();
        assert!((v.value - brute).abs() <= 1e-6 * brute);
    }

    #[test]
    fn scalar_integral_examples() {
        let tol = QuadTolerance::default();
        let e = manifold("euclidean", &[]);
        assert_eq!(ball_scalar_integral(&e, 37.0, &tol).unwrap().value, 0.0);
        let cf = scalar_integral_closed_form(&e, 3.0, &tol).unwrap();
        assert!(cf.abs() < 1e-12);

        let m = manifold("cone_tanh", &[0.5]);
        let q = ball_scalar_integral(&m, 100.0, &tol).unwrap().value;
        let c = scalar_integral_closed_form(&m, 100.0, &tol).unwrap();
        assert!((q - c).abs() <= 1e-8 * c.abs());
        let c = scalar_integral_closed_form(&m, 200.0, &tol).unwrap();
        assert!((c / 200.0 / (6.0 * PI) - 1.0).abs() < 0.01);

        // cylinder: 8π·100 + 8π·2/3 up to exponentially small terms
        let cyl = manifold("cone_tanh", &[0.0]);
        let q = ball_scalar_integral(&cyl, 100.0, &tol).unwrap().value;
        let ratio = q / (8.0 * PI * 100.0);
        assert!((1.0..=1.02).contains(&ratio));
        assert!((q - 8.0 * PI * (100.0 + 2.0 / 3.0)).abs() < 1e-8 * q);
    }

    #[test]
    fn radial_ricci_examples() {
        let tol = tight();
        let e = manifold("euclidean", &[]);
        assert_eq!(
            ball_radial_ricci_integral(&e, 10.0, &tol).unwrap().value,
            0.0
        );

        let cyl = manifold("cone_tanh", &[0.0]);
        let v = ball_radial_ricci_integral(&cyl, 50.0, &tol).unwrap().value;
        let s2 = (1.0 / 50f64.cosh()).powi(2);
        let oracle = 8.0 * PI * (2.0 / 3.0 - s2 * 50f64.tanh());
        assert!((v - oracle).abs() < 1e-6 * oracle);

        let m = manifold("cone_tanh", &[0.5]);
        let v = ball_radial_ricci_integral(&m, 1e3, &tol).unwrap().value;
        assert!(v >= 0.0 && v / 1e3 <= 0.05);
    }

    #[test]
    fn annulus_examples() {
        let tol = QuadTolerance::default();
        let e = manifold("euclidean", &[]);
        let v = annulus_neg_jpp_integral(&e, 1.0, 2.0, &tol).unwrap();
        assert!((v + 8.0 * PI).abs() < 1e-12);

        // 8π tanh(1) sech²(1), mpmath
        let cyl = manifold("cone_tanh", &[0.0]);
        let v = annulus_neg_jpp_integral(&cyl, 1.0, 50.0, &tol).unwrap();
        assert!((v - 8.0 * PI * 0.319_850_004_224_612_25).abs() < 1e-8);

        let m = manifold("cone_tanh", &[0.5]);
        assert!(annulus_neg_jpp_integral(&m, 1.0, 1e3, &tol).is_ok());
        assert!(annulus_neg_jpp_integral(&m, 2.0, 1.0, &tol).is_err());
    }

    #[test]
    fn additivity() {
        let tol = tight();
        let m = manifold("cone_tanh", &[0.3]);
        let whole = ball_scalar_integral(&m, 40.0, &tol).unwrap().value;
        let left = ball_scalar_integral(&m, 7.0, &tol).unwrap().value;
        let right = annulus_scalar_integral(&m, 7.0, 40.0, &tol).unwrap().value;
        assert!((whole - left - right).abs() <= 1e-10 * whole.abs());
    }

    #[test]
    fn gauss_bonnet_slices() {
        let tol = QuadTolerance::default();
        for (name, p) in [("cone_tanh", vec![0.5]), ("paraboloidal", vec![])] {
            let m = manifold(name, &p);
            let v = annulus_sphere_scalar_integral(&m, 1.0, 300.0, &tol)
                .unwrap()
                .value;
            assert!((v - 8.0 * PI * 299.0).abs() <= 1e-9 * v);
        }
    }

    #[test]
    fn domain_checks() {
        let tol = QuadTolerance::default();
        let m = manifold("euclidean", &[]);
        assert!(ball_volume(&m, 0.0, &tol).is_err());
        assert!(ball_volume(&m, 1e5, &tol).is_err());
    }
}
