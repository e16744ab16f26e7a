//! Closed-form pointwise geometry of warped products `dr² + φ(r)²·g_{S²}`.
//!
//! With `J = φ²` the polar Jacobian, both principal curvatures of the geodesic
//! sphere equal `λ = φ'/φ`, the radial Ricci curvature is `-2φ''/φ`, each
//! tangential Ricci eigenvalue is `-φ''/φ + (1 - φ'²)/φ²`, and the intrinsic
//! scalar curvature of the sphere of radius `t` is `2/φ²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{Jet2, ProfileError, RadialProfile};

/// Below this radius the sphere quantities `λ` and `R_sphere` are large; they
/// are still evaluated directly from the jet, but ball integrands must be
/// assembled in measure form (multiplied by `J`) instead of using them.
pub const POLE_REGION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("radius {t} outside the validated domain (0, {t_max}]")]
    OutOfDomain { t: f64, t_max: f64 },
    #[error("profile `{0}` failed validation")]
    InvalidProfile(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A rotationally symmetric 3-manifold with a pole and `Rc ≥ 0` on its
/// validated domain.
#[derive(Debug, Clone)]
pub struct WarpedManifold {
    profile: RadialProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointQuantities {
    pub t: f64,
    /// Polar Jacobian `J = φ²` and its first two radial derivatives.
    pub j: f64,
    pub j1: f64,
    pub j2: f64,
    /// Common principal curvature `λ₁ = λ₂` of the geodesic sphere.
    pub lambda: f64,
    pub ric_radial: f64,
    pub ric_tangential: f64,
    pub scalar: f64,
    pub scalar_sphere: f64,
}

impl WarpedManifold {
    pub fn new(profile: RadialProfile) -> Result<Self, GeometryError> {
        if !profile.validation().passed {
            return Err(GeometryError::InvalidProfile(profile.source().to_string()));
        }
        Ok(Self { profile })
    }

    /// Wraps a profile without requiring validation. Used for negative controls
    /// in the comparison checks; results carry no geometric guarantee.
    pub fn unvalidated(profile: RadialProfile) -> Self {
        Self { profile }
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    pub fn t_max(&self) -> f64 {
        self.profile.t_max()
    }

    fn check(&self, t: f64) -> Result<(), GeometryError> {
        if t > 0.0 && t <= self.t_max() {
            Ok(())
        } else {
            Err(GeometryError::OutOfDomain {
                t,
                t_max: self.t_max(),
            })
        }
    }

    /// `(φ, φ', φ'')` at `t ∈ (0, t_max]`.
    pub fn jet(&self, t: f64) -> Result<Jet2, GeometryError> {
        self.check(t)?;
        Ok(self.profile.jet(t)?)
    }

    /// Jet evaluation without the domain check, for quadrature nodes.
    pub(crate) fn jet_unchecked(&self, t: f64) -> Option<Jet2> {
        self.profile.jet(t).ok()
    }

    /// `(J, J', J'') = (φ², 2φφ', 2φ'² + 2φφ'')`.
    pub fn jacobian_data(&self, t: f64) -> Result<(f64, f64, f64), GeometryError> {
        let p = self.jet(t)?;
        Ok(jacobian_from_jet(p))
    }

    pub fn point_curvatures(&self, t: f64) -> Result<PointQuantities, GeometryError> {
        let p = self.jet(t)?;
        Ok(point_quantities(t, p))
    }

    /// `R - (R_sphere + 2 Rc(∇ρ,∇ρ) - 2λ₁λ₂)`, zero up to rounding.
    pub fn gauss_codazzi_residual(&self, t: f64) -> Result<f64, GeometryError> {
        let q = self.point_curvatures(t)?;
        Ok(q.scalar - (q.scalar_sphere + 2.0 * q.ric_radial - 2.0 * q.lambda * q.lambda))
    }

    /// Area of the geodesic sphere `𝒜 = 4πφ²` and its derivative `𝒜' = 8πφφ'`.
    pub fn sphere_area_and_derivative(&self, t: f64) -> Result<(f64, f64), GeometryError> {
        let p = self.jet(t)?;
        Ok((4.0 * PI * p.v * p.v, 8.0 * PI * p.v * p.d1))
    }
}

pub(crate) fn jacobian_from_jet(p: Jet2) -> (f64, f64, f64) {
    (
        p.v * p.v,
        2.0 * p.v * p.d1,
        2.0 * p.d1 * p.d1 + 2.0 * p.v * p.d2,
    )
}

pub(crate) fn point_quantities(t: f64, p: Jet2) -> PointQuantities {
    let (j, j1, j2) = jacobian_from_jet(p);
    let inv = 1.0 / p.v;
    let ric_radial = -2.0 * p.d2 * inv;
    let ric_tangential = -p.d2 * inv + (1.0 - p.d1 * p.d1) * inv * inv;
    PointQuantities {
        t,
        j,
        j1,
        j2,
        lambda: p.d1 * inv,
        ric_radial,
        ric_tangential,
        scalar: ric_radial + 2.0 * ric_tangential,
        scalar_sphere: 2.0 * inv * inv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{builtin_profile, RadialProfile};

    fn cone(alpha: f64) -> WarpedManifold {
        WarpedManifold::new(builtin_profile("cone_tanh", &[alpha]).unwrap()).unwrap()
    }

    fn euclid() -> WarpedManifold {
        WarpedManifold::new(builtin_profile("euclidean", &[]).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + b.abs())
    }

    #[test]
    fn euclidean_quantities() {
        let m = euclid();
        assert_eq!(m.jacobian_data(2.0).unwrap(), (4.0, 4.0, 2.0));
        for t in [0.01, 1.0, 7.5, 300.0] {
            let q = m.point_curvatures(t).unwrap();
            assert!(rel(q.lambda, 1.0 / t) < 1e-15);
            assert_eq!(q.ric_radial, 0.0);
            assert_eq!(q.scalar, 0.0);
            assert!(rel(q.scalar_sphere, 2.0 / (t * t)) < 1e-15);
        }
        let (a, a1) = m.sphere_area_and_derivative(2.0).unwrap();
        assert!((a - 16.0 * PI).abs() < 1e-12 && (a1 - 16.0 * PI).abs() < 1e-12);
        assert_eq!(m.gauss_codazzi_residual(1.0).unwrap(), 0.0);
    }

    #[test]
    fn cylinder_limit() {
        let m = cone(0.0);
        let (j, j1, j2) = m.jacobian_data(40.0).unwrap();
        assert!((j - 1.0).abs() < 1e-15 && j1.abs() < 1e-30 && j2.abs() < 1e-30);
        let q = m.point_curvatures(40.0).unwrap();
        assert!((q.scalar - 2.0).abs() < 1e-14);
        assert!(q.ric_radial.abs() < 1e-30);
        let (a, a1) = m.sphere_area_and_derivative(40.0).unwrap();
        assert!((a - 4.0 * PI).abs() < 1e-13 && a1.abs() < 1e-30);
    }

    #[test]
    fn cone_half_at_one() {
        // mpmath oracle from φ(1), φ'(1), φ''(1) of 0.5 t + 0.5 tanh t
        let m = cone(0.5);
        let (j, _, _) = m.jacobian_data(1.0).unwrap();
        assert!((j - 0.775_803_492_574_375_9).abs() < 1e-14);
        let q = m.point_curvatures(1.0).unwrap();
        assert!((q.ric_radial - 0.726_273_990_279_163_8).abs() < 1e-14);
        assert!((q.lambda - 0.806_073_485_662_541_5).abs() < 1e-14);
        let (a, _) = m.sphere_area_and_derivative(1.0).unwrap();
        assert!((a - 9.749_034_211_603_852).abs() < 1e-12);
    }

    #[test]
    fn gauss_codazzi_closes() {
        for (m, ts) in [
            (cone(0.5), vec![0.5, 1.0, 5.0, 50.0]),
            (cone(0.0), vec![3.0]),
        ] {
            for t in ts {
                let q = m.point_curvatures(t).unwrap();
                let r = m.gauss_codazzi_residual(t).unwrap();
                assert!(r.abs() <= 1e-10 * (1.0 + q.scalar.abs()), "t={t} r={r}");
            }
        }
    }

    #[test]
    fn calabi_identities() {
        for alpha in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let m = cone(alpha);
            for t in [0.5, 1.0, 2.0, 10.0, 60.0, 100.0] {
                let q = m.point_curvatures(t).unwrap();
                // trace identity J'/J = λ₁ + λ₂
                assert!(rel(q.j1 / q.j, 2.0 * q.lambda) <= 1e-12);
                // Rc(∇ρ) = 2λ₁λ₂ - J''/J, and the ½(J'/J)² bound is an equality
                let ric = 2.0 * q.lambda * q.lambda - q.j2 / q.j;
                assert!((q.ric_radial - ric).abs() <= 1e-12 * (1.0 + q.ric_radial.abs()));
                let bound = 0.5 * (q.j1 / q.j).powi(2) - q.j2 / q.j;
                assert!((q.ric_radial - bound).abs() <= 1e-12 * (1.0 + bound.abs()));
                assert!(q.j1 >= 0.0 && q.ric_radial >= 0.0 && q.ric_tangential >= -1e-15);
                assert!(q.scalar >= -1e-15);

                // (J'/J)' = -(λ₁² + λ₂²) - Rc(∇ρ) by central differences
                let h = 1e-4;
                let slope = |s: f64| {
                    let (j, j1, _) = m.jacobian_data(s).unwrap();
                    j1 / j
                };
                let fd = (slope(t + h) - slope(t - h)) / (2.0 * h);
                let exact = -2.0 * q.lambda * q.lambda - q.ric_radial;
                assert!(
                    (fd - exact).abs() <= 1e-5 * exact.abs(),
                    "alpha={alpha} t={t} fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn domain_and_validation_errors() {
        let m = cone(0.5);
        assert!(matches!(m.jet(0.0), Err(GeometryError::OutOfDomain { .. })));
        assert!(matches!(m.jet(2e4), Err(GeometryError::OutOfDomain { .. })));
        let bad = RadialProfile::from_source("t + t^2", 10.0, 32).unwrap();
        assert!(matches!(
            WarpedManifold::new(bad.clone()),
            Err(GeometryError::InvalidProfile(_))
        ));
        let m = WarpedManifold::unvalidated(bad);
        assert!(m.point_curvatures(1.0).unwrap().ric_radial < 0.0);
    }
}
