//! Numerical laboratory for scalar-curvature integrals on 3-manifolds with a pole.
//!
//! The crate builds rotationally symmetric metrics `dr² + φ(r)²·g_{S²}` from
//! user-supplied or builtin profiles, evaluates their curvature in closed
//! form, integrates it over geodesic balls, and checks the comparison
//! inequalities and asymptotic identities that hold on complete manifolds with
//! a pole and nonnegative Ricci curvature:
//!
//! * Bishop–Gromov volume and Jacobian comparisons,
//! * the slope bound `0 ≤ J'/J ≤ 2/t`,
//! * `∫_{B(r)} Rc(∇ρ,∇ρ) / r → 0`,
//! * `∫_{B(r)} R / r → 8π(1 - V)` with `V` the asymptotic volume ratio.
//!
//! A direction-dependent Jacobi-field integrator ([`jacobi`]) covers the
//! statements that only involve radial data for anisotropic curvature fields.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod geometry;
pub mod jacobi;
pub mod profile;
pub mod quadrature;
pub mod report;
pub mod theorem;

pub use geometry::{GeometryError, PointQuantities, WarpedManifold};
pub use profile::{builtin_profile, parse_profile, Jet2, ProfileError, ProfileExpr, RadialProfile};
pub use quadrature::{QuadResult, QuadTolerance};
