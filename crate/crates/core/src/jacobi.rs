//! Direction-dependent Jacobi-field integration.
//!
//! Along the radial geodesic in direction `θ`, the matrix Jacobi equation
//! `U'' + R_rad(t, θ) U = 0` with `U(0) = 0`, `U'(0) = I` gives the polar
//! Jacobian `J = det U` and the shape operator `S = U'U⁻¹` of the geodesic
//! sphere, with `tr S = J'/J` and `S' = -S² - R_rad`. A zero of `det U` is a
//! conjugate point, i.e. the pole property fails in that direction.
//!
//! Fields here need not come from a genuine metric; only statements that use
//! radial data alone (the slope bound and the per-direction Jacobian
//! comparisons) are meaningful for them.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ProfileError, ProfileExpr, RadialProfile, BUILTIN_T_MAX};

pub const DEFAULT_DIRECTIONS: usize = 8;
/// Isotropic fields evaluate `-φ''/φ` no closer to the pole than this.
const ISOTROPIC_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JacobiError {
    #[error("invalid step: need h > 0 and t_max ≥ 10h (h = {h}, t_max = {t_max})")]
    BadStep { h: f64, t_max: f64 },
    #[error("Jacobi state became non-finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("radius {t} outside the integrated range [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("radius {t} lies beyond the conjugate point at {conjugate}")]
    BeyondConjugate { t: f64, conjugate: f64 },
    #[error("direction {dir} out of range for {n} directions")]
    BadDirection { dir: usize, n: usize },
    #[error("invalid field label `{0}`")]
    BadLabel(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    /// `(-φ''/φ) I`, the radial curvature of a warped product.
    Isotropic(ProfileExpr),
    /// `k I`.
    Constant(f64),
    /// `k sech²(t) diag(1 + β cos θ, 1 - β cos θ)`.
    Aniso { k: f64, beta: f64 },
}

/// A symmetric 2×2 radial curvature operator sampled along `n_directions`
/// representative directions `θ_i = 2πi/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCurvatureField {
    kind: FieldKind,
    n_directions: usize,
    label: String,
}

impl RadialCurvatureField {
    pub fn isotropic(profile: &RadialProfile, n_directions: usize) -> Self {
        Self {
            kind: FieldKind::Isotropic(profile.expr().clone()),
            n_directions,
            label: format!("isotropic:{}", profile.source()),
        }
    }

    pub fn constant(k: f64, n_directions: usize) -> Self {
        Self {
            kind: FieldKind::Constant(k),
            n_directions,
            label: format!("constant:{k}"),
        }
    }

    pub fn aniso(k: f64, beta: f64, n_directions: usize) -> Result<Self, JacobiError> {
        if !(k >= 0.0 && k.is_finite() && beta.is_finite()) {
            return Err(JacobiError::BadLabel(format!(
                "aniso:{k},{beta} needs k ≥ 0 so that the trace 2k(t) is nonnegative"
            )));
        }
        Ok(Self {
            kind: FieldKind::Aniso { k, beta },
            n_directions,
            label: format!("aniso:{k},{beta}"),
        })
    }

    /// Parses `isotropic:<profile>`, `constant:<k>` or `aniso:<k,β>`.
    pub fn from_label(label: &str, n_directions: usize) -> Result<Self, JacobiError> {
        let bad = || JacobiError::BadLabel(label.to_string());
        if n_directions == 0 {
            return Err(bad());
        }
        let (kind, rest) = label.trim().split_once(':').ok_or_else(bad)?;
        match kind {
            "isotropic" => {
                let profile = RadialProfile::from_spec(rest, BUILTIN_T_MAX)?;
                Ok(Self::isotropic(&profile, n_directions))
            }
            "constant" => {
                let k: f64 = rest.trim().parse().map_err(|_| bad())?;
                Ok(Self::constant(k, n_directions))
            }
            "aniso" => {
                let (k, beta) = rest.split_once(',').ok_or_else(bad)?;
                let k: f64 = k.trim().parse().map_err(|_| bad())?;
                let beta: f64 = beta.trim().parse().map_err(|_| bad())?;
                Self::aniso(k, beta, n_directions)
            }
            _ => Err(bad()),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    pub fn direction_angle(&self, dir: usize) -> f64 {
        2.0 * PI * dir as f64 / self.n_directions as f64
    }

    /// `R_rad(t, θ_dir)`.
    pub fn eval(&self, t: f64, dir: usize) -> Matrix2<f64> {
        match &self.kind {
            FieldKind::Isotropic(expr) => {
                let k = match expr.eval_jet2(t.max(ISOTROPIC_FLOOR)) {
                    Ok(p) => -p.d2 / p.v,
                    Err(_) => f64::NAN,
                };
                Matrix2::from_diagonal_element(k)
            }
            FieldKind::Constant(k) => Matrix2::from_diagonal_element(*k),
            FieldKind::Aniso { k, beta } => {
                let sech = 1.0 / t.cosh();
                let kt = k * sech * sech;
                let c = beta * self.direction_angle(dir).cos();
                Matrix2::new(kt * (1.0 + c), 0.0, 0.0, kt * (1.0 - c))
            }
        }
    }

    /// Whether `tr R_rad ≥ 0` at every sampled radius and direction.
    pub fn trace_nonnegative(&self, grid: &[f64]) -> bool {
        (0..self.n_directions).all(|d| grid.iter().all(|&t| self.eval(t, d).trace() >= 0.0))
    }
}

/// Solution of the matrix Jacobi equation along one direction.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    pub direction: usize,
    pub theta: f64,
    pub grid: Vec<f64>,
    pub u: Vec<Matrix2<f64>>,
    pub du: Vec<Matrix2<f64>>,
    /// `det U` at each grid point.
    pub jac: Vec<f64>,
    pub conjugate_point: Option<f64>,
    field: RadialCurvatureField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeData {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `J'/J = tr S`.
    pub j_over_j: f64,
    /// `Rc(∇ρ,∇ρ) = tr R_rad`.
    pub ric_radial: f64,
}

type State = (Matrix2<f64>, Matrix2<f64>);

fn rk4_step(field: &RadialCurvatureField, dir: usize, t: f64, h: f64, (u, v): State) -> State {
    let r0 = field.eval(t, dir);
    let rm = field.eval(t + 0.5 * h, dir);
    let r1 = field.eval(t + h, dir);
    let k1u = v;
    let k1v = -r0 * u;
    let k2u = v + k1v * (0.5 * h);
    let k2v = -rm * (u + k1u * (0.5 * h));
    let k3u = v + k2v * (0.5 * h);
    let k3v = -rm * (u + k2u * (0.5 * h));
    let k4u = v + k3v * h;
    let k4v = -r1 * (u + k3u * h);
    (
        u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0),
        v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    )
}

/// Integrates `U'' + R_rad U = 0` from `t₀ = h` to `t_max` with classic RK4,
/// seeding `U(t₀) = t₀I - t₀³R(0)/6`, `U'(t₀) = I - t₀²R(0)/2`. The last step
/// is shortened to land on `t_max`.
pub fn integrate_jacobi(
    field: &RadialCurvatureField,
    dir: usize,
    t_max: f64,
    h: f64,
) -> Result<JacobiSolution, JacobiError> {
    if !(h > 0.0 && t_max.is_finite() && t_max >= 10.0 * h) {
        return Err(JacobiError::BadStep { h, t_max });
    }
    if dir >= field.n_directions {
        return Err(JacobiError::BadDirection {
            dir,
            n: field.n_directions,
        });
    }
    let t0 = h;
    let r0 = field.eval(0.0, dir);
    let id = Matrix2::identity();
    let mut state: State = (
        id * t0 - r0 * (t0 * t0 * t0 / 6.0),
        id - r0 * (t0 * t0 / 2.0),
    );

    let steps = ((t_max - t0) / h).ceil() as usize;
    let mut grid = Vec::with_capacity(steps + 1);
    let mut u = Vec::with_capacity(steps + 1);
    let mut du = Vec::with_capacity(steps + 1);
    grid.push(t0);
    u.push(state.0);
    du.push(state.1);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let next = if i + 1 == steps {
            t_max
        } else {
            t0 + (i + 1) as f64 * h
        };
        state = rk4_step(field, dir, t, next - t, state);
        if !(state.0.iter().chain(state.1.iter()).all(|x| x.is_finite())) {
            return Err(JacobiError::NonFinite { t: next });
        }
        grid.push(next);
        u.push(state.0);
        du.push(state.1);
    }
    let jac = u.iter().map(|m| m.determinant()).collect();
    let mut sol = JacobiSolution {
        direction: dir,
        theta: field.direction_angle(dir),
        grid,
        u,
        du,
        jac,
        conjugate_point: None,
        field: field.clone(),
    };
    sol.conjugate_point = conjugate_point_scan(&sol);
    Ok(sol)
}

/// Integrates every direction of the field concurrently.
pub fn integrate_all(
    field: &RadialCurvatureField,
    t_max: f64,
    h: f64,
) -> Result<Vec<JacobiSolution>, JacobiError> {
    (0..field.n_directions)
        .into_par_iter()
        .map(|d| integrate_jacobi(field, d, t_max, h))
        .collect()
}

fn hermite(
    t0: f64,
    t1: f64,
    y0: Matrix2<f64>,
    y1: Matrix2<f64>,
    d0: Matrix2<f64>,
    d1: Matrix2<f64>,
    t: f64,
) -> Matrix2<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d0 * (h * (s3 - 2.0 * s2 + s))
        + y1 * (-2.0 * s3 + 3.0 * s2)
        + d1 * (h * (s3 - s2))
}

impl JacobiSolution {
    pub fn field(&self) -> &RadialCurvatureField {
        &self.field
    }

    pub fn t_start(&self) -> f64 {
        self.grid[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.grid.last().expect("nonempty grid")
    }

    fn segment(&self, t: f64) -> Result<usize, JacobiError> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(JacobiError::OutOfRange { t, t0, t1 });
        }
        let i = self.grid.partition_point(|&g| g <= t);
        Ok(i.saturating_sub(1).min(self.grid.len() - 2))
    }

    /// Dense output `(U(t), U'(t))` by cubic Hermite interpolation, using
    /// `U'' = -R_rad U` for the derivative of `U'`.
    pub fn state_at(&self, t: f64) -> Result<(Matrix2<f64>, Matrix2<f64>), JacobiError> {
        let i = self.segment(t)?;
        let (ta, tb) = (self.grid[i], self.grid[i + 1]);
        if t == ta {
            return Ok((self.u[i], self.du[i]));
        }
        if t == tb {
            return Ok((self.u[i + 1], self.du[i + 1]));
        }
        let dir = self.direction;
        let acc_a = -self.field.eval(ta, dir) * self.u[i];
        let acc_b = -self.field.eval(tb, dir) * self.u[i + 1];
        let u = hermite(
            ta,
            tb,
            self.u[i],
            self.u[i + 1],
            self.du[i],
            self.du[i + 1],
            t,
        );
        let du = hermite(ta, tb, self.du[i], self.du[i + 1], acc_a, acc_b, t);
        Ok((u, du))
    }

    pub fn det_at(&self, t: f64) -> Result<f64, JacobiError> {
        Ok(self.state_at(t)?.0.determinant())
    }
}

/// Smallest `t` where `U` becomes singular. Simple zeros show up as a sign
/// change of `det U` on the grid and are refined by bisection on the dense
/// output; a double zero (both directions focusing together, as for isotropic
/// fields) shows up as a grid-local minimum of `det U` that the dense output
/// drives to zero.
pub fn conjugate_point_scan(sol: &JacobiSolution) -> Option<f64> {
    let j = &sol.jac;
    if j[0] <= 0.0 {
        return Some(sol.grid[0]);
    }
    for i in 1..j.len() {
        if j[i] <= 0.0 {
            return Some(bisect_det(sol, sol.grid[i - 1], sol.grid[i]));
        }
        if i + 1 < j.len() && j[i] < j[i - 1] && j[i] <= j[i + 1] {
            let (a, b) = (sol.grid[i - 1], sol.grid[i + 1]);
            let (t_min, d_min) = minimize_det(sol, a, b);
            if d_min <= 0.0 {
                return Some(bisect_det(sol, a, t_min));
            }
            if d_min <= DOUBLE_ZERO_REL * j[i - 1].max(j[i + 1]) {
                return Some(t_min);
            }
        }
    }
    None
}

const DOUBLE_ZERO_REL: f64 = 1e-10;

fn det_or_neg(sol: &JacobiSolution, t: f64) -> f64 {
    sol.det_at(t).unwrap_or(-1.0)
}

fn bisect_det(sol: &JacobiSolution, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if det_or_neg(sol, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn minimize_det(sol: &JacobiSolution, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (det_or_neg(sol, c), det_or_neg(sol, d));
    for _ in 0..200 {
        if fc < 0.0 {
            return (c, fc);
        }
        if fd < 0.0 {
            return (d, fd);
        }
        if b - a <= 1e-15 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = det_or_neg(sol, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = det_or_neg(sol, d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Principal curvatures and related radial data of the geodesic sphere at `t`.
pub fn shape_data(sol: &JacobiSolution, t: f64) -> Result<ShapeData, JacobiError> {
    if let Some(c) = sol.conjugate_point {
        if t >= c {
            return Err(JacobiError::BeyondConjugate { t, conjugate: c });
        }
    }
    let (u, du) = sol.state_at(t)?;
    let det = u.determinant();
    // U'U⁻¹ via the adjugate.
    let adj = Matrix2::new(u[(1, 1)], -u[(0, 1)], -u[(1, 0)], u[(0, 0)]);
    let s = du * adj / det;
    // S is symmetric for symmetric R_rad; symmetrise away rounding.
    let a = s[(0, 0)];
    let d = s[(1, 1)];
    let b = 0.5 * (s[(0, 1)] + s[(1, 0)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    Ok(ShapeData {
        lambda1: mean - rad,
        lambda2: mean + rad,
        j_over_j: a + d,
        ric_radial: sol.field.eval(t, sol.direction).trace(),
    })
}

/// Observed order `log₂(|U_h - U_{h/2}| / |U_{h/2} - U_{h/4}|)` of `U(t_end)`.
pub fn measure_convergence_order(
    field: &RadialCurvatureField,
    dir: usize,
    t_end: f64,
    h: f64,
) -> Result<f64, JacobiError> {
    let end = |step: f64| -> Result<Matrix2<f64>, JacobiError> {
        let sol = integrate_jacobi(field, dir, t_end, step)?;
        Ok(*sol.u.last().expect("nonempty"))
    };
    let a = end(h)?;
    let b = end(h / 2.0)?;
    let c = end(h / 4.0)?;
    Ok(((a - b).norm() / (b - c).norm()).log2())
}
