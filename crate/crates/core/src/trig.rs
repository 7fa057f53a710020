//! Reduction of a loop-closure equation to `A sin q + B cos q + C = 0` and
//! its closed-form solution.
//!
//! Every closure in the mechanism has the shape `l² = (U − R(q)V)ᵀ(U − R(q)V)`
//! with exactly one unknown rotation. Expanding with `RᵀR = I` and moving the
//! known terms right gives `UᵀR(q)V = (‖U‖² + ‖V‖² − l²)/2`, whose left side
//! collapses to a single sine/cosine pair in the unknown angle.

use crate::error::{Error, Result};
use crate::types::Vec3;
use nalgebra::Matrix3;

/// Which of the two roots of the reduced equation to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Coefficients of `A sin q + B cos q + C = 0` for one loop, plus the branch
/// that selects the mechanically assembled configuration. Units are mm².
#[derive(Debug, Clone, Copy)]
pub struct TrigCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub branch: Branch,
}

impl TrigCoefficients {
    /// The arccos argument `−C/√(A²+B²)`; solvable iff its magnitude is ≤ 1
    /// (up to the clamping slack).
    pub fn arccos_arg(&self) -> f64 {
        -self.c / self.a.hypot(self.b)
    }

    /// Evaluates the reduced equation at `q`.
    pub fn residual(&self, q: f64) -> f64 {
        self.a * q.sin() + self.b * q.cos() + self.c
    }
}

/// The single-unknown rotation form of one loop: `R(q) = Rot_y(yaw) · Rot_x(x_offset + q)`.
///
/// `yaw` carries the known abduction angle for loops whose vectors are
/// expressed in the base frame; `x_offset` carries a known flexion angle
/// stacked under the unknown (`q2` under the bell crank, `q3` under the DIP).
#[derive(Debug, Clone, Copy, Default)]
pub struct RotationForm {
    pub yaw: f64,
    pub x_offset: f64,
}

impl RotationForm {
    pub fn about_x() -> Self {
        Self { yaw: 0.0, x_offset: 0.0 }
    }

    pub fn yawed(yaw: f64) -> Self {
        Self { yaw, x_offset: 0.0 }
    }

    pub fn with_x_offset(mut self, x_offset: f64) -> Self {
        self.x_offset = x_offset;
        self
    }

    /// Materializes `R(q)` for residual evaluation.
    pub fn matrix(&self, q: f64) -> Matrix3<f64> {
        rot_y(self.yaw) * rot_x(self.x_offset + q)
    }
}

/// Rotation about x by `q` (flexion-plane rotations).
pub fn rot_x(q: f64) -> Matrix3<f64> {
    let (s, c) = q.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation about y by `q` (the abduction rotation).
pub fn rot_y(q: f64) -> Matrix3<f64> {
    let (s, c) = q.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Derivative of [`rot_x`] with respect to its angle.
pub fn drot_x(q: f64) -> Matrix3<f64> {
    let (s, c) = q.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

/// Derivative of [`rot_y`] with respect to its angle.
pub fn drot_y(q: f64) -> Matrix3<f64> {
    let (s, c) = q.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

/// Expands `UᵀR(q)V = (‖U‖² + ‖V‖² − l²)/2` into trig coefficients in the
/// unknown `q` for the given rotation form.
///
/// `u` is the known side of the closure in the base frame, `v` the vector
/// carried by the unknown rotation, `l` the rod length the loop must realize.
pub fn loop_reduce(u: Vec3, v: Vec3, l: f64, form: RotationForm, branch: Branch) -> TrigCoefficients {
    // Pull the known yaw out of U; dot products are rotation-invariant.
    let w = rot_y(-form.yaw) * u;
    // Wᵀ Rot_x(ψ) V = a0 sin ψ + b0 cos ψ + c0 with ψ = x_offset + q.
    let a0 = w.z * v.y - w.y * v.z;
    let b0 = w.y * v.y + w.z * v.z;
    let c0 = w.x * v.x;
    // Fold the known x_offset so the coefficients address q directly.
    let (so, co) = form.x_offset.sin_cos();
    let s = 0.5 * (u.norm_squared() + v.norm_squared() - l * l);
    TrigCoefficients {
        a: a0 * co - b0 * so,
        b: a0 * so + b0 * co,
        c: c0 - s,
        branch,
    }
}

/// Slack for clamping an arccos argument that floating point pushed past ±1.
pub const ARCCOS_CLAMP_SLACK: f64 = 1e-12;

/// Solves `A sin q + B cos q + C = 0` as `q = atan2(A, B) ± arccos(−C/√(A²+B²))`,
/// normalized into (−π, π].
pub fn solve_trig(coeffs: &TrigCoefficients) -> Result<f64> {
    let r = coeffs.a.hypot(coeffs.b);
    if r == 0.0 {
        return Err(Error::Unsolvable { loop_id: 0, arg: f64::INFINITY });
    }
    let arg = -coeffs.c / r;
    if arg.abs() > 1.0 + ARCCOS_CLAMP_SLACK {
        return Err(Error::Unsolvable { loop_id: 0, arg });
    }
    let arg = arg.clamp(-1.0, 1.0);
    let base = coeffs.a.atan2(coeffs.b);
    let offset = arg.acos();
    let q = match coeffs.branch {
        Branch::Plus => base + offset,
        Branch::Minus => base - offset,
    };
    Ok(normalize_angle(q))
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(q: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = q % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}
