//! Inverse kinematics: fingertip position to joint state and motor positions.
//!
//! The abduction angle comes out in closed form, q1 = atan2(x, z), because
//! the whole flexion mechanism rides on the abduction yaw. The remaining
//! planar problem in (q2, q3) is solved by damped Newton iteration on the
//! flexion-plane residual, with the DIP coupling q4(q3) folded into the
//! analytic 2×2 Jacobian.

use crate::error::{Error, Result};
use crate::loops;
use crate::params::KinematicParams;
use crate::transforms;
use crate::trig::{drot_x, rot_x};
use crate::types::{FingertipPose, JointState, MotorState, Vec3};

/// Newton convergence tolerance on the planar residual, mm.
const NEWTON_TOL: f64 = 1e-9;
/// Levenberg-style damping added to JᵀJ.
const NEWTON_DAMPING: f64 = 1e-6;
/// Iteration budget per seed.
const NEWTON_MAX_ITERS: usize = 100;
/// Verification tolerance on the final fk round trip, mm.
const POST_TOL: f64 = 1e-6;

/// X2Q: recovers the joint state that places the fingertip at `x`.
///
/// `seed` biases the Newton start; without one, the box midpoint is tried
/// first, followed by five fixed fallback seeds spread over the joint range.
pub fn x2q(x: &FingertipPose, p: &KinematicParams, seed: Option<&JointState>) -> Result<JointState> {
    if !x.is_finite() {
        return Err(Error::InvalidConfig { what: "target position must be finite".into() });
    }
    let unreachable = |reason: String| Error::Unreachable { x: x.x, y: x.y, z: x.z, reason };
    let radius = x.to_vec().norm();
    if radius > p.total_length() + 1e-9 {
        return Err(unreachable(format!(
            "norm {radius:.3} mm exceeds the total link length {:.3} mm",
            p.total_length()
        )));
    }

    // Closed-form abduction: the planar mechanism lives in the x = 0 plane
    // rotated by q1 about y.
    let q1 = x.x.atan2(x.z);
    if !p.joint_limits.q1.contains(q1, 1e-9) {
        return Err(unreachable(format!("needs q1 = {q1:.4} rad outside limits")));
    }
    let target_y = x.y;
    let target_z = x.x.hypot(x.z);

    let q2r = p.joint_limits.q2;
    let q3r = p.joint_limits.q3;
    let lerp = |r: crate::types::Range, f: f64| r.lo + f * r.span();
    let mut seeds: Vec<(f64, f64)> = Vec::with_capacity(6);
    if let Some(s) = seed {
        seeds.push((q2r.clamp(s.q2), q3r.clamp(s.q3)));
    } else {
        seeds.push((q2r.mid(), q3r.mid()));
    }
    for (f2, f3) in [(0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9), (0.5, 0.9)] {
        seeds.push((lerp(q2r, f2), lerp(q3r, f3)));
    }

    let mut last_err = f64::INFINITY;
    for (s2, s3) in seeds {
        match newton_planar(target_y, target_z, s2, s3, p) {
            Some((q2, q3)) => {
                let q = loops::joints_from_independent(q1, q2, q3, p)?;
                let reached = transforms::fk_from_joints(&q, p);
                let gap = reached.distance(x);
                if gap > POST_TOL {
                    last_err = last_err.min(gap);
                    continue;
                }
                return Ok(q);
            }
            None => continue,
        }
    }
    Err(unreachable(format!(
        "Newton failed to converge from {NEWTON_MAX_ITERS} iterations x 6 seeds (best residual {last_err:.3e} mm)"
    )))
}

/// IK: fingertip position straight to motor positions.
pub fn ik(x: &FingertipPose, p: &KinematicParams) -> Result<MotorState> {
    loops::q2m(&x2q(x, p, None)?, p)
}

/// Damped Newton on the flexion-plane residual. Iterates are projected into
/// the joint box so the coupled loop solves stay inside their domain; steps
/// are capped and backtracked so near-boundary targets (where the planar
/// Jacobian degenerates) still converge.
fn newton_planar(ty: f64, tz: f64, mut q2: f64, mut q3: f64, p: &KinematicParams) -> Option<(f64, f64)> {
    const MAX_STEP: f64 = 0.5;
    let residual_at = |q2: f64, q3: f64| -> Option<(f64, f64)> {
        let q4 = loops::solve_loop5(q3, p).ok()?;
        let (y, z) = transforms::planar_fk(q2, q3, q4, p);
        Some((y - ty, z - tz))
    };
    for _ in 0..NEWTON_MAX_ITERS {
        let q4 = loops::solve_loop5(q3, p).ok()?;
        let (y, z) = transforms::planar_fk(q2, q3, q4, p);
        let ry = y - ty;
        let rz = z - tz;
        if ry.hypot(rz) <= NEWTON_TOL {
            return Some((q2, q3));
        }

        // Analytic planar Jacobian, with dq4/dq3 from loop 5.
        let d_ee = Vec3::new(0.0, 0.0, p.gi_z);
        let d4 = Vec3::new(0.0, p.dg_y, p.dg_z);
        let d3 = Vec3::new(0.0, p.od_y, p.od_z);
        let inner3 = d4 + rot_x(q4) * d_ee;
        let inner2 = d3 + rot_x(q3) * inner3;
        let dq4_dq3 = loop5_coupling_slope(q3, q4, p)?;
        let col2 = drot_x(q2) * inner2;
        let col3 = rot_x(q2) * (drot_x(q3) * inner3 + rot_x(q3) * (drot_x(q4) * d_ee) * dq4_dq3);

        // Solve (JᵀJ + λI) s = −Jᵀr for the 2×2 planar system.
        let j = [[col2.y, col3.y], [col2.z, col3.z]];
        let jtj = [
            [
                j[0][0] * j[0][0] + j[1][0] * j[1][0] + NEWTON_DAMPING,
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
            ],
            [
                j[0][0] * j[0][1] + j[1][0] * j[1][1],
                j[0][1] * j[0][1] + j[1][1] * j[1][1] + NEWTON_DAMPING,
            ],
        ];
        let g = [j[0][0] * ry + j[1][0] * rz, j[0][1] * ry + j[1][1] * rz];
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < 1e-18 {
            return None;
        }
        let mut s2 = (-g[0] * jtj[1][1] + g[1] * jtj[0][1]) / det;
        let mut s3 = (-g[1] * jtj[0][0] + g[0] * jtj[1][0]) / det;
        let step = s2.hypot(s3);
        if step > MAX_STEP {
            s2 *= MAX_STEP / step;
            s3 *= MAX_STEP / step;
        }
        // Backtrack while the full step worsens the residual.
        let here = ry.hypot(rz);
        let mut scale = 1.0;
        for _ in 0..8 {
            let c2 = p.joint_limits.q2.clamp(q2 + scale * s2);
            let c3 = p.joint_limits.q3.clamp(q3 + scale * s3);
            match residual_at(c2, c3) {
                Some((cy, cz)) if cy.hypot(cz) < here => {
                    q2 = c2;
                    q3 = c3;
                    break;
                }
                _ => scale *= 0.5,
            }
        }
        if scale < 1.0 / 200.0 {
            // Stalled against the box or a fold.
            q2 = p.joint_limits.q2.clamp(q2 + scale * s2);
            q3 = p.joint_limits.q3.clamp(q3 + scale * s3);
        }
    }
    None
}

/// dq4/dq3 by implicit differentiation of loop 5.
fn loop5_coupling_slope(q3: f64, q4: f64, p: &KinematicParams) -> Option<f64> {
    let g5 = rot_x(q3) * p.dg + rot_x(q3) * (rot_x(q4) * p.gh) - p.de;
    let dg_dq3 = drot_x(q3) * p.dg + drot_x(q3) * (rot_x(q4) * p.gh);
    let dg_dq4 = rot_x(q3) * (drot_x(q4) * p.gh);
    let denom = g5.dot(&dg_dq4);
    if denom.abs() < 1e-12 {
        return None;
    }
    Some(-g5.dot(&dg_dq3) / denom)
}
