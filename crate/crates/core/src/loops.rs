//! The four loop-closure solvers and the motor/joint maps M2Q and Q2M.
//!
//! Loop 2 turns carriage travel m2 into MCP flexion q2; loop 3 turns m3 into
//! the bell crank angle beta; loop 4 turns beta into PIP flexion q3 (no q2
//! dependence); loop 5 couples DIP flexion q4 to q3. The abduction motor
//! drives q1 directly.
//!
//! The flexion carriages ride on the abducting metacarpal, so the closures
//! are invariant under q1: the full base-frame residuals (including their
//! sin q1 terms) are zeroed for any abduction angle by the same flexion
//! solution. The residual functions here evaluate the complete base-frame
//! expressions and are what the validation sweeps and test oracles score.

use crate::error::{Error, Result};
use crate::params::KinematicParams;
use crate::trig::{self, rot_x, rot_y, Branch, RotationForm, TrigCoefficients};
use crate::types::{JointState, MotorState, Vec3};

fn carriage(p: Vec3, travel: f64) -> Vec3 {
    p + Vec3::new(0.0, 0.0, travel)
}

// --- reductions ------------------------------------------------------------

/// Loop 2 reduced to trig coefficients in q2: ‖P2 + M2 − R2·OA‖ = l2.
pub fn loop2_coefficients(m2: f64, q1: f64, p: &KinematicParams, branch: Branch) -> TrigCoefficients {
    let u = rot_y(q1) * carriage(p.p2, m2);
    trig::loop_reduce(u, p.oa, p.l2, RotationForm::yawed(q1), branch)
}

/// Loop 3 reduced to trig coefficients in beta: ‖P3 + M3 − R2·OA − R3·AB‖ = l3,
/// with R3 carrying (q2 + beta1) about x and beta1 = beta + beta_offset.
pub fn loop3_coefficients(
    m3: f64,
    q1: f64,
    q2: f64,
    p: &KinematicParams,
    branch: Branch,
) -> TrigCoefficients {
    let u = rot_y(q1) * (carriage(p.p3, m3) - rot_x(q2) * p.oa);
    let form = RotationForm::yawed(q1).with_x_offset(q2 + p.beta_offset);
    trig::loop_reduce(u, p.ab, p.l3, form, branch)
}

/// Loop 4 reduced to trig coefficients in q3: ‖−R_beta1·AC + AD + R_q3·DF‖ = l4.
pub fn loop4_coefficients(beta: f64, p: &KinematicParams, branch: Branch) -> TrigCoefficients {
    let u = p.ad - rot_x(beta + p.beta_offset) * p.ac;
    trig::loop_reduce(u, -p.df, p.l4, RotationForm::about_x(), branch)
}

/// Loop 4 solved the other way: coefficients in beta for a known q3.
pub fn loop4_inverse_coefficients(q3: f64, p: &KinematicParams, branch: Branch) -> TrigCoefficients {
    let u = p.ad + rot_x(q3) * p.df;
    let form = RotationForm::about_x().with_x_offset(p.beta_offset);
    trig::loop_reduce(u, p.ac, p.l4, form, branch)
}

/// Loop 5 reduced to trig coefficients in q4: ‖R_q3·DG + R_q3 R_q4·GH − DE‖ = l5.
pub fn loop5_coefficients(q3: f64, p: &KinematicParams, branch: Branch) -> TrigCoefficients {
    let u = p.de - rot_x(q3) * p.dg;
    let form = RotationForm::about_x().with_x_offset(q3);
    trig::loop_reduce(u, p.gh, p.l5, form, branch)
}

// --- residuals (the oracle-facing equation forms) --------------------------

/// Signed residual of loop 2 in the base frame, mm.
pub fn loop2_residual(q1: f64, q2: f64, m2: f64, p: &KinematicParams) -> f64 {
    let r2 = rot_y(q1) * rot_x(q2);
    (rot_y(q1) * carriage(p.p2, m2) - r2 * p.oa).norm() - p.l2
}

/// Signed residual of loop 3 in the base frame, mm.
pub fn loop3_residual(q1: f64, q2: f64, beta: f64, m3: f64, p: &KinematicParams) -> f64 {
    let r2 = rot_y(q1) * rot_x(q2);
    let r3 = rot_y(q1) * rot_x(q2 + beta + p.beta_offset);
    (rot_y(q1) * carriage(p.p3, m3) - r2 * p.oa - r3 * p.ab).norm() - p.l3
}

/// Signed residual of loop 4, mm.
pub fn loop4_residual(beta: f64, q3: f64, p: &KinematicParams) -> f64 {
    (-(rot_x(beta + p.beta_offset) * p.ac) + p.ad + rot_x(q3) * p.df).norm() - p.l4
}

/// Signed residual of loop 5, mm.
pub fn loop5_residual(q3: f64, q4: f64, p: &KinematicParams) -> f64 {
    (rot_x(q3) * p.dg + rot_x(q3) * (rot_x(q4) * p.gh) - p.de).norm() - p.l5
}

/// All four loop residuals for a consistent (M, Q) pair, mm.
pub fn loop_residuals(m: &MotorState, q: &JointState, p: &KinematicParams) -> [f64; 4] {
    [
        loop2_residual(q.q1, q.q2, m.m2, p),
        loop3_residual(q.q1, q.q2, q.beta, m.m3, p),
        loop4_residual(q.beta, q.q3, p),
        loop5_residual(q.q3, q.q4, p),
    ]
}

// --- forward solves (motor -> joint) ---------------------------------------

fn check_joint(name: &'static str, value: f64, r: crate::types::Range) -> Result<f64> {
    if r.contains(value, 1e-9) {
        Ok(value)
    } else {
        Err(Error::OutOfJointLimits { joint: name, value, lo: r.lo, hi: r.hi })
    }
}

/// Solves loop 2 for the MCP flexion angle q2.
pub fn solve_loop2(m2: f64, q1: f64, p: &KinematicParams) -> Result<f64> {
    let coeffs = loop2_coefficients(m2, q1, p, p.branches.loop2);
    let q2 = trig::solve_trig(&coeffs).map_err(|e| e.with_loop(2))?;
    check_joint("q2", q2, p.joint_limits.q2)
}

/// Solves loop 3 for the bell crank angle beta.
pub fn solve_loop3(m3: f64, q1: f64, q2: f64, p: &KinematicParams) -> Result<f64> {
    let coeffs = loop3_coefficients(m3, q1, q2, p, p.branches.loop3);
    let beta = trig::solve_trig(&coeffs).map_err(|e| e.with_loop(3))?;
    check_joint("beta", beta, p.joint_limits.beta)
}

/// Solves loop 4 for the PIP flexion angle q3. No q2 enters: the crank, the
/// PIP crank point, and the coupler all live on the proximal phalanx.
pub fn solve_loop4(beta: f64, p: &KinematicParams) -> Result<f64> {
    let coeffs = loop4_coefficients(beta, p, p.branches.loop4);
    let q3 = trig::solve_trig(&coeffs).map_err(|e| e.with_loop(4))?;
    check_joint("q3", q3, p.joint_limits.q3)
}

/// Solves loop 5 for the coupled DIP flexion angle q4.
pub fn solve_loop5(q3: f64, p: &KinematicParams) -> Result<f64> {
    let coeffs = loop5_coefficients(q3, p, p.branches.loop5);
    let q4 = trig::solve_trig(&coeffs).map_err(|e| e.with_loop(5))?;
    check_joint("q4", q4, p.joint_limits.q4)
}

/// Inverts loop 4: the bell crank angle that realizes a given q3.
pub fn beta_from_q3(q3: f64, p: &KinematicParams) -> Result<f64> {
    let coeffs = loop4_inverse_coefficients(q3, p, p.branches.loop4_inverse);
    let beta = trig::solve_trig(&coeffs).map_err(|e| e.with_loop(4))?;
    check_joint("beta", beta, p.joint_limits.beta)
}

/// Builds a consistent joint state from the three independent coordinates.
pub fn joints_from_independent(q1: f64, q2: f64, q3: f64, p: &KinematicParams) -> Result<JointState> {
    check_joint("q1", q1, p.joint_limits.q1)?;
    check_joint("q2", q2, p.joint_limits.q2)?;
    check_joint("q3", q3, p.joint_limits.q3)?;
    let beta = beta_from_q3(q3, p)?;
    let q4 = solve_loop5(q3, p)?;
    Ok(JointState { q1, q2, q3, q4, beta })
}

/// M2Q: the full motor-to-joint map, composed loop by loop.
pub fn m2q(m: &MotorState, p: &KinematicParams) -> Result<JointState> {
    p.check_motor_state(m)?;
    let q1 = check_joint("q1", m.m1, p.joint_limits.q1)?; // direct drive
    let q2 = solve_loop2(m.m2, q1, p)?;
    let beta = solve_loop3(m.m3, q1, q2, p)?;
    let q3 = solve_loop4(beta, p)?;
    let q4 = solve_loop5(q3, p)?;
    Ok(JointState { q1, q2, q3, q4, beta })
}

/// M2Q without the joint-limit guards: the mechanism assembles wherever the
/// motors put it, limits or not. The plant uses this so its fingertip stays
/// observable during excursions outside the working joint box; control-facing
/// code keeps the checked [`m2q`].
pub fn m2q_unchecked(m: &MotorState, p: &KinematicParams) -> Result<JointState> {
    let q1 = m.m1;
    let b = &p.branches;
    let q2 = trig::solve_trig(&loop2_coefficients(m.m2, q1, p, b.loop2)).map_err(|e| e.with_loop(2))?;
    let beta =
        trig::solve_trig(&loop3_coefficients(m.m3, q1, q2, p, b.loop3)).map_err(|e| e.with_loop(3))?;
    let q3 = trig::solve_trig(&loop4_coefficients(beta, p, b.loop4)).map_err(|e| e.with_loop(4))?;
    let q4 = trig::solve_trig(&loop5_coefficients(q3, p, b.loop5)).map_err(|e| e.with_loop(5))?;
    Ok(JointState { q1, q2, q3, q4, beta })
}

// --- inverse solves (joint -> motor) ---------------------------------------

/// Solves the loop-2 quadratic for the carriage travel m2 realizing q2.
///
/// The closure is quadratic in m2; the physical stroke is one-sided, so the
/// root inside the motor limits wins. With both roots inside, the one nearer
/// `hint` (or zero when stateless) is returned.
pub fn motor2_from_q2(q2: f64, hint: Option<f64>, p: &KinematicParams) -> Result<f64> {
    let k = p.p2 - rot_x(q2) * p.oa;
    quadratic_travel(k, p.l2, p.motor_limits.m2, hint, 2)
}

/// Solves the loop-3 quadratic for the carriage travel m3 realizing beta.
/// The closure rides with the abduction yaw, so `q1` does not affect the
/// result; it is accepted to mirror the forward solve's signature.
pub fn motor3_from_beta(
    _q1: f64,
    q2: f64,
    beta: f64,
    hint: Option<f64>,
    p: &KinematicParams,
) -> Result<f64> {
    let k = p.p3 - rot_x(q2) * p.oa - rot_x(q2 + beta + p.beta_offset) * p.ab;
    quadratic_travel(k, p.l3, p.motor_limits.m3, hint, 3)
}

fn quadratic_travel(
    k: Vec3,
    rod: f64,
    limits: crate::types::Range,
    hint: Option<f64>,
    loop_id: u8,
) -> Result<f64> {
    // ‖K + (0,0,m)‖ = rod  =>  (m + Kz)² = rod² − Kx² − Ky².
    let disc = rod * rod - k.x * k.x - k.y * k.y;
    if disc < 0.0 {
        return Err(Error::Unsolvable { loop_id, arg: disc });
    }
    let root = disc.sqrt();
    let candidates = [-k.z + root, -k.z - root];
    let target = hint.unwrap_or(0.0);
    let in_limits: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|m| limits.contains(*m, 1e-9))
        .collect();
    let pool: &[f64] = if in_limits.is_empty() { &candidates } else { &in_limits };
    Ok(pool
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap())
}

/// How far a joint state deviates from the loop couplings, rad.
pub fn coupling_mismatch(q: &JointState, p: &KinematicParams) -> Result<(f64, f64)> {
    let beta = beta_from_q3(q.q3, p)?;
    let q4 = solve_loop5(q.q3, p)?;
    Ok(((q.beta - beta).abs(), (q.q4 - q4).abs()))
}

/// Q2M: the joint-to-motor map. Requires a consistent in-range state.
pub fn q2m(q: &JointState, p: &KinematicParams) -> Result<MotorState> {
    q2m_hinted(q, None, p)
}

/// Q2M with a previous motor state used to disambiguate quadratic roots
/// during continuous trajectories.
pub fn q2m_hinted(q: &JointState, prev: Option<&MotorState>, p: &KinematicParams) -> Result<MotorState> {
    if !q.is_finite() {
        return Err(Error::InvalidConfig { what: "joint state must be finite".into() });
    }
    check_joint("q1", q.q1, p.joint_limits.q1)?;
    check_joint("q2", q.q2, p.joint_limits.q2)?;
    check_joint("q3", q.q3, p.joint_limits.q3)?;
    check_joint("q4", q.q4, p.joint_limits.q4)?;
    check_joint("beta", q.beta, p.joint_limits.beta)?;
    let (beta_gap, q4_gap) = coupling_mismatch(q, p)?;
    if beta_gap > 1e-9 {
        return Err(Error::InconsistentJointState { what: "beta", mismatch: beta_gap });
    }
    if q4_gap > 1e-9 {
        return Err(Error::InconsistentJointState { what: "q4", mismatch: q4_gap });
    }
    let m2 = motor2_from_q2(q.q2, prev.map(|m| m.m2), p)?;
    let m3 = motor3_from_beta(q.q1, q.q2, q.beta, prev.map(|m| m.m3), p)?;
    Ok(MotorState::new(q.q1, m2, m3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::KinematicParams;
    use approx::assert_abs_diff_eq;

    #[test]
    fn home_solves_to_zero() {
        let p = KinematicParams::default_desk();
        assert_abs_diff_eq!(solve_loop2(0.0, 0.0, &p).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(solve_loop3(0.0, 0.0, 0.0, &p).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(solve_loop4(0.0, &p).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(solve_loop5(0.0, &p).unwrap(), 0.0, epsilon = 1e-9);
        let q = m2q(&MotorState::default(), &p).unwrap();
        for v in q.as_array() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
        let m = q2m(&q, &p).unwrap();
        for v in m.as_array() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn q3_does_not_depend_on_q2() {
        // Eq-level statement: the loop-4 closure contains no q2 at all, so
        // the same beta yields the same q3 no matter what q2 is doing.
        let p = KinematicParams::default_desk();
        let beta = 0.25;
        let q3 = solve_loop4(beta, &p).unwrap();
        // Threading different q2 values through the surrounding solves must
        // not change the answer; solve_loop4's signature has no q2 to vary,
        // which is itself the guarantee. Check residual insensitivity instead.
        for q2 in [0.0, 0.2, 0.4] {
            let _ = q2; // loop 4 residual has no q2 argument either
            assert_abs_diff_eq!(loop4_residual(beta, q3, &p), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn motor_limit_violation_is_typed() {
        let p = KinematicParams::default_desk();
        let m = MotorState::new(0.0, p.motor_limits.m2.hi + 5.0, 0.0);
        match m2q(&m, &p) {
            Err(Error::OutOfMotorLimits { motor: "m2", .. }) => {}
            other => panic!("expected OutOfMotorLimits, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_joint_state_is_rejected() {
        let p = KinematicParams::default_desk();
        let mut q = joints_from_independent(0.0, 0.1, 0.2, &p).unwrap();
        q.q4 += 0.01;
        match q2m(&q, &p) {
            Err(Error::InconsistentJointState { what: "q4", .. }) => {}
            other => panic!("expected InconsistentJointState, got {other:?}"),
        }
    }

    #[test]
    fn beta_inverse_round_trips() {
        let p = KinematicParams::default_desk();
        for k in 0..=20 {
            let q3 = p.joint_limits.q3.lo + p.joint_limits.q3.span() * k as f64 / 20.0;
            let beta = beta_from_q3(q3, &p).unwrap();
            let q3_back = solve_loop4(beta, &p).unwrap();
            assert_abs_diff_eq!(q3, q3_back, epsilon = 1e-10);
        }
    }
}
