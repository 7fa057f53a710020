//! The 3×3 motor-space Jacobian from transform-chain partials and
//! implicit differentiation of the loop closures.
//!
//! Each loop contributes one row of joint-motor partials: writing a closure
//! as `l² = ‖G‖²` with residual vector G, the partial of `½‖G‖²` with
//! respect to any variable v is `Gᵀ ∂G/∂v`, and the implicit function
//! theorem chains the solved angle back to the motors. The loop-2 pattern
//! extends verbatim to loops 3, 4, 5; a finite-difference oracle locks the
//! algebra in the test suite.

use crate::error::{Error, Result};
use crate::loops;
use crate::params::KinematicParams;
use crate::transforms;
use crate::trig::{drot_x, rot_x};
use crate::types::{JointState, MotorState, Vec3};
use nalgebra::Matrix3;

/// Implicit-differentiation denominators smaller than this magnitude mean
/// the loop is at a fold.
pub const FOLD_EPS: f64 = 1e-12;

/// Condition-number threshold beyond which rate resolution refuses to invert.
pub const COND_LIMIT: f64 = 1e8;

/// ∂q_j/∂M_i for the four serial angles (rows q1..q4), plus the bell crank
/// partials the chain passes through. Mixed units: rad/rad in column 1,
/// rad/mm in columns 2 and 3.
#[derive(Debug, Clone, Copy)]
pub struct LoopPartials {
    /// Rows q1..q4, columns m1..m3.
    pub dq_dm: [[f64; 3]; 4],
    /// ∂beta/∂M_i.
    pub dbeta_dm: [f64; 3],
}

/// The motor-space Jacobian with its condition number cached at construction.
/// Column 1 is mm/rad (vs m1), columns 2-3 are mm/mm (vs m2, m3).
#[derive(Debug, Clone, Copy)]
pub struct JacobianMatrix {
    pub matrix: Matrix3<f64>,
    pub cond: f64,
}

impl JacobianMatrix {
    fn new(matrix: Matrix3<f64>) -> Self {
        let sv = matrix.svd(false, false).singular_values;
        let (smin, smax) = (sv.min(), sv.max());
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        Self { matrix, cond }
    }
}

/// Joint-motor partials at a consistent (M, Q) pair by implicit
/// differentiation of the four loop closures, in drive order.
pub fn loop_partials(m: &MotorState, q: &JointState, p: &KinematicParams) -> Result<LoopPartials> {
    let beta1 = q.beta + p.beta_offset;
    let ez = Vec3::z();

    // Loop 2 in the carriage frame: G2 = P2 + M2 − Rotx(q2)·OA.
    // The carriage rides the abduction yaw, so no q1 term survives.
    let g2 = p.p2 + ez * m.m2 - rot_x(q.q2) * p.oa;
    let dg2_dq2 = -(drot_x(q.q2) * p.oa);
    let e2 = g2.dot(&dg2_dq2);
    if e2.abs() < FOLD_EPS {
        return Err(Error::SingularLoop { loop_id: 2, denom: e2 });
    }
    let c2 = g2.dot(&ez); // ∂(½‖G2‖²)/∂m2
    let dq2 = [0.0, -c2 / e2, 0.0];

    // Loop 3: G3 = P3 + M3 − Rotx(q2)·OA − Rotx(q2+beta1)·AB.
    let g3 = p.p3 + ez * m.m3 - rot_x(q.q2) * p.oa - rot_x(q.q2 + beta1) * p.ab;
    let dg3_dbeta = -(drot_x(q.q2 + beta1) * p.ab);
    let dg3_dq2 = -(drot_x(q.q2) * p.oa) + dg3_dbeta;
    let e3 = g3.dot(&dg3_dbeta);
    if e3.abs() < FOLD_EPS {
        return Err(Error::SingularLoop { loop_id: 3, denom: e3 });
    }
    let d3q2 = g3.dot(&dg3_dq2);
    let c3 = g3.dot(&ez);
    let mut dbeta = [0.0; 3];
    for i in 0..3 {
        let motor_term = if i == 2 { c3 } else { 0.0 };
        dbeta[i] = -(d3q2 * dq2[i] + motor_term) / e3;
    }

    // Loop 4: G4 = −Rotx(beta1)·AC + AD + Rotx(q3)·DF.
    let g4 = -(rot_x(beta1) * p.ac) + p.ad + rot_x(q.q3) * p.df;
    let dg4_dq3 = drot_x(q.q3) * p.df;
    let dg4_dbeta = -(drot_x(beta1) * p.ac);
    let e4 = g4.dot(&dg4_dq3);
    if e4.abs() < FOLD_EPS {
        return Err(Error::SingularLoop { loop_id: 4, denom: e4 });
    }
    let d4 = g4.dot(&dg4_dbeta);
    let mut dq3 = [0.0; 3];
    for i in 0..3 {
        dq3[i] = -(d4 * dbeta[i]) / e4;
    }

    // Loop 5: G5 = Rotx(q3)·DG + Rotx(q3)Rotx(q4)·GH − DE.
    let g5 = rot_x(q.q3) * p.dg + rot_x(q.q3) * (rot_x(q.q4) * p.gh) - p.de;
    let dg5_dq4 = rot_x(q.q3) * (drot_x(q.q4) * p.gh);
    let dg5_dq3 = drot_x(q.q3) * p.dg + drot_x(q.q3) * (rot_x(q.q4) * p.gh);
    let e5 = g5.dot(&dg5_dq4);
    if e5.abs() < FOLD_EPS {
        return Err(Error::SingularLoop { loop_id: 5, denom: e5 });
    }
    let d5 = g5.dot(&dg5_dq3);
    let mut dq4 = [0.0; 3];
    for i in 0..3 {
        dq4[i] = -(d5 * dq3[i]) / e5;
    }

    Ok(LoopPartials {
        dq_dm: [[1.0, 0.0, 0.0], dq2, dq3, dq4],
        dbeta_dm: dbeta,
    })
}

/// J(M): columns are ∂X/∂M_i assembled from the chain-rule sums. The m2
/// column has no q1 term and the m3 column no q1 or q2 terms, because those
/// partials vanish in the drive order.
pub fn jacobian(m: &MotorState, p: &KinematicParams) -> Result<JacobianMatrix> {
    let q = loops::m2q(m, p)?;
    jacobian_at(m, &q, p)
}

/// J(M) when the joint state is already known.
pub fn jacobian_at(m: &MotorState, q: &JointState, p: &KinematicParams) -> Result<JacobianMatrix> {
    let partials = loop_partials(m, q, p)?;
    let dx_dq = transforms::position_joint_partials(q, p);
    let pq = &partials.dq_dm;
    let col1 = dx_dq[0] * pq[0][0] + dx_dq[1] * pq[1][0] + dx_dq[2] * pq[2][0] + dx_dq[3] * pq[3][0];
    let col2 = dx_dq[1] * pq[1][1] + dx_dq[2] * pq[2][1] + dx_dq[3] * pq[3][1];
    let col3 = dx_dq[2] * pq[2][2] + dx_dq[3] * pq[3][2];
    Ok(JacobianMatrix::new(Matrix3::from_columns(&[col1, col2, col3])))
}

/// Resolves a task-space velocity into motor rates: Ṁ = J⁻¹Ẋ.
///
/// Fails loudly near singularities instead of damping; the planners assume
/// singularity-free paths and must handle the error.
pub fn solve_motor_rates(j: &JacobianMatrix, xdot: &Vec3) -> Result<[f64; 3]> {
    if !j.cond.is_finite() || j.cond > COND_LIMIT {
        return Err(Error::NearSingular { cond: j.cond, limit: COND_LIMIT });
    }
    let m = &j.matrix;
    let det = m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)]);
    if det.abs() < 1e-12 {
        return Err(Error::NearSingular { cond: f64::INFINITY, limit: COND_LIMIT });
    }
    // Adjugate solve; the matrix is always 3×3.
    let adj = [
        [
            m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
            m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
            m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
        ],
        [
            m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
            m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
            m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
        ],
        [
            m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
            m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
            m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        ],
    ];
    let mut rates = [0.0; 3];
    for (i, row) in adj.iter().enumerate() {
        rates[i] = (row[0] * xdot.x + row[1] * xdot.y + row[2] * xdot.z) / det;
    }
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn direct_drive_row_at_home() {
        let p = KinematicParams::default_desk();
        let m = MotorState::default();
        let q = loops::m2q(&m, &p).unwrap();
        let lp = loop_partials(&m, &q, &p).unwrap();
        assert_abs_diff_eq!(lp.dq_dm[0][0], 1.0);
        assert_abs_diff_eq!(lp.dq_dm[0][1], 0.0);
        assert_abs_diff_eq!(lp.dq_dm[0][2], 0.0);
        // Loop 2 has no m3 term.
        assert_abs_diff_eq!(lp.dq_dm[1][2], 0.0);
    }

    #[test]
    fn abduction_column_is_pure_x_at_home() {
        // With the fingertip in the flexion plane, ∂X/∂m1 points along x.
        let p = KinematicParams::default_desk();
        let j = jacobian(&MotorState::default(), &p).unwrap();
        assert!(j.matrix[(0, 0)].abs() > 1.0);
        assert_abs_diff_eq!(j.matrix[(1, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.matrix[(2, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rates_invert_the_jacobian() {
        let p = KinematicParams::default_desk();
        let j = jacobian(&MotorState::new(0.1, -1.0, -2.0), &p).unwrap();
        let ones = Vec3::new(1.0, 1.0, 1.0);
        let xdot = j.matrix * ones;
        let rates = solve_motor_rates(&j, &xdot).unwrap();
        for r in rates {
            assert_abs_diff_eq!(r, 1.0, epsilon = 1e-9);
        }
        let zero = solve_motor_rates(&j, &Vec3::zeros()).unwrap();
        assert_eq!(zero, [0.0; 3]);
    }
}
