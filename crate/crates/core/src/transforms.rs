//! The serial-equivalent homogeneous transform chain and forward kinematics.
//!
//! Frames sit at the abduction axis (J1), the MCP flexion axis (J2), the PIP
//! (J3), the DIP (J4), and the fingertip (EE). The fingertip position is the
//! translation column of `T_O^J1 · T_J1^J2 · T_J2^J3 · T_J3^J4 · T_J4^EE`.

use crate::error::Result;
use crate::loops;
use crate::params::KinematicParams;
use crate::types::{FingertipPose, JointState, MotorState, Vec3};
use nalgebra::{Matrix3, Matrix4};

fn homogeneous(rot: Matrix3<f64>, trans: Vec3) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&trans);
    t
}

/// Rotation block replaced by its angle-derivative; translation and the
/// homogeneous 1 zeroed. Chain products of these give exact position partials.
fn homogeneous_derivative(drot: Matrix3<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&drot);
    t
}

/// T_O^J1: abduction rotation about y, no offset.
pub fn t_o_j1(q1: f64) -> Matrix4<f64> {
    homogeneous(crate::trig::rot_y(q1), Vec3::zeros())
}

/// T_J1^J2: MCP flexion about x, no offset (the frames coincide spatially).
pub fn t_j1_j2(q2: f64) -> Matrix4<f64> {
    homogeneous(crate::trig::rot_x(q2), Vec3::zeros())
}

/// T_J2^J3: PIP flexion about x after the proximal phalanx offset.
pub fn t_j2_j3(q3: f64, p: &KinematicParams) -> Matrix4<f64> {
    homogeneous(crate::trig::rot_x(q3), Vec3::new(0.0, p.od_y, p.od_z))
}

/// T_J3^J4: DIP flexion about x after the middle phalanx offset.
pub fn t_j3_j4(q4: f64, p: &KinematicParams) -> Matrix4<f64> {
    homogeneous(crate::trig::rot_x(q4), Vec3::new(0.0, p.dg_y, p.dg_z))
}

/// T_J4^EE: fixed fingertip offset.
pub fn t_j4_ee(p: &KinematicParams) -> Matrix4<f64> {
    homogeneous(Matrix3::identity(), Vec3::new(0.0, 0.0, p.gi_z))
}

/// The five chain factors at a joint state.
pub fn chain(q: &JointState, p: &KinematicParams) -> [Matrix4<f64>; 5] {
    [t_o_j1(q.q1), t_j1_j2(q.q2), t_j2_j3(q.q3, p), t_j3_j4(q.q4, p), t_j4_ee(p)]
}

/// Angle-derivatives of the four joint-bearing factors.
pub fn chain_derivatives(q: &JointState) -> [Matrix4<f64>; 4] {
    [
        homogeneous_derivative(crate::trig::drot_y(q.q1)),
        homogeneous_derivative(crate::trig::drot_x(q.q2)),
        homogeneous_derivative(crate::trig::drot_x(q.q3)),
        homogeneous_derivative(crate::trig::drot_x(q.q4)),
    ]
}

/// The composed base-to-fingertip transform.
pub fn fingertip_transform(q: &JointState, p: &KinematicParams) -> Matrix4<f64> {
    let [t1, t2, t3, t4, t5] = chain(q, p);
    t1 * t2 * t3 * t4 * t5
}

/// Fingertip position for a known joint state (rows 1:3 of column 4).
pub fn fk_from_joints(q: &JointState, p: &KinematicParams) -> FingertipPose {
    let t = fingertip_transform(q, p);
    FingertipPose::new(t[(0, 3)], t[(1, 3)], t[(2, 3)])
}

/// FK: motor positions to fingertip position.
pub fn fk(m: &MotorState, p: &KinematicParams) -> Result<FingertipPose> {
    Ok(fk_from_joints(&loops::m2q(m, p)?, p))
}

/// ∂X/∂q_j for j = 1..4, each column from the chain product with exactly one
/// factor replaced by its derivative.
pub fn position_joint_partials(q: &JointState, p: &KinematicParams) -> [Vec3; 4] {
    let t = chain(q, p);
    let d = chain_derivatives(q);
    let col = |m: Matrix4<f64>| Vec3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]);
    [
        col(d[0] * t[1] * t[2] * t[3] * t[4]),
        col(t[0] * d[1] * t[2] * t[3] * t[4]),
        col(t[0] * t[1] * d[2] * t[3] * t[4]),
        col(t[0] * t[1] * t[2] * d[3] * t[4]),
    ]
}

/// Flexion-plane fingertip position (y, z) for q1 = 0; the x coordinate is
/// identically zero there.
pub fn planar_fk(q2: f64, q3: f64, q4: f64, p: &KinematicParams) -> (f64, f64) {
    let inner = Vec3::new(0.0, p.od_y, p.od_z)
        + crate::trig::rot_x(q3)
            * (Vec3::new(0.0, p.dg_y, p.dg_z) + crate::trig::rot_x(q4) * Vec3::new(0.0, 0.0, p.gi_z));
    let v = crate::trig::rot_x(q2) * inner;
    (v.y, v.z)
}
