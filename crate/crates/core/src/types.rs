//! Core state types: motor coordinates, solved joint angles, fingertip position.

use nalgebra::Vector3;

/// 3-vector of f64, millimeters unless noted otherwise.
pub type Vec3 = Vector3<f64>;

/// The three actuator coordinates.
///
/// `m1` is the direct-driven abduction motor angle in radians; `m2` and `m3`
/// are the two flexion lead-screw carriage positions in millimeters, both
/// measured along the metacarpal z axis from their calibrated zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorState {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl MotorState {
    pub const fn new(m1: f64, m2: f64, m3: f64) -> Self {
        Self { m1, m2, m3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.m1.is_finite() && self.m2.is_finite() && self.m3.is_finite()
    }
}

/// The five solved angles of the serial-equivalent chain, radians.
///
/// `q1` (abduction about y) and `q2` (MCP flexion about x) are independent;
/// `q3` (PIP flexion) is driven through the bell crank angle `beta`, and `q4`
/// (DIP flexion) is coupled to `q3` by the distal four-bar. A consistent
/// state always satisfies `beta = beta_from_q3(q3)` and `q4 = solve_loop5(q3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointState {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub beta: f64,
}

impl JointState {
    pub fn as_array(&self) -> [f64; 5] {
        [self.q1, self.q2, self.q3, self.q4, self.beta]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Cartesian fingertip position in the base frame at the MCP joint, mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingertipPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FingertipPose {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vec(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &FingertipPose) -> f64 {
        (self.to_vec() - other.to_vec()).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<Vec3> for FingertipPose {
    fn from(v: Vec3) -> Self {
        Self::from_vec(v)
    }
}

/// Inclusive scalar range, used for joint and motor limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// Containment with a small absolute slack for boundary round-off.
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lo - slack && v <= self.hi + slack
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}
