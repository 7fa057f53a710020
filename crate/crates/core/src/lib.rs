//! Kinematics, differential kinematics, and task-space control for a 3-DoF
//! series-parallel linkage-driven robotic finger, plus a simulated motor
//! plant, trajectory metrics, and a benchmark harness.
//!
//! The mechanism has one direct-driven abduction joint and two lead-screw
//! flexion drives acting through four closed linkage loops. Solving the loops
//! analytically yields an equivalent serial chain (angles q1..q4 plus the
//! bell crank angle beta), from which forward kinematics, inverse kinematics,
//! and a closed-form 3×3 motor-space Jacobian follow.

pub mod bench;
pub mod error;
pub mod ik;
pub mod io;
pub mod jacobian;
pub mod loops;
pub mod metrics;
pub mod params;
pub mod path;
pub mod plant;
pub mod planner;
pub mod transforms;
pub mod trig;
pub mod types;

pub use error::{Error, Result};
pub use params::KinematicParams;
pub use types::{FingertipPose, JointState, MotorState, Vec3};
