//! Error types shared across the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the kinematics stack, the planners, the simulated
/// plant, and the file interfaces.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A loop-closure equation has no real solution: the arccos argument left
    /// the unit interval. `loop_id` is 2..=5, or 0 when solving a bare trig
    /// equation outside any loop context.
    #[error("loop {loop_id} cannot close: |arccos argument| = {arg:.6} > 1")]
    Unsolvable { loop_id: u8, arg: f64 },

    /// A solved joint angle left its configured range.
    #[error("joint {joint} = {value:.6} rad outside limits [{lo:.6}, {hi:.6}]")]
    OutOfJointLimits {
        joint: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A motor coordinate left its configured range.
    #[error("motor {motor} = {value:.6} outside limits [{lo:.6}, {hi:.6}]")]
    OutOfMotorLimits {
        motor: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A `JointState` whose coupled angles disagree with the loop closures.
    #[error("inconsistent joint state: {what} differs from the loop-coupled value by {mismatch:.3e} rad")]
    InconsistentJointState { what: &'static str, mismatch: f64 },

    /// Inverse kinematics failed from every seed.
    #[error("target ({x:.3}, {y:.3}, {z:.3}) mm unreachable: {reason}")]
    Unreachable { x: f64, y: f64, z: f64, reason: String },

    /// An implicit-differentiation denominator collapsed; the loop is at a fold.
    #[error("loop {loop_id} is singular (|denominator| = {denom:.3e} < 1e-12)")]
    SingularLoop { loop_id: u8, denom: f64 },

    /// The Jacobian condition number exceeded the inversion threshold.
    #[error("Jacobian near-singular: condition number {cond:.3e} exceeds {limit:.1e}")]
    NearSingular { cond: f64, limit: f64 },

    /// Algorithm 1 exceeded its duration cap without finding a feasible plan.
    #[error("joint-space plan infeasible: duration {t:.2} s exceeded cap {cap:.2} s")]
    Infeasible { t: f64, cap: f64 },

    /// A waypoint was not reached within the iteration budget.
    #[error("waypoint {index} not reached after {iters} control steps (error {err:.4} mm)")]
    WaypointTimeout { index: usize, iters: usize, err: f64 },

    /// A trace or series had the wrong length for the requested analysis.
    #[error("length mismatch: {what}")]
    LengthMismatch { what: String },

    /// Start/end repeatability requires a closed reference path.
    #[error("path is not closed: start and end waypoints differ by {gap:.6} mm")]
    NotClosed { gap: f64 },

    /// An aggregation was asked for on no data.
    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    /// Inverse-variance weighting needs strictly positive sigmas.
    #[error("sigma {value:.6} at index {index} is not strictly positive")]
    NonPositiveSigma { index: usize, value: f64 },

    /// Parameter file failed validation.
    #[error("invalid parameters: {what}")]
    InvalidParams { what: String },

    /// A path or benchmark definition is malformed.
    #[error("invalid path: {what}")]
    InvalidPath { what: String },

    /// A planner/plant configuration value is out of range.
    #[error("invalid config: {what}")]
    InvalidConfig { what: String },

    /// A CSV or TOML document failed to parse.
    #[error("parse error at line {line}: {what}")]
    Parse { line: usize, what: String },

    /// Filesystem failure, stringified to keep the error type `Clone`.
    #[error("io error on {path}: {what}")]
    Io { path: String, what: String },
}

impl Error {
    /// Re-tags a trig-level `Unsolvable` with the loop it belongs to.
    pub(crate) fn with_loop(self, loop_id: u8) -> Self {
        match self {
            Error::Unsolvable { arg, .. } => Error::Unsolvable { loop_id, arg },
            other => other,
        }
    }

    /// True for errors caused by bad user input (files, flags, configs),
    /// as opposed to runtime/planner failures. The CLI maps this to exit
    /// code 2 versus 3.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams { .. }
                | Error::InvalidPath { .. }
                | Error::InvalidConfig { .. }
                | Error::Parse { .. }
                | Error::EmptyInput { .. }
                | Error::NonPositiveSigma { .. }
        )
    }
}
