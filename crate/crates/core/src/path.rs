//! Waypoint paths for the task-space planner and the metrics.

use crate::error::{Error, Result};
use crate::types::Vec3;

/// Which benchmark plane a path lives in. Flexion-plane paths keep constant
/// x; abduction-plane paths live on the constant-z surface swept at a fixed
/// flexion posture; free paths are arbitrary 3-D waypoint lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneTag {
    Flexion,
    Abduction,
    Free,
}

impl std::fmt::Display for PlaneTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlaneTag::Flexion => "flexion",
            PlaneTag::Abduction => "abduction",
            PlaneTag::Free => "free",
        })
    }
}

/// Firmware-style cap on the waypoint count; simulation may override.
pub const DEFAULT_MAX_WAYPOINTS: usize = 50;

/// An ordered waypoint list with its nominal task-space speed.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPath {
    pub waypoints: Vec<Vec3>,
    /// Nominal speed the path is meant to be followed at, mm/s.
    pub v_desired: f64,
    pub plane: PlaneTag,
}

impl TaskPath {
    /// Builds a path under the default waypoint cap. A single-waypoint path
    /// is permitted and degenerates to a point move.
    pub fn new(waypoints: Vec<Vec3>, v_desired: f64, plane: PlaneTag) -> Result<Self> {
        Self::with_max_points(waypoints, v_desired, plane, DEFAULT_MAX_WAYPOINTS)
    }

    /// Builds a path under an explicit waypoint cap.
    pub fn with_max_points(
        waypoints: Vec<Vec3>,
        v_desired: f64,
        plane: PlaneTag,
        max_points: usize,
    ) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidPath { what: "path needs at least one waypoint".into() });
        }
        if waypoints.len() > max_points {
            return Err(Error::InvalidPath {
                what: format!("{} waypoints exceed the cap of {max_points}", waypoints.len()),
            });
        }
        if waypoints.iter().any(|w| !(w.x.is_finite() && w.y.is_finite() && w.z.is_finite())) {
            return Err(Error::InvalidPath { what: "waypoints must be finite".into() });
        }
        if !v_desired.is_finite() || v_desired <= 0.0 {
            return Err(Error::InvalidPath { what: format!("v_desired = {v_desired} must be positive") });
        }
        for (i, pair) in waypoints.windows(2).enumerate() {
            if (pair[1] - pair[0]).norm() == 0.0 {
                return Err(Error::InvalidPath {
                    what: format!("waypoints {i} and {} coincide", i + 1),
                });
            }
        }
        Ok(Self { waypoints, v_desired, plane })
    }

    /// Total polyline length, mm.
    pub fn total_length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Whether the path returns to its start (square/circle benchmarks do).
    pub fn is_closed(&self) -> bool {
        self.waypoints.len() > 1
            && (self.waypoints[0] - *self.waypoints.last().unwrap()).norm() <= 1e-9
    }

    /// Position at an arc-length parameter along the polyline, clamped to
    /// the endpoints.
    pub fn point_at_arc_length(&self, s: f64) -> Vec3 {
        if s <= 0.0 {
            return self.waypoints[0];
        }
        let mut remaining = s;
        for pair in self.waypoints.windows(2) {
            let seg = pair[1] - pair[0];
            let len = seg.norm();
            if remaining <= len {
                return pair[0] + seg * (remaining / len);
            }
            remaining -= len;
        }
        *self.waypoints.last().unwrap()
    }
}
