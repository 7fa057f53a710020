//! Trajectory analyses: per-frame norm error against the constant-speed
//! reference, path-following error with the speed re-fit, start/end
//! repeatability, inverse-variance aggregation, and the corridor check.

use crate::error::{Error, Result};
use crate::path::TaskPath;
use crate::plant::TrialTrace;
use crate::types::Vec3;

/// Frames at the end of a run count as settled once the measured position is
/// inside this ball around the path end, mm.
pub const SETTLE_TOL: f64 = 0.1;

/// Per-frame norm errors for one trace against one reference walk.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    /// Per-frame ‖measured − expected‖, mm.
    pub errors: Vec<f64>,
    /// Expected movement per frame used for the reference walk, mm.
    pub step_mm: f64,
    /// Maximum over the active frames (settled tail excluded).
    pub max: f64,
    pub argmax: usize,
    /// Maximum over all frames, settled tail included.
    pub max_raw: f64,
    pub argmax_raw: usize,
}

impl ErrorSeries {
    fn from_errors(errors: Vec<f64>, step_mm: f64, active: usize) -> Self {
        let fold_max = |slice: &[f64]| {
            slice
                .iter()
                .enumerate()
                .fold((0usize, 0.0f64), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc })
        };
        let (argmax_raw, max_raw) = fold_max(&errors);
        let (argmax, max) = fold_max(&errors[..active.min(errors.len())]);
        Self { errors, step_mm, max, argmax, max_raw, argmax_raw }
    }
}

/// Expected positions for `n_frames` frames: arc-length interpolation along
/// the path at cumulative steps of `v/fps`, clamped at the path end.
pub fn expected_positions(path: &TaskPath, v: f64, fps: f64, n_frames: usize) -> Vec<Vec3> {
    let step = v / fps;
    (0..n_frames).map(|k| path.point_at_arc_length(step * k as f64)).collect()
}

fn series_against(trace: &TrialTrace, path: &TaskPath, step_mm: f64) -> Result<ErrorSeries> {
    if trace.samples.is_empty() {
        return Err(Error::LengthMismatch { what: "trace has no samples".into() });
    }
    let total = path.total_length();
    let end = *path.waypoints.last().unwrap();
    let errors: Vec<f64> = trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| (s.pos.to_vec() - path.point_at_arc_length(step_mm * k as f64)).norm())
        .collect();
    // Frames after the reference has finished and the finger has settled at
    // the end point measure dwell, not tracking; they are excluded from the
    // primary max but kept in max_raw.
    let mut active = errors.len();
    for (k, s) in trace.samples.iter().enumerate() {
        let reference_done = step_mm * k as f64 >= total - 1e-12;
        if reference_done && (s.pos.to_vec() - end).norm() <= SETTLE_TOL {
            active = k;
            break;
        }
    }
    Ok(ErrorSeries::from_errors(errors, step_mm, active))
}

/// Trajectory norm error: the reference walks the input path at the desired
/// speed, one step of `v/fps` per frame.
pub fn trajectory_norm_error(trace: &TrialTrace, path: &TaskPath, v: f64) -> Result<ErrorSeries> {
    if !(v > 0.0) {
        return Err(Error::InvalidConfig { what: format!("speed v = {v} must be positive") });
    }
    series_against(trace, path, v / trace.fps)
}

/// Path-following error: same machinery with the step re-fit to the measured
/// average speed, `s = path length / (n_frames − 1)`, isolating geometric
/// deviation from velocity error.
pub fn path_following_error(trace: &TrialTrace, path: &TaskPath) -> Result<ErrorSeries> {
    let n = trace.samples.len();
    if n < 2 {
        return Err(Error::LengthMismatch { what: format!("need at least 2 samples, got {n}") });
    }
    series_against(trace, path, path.total_length() / (n - 1) as f64)
}

/// Distance between the first and last trace samples; the reference path
/// must be closed for this to measure repeatability.
pub fn start_end_repeatability(trace: &TrialTrace) -> Result<f64> {
    if trace.samples.is_empty() {
        return Err(Error::LengthMismatch { what: "trace has no samples".into() });
    }
    let wps = &trace.path.waypoints;
    let gap = (wps[0] - *wps.last().unwrap()).norm();
    if gap > 1e-9 {
        return Err(Error::NotClosed { gap });
    }
    Ok(trace.samples[0].pos.distance(&trace.samples.last().unwrap().pos))
}

/// An inverse-variance weighted mean with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedStat {
    pub mean: f64,
    pub sigma: f64,
    pub trials: usize,
}

/// Inverse-variance weighting: x̄ = Σ(xᵢ/σᵢ²)/Σ(1/σᵢ²), σ_x̄ = (Σ1/σᵢ²)^(-1/2).
pub fn weighted_mean(values: &[f64], sigmas: &[f64]) -> Result<WeightedStat> {
    if values.is_empty() {
        return Err(Error::EmptyInput { what: "weighted_mean values" });
    }
    if values.len() != sigmas.len() {
        return Err(Error::LengthMismatch {
            what: format!("{} values vs {} sigmas", values.len(), sigmas.len()),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&x, &s)) in values.iter().zip(sigmas).enumerate() {
        if !(s > 0.0) {
            return Err(Error::NonPositiveSigma { index: i, value: s });
        }
        let w = 1.0 / (s * s);
        num += w * x;
        den += w;
    }
    Ok(WeightedStat { mean: num / den, sigma: den.sqrt().recip(), trials: values.len() })
}

/// Outcome of a corridor check.
#[derive(Debug, Clone, Copy)]
pub struct CorridorCheck {
    pub pass: bool,
    pub half_width: f64,
    /// Largest distance from any trace sample to the reference polyline, mm.
    pub max_deviation: f64,
    pub worst_frame: usize,
}

/// Software analog of the peg-in-fixture validation: every trace sample must
/// stay within `half_width` of the reference polyline.
pub fn corridor_check(trace: &TrialTrace, path: &TaskPath, half_width: f64) -> Result<CorridorCheck> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidConfig { what: format!("half_width = {half_width} must be positive") });
    }
    let mut max_deviation = 0.0f64;
    let mut worst_frame = 0;
    for (k, s) in trace.samples.iter().enumerate() {
        let d = point_to_polyline(&s.pos.to_vec(), &path.waypoints);
        if d > max_deviation {
            max_deviation = d;
            worst_frame = k;
        }
    }
    Ok(CorridorCheck { pass: max_deviation <= half_width, half_width, max_deviation, worst_frame })
}

/// Minimum distance from a point to a polyline (point-to-segment minimum).
pub fn point_to_polyline(point: &Vec3, waypoints: &[Vec3]) -> f64 {
    if waypoints.len() == 1 {
        return (point - waypoints[0]).norm();
    }
    waypoints
        .windows(2)
        .map(|w| point_to_segment(point, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

fn point_to_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
