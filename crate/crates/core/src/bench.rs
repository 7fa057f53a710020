//! Benchmark harness: generates the six standard paths (square, circle,
//! step, in the flexion and abduction planes), runs them closed-loop on the
//! simulated plant, and aggregates the trajectory metrics into CSV artifacts.

use crate::error::{Error, Result};
use crate::ik;
use crate::io;
use crate::metrics::{self, CorridorCheck, WeightedStat};
use crate::params::KinematicParams;
use crate::path::{PlaneTag, TaskPath};
use crate::planner::{execute_task_path, PathExecution, RmrcConfig};
use crate::plant::{PlantConfig, SimPlant, TrialTrace};
use crate::types::{JointState, MotorState, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

/// Tag stamped into every summary row so downstream consumers notice metric
/// definition changes.
pub const METRICS_VERSION: &str = "1";

/// Corridor half-widths of the physical path fixtures, mm.
pub const CORRIDOR_HALF_WIDTH_FLEXION: f64 = 1.5;
pub const CORRIDOR_HALF_WIDTH_ABDUCTION: f64 = 2.0;

/// Measurement uncertainty attached to simulated trials. Simulation has no
/// pixel pipeline, so trials carry unit sigma and the inverse-variance mean
/// degenerates to the arithmetic mean.
pub const SIM_TRIAL_SIGMA_MM: f64 = 1.0;

/// Benchmark path shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Square,
    Circle,
    Step,
}

impl Shape {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Shape::Square),
            "circle" => Ok(Shape::Circle),
            "step" => Ok(Shape::Step),
            other => Err(Error::InvalidConfig { what: format!("unknown shape {other:?}") }),
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Step => "step",
        })
    }
}

/// Which plant imperfection preset a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantPreset {
    Perfect,
    AbductionDegraded,
}

impl PlantPreset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(PlantPreset::Perfect),
            "abduction-degraded" => Ok(PlantPreset::AbductionDegraded),
            other => Err(Error::InvalidConfig { what: format!("unknown plant preset {other:?}") }),
        }
    }

    pub fn config(&self) -> PlantConfig {
        match self {
            PlantPreset::Perfect => PlantConfig::perfect(),
            PlantPreset::AbductionDegraded => PlantConfig::abduction_degraded(),
        }
    }
}

impl std::fmt::Display for PlantPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlantPreset::Perfect => "perfect",
            PlantPreset::AbductionDegraded => "abduction-degraded",
        })
    }
}

/// One benchmark definition.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub shape: Shape,
    pub plane: PlaneTag,
    /// Square side, circle radius, or step tread, mm.
    pub size_mm: f64,
    pub v_desired: f64,
    pub trials: usize,
    pub preset: PlantPreset,
    /// Polygon segment count used to approximate the circle.
    pub circle_segments: usize,
    pub seed: u64,
    /// Per-trial start perturbation applied to the motor positions, mm on
    /// the flexion carriages (scaled to rad on m1). Zero keeps the five
    /// trials identical, as a deterministic plant makes them anyway.
    pub start_jitter_mm: f64,
}

impl BenchmarkSpec {
    /// The paper's protocol for one shape/plane cell: five trials, square
    /// and circle at 10 mm/s, step at 5 mm/s.
    pub fn standard(shape: Shape, plane: PlaneTag, preset: PlantPreset) -> Result<Self> {
        let (size_mm, v_desired) = match shape {
            Shape::Square => (20.0, 10.0),
            Shape::Circle => (10.0, 10.0),
            Shape::Step => (2.0, 5.0),
        };
        if plane == PlaneTag::Free {
            return Err(Error::InvalidConfig { what: "benchmarks run in flexion or abduction".into() });
        }
        Ok(Self {
            shape,
            plane,
            size_mm,
            v_desired,
            trials: 5,
            preset,
            circle_segments: 32,
            seed: 0,
            start_jitter_mm: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig { what: "trials must be at least 1".into() });
        }
        if !(self.size_mm > 0.0 && self.v_desired > 0.0) {
            return Err(Error::InvalidConfig { what: "size and speed must be positive".into() });
        }
        if self.circle_segments < 3 {
            return Err(Error::InvalidConfig { what: "a circle needs at least 3 segments".into() });
        }
        if self.start_jitter_mm < 0.0 {
            return Err(Error::InvalidConfig { what: "start jitter must be non-negative".into() });
        }
        Ok(())
    }

    pub fn corridor_half_width(&self) -> f64 {
        match self.plane {
            PlaneTag::Abduction => CORRIDOR_HALF_WIDTH_ABDUCTION,
            _ => CORRIDOR_HALF_WIDTH_FLEXION,
        }
    }
}

/// Center of the benchmark working region in the flexion plane (y, z), mm.
/// Chosen so a 20 mm square around it sits inside the reachable set with
/// margin on every side.
pub const FLEXION_ANCHOR_Y: f64 = -51.0;
pub const FLEXION_ANCHOR_Z: f64 = 47.0;

/// Anchor of the abduction-plane benchmarks: paths live on the constant-z
/// surface at the height swept by the fixed benchmark flexion posture.
pub const ABDUCTION_ANCHOR_Y: f64 = -49.0;
pub const ABDUCTION_ANCHOR_Z: f64 = 55.0;

fn in_plane(plane: PlaneTag, u: f64, w: f64) -> Vec3 {
    match plane {
        // Flexion-plane paths keep constant x = 0.
        PlaneTag::Flexion | PlaneTag::Free => {
            Vec3::new(0.0, FLEXION_ANCHOR_Y + u, FLEXION_ANCHOR_Z + w)
        }
        // Abduction-plane paths keep constant z; u is the side-to-side axis.
        PlaneTag::Abduction => Vec3::new(u, ABDUCTION_ANCHOR_Y + w, ABDUCTION_ANCHOR_Z),
    }
}

/// Generates one benchmark path, validating every waypoint through X2Q.
pub fn generate_path(
    shape: Shape,
    plane: PlaneTag,
    size_mm: f64,
    v_desired: f64,
    circle_segments: usize,
    p: &KinematicParams,
) -> Result<TaskPath> {
    let corners: Vec<(f64, f64)> = match shape {
        Shape::Square => {
            let h = size_mm / 2.0;
            // Closed: the start and end points are the same input.
            vec![(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)]
        }
        Shape::Circle => {
            let n = circle_segments;
            (0..=n)
                .map(|k| {
                    let theta = 2.0 * std::f64::consts::PI * (k % n) as f64 / n as f64;
                    (size_mm * theta.cos(), size_mm * theta.sin())
                })
                .collect()
        }
        Shape::Step => {
            // A staircase of four treads: right by one tread, down by one.
            let t = size_mm;
            let mut pts = vec![(-2.0 * t, 2.0 * t)];
            for k in 0..4 {
                let (u0, w0) = (-2.0 * t + k as f64 * t, 2.0 * t - k as f64 * t);
                pts.push((u0 + t, w0));
                pts.push((u0 + t, w0 - t));
            }
            pts
        }
    };
    let waypoints: Vec<Vec3> = corners.iter().map(|&(u, w)| in_plane(plane, u, w)).collect();

    let mut seed: Option<JointState> = None;
    for (k, wp) in waypoints.iter().enumerate() {
        match ik::x2q(&(*wp).into(), p, seed.as_ref()) {
            Ok(q) => seed = Some(q),
            Err(e) => {
                return Err(Error::InvalidPath {
                    what: format!("waypoint {k} at ({:.2}, {:.2}, {:.2}) unreachable: {e}", wp.x, wp.y, wp.z),
                })
            }
        }
    }
    TaskPath::with_max_points(waypoints, v_desired, plane, usize::MAX)
}

/// Everything one trial produced.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trace: TrialTrace,
    pub traj_max: f64,
    pub path_max: f64,
    pub repeatability: Option<f64>,
    pub corridor: CorridorCheck,
    pub max_direction_residual: f64,
    pub waypoints_reached: usize,
    pub duration: f64,
}

/// Aggregated results of one benchmark.
#[derive(Debug, Clone)]
pub struct BenchBundle {
    pub spec: BenchmarkSpec,
    pub path: TaskPath,
    pub trials: Vec<TrialResult>,
    pub traj_stat: WeightedStat,
    pub path_stat: WeightedStat,
    pub repeat_stat: Option<WeightedStat>,
    pub corridor_all_pass: bool,
}

impl BenchBundle {
    /// One CSV summary row (plus header) in the shape of the paper's tables.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "metrics_version,shape,plane,v_mm_s,trials,preset,\
             traj_max_mean_mm,traj_max_sigma_mm,path_max_mean_mm,path_max_sigma_mm,\
             repeat_mean_mm,repeat_sigma_mm,corridor_half_width_mm,corridor_max_dev_mm,corridor_pass\n",
        );
        let (rep_mean, rep_sigma) = match &self.repeat_stat {
            Some(s) => (io::fmt_f64(s.mean), io::fmt_f64(s.sigma)),
            None => (String::new(), String::new()),
        };
        let corridor_max =
            self.trials.iter().map(|t| t.corridor.max_deviation).fold(0.0f64, f64::max);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            METRICS_VERSION,
            self.spec.shape,
            self.spec.plane,
            io::fmt_f64(self.spec.v_desired),
            self.spec.trials,
            self.spec.preset,
            io::fmt_f64(self.traj_stat.mean),
            io::fmt_f64(self.traj_stat.sigma),
            io::fmt_f64(self.path_stat.mean),
            io::fmt_f64(self.path_stat.sigma),
            rep_mean,
            rep_sigma,
            io::fmt_f64(self.spec.corridor_half_width()),
            io::fmt_f64(corridor_max),
            self.corridor_all_pass,
        ));
        out
    }
}

fn start_state(spec: &BenchmarkSpec, trial: usize, p: &KinematicParams) -> MotorState {
    if spec.start_jitter_mm == 0.0 {
        return MotorState::default();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(trial as u64));
    let j = spec.start_jitter_mm;
    let m = MotorState::new(
        rng.gen_range(-j..=j) / 100.0,
        rng.gen_range(-j..=j),
        rng.gen_range(-j..=j),
    );
    MotorState::new(
        p.motor_limits.m1.clamp(m.m1),
        p.motor_limits.m2.clamp(m.m2),
        p.motor_limits.m3.clamp(m.m3),
    )
}

/// Runs one benchmark: `spec.trials` closed-loop executions, metric
/// evaluation, and (optionally) CSV artifacts under `out_dir`.
pub fn run_benchmark(spec: &BenchmarkSpec, p: &KinematicParams, out_dir: Option<&Path>) -> Result<BenchBundle> {
    spec.validate()?;
    let path = generate_path(spec.shape, spec.plane, spec.size_mm, spec.v_desired, spec.circle_segments, p)?;
    let cfg = RmrcConfig::new(spec.v_desired);

    let mut trials = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        let initial = start_state(spec, trial, p);
        let mut plant = SimPlant::new(spec.preset.config(), p, initial)?;
        let exec: PathExecution = execute_task_path(&path, &cfg, &mut plant, p)?;

        let traj = metrics::trajectory_norm_error(&exec.trace, &path, spec.v_desired)?;
        let path_err = metrics::path_following_error(&exec.trace, &path)?;
        let repeatability = if path.is_closed() {
            Some(metrics::start_end_repeatability(&exec.trace)?)
        } else {
            None
        };
        let corridor = metrics::corridor_check(&exec.trace, &path, spec.corridor_half_width())?;
        trials.push(TrialResult {
            trace: exec.trace,
            traj_max: traj.max,
            path_max: path_err.max,
            repeatability,
            corridor,
            max_direction_residual: exec.max_direction_residual,
            waypoints_reached: exec.waypoints.len(),
            duration: exec.duration,
        });
    }

    let sigmas = vec![SIM_TRIAL_SIGMA_MM; trials.len()];
    let traj_stat = metrics::weighted_mean(&trials.iter().map(|t| t.traj_max).collect::<Vec<_>>(), &sigmas)?;
    let path_stat = metrics::weighted_mean(&trials.iter().map(|t| t.path_max).collect::<Vec<_>>(), &sigmas)?;
    let repeat_stat = if trials.iter().all(|t| t.repeatability.is_some()) {
        Some(metrics::weighted_mean(
            &trials.iter().map(|t| t.repeatability.unwrap()).collect::<Vec<_>>(),
            &sigmas,
        )?)
    } else {
        None
    };
    let corridor_all_pass = trials.iter().all(|t| t.corridor.pass);

    let bundle = BenchBundle {
        spec: spec.clone(),
        path,
        trials,
        traj_stat,
        path_stat,
        repeat_stat,
        corridor_all_pass,
    };

    if let Some(dir) = out_dir {
        write_bundle(&bundle, dir)?;
    }
    Ok(bundle)
}

fn write_bundle(bundle: &BenchBundle, dir: &Path) -> Result<()> {
    let tag = format!("{}_{}_{}", bundle.spec.shape, bundle.spec.plane, bundle.spec.preset);
    io::write_string(&dir.join(format!("path_{tag}.csv")), &io::path_to_csv(&bundle.path.waypoints))?;
    for (k, trial) in bundle.trials.iter().enumerate() {
        io::write_string(
            &dir.join(format!("trace_{tag}_trial{k}.csv")),
            &io::trace_to_csv(&trial.trace),
        )?;
    }
    io::write_string(&dir.join(format!("summary_{tag}.csv")), &bundle.summary_csv())
}

/// The six standard benchmarks of the experimental protocol.
pub fn standard_suite(preset: PlantPreset) -> Result<Vec<BenchmarkSpec>> {
    let mut suite = Vec::new();
    for plane in [PlaneTag::Flexion, PlaneTag::Abduction] {
        for shape in [Shape::Square, Shape::Circle, Shape::Step] {
            suite.push(BenchmarkSpec::standard(shape, plane, preset)?);
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_path_is_closed_with_five_waypoints() {
        let p = KinematicParams::default_desk();
        let path = generate_path(Shape::Square, PlaneTag::Flexion, 20.0, 10.0, 32, &p).unwrap();
        assert_eq!(path.waypoints.len(), 5);
        assert!(path.is_closed());
        for wp in &path.waypoints {
            assert_eq!(wp.x, 0.0);
        }
    }

    #[test]
    fn circle_path_keeps_its_radius() {
        let p = KinematicParams::default_desk();
        let path = generate_path(Shape::Circle, PlaneTag::Flexion, 10.0, 10.0, 32, &p).unwrap();
        assert_eq!(path.waypoints.len(), 33);
        assert!(path.is_closed());
        let center = Vec3::new(0.0, FLEXION_ANCHOR_Y, FLEXION_ANCHOR_Z);
        for wp in &path.waypoints {
            let r = (wp - center).norm();
            assert!((r - 10.0).abs() < 1e-9, "radius {r}");
        }
    }

    #[test]
    fn step_path_is_axis_aligned_treads() {
        let p = KinematicParams::default_desk();
        let path = generate_path(Shape::Step, PlaneTag::Flexion, 2.0, 5.0, 32, &p).unwrap();
        assert_eq!(path.waypoints.len(), 9);
        for pair in path.waypoints.windows(2) {
            let d = pair[1] - pair[0];
            let moved_axes = [d.x, d.y, d.z].iter().filter(|v| v.abs() > 1e-12).count();
            assert_eq!(moved_axes, 1, "each tread segment moves along one axis");
            assert!((d.norm() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn oversized_path_is_rejected_as_unreachable() {
        let p = KinematicParams::default_desk();
        match generate_path(Shape::Square, PlaneTag::Flexion, 120.0, 10.0, 32, &p) {
            Err(Error::InvalidPath { what }) => assert!(what.contains("unreachable")),
            other => panic!("expected InvalidPath, got {other:?}"),
        }
    }

    #[test]
    fn zero_trials_is_a_validation_error() {
        let p = KinematicParams::default_desk();
        let mut spec = BenchmarkSpec::standard(Shape::Square, PlaneTag::Flexion, PlantPreset::Perfect).unwrap();
        spec.trials = 0;
        assert!(matches!(run_benchmark(&spec, &p, None), Err(Error::InvalidConfig { .. })));
    }
}
