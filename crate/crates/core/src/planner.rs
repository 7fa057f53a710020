//! The two planners: a single-point joint-space planner with motor-speed
//! feasibility iteration, and a task-space waypoint follower doing resolved
//! motion rate control.

use crate::error::{Error, Result};
use crate::ik;
use crate::jacobian;
use crate::loops;
use crate::params::KinematicParams;
use crate::path::TaskPath;
use crate::plant::{SimPlant, TraceRecorder, TrialTrace};
use crate::transforms;
use crate::types::{JointState, MotorState, Vec3};

/// Knobs of the joint-space planner.
#[derive(Debug, Clone, Copy)]
pub struct JointPlanConfig {
    /// Setpoint spacing, s.
    pub dt: f64,
    /// Duration increment when the motor speed bound is exceeded, s.
    pub delta: f64,
    /// Give up once the candidate duration exceeds this cap, s.
    pub t_cap: f64,
}

impl Default for JointPlanConfig {
    fn default() -> Self {
        Self { dt: 0.01, delta: 0.25, t_cap: 60.0 }
    }
}

/// A motor-space trajectory at fixed setpoint spacing. Every consecutive
/// setpoint pair respects the per-motor speed limits; the first element is
/// the current motor state.
#[derive(Debug, Clone)]
pub struct JointPlan {
    pub setpoints: Vec<MotorState>,
    pub dt: f64,
    /// How many times the duration had to be increased by delta.
    pub retries: usize,
}

impl JointPlan {
    pub fn duration(&self) -> f64 {
        (self.setpoints.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Largest per-step per-motor speed relative to its limit; feasible
    /// plans stay at or below 1.
    pub fn max_speed_ratio(&self, v_max: &[f64; 3]) -> f64 {
        let mut worst: f64 = 0.0;
        for pair in self.setpoints.windows(2) {
            let a = pair[0].as_array();
            let b = pair[1].as_array();
            for i in 0..3 {
                worst = worst.max(((b[i] - a[i]) / self.dt).abs() / v_max[i]);
            }
        }
        worst
    }
}

/// Plans a joint-space move to `q_goal`: linear interpolation of the
/// independent coordinates (q1, q2, q3) with the coupled beta/q4 re-derived
/// per step, mapped through Q2M, with the duration grown by `delta` until
/// every per-step motor speed fits under v_max.
pub fn plan_joint_space(
    q_goal: &JointState,
    m_cur: &MotorState,
    cfg: &JointPlanConfig,
    p: &KinematicParams,
) -> Result<JointPlan> {
    if !(cfg.dt > 0.0 && cfg.delta > 0.0 && cfg.t_cap > 0.0) {
        return Err(Error::InvalidConfig { what: "joint plan dt, delta, t_cap must be positive".into() });
    }
    let q_cur = loops::m2q(m_cur, p)?;
    let m_goal = loops::q2m_hinted(q_goal, Some(m_cur), p)?;

    // Initial duration guess from the per-motor speed limits.
    let dm = [m_goal.m1 - m_cur.m1, m_goal.m2 - m_cur.m2, m_goal.m3 - m_cur.m3];
    let mut t = (0..3).map(|i| dm[i].abs() / p.v_max[i]).fold(0.0, f64::max);
    if t == 0.0 {
        return Ok(JointPlan { setpoints: vec![*m_cur], dt: cfg.dt, retries: 0 });
    }

    let mut retries = 0;
    loop {
        let n = (t / cfg.dt).ceil().max(1.0) as usize;
        let mut setpoints = Vec::with_capacity(n + 1);
        setpoints.push(*m_cur);
        let mut feasible = true;
        for k in 1..=n {
            let f = k as f64 / n as f64;
            let q = loops::joints_from_independent(
                q_cur.q1 + f * (q_goal.q1 - q_cur.q1),
                q_cur.q2 + f * (q_goal.q2 - q_cur.q2),
                q_cur.q3 + f * (q_goal.q3 - q_cur.q3),
                p,
            )?;
            let m = loops::q2m_hinted(&q, setpoints.last(), p)?;
            let prev = setpoints.last().unwrap().as_array();
            let cur = m.as_array();
            for i in 0..3 {
                if ((cur[i] - prev[i]) / cfg.dt).abs() > p.v_max[i] * (1.0 + 1e-12) {
                    feasible = false;
                }
            }
            setpoints.push(m);
            if !feasible {
                break;
            }
        }
        if feasible {
            return Ok(JointPlan { setpoints, dt: cfg.dt, retries });
        }
        t += cfg.delta;
        retries += 1;
        if t > cfg.t_cap {
            return Err(Error::Infeasible { t, cap: cfg.t_cap });
        }
    }
}

/// Knobs of the task-space follower.
#[derive(Debug, Clone, Copy)]
pub struct RmrcConfig {
    /// Per-axis convergence tolerance at each waypoint, mm.
    pub tolerance_mm: f64,
    /// Desired task-space speed, mm/s.
    pub v_desired: f64,
    /// Control period, s.
    pub dt_ctrl: f64,
    /// Per-waypoint control-step cap; None derives one from the segment
    /// length (10x the ideal step count, plus slack).
    pub max_iters: Option<usize>,
    /// Sample rate of the returned trace, Hz.
    pub trace_fps: f64,
}

impl RmrcConfig {
    pub fn new(v_desired: f64) -> Self {
        Self { tolerance_mm: 0.1, v_desired, dt_ctrl: 0.01, max_iters: None, trace_fps: 30.0 }
    }

    /// Config matching a path's nominal speed.
    pub fn for_path(path: &TaskPath) -> Self {
        Self::new(path.v_desired)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance_mm > 0.0 && self.v_desired > 0.0 && self.dt_ctrl > 0.0 && self.trace_fps > 0.0)
        {
            return Err(Error::InvalidConfig {
                what: "tolerance, v_desired, dt_ctrl, trace_fps must all be positive".into(),
            });
        }
        Ok(())
    }
}

/// One resolved-rate command.
#[derive(Debug, Clone, Copy)]
pub struct RateCommand {
    /// Motor rates (rad/s, mm/s, mm/s). Zero when already at the goal.
    pub motor_rates: [f64; 3],
    /// Task-space speed the rates realize, after clamping and scaling.
    pub task_speed: f64,
    /// Error vector to the goal, mm.
    pub err: Vec3,
    pub err_norm: f64,
    /// Uniform scaling factor applied to fit under v_max (1 when untouched).
    pub scaled_by: f64,
}

/// One velocity-control step: error direction times desired speed through
/// the inverse Jacobian, scaled uniformly when any motor would exceed its
/// speed limit so the task-space direction is preserved. The final approach
/// clamps the speed to err/dt so a single period suffices, preventing
/// limit cycling around the tolerance ball.
pub fn rmrc_step(
    x_goal: &Vec3,
    m_cur: &MotorState,
    cfg: &RmrcConfig,
    p: &KinematicParams,
) -> Result<RateCommand> {
    cfg.validate()?;
    let v_eff = |err_norm: f64| cfg.v_desired.min(err_norm / cfg.dt_ctrl);
    rmrc_rates(x_goal, m_cur, v_eff, p)
}

/// Core of [`rmrc_step`] with the speed law supplied by the caller.
fn rmrc_rates(
    x_goal: &Vec3,
    m_cur: &MotorState,
    speed_for_err: impl Fn(f64) -> f64,
    p: &KinematicParams,
) -> Result<RateCommand> {
    let x_cur = transforms::fk(m_cur, p)?.to_vec();
    let err = x_goal - x_cur;
    let err_norm = err.norm();
    if err_norm == 0.0 {
        return Ok(RateCommand { motor_rates: [0.0; 3], task_speed: 0.0, err, err_norm, scaled_by: 1.0 });
    }
    let xhat = err / err_norm;
    let v = speed_for_err(err_norm);
    let j = jacobian::jacobian(m_cur, p)?;
    let mut rates = jacobian::solve_motor_rates(&j, &(xhat * v))?;
    let mut scale: f64 = 1.0;
    for i in 0..3 {
        if rates[i].abs() > p.v_max[i] {
            scale = scale.min(p.v_max[i] / rates[i].abs());
        }
    }
    if scale < 1.0 {
        for r in rates.iter_mut() {
            *r *= scale;
        }
    }
    Ok(RateCommand { motor_rates: rates, task_speed: v * scale, err, err_norm, scaled_by: scale })
}

/// Where a waypoint chase ended.
#[derive(Debug, Clone, Copy)]
pub struct WaypointStat {
    pub index: usize,
    pub control_steps: usize,
    /// Measured per-axis error magnitudes at handoff, mm.
    pub final_err: [f64; 3],
}

/// Everything a closed-loop path execution produced.
#[derive(Debug, Clone)]
pub struct PathExecution {
    pub trace: TrialTrace,
    pub waypoints: Vec<WaypointStat>,
    /// Worst deviation between the commanded task-space direction and the
    /// direction actually realized by J·Mdot, across every control step.
    pub max_direction_residual: f64,
    /// Retries the initial joint-space approach needed.
    pub approach_retries: usize,
    /// Total executed time after the approach, s.
    pub duration: f64,
}

/// Runs a waypoint path closed-loop on the simulated plant.
///
/// The first waypoint is reached with the joint-space planner (it may be far
/// from the current pose); each subsequent waypoint is chased with resolved
/// rate control until every axis error is inside the tolerance. The returned
/// trace starts at the moment the finger leaves the first waypoint.
///
/// Near a waypoint the last command lands exactly on it in a partial control
/// period, and the unconsumed remainder of the period goes to the next
/// segment. A fixed-period loop would either cut the corner by up to the
/// tolerance or idle for the rest of the period; over many waypoints those
/// offsets accumulate into a spurious lead or lag against the
/// constant-speed reference that the trajectory metrics compare with.
pub fn execute_task_path(
    path: &TaskPath,
    cfg: &RmrcConfig,
    plant: &mut SimPlant,
    p: &KinematicParams,
) -> Result<PathExecution> {
    cfg.validate()?;
    plant.cfg.validate(cfg.dt_ctrl)?;

    // Waypoint 1 via the joint-space planner.
    let m_meas = plant.read_encoders();
    let first = path.waypoints[0];
    let q_first = ik::x2q(&first.into(), p, loops::m2q(&m_meas, p).ok().as_ref())?;
    let jcfg = JointPlanConfig { dt: cfg.dt_ctrl, ..JointPlanConfig::default() };
    let plan = plan_joint_space(&q_first, &m_meas, &jcfg, p)?;
    for pair in plan.setpoints.windows(2) {
        let rates = [
            (pair[1].m1 - pair[0].m1) / plan.dt,
            (pair[1].m2 - pair[0].m2) / plan.dt,
            (pair[1].m3 - pair[0].m3) / plan.dt,
        ];
        plant.command_velocities(rates);
        plant.advance(plan.dt);
    }
    plant.command_velocities([0.0; 3]);

    // The trace and the clock start here.
    let mut recorder = TraceRecorder::start(cfg.trace_fps, plant);
    let t0 = plant.time();
    let mut waypoints = Vec::new();
    let mut max_dir_residual: f64 = 0.0;

    for (index, goal) in path.waypoints.iter().enumerate().skip(1) {
        let seg_len = (goal - path.waypoints[index - 1]).norm();
        let ideal_steps = seg_len / (cfg.v_desired * cfg.dt_ctrl);
        let budget = cfg.max_iters.unwrap_or((10.0 * ideal_steps).ceil() as usize + 50);

        let mut steps = 0usize;
        loop {
            let m_meas = plant.read_encoders();
            let cmd = rmrc_rates(goal, &m_meas, |_| cfg.v_desired, p)?;
            let within_tol = cmd.err.x.abs() <= cfg.tolerance_mm
                && cmd.err.y.abs() <= cfg.tolerance_mm
                && cmd.err.z.abs() <= cfg.tolerance_mm;
            // Advance only if a full-speed landing cannot finish the segment
            // inside this period; otherwise land exactly and hand off.
            let landing = cmd.task_speed > 0.0 && cmd.err_norm <= cmd.task_speed * cfg.dt_ctrl;
            if within_tol && !landing {
                waypoints.push(WaypointStat {
                    index,
                    control_steps: steps,
                    final_err: [cmd.err.x.abs(), cmd.err.y.abs(), cmd.err.z.abs()],
                });
                break;
            }
            if steps >= budget {
                return Err(Error::WaypointTimeout { index, iters: steps, err: cmd.err_norm });
            }

            // Direction preservation: J·Mdot must stay parallel to the error
            // direction even when the command was scaled down.
            let j = jacobian::jacobian(&m_meas, p)?;
            let realized = j.matrix * Vec3::from_row_slice(&cmd.motor_rates);
            if realized.norm() > 0.0 && cmd.err_norm > 0.0 {
                let residual = (realized / realized.norm() - cmd.err / cmd.err_norm).norm();
                max_dir_residual = max_dir_residual.max(residual);
            }

            let duration = if landing { cmd.err_norm / cmd.task_speed } else { cfg.dt_ctrl };
            plant.command_velocities(cmd.motor_rates);
            recorder.record_until(plant, plant.time() + duration)?;
            steps += 1;

            if landing {
                let m_now = plant.read_encoders();
                let x_now = transforms::fk(&m_now, p)?.to_vec();
                let e = goal - x_now;
                if e.x.abs() <= cfg.tolerance_mm
                    && e.y.abs() <= cfg.tolerance_mm
                    && e.z.abs() <= cfg.tolerance_mm
                {
                    waypoints.push(WaypointStat {
                        index,
                        control_steps: steps,
                        final_err: [e.x.abs(), e.y.abs(), e.z.abs()],
                    });
                    break;
                }
            }
        }
    }

    // Stop, then let the trace capture the settled endpoint.
    plant.command_velocities([0.0; 3]);
    let settle = (plant.time() - t0) * cfg.trace_fps;
    recorder.record_until(plant, t0 + settle.ceil() / cfg.trace_fps)?;
    let duration = plant.time() - t0;

    Ok(PathExecution {
        trace: recorder.into_trace(path.clone(), cfg.v_desired),
        waypoints,
        max_direction_residual: max_dir_residual,
        approach_retries: plan.retries,
        duration,
    })
}
