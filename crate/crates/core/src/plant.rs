//! Kinematic simulation of the three motors and the rigid linkage.
//!
//! The plant is a velocity integrator with optional imperfections: a
//! first-order velocity-tracking lag, encoder quantization, and a gear
//! backlash dead-band on the abduction axis. Everything is deterministic;
//! identical configurations and commands reproduce traces bit for bit.

use crate::error::{Error, Result};
use crate::loops;
use crate::params::KinematicParams;
use crate::path::TaskPath;
use crate::transforms;
use crate::types::{FingertipPose, MotorState};

/// Simulation knobs. All imperfections default off (the perfect plant).
#[derive(Debug, Clone, Copy)]
pub struct PlantConfig {
    /// Integration substep, s. Must be at most half the control period.
    pub dt_sim: f64,
    /// Encoder quantization steps; 0 disables quantization for that motor.
    /// Flexion carriages carry fine incremental encoders, the abduction
    /// motor only coarse hall sensors in the degraded preset.
    pub encoder_res_m1_rad: f64,
    pub encoder_res_m2_mm: f64,
    pub encoder_res_m3_mm: f64,
    /// First-order velocity tracking time constants per motor, s; 0 = exact.
    pub lag_tau_s: [f64; 3],
    /// Total dead-band width of the abduction gear train, rad; 0 = rigid.
    pub backlash_m1_rad: f64,
}

impl PlantConfig {
    /// Ideal plant: exact velocity tracking, exact encoders, rigid gears.
    pub fn perfect() -> Self {
        Self {
            dt_sim: 0.002,
            encoder_res_m1_rad: 0.0,
            encoder_res_m2_mm: 0.0,
            encoder_res_m3_mm: 0.0,
            lag_tau_s: [0.0; 3],
            backlash_m1_rad: 0.0,
        }
    }

    /// Emulates the abduction-axis degradation observed on hardware: coarse
    /// hall-sensor feedback, gear backlash, and sluggish velocity tracking on
    /// m1, with the flexion axes left ideal. The magnitudes are illustrative
    /// only; no hardware values exist for them. The lag dominates, so the
    /// damage shows up in the velocity following rather than the geometry.
    pub fn abduction_degraded() -> Self {
        Self {
            encoder_res_m1_rad: 8.0e-4,
            lag_tau_s: [0.10, 0.0, 0.0],
            backlash_m1_rad: 1.5e-3,
            ..Self::perfect()
        }
    }

    pub fn validate(&self, dt_ctrl: f64) -> Result<()> {
        if !(self.dt_sim > 0.0) {
            return Err(Error::InvalidConfig { what: format!("dt_sim = {} must be positive", self.dt_sim) });
        }
        if self.dt_sim > dt_ctrl / 2.0 + 1e-12 {
            return Err(Error::InvalidConfig {
                what: format!("dt_sim = {} must be <= dt_ctrl/2 = {}", self.dt_sim, dt_ctrl / 2.0),
            });
        }
        let res = [self.encoder_res_m1_rad, self.encoder_res_m2_mm, self.encoder_res_m3_mm];
        if res.iter().chain(self.lag_tau_s.iter()).any(|v| *v < 0.0 || !v.is_finite())
            || self.backlash_m1_rad < 0.0
        {
            return Err(Error::InvalidConfig {
                what: "resolutions, lags, and backlash must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// True internal state of the plant.
#[derive(Debug, Clone, Copy)]
struct PlantState {
    /// Joint-side motor positions (rad, mm, mm).
    pos: [f64; 3],
    /// Motor-shaft position for m1 ahead of the backlash dead-band.
    shaft_m1: f64,
    /// Realized velocities.
    vel: [f64; 3],
    /// Commanded velocities.
    cmd: [f64; 3],
    t: f64,
}

/// The simulated plant. Single-owner while a control loop runs it.
#[derive(Debug, Clone)]
pub struct SimPlant {
    pub cfg: PlantConfig,
    params: KinematicParams,
    state: PlantState,
}

impl SimPlant {
    pub fn new(cfg: PlantConfig, params: &KinematicParams, initial: MotorState) -> Result<Self> {
        params.check_motor_state(&initial)?;
        Ok(Self {
            cfg,
            params: params.clone(),
            state: PlantState {
                pos: initial.as_array(),
                shaft_m1: initial.m1,
                vel: [0.0; 3],
                cmd: [0.0; 3],
                t: 0.0,
            },
        })
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    /// True joint-side motor positions, no measurement effects.
    pub fn true_motors(&self) -> MotorState {
        MotorState::from_array(self.state.pos)
    }

    /// True fingertip position, what an external camera would see. The
    /// linkage assembles wherever the motors sit, so this bypasses the
    /// joint-limit typing of the control-facing FK.
    pub fn fingertip(&self) -> Result<FingertipPose> {
        let q = loops::m2q_unchecked(&self.true_motors(), &self.params)?;
        Ok(transforms::fk_from_joints(&q, &self.params))
    }

    /// Encoder readout: true positions quantized to the configured steps.
    pub fn read_encoders(&self) -> MotorState {
        let q = |v: f64, res: f64| if res > 0.0 { (v / res).round() * res } else { v };
        MotorState::new(
            q(self.state.pos[0], self.cfg.encoder_res_m1_rad),
            q(self.state.pos[1], self.cfg.encoder_res_m2_mm),
            q(self.state.pos[2], self.cfg.encoder_res_m3_mm),
        )
    }

    pub fn command_velocities(&mut self, v: [f64; 3]) {
        self.state.cmd = v;
    }

    /// Advances the simulation by `dt`, substepping at `dt_sim` or finer.
    pub fn advance(&mut self, dt: f64) {
        if dt <= 1e-15 {
            return;
        }
        let n = (dt / self.cfg.dt_sim).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        for _ in 0..n {
            self.substep(h);
        }
    }

    fn substep(&mut self, h: f64) {
        let v_max = self.params.v_max;
        let limits = [
            self.params.motor_limits.m1,
            self.params.motor_limits.m2,
            self.params.motor_limits.m3,
        ];
        for i in 0..3 {
            let sat = self.state.cmd[i].clamp(-v_max[i], v_max[i]);
            let tau = self.cfg.lag_tau_s[i];
            if tau > 0.0 {
                let alpha = 1.0 - (-h / tau).exp();
                self.state.vel[i] += alpha * (sat - self.state.vel[i]);
            } else {
                self.state.vel[i] = sat;
            }
        }

        // m1 drives a gear train with play: the shaft integrates, the joint
        // follows only once the dead-band is taken up.
        let half_band = 0.5 * self.cfg.backlash_m1_rad;
        self.state.shaft_m1 += self.state.vel[0] * h;
        if self.state.shaft_m1 - self.state.pos[0] > half_band {
            self.state.pos[0] = self.state.shaft_m1 - half_band;
        } else if self.state.pos[0] - self.state.shaft_m1 > half_band {
            self.state.pos[0] = self.state.shaft_m1 + half_band;
        }
        self.state.pos[1] += self.state.vel[1] * h;
        self.state.pos[2] += self.state.vel[2] * h;

        // Hard stops clamp; velocity into a stop stalls.
        for i in 0..3 {
            let clamped = limits[i].clamp(self.state.pos[i]);
            if clamped != self.state.pos[i] {
                self.state.pos[i] = clamped;
                if (self.state.vel[i] > 0.0) == (clamped == limits[i].hi) {
                    self.state.vel[i] = 0.0;
                }
            }
        }
        self.state.shaft_m1 = self
            .state
            .shaft_m1
            .clamp(limits[0].lo - half_band, limits[0].hi + half_band);
        self.state.t += h;
    }
}

/// One fingertip sample of a trial trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub pos: FingertipPose,
}

/// A fixed-rate fingertip trace with the path it executed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    /// Sample rate, frames per second.
    pub fps: f64,
    pub samples: Vec<TraceSample>,
    /// The reference path this trace executed (or is analyzed against).
    pub path: TaskPath,
    pub v_desired: f64,
}

/// Samples a plant at exact `k/fps` instants while it advances.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    fps: f64,
    /// Absolute plant time of frame zero.
    t0: f64,
    next_frame: usize,
    samples: Vec<TraceSample>,
}

impl TraceRecorder {
    /// Starts a recording whose frame zero is the plant's current time.
    pub fn start(fps: f64, plant: &SimPlant) -> Self {
        Self { fps, t0: plant.time(), next_frame: 0, samples: Vec::new() }
    }

    /// Advances the plant to `t_end` (absolute plant time), capturing every
    /// frame boundary on the way. Frame boundaries are hit exactly: the
    /// plant integrates piecewise to each one.
    pub fn record_until(&mut self, plant: &mut SimPlant, t_end: f64) -> Result<()> {
        loop {
            let t_frame = self.t0 + self.next_frame as f64 / self.fps;
            if t_frame > t_end + 1e-12 {
                break;
            }
            plant.advance(t_frame - plant.time());
            self.samples.push(TraceSample { t: self.next_frame as f64 / self.fps, pos: plant.fingertip()? });
            self.next_frame += 1;
        }
        plant.advance(t_end - plant.time());
        Ok(())
    }

    pub fn into_trace(self, path: TaskPath, v_desired: f64) -> TrialTrace {
        TrialTrace { fps: self.fps, samples: self.samples, path, v_desired }
    }
}

/// Advances the plant for `duration` seconds under its current velocity
/// command, returning the fingertip sampled at uniform `1/fps` intervals
/// (both endpoints included when `duration` is a whole number of frames).
pub fn sample_trace(plant: &mut SimPlant, fps: f64, duration: f64) -> Result<Vec<TraceSample>> {
    if !(fps > 0.0) {
        return Err(Error::InvalidConfig { what: format!("fps = {fps} must be positive") });
    }
    let mut rec = TraceRecorder::start(fps, plant);
    rec.record_until(plant, plant.time() + duration)?;
    Ok(rec.samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plant(cfg: PlantConfig) -> SimPlant {
        let p = KinematicParams::default_desk();
        SimPlant::new(cfg, &p, MotorState::default()).unwrap()
    }

    #[test]
    fn zero_command_from_rest_holds_still() {
        let mut pl = plant(PlantConfig::perfect());
        pl.advance(0.5);
        assert_eq!(pl.true_motors(), MotorState::default());
        assert_abs_diff_eq!(pl.time(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pure_integrator_advances_exactly() {
        let mut pl = plant(PlantConfig::perfect());
        pl.command_velocities([0.0, -2.0, 1.0]);
        pl.advance(0.75);
        let m = pl.true_motors();
        assert_abs_diff_eq!(m.m2, -1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m3, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn over_limit_command_saturates_to_v_max() {
        let p = KinematicParams::default_desk();
        let mut pl = plant(PlantConfig::perfect());
        pl.command_velocities([0.0, -100.0, 0.0]);
        let t = 0.3; // short enough not to reach the hard stop
        pl.advance(t);
        // Fitted slope equals the speed limit.
        let slope = pl.true_motors().m2 / t;
        assert_abs_diff_eq!(slope, -p.v_max[1], epsilon = 1e-9);
    }

    #[test]
    fn hard_stop_clamps() {
        let p = KinematicParams::default_desk();
        let mut pl = plant(PlantConfig::perfect());
        pl.command_velocities([0.0, 3.0, 0.0]);
        pl.advance(10.0);
        assert_abs_diff_eq!(pl.true_motors().m2, p.motor_limits.m2.hi, epsilon = 1e-12);
    }

    #[test]
    fn encoders_quantize_to_grid() {
        let mut cfg = PlantConfig::perfect();
        cfg.encoder_res_m1_rad = 1e-3;
        let mut pl = plant(cfg);
        pl.command_velocities([0.1, 0.0, 0.0]);
        pl.advance(0.1234);
        let raw = pl.true_motors().m1;
        let read = pl.read_encoders().m1;
        assert!(raw != read);
        let k = read / 1e-3;
        assert_abs_diff_eq!(k, k.round(), epsilon = 1e-9);
        assert!((raw - read).abs() <= 0.5e-3 + 1e-12);
    }

    #[test]
    fn exact_encoders_pass_through() {
        let mut pl = plant(PlantConfig::perfect());
        pl.command_velocities([0.05, 0.3, -0.2]);
        pl.advance(0.321);
        assert_eq!(pl.read_encoders(), pl.true_motors());
    }

    #[test]
    fn backlash_opens_a_dead_band() {
        let mut cfg = PlantConfig::perfect();
        cfg.backlash_m1_rad = 0.01;
        let mut pl = plant(cfg);
        // Forward sweep: joint lags the shaft by half the band.
        pl.command_velocities([0.1, 0.0, 0.0]);
        pl.advance(1.0);
        let fwd = pl.true_motors().m1;
        assert_abs_diff_eq!(fwd, 0.1 - 0.005, epsilon = 1e-9);
        // Reversal: the joint holds until the band is crossed.
        pl.command_velocities([-0.1, 0.0, 0.0]);
        pl.advance(0.05); // shaft moves 0.005, still inside the band
        assert_abs_diff_eq!(pl.true_motors().m1, fwd, epsilon = 1e-9);
        pl.advance(1.0);
        assert!(pl.true_motors().m1 < fwd);
    }

    #[test]
    fn trace_sample_count_is_inclusive() {
        let mut pl = plant(PlantConfig::perfect());
        let samples = sample_trace(&mut pl, 30.0, 2.0).unwrap();
        assert_eq!(samples.len(), 61);
        assert_eq!(samples[0].t, 0.0);
        assert_abs_diff_eq!(samples[60].t, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_speed_spacing_matches_v_over_fps() {
        // Pure abduction at constant rate sweeps a circular arc at constant
        // speed; sample spacing must equal the chord for one frame's arc.
        let p = KinematicParams::default_desk();
        let mut pl = plant(PlantConfig::perfect());
        let omega = 0.1;
        let radius = pl.fingertip().unwrap().to_vec().norm();
        pl.command_velocities([omega, 0.0, 0.0]);
        let fps = 30.0;
        let samples = sample_trace(&mut pl, fps, 1.0).unwrap();
        let chord = 2.0 * radius * (omega / fps / 2.0).sin();
        for w in samples.windows(2) {
            assert_abs_diff_eq!(w[1].pos.distance(&w[0].pos), chord, epsilon = 1e-9);
        }
        let _ = p;
    }

    #[test]
    fn static_plant_trace_is_constant() {
        let mut pl = plant(PlantConfig::perfect());
        let samples = sample_trace(&mut pl, 30.0, 1.0).unwrap();
        for s in &samples {
            assert_eq!(s.pos, samples[0].pos);
        }
    }
}
