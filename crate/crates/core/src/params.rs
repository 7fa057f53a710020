//! Finger parameterization: link vectors, rod lengths, frame offsets, limits.
//!
//! All geometry is loaded from a TOML document whose keys carry their units
//! (`l2_mm`, `v_max_m1_rad_s`, ...). Loading validates the self-consistency
//! invariants — every loop must close exactly at the calibrated zero — and
//! rejects files that fail, naming the failing loop.

use crate::error::{Error, Result};
use crate::loops;
use crate::trig::{self, Branch};
use crate::types::{Range, Vec3};
use serde::Deserialize;

/// The default desk-scale parameter file shipped with the crate.
pub const DEFAULT_PARAMS_TOML: &str = include_str!("../configs/default.toml");

/// Residual allowed when checking the zero-configuration closures, mm.
pub const ZERO_CLOSURE_TOL: f64 = 1e-9;

/// Per-angle joint limits, radians. `beta` and `q4` are not independent
/// degrees of freedom; their ranges must bracket the image of the `q3` range
/// under the loop couplings (checked at load).
#[derive(Debug, Clone, Copy)]
pub struct JointLimits {
    pub q1: Range,
    pub q2: Range,
    pub q3: Range,
    pub q4: Range,
    pub beta: Range,
}

/// Per-motor limits: rad for m1, mm for m2 and m3.
#[derive(Debug, Clone, Copy)]
pub struct MotorLimits {
    pub m1: Range,
    pub m2: Range,
    pub m3: Range,
}

/// Branch selection for each loop, fixed at calibration so that M = 0 solves
/// to Q = 0, then kept for the life of the parameter set. `loop4_inverse`
/// covers the reverse solve (bell crank angle from a known q3).
#[derive(Debug, Clone, Copy)]
pub struct LoopBranches {
    pub loop2: Branch,
    pub loop3: Branch,
    pub loop4: Branch,
    pub loop5: Branch,
    pub loop4_inverse: Branch,
}

/// One finger instance: immutable after load, freely shareable across threads.
#[derive(Debug, Clone)]
pub struct KinematicParams {
    // Link vectors at the zero configuration, mm.
    pub oa: Vec3,
    pub ab: Vec3,
    pub ac: Vec3,
    pub ad: Vec3,
    pub df: Vec3,
    pub dg: Vec3,
    pub gh: Vec3,
    pub de: Vec3,
    // Motor-carriage positions at zero, mm.
    pub p2: Vec3,
    pub p3: Vec3,
    // Rod/coupler lengths, mm.
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    // Offsets appearing in the transformation matrices, mm.
    pub od_y: f64,
    pub od_z: f64,
    pub dg_y: f64,
    pub dg_z: f64,
    pub gi_z: f64,
    /// Fixed mounting offset relating the solved crank angle to the angle
    /// used inside the rotation matrices (beta1 = beta + beta_offset), rad.
    pub beta_offset: f64,
    pub joint_limits: JointLimits,
    pub motor_limits: MotorLimits,
    /// Max motor speeds: rad/s for m1, mm/s for m2 and m3.
    pub v_max: [f64; 3],
    pub branches: LoopBranches,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    oa_mm: [f64; 3],
    ab_mm: [f64; 3],
    ac_mm: [f64; 3],
    ad_mm: [f64; 3],
    df_mm: [f64; 3],
    dg_mm: [f64; 3],
    gh_mm: [f64; 3],
    de_mm: [f64; 3],
    p2_mm: [f64; 3],
    p3_mm: [f64; 3],
    l2_mm: f64,
    l3_mm: f64,
    l4_mm: f64,
    l5_mm: f64,
    od_y_mm: f64,
    od_z_mm: f64,
    dg_y_mm: f64,
    dg_z_mm: f64,
    gi_z_mm: f64,
    #[serde(default)]
    beta_offset_rad: f64,
    joint_limits_rad: RawJointLimits,
    motor_limits: RawMotorLimits,
    v_max: RawVmax,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJointLimits {
    q1: [f64; 2],
    q2: [f64; 2],
    q3: [f64; 2],
    q4: [f64; 2],
    beta: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotorLimits {
    m1_rad: [f64; 2],
    m2_mm: [f64; 2],
    m3_mm: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVmax {
    m1_rad_s: f64,
    m2_mm_s: f64,
    m3_mm_s: f64,
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn range(name: &str, a: [f64; 2]) -> Result<Range> {
    if !(a[0].is_finite() && a[1].is_finite()) || a[0] >= a[1] {
        return Err(Error::InvalidParams {
            what: format!("range {name} = [{}, {}] must be finite with min < max", a[0], a[1]),
        });
    }
    Ok(Range::new(a[0], a[1]))
}

impl KinematicParams {
    /// Parses and validates a parameter document.
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        let raw: RawParams = toml::from_str(doc).map_err(|e| {
            let line = e.span().map(|s| doc[..s.start].lines().count()).unwrap_or(0);
            Error::Parse { line, what: e.message().to_string() }
        })?;
        Self::from_raw(raw)
    }

    /// Reads a parameter file from disk.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let doc = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            what: e.to_string(),
        })?;
        Self::from_toml_str(&doc)
    }

    /// The default desk-scale finger shipped with the crate.
    pub fn default_desk() -> Self {
        Self::from_toml_str(DEFAULT_PARAMS_TOML)
            .expect("bundled default parameter file must validate")
    }

    fn from_raw(raw: RawParams) -> Result<Self> {
        let v_max = [raw.v_max.m1_rad_s, raw.v_max.m2_mm_s, raw.v_max.m3_mm_s];
        if v_max.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParams { what: "v_max entries must be positive".into() });
        }
        for (name, l) in [("l2", raw.l2_mm), ("l3", raw.l3_mm), ("l4", raw.l4_mm), ("l5", raw.l5_mm)] {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidParams {
                    what: format!("rod length {name}_mm = {l} must be strictly positive"),
                });
            }
        }
        let vectors = [
            raw.oa_mm, raw.ab_mm, raw.ac_mm, raw.ad_mm, raw.df_mm, raw.dg_mm, raw.gh_mm,
            raw.de_mm, raw.p2_mm, raw.p3_mm,
        ];
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams { what: "link vectors must be finite".into() });
        }

        let mut params = KinematicParams {
            oa: vec3(raw.oa_mm),
            ab: vec3(raw.ab_mm),
            ac: vec3(raw.ac_mm),
            ad: vec3(raw.ad_mm),
            df: vec3(raw.df_mm),
            dg: vec3(raw.dg_mm),
            gh: vec3(raw.gh_mm),
            de: vec3(raw.de_mm),
            p2: vec3(raw.p2_mm),
            p3: vec3(raw.p3_mm),
            l2: raw.l2_mm,
            l3: raw.l3_mm,
            l4: raw.l4_mm,
            l5: raw.l5_mm,
            od_y: raw.od_y_mm,
            od_z: raw.od_z_mm,
            dg_y: raw.dg_y_mm,
            dg_z: raw.dg_z_mm,
            gi_z: raw.gi_z_mm,
            beta_offset: raw.beta_offset_rad,
            joint_limits: JointLimits {
                q1: range("q1", raw.joint_limits_rad.q1)?,
                q2: range("q2", raw.joint_limits_rad.q2)?,
                q3: range("q3", raw.joint_limits_rad.q3)?,
                q4: range("q4", raw.joint_limits_rad.q4)?,
                beta: range("beta", raw.joint_limits_rad.beta)?,
            },
            motor_limits: MotorLimits {
                m1: range("m1", raw.motor_limits.m1_rad)?,
                m2: range("m2", raw.motor_limits.m2_mm)?,
                m3: range("m3", raw.motor_limits.m3_mm)?,
            },
            v_max,
            // Provisional; fixed by calibrate_branches below.
            branches: LoopBranches {
                loop2: Branch::Plus,
                loop3: Branch::Plus,
                loop4: Branch::Plus,
                loop5: Branch::Plus,
                loop4_inverse: Branch::Plus,
            },
        };

        params.check_frame_offsets()?;
        params.check_zero_closures()?;
        params.calibrate_branches()?;
        params.sweep_solvability()?;
        Ok(params)
    }

    /// OD/DG offsets must agree with the link vectors in the frame convention:
    /// AD = OD − OA with OD = (0, OD_y, OD_z), and DG = (0, DG_y, DG_z).
    fn check_frame_offsets(&self) -> Result<()> {
        let od = Vec3::new(0.0, self.od_y, self.od_z);
        let ad_expected = od - self.oa;
        if (self.ad - ad_expected).norm() > ZERO_CLOSURE_TOL {
            return Err(Error::InvalidParams {
                what: format!(
                    "ad_mm must equal (0, od_y, od_z) - oa_mm; off by {:.3e} mm",
                    (self.ad - ad_expected).norm()
                ),
            });
        }
        let dg_expected = Vec3::new(0.0, self.dg_y, self.dg_z);
        if (self.dg - dg_expected).norm() > ZERO_CLOSURE_TOL {
            return Err(Error::InvalidParams {
                what: format!(
                    "dg_mm must equal (0, dg_y, dg_z); off by {:.3e} mm",
                    (self.dg - dg_expected).norm()
                ),
            });
        }
        Ok(())
    }

    /// Every loop must close at M = 0, Q = 0 (the calibration convention).
    fn check_zero_closures(&self) -> Result<()> {
        let residuals = [
            (2u8, loops::loop2_residual(0.0, 0.0, 0.0, self)),
            (3u8, loops::loop3_residual(0.0, 0.0, 0.0, 0.0, self)),
            (4u8, loops::loop4_residual(0.0, 0.0, self)),
            (5u8, loops::loop5_residual(0.0, 0.0, self)),
        ];
        for (id, r) in residuals {
            if r.abs() > ZERO_CLOSURE_TOL {
                return Err(Error::InvalidParams {
                    what: format!("loop {id} does not close at the zero configuration: residual {r:.3e} mm"),
                });
            }
        }
        Ok(())
    }

    /// Picks, per loop, the ± branch whose root is the zero configuration.
    fn calibrate_branches(&mut self) -> Result<()> {
        fn pick(loop_id: u8, coeffs_for: impl Fn(Branch) -> trig::TrigCoefficients) -> Result<Branch> {
            for branch in [Branch::Plus, Branch::Minus] {
                if let Ok(q) = trig::solve_trig(&coeffs_for(branch)) {
                    if q.abs() <= 1e-9 {
                        return Ok(branch);
                    }
                }
            }
            Err(Error::InvalidParams {
                what: format!("loop {loop_id}: neither trig branch yields the zero configuration at M = 0"),
            })
        }
        self.branches.loop2 = pick(2, |b| loops::loop2_coefficients(0.0, 0.0, self, b))?;
        self.branches.loop3 = pick(3, |b| loops::loop3_coefficients(0.0, 0.0, 0.0, self, b))?;
        self.branches.loop4 = pick(4, |b| loops::loop4_coefficients(0.0, self, b))?;
        self.branches.loop5 = pick(5, |b| loops::loop5_coefficients(0.0, self, b))?;
        self.branches.loop4_inverse = pick(4, |b| loops::loop4_inverse_coefficients(0.0, self, b))?;
        Ok(())
    }

    /// Sweeps the independent joint box on a grid: every loop must stay
    /// inside the arccos-solvable domain across the whole box, the coupled
    /// beta/q4 must stay inside their bracket ranges, and every boundary
    /// joint state must map back inside the motor limits.
    ///
    /// The motor box is a rectangular hull of the joint box image, so its
    /// far corners may pair carriage positions no consistent configuration
    /// uses; M2Q reports those as typed errors rather than panicking, and no
    /// solvability guarantee is made there.
    fn sweep_solvability(&self) -> Result<()> {
        const N: usize = 25;
        let grid = |r: Range| (0..=N).map(move |k| r.lo + r.span() * k as f64 / N as f64);

        for q2 in grid(self.joint_limits.q2) {
            let m2 = loops::motor2_from_q2(q2, None, self).map_err(|e| Error::InvalidParams {
                what: format!("joint sweep: loop 2 has no motor solution at q2 = {q2:.3}: {e}"),
            })?;
            if !self.motor_limits.m2.contains(m2, 1e-9) {
                return Err(Error::InvalidParams {
                    what: format!("joint sweep: q2 = {q2:.3} maps to m2 = {m2:.3} outside motor limits"),
                });
            }
            for q3 in grid(self.joint_limits.q3) {
                let beta = loops::beta_from_q3(q3, self).map_err(|e| Error::InvalidParams {
                    what: format!("joint sweep: loop 4 inverse failed at q3 = {q3:.3}: {e}"),
                })?;
                if !self.joint_limits.beta.contains(beta, 1e-9) {
                    return Err(Error::InvalidParams {
                        what: format!("joint sweep: q3 = {q3:.3} needs beta = {beta:.4} outside beta limits"),
                    });
                }
                let q4 = loops::solve_loop5(q3, self).map_err(|e| Error::InvalidParams {
                    what: format!("joint sweep: loop 5 failed at q3 = {q3:.3}: {e}"),
                })?;
                if !self.joint_limits.q4.contains(q4, 1e-9) {
                    return Err(Error::InvalidParams {
                        what: format!("joint sweep: q3 = {q3:.3} couples to q4 = {q4:.4} outside q4 limits"),
                    });
                }
                let m3 = loops::motor3_from_beta(0.0, q2, beta, None, self).map_err(|e| {
                    Error::InvalidParams {
                        what: format!(
                            "joint sweep: loop 3 has no motor solution at (q2, beta) = ({q2:.3}, {beta:.3}): {e}"
                        ),
                    }
                })?;
                if !self.motor_limits.m3.contains(m3, 1e-9) {
                    return Err(Error::InvalidParams {
                        what: format!(
                            "joint sweep: (q2, q3) = ({q2:.3}, {q3:.3}) maps to m3 = {m3:.3} outside motor limits"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Validates a motor state against limits and finiteness.
    pub fn check_motor_state(&self, m: &crate::types::MotorState) -> Result<()> {
        if !m.is_finite() {
            return Err(Error::InvalidConfig { what: "motor state must be finite".into() });
        }
        let checks = [
            ("m1", m.m1, self.motor_limits.m1),
            ("m2", m.m2, self.motor_limits.m2),
            ("m3", m.m3, self.motor_limits.m3),
        ];
        for (name, v, r) in checks {
            if !r.contains(v, 1e-9) {
                return Err(Error::OutOfMotorLimits { motor: name, value: v, lo: r.lo, hi: r.hi });
            }
        }
        Ok(())
    }

    /// Total link length from the base; bounds the reachable workspace.
    pub fn total_length(&self) -> f64 {
        Vec3::new(0.0, self.od_y, self.od_z).norm()
            + Vec3::new(0.0, self.dg_y, self.dg_z).norm()
            + self.gi_z.abs()
    }
}
