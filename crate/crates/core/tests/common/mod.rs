//! Shared test oracles, independent of the library's solution paths.

#![allow(dead_code)]

use fingerkin::params::KinematicParams;
use fingerkin::types::MotorState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Brute-force residual-minimization sweep at 1e-6 rad resolution.
///
/// A coarse pass locates every candidate basin on [-pi, pi]; each basin is
/// refined through two nested grid passes down to 1e-6 rad. Returns the
/// refined minimizers sorted by residual. Two basins can tie at zero (the
/// +/- branches of a closure); callers pick the one matching their branch.
pub fn sweep_minima(f: impl Fn(f64) -> f64, max_basins: usize) -> Vec<(f64, f64)> {
    const COARSE: f64 = 1e-2;
    let lo = -std::f64::consts::PI;
    let hi = std::f64::consts::PI;
    let n = ((hi - lo) / COARSE).ceil() as usize;
    let vals: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let q = lo + (hi - lo) * k as f64 / n as f64;
            (q, f(q).abs())
        })
        .collect();

    // Local minima of the coarse scan.
    let mut basins: Vec<(f64, f64)> = Vec::new();
    for i in 0..vals.len() {
        let left = if i == 0 { f64::INFINITY } else { vals[i - 1].1 };
        let right = if i + 1 == vals.len() { f64::INFINITY } else { vals[i + 1].1 };
        if vals[i].1 <= left && vals[i].1 <= right {
            basins.push(vals[i]);
        }
    }
    basins.sort_by(|a, b| a.1.total_cmp(&b.1));
    basins.truncate(max_basins);

    // Refine each basin: 1e-4 then 1e-6 grids.
    let refine = |center: f64, half: f64, step: f64| {
        let m = (2.0 * half / step).ceil() as usize;
        (0..=m)
            .map(|k| center - half + step * k as f64)
            .map(|q| (q, f(q).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    };
    let mut out: Vec<(f64, f64)> = basins
        .into_iter()
        .map(|(q0, _)| {
            let (q1, _) = refine(q0, 2.0 * COARSE, 1e-4);
            refine(q1, 2e-4, 1e-6)
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

/// The refined sweep minimizer closest to `near`, among basins that refine
/// to a near-zero residual (both closure branches qualify; a 1e-6-rad grid
/// leaves at most slope * 1e-6 of residual at a true root).
pub fn sweep_root_near(f: impl Fn(f64) -> f64, near: f64) -> (f64, f64) {
    let minima = sweep_minima(f, 4);
    let best = minima[0].1;
    minima
        .into_iter()
        .filter(|(_, r)| *r <= best.max(1e-3))
        .min_by(|a, b| (a.0 - near).abs().total_cmp(&(b.0 - near).abs()))
        .unwrap()
}

/// Central finite difference of a scalar-in/vector-out map.
pub fn central_diff<const N: usize>(f: impl Fn(f64) -> [f64; N], at: f64, h: f64) -> [f64; N] {
    let plus = f(at + h);
    let minus = f(at - h);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = (plus[i] - minus[i]) / (2.0 * h);
    }
    out
}

/// Relative-error comparison with an absolute floor for near-zero entries.
pub fn close_rel(actual: f64, expected: f64, rel: f64, abs_floor: f64) -> bool {
    let diff = (actual - expected).abs();
    diff <= abs_floor || diff <= rel * expected.abs().max(actual.abs())
}

/// Uniformly random motor state in the motor box.
pub fn random_motor(rng: &mut ChaCha8Rng, p: &KinematicParams) -> MotorState {
    MotorState::new(
        rng.gen_range(p.motor_limits.m1.lo..=p.motor_limits.m1.hi),
        rng.gen_range(p.motor_limits.m2.lo..=p.motor_limits.m2.hi),
        rng.gen_range(p.motor_limits.m3.lo..=p.motor_limits.m3.hi),
    )
}

/// Rejection-samples motor states whose full chain solves inside the joint
/// box. Far corners of the rectangular motor box pair carriage positions no
/// consistent configuration uses; those return typed errors and are skipped.
pub fn random_solvable_motor(rng: &mut ChaCha8Rng, p: &KinematicParams) -> MotorState {
    loop {
        let m = random_motor(rng, p);
        if fingerkin::loops::m2q(&m, p).is_ok() {
            return m;
        }
    }
}

/// Uniformly random consistent joint state in the independent joint box.
pub fn random_joints(
    rng: &mut ChaCha8Rng,
    p: &KinematicParams,
) -> fingerkin::types::JointState {
    loop {
        let q1 = rng.gen_range(p.joint_limits.q1.lo..=p.joint_limits.q1.hi);
        let q2 = rng.gen_range(p.joint_limits.q2.lo..=p.joint_limits.q2.hi);
        let q3 = rng.gen_range(p.joint_limits.q3.lo..=p.joint_limits.q3.hi);
        if let Ok(q) = fingerkin::loops::joints_from_independent(q1, q2, q3, p) {
            return q;
        }
    }
}
