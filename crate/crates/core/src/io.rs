//! CSV file interfaces: waypoint paths, fingertip traces, motor plans, and
//! trial manifests for ingested measurement data.
//!
//! Writers emit fixed-precision decimals so identical runs produce
//! byte-identical files. Parsers are strict: exact headers, the right field
//! count, finite numbers, with the offending line in every error.

use crate::error::{Error, Result};
use crate::path::{PlaneTag, TaskPath};
use crate::plant::{TraceSample, TrialTrace};
use crate::planner::JointPlan;
use crate::types::Vec3;
use std::path::Path;

pub const PATH_CSV_HEADER: &str = "x_mm,y_mm,z_mm";
pub const TRACE_CSV_HEADER: &str = "t_s,x_mm,y_mm,z_mm";
pub const PLAN_CSV_HEADER: &str = "t_s,m1_rad,m2_mm,m3_mm";
pub const MANIFEST_CSV_HEADER: &str = "trace,sigma_mm";

/// Fixed-precision decimal used by all writers.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

fn parse_field(raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        line,
        what: format!("expected a number, got {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, what: format!("non-finite value {raw:?}") });
    }
    Ok(v)
}

fn split_row<const N: usize>(row: &str, line: usize) -> Result<[f64; N]> {
    let mut out = [0.0; N];
    let mut fields = row.split(',');
    for (i, slot) in out.iter_mut().enumerate() {
        let raw = fields.next().ok_or_else(|| Error::Parse {
            line,
            what: format!("expected {N} fields, found {i}"),
        })?;
        *slot = parse_field(raw, line)?;
    }
    if fields.next().is_some() {
        return Err(Error::Parse { line, what: format!("expected exactly {N} fields") });
    }
    Ok(out)
}

fn check_header(doc: &str, expected: &str) -> Result<()> {
    match doc.lines().next() {
        Some(h) if h.trim_end_matches('\r') == expected => Ok(()),
        Some(h) => Err(Error::Parse { line: 1, what: format!("header must be {expected:?}, got {h:?}") }),
        None => Err(Error::Parse { line: 1, what: "empty document".into() }),
    }
}

/// Parses a waypoint CSV (`x_mm,y_mm,z_mm`). Path files describe segments,
/// so at least two waypoints are required.
pub fn parse_path_csv(doc: &str) -> Result<Vec<Vec3>> {
    check_header(doc, PATH_CSV_HEADER)?;
    let mut waypoints = Vec::new();
    for (idx, row) in doc.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let [x, y, z] = split_row::<3>(row, idx + 1)?;
        waypoints.push(Vec3::new(x, y, z));
    }
    if waypoints.len() < 2 {
        return Err(Error::Parse {
            line: doc.lines().count(),
            what: format!("a path file needs at least 2 waypoints, found {}", waypoints.len()),
        });
    }
    Ok(waypoints)
}

/// Serializes waypoints as a path CSV document.
pub fn path_to_csv(waypoints: &[Vec3]) -> String {
    let mut out = String::from(PATH_CSV_HEADER);
    out.push('\n');
    for w in waypoints {
        out.push_str(&format!("{},{},{}\n", fmt_f64(w.x), fmt_f64(w.y), fmt_f64(w.z)));
    }
    out
}

/// Parses a fingertip trace CSV (`t_s,x_mm,y_mm,z_mm`). Timestamps must
/// increase strictly.
pub fn parse_trace_csv(doc: &str) -> Result<Vec<TraceSample>> {
    check_header(doc, TRACE_CSV_HEADER)?;
    let mut samples: Vec<TraceSample> = Vec::new();
    for (idx, row) in doc.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let [t, x, y, z] = split_row::<4>(row, idx + 1)?;
        if let Some(prev) = samples.last() {
            if t <= prev.t {
                return Err(Error::Parse {
                    line: idx + 1,
                    what: format!("timestamps must increase: {t} after {}", prev.t),
                });
            }
        }
        samples.push(TraceSample { t, pos: crate::types::FingertipPose::new(x, y, z) });
    }
    if samples.is_empty() {
        return Err(Error::Parse { line: 1, what: "trace has no samples".into() });
    }
    Ok(samples)
}

/// Serializes a trace as CSV.
pub fn trace_to_csv(trace: &TrialTrace) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for s in &trace.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.pos.x),
            fmt_f64(s.pos.y),
            fmt_f64(s.pos.z)
        ));
    }
    out
}

/// Infers the frame rate of an ingested trace from its timestamps, verifying
/// the spacing is uniform to 1 µs.
pub fn infer_fps(samples: &[TraceSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::LengthMismatch { what: "need at least 2 samples to infer fps".into() });
    }
    let dt = samples[1].t - samples[0].t;
    for w in samples.windows(2) {
        if ((w[1].t - w[0].t) - dt).abs() > 1e-6 {
            return Err(Error::Parse {
                line: 0,
                what: format!("trace sampling is not uniform: {} vs {}", w[1].t - w[0].t, dt),
            });
        }
    }
    Ok(1.0 / dt)
}

/// Builds a [`TrialTrace`] from ingested samples and the reference path.
pub fn trace_from_samples(samples: Vec<TraceSample>, path: TaskPath, v_desired: f64) -> Result<TrialTrace> {
    let fps = infer_fps(&samples)?;
    Ok(TrialTrace { fps, samples, path, v_desired })
}

/// Parses a trial manifest (`trace,sigma_mm`): per-trial trace files with
/// their measurement uncertainties, for weighted aggregation of external data.
pub fn parse_trials_manifest(doc: &str) -> Result<Vec<(String, f64)>> {
    check_header(doc, MANIFEST_CSV_HEADER)?;
    let mut rows = Vec::new();
    for (idx, row) in doc.lines().enumerate().skip(1) {
        let row = row.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        let (name, sigma) = row.split_once(',').ok_or_else(|| Error::Parse {
            line: idx + 1,
            what: "expected `trace,sigma_mm`".into(),
        })?;
        let sigma = parse_field(sigma, idx + 1)?;
        if name.trim().is_empty() {
            return Err(Error::Parse { line: idx + 1, what: "empty trace filename".into() });
        }
        rows.push((name.trim().to_string(), sigma));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, what: "manifest has no rows".into() });
    }
    Ok(rows)
}

/// Serializes a motor plan as CSV.
pub fn plan_to_csv(plan: &JointPlan) -> String {
    let mut out = String::from(PLAN_CSV_HEADER);
    out.push('\n');
    for (k, m) in plan.setpoints.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(k as f64 * plan.dt),
            fmt_f64(m.m1),
            fmt_f64(m.m2),
            fmt_f64(m.m3)
        ));
    }
    out
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), what: e.to_string() })
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io { path: dir.display().to_string(), what: e.to_string() })?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Error::Io { path: path.display().to_string(), what: e.to_string() })
}

/// Loads a waypoint file into a task path.
pub fn load_path(path: &Path, v_desired: f64, plane: PlaneTag) -> Result<TaskPath> {
    let waypoints = parse_path_csv(&read_to_string(path)?)?;
    TaskPath::with_max_points(waypoints, v_desired, plane, usize::MAX)
}

/// Loads a trace file against a reference path.
pub fn load_trace(path: &Path, reference: TaskPath, v_desired: f64) -> Result<TrialTrace> {
    let samples = parse_trace_csv(&read_to_string(path)?)?;
    trace_from_samples(samples, reference, v_desired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn path_round_trip() {
        let wps = vec![Vec3::new(0.0, -30.0, 70.0), Vec3::new(0.5, -40.0, 65.25)];
        let doc = path_to_csv(&wps);
        let back = parse_path_csv(&doc).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in wps.iter().zip(&back) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn strict_headers_and_field_counts() {
        assert!(matches!(parse_path_csv("x,y,z\n1,2,3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_path_csv("x_mm,y_mm,z_mm\n1,2\n0,0,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_trace_csv("t_s,x_mm,y_mm,z_mm\n0,0,0,0\n0,1,1,1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_path_csv("x_mm,y_mm,z_mm\n1,2,nan\n0,0,0\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn manifest_parses_names_and_sigmas() {
        let rows = parse_trials_manifest("trace,sigma_mm\na.csv,0.24\nb.csv,0.31\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], ("a.csv".to_string(), 0.24));
    }

    #[test]
    fn fps_inference_checks_uniformity() {
        let s = |t: f64| TraceSample { t, pos: crate::types::FingertipPose::default() };
        let fps = infer_fps(&[s(0.0), s(1.0 / 30.0), s(2.0 / 30.0)]).unwrap();
        assert!((fps - 30.0).abs() < 1e-3);
        assert!(infer_fps(&[s(0.0), s(0.03), s(0.08)]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn trace_csv_round_trips_at_write_precision(
            vals in proptest::collection::vec((-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64), 1..40)
        ) {
            let samples: Vec<TraceSample> = vals
                .iter()
                .enumerate()
                .map(|(k, (x, y, z))| TraceSample {
                    t: k as f64 / 30.0,
                    pos: crate::types::FingertipPose::new(*x, *y, *z),
                })
                .collect();
            let path = TaskPath::new(
                vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)], 10.0, PlaneTag::Free).unwrap();
            let trace = TrialTrace { fps: 30.0, samples: samples.clone(), path, v_desired: 10.0 };
            let doc = trace_to_csv(&trace);
            let back = parse_trace_csv(&doc).unwrap();
            prop_assert_eq!(back.len(), samples.len());
            for (a, b) in samples.iter().zip(&back) {
                prop_assert!((a.t - b.t).abs() <= 5e-7);
                prop_assert!(a.pos.distance(&b.pos) <= 2e-6);
            }
        }
    }
}
