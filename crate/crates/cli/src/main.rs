//! Command-line harness: parameter validation, kinematic queries, planning,
//! closed-loop simulation runs, benchmarks, and trace analysis.

use clap::{Args, Parser, Subcommand};
use fingerkin::bench::{self, BenchmarkSpec, PlantPreset, Shape};
use fingerkin::io;
use fingerkin::loops;
use fingerkin::metrics;
use fingerkin::path::PlaneTag;
use fingerkin::planner::{self, JointPlanConfig, RmrcConfig};
use fingerkin::plant::SimPlant;
use fingerkin::transforms;
use fingerkin::{Error, FingertipPose, KinematicParams, MotorState};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fingerkin", version, about = "series-parallel robotic finger toolkit")]
struct Cli {
    /// Parameter file; the bundled desk-scale finger is used when omitted.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a parameter file and run every self-consistency check.
    ValidateParams,
    /// Forward kinematics: motor positions to fingertip position.
    Fk(FkArgs),
    /// Inverse kinematics: fingertip position to motor positions.
    Ik(IkArgs),
    /// Print the 3x3 motor-space Jacobian at a motor state as CSV.
    Jacobian(FkArgs),
    /// Plan a speed-feasible joint-space move and emit it as CSV.
    PlanJoint(PlanJointArgs),
    /// Run a waypoint path closed-loop on the simulated plant.
    RunPath(RunPathArgs),
    /// Run benchmark paths and write traces plus summary CSVs.
    Benchmark(BenchmarkArgs),
    /// Evaluate metrics over recorded or external traces.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct FkArgs {
    /// Motor state as `m1,m2,m3` (rad, mm, mm).
    #[arg(long, value_name = "M1,M2,M3")]
    m: String,
    /// Interpret and print angles in degrees instead of radians.
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct IkArgs {
    /// Target fingertip position as `x,y,z` in mm.
    #[arg(long, value_name = "X,Y,Z")]
    x: String,
    #[arg(long)]
    degrees: bool,
}

#[derive(Args)]
struct PlanJointArgs {
    /// Goal as independent joint angles `q1,q2,q3` (rad); beta and q4 follow
    /// from the loop couplings.
    #[arg(long, value_name = "Q1,Q2,Q3")]
    goal: String,
    /// Starting motor state, default home.
    #[arg(long, value_name = "M1,M2,M3", default_value = "0,0,0")]
    from: String,
    #[arg(long, default_value_t = 0.01)]
    dt_s: f64,
    #[arg(long, default_value_t = 0.25)]
    delta_s: f64,
    #[arg(long)]
    degrees: bool,
    /// Write the plan CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunPathArgs {
    /// Waypoint CSV file (header `x_mm,y_mm,z_mm`).
    #[arg(long)]
    path: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    v_desired_mm_s: f64,
    #[arg(long, default_value_t = 0.1)]
    tolerance_mm: f64,
    #[arg(long, default_value_t = 0.01)]
    dt_ctrl_s: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value = "perfect")]
    preset: String,
    /// Write the trace CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// square | circle | step; or use --all for the whole suite.
    #[arg(long)]
    shape: Option<String>,
    /// flexion | abduction.
    #[arg(long)]
    plane: Option<String>,
    /// Run all six standard benchmarks.
    #[arg(long)]
    all: bool,
    /// Square side, circle radius, or step tread, mm (standard sizes when omitted).
    #[arg(long)]
    size_mm: Option<f64>,
    /// Task speed (standard speeds when omitted).
    #[arg(long)]
    v_desired_mm_s: Option<f64>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value = "perfect")]
    preset: String,
    #[arg(long, default_value_t = 32)]
    circle_segments: usize,
    /// Determinism seed recorded with the run and feeding the start jitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial start perturbation, mm on the flexion carriages.
    #[arg(long, default_value_t = 0.0)]
    start_jitter_mm: f64,
    /// Output directory for traces and summaries.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Reference waypoint CSV.
    #[arg(long)]
    path: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    v_desired_mm_s: f64,
    /// Trace CSV files to analyze.
    #[arg(value_name = "TRACE", required_unless_present = "manifest")]
    traces: Vec<PathBuf>,
    /// Per-trial sigmas (mm) matching the trace list; default 1.0 each.
    #[arg(long, value_delimiter = ',')]
    sigmas: Vec<f64>,
    /// Trial manifest CSV (`trace,sigma_mm`), alternative to listing traces.
    #[arg(long, conflicts_with = "traces")]
    manifest: Option<PathBuf>,
    /// Corridor half-width to check, mm; skipped when absent.
    #[arg(long)]
    corridor_mm: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_triple(s: &str, what: &str) -> Result<[f64; 3], Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidConfig { what: format!("{what} must be three comma-separated numbers") });
    }
    let mut out = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p.trim().parse().map_err(|_| Error::InvalidConfig {
            what: format!("{what}: {p:?} is not a number"),
        })?;
    }
    Ok(out)
}

fn emit(out: Option<&PathBuf>, contents: &str) -> Result<(), Error> {
    match out {
        Some(path) => io::write_string(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let params = match &cli.params {
        Some(path) => KinematicParams::load(path)?,
        None => KinematicParams::default_desk(),
    };

    match cli.command {
        Command::ValidateParams => {
            // Loading already ran every check; report the configured boxes.
            println!("parameters ok");
            println!(
                "  joint box: q1 [{:.3}, {:.3}] q2 [{:.3}, {:.3}] q3 [{:.3}, {:.3}] rad",
                params.joint_limits.q1.lo,
                params.joint_limits.q1.hi,
                params.joint_limits.q2.lo,
                params.joint_limits.q2.hi,
                params.joint_limits.q3.lo,
                params.joint_limits.q3.hi,
            );
            println!(
                "  motor box: m1 [{:.3}, {:.3}] rad, m2 [{:.3}, {:.3}] mm, m3 [{:.3}, {:.3}] mm",
                params.motor_limits.m1.lo,
                params.motor_limits.m1.hi,
                params.motor_limits.m2.lo,
                params.motor_limits.m2.hi,
                params.motor_limits.m3.lo,
                params.motor_limits.m3.hi,
            );
        }
        Command::Fk(args) => {
            let mut m = parse_triple(&args.m, "--m")?;
            if args.degrees {
                m[0] = m[0].to_radians();
            }
            let x = transforms::fk(&MotorState::from_array(m), &params)?;
            println!("x_mm,y_mm,z_mm");
            println!("{},{},{}", io::fmt_f64(x.x), io::fmt_f64(x.y), io::fmt_f64(x.z));
        }
        Command::Ik(args) => {
            let [x, y, z] = parse_triple(&args.x, "--x")?;
            let m = fingerkin::ik::ik(&FingertipPose::new(x, y, z), &params)?;
            let m1 = if args.degrees { m.m1.to_degrees() } else { m.m1 };
            println!("m1_{},m2_mm,m3_mm", if args.degrees { "deg" } else { "rad" });
            println!("{},{},{}", io::fmt_f64(m1), io::fmt_f64(m.m2), io::fmt_f64(m.m3));
        }
        Command::Jacobian(args) => {
            let mut m = parse_triple(&args.m, "--m")?;
            if args.degrees {
                m[0] = m[0].to_radians();
            }
            let j = fingerkin::jacobian::jacobian(&MotorState::from_array(m), &params)?;
            println!("dx_dm1,dx_dm2,dx_dm3");
            for r in 0..3 {
                println!(
                    "{},{},{}",
                    io::fmt_f64(j.matrix[(r, 0)]),
                    io::fmt_f64(j.matrix[(r, 1)]),
                    io::fmt_f64(j.matrix[(r, 2)])
                );
            }
            eprintln!("condition number: {:.3e}", j.cond);
        }
        Command::PlanJoint(args) => {
            let mut goal = parse_triple(&args.goal, "--goal")?;
            let from = parse_triple(&args.from, "--from")?;
            let mut from = MotorState::from_array(from);
            if args.degrees {
                for g in goal.iter_mut() {
                    *g = g.to_radians();
                }
                from.m1 = from.m1.to_radians();
            }
            let q_goal = loops::joints_from_independent(goal[0], goal[1], goal[2], &params)?;
            let cfg = JointPlanConfig { dt: args.dt_s, delta: args.delta_s, ..Default::default() };
            let plan = planner::plan_joint_space(&q_goal, &from, &cfg, &params)?;
            eprintln!(
                "plan: {} setpoints, {:.2} s, {} retries",
                plan.setpoints.len(),
                plan.duration(),
                plan.retries
            );
            emit(args.out.as_ref(), &io::plan_to_csv(&plan))?;
        }
        Command::RunPath(args) => {
            let path = io::load_path(&args.path, args.v_desired_mm_s, PlaneTag::Free)?;
            let cfg = RmrcConfig {
                tolerance_mm: args.tolerance_mm,
                v_desired: args.v_desired_mm_s,
                dt_ctrl: args.dt_ctrl_s,
                max_iters: None,
                trace_fps: args.fps,
            };
            let preset = PlantPreset::parse(&args.preset)?;
            let mut plant = SimPlant::new(preset.config(), &params, MotorState::default())?;
            let exec = planner::execute_task_path(&path, &cfg, &mut plant, &params)?;
            eprintln!(
                "reached {} waypoints in {:.2} s, max direction residual {:.2e}",
                exec.waypoints.len(),
                exec.duration,
                exec.max_direction_residual
            );
            emit(args.out.as_ref(), &io::trace_to_csv(&exec.trace))?;
        }
        Command::Benchmark(args) => {
            let preset = PlantPreset::parse(&args.preset)?;
            let specs: Vec<BenchmarkSpec> = if args.all {
                bench::standard_suite(preset)?
            } else {
                let shape = args.shape.as_deref().ok_or(Error::InvalidConfig {
                    what: "--shape is required unless --all is given".into(),
                })?;
                let plane = args.plane.as_deref().ok_or(Error::InvalidConfig {
                    what: "--plane is required unless --all is given".into(),
                })?;
                vec![BenchmarkSpec::standard(Shape::parse(shape)?, parse_plane(plane)?, preset)?]
            };
            for mut spec in specs {
                if let Some(size) = args.size_mm {
                    spec.size_mm = size;
                }
                if let Some(v) = args.v_desired_mm_s {
                    spec.v_desired = v;
                }
                spec.trials = args.trials;
                spec.circle_segments = args.circle_segments;
                spec.seed = args.seed;
                spec.start_jitter_mm = args.start_jitter_mm;
                let bundle = bench::run_benchmark(&spec, &params, Some(&args.out))?;
                println!(
                    "{} {} [{}]: traj {:.4} ± {:.4} mm, path {:.4} ± {:.4} mm, corridor {}",
                    spec.shape,
                    spec.plane,
                    spec.preset,
                    bundle.traj_stat.mean,
                    bundle.traj_stat.sigma,
                    bundle.path_stat.mean,
                    bundle.path_stat.sigma,
                    if bundle.corridor_all_pass { "pass" } else { "FAIL" }
                );
            }
        }
        Command::Analyze(args) => {
            let reference = io::load_path(&args.path, args.v_desired_mm_s, PlaneTag::Free)?;
            let (trace_files, sigmas): (Vec<PathBuf>, Vec<f64>) = match &args.manifest {
                Some(manifest) => {
                    let rows = io::parse_trials_manifest(&io::read_to_string(manifest)?)?;
                    let base = manifest.parent().map(PathBuf::from).unwrap_or_default();
                    rows.into_iter().map(|(name, s)| (base.join(name), s)).unzip()
                }
                None => {
                    let sigmas = if args.sigmas.is_empty() {
                        vec![1.0; args.traces.len()]
                    } else if args.sigmas.len() == args.traces.len() {
                        args.sigmas.clone()
                    } else {
                        return Err(Error::InvalidConfig {
                            what: format!(
                                "{} sigmas for {} traces",
                                args.sigmas.len(),
                                args.traces.len()
                            ),
                        });
                    };
                    (args.traces.clone(), sigmas)
                }
            };

            let mut out = String::from(
                "metrics_version,trace,sigma_mm,traj_max_mm,path_max_mm,repeat_mm,corridor_dev_mm\n",
            );
            let mut traj = Vec::new();
            let mut path_err = Vec::new();
            for (file, sigma) in trace_files.iter().zip(&sigmas) {
                let trace = io::load_trace(file, reference.clone(), args.v_desired_mm_s)?;
                let t = metrics::trajectory_norm_error(&trace, &reference, args.v_desired_mm_s)?;
                let pf = metrics::path_following_error(&trace, &reference)?;
                let rep = if reference.is_closed() {
                    io::fmt_f64(metrics::start_end_repeatability(&trace)?)
                } else {
                    String::new()
                };
                let corridor = match args.corridor_mm {
                    Some(w) => io::fmt_f64(metrics::corridor_check(&trace, &reference, w)?.max_deviation),
                    None => String::new(),
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    bench::METRICS_VERSION,
                    file.display(),
                    io::fmt_f64(*sigma),
                    io::fmt_f64(t.max),
                    io::fmt_f64(pf.max),
                    rep,
                    corridor
                ));
                traj.push(t.max);
                path_err.push(pf.max);
            }
            let traj_stat = metrics::weighted_mean(&traj, &sigmas)?;
            let path_stat = metrics::weighted_mean(&path_err, &sigmas)?;
            out.push_str(&format!(
                "{},weighted_mean,,{},{},,\n",
                bench::METRICS_VERSION,
                io::fmt_f64(traj_stat.mean),
                io::fmt_f64(path_stat.mean)
            ));
            out.push_str(&format!(
                "{},weighted_sigma,,{},{},,\n",
                bench::METRICS_VERSION,
                io::fmt_f64(traj_stat.sigma),
                io::fmt_f64(path_stat.sigma)
            ));
            emit(args.out.as_ref(), &out)?;
        }
    }
    Ok(())
}

fn parse_plane(s: &str) -> Result<PlaneTag, Error> {
    match s {
        "flexion" => Ok(PlaneTag::Flexion),
        "abduction" => Ok(PlaneTag::Abduction),
        "free" => Ok(PlaneTag::Free),
        other => Err(Error::InvalidConfig { what: format!("unknown plane {other:?}") }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
