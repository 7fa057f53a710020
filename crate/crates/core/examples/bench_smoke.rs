use fingerkin::bench::*;
use fingerkin::params::KinematicParams;

fn main() {
    let p = KinematicParams::default_desk();
    for preset in [PlantPreset::Perfect, PlantPreset::AbductionDegraded] {
        for spec in standard_suite(preset).unwrap() {
            let t0 = std::time::Instant::now();
            match run_benchmark(&spec, &p, None) {
                Ok(b) => {
                    let t = &b.trials[0];
                    println!(
                        "{:18} {:7} {:9} traj_max={:7.4} path_max={:7.4} repeat={:?} corridor_dev={:7.4} pass={} dir_res={:.2e} wps={} dur={:6.2}s  [{:?}]",
                        format!("{}", spec.preset), format!("{}", spec.shape), format!("{}", spec.plane),
                        t.traj_max, t.path_max, t.repeatability.map(|r| (r*1e4).round()/1e4),
                        t.corridor.max_deviation, t.corridor.pass, t.max_direction_residual,
                        t.waypoints_reached, t.duration, t0.elapsed()
                    );
                }
                Err(e) => println!("{:18} {:7} {:9} FAILED: {e}", format!("{}", spec.preset), format!("{}", spec.shape), format!("{}", spec.plane)),
            }
        }
    }
}
