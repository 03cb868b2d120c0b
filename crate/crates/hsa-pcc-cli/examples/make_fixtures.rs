//! Regenerates the repository's `fixtures/` directory: a stock geometry
//! config, a reference coupling model, a noisy 7^4-grid calibration dataset,
//! and one composite-sweep trajectory per declared speed. Everything is
//! seeded, so reruns are byte-identical.
//!
//! Run from anywhere in the workspace:
//!
//! ```text
//! cargo run -p hsa-pcc-cli --example make_fixtures
//! ```

use std::path::Path;

use hsa_pcc::calibration::generate_synthetic_dataset;
use hsa_pcc::coupling::CouplingModel;
use hsa_pcc::io::{save_calibration_csv, save_model, save_trajectory_csv, write_atomic};
use hsa_pcc::sweep::{composite_sweep, SweepSpec};

const GEOMETRY_CFG: &str = "\
# Stock 2x2 platform.
# The servos are mounted at 42 degrees in the physical base; that angle
# affects assembly only, not the kinematics, so it has no key here.
m_mm = 43.68
theta_min_deg = 0
theta_max_deg = 180
rest_length_mm = 100.0
alpha0 = 0.124
alpha1 = 0.119
handedness = RLRL
";

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    std::fs::create_dir_all(&root).expect("create fixtures dir");

    write_atomic(&root.join("geometry.cfg"), GEOMETRY_CFG).unwrap();

    let model = CouplingModel::circulant([0.105, -0.012, 0.008, -0.015], 100.0).unwrap();
    save_model(&root.join("model.json"), &model).unwrap();

    let geo = hsa_pcc::geometry::default_geometry();
    let dataset = generate_synthetic_dataset(&model, &geo, 30.0, 0.4, 7).unwrap();
    save_calibration_csv(&root.join("calibration_2401.csv"), &dataset).unwrap();
    println!("calibration_2401.csv: {} records", dataset.len());

    // the same motion declared at three speeds
    for speed in [0.15, 3.0, 30.0] {
        let spec = SweepSpec {
            steps_per_phase: 20,
            dt_s: 0.1,
            speed_rpm: speed,
        };
        let records = composite_sweep(&model, &geo, &spec).unwrap();
        let name = format!("trajectory_{speed}rpm.csv");
        save_trajectory_csv(&root.join(&name), &records).unwrap();
        println!("{name}: {} records", records.len());
    }
}
