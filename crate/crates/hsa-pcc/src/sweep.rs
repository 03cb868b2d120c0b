//! Synthetic composite validation sweeps.
//!
//! The composite sweep chains extension, compression, a bend ramp, a full
//! rotation of the bend plane, and a return to rest, so one trajectory
//! exercises every regime the platform reaches. Observations are generated
//! by the model itself, making the records self-consistent; noise can be
//! injected afterwards for calibration of the evaluation pipeline.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::coupling::{CouplingModel, MotorAngles};
use crate::error::Result;
use crate::geometry::PlatformGeometry;
use crate::metrics::TrajectoryRecord;
use crate::pose::forward_kinematics;

/// Shape of a composite sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    /// Samples per phase (five phases total).
    pub steps_per_phase: usize,
    /// Sample spacing, seconds.
    pub dt_s: f64,
    /// Declared sweep speed, RPM, recorded on every sample.
    pub speed_rpm: f64,
}

impl Default for SweepSpec {
    fn default() -> SweepSpec {
        SweepSpec {
            steps_per_phase: 40,
            dt_s: 0.1,
            speed_rpm: 3.0,
        }
    }
}

/// Angle schedule of the composite sweep at normalized phase time
/// `t in [0, 1)` within phase `phase in 0..5`.
fn schedule(phase: usize, t: f64, geo: &PlatformGeometry) -> [f64; 4] {
    let lo = geo.theta_min_deg;
    let hi = geo.theta_max_deg;
    let mid = 0.5 * (lo + hi);
    // keep a margin so the rotation phase stays strictly inside the range
    let amp = 0.8 * 0.5 * (hi - lo);
    match phase {
        // extension: uniform ramp to full
        0 => [lo + (hi - lo) * t; 4],
        // compression: uniform ramp back to mid
        1 => [hi - (hi - mid) * t; 4],
        // bend ramp: push the A/C diagonal apart
        2 => [
            mid + amp * t,
            mid,
            mid - amp * t,
            mid,
        ],
        // rotation: spin the bend plane one full turn
        3 => {
            let w = std::f64::consts::TAU * t;
            [
                mid + amp * w.cos(),
                mid + amp * w.sin(),
                mid - amp * w.cos(),
                mid - amp * w.sin(),
            ]
        }
        // return to rest
        _ => [mid - (mid - lo) * t; 4],
    }
}

/// Generates the self-consistent composite sweep: observed positions,
/// quaternions, and lengths all come from the model's own forward
/// kinematics.
pub fn composite_sweep(
    model: &CouplingModel,
    geo: &PlatformGeometry,
    spec: &SweepSpec,
) -> Result<Vec<TrajectoryRecord>> {
    let n = spec.steps_per_phase.max(1);
    let mut records = Vec::with_capacity(5 * n);
    for phase in 0..5 {
        for i in 0..n {
            let t = i as f64 / n as f64;
            let theta = MotorAngles::new(schedule(phase, t, geo));
            let fk = forward_kinematics(&theta, model, geo)?;
            records.push(TrajectoryRecord {
                time_s: (phase * n + i) as f64 * spec.dt_s,
                theta,
                observed_position: fk.pose.position,
                observed_quaternion: fk.pose.transform.rotation_quaternion(),
                observed_lengths: Some(fk.lengths),
                speed_rpm: spec.speed_rpm,
            });
        }
    }
    Ok(records)
}

/// Adds i.i.d. zero-mean Gaussian noise to the observed positions only
/// (per component), deterministic for a fixed seed.
pub fn add_position_noise(records: &mut [TrajectoryRecord], sigma_mm: f64, seed: u64) {
    if sigma_mm <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_mm).expect("finite sigma");
    for record in records {
        record.observed_position += Vector3::new(
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_geometry;
    use crate::metrics::{build_eval_report, position_errors};

    fn model() -> CouplingModel {
        CouplingModel::circulant([0.105, -0.012, 0.008, -0.015], 100.0).unwrap()
    }

    #[test]
    fn sweep_is_self_consistent_and_in_range() {
        let geo = default_geometry();
        let m = model();
        let records = composite_sweep(&m, &geo, &SweepSpec::default()).unwrap();
        assert_eq!(records.len(), 200);
        for r in &records {
            r.theta.validate(&geo).unwrap();
        }
        // times strictly increasing
        for pair in records.windows(2) {
            assert!(pair[1].time_s > pair[0].time_s);
        }
        let report = build_eval_report(&records, &m, &geo).unwrap();
        assert!(report.position_distance_mm.max < 1e-9);
        assert!(report.orientation.alpha_deg.mean.abs() < 1e-9);
    }

    #[test]
    fn sweep_covers_extension_bending_and_rotation() {
        let geo = default_geometry();
        let m = model();
        let records = composite_sweep(&m, &geo, &SweepSpec::default()).unwrap();
        let zs: Vec<f64> = records.iter().map(|r| r.observed_position.z).collect();
        let z_range = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - zs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(z_range > 5.0, "extension range {z_range}");

        // the rotation phase must take the bend plane through all quadrants
        let mut quadrants = [false; 4];
        for r in &records {
            let p = r.observed_position;
            if p.x.hypot(p.y) > 1.0 {
                let q = match (p.x > 0.0, p.y > 0.0) {
                    (true, true) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                    (true, false) => 3,
                };
                quadrants[q] = true;
            }
        }
        assert_eq!(quadrants, [true; 4], "bend plane did not sweep all quadrants");
    }

    #[test]
    fn position_noise_is_seeded_and_position_only() {
        let geo = default_geometry();
        let m = model();
        let clean = composite_sweep(&m, &geo, &SweepSpec::default()).unwrap();
        let mut a = clean.clone();
        let mut b = clean.clone();
        add_position_noise(&mut a, 1.7, 5);
        add_position_noise(&mut b, 1.7, 5);
        assert_eq!(a, b);
        for (noisy, original) in a.iter().zip(&clean) {
            assert_eq!(noisy.observed_lengths, original.observed_lengths);
            assert_eq!(noisy.observed_quaternion, original.observed_quaternion);
            assert_ne!(noisy.observed_position, original.observed_position);
        }
        let stats = position_errors(&a, &m, &geo).unwrap();
        assert!(stats.mean > 1.0, "noise visible in distances: {}", stats.mean);
    }
}
