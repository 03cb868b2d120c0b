//! Model-vs-observation error statistics.
//!
//! Sign convention everywhere: error = estimated - observed. Length and
//! position statistics are in mm; orientation statistics are reported in
//! degrees (radians stay internal). Position error is summarized two ways:
//! the per-record Euclidean distance between predicted and observed centers,
//! and the pooled signed per-axis components.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::coupling::{coupled_lengths, uncoupled_lengths, ActuatorLengths, CouplingModel, MotorAngles};
use crate::error::{Actuator, Error, Result};
use crate::geometry::{PlatformGeometry, SingleHsaModel};
use crate::pose::{alpha_from_quaternion, forward_kinematics, observed_phi};

/// Mean, population standard deviation, and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    /// Population standard deviation (divide by n).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl ErrorStats {
    /// Computes stats over a non-empty sample. Two-pass, sequential
    /// summation: permutation of the input changes nothing but rounding at
    /// the 1e-15 level, and repeated runs are bitwise identical.
    pub fn from_samples(samples: &[f64]) -> Result<ErrorStats> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(ErrorStats {
            mean,
            std: var.sqrt(),
            min,
            max,
            n: samples.len(),
        })
    }
}

/// One observed trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub time_s: f64,
    pub theta: MotorAngles,
    /// Mocap center position in the model base frame, mm.
    pub observed_position: Vector3<f64>,
    /// Mocap platform orientation in the model base frame.
    pub observed_quaternion: UnitQuaternion<f64>,
    /// Per-actuator chord lengths when the rig measures them; absent
    /// otherwise.
    pub observed_lengths: Option<ActuatorLengths>,
    /// Declared sweep speed, RPM; constant within one trajectory.
    pub speed_rpm: f64,
}

/// Which length model to evaluate against observations.
#[derive(Debug, Clone, Copy)]
pub enum LengthModel<'a> {
    Coupled(&'a CouplingModel),
    Uncoupled(&'a SingleHsaModel),
}

impl LengthModel<'_> {
    pub fn predict(&self, theta: &MotorAngles, geo: &PlatformGeometry) -> Result<ActuatorLengths> {
        match self {
            LengthModel::Coupled(m) => coupled_lengths(theta, m, geo),
            LengthModel::Uncoupled(m) => uncoupled_lengths(theta, m, geo),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LengthModel::Coupled(_) => "coupled",
            LengthModel::Uncoupled(_) => "uncoupled",
        }
    }
}

/// Signed length errors pooled across all four actuators and records.
///
/// Requires observed lengths on every record.
pub fn length_errors(
    records: &[TrajectoryRecord],
    model: &LengthModel,
    geo: &PlatformGeometry,
) -> Result<ErrorStats> {
    let (pooled, _) = length_error_breakdown(records, model, geo)?;
    Ok(pooled)
}

/// Pooled length-error stats plus the per-actuator breakdown.
pub fn length_error_breakdown(
    records: &[TrajectoryRecord],
    model: &LengthModel,
    geo: &PlatformGeometry,
) -> Result<(ErrorStats, [ErrorStats; 4])> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pooled = Vec::with_capacity(records.len() * 4);
    let mut per_actuator: [Vec<f64>; 4] = Default::default();
    for record in records {
        let observed = record
            .observed_lengths
            .as_ref()
            .ok_or(Error::MissingObservedLengths)?;
        let predicted = model.predict(&record.theta, geo)?;
        for a in Actuator::ALL {
            let err = predicted.get(a) - observed.get(a);
            pooled.push(err);
            per_actuator[a.index()].push(err);
        }
    }
    Ok((
        ErrorStats::from_samples(&pooled)?,
        [
            ErrorStats::from_samples(&per_actuator[0])?,
            ErrorStats::from_samples(&per_actuator[1])?,
            ErrorStats::from_samples(&per_actuator[2])?,
            ErrorStats::from_samples(&per_actuator[3])?,
        ],
    ))
}

/// Euclidean distance between predicted and observed center per record.
pub fn position_errors(
    records: &[TrajectoryRecord],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<ErrorStats> {
    let mut distances = Vec::with_capacity(records.len());
    for record in records {
        let fk = forward_kinematics(&record.theta, model, geo)?;
        distances.push((fk.pose.position - record.observed_position).norm());
    }
    ErrorStats::from_samples(&distances)
}

/// Signed per-axis position errors pooled over x, y, z and records.
pub fn position_component_errors(
    records: &[TrajectoryRecord],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<ErrorStats> {
    let mut components = Vec::with_capacity(records.len() * 3);
    for record in records {
        let fk = forward_kinematics(&record.theta, model, geo)?;
        let delta = fk.pose.position - record.observed_position;
        components.extend_from_slice(&[delta.x, delta.y, delta.z]);
    }
    ErrorStats::from_samples(&components)
}

/// Orientation error stats in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationErrors {
    /// Signed bend-angle error, degrees.
    pub alpha_deg: ErrorStats,
    /// Signed bend-plane error wrapped to (-180, 180], degrees.
    pub phi_deg: ErrorStats,
    /// Records whose observed center sat on the z-axis, where the observed
    /// bend plane is undefined; skipped for the phi statistic.
    pub phi_records_skipped: usize,
}

/// Wraps a degree difference into (-180, 180].
pub fn wrap_degrees(angle_deg: f64) -> f64 {
    let mut a = angle_deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Signed alpha and phi errors (estimated - observed).
///
/// Observed alpha comes from the mocap quaternion; observed phi from the
/// observed center position, which is undefined on the z-axis — those
/// records are skipped and tallied rather than treated as failures, since
/// the rest pose legitimately occurs in sweeps.
pub fn orientation_errors(
    records: &[TrajectoryRecord],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<OrientationErrors> {
    let mut alpha_errors = Vec::with_capacity(records.len());
    let mut phi_errors = Vec::with_capacity(records.len());
    let mut skipped = 0usize;
    for record in records {
        let fk = forward_kinematics(&record.theta, model, geo)?;
        let observed_alpha = alpha_from_quaternion(record.observed_quaternion.quaternion())?;
        alpha_errors.push((fk.pose.alpha - observed_alpha).to_degrees());

        match observed_phi(&record.observed_position) {
            Ok(obs_phi) => {
                let err = (fk.pose.phi - obs_phi).to_degrees();
                phi_errors.push(wrap_degrees(err));
            }
            Err(Error::UndefinedAngle) => skipped += 1,
            Err(other) => return Err(other),
        }
    }
    Ok(OrientationErrors {
        alpha_deg: ErrorStats::from_samples(&alpha_errors)?,
        phi_deg: ErrorStats::from_samples(&phi_errors)?,
        phi_records_skipped: skipped,
    })
}

/// Position-error stats for one declared speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedBucket {
    pub speed_rpm: f64,
    pub n_records: usize,
    pub position_distance_mm: ErrorStats,
}

/// Per-speed evaluation, buckets sorted ascending by speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEval {
    pub buckets: Vec<SpeedBucket>,
    /// Trajectories that carried no records and were dropped.
    pub skipped_empty_trajectories: usize,
}

/// Groups trajectories by their declared speed (exact match merges into one
/// bucket), computes position-distance stats per bucket, and orders buckets
/// by ascending speed. Empty trajectories are counted, not fatal.
pub fn error_vs_speed(
    trajectories: &[Vec<TrajectoryRecord>],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<SpeedEval> {
    let mut skipped = 0usize;
    let mut groups: Vec<(f64, Vec<&TrajectoryRecord>)> = Vec::new();
    for trajectory in trajectories {
        let Some(first) = trajectory.first() else {
            skipped += 1;
            continue;
        };
        let speed = first.speed_rpm;
        match groups.iter_mut().find(|(s, _)| *s == speed) {
            Some((_, records)) => records.extend(trajectory.iter()),
            None => groups.push((speed, trajectory.iter().collect())),
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyDataset);
    }
    groups.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("speeds are finite"));

    let mut buckets = Vec::with_capacity(groups.len());
    for (speed_rpm, records) in groups {
        let owned: Vec<TrajectoryRecord> = records.into_iter().cloned().collect();
        buckets.push(SpeedBucket {
            speed_rpm,
            n_records: owned.len(),
            position_distance_mm: position_errors(&owned, model, geo)?,
        });
    }
    Ok(SpeedEval {
        buckets,
        skipped_empty_trajectories: skipped,
    })
}

/// Accuracy recorded on the physical platform. These numbers depend on the
/// hardware and mocap rig and cannot be reproduced in simulation; they ship
/// in every evaluation report as the reference point the toolkit was built
/// against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareReference {
    pub position_mean_mm: f64,
    pub position_std_mm: f64,
    pub alpha_mean_deg: f64,
    pub alpha_std_deg: f64,
    pub uncoupled_length_mean_mm: f64,
    pub coupled_length_mean_mm: f64,
    pub coupled_length_std_mm: f64,
    /// Position error across the 0.15-30 RPM speed range: no meaningful
    /// correlation with speed.
    pub speed_sweep_mean_range_mm: [f64; 2],
    pub note: String,
}

pub fn hardware_reference() -> HardwareReference {
    HardwareReference {
        position_mean_mm: 5.5,
        position_std_mm: 1.72,
        alpha_mean_deg: -2.8,
        alpha_std_deg: 1.9,
        uncoupled_length_mean_mm: 4.78,
        coupled_length_mean_mm: 0.25,
        coupled_length_std_mm: 1.6,
        speed_sweep_mean_range_mm: [5.5, 5.7],
        note: "measured on the physical 2x2 platform with an OptiTrack rig; \
               reference only, not reproducible in simulation"
            .to_string(),
    }
}

/// Per-actuator length stats keyed for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthErrorReport {
    pub model: String,
    pub pooled: ErrorStats,
    pub per_actuator: [ErrorStats; 4],
}

/// Everything `eval` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hardware_reference: HardwareReference,
    pub n_records: usize,
    /// Absent when the trajectory carries no observed lengths.
    pub length: Option<LengthErrorReport>,
    pub position_distance_mm: ErrorStats,
    pub position_component_mm: ErrorStats,
    pub orientation: OrientationErrors,
}

/// Evaluates a trajectory against the coupled model and assembles the full
/// report. Length stats are included only when the records carry observed
/// lengths.
pub fn build_eval_report(
    records: &[TrajectoryRecord],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<EvalReport> {
    let length = if records.iter().all(|r| r.observed_lengths.is_some()) {
        let m = LengthModel::Coupled(model);
        let (pooled, per_actuator) = length_error_breakdown(records, &m, geo)?;
        Some(LengthErrorReport {
            model: m.kind().to_string(),
            pooled,
            per_actuator,
        })
    } else {
        None
    };
    Ok(EvalReport {
        hardware_reference: hardware_reference(),
        n_records: records.len(),
        length,
        position_distance_mm: position_errors(records, model, geo)?,
        position_component_mm: position_component_errors(records, model, geo)?,
        orientation: orientation_errors(records, model, geo)?,
    })
}
