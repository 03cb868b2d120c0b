//! Forward kinematics for a 2x2 handed-shearing-auxetic (HSA) platform.
//!
//! HSAs extend when twisted, so four of them between a base and a rigid top
//! plate form a soft platform whose pose is driven by four servo angles.
//! This crate maps those angles through a calibrated linear coupling model
//! into the four chord lengths, reduces the lengths to one
//! constant-curvature arc `(kappa, phi, s)`, and evaluates the closed-form
//! arc transform for the platform's center position and orientation.
//!
//! Pipeline: [`coupling`] (angles to lengths) -> [`arc`] (lengths to arc
//! parameters) -> [`pose`] (arc to pose), with [`calibration`] fitting the
//! coupling matrix from a measured grid, [`metrics`] scoring predictions
//! against observations, [`sweep`] synthesizing validation trajectories,
//! and [`io`] handling the file formats. [`pose::oracle_pose`] is an
//! independent discretized-arc check of the closed form.

pub mod arc;
pub mod calibration;
pub mod coupling;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pose;
pub mod sweep;

pub use arc::{arc_from_lengths, lengths_from_arc, ArcConfig};
pub use calibration::{
    fit, fit_regression, generate_synthetic_dataset, symmetrize_circulant, CalibrationDataset,
    CalibrationRecord, FitReport,
};
pub use coupling::{
    coupled_lengths, uncoupled_lengths, ActuatorLengths, CouplingModel, MotorAngles,
};
pub use error::{Actuator, Error, Result};
pub use geometry::{default_geometry, Handedness, PlatformGeometry, SingleHsaModel};
pub use metrics::{ErrorStats, EvalReport, TrajectoryRecord};
pub use pose::{
    forward_kinematics, oracle_pose, pose_from_arc, transform_from_arc, FkResult,
    HomogeneousTransform, Pose,
};
