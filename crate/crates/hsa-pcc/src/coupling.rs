//! Motor-angle to actuator-length models.
//!
//! Two models are provided: the naive per-actuator linear map, which treats
//! each HSA in isolation, and the coupled matrix map `L = beta0 * theta +
//! beta1`, which captures the length interaction introduced by the shared
//! top platform. The coupled model is the one the rest of the pipeline uses.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Actuator, Error, Result};
use crate::geometry::{PlatformGeometry, SingleHsaModel};

/// Entrywise tolerance used when verifying that a matrix is circulant.
pub const CIRCULANT_TOL: f64 = 1e-12;

/// Servo angles in degrees, ordered (A, B, C, D).
///
/// Angles are magnitudes: the two counter-rotating servo pairs are recorded
/// with the same sign convention, and any direction effect is absorbed by
/// the fitted coupling gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorAngles([f64; 4]);

impl MotorAngles {
    pub fn new(theta_deg: [f64; 4]) -> MotorAngles {
        MotorAngles(theta_deg)
    }

    /// Constructs angles after checking them against the geometry's range.
    pub fn checked(theta_deg: [f64; 4], geo: &PlatformGeometry) -> Result<MotorAngles> {
        let theta = MotorAngles(theta_deg);
        theta.validate(geo)?;
        Ok(theta)
    }

    /// Errors with the first offending component if any angle is non-finite
    /// or outside `[theta_min, theta_max]`.
    pub fn validate(&self, geo: &PlatformGeometry) -> Result<()> {
        for actuator in Actuator::ALL {
            let value = self.0[actuator.index()];
            if !value.is_finite()
                || value < geo.theta_min_deg
                || value > geo.theta_max_deg
            {
                return Err(Error::AngleOutOfRange {
                    actuator,
                    value_deg: value,
                    min_deg: geo.theta_min_deg,
                    max_deg: geo.theta_max_deg,
                });
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, actuator: Actuator) -> f64 {
        self.0[actuator.index()]
    }

    pub fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }
}

/// Straight-line (chord) lengths from base to platform attachment, in mm,
/// ordered (l_A, l_B, l_C, l_D). Every component is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLengths([f64; 4]);

impl ActuatorLengths {
    pub fn new(lengths_mm: [f64; 4]) -> Result<ActuatorLengths> {
        for actuator in Actuator::ALL {
            let value = lengths_mm[actuator.index()];
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidLength {
                    actuator,
                    value_mm: value,
                });
            }
        }
        Ok(ActuatorLengths(lengths_mm))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, actuator: Actuator) -> f64 {
        self.0[actuator.index()]
    }

    pub fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }
}

/// The coupled length model `L = beta0 * theta + beta1`.
///
/// `beta0` is in mm/degree and row `j` carries the sensitivity of actuator
/// `j`'s length to every servo angle; `beta1` is the rest height in mm. The
/// `circulant` flag records that `beta0` has been symmetrized so that entry
/// `(i, j)` depends only on `(j - i) mod 4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingModelWire", into = "CouplingModelWire")]
pub struct CouplingModel {
    pub beta0: Matrix4<f64>,
    pub beta1: Vector4<f64>,
    pub circulant: bool,
}

/// On-disk JSON shape: `beta0` row-major 16 numbers, `beta1` 4 numbers,
/// `circulant` bool. Field names are part of the format contract.
#[derive(Serialize, Deserialize)]
struct CouplingModelWire {
    beta0: Vec<f64>,
    beta1: Vec<f64>,
    circulant: bool,
}

impl From<CouplingModel> for CouplingModelWire {
    fn from(model: CouplingModel) -> CouplingModelWire {
        let mut beta0 = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                beta0.push(model.beta0[(i, j)]);
            }
        }
        CouplingModelWire {
            beta0,
            beta1: model.beta1.iter().copied().collect(),
            circulant: model.circulant,
        }
    }
}

impl TryFrom<CouplingModelWire> for CouplingModel {
    type Error = Error;

    fn try_from(wire: CouplingModelWire) -> Result<CouplingModel> {
        if wire.beta0.len() != 16 {
            return Err(Error::InvalidArgument(format!(
                "beta0 must hold 16 row-major numbers, got {}",
                wire.beta0.len()
            )));
        }
        if wire.beta1.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "beta1 must hold 4 numbers, got {}",
                wire.beta1.len()
            )));
        }
        let beta0 = Matrix4::from_row_slice(&wire.beta0);
        let beta1 = Vector4::from_column_slice(&wire.beta1);
        CouplingModel::new(beta0, beta1, wire.circulant)
    }
}

impl CouplingModel {
    /// Builds a model, verifying finiteness and, when the `circulant` flag
    /// is set, the circulant structure of `beta0` to [`CIRCULANT_TOL`].
    pub fn new(beta0: Matrix4<f64>, beta1: Vector4<f64>, circulant: bool) -> Result<CouplingModel> {
        if beta0.iter().any(|x| !x.is_finite()) || beta1.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "coupling model entries must be finite".to_string(),
            ));
        }
        let model = CouplingModel {
            beta0,
            beta1,
            circulant,
        };
        if circulant && !model.has_circulant_structure(CIRCULANT_TOL) {
            return Err(Error::InvalidArgument(
                "circulant flag is set but beta0 is not circulant".to_string(),
            ));
        }
        Ok(model)
    }

    /// Circulant model from the first row of `beta0` and a uniform intercept.
    pub fn circulant(first_row: [f64; 4], intercept_mm: f64) -> Result<CouplingModel> {
        let mut beta0 = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                beta0[(i, j)] = first_row[(j + 4 - i) % 4];
            }
        }
        CouplingModel::new(beta0, Vector4::repeat(intercept_mm), true)
    }

    /// The coupled model equivalent to four independent actuators:
    /// `beta0 = alpha0 * I`, `beta1 = (rest_length + alpha1) * ones`.
    pub fn from_single_hsa(hsa: &SingleHsaModel) -> CouplingModel {
        CouplingModel {
            beta0: Matrix4::identity() * hsa.alpha0,
            beta1: Vector4::repeat(hsa.rest_length_mm + hsa.alpha1),
            circulant: true,
        }
    }

    /// True when entry `(i, j)` depends only on `(j - i) mod 4` within `tol`;
    /// equivalently the matrix is determined by its first row.
    pub fn has_circulant_structure(&self, tol: f64) -> bool {
        is_circulant(&self.beta0, tol)
    }
}

/// Entrywise circulant check: `m[i][j]` must match `m[0][(j - i) mod 4]`.
pub fn is_circulant(m: &Matrix4<f64>, tol: f64) -> bool {
    for i in 0..4 {
        for j in 0..4 {
            let wrapped = m[(0, (j + 4 - i) % 4)];
            if (m[(i, j)] - wrapped).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Naive per-actuator prediction: `l_j = rest_length + alpha0 * theta_j + alpha1`.
pub fn uncoupled_lengths(
    theta: &MotorAngles,
    hsa: &SingleHsaModel,
    geo: &PlatformGeometry,
) -> Result<ActuatorLengths> {
    theta.validate(geo)?;
    let t = theta.as_array();
    ActuatorLengths::new([
        hsa.length_at(t[0]),
        hsa.length_at(t[1]),
        hsa.length_at(t[2]),
        hsa.length_at(t[3]),
    ])
}

/// Coupled prediction: `L = beta0 * theta + beta1`.
///
/// A non-positive predicted component is reported as a model inconsistency
/// instead of being clamped; clamping would hide calibration defects.
pub fn coupled_lengths(
    theta: &MotorAngles,
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<ActuatorLengths> {
    theta.validate(geo)?;
    let l = model.beta0 * theta.vector() + model.beta1;
    for actuator in Actuator::ALL {
        let value = l[actuator.index()];
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::ModelInconsistency {
                actuator,
                value_mm: value,
            });
        }
    }
    Ok(ActuatorLengths([l[0], l[1], l[2], l[3]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_geometry;

    fn hsa() -> SingleHsaModel {
        SingleHsaModel::with_rest_length(100.0).unwrap()
    }

    #[test]
    fn uncoupled_rest_and_full_extension() {
        let geo = default_geometry();
        let l0 = uncoupled_lengths(&MotorAngles::new([0.0; 4]), &hsa(), &geo).unwrap();
        for v in l0.as_array() {
            assert!((v - 100.119).abs() < 1e-12);
        }
        let l180 = uncoupled_lengths(&MotorAngles::new([180.0; 4]), &hsa(), &geo).unwrap();
        for v in l180.as_array() {
            assert!((v - 122.439).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoupled_single_actuator() {
        let geo = default_geometry();
        let l = uncoupled_lengths(&MotorAngles::new([90.0, 0.0, 0.0, 0.0]), &hsa(), &geo).unwrap();
        assert!((l.get(Actuator::A) - 111.279).abs() < 1e-12);
        for a in [Actuator::B, Actuator::C, Actuator::D] {
            assert!((l.get(a) - 100.119).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_angle_names_component() {
        let geo = default_geometry();
        let err = uncoupled_lengths(&MotorAngles::new([0.0, 0.0, 200.0, 0.0]), &hsa(), &geo)
            .unwrap_err();
        match err {
            Error::AngleOutOfRange { actuator, value_deg, .. } => {
                assert_eq!(actuator, Actuator::C);
                assert_eq!(value_deg, 200.0);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn coupled_reduces_to_uncoupled_at_zero_input() {
        let geo = default_geometry();
        let model = CouplingModel::new(
            Matrix4::identity() * 0.124,
            Vector4::repeat(100.119),
            false,
        )
        .unwrap();
        let l = coupled_lengths(&MotorAngles::new([0.0; 4]), &model, &geo).unwrap();
        for v in l.as_array() {
            assert!((v - 100.119).abs() < 1e-12);
        }
    }

    #[test]
    fn circulant_row_sums_give_uniform_lengths() {
        let geo = default_geometry();
        let model = CouplingModel::circulant([0.1, -0.01, 0.02, -0.01], 100.0).unwrap();
        let l = coupled_lengths(&MotorAngles::new([30.0; 4]), &model, &geo).unwrap();
        // row sum 0.1 - 0.01 + 0.02 - 0.01 = 0.1, so 100 + 0.1 * 30 = 103
        for v in l.as_array() {
            assert!((v - 103.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_angle_steps_read_off_beta0_columns() {
        let geo = default_geometry();
        let beta0 = Matrix4::from_row_slice(&[
            0.12, -0.01, 0.02, -0.015, //
            0.005, 0.11, -0.02, 0.01, //
            -0.01, 0.03, 0.125, -0.005, //
            0.02, -0.02, 0.01, 0.115,
        ]);
        let model = CouplingModel::new(beta0, Vector4::repeat(100.0), false).unwrap();
        let base = coupled_lengths(&MotorAngles::new([0.0; 4]), &model, &geo).unwrap();
        for k in 0..4 {
            let mut t = [0.0; 4];
            t[k] = 1.0;
            let stepped = coupled_lengths(&MotorAngles::new(t), &model, &geo).unwrap();
            for i in 0..4 {
                let delta = stepped.as_array()[i] - base.as_array()[i];
                assert!(
                    (delta - beta0[(i, k)]).abs() < 1e-12,
                    "column {k}, row {i}: {delta} vs {}",
                    beta0[(i, k)]
                );
            }
        }
    }

    #[test]
    fn negative_prediction_is_model_inconsistency() {
        let geo = default_geometry();
        let model = CouplingModel::new(
            Matrix4::identity() * -1.0,
            Vector4::repeat(10.0),
            false,
        )
        .unwrap();
        let err = coupled_lengths(&MotorAngles::new([60.0; 4]), &model, &geo).unwrap_err();
        assert!(matches!(err, Error::ModelInconsistency { .. }));
    }

    #[test]
    fn coupled_equals_uncoupled_for_diagonal_model() {
        let geo = default_geometry();
        let model = CouplingModel::from_single_hsa(&hsa());
        for t in [[0.0; 4], [30.0, 60.0, 90.0, 120.0], [180.0; 4]] {
            let theta = MotorAngles::new(t);
            let a = uncoupled_lengths(&theta, &hsa(), &geo).unwrap();
            let b = coupled_lengths(&theta, &model, &geo).unwrap();
            for i in 0..4 {
                assert!((a.as_array()[i] - b.as_array()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linearity_about_the_intercept() {
        let geo = default_geometry();
        let model = CouplingModel::circulant([0.11, -0.013, 0.007, -0.009], 95.0).unwrap();
        let t1 = MotorAngles::new([20.0, 140.0, 60.0, 0.0]);
        let t2 = MotorAngles::new([180.0, 10.0, 90.0, 45.0]);
        let (a, b) = (0.3, 0.6);
        let mixed = [
            a * t1.as_array()[0] + b * t2.as_array()[0],
            a * t1.as_array()[1] + b * t2.as_array()[1],
            a * t1.as_array()[2] + b * t2.as_array()[2],
            a * t1.as_array()[3] + b * t2.as_array()[3],
        ];
        let lm = coupled_lengths(&MotorAngles::new(mixed), &model, &geo).unwrap();
        let l1 = coupled_lengths(&t1, &model, &geo).unwrap();
        let l2 = coupled_lengths(&t2, &model, &geo).unwrap();
        for i in 0..4 {
            let lhs = lm.as_array()[i] - model.beta1[i];
            let rhs = a * (l1.as_array()[i] - model.beta1[i]) + b * (l2.as_array()[i] - model.beta1[i]);
            assert!((lhs - rhs).abs() < 1e-9, "component {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn uniform_input_symmetry_for_circulant_model() {
        let geo = default_geometry();
        let model = CouplingModel::circulant([0.12, -0.011, 0.004, -0.016], 101.5).unwrap();
        for theta in [0.0, 45.0, 90.0, 180.0] {
            let l = coupled_lengths(&MotorAngles::new([theta; 4]), &model, &geo).unwrap();
            let arr = l.as_array();
            for v in &arr[1..] {
                assert!((v - arr[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circulant_flag_is_verified() {
        let mut beta0 = Matrix4::identity() * 0.1;
        beta0[(2, 1)] = 0.05; // break the structure
        let err = CouplingModel::new(beta0, Vector4::repeat(100.0), true).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn json_round_trip_preserves_row_major_layout() {
        let model = CouplingModel::circulant([0.105, -0.012, 0.008, -0.015], 100.0).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        // second row starts with the rotated first row: -0.015, 0.105, ...
        let wire: serde_json::Value = serde_json::from_str(&json).unwrap();
        let beta0 = wire["beta0"].as_array().unwrap();
        assert_eq!(beta0.len(), 16);
        assert_eq!(beta0[0].as_f64().unwrap(), 0.105);
        assert_eq!(beta0[4].as_f64().unwrap(), -0.015);
        assert!(wire["circulant"].as_bool().unwrap());
        assert_eq!(wire["beta1"].as_array().unwrap().len(), 4);

        let back: CouplingModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn json_rejects_wrong_shapes_and_false_circulant_claims() {
        let bad = r#"{"beta0": [1.0, 2.0], "beta1": [0, 0, 0, 0], "circulant": false}"#;
        assert!(serde_json::from_str::<CouplingModel>(bad).is_err());

        let not_circ = format!(
            r#"{{"beta0": {:?}, "beta1": [100.0, 100.0, 100.0, 100.0], "circulant": true}}"#,
            (0..16).map(|i| i as f64 * 0.01).collect::<Vec<_>>()
        );
        assert!(serde_json::from_str::<CouplingModel>(&not_circ).is_err());
    }

    #[test]
    fn out_of_range_rejected_before_prediction() {
        let geo = default_geometry();
        let model = CouplingModel::from_single_hsa(&hsa());
        assert!(coupled_lengths(&MotorAngles::new([-1.0, 0.0, 0.0, 0.0]), &model, &geo).is_err());
        assert!(MotorAngles::checked([0.0, 181.0, 0.0, 0.0], &geo).is_err());
        assert!(MotorAngles::checked([0.0, 180.0, 0.0, 0.0], &geo).is_ok());
    }

    #[test]
    fn lengths_must_be_positive() {
        assert!(ActuatorLengths::new([100.0, 0.0, 100.0, 100.0]).is_err());
        assert!(ActuatorLengths::new([100.0, -5.0, 100.0, 100.0]).is_err());
        assert!(ActuatorLengths::new([100.0, f64::NAN, 100.0, 100.0]).is_err());
        assert!(ActuatorLengths::new([1e-9, 100.0, 100.0, 100.0]).is_ok());
    }
}
