//! Arc parameters to end-platform pose.
//!
//! The arc transform follows the virtual revolute-revolute-prismatic
//! decomposition: a z-rotation by `phi` orienting the bend plane, followed
//! by the in-plane circular arc of angle `alpha = kappa * s`. Its closed
//! form is
//!
//! ```text
//!     | cos(phi)cos(ks)  -sin(phi)  cos(phi)sin(ks)  cos(phi)(1-cos(ks))/k |
//! T = | sin(phi)cos(ks)   cos(phi)  sin(phi)sin(ks)  sin(phi)(1-cos(ks))/k |
//!     |     -sin(ks)         0          cos(ks)            sin(ks)/k       |
//!     |        0             0             0                   1           |
//! ```
//!
//! The translation column is singular at `kappa = 0`; below the shared
//! small-curvature threshold it switches to series limits so the straight
//! configuration is a pure translation by `s`. [`oracle_pose`] provides an
//! independent polygonal discretization of the same arc for validation.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::arc::{arc_from_lengths, ArcConfig, SMALL_CURVATURE};
use crate::coupling::{coupled_lengths, ActuatorLengths, CouplingModel, MotorAngles};
use crate::error::{Error, Result};
use crate::geometry::PlatformGeometry;

/// Orthonormality and determinant tolerance for valid rotation blocks.
pub const ROTATION_TOL: f64 = 1e-9;

/// A rigid transform: upper-left 3x3 rotation, last column translation in
/// mm, bottom row exactly (0, 0, 0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform(Matrix4<f64>);

impl HomogeneousTransform {
    pub fn identity() -> HomogeneousTransform {
        HomogeneousTransform(Matrix4::identity())
    }

    /// Validates the rotation block (`||R^T R - I||_max < 1e-9`,
    /// `det R = 1 +- 1e-9`) and the bottom row before accepting the matrix.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<HomogeneousTransform> {
        let t = HomogeneousTransform(m);
        t.validate()?;
        Ok(t)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix4<f64>) -> HomogeneousTransform {
        HomogeneousTransform(m)
    }

    pub fn from_row_major(values: [f64; 16]) -> Result<HomogeneousTransform> {
        HomogeneousTransform::from_matrix(Matrix4::from_row_slice(&values))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.row(3) != Matrix4::identity().row(3) {
            return Err(Error::InvalidArgument(
                "transform bottom row must be exactly (0, 0, 0, 1)".to_string(),
            ));
        }
        let defect = self.orthonormality_defect();
        if !(defect < ROTATION_TOL) {
            return Err(Error::InvalidArgument(format!(
                "rotation block is not orthonormal: ||R^T R - I||_max = {defect}"
            )));
        }
        let det = self.rotation().determinant();
        if !((det - 1.0).abs() < ROTATION_TOL) {
            return Err(Error::InvalidArgument(format!(
                "rotation block determinant {det} is not 1"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// `R * p + t`.
    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn rotation_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.rotation())
    }

    /// Max-norm of `R^T R - I` over the rotation block.
    pub fn orthonormality_defect(&self) -> f64 {
        let r = self.rotation();
        let gram = r.transpose() * r - Matrix3::identity();
        gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[i * 4 + j] = self.0[(i, j)];
            }
        }
        out
    }
}

/// End-platform pose: center position, bend angle `alpha = s * kappa`,
/// bend-plane angle `phi`, and the full transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    /// Center position (x, y, z), mm.
    pub position: Vector3<f64>,
    /// Arc bend angle, radians, >= 0.
    pub alpha: f64,
    /// Bend-plane angle, radians.
    pub phi: f64,
    pub transform: HomogeneousTransform,
}

/// Header for the CSV row form of a pose.
pub const POSE_CSV_HEADER: &str = "x_mm,y_mm,z_mm,alpha_deg,phi_deg";

impl Pose {
    /// One CSV row matching [`POSE_CSV_HEADER`]; angles in degrees.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.position.x,
            self.position.y,
            self.position.z,
            self.alpha.to_degrees(),
            self.phi.to_degrees()
        )
    }
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Pose", 6)?;
        s.serialize_field("x_mm", &self.position.x)?;
        s.serialize_field("y_mm", &self.position.y)?;
        s.serialize_field("z_mm", &self.position.z)?;
        s.serialize_field("alpha_deg", &self.alpha.to_degrees())?;
        s.serialize_field("phi_deg", &self.phi.to_degrees())?;
        s.serialize_field("transform_row_major", &self.transform.to_row_major().to_vec())?;
        s.end()
    }
}

/// Builds the RRP transform from its angles and a translation column.
fn rrp_transform(phi: f64, alpha: f64, t: Vector3<f64>) -> Matrix4<f64> {
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (sin_a, cos_a) = alpha.sin_cos();
    Matrix4::new(
        cos_phi * cos_a, -sin_phi, cos_phi * sin_a, t.x, //
        sin_phi * cos_a, cos_phi, sin_phi * sin_a, t.y, //
        -sin_a, 0.0, cos_a, t.z, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Translation column of the arc transform: the in-plane offset
/// `(1 - cos(ks))/kappa` and the height `sin(ks)/kappa`, with series limits
/// below the threshold. The direct branch uses `2 sin^2(ks/2)` to avoid the
/// cancellation in `1 - cos`.
fn arc_translation(kappa: f64, s: f64) -> (f64, f64) {
    let ks = kappa * s;
    if ks < SMALL_CURVATURE {
        let ks2 = ks * ks;
        (
            kappa * s * s / 2.0 * (1.0 - ks2 / 12.0 + ks2 * ks2 / 360.0),
            s * (1.0 - ks2 / 6.0 + ks2 * ks2 / 120.0),
        )
    } else {
        let half_sin = (ks / 2.0).sin();
        (2.0 * half_sin * half_sin / kappa, ks.sin() / kappa)
    }
}

/// Closed-form arc transform.
pub fn transform_from_arc(cfg: &ArcConfig) -> HomogeneousTransform {
    let (in_plane, height) = arc_translation(cfg.kappa, cfg.s);
    let (sin_phi, cos_phi) = cfg.phi.sin_cos();
    let translation = Vector3::new(cos_phi * in_plane, sin_phi * in_plane, height);
    HomogeneousTransform::from_matrix_unchecked(rrp_transform(
        cfg.phi,
        cfg.kappa * cfg.s,
        translation,
    ))
}

/// Closed-form pose: the transform applied to the base origin, plus the
/// orientation pair `(alpha, phi)`.
pub fn pose_from_arc(cfg: &ArcConfig) -> Pose {
    let transform = transform_from_arc(cfg);
    Pose {
        position: transform.translation(),
        alpha: cfg.kappa * cfg.s,
        phi: cfg.phi,
        transform,
    }
}

/// Full pipeline output with all intermediates kept for diagnostics.
#[derive(Debug, Clone)]
pub struct FkResult {
    pub pose: Pose,
    pub arc: ArcConfig,
    pub lengths: ActuatorLengths,
    /// Diagonal-sum mismatch of the predicted lengths, mm.
    pub consistency_residual_mm: f64,
}

/// Motor angles through the coupled length model to arc parameters to pose.
pub fn forward_kinematics(
    theta: &MotorAngles,
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<FkResult> {
    let lengths = coupled_lengths(theta, model, geo)?;
    let (arc, consistency_residual_mm) = arc_from_lengths(&lengths, geo)?;
    let pose = pose_from_arc(&arc);
    Ok(FkResult {
        pose,
        arc,
        lengths,
        consistency_residual_mm,
    })
}

/// Independent numerical check of the closed form: the arc is replaced by a
/// polygon of `n_segments` straight segments of length `s/n`, bending by
/// `alpha/n` per segment (half before, half after, so each edge runs along
/// the arc tangent at the segment midpoint), all oriented by the initial
/// z-rotation `phi`.
///
/// Converges to [`pose_from_arc`] with position error `O(1/n^2)`. The
/// per-segment rotations telescope to exactly `alpha`, so the orientation
/// carries no discretization error. Panics if `n_segments` is zero.
pub fn oracle_pose(cfg: &ArcConfig, n_segments: usize) -> Pose {
    assert!(n_segments >= 1, "oracle needs at least one segment");
    let n = n_segments;
    let alpha = cfg.kappa * cfg.s;
    if alpha == 0.0 {
        // the polygon degenerates to the straight segment chain of total
        // length exactly s
        let position = Vector3::new(0.0, 0.0, cfg.s);
        return Pose {
            position,
            alpha,
            phi: cfg.phi,
            transform: HomogeneousTransform::from_matrix_unchecked(rrp_transform(
                cfg.phi, 0.0, position,
            )),
        };
    }
    let step_angle = alpha / n as f64;
    let step_len = cfg.s / n as f64;

    // Edge i points along angle (i + 1/2) * step_angle from the base z-axis
    // within the bend plane. The direction is advanced incrementally by the
    // per-segment rotation and re-seeded from exact trig every 4096 steps to
    // keep rounding drift well below the convergence error.
    let (rot_sin, rot_cos) = step_angle.sin_cos();
    let (mut dir_sin, mut dir_cos) = (step_angle / 2.0).sin_cos();
    let mut in_plane = 0.0f64;
    let mut height = 0.0f64;
    for i in 0..n {
        if i > 0 && i % 4096 == 0 {
            let gamma = (i as f64 + 0.5) * step_angle;
            let (s_, c_) = gamma.sin_cos();
            dir_sin = s_;
            dir_cos = c_;
        }
        in_plane += step_len * dir_sin;
        height += step_len * dir_cos;
        let next_sin = dir_sin * rot_cos + dir_cos * rot_sin;
        let next_cos = dir_cos * rot_cos - dir_sin * rot_sin;
        dir_sin = next_sin;
        dir_cos = next_cos;
    }

    let (sin_phi, cos_phi) = cfg.phi.sin_cos();
    let position = Vector3::new(cos_phi * in_plane, sin_phi * in_plane, height);
    Pose {
        position,
        alpha,
        phi: cfg.phi,
        transform: HomogeneousTransform::from_matrix_unchecked(rrp_transform(
            cfg.phi, alpha, position,
        )),
    }
}

/// Bend-plane angle of an observed center point: `atan2(y, x)`.
///
/// Undefined on the z-axis (`x = y = 0`), which legitimately occurs at the
/// rest pose; callers decide whether to skip or fail.
pub fn observed_phi(position: &Vector3<f64>) -> Result<f64> {
    if position.x == 0.0 && position.y == 0.0 {
        return Err(Error::UndefinedAngle);
    }
    Ok(position.y.atan2(position.x))
}

/// Bend angle recovered from an observed orientation quaternion: the angle
/// in `[0, pi]` between the platform's body z-axis and the world z-axis.
///
/// Quaternions within 1e-3 of unit norm are normalized; anything further is
/// rejected as corrupt.
pub fn alpha_from_quaternion(q: &Quaternion<f64>) -> Result<f64> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-3 {
        return Err(Error::NonUnitQuaternion { norm });
    }
    let unit = UnitQuaternion::from_quaternion(*q);
    let body_z = unit * Vector3::z();
    Ok(body_z.z.clamp(-1.0, 1.0).acos())
}

/// Quaternion from scalar-last (x, y, z, w) components, the file-format
/// convention for mocap exports.
pub fn quaternion_from_xyzw(xyzw: [f64; 4]) -> Quaternion<f64> {
    Quaternion::new(xyzw[3], xyzw[0], xyzw[1], xyzw[2])
}

/// Scalar-last (x, y, z, w) components of a unit quaternion.
pub fn quaternion_to_xyzw(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.i, q.j, q.k, q.w]
}
