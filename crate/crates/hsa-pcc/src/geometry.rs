//! Fixed platform geometry and the single-actuator extension model.
//!
//! The platform is a square of four vertical HSAs driven by servos in the
//! base. Opposite-handed actuators sit on the diagonals so their reaction
//! torques on the top platform cancel. All other modules take the geometry
//! by reference; the values are immutable after construction.

use crate::error::{Error, Result};

/// Chirality of one HSA. Opposite hands extend under opposite servo
/// directions; angles are recorded as magnitudes, so handedness does not
/// enter the length model directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn parse(c: char) -> Option<Handedness> {
        match c.to_ascii_uppercase() {
            'L' => Some(Handedness::Left),
            'R' => Some(Handedness::Right),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Handedness::Left => 'L',
            Handedness::Right => 'R',
        }
    }
}

/// Center-to-center spacing of adjacent actuators on the stock platform (mm).
pub const DEFAULT_CENTER_SPACING_MM: f64 = 43.68;

/// Extension slope of a single stock actuator, mm per servo degree.
pub const DEFAULT_ALPHA0: f64 = 0.124;

/// Extension intercept of a single stock actuator. The bench measurement
/// reports this as a bare 0.119; it is interpreted here as millimeters.
pub const DEFAULT_ALPHA1: f64 = 0.119;

/// Dimensions of the 2x2 platform and the admissible servo range.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformGeometry {
    /// Side of the square formed by the four attachment centers (mm).
    pub m_mm: f64,
    /// Separation of a diagonally opposite actuator pair, used by the
    /// curvature formula (mm). Defaults to `m * sqrt(2)`.
    pub d_mm: f64,
    /// Lower admissible servo angle (degrees).
    pub theta_min_deg: f64,
    /// Upper admissible servo angle (degrees).
    pub theta_max_deg: f64,
    /// Handedness of the actuators at positions A, B, C, D.
    pub handedness: [Handedness; 4],
}

impl PlatformGeometry {
    /// Checks the structural invariants: positive dimensions, a non-empty
    /// angle range, and a two-left/two-right handedness pattern with equal
    /// hands on each diagonal pair (A,C) and (B,D).
    pub fn validate(&self) -> Result<()> {
        if !(self.m_mm.is_finite() && self.m_mm > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "m must be positive, got {} mm",
                self.m_mm
            )));
        }
        if !(self.d_mm.is_finite() && self.d_mm > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "d must be positive, got {} mm",
                self.d_mm
            )));
        }
        if !(self.theta_min_deg.is_finite()
            && self.theta_max_deg.is_finite()
            && self.theta_min_deg < self.theta_max_deg)
        {
            return Err(Error::InvalidGeometry(format!(
                "servo range [{}, {}] is empty or non-finite",
                self.theta_min_deg, self.theta_max_deg
            )));
        }
        let [a, b, c, d] = self.handedness;
        if a != c || b != d {
            return Err(Error::InvalidGeometry(
                "diagonal pairs (A,C) and (B,D) must share handedness".to_string(),
            ));
        }
        if a == b {
            return Err(Error::InvalidGeometry(
                "handedness must be two left and two right".to_string(),
            ));
        }
        Ok(())
    }

    /// Width of the admissible servo range, degrees.
    pub fn theta_range_deg(&self) -> f64 {
        self.theta_max_deg - self.theta_min_deg
    }
}

/// The stock platform: 43.68 mm center spacing, diagonal pair separation
/// `m * sqrt(2)`, servo range 0..180 degrees, right-handed actuators on the
/// A/C diagonal.
pub fn default_geometry() -> PlatformGeometry {
    PlatformGeometry {
        m_mm: DEFAULT_CENTER_SPACING_MM,
        d_mm: DEFAULT_CENTER_SPACING_MM * std::f64::consts::SQRT_2,
        theta_min_deg: 0.0,
        theta_max_deg: 180.0,
        handedness: [
            Handedness::Right,
            Handedness::Left,
            Handedness::Right,
            Handedness::Left,
        ],
    }
}

/// Linear zero-force extension model of one actuator in isolation:
/// `length = rest_length + alpha0 * theta + alpha1`.
///
/// `rest_length` is the actuator length at zero servo angle and zero
/// extension offset; it is a required configuration value because it depends
/// on the assembled platform, not on the actuator alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleHsaModel {
    /// Extension per servo degree (mm/degree). Positive: HSAs extend under
    /// actuation.
    pub alpha0: f64,
    /// Extension intercept (mm, assumed).
    pub alpha1: f64,
    /// Actuator length at zero angle before the intercept is applied (mm).
    pub rest_length_mm: f64,
}

impl SingleHsaModel {
    pub fn new(alpha0: f64, alpha1: f64, rest_length_mm: f64) -> Result<SingleHsaModel> {
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "alpha0 must be positive (HSAs extend under actuation), got {alpha0}"
            )));
        }
        if !alpha1.is_finite() || !rest_length_mm.is_finite() {
            return Err(Error::InvalidGeometry(
                "alpha1 and rest_length must be finite".to_string(),
            ));
        }
        Ok(SingleHsaModel {
            alpha0,
            alpha1,
            rest_length_mm,
        })
    }

    /// Stock actuator constants with a caller-supplied rest length.
    pub fn with_rest_length(rest_length_mm: f64) -> Result<SingleHsaModel> {
        SingleHsaModel::new(DEFAULT_ALPHA0, DEFAULT_ALPHA1, rest_length_mm)
    }

    /// Predicted length of one actuator at `theta_deg`, ignoring coupling.
    pub fn length_at(&self, theta_deg: f64) -> f64 {
        self.rest_length_mm + self.alpha0 * theta_deg + self.alpha1
    }
}
