//! Error types shared across the crate.

use std::fmt;

use thiserror::Error;

/// Identifies one of the four actuators in the 2x2 grid, ordered A, B, C, D.
///
/// A/C and B/D are the diagonal pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Actuator {
    A,
    B,
    C,
    D,
}

impl Actuator {
    pub const ALL: [Actuator; 4] = [Actuator::A, Actuator::B, Actuator::C, Actuator::D];

    /// Index of this actuator in the canonical (A, B, C, D) ordering.
    pub fn index(self) -> usize {
        match self {
            Actuator::A => 0,
            Actuator::B => 1,
            Actuator::C => 2,
            Actuator::D => 3,
        }
    }

    pub fn from_index(index: usize) -> Option<Actuator> {
        Self::ALL.get(index).copied()
    }

    /// The other actuator on the same diagonal (A<->C, B<->D).
    pub fn diagonal_partner(self) -> Actuator {
        match self {
            Actuator::A => Actuator::C,
            Actuator::B => Actuator::D,
            Actuator::C => Actuator::A,
            Actuator::D => Actuator::B,
        }
    }
}

impl fmt::Display for Actuator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Actuator::A => 'A',
            Actuator::B => 'B',
            Actuator::C => 'C',
            Actuator::D => 'D',
        };
        write!(f, "{c}")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("servo angle for actuator {actuator} is {value_deg}°, outside [{min_deg}°, {max_deg}°]")]
    AngleOutOfRange {
        actuator: Actuator,
        value_deg: f64,
        min_deg: f64,
        max_deg: f64,
    },

    /// A measured or supplied chord length violated positivity.
    #[error("actuator length for {actuator} must be positive and finite, got {value_mm} mm")]
    InvalidLength { actuator: Actuator, value_mm: f64 },

    /// The coupling model predicted a non-positive length, which signals a
    /// badly fitted model or an out-of-envelope input rather than a valid state.
    #[error(
        "coupling model predicts non-positive length {value_mm} mm for actuator {actuator}; \
         the model is inconsistent with this input"
    )]
    ModelInconsistency { actuator: Actuator, value_mm: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ill-posed calibration dataset: {0}")]
    IllPosedDataset(String),

    #[error("dataset contains no records")]
    EmptyDataset,

    /// Chord lengths outside the constant-curvature envelope.
    #[error("geometrically infeasible configuration: {0}")]
    Infeasible(String),

    /// The bend-plane angle of a point on the z-axis is undefined.
    #[error("bend-plane angle is undefined: point lies on the z-axis")]
    UndefinedAngle,

    #[error("quaternion norm {norm} is too far from 1 to normalize")]
    NonUnitQuaternion { norm: f64 },

    /// Returned when an operation needs observed actuator lengths but the
    /// trajectory records do not carry them.
    #[error("trajectory records carry no observed actuator lengths")]
    MissingObservedLengths,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("unsupported dataset schema version {0}")]
    UnsupportedSchema(u32),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Error {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
