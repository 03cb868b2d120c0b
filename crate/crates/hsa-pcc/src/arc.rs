//! Chord lengths to constant-curvature arc parameters and back.
//!
//! The four chord lengths determine one circular-arc segment through the
//! diagonal strain ratios
//!
//! ```text
//! u = (l_C - l_A) / (l_C + l_A),   v = (l_D - l_B) / (l_D + l_B)
//! ```
//!
//! which give curvature `kappa = sqrt(u^2 + v^2) / d`, bend-plane angle
//! `phi = atan2(l_B*l_C - l_A*l_D, l_C*l_D - l_A*l_B)` (algebraically
//! `atan2(u - v, u + v)`), and arc length `s = (2/kappa) * asin(kappa*l_s/2)`.
//! The straight configuration is handled by a series branch so that
//! `kappa = 0` yields `s = l_s` exactly.

use crate::coupling::ActuatorLengths;
use crate::error::{Error, Result};
use crate::geometry::PlatformGeometry;

/// Below `kappa * length < SMALL_CURVATURE` the arcsine/sine expressions are
/// replaced by their series. At the threshold the truncation error of the
/// retained terms is below 1e-24 relative, far under the 1e-12 test
/// tolerances, and the branch is continuous.
pub const SMALL_CURVATURE: f64 = 1e-6;

/// One constant-curvature segment.
///
/// `kappa` is kept non-negative; bend direction is carried entirely by
/// `phi`, which lives in `(-pi, pi]`. `u` and `v` are the dimensionless
/// diagonal strain ratios retained for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcConfig {
    /// Curvature, 1/mm, >= 0.
    pub kappa: f64,
    /// Bend-plane angle about the base z-axis, radians, in (-pi, pi].
    /// Zero by convention when `kappa` is zero.
    pub phi: f64,
    /// Arc length, mm, > 0.
    pub s: f64,
    /// Center chord length, mm, > 0.
    pub l_s: f64,
    /// Diagonal strain ratio of the (A, C) pair.
    pub u: f64,
    /// Diagonal strain ratio of the (B, D) pair.
    pub v: f64,
}

impl ArcConfig {
    /// Builds a configuration from `(kappa, phi, s)`, deriving the center
    /// chord and strain ratios for the given geometry.
    ///
    /// Feasibility requires `kappa >= 0`, `s > 0`, `kappa * s < pi` (the arc
    /// subtends less than a half turn) and strain ratios below 1 in
    /// magnitude.
    pub fn from_kappa_phi_s(
        kappa: f64,
        phi: f64,
        s: f64,
        geo: &PlatformGeometry,
    ) -> Result<ArcConfig> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "curvature must be finite and non-negative, got {kappa}"
            )));
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "arc length must be positive, got {s}"
            )));
        }
        if kappa * s >= std::f64::consts::PI {
            return Err(Error::Infeasible(format!(
                "arc angle kappa*s = {} rad reaches a half turn; the chord map is not invertible",
                kappa * s
            )));
        }
        let phi = if kappa == 0.0 { 0.0 } else { normalize_angle(phi) };
        let (u, v) = strain_ratios(kappa, phi, geo);
        if u.abs() >= 1.0 || v.abs() >= 1.0 {
            return Err(Error::Infeasible(format!(
                "diagonal strain |u| = {}, |v| = {} must stay below 1",
                u.abs(),
                v.abs()
            )));
        }
        let l_s = chord_from_arc(kappa, s);
        Ok(ArcConfig {
            kappa,
            phi,
            s,
            l_s,
            u,
            v,
        })
    }

    /// Total bend angle subtended by the arc, radians.
    pub fn alpha(&self) -> f64 {
        self.s * self.kappa
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Strain ratios for a bend of `kappa` toward `phi`:
/// `u = kappa*d*cos(pi/4 - phi)`, `v = kappa*d*sin(pi/4 - phi)`.
fn strain_ratios(kappa: f64, phi: f64, geo: &PlatformGeometry) -> (f64, f64) {
    let q = std::f64::consts::FRAC_PI_4 - phi;
    (kappa * geo.d_mm * q.cos(), kappa * geo.d_mm * q.sin())
}

/// Arc length from curvature and chord: `s = (2/kappa) * asin(kappa*l_s/2)`,
/// with the series `s = l_s * (1 + x^2/24 + 3x^4/640)`, `x = kappa*l_s`,
/// below the small-curvature threshold.
pub(crate) fn arc_from_chord(kappa: f64, l_s: f64) -> f64 {
    let x = kappa * l_s;
    if x < SMALL_CURVATURE {
        arc_from_chord_series(kappa, l_s)
    } else {
        (2.0 / kappa) * (x / 2.0).asin()
    }
}

pub(crate) fn arc_from_chord_series(kappa: f64, l_s: f64) -> f64 {
    let x2 = (kappa * l_s) * (kappa * l_s);
    l_s * (1.0 + x2 / 24.0 + 3.0 * x2 * x2 / 640.0)
}

#[cfg(test)]
pub(crate) fn arc_from_chord_direct(kappa: f64, l_s: f64) -> f64 {
    (2.0 / kappa) * (kappa * l_s / 2.0).asin()
}

/// Chord from curvature and arc length: `l_s = (2/kappa) * sin(kappa*s/2)`,
/// series `l_s = s * (1 - y^2/24 + y^4/1920)`, `y = kappa*s`, below the
/// threshold.
pub(crate) fn chord_from_arc(kappa: f64, s: f64) -> f64 {
    let y = kappa * s;
    if y < SMALL_CURVATURE {
        let y2 = y * y;
        s * (1.0 - y2 / 24.0 + y2 * y2 / 1920.0)
    } else {
        (2.0 / kappa) * (y / 2.0).sin()
    }
}

/// Converts four chord lengths into arc parameters.
///
/// Returns the configuration together with the consistency residual
/// `|(l_A + l_C) - (l_B + l_D)| / 2` in mm. The center-chord identity
/// demands the residual be zero; measured data may violate it, so the
/// center chord is taken as the mean of all four lengths and the residual
/// is surfaced to the caller instead of silently dropped.
pub fn arc_from_lengths(
    lengths: &ActuatorLengths,
    geo: &PlatformGeometry,
) -> Result<(ArcConfig, f64)> {
    let [l_a, l_b, l_c, l_d] = lengths.as_array();

    let u = (l_c - l_a) / (l_c + l_a);
    let v = (l_d - l_b) / (l_d + l_b);
    let l_s = (l_a + l_b + l_c + l_d) / 4.0;
    let residual = ((l_a + l_c) - (l_b + l_d)).abs() / 2.0;

    let kappa = (u * u + v * v).sqrt() / geo.d_mm;

    let half_chord_arg = kappa * l_s / 2.0;
    if half_chord_arg > 1.0 {
        return Err(Error::Infeasible(format!(
            "kappa * l_s / 2 = {half_chord_arg} exceeds 1; the lengths are outside \
             the constant-curvature envelope"
        )));
    }

    // phi = atan2(l_B*l_C - l_A*l_D, l_C*l_D - l_A*l_B) = atan2(u - v, u + v);
    // undefined (0/0) in the straight configuration, where it is fixed to 0
    // because the pose no longer depends on it.
    let phi = if kappa == 0.0 {
        0.0
    } else {
        (l_b * l_c - l_a * l_d).atan2(l_c * l_d - l_a * l_b)
    };

    let s = arc_from_chord(kappa, l_s);

    Ok((
        ArcConfig {
            kappa,
            phi,
            s,
            l_s,
            u,
            v,
        },
        residual,
    ))
}

/// Exact inverse of [`arc_from_lengths`] for a consistent configuration:
/// reconstructs the four chord lengths whose arc parameters are
/// `(cfg.kappa, cfg.phi, cfg.s)`, with zero consistency residual.
pub fn lengths_from_arc(cfg: &ArcConfig, geo: &PlatformGeometry) -> Result<ActuatorLengths> {
    if !(cfg.kappa.is_finite() && cfg.kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "curvature must be finite and non-negative, got {}",
            cfg.kappa
        )));
    }
    if cfg.kappa > 0.0 && cfg.kappa * cfg.s / 2.0 >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Infeasible(format!(
            "arc angle kappa*s = {} rad reaches a half turn",
            cfg.kappa * cfg.s
        )));
    }
    let (u, v) = strain_ratios(cfg.kappa, cfg.phi, geo);
    if u.abs() >= 1.0 || v.abs() >= 1.0 {
        return Err(Error::Infeasible(format!(
            "diagonal strain |u| = {}, |v| = {} must stay below 1",
            u.abs(),
            v.abs()
        )));
    }
    let l_s = chord_from_arc(cfg.kappa, cfg.s);
    ActuatorLengths::new([
        l_s * (1.0 - u),
        l_s * (1.0 - v),
        l_s * (1.0 + u),
        l_s * (1.0 + v),
    ])
}
