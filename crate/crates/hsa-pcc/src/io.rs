//! Dataset, configuration, and model file formats.
//!
//! Calibration CSV (exact header, angles in degrees, lengths in mm):
//!
//! ```text
//! theta_a_deg,theta_b_deg,theta_c_deg,theta_d_deg,l_a_mm,l_b_mm,l_c_mm,l_d_mm
//! ```
//!
//! Trajectory CSV adds a `#`-prefixed key = value preamble (schema version,
//! units, quaternion convention, base-alignment transform) before the
//! column header:
//!
//! ```text
//! # schema_version = 1
//! # units = mm,deg,s
//! # quaternion = xyzw
//! # base_alignment = 1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1
//! time_s,theta_a_deg,...,x_mm,y_mm,z_mm,qx,qy,qz,qw,l_a_mm,...,speed_rpm
//! ```
//!
//! The alignment maps the mocap base frame into the model base frame and is
//! applied to observed positions and quaternions at load time; it must be
//! given explicitly rather than inferred. Quaternions are scalar-last
//! (x, y, z, w) on disk. The four observed-length fields are either all
//! present or all empty on a row. Geometry configs are plain-text
//! key = value files; models and reports are JSON.

use std::fs;
use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};

use crate::calibration::{CalibrationDataset, CalibrationRecord, FitReport};
use crate::coupling::{ActuatorLengths, CouplingModel, MotorAngles};
use crate::error::{Error, Result};
use crate::geometry::{default_geometry, Handedness, PlatformGeometry, SingleHsaModel};
use crate::metrics::TrajectoryRecord;
use crate::pose::{observed_phi, quaternion_from_xyzw, quaternion_to_xyzw, HomogeneousTransform};

/// Exact column header of the calibration CSV format.
pub const CALIBRATION_CSV_HEADER: &str =
    "theta_a_deg,theta_b_deg,theta_c_deg,theta_d_deg,l_a_mm,l_b_mm,l_c_mm,l_d_mm";

/// Exact column header of the trajectory CSV format.
pub const TRAJECTORY_CSV_HEADER: &str = "time_s,theta_a_deg,theta_b_deg,theta_c_deg,theta_d_deg,\
     x_mm,y_mm,z_mm,qx,qy,qz,qw,l_a_mm,l_b_mm,l_c_mm,l_d_mm,speed_rpm";

/// The schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Trajectory-file metadata carried in the preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub schema_version: u32,
    /// Mocap base frame -> model base frame.
    pub base_alignment: HomogeneousTransform,
    /// Length, angle, and time units; must be ("mm", "deg", "s").
    pub units: (String, String, String),
    /// Quaternion component order tag; must be "xyzw" (scalar last).
    pub quaternion_convention: String,
}

impl DatasetHeader {
    pub fn identity() -> DatasetHeader {
        DatasetHeader {
            schema_version: SCHEMA_VERSION,
            base_alignment: HomogeneousTransform::identity(),
            units: ("mm".to_string(), "deg".to_string(), "s".to_string()),
            quaternion_convention: "xyzw".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::UnsupportedSchema(self.schema_version));
        }
        if self.units != ("mm".to_string(), "deg".to_string(), "s".to_string()) {
            return Err(Error::InvalidArgument(format!(
                "unsupported units declaration {:?}; expected mm,deg,s",
                self.units
            )));
        }
        if self.quaternion_convention != "xyzw" {
            return Err(Error::InvalidArgument(format!(
                "unsupported quaternion convention '{}'; expected scalar-last xyzw",
                self.quaternion_convention
            )));
        }
        self.base_alignment.validate()
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

/// Writes a file atomically: the content lands under a temporary name in
/// the same directory and is renamed into place, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, contents).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path)
        .map_err(|e| Error::io(format!("renaming {} into place", tmp.display()), e))
}

fn parse_field(path: &Path, line: u64, name: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        Error::parse(path, line, format!("malformed numeric field {name}: '{raw}'"))
    })
}

/// Loads a calibration dataset, validating angles against the geometry
/// range and lengths for positivity. Errors carry the file line.
pub fn load_calibration_csv(path: &Path, geo: &PlatformGeometry) -> Result<CalibrationDataset> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let expected: Vec<&str> = CALIBRATION_CSV_HEADER.split(',').collect();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            path,
            1,
            format!("header mismatch: expected '{CALIBRATION_CSV_HEADER}', got '{}'", got.join(",")),
        ));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 8 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 8 columns, got {}", row.len()),
            ));
        }
        let mut values = [0.0f64; 8];
        for (i, v) in values.iter_mut().enumerate() {
            *v = parse_field(path, line, expected[i], &row[i])?;
        }
        let theta = MotorAngles::checked([values[0], values[1], values[2], values[3]], geo)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        let lengths = ActuatorLengths::new([values[4], values[5], values[6], values[7]])
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
        records.push(CalibrationRecord {
            theta,
            measured_lengths: lengths,
        });
    }
    CalibrationDataset::new(records)
}

/// Writes a calibration dataset in canonical formatting (shortest f64
/// round-trip representation), atomically.
pub fn save_calibration_csv(path: &Path, dataset: &CalibrationDataset) -> Result<()> {
    let mut out = String::with_capacity(dataset.len() * 64 + 80);
    out.push_str(CALIBRATION_CSV_HEADER);
    out.push('\n');
    for record in dataset.records() {
        let t = record.theta.as_array();
        let l = record.measured_lengths.as_array();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t[0], t[1], t[2], t[3], l[0], l[1], l[2], l[3]
        ));
    }
    write_atomic(path, &out)
}

fn parse_preamble(path: &Path, text: &str) -> Result<(DatasetHeader, usize)> {
    let mut schema_version: Option<u32> = None;
    let mut alignment = HomogeneousTransform::identity();
    let mut units = ("mm".to_string(), "deg".to_string(), "s".to_string());
    let mut quaternion_convention = "xyzw".to_string();
    let mut consumed = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = (idx + 1) as u64;
        let line = raw_line.trim();
        if !line.starts_with('#') {
            break;
        }
        consumed += 1;
        let body = line.trim_start_matches('#').trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::parse(
                path,
                line_no,
                format!("preamble line is not 'key = value': '{body}'"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "schema_version" => {
                schema_version = Some(value.parse::<u32>().map_err(|_| {
                    Error::parse(path, line_no, format!("bad schema_version '{value}'"))
                })?);
            }
            "units" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("units must be 'length,angle,time', got '{value}'"),
                    ));
                }
                units = (
                    parts[0].to_string(),
                    parts[1].to_string(),
                    parts[2].to_string(),
                );
            }
            "quaternion" => quaternion_convention = value.to_string(),
            "base_alignment" => {
                let numbers: Vec<f64> = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        Error::parse(path, line_no, "bad number in base_alignment".to_string())
                    })?;
                if numbers.len() != 16 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("base_alignment needs 16 row-major numbers, got {}", numbers.len()),
                    ));
                }
                let mut m = [0.0; 16];
                m.copy_from_slice(&numbers);
                alignment = HomogeneousTransform::from_row_major(m)
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
            }
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unknown preamble key '{other}'"),
                ));
            }
        }
    }

    let Some(schema_version) = schema_version else {
        return Err(Error::parse(
            path,
            1,
            "missing '# schema_version = 1' preamble".to_string(),
        ));
    };
    let header = DatasetHeader {
        schema_version,
        base_alignment: alignment,
        units,
        quaternion_convention,
    };
    header.validate()?;
    Ok((header, consumed))
}

/// Loads a trajectory, applying the preamble's base alignment to observed
/// positions and quaternions. Validates monotone time, angle ranges, unit
/// quaternions (normalized when within 1e-3 of unit), all-or-none length
/// fields, and a constant declared speed.
pub fn load_trajectory_csv(
    path: &Path,
    geo: &PlatformGeometry,
) -> Result<(DatasetHeader, Vec<TrajectoryRecord>)> {
    let text = read_to_string(path)?;
    let (header, preamble_lines) = parse_preamble(path, &text)?;

    let body_start = text
        .lines()
        .take(preamble_lines)
        .map(|l| l.len() + 1)
        .sum::<usize>()
        .min(text.len());
    let body = &text[body_start..];

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(body.as_bytes());

    let expected: Vec<&str> = TRAJECTORY_CSV_HEADER.split(',').collect();
    let got: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, preamble_lines as u64 + 1, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if got != expected {
        return Err(Error::parse(
            path,
            preamble_lines as u64 + 1,
            format!("header mismatch: expected '{TRAJECTORY_CSV_HEADER}'"),
        ));
    }

    // Identity alignment passes observations through bit-exactly.
    let alignment = if header.base_alignment == HomogeneousTransform::identity() {
        None
    } else {
        let rotation = nalgebra::Rotation3::from_matrix_unchecked(header.base_alignment.rotation());
        Some(UnitQuaternion::from_rotation_matrix(&rotation))
    };

    let mut records: Vec<TrajectoryRecord> = Vec::new();
    let mut declared_speed: Option<f64> = None;
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = preamble_lines as u64 + row.position().map_or(0, |p| p.line());
        if row.len() != 17 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 17 columns, got {}", row.len()),
            ));
        }

        let time_s = parse_field(path, line, "time_s", &row[0])?;
        if let Some(prev) = records.last() {
            if time_s <= prev.time_s {
                return Err(Error::parse(
                    path,
                    line,
                    format!(
                        "time_s = {time_s} is not strictly increasing (previous {})",
                        prev.time_s
                    ),
                ));
            }
        }

        let mut theta = [0.0; 4];
        for (i, t) in theta.iter_mut().enumerate() {
            *t = parse_field(path, line, expected[1 + i], &row[1 + i])?;
        }
        let theta = MotorAngles::checked(theta, geo)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;

        let mut p = [0.0; 3];
        for (i, v) in p.iter_mut().enumerate() {
            *v = parse_field(path, line, expected[5 + i], &row[5 + i])?;
        }
        let mut q = [0.0; 4];
        for (i, v) in q.iter_mut().enumerate() {
            *v = parse_field(path, line, expected[8 + i], &row[8 + i])?;
        }
        let raw_q = quaternion_from_xyzw(q);
        let norm = raw_q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-3 {
            return Err(Error::parse(
                path,
                line,
                format!("quaternion norm {norm} is too far from 1"),
            ));
        }
        // Components already unit to 1e-9 are kept verbatim so canonical
        // files round-trip bit-identically; sloppier input is normalized.
        let observed_quaternion = if (norm - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(raw_q)
        } else {
            UnitQuaternion::from_quaternion(raw_q)
        };

        let length_fields: Vec<&str> = (12..16).map(|i| row[i].trim()).collect();
        let observed_lengths = if length_fields.iter().all(|f| f.is_empty()) {
            None
        } else if length_fields.iter().all(|f| !f.is_empty()) {
            let mut l = [0.0; 4];
            for (i, v) in l.iter_mut().enumerate() {
                *v = parse_field(path, line, expected[12 + i], &row[12 + i])?;
            }
            Some(
                ActuatorLengths::new(l).map_err(|e| Error::parse(path, line, e.to_string()))?,
            )
        } else {
            return Err(Error::parse(
                path,
                line,
                "observed length fields must be all present or all empty".to_string(),
            ));
        };

        let speed_rpm = parse_field(path, line, "speed_rpm", &row[16])?;
        match declared_speed {
            None => declared_speed = Some(speed_rpm),
            Some(s) if s != speed_rpm => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("speed_rpm changed from {s} to {speed_rpm}; it is a per-sweep constant"),
                ));
            }
            _ => {}
        }

        let mut observed_position = Vector3::new(p[0], p[1], p[2]);
        let mut observed_quaternion = observed_quaternion;
        if let Some(align_quat) = &alignment {
            observed_position = header.base_alignment.apply_point(&observed_position);
            observed_quaternion = align_quat * observed_quaternion;
        }

        records.push(TrajectoryRecord {
            time_s,
            theta,
            observed_position,
            observed_quaternion,
            observed_lengths,
            speed_rpm,
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((header, records))
}

/// Writes a trajectory in canonical form: schema 1, identity alignment
/// (records are stored in the model base frame), scalar-last quaternions.
pub fn save_trajectory_csv(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut out = String::with_capacity(records.len() * 160 + 256);
    out.push_str("# schema_version = 1\n");
    out.push_str("# units = mm,deg,s\n");
    out.push_str("# quaternion = xyzw\n");
    out.push_str("# base_alignment = 1,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1\n");
    out.push_str(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for r in records {
        let t = r.theta.as_array();
        let p = r.observed_position;
        let q = quaternion_to_xyzw(&r.observed_quaternion);
        let lengths = match r.observed_lengths {
            Some(l) => {
                let a = l.as_array();
                format!("{},{},{},{}", a[0], a[1], a[2], a[3])
            }
            None => ",,,".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.time_s, t[0], t[1], t[2], t[3], p.x, p.y, p.z, q[0], q[1], q[2], q[3], lengths,
            r.speed_rpm
        ));
    }
    write_atomic(path, &out)
}

/// Geometry plus the single-actuator constants, as read from one config
/// file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformConfig {
    pub geometry: PlatformGeometry,
    pub hsa: SingleHsaModel,
}

/// Parses a key = value geometry config. Recognized keys: `m_mm`, `d_mm`,
/// `theta_min_deg`, `theta_max_deg`, `rest_length_mm`, `alpha0`, `alpha1`,
/// `handedness` (four letters, e.g. `RLRL`). `rest_length_mm` is required;
/// everything else defaults to the stock platform, with `d_mm` derived as
/// `m * sqrt(2)` when not given explicitly. `#` starts a comment.
pub fn load_platform_config(path: &Path) -> Result<PlatformConfig> {
    let text = read_to_string(path)?;
    let mut geometry = default_geometry();
    let mut d_explicit = false;
    let mut alpha0 = crate::geometry::DEFAULT_ALPHA0;
    let mut alpha1 = crate::geometry::DEFAULT_ALPHA1;
    let mut rest_length: Option<f64> = None;
    let mut seen: Vec<String> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = (idx + 1) as u64;
        let line = match raw_line.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw_line.trim(),
        };
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 'key = value', got '{line}'"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(Error::parse(path, line_no, format!("duplicate key '{key}'")));
        }
        seen.push(key.to_string());

        let num = || -> Result<f64> {
            value.parse::<f64>().map_err(|_| {
                Error::parse(path, line_no, format!("bad number for {key}: '{value}'"))
            })
        };
        match key {
            "m_mm" => geometry.m_mm = num()?,
            "d_mm" => {
                geometry.d_mm = num()?;
                d_explicit = true;
            }
            "theta_min_deg" => geometry.theta_min_deg = num()?,
            "theta_max_deg" => geometry.theta_max_deg = num()?,
            "rest_length_mm" => rest_length = Some(num()?),
            "alpha0" => alpha0 = num()?,
            "alpha1" => alpha1 = num()?,
            "handedness" => {
                let letters: Vec<char> = value.chars().filter(|c| !c.is_whitespace()).collect();
                if letters.len() != 4 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("handedness needs 4 letters, got '{value}'"),
                    ));
                }
                for (i, c) in letters.iter().enumerate() {
                    geometry.handedness[i] = Handedness::parse(*c).ok_or_else(|| {
                        Error::parse(path, line_no, format!("bad handedness letter '{c}'"))
                    })?;
                }
            }
            other => {
                return Err(Error::parse(path, line_no, format!("unknown key '{other}'")));
            }
        }
    }

    if !d_explicit {
        geometry.d_mm = geometry.m_mm * std::f64::consts::SQRT_2;
    }
    geometry.validate()?;
    let Some(rest_length_mm) = rest_length else {
        return Err(Error::InvalidArgument(format!(
            "{}: rest_length_mm is required (the bench model does not determine it)",
            path.display()
        )));
    };
    let hsa = SingleHsaModel::new(alpha0, alpha1, rest_length_mm)?;
    Ok(PlatformConfig { geometry, hsa })
}

/// Chord lengths implied by a platform pose: attachment corners sit at
/// `(+-m/2, +-m/2, 0)` on both bodies (A, B, C, D counterclockwise so that
/// A/C and B/D are the diagonals), and each length is the Euclidean
/// distance from the base corner to the transformed platform corner.
///
/// This is the documented reading of "measured lengths" for rigs that track
/// only the two body poses. Note that these corner chords follow the true
/// rigid-body geometry, which the four-chord arc model only approximates.
pub fn corner_lengths_from_pose(
    platform_pose: &HomogeneousTransform,
    geo: &PlatformGeometry,
) -> Result<ActuatorLengths> {
    let h = geo.m_mm / 2.0;
    let corners = [
        Vector3::new(-h, -h, 0.0), // A
        Vector3::new(h, -h, 0.0),  // B
        Vector3::new(h, h, 0.0),   // C
        Vector3::new(-h, h, 0.0),  // D
    ];
    let mut lengths = [0.0; 4];
    for (i, corner) in corners.iter().enumerate() {
        lengths[i] = (platform_pose.apply_point(corner) - corner).norm();
    }
    ActuatorLengths::new(lengths)
}

/// Loads a coupling model from JSON.
pub fn load_model(path: &Path) -> Result<CouplingModel> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Saves a coupling model as pretty JSON, atomically.
pub fn save_model(path: &Path, model: &CouplingModel) -> Result<()> {
    save_json(path, model)
}

/// Loads a fit report from JSON.
pub fn load_fit_report(path: &Path) -> Result<FitReport> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Serializes any report as pretty JSON with a trailing newline, atomically.
pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Plot-ready per-record CSV: predicted and observed positions,
/// orientation angles, lengths, and their signed errors. Length fields are
/// empty when a record carries no observation; the phi error is empty when
/// the observed center sits on the z-axis.
pub fn write_eval_csv(
    path: &Path,
    records: &[TrajectoryRecord],
    model: &CouplingModel,
    geo: &PlatformGeometry,
) -> Result<()> {
    use crate::pose::{alpha_from_quaternion, forward_kinematics};

    let mut out = String::new();
    out.push_str(
        "time_s,speed_rpm,pred_x_mm,pred_y_mm,pred_z_mm,obs_x_mm,obs_y_mm,obs_z_mm,\
         err_x_mm,err_y_mm,err_z_mm,err_distance_mm,\
         pred_alpha_deg,obs_alpha_deg,err_alpha_deg,pred_phi_deg,obs_phi_deg,err_phi_deg,\
         pred_l_a_mm,pred_l_b_mm,pred_l_c_mm,pred_l_d_mm,\
         obs_l_a_mm,obs_l_b_mm,obs_l_c_mm,obs_l_d_mm,\
         err_l_a_mm,err_l_b_mm,err_l_c_mm,err_l_d_mm\n",
    );
    for r in records {
        let fk = forward_kinematics(&r.theta, model, geo)?;
        let p = fk.pose.position;
        let o = r.observed_position;
        let e = p - o;
        let obs_alpha = alpha_from_quaternion(r.observed_quaternion.quaternion())?.to_degrees();
        let pred_alpha = fk.pose.alpha.to_degrees();
        let pred_phi = fk.pose.phi.to_degrees();
        let (obs_phi_s, err_phi_s) = match observed_phi(&o) {
            Ok(op) => {
                let od = op.to_degrees();
                (
                    od.to_string(),
                    crate::metrics::wrap_degrees(pred_phi - od).to_string(),
                )
            }
            Err(_) => (String::new(), String::new()),
        };
        let pl = fk.lengths.as_array();
        let (obs_l_s, err_l_s) = match r.observed_lengths {
            Some(ol) => {
                let oa = ol.as_array();
                (
                    format!("{},{},{},{}", oa[0], oa[1], oa[2], oa[3]),
                    format!(
                        "{},{},{},{}",
                        pl[0] - oa[0],
                        pl[1] - oa[1],
                        pl[2] - oa[2],
                        pl[3] - oa[3]
                    ),
                )
            }
            None => (",,,".to_string(), ",,,".to_string()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.time_s,
            r.speed_rpm,
            p.x,
            p.y,
            p.z,
            o.x,
            o.y,
            o.z,
            e.x,
            e.y,
            e.z,
            e.norm(),
            pred_alpha,
            obs_alpha,
            pred_alpha - obs_alpha,
            pred_phi,
            obs_phi_s,
            err_phi_s,
            pl[0],
            pl[1],
            pl[2],
            pl[3],
            obs_l_s,
            err_l_s
        ));
    }
    write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::ArcConfig;
    use crate::pose::pose_from_arc;
    use crate::sweep::{composite_sweep, SweepSpec};
    use nalgebra::Matrix4;
    use std::f64::consts::FRAC_PI_2;

    fn tempdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    fn model() -> CouplingModel {
        CouplingModel::circulant([0.105, -0.012, 0.008, -0.015], 100.0).unwrap()
    }

    #[test]
    fn calibration_round_trip_is_bit_identical() {
        let dir = tempdir();
        let geo = default_geometry();
        let ds =
            crate::calibration::generate_synthetic_dataset(&model(), &geo, 90.0, 0.4, 17).unwrap();
        let path = dir.path().join("cal.csv");
        save_calibration_csv(&path, &ds).unwrap();
        let loaded = load_calibration_csv(&path, &geo).unwrap();
        assert_eq!(ds, loaded);

        // canonical formatting: saving the loaded copy reproduces the bytes
        let path2 = dir.path().join("cal2.csv");
        save_calibration_csv(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn calibration_loader_validates_rows() {
        let dir = tempdir();
        let geo = default_geometry();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, format!("{CALIBRATION_CSV_HEADER}\n")).unwrap();
        assert!(matches!(
            load_calibration_csv(&path, &geo),
            Err(Error::EmptyDataset)
        ));

        std::fs::write(
            &path,
            format!("{CALIBRATION_CSV_HEADER}\n0,0,200,0,100,100,100,100\n"),
        )
        .unwrap();
        let err = load_calibration_csv(&path, &geo).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains('C') && message.contains("200"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        std::fs::write(
            &path,
            format!("{CALIBRATION_CSV_HEADER}\n0,0,0,abc,100,100,100,100\n"),
        )
        .unwrap();
        assert!(matches!(
            load_calibration_csv(&path, &geo),
            Err(Error::Parse { .. })
        ));

        std::fs::write(&path, "wrong,header\n1,2\n").unwrap();
        assert!(matches!(
            load_calibration_csv(&path, &geo),
            Err(Error::Parse { line: 1, .. })
        ));

        std::fs::write(
            &path,
            format!("{CALIBRATION_CSV_HEADER}\n0,0,0,0,100,100,100\n"),
        )
        .unwrap();
        assert!(matches!(
            load_calibration_csv(&path, &geo),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_file_reports_the_path() {
        let geo = default_geometry();
        let err = load_calibration_csv(Path::new("/nonexistent/data.csv"), &geo).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn trajectory_round_trip_preserves_records() {
        let dir = tempdir();
        let geo = default_geometry();
        let records = composite_sweep(&model(), &geo, &SweepSpec::default()).unwrap();
        let path = dir.path().join("traj.csv");
        save_trajectory_csv(&path, &records).unwrap();
        let (header, loaded) = load_trajectory_csv(&path, &geo).unwrap();
        assert_eq!(header, DatasetHeader::identity());
        assert_eq!(records.len(), loaded.len());
        for (a, b) in records.iter().zip(&loaded) {
            assert_eq!(a.time_s, b.time_s);
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.observed_position, b.observed_position);
            assert_eq!(a.observed_lengths, b.observed_lengths);
            assert_eq!(a.speed_rpm, b.speed_rpm);
            assert!(
                (a.observed_quaternion.quaternion() - b.observed_quaternion.quaternion()).norm()
                    < 1e-12
            );
        }

        // byte-canonical like the calibration format
        let path2 = dir.path().join("traj2.csv");
        save_trajectory_csv(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    fn minimal_traj(body: &str) -> String {
        format!(
            "# schema_version = 1\n{}\n{}",
            TRAJECTORY_CSV_HEADER, body
        )
    }

    #[test]
    fn trajectory_loader_validates() {
        let dir = tempdir();
        let geo = default_geometry();
        let path = dir.path().join("t.csv");

        // non-monotone time, first offending row named
        std::fs::write(
            &path,
            minimal_traj(
                "0.0,0,0,0,0,0,0,100,0,0,0,1,,,,,3\n0.0,0,0,0,0,0,0,100,0,0,0,1,,,,,3\n",
            ),
        )
        .unwrap();
        let err = load_trajectory_csv(&path, &geo).unwrap_err();
        match err {
            // line 1: preamble, line 2: header, line 3: first row, line 4: offender
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("strictly increasing"), "{message}");
            }
            other => panic!("{other:?}"),
        }

        // varying speed rejected
        std::fs::write(
            &path,
            minimal_traj(
                "0.0,0,0,0,0,0,0,100,0,0,0,1,,,,,3\n0.1,0,0,0,0,0,0,100,0,0,0,1,,,,,4\n",
            ),
        )
        .unwrap();
        assert!(load_trajectory_csv(&path, &geo)
            .unwrap_err()
            .to_string()
            .contains("per-sweep constant"));

        // partial length fields rejected
        std::fs::write(
            &path,
            minimal_traj("0.0,0,0,0,0,0,0,100,0,0,0,1,100,,,,3\n"),
        )
        .unwrap();
        assert!(load_trajectory_csv(&path, &geo)
            .unwrap_err()
            .to_string()
            .contains("all present or all empty"));

        // corrupt quaternion rejected
        std::fs::write(
            &path,
            minimal_traj("0.0,0,0,0,0,0,0,100,0,0,0,2,,,,,3\n"),
        )
        .unwrap();
        assert!(load_trajectory_csv(&path, &geo)
            .unwrap_err()
            .to_string()
            .contains("quaternion"));

        // missing schema line
        std::fs::write(&path, format!("{TRAJECTORY_CSV_HEADER}\n")).unwrap();
        assert!(load_trajectory_csv(&path, &geo)
            .unwrap_err()
            .to_string()
            .contains("schema_version"));

        // unsupported schema version
        std::fs::write(
            &path,
            format!("# schema_version = 2\n{TRAJECTORY_CSV_HEADER}\n"),
        )
        .unwrap();
        assert!(matches!(
            load_trajectory_csv(&path, &geo),
            Err(Error::UnsupportedSchema(2))
        ));
    }

    #[test]
    fn identity_alignment_passes_positions_through() {
        let dir = tempdir();
        let geo = default_geometry();
        let path = dir.path().join("t.csv");
        std::fs::write(
            &path,
            minimal_traj("0.0,10,20,30,40,1.5,-2.5,99.0,0,0,0,1,,,,,3\n"),
        )
        .unwrap();
        let (_, records) = load_trajectory_csv(&path, &geo).unwrap();
        assert_eq!(records[0].observed_position, Vector3::new(1.5, -2.5, 99.0));
    }

    #[test]
    fn quarter_turn_alignment_rotates_observations() {
        let dir = tempdir();
        let geo = default_geometry();
        let path = dir.path().join("t.csv");
        // 90 degrees about z: (1, 0, 0) -> (0, 1, 0)
        let text = format!(
            "# schema_version = 1\n# base_alignment = 0,-1,0,0,1,0,0,0,0,0,1,0,0,0,0,1\n\
             {TRAJECTORY_CSV_HEADER}\n0.0,0,0,0,0,1,0,0,0,0,0,1,,,,,3\n"
        );
        std::fs::write(&path, text).unwrap();
        let (header, records) = load_trajectory_csv(&path, &geo).unwrap();
        assert!((records[0].observed_position - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        // the quaternion picks up the same rotation
        let q = records[0].observed_quaternion;
        let rotated = q * Vector3::x();
        assert!((rotated - Vector3::y()).norm() < 1e-12);
        assert_eq!(header.schema_version, 1);
    }

    #[test]
    fn corner_lengths_pure_translation() {
        let geo = default_geometry();
        let mut m = Matrix4::identity();
        m[(2, 3)] = 123.0;
        let pose = HomogeneousTransform::from_matrix(m).unwrap();
        let l = corner_lengths_from_pose(&pose, &geo).unwrap();
        for v in l.as_array() {
            assert_eq!(v, 123.0);
        }
    }

    #[test]
    fn corner_lengths_tilt_splits_pairs_symmetrically() {
        let geo = default_geometry();
        // small tilt about x on top of a 100 mm lift
        let tilt = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), 0.02);
        let mut m = tilt.to_homogeneous();
        m[(2, 3)] = 100.0;
        let pose = HomogeneousTransform::from_matrix(m).unwrap();
        let l = corner_lengths_from_pose(&pose, &geo).unwrap().as_array();
        // A,B (y = -m/2) shorten; C,D (y = +m/2) lengthen; diagonal sums match
        assert!(l[0] < 100.0 && l[1] < 100.0);
        assert!(l[2] > 100.0 && l[3] > 100.0);
        assert!(((l[0] + l[2]) - (l[1] + l[3])).abs() < 1e-12);
    }

    #[test]
    fn corner_lengths_quarter_circle_match_the_rigid_body_chords() {
        // For the quarter-circle pose (kappa = 0.01, phi = 0, alpha = pi/2)
        // each corner chord is (1/kappa - x) * 2 sin(alpha/2), x the corner
        // coordinate along the bend axis. Expected values computed
        // independently at 40-digit precision:
        //   A, D (x = -21.84): 172.30778043953790 mm
        //   B, C (x = +21.84): 110.53493203508111 mm
        // Note these rigid-body chords deliberately differ from
        // lengths_from_arc, which inverts the four-chord arc approximation
        // rather than the corner geometry.
        let geo = default_geometry();
        let cfg = ArcConfig::from_kappa_phi_s(0.01, 0.0, FRAC_PI_2 / 0.01, &geo).unwrap();
        let pose = pose_from_arc(&cfg);
        let l = corner_lengths_from_pose(&pose.transform, &geo)
            .unwrap()
            .as_array();
        assert!((l[0] - 172.30778043953790).abs() < 1e-9, "A: {}", l[0]);
        assert!((l[1] - 110.53493203508111).abs() < 1e-9, "B: {}", l[1]);
        assert!((l[2] - 110.53493203508111).abs() < 1e-9, "C: {}", l[2]);
        assert!((l[3] - 172.30778043953790).abs() < 1e-9, "D: {}", l[3]);
        // Eq. 1's diagonal identity still holds exactly for these chords
        assert!(((l[0] + l[2]) - (l[1] + l[3])).abs() < 1e-9);
    }

    #[test]
    fn config_parsing_defaults_and_errors() {
        let dir = tempdir();
        let path = dir.path().join("geo.cfg");

        std::fs::write(
            &path,
            "# stock platform\nm_mm = 43.68\nrest_length_mm = 100.0\nhandedness = RLRL\n",
        )
        .unwrap();
        let cfg = load_platform_config(&path).unwrap();
        assert_eq!(cfg.geometry.m_mm, 43.68);
        assert!((cfg.geometry.d_mm - 61.77284840445679).abs() < 1e-12);
        assert_eq!(cfg.hsa.rest_length_mm, 100.0);
        assert_eq!(cfg.hsa.alpha0, 0.124);

        // explicit d wins over the sqrt(2) default
        std::fs::write(&path, "rest_length_mm = 90\nd_mm = 60.0\n").unwrap();
        assert_eq!(load_platform_config(&path).unwrap().geometry.d_mm, 60.0);

        // rest length is mandatory
        std::fs::write(&path, "m_mm = 43.68\n").unwrap();
        assert!(load_platform_config(&path)
            .unwrap_err()
            .to_string()
            .contains("rest_length_mm"));

        // unknown keys and duplicates are named with their line
        std::fs::write(&path, "rest_length_mm = 90\nbogus_key = 1\n").unwrap();
        assert!(matches!(
            load_platform_config(&path),
            Err(Error::Parse { line: 2, .. })
        ));
        std::fs::write(&path, "rest_length_mm = 90\nrest_length_mm = 91\n").unwrap();
        assert!(load_platform_config(&path)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));

        // invalid handedness pattern caught by geometry validation
        std::fs::write(&path, "rest_length_mm = 90\nhandedness = RRLL\n").unwrap();
        assert!(load_platform_config(&path).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let dir = tempdir();
        let path = dir.path().join("model.json");
        let m = model();
        save_model(&path, &m).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(m, loaded);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        assert!(text.contains("\"beta0\""));
    }

    #[test]
    fn eval_csv_has_matching_columns() {
        let dir = tempdir();
        let geo = default_geometry();
        let m = model();
        let records = composite_sweep(&m, &geo, &SweepSpec { steps_per_phase: 3, ..SweepSpec::default() }).unwrap();
        let path = dir.path().join("plot.csv");
        write_eval_csv(&path, &records, &m, &geo).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        assert_eq!(header_cols, 30);
        for line in lines {
            assert_eq!(line.split(',').count(), header_cols, "{line}");
        }
        // 15 data rows + header
        assert_eq!(text.lines().count(), 16);
    }
}
