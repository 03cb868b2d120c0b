//! Fitting the coupled length model from measured data.
//!
//! Each actuator's length is regressed against all four servo angles plus an
//! intercept (ordinary least squares, rank-revealing SVD). The raw 4x4 gain
//! estimate is then projected onto circulant matrices by averaging its
//! wrapped diagonals, and the four intercepts are averaged, leaving the
//! model with one gain per wrapped diagonal plus a single rest height.

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coupling::{ActuatorLengths, CouplingModel, MotorAngles};
use crate::error::{Error, Result};
use crate::geometry::PlatformGeometry;

/// Relative singular-value cutoff below which the design matrix is treated
/// as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// One calibration observation: commanded angles and the measured chord
/// lengths they produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub theta: MotorAngles,
    pub measured_lengths: ActuatorLengths,
}

/// An ordered, non-empty set of calibration records.
///
/// A well-posed fit additionally needs at least five records with affinely
/// independent angle vectors (four slopes plus an intercept per row); that
/// is checked at fit time from the design matrix rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset {
    records: Vec<CalibrationRecord>,
}

impl CalibrationDataset {
    pub fn new(records: Vec<CalibrationRecord>) -> Result<CalibrationDataset> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(CalibrationDataset { records })
    }

    pub fn records(&self) -> &[CalibrationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Everything the fit produced, including the parts the final model drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FitReportWire", into = "FitReportWire")]
pub struct FitReport {
    /// Raw least-squares gain estimate, mm/degree.
    pub beta0_regression: Matrix4<f64>,
    /// Circulant projection of the estimate; what the model keeps.
    pub beta0_symmetric: Matrix4<f64>,
    /// Remainder: `regression - symmetric`.
    pub beta0_deviation: Matrix4<f64>,
    /// Per-actuator intercepts, mm.
    pub beta1_raw: Vector4<f64>,
    /// Uniform intercept (components all equal to the mean), mm.
    pub beta1_averaged: Vector4<f64>,
    /// Root-mean-square length residual of the final model over the
    /// dataset, pooled across records and actuators, mm.
    pub residual_rms_mm: f64,
}

#[derive(Serialize, Deserialize)]
struct FitReportWire {
    beta0_regression: Vec<f64>,
    beta0_symmetric: Vec<f64>,
    beta0_deviation: Vec<f64>,
    beta1_raw: Vec<f64>,
    beta1_averaged: Vec<f64>,
    residual_rms_mm: f64,
}

fn row_major(m: &Matrix4<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn matrix_from_row_major(name: &str, v: &[f64]) -> Result<Matrix4<f64>> {
    if v.len() != 16 {
        return Err(Error::InvalidArgument(format!(
            "{name} must hold 16 row-major numbers, got {}",
            v.len()
        )));
    }
    Ok(Matrix4::from_row_slice(v))
}

fn vector4(name: &str, v: &[f64]) -> Result<Vector4<f64>> {
    if v.len() != 4 {
        return Err(Error::InvalidArgument(format!(
            "{name} must hold 4 numbers, got {}",
            v.len()
        )));
    }
    Ok(Vector4::from_column_slice(v))
}

impl From<FitReport> for FitReportWire {
    fn from(r: FitReport) -> FitReportWire {
        FitReportWire {
            beta0_regression: row_major(&r.beta0_regression),
            beta0_symmetric: row_major(&r.beta0_symmetric),
            beta0_deviation: row_major(&r.beta0_deviation),
            beta1_raw: r.beta1_raw.iter().copied().collect(),
            beta1_averaged: r.beta1_averaged.iter().copied().collect(),
            residual_rms_mm: r.residual_rms_mm,
        }
    }
}

impl TryFrom<FitReportWire> for FitReport {
    type Error = Error;

    fn try_from(w: FitReportWire) -> Result<FitReport> {
        Ok(FitReport {
            beta0_regression: matrix_from_row_major("beta0_regression", &w.beta0_regression)?,
            beta0_symmetric: matrix_from_row_major("beta0_symmetric", &w.beta0_symmetric)?,
            beta0_deviation: matrix_from_row_major("beta0_deviation", &w.beta0_deviation)?,
            beta1_raw: vector4("beta1_raw", &w.beta1_raw)?,
            beta1_averaged: vector4("beta1_averaged", &w.beta1_averaged)?,
            residual_rms_mm: w.residual_rms_mm,
        })
    }
}

/// Ordinary least squares of every actuator's measured length against
/// `(theta_A, theta_B, theta_C, theta_D, 1)`.
///
/// Returns the raw gain matrix and intercept vector. A rank-deficient
/// design matrix (fewer than five affinely independent angle vectors) is
/// reported as an ill-posed dataset, naming the deficient directions.
pub fn fit_regression(dataset: &CalibrationDataset) -> Result<(Matrix4<f64>, Vector4<f64>)> {
    let n = dataset.len();
    if n < 5 {
        return Err(Error::IllPosedDataset(format!(
            "need at least 5 records for 4 slopes + intercept per row, got {n}"
        )));
    }

    let mut design = DMatrix::zeros(n, 5);
    let mut observed = DMatrix::zeros(n, 4);
    for (r, record) in dataset.records().iter().enumerate() {
        let t = record.theta.as_array();
        for c in 0..4 {
            design[(r, c)] = t[c];
        }
        design[(r, 4)] = 1.0;
        let l = record.measured_lengths.as_array();
        for c in 0..4 {
            observed[(r, c)] = l[c];
        }
    }

    let svd = design.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = sigma_max * RANK_TOL;
    let deficient: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= cutoff)
        .collect();
    if !deficient.is_empty() {
        let v_t = svd.v_t.as_ref().expect("v requested");
        let names = ["theta_a", "theta_b", "theta_c", "theta_d", "1"];
        let mut directions = Vec::new();
        for &k in &deficient {
            let combo: Vec<String> = (0..5)
                .filter(|&j| v_t[(k, j)].abs() > 1e-6)
                .map(|j| format!("{:+.3}*{}", v_t[(k, j)], names[j]))
                .collect();
            directions.push(format!(
                "sigma = {:.3e} along {}",
                svd.singular_values[k],
                combo.join(" ")
            ));
        }
        return Err(Error::IllPosedDataset(format!(
            "design matrix is rank deficient; unidentifiable directions: {}",
            directions.join("; ")
        )));
    }

    let solution = svd
        .solve(&observed, cutoff)
        .map_err(|e| Error::IllPosedDataset(e.to_string()))?;

    // solution is 5x4: column j holds actuator j's slopes and intercept
    let mut beta0 = Matrix4::zeros();
    let mut beta1 = Vector4::zeros();
    for j in 0..4 {
        for k in 0..4 {
            beta0[(j, k)] = solution[(k, j)];
        }
        beta1[j] = solution[(4, j)];
    }
    Ok((beta0, beta1))
}

/// Projects a gain matrix onto circulants by averaging its wrapped
/// diagonals: `c_k = mean_i m[i][(i+k) mod 4]`, `symmetric[i][j] =
/// c[(j-i) mod 4]`. Returns `(symmetric, deviation)` with
/// `symmetric + deviation = m` exactly.
///
/// This is the least-squares projection onto circulant matrices under the
/// Frobenius norm, and it is idempotent.
pub fn symmetrize_circulant(beta0: &Matrix4<f64>) -> (Matrix4<f64>, Matrix4<f64>) {
    let mut diag_means = [0.0f64; 4];
    for (k, mean) in diag_means.iter_mut().enumerate() {
        let mut sum = 0.0;
        for i in 0..4 {
            sum += beta0[(i, (i + k) % 4)];
        }
        *mean = sum / 4.0;
    }
    let mut symmetric = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            symmetric[(i, j)] = diag_means[(j + 4 - i) % 4];
        }
    }
    (symmetric, beta0 - symmetric)
}

/// Replaces every intercept with the arithmetic mean of the four.
pub fn average_intercept(beta1: &Vector4<f64>) -> Vector4<f64> {
    Vector4::repeat(beta1.mean())
}

/// Full calibration: regression, circulant symmetrization, intercept
/// averaging. The returned model uses the symmetrized gains and uniform
/// intercept; the report keeps every intermediate plus the pooled RMS
/// residual of the final model over the dataset.
pub fn fit(dataset: &CalibrationDataset) -> Result<(CouplingModel, FitReport)> {
    let (beta0_regression, beta1_raw) = fit_regression(dataset)?;
    let (beta0_symmetric, beta0_deviation) = symmetrize_circulant(&beta0_regression);
    let beta1_averaged = average_intercept(&beta1_raw);

    let mut sum_sq = 0.0;
    for record in dataset.records() {
        let predicted = beta0_symmetric * record.theta.vector() + beta1_averaged;
        let residual = predicted - record.measured_lengths.vector();
        sum_sq += residual.norm_squared();
    }
    let residual_rms_mm = (sum_sq / (4.0 * dataset.len() as f64)).sqrt();

    let model = CouplingModel::new(beta0_symmetric, beta1_averaged, true)?;
    Ok((
        model,
        FitReport {
            beta0_regression,
            beta0_symmetric,
            beta0_deviation,
            beta1_raw,
            beta1_averaged,
            residual_rms_mm,
        },
    ))
}

/// Synthesizes a full-factorial calibration dataset from a known model:
/// every combination of angles `theta_min, theta_min + step, ..., theta_max`
/// on all four actuators, in lexicographic (A, B, C, D) order, with optional
/// i.i.d. Gaussian noise on the lengths only. Deterministic for a fixed
/// seed.
pub fn generate_synthetic_dataset(
    model: &CouplingModel,
    geo: &PlatformGeometry,
    grid_step_deg: f64,
    noise_sigma_mm: f64,
    seed: u64,
) -> Result<CalibrationDataset> {
    let levels = grid_levels(geo, grid_step_deg)?;
    if !(noise_sigma_mm >= 0.0 && noise_sigma_mm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be non-negative, got {noise_sigma_mm}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = if noise_sigma_mm > 0.0 {
        Some(Normal::new(0.0, noise_sigma_mm).expect("finite sigma"))
    } else {
        None
    };

    let mut records = Vec::with_capacity(levels.len().pow(4));
    for &a in &levels {
        for &b in &levels {
            for &c in &levels {
                for &d in &levels {
                    let theta = MotorAngles::new([a, b, c, d]);
                    let mut l = (model.beta0 * theta.vector() + model.beta1)
                        .iter()
                        .copied()
                        .collect::<Vec<f64>>();
                    if let Some(n) = &normal {
                        for v in &mut l {
                            *v += n.sample(&mut rng);
                        }
                    }
                    records.push(CalibrationRecord {
                        theta,
                        measured_lengths: ActuatorLengths::new([l[0], l[1], l[2], l[3]])?,
                    });
                }
            }
        }
    }
    CalibrationDataset::new(records)
}

/// Angle levels for a grid step, requiring the step to divide the range.
pub fn grid_levels(geo: &PlatformGeometry, grid_step_deg: f64) -> Result<Vec<f64>> {
    let range = geo.theta_range_deg();
    if !(grid_step_deg > 0.0 && grid_step_deg.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {grid_step_deg}"
        )));
    }
    let count = (range / grid_step_deg).round();
    if count < 1.0 || (count * grid_step_deg - range).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step_deg}° must divide the servo range {range}°"
        )));
    }
    Ok((0..=count as usize)
        .map(|i| geo.theta_min_deg + i as f64 * grid_step_deg)
        .collect())
}
