//! Command-line front end for the 2x2 HSA platform kinematics toolkit.
//!
//! Machine-readable artifacts (CSV/JSON) go to the paths given by `--out`;
//! human-readable summaries go to standard output. All commands are
//! deterministic given identical inputs (and the seed, for `gen`), and exit
//! zero only when the requested artifact was fully written.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hsa_pcc::calibration::{fit, generate_synthetic_dataset, grid_levels};
use hsa_pcc::coupling::{CouplingModel, MotorAngles};
use hsa_pcc::error::{Error, Result};
use hsa_pcc::io::{
    load_calibration_csv, load_model, load_platform_config, load_trajectory_csv,
    save_calibration_csv, save_json, save_model, write_atomic, write_eval_csv,
};
use hsa_pcc::metrics::{build_eval_report, error_vs_speed, TrajectoryRecord};
use hsa_pcc::pose::{forward_kinematics, POSE_CSV_HEADER};

#[derive(Parser)]
#[command(
    name = "hsa-pcc",
    version,
    about = "Kinematics toolkit for a 2x2 handed-shearing-auxetic platform",
    long_about = "Maps servo angles through a calibrated coupling model into actuator \
                  lengths, constant-curvature arc parameters, and end-platform pose. \
                  Provides calibration fitting, workspace sampling, synthetic dataset \
                  generation, and trajectory evaluation."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the coupling model from a calibration CSV
    Fit {
        /// Calibration dataset (theta_a_deg,...,l_d_mm rows)
        #[arg(long)]
        dataset: PathBuf,
        /// Platform geometry config (key = value)
        #[arg(long)]
        geometry: PathBuf,
        /// Output path for the fitted model JSON
        #[arg(long)]
        out: PathBuf,
        /// Output path for the fit report JSON (default: <out>.report.json)
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Forward kinematics for one set of motor angles
    Fk {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Four angles in degrees: A,B,C,D
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Sweep the full angle grid and write one pose row per grid point
    Workspace {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Grid step in degrees; must divide the servo range
        #[arg(long = "step-deg")]
        step_deg: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic calibration dataset from a model
    Gen {
        #[arg(long)]
        geometry: PathBuf,
        /// Generator model JSON; defaults to the uncoupled single-actuator
        /// model from the geometry config
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "step-deg", default_value_t = 30.0)]
        step_deg: f64,
        /// Gaussian noise on lengths, mm
        #[arg(long = "noise-sigma", default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trajectory against the model and write a metrics report
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Trajectory CSV with observed positions/quaternions
        #[arg(long)]
        trajectory: PathBuf,
        /// Output path for the JSON report
        #[arg(long)]
        out: PathBuf,
        /// Optional plot-ready per-record CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate every trajectory in a directory, grouped by declared speed
    SpeedEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Directory of trajectory CSV files
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit {
            dataset,
            geometry,
            out,
            report,
        } => cmd_fit(&dataset, &geometry, &out, report.as_deref()),
        Command::Fk {
            model,
            geometry,
            theta,
            format,
        } => cmd_fk(&model, &geometry, &theta, format),
        Command::Workspace {
            model,
            geometry,
            step_deg,
            out,
        } => cmd_workspace(&model, &geometry, step_deg, &out),
        Command::Gen {
            geometry,
            model,
            step_deg,
            noise_sigma,
            seed,
            out,
        } => cmd_gen(&geometry, model.as_deref(), step_deg, noise_sigma, seed, &out),
        Command::Eval {
            model,
            geometry,
            trajectory,
            out,
            csv,
        } => cmd_eval(&model, &geometry, &trajectory, &out, csv.as_deref()),
        Command::SpeedEval {
            model,
            geometry,
            dir,
            out,
        } => cmd_speed_eval(&model, &geometry, &dir, &out),
    }
}

fn cmd_fit(dataset: &Path, geometry: &Path, out: &Path, report: Option<&Path>) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let data = load_calibration_csv(dataset, &config.geometry)?;
    let (model, fit_report) = fit(&data)?;

    let report_path = report
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("report.json"));
    save_model(out, &model)?;
    save_json(&report_path, &fit_report)?;

    println!("records = {}", data.len());
    println!("residual_rms_mm = {}", fit_report.residual_rms_mm);
    println!(
        "beta0_deviation_frobenius = {}",
        fit_report.beta0_deviation.norm()
    );
    println!("wrote {}", out.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

fn cmd_fk(model: &Path, geometry: &Path, theta: &[f64], format: OutputFormat) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let model = load_model(model)?;
    let theta: [f64; 4] = theta
        .try_into()
        .map_err(|_| Error::InvalidArgument("--theta needs exactly 4 values".to_string()))?;
    let fk = forward_kinematics(
        &MotorAngles::checked(theta, &config.geometry)?,
        &model,
        &config.geometry,
    )?;

    match format {
        OutputFormat::Csv => {
            let l = fk.lengths.as_array();
            println!(
                "l_a_mm,l_b_mm,l_c_mm,l_d_mm,kappa_per_mm,phi_rad,s_mm,l_s_mm,\
                 consistency_residual_mm,{POSE_CSV_HEADER}"
            );
            println!(
                "{},{},{},{},{},{},{},{},{},{}",
                l[0],
                l[1],
                l[2],
                l[3],
                fk.arc.kappa,
                fk.arc.phi,
                fk.arc.s,
                fk.arc.l_s,
                fk.consistency_residual_mm,
                fk.pose.csv_row()
            );
        }
        OutputFormat::Json => {
            let value = serde_json::json!({
                "lengths_mm": fk.lengths.as_array(),
                "arc": {
                    "kappa_per_mm": fk.arc.kappa,
                    "phi_rad": fk.arc.phi,
                    "s_mm": fk.arc.s,
                    "l_s_mm": fk.arc.l_s,
                },
                "consistency_residual_mm": fk.consistency_residual_mm,
                "pose": fk.pose,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&value)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
            );
        }
    }
    Ok(())
}

fn cmd_workspace(model: &Path, geometry: &Path, step_deg: f64, out: &Path) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let model = load_model(model)?;
    let levels = grid_levels(&config.geometry, step_deg)?;

    let mut body = String::new();
    body.push_str("theta_a_deg,theta_b_deg,theta_c_deg,theta_d_deg,");
    body.push_str(POSE_CSV_HEADER);
    body.push('\n');
    let mut rows = 0usize;
    for &a in &levels {
        for &b in &levels {
            for &c in &levels {
                for &d in &levels {
                    let theta = MotorAngles::new([a, b, c, d]);
                    let fk = forward_kinematics(&theta, &model, &config.geometry)?;
                    body.push_str(&format!("{a},{b},{c},{d},{}\n", fk.pose.csv_row()));
                    rows += 1;
                }
            }
        }
    }
    write_atomic(out, &body)?;
    println!("wrote {} pose rows to {}", rows, out.display());
    Ok(())
}

fn cmd_gen(
    geometry: &Path,
    model: Option<&Path>,
    step_deg: f64,
    noise_sigma: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let model = match model {
        Some(path) => load_model(path)?,
        None => CouplingModel::from_single_hsa(&config.hsa),
    };
    let dataset =
        generate_synthetic_dataset(&model, &config.geometry, step_deg, noise_sigma, seed)?;
    save_calibration_csv(out, &dataset)?;
    println!(
        "wrote {} records to {} (step {step_deg} deg, sigma {noise_sigma} mm, seed {seed})",
        dataset.len(),
        out.display()
    );
    Ok(())
}

fn cmd_eval(
    model: &Path,
    geometry: &Path,
    trajectory: &Path,
    out: &Path,
    csv: Option<&Path>,
) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let model = load_model(model)?;
    let (_, records) = load_trajectory_csv(trajectory, &config.geometry)?;
    let report = build_eval_report(&records, &model, &config.geometry)?;
    save_json(out, &report)?;
    if let Some(csv_path) = csv {
        write_eval_csv(csv_path, &records, &model, &config.geometry)?;
        println!("wrote {}", csv_path.display());
    }

    println!("records = {}", report.n_records);
    match &report.length {
        Some(l) => println!(
            "length_error_mm: mean = {}, std = {} ({} model)",
            l.pooled.mean, l.pooled.std, l.model
        ),
        None => println!("length_error_mm: observed lengths absent; skipped"),
    }
    println!(
        "position_distance_mm: mean = {}, std = {}",
        report.position_distance_mm.mean, report.position_distance_mm.std
    );
    println!(
        "alpha_error_deg: mean = {}, std = {}",
        report.orientation.alpha_deg.mean, report.orientation.alpha_deg.std
    );
    println!(
        "phi_error_deg: mean = {}, std = {} ({} records skipped on the z-axis)",
        report.orientation.phi_deg.mean,
        report.orientation.phi_deg.std,
        report.orientation.phi_records_skipped
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_speed_eval(model: &Path, geometry: &Path, dir: &Path, out: &Path) -> Result<()> {
    let config = load_platform_config(geometry)?;
    let model = load_model(model)?;

    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            context: format!("reading directory {}", dir.display()),
            source: e,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no trajectory CSV files in {}",
            dir.display()
        )));
    }

    let mut trajectories: Vec<Vec<TrajectoryRecord>> = Vec::with_capacity(paths.len());
    for path in &paths {
        let (_, records) = load_trajectory_csv(path, &config.geometry)?;
        trajectories.push(records);
    }
    let eval = error_vs_speed(&trajectories, &model, &config.geometry)?;
    save_json(out, &eval)?;

    println!("speed_rpm,n_records,mean_mm,std_mm,min_mm,max_mm");
    for bucket in &eval.buckets {
        let s = &bucket.position_distance_mm;
        println!(
            "{},{},{},{},{},{}",
            bucket.speed_rpm, bucket.n_records, s.mean, s.std, s.min, s.max
        );
    }
    if eval.skipped_empty_trajectories > 0 {
        println!(
            "skipped {} empty trajectories",
            eval.skipped_empty_trajectories
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
