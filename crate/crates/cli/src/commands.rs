use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use thermid::dataset::{load_csv, load_segments, write_csv, write_segments, TimeSeriesDataset};
use thermid::estimate::{
    build_estimator, estimate_power, rmse_stats, rolling_rmse, simulate_temperature, write_estimation_csv,
    write_summary, EstimationReport, RollingRmse,
};
use thermid::identify::{
    default_epsilon_grid, fit_constrained, fit_least_squares, load_model, save_model, ConstraintSpec, FitReport,
    IdentOptions, LinearThermalModel,
};
use thermid::synth::{
    converter_schedule, generate_excitation, load_network, save_network, simulate_with_noise, ExcitationStep,
    ThermalNetwork,
};

use crate::config::PipelineConfig;
use crate::CliError;

type Dataset = TimeSeriesDataset<f64>;

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub samples: usize,
    pub segments: usize,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct IdentifyOutcome {
    pub fit: FitReport<f64>,
    pub epsilon: f64,
    pub transitions: usize,
    /// Relative Frobenius distance to the ground-truth network discretized
    /// at the model's sample period.
    pub recovery_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub dt: f64,
    pub temperature: EstimationReport<f64>,
    pub temperature_time: Vec<f64>,
    pub power: EstimationReport<f64>,
    pub power_time: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub estimate: EstimateOutcome,
    pub rolling_temperature: RollingRmse<f64>,
    pub rolling_power: RollingRmse<f64>,
}

/// Simulates the configured oracle network and writes `dataset.csv`,
/// `segments.csv`, `truth_model.toml` and `network.toml` (names from
/// `[paths]`).
pub fn cmd_synth(config: &PipelineConfig) -> Result<SynthOutcome, CliError> {
    let s = &config.synth;
    let (net, schedule) = match &s.network {
        None => {
            let net = ThermalNetwork::<f64>::converter();
            let rest = rest_seconds(config, &net)?;
            (net, converter_schedule(s.pulse_seconds, rest))
        }
        Some(path) => {
            let net = load_network::<f64>(path)?;
            let rest = rest_seconds(config, &net)?;
            let schedule = (0..net.n_sources())
                .map(|j| ExcitationStep {
                    label: net.power_channels()[j].clone(),
                    channels: vec![j],
                    amplitude: s.amplitude,
                    duration: s.pulse_seconds,
                    rest,
                })
                .collect::<Vec<_>>();
            (net, schedule)
        }
    };
    let truth = net.discretize(s.dt)?;
    let excitation = generate_excitation(&schedule, net.n_sources(), s.dt)?;
    let relative = simulate_with_noise(
        &truth,
        &excitation.power,
        &excitation.segments,
        &DVector::zeros(net.n_nodes()),
        s.noise_std,
        s.seed,
    )?;
    let data = relative.baseline_ambient(-s.ambient)?;

    let files = vec![
        config.resolve(&config.paths.data),
        config.resolve(&config.paths.segments),
        config.paths.output_dir.join("truth_model.toml"),
        config.resolve(&config.paths.network),
    ];
    write_csv(&files[0], &data)?;
    write_segments(&files[1], data.segments())?;
    save_model(&files[2], &truth)?;
    save_network(&files[3], &net)?;
    info!(
        "synthesized {} samples in {} segments (dt = {} s, noise {} K)",
        data.len(),
        data.segments().len(),
        s.dt,
        s.noise_std
    );
    Ok(SynthOutcome {
        samples: data.len(),
        segments: data.segments().len(),
        files,
    })
}

fn rest_seconds(config: &PipelineConfig, net: &ThermalNetwork<f64>) -> Result<f64, CliError> {
    match config.synth.rest_seconds {
        Some(rest) => Ok(rest),
        None => Ok(5.0 * net.time_constants()?[0]),
    }
}

/// Loads the dataset and applies ambient baseline, oversampling, filtering
/// and the per-segment split.
pub fn prepare(config: &PipelineConfig) -> Result<(Dataset, Dataset), CliError> {
    let p = &config.preprocess;
    let mut data = load_csv::<f64>(config.resolve(&config.paths.data), None)?;
    let segments_path = config.resolve(&config.paths.segments);
    if segments_path.exists() {
        data = data.with_segments(load_segments(&segments_path)?)?;
    } else {
        warn!(
            "{} not found; treating the series as one segment",
            segments_path.display()
        );
    }
    data = data.baseline_ambient(p.ambient)?;
    if p.oversample > 1 {
        data = data.resample_hold(p.oversample)?;
    }
    if p.window_seconds > 0.0 {
        data = data.moving_average(p.window_seconds)?;
    }
    Ok(data.split_per_segment(p.train_fraction)?)
}

/// Fits the model on the training split and writes it with a text report.
pub fn cmd_identify(config: &PipelineConfig) -> Result<IdentifyOutcome, CliError> {
    let c = &config.identify;
    let (train, _) = prepare(config)?;
    let reg = train.build_regression()?;
    let epsilon = if c.tune_epsilon {
        let scan = thermid::identify::tune_epsilon(&reg, &default_epsilon_grid(&reg), c.folds)?;
        info!("cross-validation picked epsilon = {:e}", scan.epsilon);
        scan.epsilon
    } else {
        c.epsilon
    };
    let fit = match &c.constraints {
        None => fit_least_squares(&reg, epsilon)?,
        Some(path) => {
            let path = config.resolve(path);
            let text =
                std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let spec = ConstraintSpec::from_toml_str(&text, reg.n_temps, reg.n_powers)?;
            let options = IdentOptions {
                epsilon,
                max_iterations: c.max_iterations,
                step_tolerance: c.step_tolerance,
                objective_tolerance: c.objective_tolerance,
            };
            fit_constrained(&reg, &spec, &options)?
        }
    };
    let network_path = config.resolve(&config.paths.network);
    let recovery_error = if network_path.exists() {
        let truth = load_network::<f64>(&network_path)?.discretize(fit.model.dt())?;
        Some(fit.model.relative_error(&truth))
    } else {
        None
    };
    save_model(config.resolve(&config.paths.model), &fit.model)?;
    let outcome = IdentifyOutcome {
        fit,
        epsilon,
        transitions: reg.n_transitions(),
        recovery_error,
    };
    let report_path = config.paths.output_dir.join("fit_report.txt");
    std::fs::write(&report_path, fit_report_text(&outcome)).map_err(|e| thermid::Error::Io {
        path: report_path.clone(),
        source: e,
    })?;
    info!(
        "identified model from {} transitions, objective {:e}",
        outcome.transitions, outcome.fit.final_objective
    );
    Ok(outcome)
}

fn fit_report_text(outcome: &IdentifyOutcome) -> String {
    let fit = &outcome.fit;
    let mut out = String::new();
    let _ = writeln!(out, "transitions = {}", outcome.transitions);
    let _ = writeln!(out, "epsilon = {:e}", outcome.epsilon);
    let _ = writeln!(out, "dt = {:e}", fit.model.dt());
    let _ = writeln!(out, "final_objective = {:e}", fit.final_objective);
    let _ = writeln!(out, "iterations_used = {}", fit.iterations_used);
    let _ = writeln!(out, "converged = {}", fit.converged);
    let _ = writeln!(out, "constraint_violation = {:e}", fit.constraint_violation);
    if let Some(met) = fit.rank_condition_met {
        let _ = writeln!(out, "rank_condition_met = {met}");
    }
    let sv: Vec<String> = fit.singular_values_b.iter().map(|s| format!("{s:e}")).collect();
    let _ = writeln!(out, "singular_values_b = [{}]", sv.join(", "));
    if let Some(err) = outcome.recovery_error {
        let _ = writeln!(out, "recovery_error = {err:e}");
    }
    out
}

/// Open-loop evaluation on the test split, one calibration step at a time:
/// temperatures simulated from the measured powers, and powers estimated
/// from the measured temperatures.
pub fn cmd_estimate(config: &PipelineConfig) -> Result<EstimateOutcome, CliError> {
    let model: LinearThermalModel<f64> = load_model(config.resolve(&config.paths.model))?;
    let (_, test) = prepare(config)?;
    let outcome = evaluate(&model, &test)?;
    let out = &config.paths.output_dir;
    write_estimation_csv(
        out.join("temperature_estimation.csv"),
        &outcome.temperature_time,
        test.temp_channels(),
        &outcome.temperature,
    )?;
    write_estimation_csv(
        out.join("power_estimation.csv"),
        &outcome.power_time,
        test.power_channels(),
        &outcome.power,
    )?;
    write_summary(
        out.join("temperature_summary.toml"),
        test.temp_channels(),
        &outcome.temperature,
    )?;
    write_summary(out.join("power_summary.toml"), test.power_channels(), &outcome.power)?;
    info!(
        "temperature RMSE mu {:e} K, power RMSE mu {:e} W (band {:e})",
        outcome.temperature.mu_rmse, outcome.power.mu_rmse, outcome.power.band_upper
    );
    Ok(outcome)
}

pub fn evaluate(model: &LinearThermalModel<f64>, test: &Dataset) -> Result<EstimateOutcome, CliError> {
    let dt = test.dt();
    if (model.dt() - dt).abs() > 1e-9 * dt {
        return Err(thermid::Error::Argument(format!(
            "model sample period {} s differs from preprocessed data {} s",
            model.dt(),
            dt
        ))
        .into());
    }
    let gain = build_estimator(model)?;
    let (m, n) = (test.n_temps(), test.n_powers());
    let mut temp_est = Vec::new();
    let mut temp_ref = Vec::new();
    let mut temp_time = Vec::new();
    let mut power_est = Vec::new();
    let mut power_ref = Vec::new();
    let mut power_time = Vec::new();
    for segment in test.segment_ranges() {
        let part = test.slice(segment.range())?;
        let temps = part.temperature();
        let powers = part.power();
        let u0 = temps.column(0).into_owned();
        let simulated = simulate_temperature(model, powers, &u0)?;
        temp_est.extend(simulated.iter().copied());
        temp_ref.extend(temps.iter().copied());
        temp_time.extend(segment.range().map(|k| k as f64 * dt));
        let estimated = estimate_power(&gain, temps)?;
        power_est.extend(estimated.iter().copied());
        power_ref.extend(powers.columns(0, part.len() - 1).iter().copied());
        power_time.extend(segment.range().take(part.len() - 1).map(|k| k as f64 * dt));
    }
    let temp_est = DMatrix::from_vec(m, temp_time.len(), temp_est);
    let temp_ref = DMatrix::from_vec(m, temp_time.len(), temp_ref);
    let power_est = DMatrix::from_vec(n, power_time.len(), power_est);
    let power_ref = DMatrix::from_vec(n, power_time.len(), power_ref);
    Ok(EstimateOutcome {
        dt,
        temperature: rmse_stats(&temp_est, &temp_ref)?,
        temperature_time: temp_time,
        power: rmse_stats(&power_est, &power_ref)?.with_delay(1),
        power_time,
    })
}

/// Runs the evaluation and adds trailing-window RMSE series
/// (`time, mu, band`) for temperatures and powers.
pub fn cmd_report(config: &PipelineConfig) -> Result<ReportOutcome, CliError> {
    let estimate = cmd_estimate(config)?;
    let window = config.evaluate.rolling_window_seconds;
    let rolling = |report: &EstimationReport<f64>| -> Result<RollingRmse<f64>, CliError> {
        let reference = report.reference.as_ref().expect("evaluation keeps its reference");
        Ok(rolling_rmse(&report.estimated, reference, window, estimate.dt)?)
    };
    let rolling_temperature = rolling(&estimate.temperature)?;
    let rolling_power = rolling(&estimate.power)?;
    let out = &config.paths.output_dir;
    write_rolling(
        out.join("rolling_temperature_rmse.csv"),
        &estimate.temperature_time,
        &rolling_temperature,
    )?;
    write_rolling(out.join("rolling_power_rmse.csv"), &estimate.power_time, &rolling_power)?;
    Ok(ReportOutcome {
        estimate,
        rolling_temperature,
        rolling_power,
    })
}

fn write_rolling(path: PathBuf, time: &[f64], rolling: &RollingRmse<f64>) -> Result<(), CliError> {
    let mut out = String::from("time,mu,band\n");
    for ((t, mu), band) in time.iter().zip(&rolling.mu).zip(&rolling.band) {
        let _ = writeln!(out, "{t},{mu},{band}");
    }
    std::fs::write(&path, out).map_err(|source| thermid::Error::Io { path, source }.into())
}
