//! Pipeline configuration.
//!
//! Every key is optional. Relative paths are resolved against the output
//! directory, so `synth`, `identify`, `estimate` and `report` run with the
//! same `--out` form a pipeline.
//!
//! ```toml
//! [paths]
//! data = "dataset.csv"
//! segments = "segments.csv"
//! model = "model.toml"
//! network = "network.toml"
//! output_dir = "."
//!
//! [preprocess]
//! oversample = 10
//! window_seconds = 5.0
//! ambient = 25.0
//! train_fraction = 0.8
//!
//! [identify]
//! epsilon = 0.0
//! tune_epsilon = false
//! folds = 5
//! # constraints = "constraints.toml"
//! max_iterations = 20000
//! step_tolerance = 1e-12
//! objective_tolerance = 1e-15
//!
//! [evaluate]
//! rolling_window_seconds = 60.0
//!
//! [synth]
//! # network = "my_network.toml"
//! dt = 1.0
//! pulse_seconds = 600.0
//! # rest_seconds = 340.0
//! amplitude = 1.0
//! noise_std = 0.0
//! ambient = 25.0
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub preprocess: Preprocess,
    pub identify: Identify,
    pub evaluate: Evaluate,
    pub synth: Synth,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub segments: PathBuf,
    pub model: PathBuf,
    /// Ground-truth network written by `synth`; `identify` reports the
    /// recovery error against it when present.
    pub network: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// Zero-order-hold oversampling factor; 1 disables it.
    pub oversample: usize,
    /// Trailing moving-average window; 0 disables it.
    pub window_seconds: f64,
    /// Subtracted from every temperature column.
    pub ambient: f64,
    pub train_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Identify {
    pub epsilon: f64,
    /// Replaces `epsilon` by blocked cross-validation over a grid.
    pub tune_epsilon: bool,
    pub folds: usize,
    pub constraints: Option<PathBuf>,
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub objective_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluate {
    pub rolling_window_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synth {
    /// Network definition; the built-in buck converter when absent.
    pub network: Option<PathBuf>,
    pub dt: f64,
    pub pulse_seconds: f64,
    /// Five slowest time constants when absent.
    pub rest_seconds: Option<f64>,
    /// Watts per source for custom networks; the converter uses its own
    /// calibration currents.
    pub amplitude: f64,
    pub noise_std: f64,
    pub ambient: f64,
    pub seed: u64,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: "dataset.csv".into(),
            segments: "segments.csv".into(),
            model: "model.toml".into(),
            network: "network.toml".into(),
            output_dir: ".".into(),
        }
    }
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            oversample: 10,
            window_seconds: 5.0,
            ambient: 25.0,
            train_fraction: 0.8,
        }
    }
}

impl Default for Identify {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            tune_epsilon: false,
            folds: 5,
            constraints: None,
            max_iterations: 20_000,
            step_tolerance: 1e-12,
            objective_tolerance: 1e-15,
        }
    }
}

impl Default for Evaluate {
    fn default() -> Self {
        Self {
            rolling_window_seconds: 60.0,
        }
    }
}

impl Default for Synth {
    fn default() -> Self {
        Self {
            network: None,
            dt: 1.0,
            pulse_seconds: 600.0,
            rest_seconds: None,
            amplitude: 1.0,
            noise_std: 0.0,
            ambient: 25.0,
            seed: 0,
        }
    }
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| invalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(message) => invalid(format!("{}: {message}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.preprocess;
        if p.oversample < 1 {
            return Err(invalid("preprocess.oversample must be >= 1"));
        }
        if !(p.window_seconds >= 0.0 && p.window_seconds.is_finite()) {
            return Err(invalid("preprocess.window_seconds must be finite and >= 0"));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return Err(invalid("preprocess.train_fraction must lie in (0, 1)"));
        }
        if !p.ambient.is_finite() {
            return Err(invalid("preprocess.ambient must be finite"));
        }
        let i = &self.identify;
        if !(i.epsilon >= 0.0 && i.epsilon.is_finite()) {
            return Err(invalid("identify.epsilon must be finite and >= 0"));
        }
        if i.folds < 2 {
            return Err(invalid("identify.folds must be >= 2"));
        }
        if i.max_iterations == 0 || !(i.step_tolerance > 0.0) || !(i.objective_tolerance > 0.0) {
            return Err(invalid("identify solver limits must be positive"));
        }
        if !(self.evaluate.rolling_window_seconds > 0.0) {
            return Err(invalid("evaluate.rolling_window_seconds must be > 0"));
        }
        let s = &self.synth;
        if !(s.dt > 0.0 && s.pulse_seconds > 0.0 && s.amplitude >= 0.0 && s.noise_std >= 0.0) {
            return Err(invalid(
                "synth.dt and synth.pulse_seconds must be > 0, amplitude and noise_std >= 0",
            ));
        }
        if s.rest_seconds.is_some_and(|r| !(r > 0.0)) {
            return Err(invalid("synth.rest_seconds must be > 0"));
        }
        Ok(())
    }

    /// `path` as given when absolute, else under the output directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.paths.output_dir.join(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let config = PipelineConfig::parse("").unwrap();
        assert_eq!(config, PipelineConfig::default());
        assert_eq!(config.preprocess.oversample, 10);
        assert_eq!(config.preprocess.window_seconds, 5.0);
    }

    #[test]
    fn sections_override_defaults() {
        let config = PipelineConfig::parse("[preprocess]\noversample = 1\nwindow_seconds = 0\n").unwrap();
        assert_eq!(config.preprocess.oversample, 1);
        assert_eq!(config.preprocess.window_seconds, 0.0);
        assert_eq!(config.preprocess.train_fraction, 0.8);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(PipelineConfig::parse("[preprocess]\novresample = 3\n").is_err());
        assert!(PipelineConfig::parse("[preprocess]\ntrain_fraction = 1.0\n").is_err());
        assert!(PipelineConfig::parse("[preprocess]\noversample = 0\n").is_err());
        assert!(PipelineConfig::parse("[identify]\nepsilon = -1.0\n").is_err());
    }

    #[test]
    fn relative_paths_land_in_output_dir() {
        let mut config = PipelineConfig::default();
        config.paths.output_dir = "/tmp/run".into();
        assert_eq!(config.resolve(Path::new("a.csv")), Path::new("/tmp/run/a.csv"));
        assert_eq!(config.resolve(Path::new("/x/a.csv")), Path::new("/x/a.csv"));
    }
}
