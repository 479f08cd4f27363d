use nalgebra::DMatrix;

use crate::dataset::Segment;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One calibration step: the listed channels are driven one after another at
/// `amplitude` watts for `duration` seconds each, then every source rests
/// for `rest` seconds. The step and its rest form one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationStep<T: Real> {
    pub label: String,
    pub channels: Vec<usize>,
    pub amplitude: T,
    pub duration: T,
    pub rest: T,
}

pub type ExcitationSchedule<T> = Vec<ExcitationStep<T>>;

/// Staircase power profile with its segment table.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation<T: Real> {
    pub power: DMatrix<T>,
    pub segments: Vec<Segment>,
    pub dt: T,
}

/// DC calibration stage of the buck-converter oracle: drive current and the
/// effective resistance that turns it into dissipated watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationStage {
    pub label: &'static str,
    pub channels: &'static [usize],
    pub current_amps: f64,
    pub resistance_ohms: f64,
}

impl CalibrationStage {
    pub fn watts(&self) -> f64 {
        self.current_amps * self.current_amps * self.resistance_ohms
    }
}

/// The four sequential calibration stages on the five-source converter:
/// transistors at 1 A in saturation, power-loop tracks at 25 A, driver
/// outputs at 300 mA and the inductor path at 15 A.
pub const CONVERTER_STAGES: [CalibrationStage; 4] = [
    CalibrationStage {
        label: "transistors",
        channels: &[0, 1],
        current_amps: 1.0,
        resistance_ohms: 2.0,
    },
    CalibrationStage {
        label: "power_loop_tracks",
        channels: &[2],
        current_amps: 25.0,
        resistance_ohms: 0.002,
    },
    CalibrationStage {
        label: "driver",
        channels: &[3],
        current_amps: 0.3,
        resistance_ohms: 10.0,
    },
    CalibrationStage {
        label: "inductor_path",
        channels: &[4],
        current_amps: 15.0,
        resistance_ohms: 0.005,
    },
];

/// Schedule running [`CONVERTER_STAGES`] with the given pulse and rest
/// lengths.
pub fn converter_schedule<T: Real>(pulse_seconds: T, rest_seconds: T) -> ExcitationSchedule<T> {
    CONVERTER_STAGES
        .iter()
        .map(|stage| ExcitationStep {
            label: stage.label.to_string(),
            channels: stage.channels.to_vec(),
            amplitude: T::lit(stage.watts()),
            duration: pulse_seconds,
            rest: rest_seconds,
        })
        .collect()
}

fn samples<T: Real>(seconds: T, dt: T) -> usize {
    (seconds / dt).round().to_usize().unwrap_or(0)
}

/// Renders `schedule` on a grid of period `dt` for `n_channels` sources.
pub fn generate_excitation<T: Real>(schedule: &[ExcitationStep<T>], n_channels: usize, dt: T) -> Result<Excitation<T>> {
    if schedule.is_empty() {
        return Err(Error::Argument("excitation schedule is empty".into()));
    }
    if !(dt > T::zero()) {
        return Err(Error::Argument(format!("sample period must be positive, got {dt}")));
    }
    let mut lengths = Vec::with_capacity(schedule.len());
    for step in schedule {
        if !(step.duration > T::zero()) || step.rest < T::zero() {
            return Err(Error::Argument(format!(
                "step `{}` needs positive durations",
                step.label
            )));
        }
        if !(step.amplitude >= T::zero()) {
            return Err(Error::Argument(format!(
                "step `{}` has a negative amplitude",
                step.label
            )));
        }
        if let Some(&c) = step.channels.iter().find(|&&c| c >= n_channels) {
            return Err(Error::Argument(format!(
                "step `{}` drives channel {c} but only {n_channels} exist",
                step.label
            )));
        }
        let pulse = samples(step.duration, dt).max(1);
        let rest = samples(step.rest, dt);
        lengths.push((pulse, step.channels.len().max(1) * pulse + rest));
    }
    let total: usize = lengths.iter().map(|&(_, len)| len).sum();
    let mut power = DMatrix::zeros(n_channels, total);
    let mut segments = Vec::with_capacity(schedule.len());
    let mut at = 0;
    for (step, &(pulse, len)) in schedule.iter().zip(&lengths) {
        for (i, &channel) in step.channels.iter().enumerate() {
            let start = at + i * pulse;
            power.view_mut((channel, start), (1, pulse)).fill(step.amplitude);
        }
        segments.push(Segment::new(step.label.clone(), at, at + len));
        at += len;
    }
    Ok(Excitation { power, segments, dt })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_single_step() {
        let schedule = vec![ExcitationStep {
            label: "only".to_string(),
            channels: vec![0],
            amplitude: 0.0,
            duration: 5.0,
            rest: 5.0,
        }];
        let exc = generate_excitation(&schedule, 2, 1.0).unwrap();
        assert!(exc.power.iter().all(|&p| p == 0.0));
        assert_eq!(exc.segments, vec![Segment::new("only", 0, 10)]);
    }

    #[test]
    fn converter_stages_produce_four_segments() {
        let exc = generate_excitation(&converter_schedule(10.0, 20.0), 5, 1.0).unwrap();
        let labels: Vec<&str> = exc.segments.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["transistors", "power_loop_tracks", "driver", "inductor_path"]);
        // transistors: two back-to-back pulses, one per device
        assert_eq!(exc.power[(0, 0)], 2.0);
        assert_eq!(exc.power[(0, 10)], 0.0);
        assert_eq!(exc.power[(1, 10)], 2.0);
        assert_eq!(exc.segments[0].len(), 40);
        for (c, stage) in [(2, 1), (3, 2), (4, 3)] {
            let seg = &exc.segments[stage];
            assert_eq!(exc.power[(c, seg.start)], CONVERTER_STAGES[stage].watts());
            assert_eq!(exc.power.row(c).iter().filter(|&&p| p > 0.0).count(), 10);
        }
        assert!((CONVERTER_STAGES[1].watts() - 1.25).abs() < 1e-12);
        assert!((CONVERTER_STAGES[2].watts() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(generate_excitation::<f64>(&[], 2, 1.0).is_err());
        let bad_channel = vec![ExcitationStep {
            label: "x".to_string(),
            channels: vec![3],
            amplitude: 1.0,
            duration: 1.0,
            rest: 0.0,
        }];
        assert!(generate_excitation(&bad_channel, 2, 1.0).is_err());
    }
}
