//! Parallel-impedance-arm (PIA) islanding detection.
//!
//! An impedance arm sits in parallel with the main switch (MS). While the MS
//! is closed it shorts the arm, so the arm carries no current. Once the MS
//! opens, the whole exchange current flows through the arm and its sensor.
//! A coordinator watches the sensor and declares islanding when the
//! one-cycle RMS of the arm current stays above a threshold for a debounce
//! run of samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("invalid detection input `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("sample series is empty")]
    EmptySeries,
}

pub type Result<T> = std::result::Result<T, DetectionError>;

fn invalid(field: &'static str, reason: impl Into<String>) -> DetectionError {
    DetectionError::Invalid { field, reason: reason.into() }
}

fn require_positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiaConfig {
    pub impedance_ohms: f64,
    pub current_threshold_a: f64,
    pub debounce_samples: usize,
    pub sample_rate_hz: f64,
    /// Sets the length of the RMS window (one nominal cycle).
    #[serde(default = "default_nominal")]
    pub f_nominal_hz: f64,
}

fn default_nominal() -> f64 {
    60.0
}

impl PiaConfig {
    /// 1 % of rated load current, 5-sample debounce at 10 kHz.
    pub fn with_defaults(impedance_ohms: f64, rated_load_current_a: f64) -> Self {
        Self {
            impedance_ohms,
            current_threshold_a: 0.01 * rated_load_current_a,
            debounce_samples: 5,
            sample_rate_hz: 10_000.0,
            f_nominal_hz: 60.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("impedance_ohms", self.impedance_ohms)?;
        require_positive("current_threshold_a", self.current_threshold_a)?;
        require_positive("f_nominal_hz", self.f_nominal_hz)?;
        if self.debounce_samples < 1 {
            return Err(invalid("debounce_samples", "must be at least 1"));
        }
        if !(self.sample_rate_hz >= 1000.0) || !self.sample_rate_hz.is_finite() {
            return Err(invalid(
                "sample_rate_hz",
                format!("must be at least 1000 Hz, got {}", self.sample_rate_hz),
            ));
        }
        Ok(())
    }

    /// Samples in one nominal cycle (the RMS window).
    pub fn cycle_samples(&self) -> usize {
        ((self.sample_rate_hz / self.f_nominal_hz).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitScenario {
    pub source_voltage_rms_v: f64,
    pub load_impedance_ohms: f64,
    /// Instant the MS opens; `None` for a grid-connected run.
    #[serde(default)]
    pub ms_open_time_s: Option<f64>,
    pub duration_s: f64,
    #[serde(default)]
    pub noise_rms_a: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

impl CircuitScenario {
    pub fn validate(&self) -> Result<()> {
        require_positive("source_voltage_rms_v", self.source_voltage_rms_v)?;
        require_positive("load_impedance_ohms", self.load_impedance_ohms)?;
        require_positive("duration_s", self.duration_s)?;
        if !(self.noise_rms_a >= 0.0) || !self.noise_rms_a.is_finite() {
            return Err(invalid("noise_rms_a", format!("must be >= 0, got {}", self.noise_rms_a)));
        }
        if let Some(t) = self.ms_open_time_s {
            if !(t >= 0.0 && t < self.duration_s) {
                return Err(invalid(
                    "ms_open_time_s",
                    format!("must lie in [0, {}), got {t}", self.duration_s),
                ));
            }
        }
        Ok(())
    }

    pub fn rated_load_current_a(&self) -> f64 {
        self.source_voltage_rms_v / self.load_impedance_ohms
    }
}

/// One sample of the two branch currents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveformSample {
    pub t_s: f64,
    pub i_ms_a: f64,
    pub i_pia_a: f64,
}

/// Quasi-static single-phase waveforms of the MS and PIA branch currents.
///
/// Before the MS opens it carries the full load current `V / Z_load` and the
/// arm sees only sensor noise. From the opening instant on, the MS current
/// is zero and the arm carries `V / (Z_pia + Z_load)`.
pub fn simulate_waveforms(
    scenario: &CircuitScenario,
    config: &PiaConfig,
) -> Result<Vec<WaveformSample>> {
    scenario.validate()?;
    config.validate()?;

    let n = (scenario.duration_s * config.sample_rate_hz).round() as usize;
    let omega = 2.0 * PI * config.f_nominal_hz;
    let peak_connected = SQRT_2 * scenario.source_voltage_rms_v / scenario.load_impedance_ohms;
    let peak_islanded = SQRT_2 * scenario.source_voltage_rms_v
        / (config.impedance_ohms + scenario.load_impedance_ohms);

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise_seed);
    let noise = Normal::new(0.0, scenario.noise_rms_a)
        .map_err(|e| invalid("noise_rms_a", e.to_string()))?;

    let samples = (0..n)
        .map(|i| {
            let t_s = i as f64 / config.sample_rate_hz;
            let phase = (omega * t_s).sin();
            let islanded = scenario.ms_open_time_s.is_some_and(|t_open| t_s >= t_open);
            let (i_ms_a, clean_pia) = if islanded {
                (0.0, peak_islanded * phase)
            } else {
                (peak_connected * phase, 0.0)
            };
            let n = if scenario.noise_rms_a > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            WaveformSample { t_s, i_ms_a, i_pia_a: clean_pia + n }
        })
        .collect();
    Ok(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinatorAction {
    OpenPiaSwitch,
    TripAllDg,
    IslandedOperation,
}

/// What the coordinator does after the PIA switch opens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinatorMode {
    TripDg,
    #[default]
    IslandedOperation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub detected: bool,
    pub t_detect_s: Option<f64>,
    pub actions: Vec<CoordinatorAction>,
}

impl DetectionEvent {
    pub fn not_detected() -> Self {
        Self { detected: false, t_detect_s: None, actions: Vec::new() }
    }
}

/// One-cycle sliding RMS of `values` with a window of `window` samples.
/// Leading samples use a zero-padded window.
pub fn sliding_rms(values: &[f64], window: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v * v;
        prefix.push(acc);
    }
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let sum_sq = (prefix[i + 1] - prefix[lo]).max(0.0);
            (sum_sq / window as f64).sqrt()
        })
        .collect()
}

/// Declares islanding on the first sample that completes a run of
/// `debounce_samples` consecutive envelope values strictly above threshold.
///
/// `samples` are `(t_s, i_pia_a)` pairs at `config.sample_rate_hz`.
pub fn detect(samples: &[(f64, f64)], config: &PiaConfig) -> Result<DetectionEvent> {
    config.validate()?;
    if samples.is_empty() {
        return Err(DetectionError::EmptySeries);
    }
    let currents: Vec<f64> = samples.iter().map(|&(_, i)| i).collect();
    let envelope = sliding_rms(&currents, config.cycle_samples());

    let mut run = 0usize;
    for (idx, rms) in envelope.iter().enumerate() {
        if *rms > config.current_threshold_a {
            run += 1;
            if run == config.debounce_samples {
                return Ok(DetectionEvent {
                    detected: true,
                    t_detect_s: Some(samples[idx].0),
                    actions: Vec::new(),
                });
            }
        } else {
            run = 0;
        }
    }
    Ok(DetectionEvent::not_detected())
}

/// Attaches the coordinator's follow-up actions to a detection result.
pub fn coordinator_decide(event: DetectionEvent, mode: CoordinatorMode) -> DetectionEvent {
    let actions = if event.detected {
        let follow_up = match mode {
            CoordinatorMode::TripDg => CoordinatorAction::TripAllDg,
            CoordinatorMode::IslandedOperation => CoordinatorAction::IslandedOperation,
        };
        vec![CoordinatorAction::OpenPiaSwitch, follow_up]
    } else {
        Vec::new()
    };
    DetectionEvent { actions, ..event }
}

pub fn pia_series(waveforms: &[WaveformSample]) -> Vec<(f64, f64)> {
    waveforms.iter().map(|w| (w.t_s, w.i_pia_a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> PiaConfig {
        PiaConfig {
            impedance_ohms: 1.0,
            current_threshold_a: 1.0,
            debounce_samples: 5,
            sample_rate_hz: 10_000.0,
            f_nominal_hz: 60.0,
        }
    }

    fn scenario(open: Option<f64>) -> CircuitScenario {
        CircuitScenario {
            source_voltage_rms_v: 240.0,
            load_impedance_ohms: 23.0,
            ms_open_time_s: open,
            duration_s: 2.0,
            noise_rms_a: 0.0,
            noise_seed: 7,
        }
    }

    #[test]
    fn grid_connected_arm_is_dead() {
        let w = simulate_waveforms(&scenario(None), &config()).unwrap();
        assert_eq!(w.len(), 20_000);
        assert!(w.iter().all(|s| s.i_pia_a == 0.0));
        assert!(w.iter().any(|s| s.i_ms_a != 0.0));
    }

    #[test]
    fn islanded_arm_carries_ohms_law_current() {
        let w = simulate_waveforms(&scenario(Some(1.0)), &config()).unwrap();
        // 60 full cycles after the opening: 240 V / (1 + 23) Ω = 10 A RMS
        let post: Vec<f64> =
            w.iter().filter(|s| s.t_s >= 1.0).take(10_000).map(|s| s.i_pia_a).collect();
        let rms = (post.iter().map(|i| i * i).sum::<f64>() / post.len() as f64).sqrt();
        assert!((rms - 10.0).abs() < 1e-9, "{rms}");
        assert!(w.iter().filter(|s| s.t_s >= 1.0).all(|s| s.i_ms_a == 0.0));
        assert!(w.iter().filter(|s| s.t_s < 1.0).all(|s| s.i_pia_a == 0.0));
    }

    #[test]
    fn noise_is_seeded() {
        let mut sc = scenario(None);
        sc.noise_rms_a = 0.1;
        let a = simulate_waveforms(&sc, &config()).unwrap();
        let b = simulate_waveforms(&sc, &config()).unwrap();
        assert_eq!(a, b);
        sc.noise_seed += 1;
        let c = simulate_waveforms(&sc, &config()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn all_zero_series_not_detected() {
        let s: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64 * 1e-4, 0.0)).collect();
        assert_eq!(detect(&s, &config()).unwrap(), DetectionEvent::not_detected());
    }

    #[test]
    fn empty_series_is_an_error() {
        assert_eq!(detect(&[], &config()), Err(DetectionError::EmptySeries));
    }

    #[test]
    fn exactly_at_threshold_is_not_detected() {
        // Square wave of amplitude 1 A has RMS exactly 1 A.
        let s: Vec<(f64, f64)> = (0..5000)
            .map(|i| (i as f64 * 1e-4, if (i / 83) % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        assert!(!detect(&s, &config()).unwrap().detected);
    }

    #[test]
    fn step_detection_matches_brute_force_scan() {
        let cfg = config();
        let w = simulate_waveforms(&scenario(Some(1.0)), &cfg).unwrap();
        let series = pia_series(&w);
        let ev = detect(&series, &cfg).unwrap();
        let t = ev.t_detect_s.unwrap();

        // Brute force: recompute each window directly and scan for the run.
        let n = 167;
        let mut run = 0;
        let mut expected = None;
        for i in 0..series.len() {
            let lo = (i + 1).saturating_sub(n);
            let ss: f64 = series[lo..=i].iter().map(|(_, x)| x * x).sum();
            if (ss / n as f64).sqrt() > 1.0 {
                run += 1;
                if run == 5 {
                    expected = Some(series[i].0);
                    break;
                }
            } else {
                run = 0;
            }
        }
        assert_eq!(Some(t), expected);
        assert!(t > 1.0 && t <= 1.0 + 1.0 / 60.0 + 5e-4, "{t}");
    }

    #[test]
    fn coordinator_actions() {
        let none = coordinator_decide(DetectionEvent::not_detected(), CoordinatorMode::TripDg);
        assert!(none.actions.is_empty());

        let hit = DetectionEvent { detected: true, t_detect_s: Some(1.0), actions: vec![] };
        let trip = coordinator_decide(hit.clone(), CoordinatorMode::TripDg);
        assert_eq!(trip.actions, [CoordinatorAction::OpenPiaSwitch, CoordinatorAction::TripAllDg]);
        let island = coordinator_decide(hit, CoordinatorMode::IslandedOperation);
        assert_eq!(
            island.actions,
            [CoordinatorAction::OpenPiaSwitch, CoordinatorAction::IslandedOperation]
        );
        assert_eq!(island.t_detect_s, Some(1.0));
    }

    #[test]
    fn config_validation() {
        assert!(PiaConfig { sample_rate_hz: 999.0, ..config() }.validate().is_err());
        assert!(PiaConfig { debounce_samples: 0, ..config() }.validate().is_err());
        assert!(PiaConfig { current_threshold_a: 0.0, ..config() }.validate().is_err());
        let mut sc = scenario(Some(2.0));
        assert!(sc.validate().is_err());
        sc.ms_open_time_s = Some(-0.1);
        assert!(sc.validate().is_err());
    }

    #[test]
    fn defaults_use_one_percent_of_rated_current() {
        let sc = scenario(None);
        let cfg = PiaConfig::with_defaults(1.0, sc.rated_load_current_a());
        assert!((cfg.current_threshold_a - 240.0 / 23.0 / 100.0).abs() < 1e-12);
        assert_eq!(cfg.debounce_samples, 5);
        assert_eq!(cfg.cycle_samples(), 167);
    }
}
