//! Single-machine load-frequency dynamics of an islanded microgrid.
//!
//! The plant is the classic swing equation with load damping, closed through
//! a droop governor and a non-reheat turbine:
//!
//! ```text
//!   Δω(s)          (1 + τg s)(1 + τT s)
//!  ------- = ---------------------------------------
//!  -ΔP_L(s)  (2Hs + D)(1 + τg s)(1 + τT s) + 1/R
//! ```
//!
//! It is realized in controllable canonical form and integrated with a
//! fixed-step RK4 scheme. All powers are per unit on `s_base`, frequency
//! deviations are per unit of `f_nominal`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("step size {dt} s exceeds accuracy limit {limit} s (min(tau_g, tau_t)/4)")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("simulation diverged at t = {t} s (|dw| = {value} pu exceeds bound {bound} pu)")]
    Unstable { t: f64, value: f64, bound: f64 },
    #[error("trace has {len} samples, need at least {min}")]
    TraceTooShort { len: usize, min: usize },
    #[error("unknown inertia policy `{0}`")]
    UnknownPolicy(String),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter {
            field,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

/// Parameter bundle for the load-frequency model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Inertia constant H in seconds, on `s_base`.
    pub h_inertia: f64,
    /// Load damping D (% load change per % frequency change).
    pub d_damping: f64,
    /// Speed regulation R in per unit.
    pub r_droop: f64,
    /// Governor time constant in seconds.
    pub tau_g: f64,
    /// Turbine time constant in seconds.
    pub tau_t: f64,
    /// Nominal frequency in Hz.
    pub f_nominal: f64,
    /// Power base in MVA.
    pub s_base: f64,
}

impl GridParams {
    /// Checks that every field is finite and strictly positive.
    pub fn check(&self) -> Result<()> {
        positive("h_inertia", self.h_inertia)?;
        positive("d_damping", self.d_damping)?;
        positive("r_droop", self.r_droop)?;
        positive("tau_g", self.tau_g)?;
        positive("tau_t", self.tau_t)?;
        positive("f_nominal", self.f_nominal)?;
        positive("s_base", self.s_base)
    }

    /// Like [`check`](Self::check), and additionally requires a 50 or 60 Hz system.
    pub fn check_standard_nominal(&self) -> Result<()> {
        self.check()?;
        if self.f_nominal == 50.0 || self.f_nominal == 60.0 {
            Ok(())
        } else {
            Err(DynamicsError::InvalidParameter {
                field: "f_nominal",
                reason: format!("must be 50 or 60 Hz unless overridden, got {}", self.f_nominal),
            })
        }
    }

    /// Synchronous electrical angular velocity 2π·f_nominal in rad/s.
    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f_nominal
    }

    /// Primary-response stiffness D + 1/R.
    pub fn stiffness(&self) -> f64 {
        self.d_damping + 1.0 / self.r_droop
    }

    pub fn with_inertia(self, h_inertia: f64) -> Self {
        Self { h_inertia, ..self }
    }

    /// Denominator coefficients `[a3, a2, a1, a0]` of the closed-loop
    /// transfer function, highest power first.
    pub fn characteristic_polynomial(&self) -> [f64; 4] {
        let (h, d, tg, tt) = (self.h_inertia, self.d_damping, self.tau_g, self.tau_t);
        [
            2.0 * h * tg * tt,
            2.0 * h * (tg + tt) + d * tg * tt,
            2.0 * h + d * (tg + tt),
            d + 1.0 / self.r_droop,
        ]
    }

    /// Numerator coefficients `[n2, n1, n0]`, highest power first.
    pub fn numerator_polynomial(&self) -> [f64; 3] {
        [self.tau_g * self.tau_t, self.tau_g + self.tau_t, 1.0]
    }
}

/// Third-order state-space realization `dx/dt = A x + B u`, `Δω = C x`
/// with input `u = -ΔP_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
    pub c: [f64; 3],
    pub params: GridParams,
}

pub const STATE_DIM: usize = 3;

/// Controllable canonical form of the closed-loop transfer function.
pub fn build_state_space(params: GridParams) -> Result<StateSpaceModel> {
    params.check()?;
    let [a3, a2, a1, a0] = params.characteristic_polynomial();
    let [n2, n1, n0] = params.numerator_polynomial();
    Ok(StateSpaceModel {
        a: [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [-a0 / a3, -a1 / a3, -a2 / a3],
        ],
        b: [0.0, 0.0, 1.0],
        c: [n0 / a3, n1 / a3, n2 / a3],
        params,
    })
}

impl StateSpaceModel {
    fn derivative(&self, x: &[f64; 3], u: f64) -> [f64; 3] {
        let mut dx = [0.0; 3];
        for (i, row) in self.a.iter().enumerate() {
            dx[i] = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + self.b[i] * u;
        }
        dx
    }

    fn output(&self, x: &[f64; 3]) -> f64 {
        self.c[0] * x[0] + self.c[1] * x[1] + self.c[2] * x[2]
    }

    /// Static gain `-C A⁻¹ B` from `-ΔP_L` to `Δω`.
    ///
    /// In companion form `A⁻¹ B = [-1/A[2][0], 0, 0]`, so only the first
    /// state survives in steady state.
    pub fn dc_gain(&self) -> f64 {
        self.c[0] / -self.a[2][0]
    }

    /// Routh–Hurwitz test on the cubic characteristic polynomial.
    pub fn is_hurwitz(&self) -> bool {
        let [a3, a2, a1, a0] = self.params.characteristic_polynomial();
        a3 > 0.0 && a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && a2 * a1 > a3 * a0
    }

    fn rk4_step(&self, x: &[f64; 3], u: f64, dt: f64) -> [f64; 3] {
        let k1 = self.derivative(x, u);
        let x2 = std::array::from_fn(|i| x[i] + 0.5 * dt * k1[i]);
        let k2 = self.derivative(&x2, u);
        let x3 = std::array::from_fn(|i| x[i] + 0.5 * dt * k2[i]);
        let k3 = self.derivative(&x3, u);
        let x4 = std::array::from_fn(|i| x[i] + dt * k3[i]);
        let k4 = self.derivative(&x4, u);
        std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }
}

/// Steady-state frequency deviation in pu for a load step of
/// `delta_p_load_pu` (positive = load increase or generation loss).
pub fn steady_state_deviation(params: &GridParams, delta_p_load_pu: f64) -> Result<f64> {
    params.check()?;
    Ok(-delta_p_load_pu * (1.0 / params.stiffness()))
}

/// Uniformly sampled frequency deviation in per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub f_nominal: f64,
}

impl FrequencyTrace {
    pub fn new(dt: f64, samples: Vec<f64>, f_nominal: f64) -> Result<Self> {
        positive("dt", dt)?;
        positive("f_nominal", f_nominal)?;
        if samples.len() < 2 {
            return Err(DynamicsError::TraceTooShort { len: samples.len(), min: 2 });
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(DynamicsError::InvalidParameter {
                field: "samples",
                reason: format!("non-finite sample {bad}"),
            });
        }
        Ok(Self { dt, samples, f_nominal })
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn terminal(&self) -> f64 {
        *self.samples.last().expect("trace has at least two samples")
    }

    /// `(t_s, Δf_hz)` pairs.
    pub fn iter_hz(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(move |(i, w)| (i as f64 * self.dt, w * self.f_nominal))
    }
}

/// Step response of `model` to a load step applied at t = 0.
pub fn simulate_response(
    model: &StateSpaceModel,
    delta_p_load_pu: f64,
    dt: f64,
    t_end: f64,
) -> Result<FrequencyTrace> {
    positive("dt", dt)?;
    if !delta_p_load_pu.is_finite() {
        return Err(DynamicsError::InvalidParameter {
            field: "delta_p_load_pu",
            reason: format!("must be finite, got {delta_p_load_pu}"),
        });
    }
    if !(t_end >= 10.0 * dt) {
        return Err(DynamicsError::InvalidParameter {
            field: "t_end",
            reason: format!("must be at least 10 steps ({} s), got {t_end}", 10.0 * dt),
        });
    }
    let limit = model.params.tau_g.min(model.params.tau_t) / 4.0;
    if dt > limit {
        return Err(DynamicsError::StepTooLarge { dt, limit });
    }

    let u = -delta_p_load_pu;
    let bound = 10.0 * (model.dc_gain() * u).abs() + 1.0;
    let steps = (t_end / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = [0.0; STATE_DIM];
    samples.push(0.0);
    for i in 1..=steps {
        x = model.rk4_step(&x, u, dt);
        let w = model.output(&x);
        if !w.is_finite() || w.abs() > bound {
            return Err(DynamicsError::Unstable { t: i as f64 * dt, value: w.abs(), bound });
        }
        samples.push(w);
    }
    FrequencyTrace::new(dt, samples, model.params.f_nominal)
}

/// Default settling band about the steady state, in Hz.
pub const DEFAULT_SETTLING_BAND_HZ: f64 = 0.05;

/// Traces whose settling instant falls in the last tenth of the record are
/// flagged unsettled.
const SETTLED_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientMetrics {
    /// Peak |Δf| over the trace; the "overshoot" compared against 3 Hz.
    pub max_deviation_hz: f64,
    pub steady_state_deviation_hz: f64,
    pub settling_time_s: f64,
    pub settling_band_hz: f64,
    pub settled: bool,
}

pub fn transient_metrics(trace: &FrequencyTrace, settling_band_hz: f64) -> Result<TransientMetrics> {
    positive("settling_band_hz", settling_band_hz)?;
    const MIN_SAMPLES: usize = 10;
    if trace.samples.len() < MIN_SAMPLES {
        return Err(DynamicsError::TraceTooShort { len: trace.samples.len(), min: MIN_SAMPLES });
    }
    let f0 = trace.f_nominal;
    let max_deviation_hz = trace.samples.iter().fold(0.0_f64, |m, w| m.max(w.abs() * f0));
    let steady_state_deviation_hz = trace.terminal() * f0;

    // Index of the first sample after which the trace never leaves the band.
    let first_settled = trace
        .samples
        .iter()
        .rposition(|w| (w * f0 - steady_state_deviation_hz).abs() > settling_band_hz)
        .map_or(0, |last_out| last_out + 1);
    let settling_time_s = first_settled as f64 * trace.dt;

    Ok(TransientMetrics {
        max_deviation_hz,
        steady_state_deviation_hz,
        settling_time_s,
        settling_band_hz,
        settled: settling_time_s <= SETTLED_FRACTION * trace.duration(),
    })
}

/// How the inertia constant evolves as reserve is committed section by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertiaPolicy {
    #[default]
    Constant,
    ProportionalToCommittedCapacity,
}

impl FromStr for InertiaPolicy {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "proportional" | "proportional_to_committed_capacity" => {
                Ok(Self::ProportionalToCommittedCapacity)
            }
            other => Err(DynamicsError::UnknownPolicy(other.to_string())),
        }
    }
}

impl fmt::Display for InertiaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::ProportionalToCommittedCapacity => "proportional_to_committed_capacity",
        })
    }
}

/// New inertia constant after committing `committed_delta_mw` more capacity.
///
/// `stored_energy_mws / s_base` is the prior H; `online_capacity_mw` is the
/// committed capacity before the step.
pub fn update_inertia(
    stored_energy_mws: f64,
    online_capacity_mw: f64,
    committed_delta_mw: f64,
    policy: InertiaPolicy,
    s_base: f64,
) -> Result<f64> {
    positive("stored_energy_mws", stored_energy_mws)?;
    positive("s_base", s_base)?;
    let h = stored_energy_mws / s_base;
    match policy {
        InertiaPolicy::Constant => Ok(h),
        InertiaPolicy::ProportionalToCommittedCapacity => {
            positive("online_capacity_mw", online_capacity_mw)?;
            let after = online_capacity_mw + committed_delta_mw;
            positive("online capacity after commitment", after)?;
            Ok(h * after / online_capacity_mw)
        }
    }
}

/// Peak |Δω| in pu for a unit load step, the linear scale factor used by
/// transient-peak reserve sizing.
pub fn unit_step_peak(params: &GridParams) -> Result<f64> {
    let model = build_state_space(*params)?;
    let dt = (params.tau_g.min(params.tau_t) / 8.0).min(1e-3);
    let horizon = 10.0 * params.tau_g.max(params.tau_t).max(2.0 * params.h_inertia);
    let trace = simulate_response(&model, 1.0, dt, horizon)?;
    Ok(trace.samples.iter().fold(0.0_f64, |m, w| m.max(w.abs())))
}
