use super::scenario::Scenario;
use crate::detection::{self, CoordinatorAction, DetectionEvent, WaveformSample};
use crate::dynamics::{self, FrequencyTrace, GridParams, TransientMetrics};
use crate::market::{self, MarketResult, RejectedBid, Supplier};
use crate::reserve::{self, BranchDecision, CurveInputs, IrCostCurve, SpeedClass};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detection,
    ReserveCurve,
    Dynamics,
    Market,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Detection => "detection",
            Stage::ReserveCurve => "reserve_curve",
            Stage::Dynamics => "dynamics",
            Stage::Market => "market",
        })
    }
}

#[derive(Debug, Error)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
    /// Whatever the pipeline produced before failing.
    pub partial: Box<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionOutcome {
    pub event: DetectionEvent,
    #[serde(skip)]
    pub waveforms: Vec<WaveformSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    /// `"pre_market"` or `"section_<k>"`.
    pub label: String,
    /// Residual imbalance the trace responds to, in pu.
    pub delta_p_load_pu: f64,
    pub h_inertia: f64,
    #[serde(skip)]
    pub trace: FrequencyTrace,
    pub metrics: TransientMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceStatus {
    Compliant,
    Violated,
    /// A supplier's response time was not declared in the scenario.
    Undeclared,
    /// The section carries no delivery deadline.
    NoDeadline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionCompliance {
    pub section_k: usize,
    pub speed_class: SpeedClass,
    pub deadline_s: Option<f64>,
    /// Slowest declared response among the section's suppliers.
    pub worst_response_s: Option<f64>,
    pub status: ComplianceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergencyCompliance {
    pub deadline_s: f64,
    pub response_s: Option<f64>,
    pub status: ComplianceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingCompliance {
    pub emergency: Option<EmergencyCompliance>,
    pub sections: Vec<SectionCompliance>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario_name: String,
    pub scenario_digest: String,
    pub detection: Option<DetectionOutcome>,
    /// Set when the pipeline stopped early without an error.
    pub halted: Option<String>,
    pub branch: Option<BranchDecision>,
    pub curve: Option<IrCostCurve>,
    pub pre_market_trace: Option<TraceRecord>,
    pub section_traces: Vec<TraceRecord>,
    pub rejected_bids: Vec<RejectedBid>,
    pub market: Option<MarketResult>,
    pub compliance: Option<TimingCompliance>,
}

impl RunReport {
    fn empty(scenario: &Scenario) -> Self {
        Self {
            scenario_name: scenario.name().to_string(),
            scenario_digest: scenario.digest(),
            detection: None,
            halted: None,
            branch: None,
            curve: None,
            pre_market_trace: None,
            section_traces: Vec::new(),
            rejected_bids: Vec::new(),
            market: None,
            compliance: None,
        }
    }
}

fn simulate_record(
    label: String,
    params: &GridParams,
    delta_p_load_pu: f64,
    scenario: &Scenario,
) -> Result<TraceRecord, dynamics::DynamicsError> {
    let sim = &scenario.file.simulation;
    let model = dynamics::build_state_space(*params)?;
    let trace = dynamics::simulate_response(&model, delta_p_load_pu, sim.dt, sim.t_end)?;
    let metrics = dynamics::transient_metrics(&trace, sim.settling_band_hz)?;
    Ok(TraceRecord { label, delta_p_load_pu, h_inertia: params.h_inertia, trace, metrics })
}

fn timing_compliance(scenario: &Scenario, curve: &IrCostCurve, market: &MarketResult) -> TimingCompliance {
    let timing = &scenario.file.timing;
    let emergency = (curve.emergency_reserve_mw > 0.0).then(|| {
        let response_s = timing.emergency_response_s;
        let status = match response_s {
            None => ComplianceStatus::Undeclared,
            Some(r) if r <= curve.emergency_deadline_s => ComplianceStatus::Compliant,
            Some(_) => ComplianceStatus::Violated,
        };
        EmergencyCompliance { deadline_s: curve.emergency_deadline_s, response_s, status }
    });

    let sections = curve
        .sections
        .iter()
        .map(|s| {
            let responses: Vec<Option<f64>> = market
                .awards
                .iter()
                .filter(|a| a.section_k == s.index_k)
                .map(|a| match a.supplier {
                    Supplier::Genco => timing.genco_response_s,
                    Supplier::Aggregator(id) => timing.aggregator(id),
                })
                .collect();
            let worst_response_s = responses
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .and_then(|v| v.into_iter().reduce(f64::max));
            let status = match (s.delivery_deadline_s, worst_response_s) {
                (None, _) => ComplianceStatus::NoDeadline,
                (Some(_), None) => ComplianceStatus::Undeclared,
                (Some(d), Some(r)) if r <= d => ComplianceStatus::Compliant,
                (Some(_), Some(_)) => ComplianceStatus::Violated,
            };
            SectionCompliance {
                section_k: s.index_k,
                speed_class: s.speed_class,
                deadline_s: s.delivery_deadline_s,
                worst_response_s,
                status,
            }
        })
        .collect();
    TimingCompliance { emergency, sections }
}

/// Runs detection, reserve curve, transient replay, market and settlement.
pub fn run_pipeline(scenario: &Scenario) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::empty(scenario);
    let f = &scenario.file;

    macro_rules! bail {
        ($stage:expr, $err:expr) => {
            return Err(PipelineError { stage: $stage, message: $err.to_string(), partial: Box::new(report) })
        };
    }

    if let Some(spec) = &f.detection {
        let waveforms = match detection::simulate_waveforms(&spec.circuit, &spec.pia) {
            Ok(w) => w,
            Err(e) => bail!(Stage::Detection, e),
        };
        let event = match detection::detect(&detection::pia_series(&waveforms), &spec.pia) {
            Ok(ev) => detection::coordinator_decide(ev, spec.mode),
            Err(e) => bail!(Stage::Detection, e),
        };
        let halt = if !event.detected {
            Some("islanding not detected; microgrid remains grid-connected".to_string())
        } else if event.actions.contains(&CoordinatorAction::TripAllDg) {
            Some("coordinator tripped all DG inverters; no islanded operation".to_string())
        } else {
            None
        };
        report.detection = Some(DetectionOutcome { event, waveforms });
        if halt.is_some() {
            report.halted = halt;
            return Ok(report);
        }
    }

    let fleet = scenario.post_event_fleet();
    let partition = f.partition().map_err(|(_, m)| m);
    let sizing = f.section_sizing().map_err(|(_, m)| m);
    let emergency = f.emergency_sizing().map_err(|(_, m)| m);
    let (partition, section_sizing, emergency) = match (partition, sizing, emergency) {
        (Ok(p), Ok(s), Ok(e)) => (p, s, e),
        (Err(m), _, _) | (_, Err(m), _) | (_, _, Err(m)) => bail!(Stage::ReserveCurve, m),
    };
    let inputs = CurveInputs {
        measured_f_hz: f.measured_f_hz,
        total_imbalance_mw: f.lost_generation_mw,
        fleet: &fleet,
        params: f.grid,
        partition,
        emergency,
        section_sizing,
        inertia_policy: f.reserve.inertia_policy,
    };
    let (decision, curve) = match reserve::build_ir_cost_curve(&inputs) {
        Ok(v) => v,
        Err(e) => bail!(Stage::ReserveCurve, e),
    };
    report.branch = Some(decision);

    // Transient at the DR-zone entry, then after each section is delivered.
    let budget = curve.dr_budget_mw();
    let entry_params = curve.params_per_section.first().copied().unwrap_or(f.grid);
    match simulate_record("pre_market".into(), &entry_params, budget / f.grid.s_base, scenario) {
        Ok(r) => report.pre_market_trace = Some(r),
        Err(e) => {
            report.curve = Some(curve);
            bail!(Stage::Dynamics, e)
        }
    }
    let mut delivered = 0.0;
    for (s, params) in curve.sections.iter().zip(&curve.params_per_section) {
        delivered += s.delta_p_mw;
        let residual = ((budget - delivered) / f.grid.s_base).max(0.0);
        match simulate_record(format!("section_{}", s.index_k), params, residual, scenario) {
            Ok(r) => report.section_traces.push(r),
            Err(e) => {
                report.curve = Some(curve);
                bail!(Stage::Dynamics, e)
            }
        }
    }

    let (book, rejected) = market::validate_bids(&scenario.bids, &curve);
    let result = market::clear_market(&curve, &book);
    report.rejected_bids = rejected;
    report.compliance = Some(timing_compliance(scenario, &curve, &result));
    report.market = Some(result);
    report.curve = Some(curve);
    Ok(report)
}
