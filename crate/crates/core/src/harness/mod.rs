//! Scenario ingestion, end-to-end orchestration and report emission.

mod pipeline;
mod report;
mod scenario;

pub use pipeline::{
    run_pipeline, ComplianceStatus, DetectionOutcome, EmergencyCompliance, PipelineError,
    RunReport, SectionCompliance, Stage, TimingCompliance, TraceRecord,
};
pub use report::{
    cost_curve_csv, emit_reports, market_csv, settlement_json, summary_json, trace_csv,
    waveforms_csv, ReportError, ReportFormat,
};
pub use scenario::{
    load_scenario, parse_bids, parse_fleet, BidWarning, DetectionSpec, PartitionPolicy,
    ReserveSpec, Scenario, ScenarioError, ScenarioFile, SimulationSpec, SizingTag, TimingSpec,
    SCHEMA_VERSION,
};
