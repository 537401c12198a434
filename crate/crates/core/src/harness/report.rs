//! Report files: stage CSVs, settlement and a JSON summary.
//!
//! Floats are written in shortest round-trip form so identical runs give
//! byte-identical files.

use super::pipeline::{RunReport, TraceRecord};
use crate::market::Supplier;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Stage CSVs, settlement.json and summary.json.
    Csv,
    /// summary.json only.
    Summary,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "summary" => Ok(Self::Summary),
            other => Err(format!("unknown report format `{other}` (expected csv or summary)")),
        }
    }
}

pub fn trace_csv(record: &TraceRecord) -> String {
    let mut out = String::from("t_s,delta_f_hz\n");
    for (t, df) in record.trace.iter_hz() {
        writeln!(out, "{t},{df}").unwrap();
    }
    out
}

pub fn cost_curve_csv(report: &RunReport) -> Option<String> {
    let curve = report.curve.as_ref()?;
    let mut out = String::from("k,f_low_hz,f_high_hz,delta_p_mw,cost_per_mw,speed_class,deadline_s\n");
    for s in &curve.sections {
        let deadline = s.delivery_deadline_s.map(|d| d.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.index_k, s.f_low, s.f_high, s.delta_p_mw, s.cost_per_mw, s.speed_class, deadline
        )
        .unwrap();
    }
    Some(out)
}

pub fn market_csv(report: &RunReport) -> Option<String> {
    let market = report.market.as_ref()?;
    let mut out = String::from("section_k,supplier,quantity_mw,price_per_mw,payment\n");
    for a in &market.awards {
        writeln!(out, "{},{},{},{},{}", a.section_k, a.supplier, a.quantity_mw, a.price_per_mw, a.payment())
            .unwrap();
    }
    Some(out)
}

pub fn waveforms_csv(report: &RunReport) -> Option<String> {
    let det = report.detection.as_ref()?;
    let mut out = String::from("t_s,i_ms_a,i_pia_a\n");
    for w in &det.waveforms {
        writeln!(out, "{},{},{}", w.t_s, w.i_ms_a, w.i_pia_a).unwrap();
    }
    Some(out)
}

pub fn settlement_json(report: &RunReport) -> Option<Value> {
    let s = &report.market.as_ref()?.settlement;
    let per: BTreeMap<String, f64> = s.aggregator_profit.iter().map(|(id, p)| (id.to_string(), *p)).collect();
    Some(json!({
        "utility_profit": s.utility_profit,
        "aggregator_profit": per,
        "total_aggregator_profit": s.total_aggregator_profit,
    }))
}

pub fn summary_json(report: &RunReport) -> Value {
    let detection = match &report.detection {
        None => json!({ "ran": false, "note": "detection skipped: no detection inputs in scenario" }),
        Some(d) => json!({
            "ran": true,
            "detected": d.event.detected,
            "t_detect_s": d.event.t_detect_s,
            "actions": d.event.actions,
        }),
    };
    let curve = report.curve.as_ref();
    let sections: Vec<Value> = curve
        .map(|c| {
            c.sections
                .iter()
                .zip(&c.params_per_section)
                .map(|(s, p)| {
                    json!({
                        "k": s.index_k,
                        "f_low_hz": s.f_low,
                        "f_high_hz": s.f_high,
                        "delta_p_mw": s.delta_p_mw,
                        "cost_per_mw": s.cost_per_mw,
                        "speed_class": s.speed_class,
                        "deadline_s": s.delivery_deadline_s,
                        "h_inertia_s": p.h_inertia,
                    })
                })
                .collect()
        })
        .unwrap_or_default();

    let market = report.market.as_ref().map(|m| {
        let awards: Vec<Value> = m
            .awards
            .iter()
            .map(|a| {
                json!({
                    "section_k": a.section_k,
                    "supplier": a.supplier.to_string(),
                    "quantity_mw": a.quantity_mw,
                    "price_per_mw": a.price_per_mw,
                    "payment": a.payment(),
                })
            })
            .collect();
        let mut shed: BTreeMap<String, f64> = BTreeMap::new();
        for a in &m.awards {
            if let Supplier::Aggregator(id) = a.supplier {
                *shed.entry(id.to_string()).or_insert(0.0) += a.quantity_mw;
            }
        }
        json!({
            "awards": awards,
            "shed_by_aggregator_mw": shed,
            "total_shed_mw": m.total_shed_mw(),
        })
    });

    let trace = |r: &TraceRecord| {
        json!({
            "label": r.label,
            "file": trace_file_name(r),
            "delta_p_load_pu": r.delta_p_load_pu,
            "h_inertia_s": r.h_inertia,
            "metrics": r.metrics,
        })
    };

    json!({
        "scenario": report.scenario_name,
        "scenario_digest": report.scenario_digest,
        "halted": report.halted,
        "detection": detection,
        "branch": report.branch.map(|b| json!({
            "branch": b.branch,
            "measured_f_hz": b.measured_f_hz,
            "overshoot_hz": b.overshoot_hz,
        })),
        "total_imbalance_mw": curve.map(|c| c.total_imbalance_mw),
        "emergency_mw": curve.map(|c| c.emergency_reserve_mw),
        "emergency_cost_per_mw": curve.map(|c| c.emergency_cost_per_mw),
        "emergency_deadline_s": curve.map(|c| c.emergency_deadline_s),
        "sections": sections,
        "traces": report.pre_market_trace.iter().chain(&report.section_traces).map(trace).collect::<Vec<_>>(),
        "rejected_bids": report.rejected_bids.iter().map(|r| json!({
            "bid": r.bid,
            "reason": r.reason.to_string(),
        })).collect::<Vec<_>>(),
        "market": market,
        "settlement": settlement_json(report),
        "compliance": report.compliance,
    })
}

fn trace_file_name(r: &TraceRecord) -> String {
    if r.label == "pre_market" {
        "trace.csv".to_string()
    } else {
        format!("trace_{}.csv", r.label)
    }
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, ReportError> {
    fs::write(&path, contents).map_err(|source| ReportError { path: path.clone(), source })?;
    Ok(path)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values serialize");
    s.push('\n');
    s
}

/// Writes the requested report files into `out_dir` and returns their paths.
pub fn emit_reports(
    report: &RunReport,
    out_dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(|source| ReportError { path: out_dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    if formats.contains(&ReportFormat::Csv) {
        for r in report.pre_market_trace.iter().chain(&report.section_traces) {
            written.push(write(out_dir.join(trace_file_name(r)), &trace_csv(r))?);
        }
        if let Some(csv) = cost_curve_csv(report) {
            written.push(write(out_dir.join("cost_curve.csv"), &csv)?);
        }
        if let Some(csv) = market_csv(report) {
            written.push(write(out_dir.join("market.csv"), &csv)?);
        }
        if let Some(csv) = waveforms_csv(report) {
            written.push(write(out_dir.join("waveforms.csv"), &csv)?);
        }
        if let Some(s) = settlement_json(report) {
            written.push(write(out_dir.join("settlement.json"), &pretty(&s))?);
        }
    }
    written.push(write(out_dir.join("summary.json"), &pretty(&summary_json(report)))?);
    Ok(written)
}
