//! Benchmark groups for the islanding pipeline stages.

use criterion::{black_box, BenchmarkId, Criterion};
use islanddr_core::dynamics::{build_state_space, simulate_response, transient_metrics};
use islanddr_core::harness::{load_scenario, run_pipeline, Scenario};
use islanddr_core::market::{clear_market, validate_bids};
use islanddr_core::reserve::{
    build_ir_cost_curve, CurveInputs, EmergencySizing, Partition, SectionSizing, SizingPolicy,
};
use islanddr_core::{AggregatorBid, AggregatorId, GeneratorUnit, GridParams, InertiaPolicy, IrCostCurve};
use std::path::PathBuf;

pub fn case_params() -> GridParams {
    GridParams { h_inertia: 5.0, d_damping: 0.8, r_droop: 0.05, tau_g: 0.2, tau_t: 0.5, f_nominal: 60.0, s_base: 100.0 }
}

pub fn replay_scenario() -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/rts24_island.scenario");
    load_scenario(path).expect("bundled replay scenario")
}

/// `n` quadratic-cost units with staggered prices.
pub fn fleet(n: usize) -> Vec<GeneratorUnit> {
    (0..n)
        .map(|i| GeneratorUnit {
            id: format!("G{i}"),
            bus: i as u32 + 1,
            p_min: 0.0,
            p_max: 200.0,
            p_current: 100.0,
            cost_a: 0.0,
            cost_b: 10.0 + i as f64,
            cost_c: if i % 3 == 0 { 0.0 } else { 0.005 * (i % 5 + 1) as f64 },
            h_contribution: 4.0,
            online: true,
        })
        .collect()
}

pub fn curve(fleet: &[GeneratorUnit], sections: usize) -> IrCostCurve {
    let inputs = CurveInputs {
        measured_f_hz: 49.0,
        total_imbalance_mw: 0.8 * fleet.iter().map(GeneratorUnit::headroom).sum::<f64>(),
        fleet,
        params: case_params(),
        partition: Partition::EqualWidth { sections },
        emergency: EmergencySizing::default(),
        section_sizing: SectionSizing::Rule { rule: SizingPolicy::SteadyState },
        inertia_policy: InertiaPolicy::ProportionalToCommittedCapacity,
    };
    build_ir_cost_curve(&inputs).expect("benchmark curve").1
}

/// Deterministic bids from `aggregators` aggregators in every section.
pub fn bids(curve: &IrCostCurve, aggregators: u32) -> Vec<AggregatorBid> {
    let mut out = Vec::new();
    for s in &curve.sections {
        for g in 1..=aggregators {
            let spread = ((g as usize * 7919 + s.index_k * 104_729) % 1000) as f64 / 1000.0;
            out.push(AggregatorBid {
                aggregator_id: AggregatorId(g),
                section_k: s.index_k,
                price_per_mw: s.cost_per_mw * (0.5 + spread),
                capacity_mw: 1.0 + 5.0 * spread,
                speed_class: s.speed_class,
            });
        }
    }
    out
}

pub fn dynamics(c: &mut Criterion) {
    let model = build_state_space(case_params()).unwrap();
    c.bench_function("simulate_response 30 s @ 1 ms", |b| {
        b.iter(|| simulate_response(&model, black_box(0.671), 1e-3, 30.0).unwrap())
    });
    let trace = simulate_response(&model, 0.671, 1e-3, 30.0).unwrap();
    c.bench_function("transient_metrics 30k samples", |b| b.iter(|| transient_metrics(black_box(&trace), 0.05).unwrap()));
}

pub fn reserve(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_ir_cost_curve");
    for n in [10, 100, 1000] {
        let units = fleet(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &units, |b, units| b.iter(|| curve(units, 8)));
    }
    group.finish();
}

pub fn market(c: &mut Criterion) {
    let units = fleet(50);
    let mut group = c.benchmark_group("clear_market");
    for aggregators in [2, 20, 200] {
        let cv = curve(&units, 8);
        let bid_list = bids(&cv, aggregators);
        group.bench_with_input(BenchmarkId::from_parameter(aggregators), &bid_list, |b, bid_list| {
            b.iter(|| {
                let (book, _) = validate_bids(bid_list, &cv);
                clear_market(&cv, &book)
            })
        });
    }
    group.finish();
}

pub fn end_to_end(c: &mut Criterion) {
    let sc = replay_scenario();
    c.bench_function("run_pipeline replay", |b| b.iter(|| run_pipeline(black_box(&sc)).unwrap()));
}
