//! Independent oracles and random generators shared by the integration tests.
//!
//! Nothing here calls into the code path it is used to check.

#![allow(dead_code)]

use islanddr_core::dynamics::GridParams;
use islanddr_core::market::{AggregatorBid, AggregatorId};
use islanddr_core::reserve::{GeneratorUnit, ReserveSection, SpeedClass};
use islanddr_core::IrCostCurve;
use num_complex::Complex64;
use rand::Rng;
use std::path::PathBuf;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn case_params() -> GridParams {
    GridParams {
        h_inertia: 5.0,
        d_damping: 0.8,
        r_droop: 0.05,
        tau_g: 0.2,
        tau_t: 0.5,
        f_nominal: 60.0,
        s_base: 100.0,
    }
}

/// Roots of a real polynomial (highest power first) by Durand–Kerner.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[0];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let prev = roots.clone();
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let z = roots[i];
            roots[i] = z - eval(z) / denom;
        }
        let moved = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if moved < 1e-14 {
            break;
        }
    }
    roots
}

/// Closed-loop denominator expanded by direct polynomial multiplication.
pub fn denominator_by_hand(p: &GridParams) -> [f64; 4] {
    // (2H s + D) * (tg s + 1) * (tt s + 1) + 1/R
    let lag = [p.tau_g * p.tau_t, p.tau_g + p.tau_t, 1.0];
    let swing = [2.0 * p.h_inertia, p.d_damping];
    let mut out = [0.0; 4];
    for (i, a) in swing.iter().enumerate() {
        for (j, b) in lag.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out[3] += 1.0 / p.r_droop;
    out
}

/// Random plant parameters whose closed loop has all poles left of
/// `-min_decay`.
pub fn random_stable_params(rng: &mut impl Rng, min_decay: f64) -> GridParams {
    loop {
        let p = GridParams {
            h_inertia: rng.gen_range(2.0..10.0),
            d_damping: rng.gen_range(0.5..2.0),
            r_droop: rng.gen_range(0.03..0.1),
            tau_g: rng.gen_range(0.1..0.4),
            tau_t: rng.gen_range(0.3..0.8),
            f_nominal: if rng.gen_bool(0.5) { 50.0 } else { 60.0 },
            s_base: rng.gen_range(10.0..1000.0),
        };
        let worst = polynomial_roots(&denominator_by_hand(&p)).iter().map(|r| r.re).fold(f64::MIN, f64::max);
        if worst < -min_decay {
            return p;
        }
    }
}

/// Cheapest cost of supplying exactly `q` integer MW from flat-cost units,
/// by enumerating every integer allocation.
pub fn brute_force_fill_cost(prices: &[i64], headrooms: &[i64], q: i64) -> Option<i64> {
    fn rec(i: usize, left: i64, prices: &[i64], headrooms: &[i64]) -> Option<i64> {
        if i == prices.len() {
            return (left == 0).then_some(0);
        }
        let mut best: Option<i64> = None;
        for x in 0..=headrooms[i].min(left) {
            if let Some(rest) = rec(i + 1, left - x, prices, headrooms) {
                let c = x * prices[i] + rest;
                best = Some(best.map_or(c, |b: i64| b.min(c)));
            }
        }
        best
    }
    rec(0, q, prices, headrooms)
}

/// Minimum total pay-as-bid payment for one section over every integer
/// allocation of `demand` MW among `offers` (price, capacity), with the
/// remainder bought at `backstop`.
pub fn brute_force_section_payment(demand: i64, backstop: f64, offers: &[(f64, i64)]) -> f64 {
    fn rec(i: usize, left: i64, backstop: f64, offers: &[(f64, i64)]) -> f64 {
        if i == offers.len() {
            return left as f64 * backstop;
        }
        let (price, cap) = offers[i];
        (0..=cap.min(left))
            .map(|x| x as f64 * price + rec(i + 1, left - x, backstop, offers))
            .fold(f64::INFINITY, f64::min)
    }
    rec(0, demand, backstop, offers)
}

pub fn flat_unit(id: &str, price: f64, p_current: f64, p_max: f64) -> GeneratorUnit {
    GeneratorUnit {
        id: id.into(),
        bus: 1,
        p_min: 0.0,
        p_max,
        p_current,
        cost_a: 0.0,
        cost_b: price,
        cost_c: 0.0,
        h_contribution: 10.0,
        online: true,
    }
}

pub fn curve_from(sections: Vec<(f64, f64)>) -> IrCostCurve {
    let n = sections.len();
    let secs: Vec<ReserveSection> = sections
        .into_iter()
        .enumerate()
        .map(|(i, (mw, cost))| {
            let class = if i < n.div_ceil(2) { SpeedClass::Fast } else { SpeedClass::Slow };
            ReserveSection {
                index_k: i + 1,
                f_low: 57.0 + 3.0 * i as f64 / n as f64,
                f_high: 57.0 + 3.0 * (i + 1) as f64 / n as f64,
                delta_p_mw: mw,
                cost_per_mw: cost,
                speed_class: class,
                delivery_deadline_s: (class == SpeedClass::Fast).then_some(300.0),
            }
        })
        .collect();
    let total = secs.iter().map(|s| s.delta_p_mw).sum();
    IrCostCurve {
        emergency_reserve_mw: 0.0,
        emergency_deadline_s: 0.16,
        emergency_cost_per_mw: 0.0,
        params_per_section: vec![case_params(); secs.len()],
        sections: secs,
        total_imbalance_mw: total,
    }
}

/// Random curve and eligible bids; real-valued prices and quantities.
pub fn random_market(rng: &mut impl Rng) -> (IrCostCurve, Vec<AggregatorBid>) {
    let n_sections = rng.gen_range(1..=6);
    let curve = curve_from(
        (0..n_sections).map(|_| (rng.gen_range(0.5..80.0), rng.gen_range(5.0..120.0))).collect(),
    );
    let n_aggs = rng.gen_range(1..=5u32);
    let mut bids = Vec::new();
    for s in &curve.sections {
        for g in 1..=n_aggs {
            for _ in 0..rng.gen_range(0..=2) {
                bids.push(AggregatorBid {
                    aggregator_id: AggregatorId(g),
                    section_k: s.index_k,
                    price_per_mw: rng.gen_range(0.0..140.0),
                    capacity_mw: rng.gen_range(0.1..40.0),
                    speed_class: s.speed_class,
                });
            }
        }
    }
    (curve, bids)
}
