//! Islanding-reserve (IR) cost curve of the island's GENCO.
//!
//! After islanding the GENCO first decides whether an emergency reserve is
//! needed (frequency dip deeper than 3 Hz must be pulled back to 57 Hz
//! within 160 ms), then splits the remaining 57–60 Hz recovery into sections,
//! sizes the power each section needs and prices it at the GENCO's own cost
//! of supplying it. The result is the curve demand-response aggregators bid
//! against.
//!
//! Band limits are expressed relative to nominal frequency, so a 60 Hz
//! system uses 57 / 58.5 / 60 Hz.

use crate::dynamics::{self, DynamicsError, GridParams, InertiaPolicy};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Dip beyond which the emergency branch is taken, in Hz.
pub const EMERGENCY_OVERSHOOT_HZ: f64 = 3.0;
/// Deadline for the emergency reserve, in seconds.
pub const EMERGENCY_DEADLINE_S: f64 = 0.160;
/// Delivery deadline for fast-class DR, in seconds.
pub const FAST_DEADLINE_S: f64 = 300.0;
/// Offset of the fast/slow class boundary below nominal, in Hz.
pub const CLASS_BOUNDARY_OFFSET_HZ: f64 = 1.5;

const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReserveError {
    #[error("measured frequency {measured} Hz is not below nominal {nominal} Hz; over-frequency islanding is not handled")]
    OverFrequency { measured: f64, nominal: f64 },
    #[error("invalid reserve input `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("emergency sizing requested on the dr_only branch")]
    BranchMismatch,
    #[error("at least 2 sections are required, got {0}")]
    TooFewSections(usize),
    #[error("bad section boundaries: {0}")]
    BadBoundary(String),
    #[error("sections span no frequency band")]
    ZeroBand,
    #[error("insufficient reserve: fleet headroom {headroom_mw} MW, required {required_mw} MW (short {shortfall_mw} MW)")]
    InsufficientReserve { headroom_mw: f64, required_mw: f64, shortfall_mw: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

pub type Result<T> = std::result::Result<T, ReserveError>;

fn invalid(field: &'static str, reason: impl Into<String>) -> ReserveError {
    ReserveError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorUnit {
    pub id: String,
    #[serde(default)]
    pub bus: u32,
    pub p_min: f64,
    pub p_max: f64,
    pub p_current: f64,
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub h_contribution: f64,
    pub online: bool,
}

impl GeneratorUnit {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_min", self.p_min),
            ("p_max", self.p_max),
            ("p_current", self.p_current),
            ("cost_a", self.cost_a),
            ("cost_b", self.cost_b),
            ("cost_c", self.cost_c),
            ("h_contribution", self.h_contribution),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, format!("unit {}: non-finite value", self.id)));
            }
        }
        if self.cost_c < 0.0 {
            return Err(invalid("cost_c", format!("unit {}: cost must be convex", self.id)));
        }
        if self.p_min > self.p_max {
            return Err(invalid("p_min", format!("unit {}: p_min > p_max", self.id)));
        }
        if self.online && !(self.p_min <= self.p_current && self.p_current <= self.p_max) {
            return Err(invalid(
                "p_current",
                format!("unit {}: {} outside [{}, {}]", self.id, self.p_current, self.p_min, self.p_max),
            ));
        }
        if self.h_contribution < 0.0 {
            return Err(invalid("h_contribution", format!("unit {}: negative", self.id)));
        }
        Ok(())
    }

    pub fn marginal_cost(&self, p: f64) -> f64 {
        self.cost_b + 2.0 * self.cost_c * p
    }

    pub fn headroom(&self) -> f64 {
        if self.online {
            (self.p_max - self.p_current).max(0.0)
        } else {
            0.0
        }
    }
}

/// Speed class of a reserve section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedClass {
    Fast,
    Slow,
}

impl fmt::Display for SpeedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpeedClass::Fast => "fast",
            SpeedClass::Slow => "slow",
        })
    }
}

impl FromStr for SpeedClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(SpeedClass::Fast),
            "slow" => Ok(SpeedClass::Slow),
            other => Err(format!("unknown speed class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveSection {
    /// 1-based section index.
    pub index_k: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub delta_p_mw: f64,
    /// C_k^IR in $/MW.
    pub cost_per_mw: f64,
    pub speed_class: SpeedClass,
    /// `None` for slow sections, which carry no delivery deadline.
    pub delivery_deadline_s: Option<f64>,
}

impl ReserveSection {
    pub fn width_hz(&self) -> f64 {
        self.f_high - self.f_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrCostCurve {
    pub emergency_reserve_mw: f64,
    /// Emergency deadline; only meaningful when the emergency branch ran.
    pub emergency_deadline_s: f64,
    pub emergency_cost_per_mw: f64,
    pub sections: Vec<ReserveSection>,
    pub total_imbalance_mw: f64,
    /// Grid parameters in force while each section is delivered.
    pub params_per_section: Vec<GridParams>,
}

impl IrCostCurve {
    pub fn dr_budget_mw(&self) -> f64 {
        self.sections.iter().map(|s| s.delta_p_mw).sum()
    }

    pub fn class_total_mw(&self, class: SpeedClass) -> f64 {
        self.sections.iter().filter(|s| s.speed_class == class).map(|s| s.delta_p_mw).sum()
    }

    pub fn section(&self, k: usize) -> Option<&ReserveSection> {
        k.checked_sub(1).and_then(|i| self.sections.get(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    EmergencyThenDr,
    DrOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchDecision {
    pub branch: Branch,
    pub measured_f_hz: f64,
    pub overshoot_hz: f64,
    pub f_nominal: f64,
}

/// Classifies an under-frequency event by its dip below nominal.
/// A dip of exactly 3 Hz stays on the DR-only branch.
pub fn select_branch(measured_f_hz: f64, f_nominal: f64) -> Result<BranchDecision> {
    if !(measured_f_hz.is_finite() && measured_f_hz > 0.0) {
        return Err(invalid("measured_f_hz", format!("must be > 0, got {measured_f_hz}")));
    }
    if measured_f_hz >= f_nominal {
        return Err(ReserveError::OverFrequency { measured: measured_f_hz, nominal: f_nominal });
    }
    let overshoot_hz = f_nominal - measured_f_hz;
    let branch = if overshoot_hz > EMERGENCY_OVERSHOOT_HZ {
        Branch::EmergencyThenDr
    } else {
        Branch::DrOnly
    };
    Ok(BranchDecision { branch, measured_f_hz, overshoot_hz, f_nominal })
}

/// How required power is derived from a frequency recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizingPolicy {
    /// Invert the static gain: ΔP = (Δf / f0)·(D + 1/R)·S_base.
    #[default]
    SteadyState,
    /// Size against the transient peak: ΔP = (Δf / f0) / peak·S_base,
    /// where `peak` is the unit-step peak for the section's parameters.
    TransientPeak,
}

/// Power needed to move the frequency by `delta_f_hz` under `policy`.
pub fn power_for_recovery(params: &GridParams, delta_f_hz: f64, policy: SizingPolicy) -> Result<f64> {
    let pu = delta_f_hz / params.f_nominal;
    let gain = match policy {
        SizingPolicy::SteadyState => params.stiffness(),
        SizingPolicy::TransientPeak => 1.0 / dynamics::unit_step_peak(params)?,
    };
    Ok(pu * gain * params.s_base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmergencySizing {
    Rule(SizingPolicy),
    Explicit(f64),
}

impl Default for EmergencySizing {
    fn default() -> Self {
        EmergencySizing::Rule(SizingPolicy::SteadyState)
    }
}

/// MW the GENCO commits within 160 ms to lift the frequency to the DR band floor.
pub fn size_emergency_reserve(
    decision: &BranchDecision,
    total_imbalance_mw: f64,
    params: &GridParams,
    sizing: EmergencySizing,
) -> Result<f64> {
    if decision.branch != Branch::EmergencyThenDr {
        return Err(ReserveError::BranchMismatch);
    }
    if !(total_imbalance_mw.is_finite() && total_imbalance_mw > 0.0) {
        return Err(invalid("total_imbalance_mw", format!("must be > 0, got {total_imbalance_mw}")));
    }
    params.check()?;
    match sizing {
        EmergencySizing::Explicit(mw) => {
            if !(mw.is_finite() && mw >= 0.0 && mw <= total_imbalance_mw) {
                return Err(invalid(
                    "emergency_explicit_mw",
                    format!("must lie in [0, {total_imbalance_mw}], got {mw}"),
                ));
            }
            Ok(mw)
        }
        EmergencySizing::Rule(policy) => {
            let floor = band_floor(decision.f_nominal);
            let gap = (floor - decision.measured_f_hz).max(0.0);
            let mw = power_for_recovery(params, gap, policy)?;
            Ok(mw.clamp(0.0, total_imbalance_mw))
        }
    }
}

pub fn band_floor(f_nominal: f64) -> f64 {
    f_nominal - EMERGENCY_OVERSHOOT_HZ
}

pub fn class_boundary(f_nominal: f64) -> f64 {
    f_nominal - CLASS_BOUNDARY_OFFSET_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Partition {
    /// `sections` split between the fast and slow sub-bands (fast gets the
    /// extra one when odd), each sub-band divided evenly.
    EqualWidth { sections: usize },
    /// Boundaries from band floor to nominal; the class boundary is inserted
    /// when missing.
    ExplicitBoundaries { boundaries: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSlice {
    pub f_low: f64,
    pub f_high: f64,
    pub speed_class: SpeedClass,
}

fn even_split(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
        .collect()
}

pub fn partition_band(partition: &Partition, f_nominal: f64) -> Result<Vec<BandSlice>> {
    let floor = band_floor(f_nominal);
    let mid = class_boundary(f_nominal);
    let edges: Vec<f64> = match partition {
        Partition::EqualWidth { sections } => {
            let m = *sections;
            if m < 2 {
                return Err(ReserveError::TooFewSections(m));
            }
            let fast = m.div_ceil(2);
            let mut edges = even_split(floor, mid, fast);
            edges.extend(even_split(mid, f_nominal, m - fast).into_iter().skip(1));
            edges
        }
        Partition::ExplicitBoundaries { boundaries } => {
            if boundaries.len() < 2 {
                return Err(ReserveError::BadBoundary("need at least two boundaries".into()));
            }
            if let Some(b) = boundaries.iter().find(|b| !b.is_finite()) {
                return Err(ReserveError::BadBoundary(format!("non-finite boundary {b}")));
            }
            if boundaries.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ReserveError::BadBoundary("boundaries must be strictly increasing".into()));
            }
            let first = boundaries[0];
            let last = boundaries[boundaries.len() - 1];
            if (first - floor).abs() > BOUNDARY_TOL || (last - f_nominal).abs() > BOUNDARY_TOL {
                return Err(ReserveError::BadBoundary(format!(
                    "must run from {floor} to {f_nominal} Hz, got {first}..{last}"
                )));
            }
            let mut edges = boundaries.clone();
            edges[0] = floor;
            *edges.last_mut().unwrap() = f_nominal;
            match edges.iter().position(|e| (e - mid).abs() <= BOUNDARY_TOL) {
                Some(i) => edges[i] = mid,
                None => {
                    let at = edges.partition_point(|e| *e < mid);
                    edges.insert(at, mid);
                }
            }
            if edges.len() < 3 {
                return Err(ReserveError::TooFewSections(edges.len() - 1));
            }
            edges
        }
    };

    Ok(edges
        .windows(2)
        .map(|w| BandSlice {
            f_low: w[0],
            f_high: w[1],
            speed_class: if w[1] <= mid { SpeedClass::Fast } else { SpeedClass::Slow },
        })
        .collect())
}

/// Per-section power sizing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SectionSizing {
    Rule { rule: SizingPolicy },
    /// Raw per-section MW supplied by the scenario (replay data); still
    /// normalized to the DR budget.
    Explicit { section_mw: Vec<f64> },
}

impl Default for SectionSizing {
    fn default() -> Self {
        SectionSizing::Rule { rule: SizingPolicy::SteadyState }
    }
}

/// Inertia bookkeeping used to update H as reserve is committed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaState {
    pub stored_energy_mws: f64,
    pub online_capacity_mw: f64,
    pub policy: InertiaPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizedSection {
    pub slice: BandSlice,
    pub delta_p_mw: f64,
    pub params: GridParams,
}

/// Sizes every slice and rescales so the sections exactly absorb `budget_mw`.
///
/// `inertia.online_capacity_mw` is the committed capacity before the first
/// section, i.e. after any emergency reserve has been dispatched.
pub fn required_power_per_section(
    slices: &[BandSlice],
    params: &GridParams,
    budget_mw: f64,
    inertia: InertiaState,
    sizing: &SectionSizing,
) -> Result<Vec<SizedSection>> {
    if !(budget_mw.is_finite() && budget_mw > 0.0) {
        return Err(invalid("total_dr_budget_mw", format!("must be > 0, got {budget_mw}")));
    }
    params.check()?;
    if slices.is_empty() {
        return Err(ReserveError::ZeroBand);
    }

    // H in force for each section, updated as earlier sections commit.
    let mut section_params = Vec::with_capacity(slices.len());
    let mut raw = Vec::with_capacity(slices.len());
    let mut energy = inertia.stored_energy_mws;
    let mut online = inertia.online_capacity_mw;
    let mut h = params.h_inertia;
    for (i, slice) in slices.iter().enumerate() {
        let p = params.with_inertia(h);
        let mw = match sizing {
            SectionSizing::Rule { rule } => power_for_recovery(&p, slice.f_high - slice.f_low, *rule)?,
            SectionSizing::Explicit { section_mw } => {
                if section_mw.len() != slices.len() {
                    return Err(invalid(
                        "section_mw",
                        format!("{} values for {} sections", section_mw.len(), slices.len()),
                    ));
                }
                let v = section_mw[i];
                if !(v.is_finite() && v > 0.0) {
                    return Err(invalid("section_mw", format!("section {}: must be > 0, got {v}", i + 1)));
                }
                v
            }
        };
        section_params.push(p);
        raw.push(mw);

        if inertia.policy == InertiaPolicy::ProportionalToCommittedCapacity {
            let next_h = dynamics::update_inertia(energy, online, mw, inertia.policy, params.s_base)?;
            energy = next_h * params.s_base;
            online += mw;
            h = next_h;
        }
    }

    let raw_total: f64 = raw.iter().sum();
    if !(raw_total > 0.0) {
        return Err(ReserveError::ZeroBand);
    }
    let scale = budget_mw / raw_total;
    let mut sized: Vec<SizedSection> = slices
        .iter()
        .zip(raw)
        .zip(section_params)
        .map(|((slice, mw), params)| SizedSection { slice: *slice, delta_p_mw: mw * scale, params })
        .collect();
    // Close the balance on the last section so Σ ΔP_k reproduces the budget.
    let head: f64 = sized[..sized.len() - 1].iter().map(|s| s.delta_p_mw).sum();
    let last = sized.last_mut().unwrap();
    last.delta_p_mw = budget_mw - head;
    if let Some(bad) = sized.iter().find(|s| !(s.delta_p_mw > 0.0)) {
        return Err(invalid("delta_p_mw", format!("non-positive section power {}", bad.delta_p_mw)));
    }
    Ok(sized)
}

/// One linear piece of the fleet's inverse supply curve: the marginal cost
/// moves from `cost_from` to `cost_to` while incremental output goes from
/// `q_from` to `q_to` MW above current dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SupplySegment {
    q_from: f64,
    q_to: f64,
    cost_from: f64,
    cost_to: f64,
}

/// Merit-order inverse supply curve over the fleet's online headroom.
fn supply_curve(fleet: &[GeneratorUnit]) -> Vec<SupplySegment> {
    let units: Vec<&GeneratorUnit> = fleet.iter().filter(|u| u.headroom() > 0.0).collect();

    let mut breakpoints: Vec<f64> = units
        .iter()
        .flat_map(|u| [u.marginal_cost(u.p_current), u.marginal_cost(u.p_max)])
        .collect();
    breakpoints.sort_by(|a, b| a.total_cmp(b));
    breakpoints.dedup();

    let mut segments = Vec::new();
    let mut q = 0.0;
    for (i, &lambda) in breakpoints.iter().enumerate() {
        // Flat-cost units become available all at once at their price.
        let flat: f64 = units
            .iter()
            .filter(|u| u.cost_c == 0.0 && u.cost_b == lambda)
            .map(|u| u.headroom())
            .sum();
        if flat > 0.0 {
            segments.push(SupplySegment { q_from: q, q_to: q + flat, cost_from: lambda, cost_to: lambda });
            q += flat;
        }
        // Rising-cost units whose marginal range covers the next interval.
        if let Some(&next) = breakpoints.get(i + 1) {
            let slope_inv: f64 = units
                .iter()
                .filter(|u| u.cost_c > 0.0)
                .filter(|u| u.marginal_cost(u.p_current) <= lambda && u.marginal_cost(u.p_max) >= next)
                .map(|u| 1.0 / (2.0 * u.cost_c))
                .sum();
            if slope_inv > 0.0 {
                let dq = (next - lambda) * slope_inv;
                segments.push(SupplySegment { q_from: q, q_to: q + dq, cost_from: lambda, cost_to: next });
                q += dq;
            }
        }
    }
    segments
}

/// Incremental cost of supplying the first `q` MW above current dispatch.
fn cost_up_to(segments: &[SupplySegment], q: f64) -> f64 {
    let mut total = 0.0;
    for s in segments {
        if q <= s.q_from {
            break;
        }
        let end = q.min(s.q_to);
        let width = s.q_to - s.q_from;
        let cost_at_end = if width > 0.0 {
            s.cost_from + (s.cost_to - s.cost_from) * (end - s.q_from) / width
        } else {
            s.cost_to
        };
        total += 0.5 * (s.cost_from + cost_at_end) * (end - s.q_from);
    }
    total
}

/// Online headroom of the fleet in MW.
pub fn fleet_headroom(fleet: &[GeneratorUnit]) -> f64 {
    fleet.iter().map(GeneratorUnit::headroom).sum()
}

/// Average incremental cost in $/MW of the slice
/// `[cumulative_mw_from, cumulative_mw_from + delta_mw]` of extra output,
/// with the fleet filled in ascending marginal-cost order.
pub fn dispatch_marginal_cost(
    fleet: &[GeneratorUnit],
    cumulative_mw_from: f64,
    delta_mw: f64,
) -> Result<f64> {
    if !(cumulative_mw_from.is_finite() && cumulative_mw_from >= 0.0) {
        return Err(invalid("cumulative_mw_from", format!("must be >= 0, got {cumulative_mw_from}")));
    }
    if !(delta_mw.is_finite() && delta_mw > 0.0) {
        return Err(invalid("delta_mw", format!("must be > 0, got {delta_mw}")));
    }
    for u in fleet {
        u.validate()?;
    }
    let headroom = fleet_headroom(fleet);
    let required = cumulative_mw_from + delta_mw;
    if required > headroom + 1e-9 {
        return Err(ReserveError::InsufficientReserve {
            headroom_mw: headroom,
            required_mw: required,
            shortfall_mw: required - headroom,
        });
    }
    let segments = supply_curve(fleet);
    let cost = cost_up_to(&segments, required) - cost_up_to(&segments, cumulative_mw_from);
    Ok(cost / delta_mw)
}

/// Everything the GENCO needs to assemble its curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveInputs<'a> {
    pub measured_f_hz: f64,
    pub total_imbalance_mw: f64,
    /// Post-event fleet: the lost unit already taken offline.
    pub fleet: &'a [GeneratorUnit],
    pub params: GridParams,
    pub partition: Partition,
    pub emergency: EmergencySizing,
    pub section_sizing: SectionSizing,
    pub inertia_policy: InertiaPolicy,
}

pub fn build_ir_cost_curve(inputs: &CurveInputs<'_>) -> Result<(BranchDecision, IrCostCurve)> {
    let p = &inputs.params;
    p.check()?;
    let total = inputs.total_imbalance_mw;
    if !(total.is_finite() && total > 0.0) {
        return Err(invalid("total_imbalance_mw", format!("must be > 0, got {total}")));
    }
    let headroom = fleet_headroom(inputs.fleet);
    if headroom + 1e-9 < total {
        return Err(ReserveError::InsufficientReserve {
            headroom_mw: headroom,
            required_mw: total,
            shortfall_mw: total - headroom,
        });
    }

    let decision = select_branch(inputs.measured_f_hz, p.f_nominal)?;
    let emergency_mw = match decision.branch {
        Branch::EmergencyThenDr => size_emergency_reserve(&decision, total, p, inputs.emergency)?,
        Branch::DrOnly => 0.0,
    };
    let emergency_cost_per_mw = if emergency_mw > 0.0 {
        dispatch_marginal_cost(inputs.fleet, 0.0, emergency_mw)?
    } else {
        0.0
    };

    let online: Vec<&GeneratorUnit> = inputs.fleet.iter().filter(|u| u.online).collect();
    let inertia = InertiaState {
        stored_energy_mws: p.h_inertia * p.s_base,
        online_capacity_mw: online.iter().map(|u| u.p_current).sum::<f64>() + emergency_mw,
        policy: inputs.inertia_policy,
    };
    let mut params = *p;
    if inputs.inertia_policy == InertiaPolicy::ProportionalToCommittedCapacity && emergency_mw > 0.0 {
        let before = inertia.online_capacity_mw - emergency_mw;
        params.h_inertia =
            dynamics::update_inertia(inertia.stored_energy_mws, before, emergency_mw, inertia.policy, p.s_base)?;
    }
    let inertia = InertiaState { stored_energy_mws: params.h_inertia * p.s_base, ..inertia };

    let slices = partition_band(&inputs.partition, p.f_nominal)?;
    let budget = total - emergency_mw;
    let sized = if budget > 0.0 {
        required_power_per_section(&slices, &params, budget, inertia, &inputs.section_sizing)?
    } else {
        Vec::new()
    };

    let mut sections = Vec::with_capacity(sized.len());
    let mut params_per_section = Vec::with_capacity(sized.len());
    let mut cumulative = emergency_mw;
    for (i, s) in sized.into_iter().enumerate() {
        let cost = dispatch_marginal_cost(inputs.fleet, cumulative, s.delta_p_mw)?;
        cumulative += s.delta_p_mw;
        sections.push(ReserveSection {
            index_k: i + 1,
            f_low: s.slice.f_low,
            f_high: s.slice.f_high,
            delta_p_mw: s.delta_p_mw,
            cost_per_mw: cost,
            speed_class: s.slice.speed_class,
            delivery_deadline_s: match s.slice.speed_class {
                SpeedClass::Fast => Some(FAST_DEADLINE_S),
                SpeedClass::Slow => None,
            },
        });
        params_per_section.push(s.params);
    }

    Ok((
        decision,
        IrCostCurve {
            emergency_reserve_mw: emergency_mw,
            emergency_deadline_s: EMERGENCY_DEADLINE_S,
            emergency_cost_per_mw,
            sections,
            total_imbalance_mw: total,
            params_per_section,
        },
    ))
}
