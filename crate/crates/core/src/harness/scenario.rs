//! Scenario files.
//!
//! A scenario is a TOML document (`*.scenario`) that points at two CSV
//! side files: the generator fleet and the aggregator bids. Paths are
//! resolved relative to the scenario file.

use crate::detection::{CircuitScenario, CoordinatorMode, PiaConfig};
use crate::dynamics::{GridParams, InertiaPolicy, DEFAULT_SETTLING_BAND_HZ};
use crate::market::{AggregatorBid, AggregatorId};
use crate::reserve::{
    self, EmergencySizing, GeneratorUnit, Partition, SectionSizing, SizingPolicy, SpeedClass,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{}: {message}", line.map_or("?".to_string(), |l| l.to_string()))]
    Parse { path: PathBuf, line: Option<usize>, message: String },
    #[error("{path}: invalid `{field}`: {message}")]
    Validation { path: PathBuf, field: String, message: String },
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPolicy {
    #[default]
    EqualWidth,
    ExplicitBoundaries,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizingTag {
    #[default]
    SteadyState,
    TransientPeak,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReserveSpec {
    #[serde(default)]
    pub partition: PartitionPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_sections: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<Vec<f64>>,
    #[serde(default)]
    pub sizing_policy: SizingTag,
    /// Raw per-section MW, required when `sizing_policy = "explicit"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_mw: Option<Vec<f64>>,
    #[serde(default)]
    pub emergency_policy: SizingTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emergency_explicit_mw: Option<f64>,
    #[serde(default)]
    pub inertia_policy: InertiaPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_band")]
    pub settling_band_hz: f64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_t_end() -> f64 {
    30.0
}
fn default_band() -> f64 {
    DEFAULT_SETTLING_BAND_HZ
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { dt: default_dt(), t_end: default_t_end(), settling_band_hz: default_band() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSpec {
    #[serde(default)]
    pub mode: CoordinatorMode,
    pub pia: PiaConfig,
    pub circuit: CircuitScenario,
}

/// Declared response times used for deadline compliance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emergency_response_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genco_response_s: Option<f64>,
    /// Keyed by aggregator id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aggregator_response_s: BTreeMap<String, f64>,
}

impl TimingSpec {
    pub fn aggregator(&self, id: AggregatorId) -> Option<f64> {
        self.aggregator_response_s.get(&id.0.to_string()).copied()
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub fleet_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bids_file: Option<PathBuf>,
    pub lost_unit_id: String,
    pub lost_generation_mw: f64,
    pub measured_f_hz: f64,
    #[serde(default)]
    pub allow_nonstandard_nominal: bool,
    pub grid: GridParams,
    pub reserve: ReserveSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionSpec>,
    #[serde(default)]
    pub timing: TimingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidWarning {
    pub line: usize,
    pub bid: AggregatorBid,
    pub message: String,
}

/// A loaded scenario with its side files resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub path: PathBuf,
    /// Fleet as listed in the fleet file (lost unit still online).
    pub fleet: Vec<GeneratorUnit>,
    pub bids: Vec<AggregatorBid>,
    /// Bids that will be rejected by the market stage.
    pub bid_warnings: Vec<BidWarning>,
    fleet_sha: String,
    bids_sha: String,
}

fn validation(path: &Path, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { path: path.to_path_buf(), field: field.to_string(), message: message.into() }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ScenarioFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn partition(&self) -> std::result::Result<Partition, (&'static str, String)> {
        let r = &self.reserve;
        match r.partition {
            PartitionPolicy::EqualWidth => match r.m_sections {
                Some(sections) => Ok(Partition::EqualWidth { sections }),
                None => Err(("reserve.m_sections", "required for equal_width partition".into())),
            },
            PartitionPolicy::ExplicitBoundaries => match &r.boundaries {
                Some(b) => Ok(Partition::ExplicitBoundaries { boundaries: b.clone() }),
                None => Err(("reserve.boundaries", "required for explicit_boundaries partition".into())),
            },
        }
    }

    pub fn section_sizing(&self) -> std::result::Result<SectionSizing, (&'static str, String)> {
        let r = &self.reserve;
        Ok(match r.sizing_policy {
            SizingTag::SteadyState => SectionSizing::Rule { rule: SizingPolicy::SteadyState },
            SizingTag::TransientPeak => SectionSizing::Rule { rule: SizingPolicy::TransientPeak },
            SizingTag::Explicit => match &r.section_mw {
                Some(v) => SectionSizing::Explicit { section_mw: v.clone() },
                None => return Err(("reserve.section_mw", "required for explicit sizing".into())),
            },
        })
    }

    pub fn emergency_sizing(&self) -> std::result::Result<EmergencySizing, (&'static str, String)> {
        let r = &self.reserve;
        Ok(match r.emergency_policy {
            SizingTag::SteadyState => EmergencySizing::Rule(SizingPolicy::SteadyState),
            SizingTag::TransientPeak => EmergencySizing::Rule(SizingPolicy::TransientPeak),
            SizingTag::Explicit => match r.emergency_explicit_mw {
                Some(mw) => EmergencySizing::Explicit(mw),
                None => {
                    return Err(("reserve.emergency_explicit_mw", "required for explicit emergency sizing".into()))
                }
            },
        })
    }
}

#[derive(Debug, Deserialize)]
struct FleetRecord {
    id: String,
    bus: u32,
    p_min: f64,
    p_max: f64,
    p_current: f64,
    cost_a: f64,
    cost_b: f64,
    cost_c: f64,
    h_contribution: f64,
    online: bool,
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(bytes)
}

fn csv_error(path: &Path, e: csv::Error) -> ScenarioError {
    ScenarioError::Parse {
        path: path.to_path_buf(),
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
    }
}

pub fn parse_fleet(bytes: &[u8], path: &Path) -> Result<Vec<GeneratorUnit>> {
    let mut fleet = Vec::new();
    for rec in csv_reader(bytes).deserialize::<FleetRecord>() {
        let r = rec.map_err(|e| csv_error(path, e))?;
        let unit = GeneratorUnit {
            id: r.id,
            bus: r.bus,
            p_min: r.p_min,
            p_max: r.p_max,
            p_current: r.p_current,
            cost_a: r.cost_a,
            cost_b: r.cost_b,
            cost_c: r.cost_c,
            h_contribution: r.h_contribution,
            online: r.online,
        };
        unit.validate().map_err(|e| validation(path, "fleet", e.to_string()))?;
        fleet.push(unit);
    }
    if fleet.is_empty() {
        return Err(validation(path, "fleet", "no generator records"));
    }
    Ok(fleet)
}

#[derive(Debug, Deserialize)]
struct BidRecord {
    aggregator_id: u32,
    section_k: usize,
    price_per_mw: f64,
    capacity_mw: f64,
    speed_class: String,
}

/// Bids with their 1-based line numbers in the file.
pub fn parse_bids(bytes: &[u8], path: &Path) -> Result<Vec<(usize, AggregatorBid)>> {
    let mut rdr = csv_reader(bytes);
    let mut bids = Vec::new();
    for rec in rdr.deserialize::<BidRecord>() {
        let r = rec.map_err(|e| csv_error(path, e))?;
        let speed_class: SpeedClass =
            r.speed_class.parse().map_err(|m| validation(path, "speed_class", m))?;
        bids.push((
            0,
            AggregatorBid {
                aggregator_id: AggregatorId(r.aggregator_id),
                section_k: r.section_k,
                price_per_mw: r.price_per_mw,
                capacity_mw: r.capacity_mw,
                speed_class,
            },
        ));
    }
    // csv::Reader only reports positions on errors; recover them from the text.
    let text = String::from_utf8_lossy(bytes);
    let data_lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .skip(1)
        .map(|(i, _)| i + 1);
    for ((line, _), l) in bids.iter_mut().zip(data_lines) {
        *line = l;
    }
    Ok(bids)
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// SHA-256 over the canonical scenario document and both side files.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.file.to_toml().as_bytes());
        h.update(self.fleet_sha.as_bytes());
        h.update(self.bids_sha.as_bytes());
        hex::encode(h.finalize())
    }

    /// Fleet after the event: the lost unit is offline.
    pub fn post_event_fleet(&self) -> Vec<GeneratorUnit> {
        self.fleet
            .iter()
            .cloned()
            .map(|mut u| {
                if u.id == self.file.lost_unit_id {
                    u.online = false;
                }
                u
            })
            .collect()
    }

    /// Re-checks every cross-field invariant, e.g. after CLI overrides.
    pub fn revalidate(&mut self) -> Result<()> {
        let path = self.path.clone();
        validate_file(&self.file, &path)?;
        if !self.fleet.iter().any(|u| u.id == self.file.lost_unit_id) {
            return Err(validation(
                &path,
                "lost_unit_id",
                format!("unit `{}` not in fleet", self.file.lost_unit_id),
            ));
        }
        self.bid_warnings = bid_warnings(&self.file, &self.bids, &[]);
        Ok(())
    }
}

fn validate_file(f: &ScenarioFile, path: &Path) -> Result<()> {
    if f.schema_version != SCHEMA_VERSION {
        return Err(validation(
            path,
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", f.schema_version),
        ));
    }
    let grid = if f.allow_nonstandard_nominal { f.grid.check() } else { f.grid.check_standard_nominal() };
    grid.map_err(|e| match e {
        crate::dynamics::DynamicsError::InvalidParameter { field, reason } => {
            validation(path, &format!("grid.{field}"), reason)
        }
        other => validation(path, "grid", other.to_string()),
    })?;
    if !(f.lost_generation_mw.is_finite() && f.lost_generation_mw > 0.0) {
        return Err(validation(path, "lost_generation_mw", "must be > 0"));
    }
    if !(f.measured_f_hz.is_finite() && f.measured_f_hz > 0.0) {
        return Err(validation(path, "measured_f_hz", "must be > 0"));
    }
    let partition = f.partition().map_err(|(field, m)| validation(path, field, m))?;
    reserve::partition_band(&partition, f.grid.f_nominal)
        .map_err(|e| validation(path, "reserve.partition", e.to_string()))?;
    f.section_sizing().map_err(|(field, m)| validation(path, field, m))?;
    f.emergency_sizing().map_err(|(field, m)| validation(path, field, m))?;
    let sim = &f.simulation;
    for (field, v) in [
        ("simulation.dt", sim.dt),
        ("simulation.t_end", sim.t_end),
        ("simulation.settling_band_hz", sim.settling_band_hz),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(validation(path, field, "must be > 0"));
        }
    }
    if let Some(d) = &f.detection {
        d.pia.validate().map_err(|e| validation(path, "detection.pia", e.to_string()))?;
        d.circuit.validate().map_err(|e| validation(path, "detection.circuit", e.to_string()))?;
    }
    for (key, v) in &f.timing.aggregator_response_s {
        if key.parse::<u32>().is_err() {
            return Err(validation(path, "timing.aggregator_response_s", format!("key `{key}` is not an aggregator id")));
        }
        if !(v.is_finite() && *v >= 0.0) {
            return Err(validation(path, "timing.aggregator_response_s", format!("aggregator {key}: must be >= 0")));
        }
    }
    Ok(())
}

/// Flags bids that the market will reject, judged against the partition.
fn bid_warnings(f: &ScenarioFile, bids: &[AggregatorBid], lines: &[usize]) -> Vec<BidWarning> {
    let Ok(partition) = f.partition() else { return Vec::new() };
    let Ok(slices) = reserve::partition_band(&partition, f.grid.f_nominal) else { return Vec::new() };
    bids.iter()
        .enumerate()
        .filter_map(|(i, bid)| {
            let message = match slices.get(bid.section_k.wrapping_sub(1)) {
                None => format!("section {} outside 1..={}", bid.section_k, slices.len()),
                Some(s) if s.speed_class != bid.speed_class => {
                    format!("{} bid on {}-class section {}", bid.speed_class, s.speed_class, bid.section_k)
                }
                Some(_) if !(bid.price_per_mw.is_finite() && bid.price_per_mw >= 0.0) => {
                    "price must be finite and >= 0".to_string()
                }
                Some(_) if !(bid.capacity_mw.is_finite() && bid.capacity_mw > 0.0) => {
                    "capacity must be finite and > 0".to_string()
                }
                Some(_) => return None,
            };
            Some(BidWarning { line: lines.get(i).copied().unwrap_or(0), bid: bid.clone(), message })
        })
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        line: None,
        message: e.to_string(),
    })?;
    let file = ScenarioFile::parse(&text, path)?;
    validate_file(&file, path)?;

    let base = path.parent().unwrap_or(Path::new("."));
    let fleet_path = base.join(&file.fleet_file);
    let fleet_bytes = read(&fleet_path)?;
    let fleet = parse_fleet(&fleet_bytes, &fleet_path)?;
    if !fleet.iter().any(|u| u.id == file.lost_unit_id) {
        return Err(validation(path, "lost_unit_id", format!("unit `{}` not in fleet", file.lost_unit_id)));
    }

    let (bids, lines, bids_bytes) = match &file.bids_file {
        Some(p) => {
            let bids_path = base.join(p);
            let bytes = read(&bids_path)?;
            let parsed = parse_bids(&bytes, &bids_path)?;
            let (lines, bids) = parsed.into_iter().unzip();
            (bids, lines, bytes)
        }
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    let bid_warnings = bid_warnings(&file, &bids, &lines);

    Ok(Scenario {
        file,
        path: path.to_path_buf(),
        fleet,
        bids,
        bid_warnings,
        fleet_sha: sha_hex(&fleet_bytes),
        bids_sha: sha_hex(&bids_bytes),
    })
}
