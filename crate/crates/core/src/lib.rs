//! Islanded-microgrid frequency regulation with demand response.
//!
//! The crate covers the whole chain from noticing that the microgrid has
//! islanded to settling the demand-response market that restores its
//! frequency:
//!
//! * [`detection`]: parallel-impedance-arm current sensing and the coordinator
//!   that acts on it.
//! * [`dynamics`]: load-frequency model, step responses and transient metrics.
//! * [`reserve`]: the GENCO's islanding-reserve cost curve built by
//!   merit-order dispatch.
//! * [`market`]: pay-as-bid clearing of aggregator offers and settlement.
//! * [`harness`]: scenario files, the end-to-end pipeline and report files.

pub mod detection;
pub mod dynamics;
pub mod harness;
pub mod market;
pub mod reserve;

pub use dynamics::{FrequencyTrace, GridParams, InertiaPolicy, StateSpaceModel, TransientMetrics};
pub use market::{AggregatorBid, AggregatorId, Award, MarketResult, Settlement, Supplier};
pub use reserve::{BranchDecision, GeneratorUnit, IrCostCurve, ReserveSection, SpeedClass};
