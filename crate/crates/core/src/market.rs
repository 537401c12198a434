//! Pay-as-bid demand-response market against the GENCO's IR cost curve.
//!
//! Each section of the curve is cleared on its own. Aggregator offers are
//! taken in ascending price order while they undercut the section's
//! C_k^IR; whatever is left is self-supplied by the GENCO at C_k^IR. Every
//! winner is paid its own offer.

use crate::reserve::{IrCostCurve, ReserveSection, SpeedClass};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Awards smaller than this are treated as zero.
const QUANTITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AggregatorId(pub u32);

impl fmt::Display for AggregatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DRA{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Supplier {
    Genco,
    Aggregator(AggregatorId),
}

impl fmt::Display for Supplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Supplier::Genco => f.write_str("GENCO"),
            Supplier::Aggregator(id) => id.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorBid {
    pub aggregator_id: AggregatorId,
    pub section_k: usize,
    pub price_per_mw: f64,
    pub capacity_mw: f64,
    pub speed_class: SpeedClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    SectionOutOfRange { sections: usize },
    SpeedClassMismatch { section_class: SpeedClass },
    InvalidPrice,
    InvalidCapacity,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SectionOutOfRange { sections } => write!(f, "section index outside 1..={sections}"),
            Self::SpeedClassMismatch { section_class } => {
                write!(f, "not eligible: section is {section_class}-class")
            }
            Self::InvalidPrice => f.write_str("price must be finite and >= 0"),
            Self::InvalidCapacity => f.write_str("capacity must be finite and > 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedBid {
    pub bid: AggregatorBid,
    pub reason: RejectReason,
}

/// Accepted bids grouped per section (index 0 is section 1), each group
/// sorted by ascending price then aggregator id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BidBook {
    pub sections: Vec<Vec<AggregatorBid>>,
}

impl BidBook {
    pub fn aggregators(&self) -> impl Iterator<Item = AggregatorId> + '_ {
        self.sections.iter().flatten().map(|b| b.aggregator_id)
    }
}

fn bid_order(a: &AggregatorBid, b: &AggregatorBid) -> std::cmp::Ordering {
    a.price_per_mw.total_cmp(&b.price_per_mw).then(a.aggregator_id.cmp(&b.aggregator_id))
}

/// Splits `bids` into a per-section book and a list of rejections.
pub fn validate_bids(bids: &[AggregatorBid], curve: &IrCostCurve) -> (BidBook, Vec<RejectedBid>) {
    let n = curve.sections.len();
    let mut book = BidBook { sections: vec![Vec::new(); n] };
    let mut rejected = Vec::new();
    for bid in bids {
        let reason = match curve.section(bid.section_k) {
            None => Some(RejectReason::SectionOutOfRange { sections: n }),
            Some(s) if s.speed_class != bid.speed_class => {
                Some(RejectReason::SpeedClassMismatch { section_class: s.speed_class })
            }
            Some(_) if !(bid.price_per_mw.is_finite() && bid.price_per_mw >= 0.0) => {
                Some(RejectReason::InvalidPrice)
            }
            Some(_) if !(bid.capacity_mw.is_finite() && bid.capacity_mw > 0.0) => {
                Some(RejectReason::InvalidCapacity)
            }
            Some(_) => None,
        };
        match reason {
            Some(reason) => rejected.push(RejectedBid { bid: bid.clone(), reason }),
            None => book.sections[bid.section_k - 1].push(bid.clone()),
        }
    }
    for group in &mut book.sections {
        group.sort_by(bid_order);
    }
    (book, rejected)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Award {
    pub section_k: usize,
    pub supplier: Supplier,
    pub quantity_mw: f64,
    pub price_per_mw: f64,
}

impl Award {
    pub fn payment(&self) -> f64 {
        self.quantity_mw * self.price_per_mw
    }
}

/// Clears one section. `section_bids` must already be sorted and eligible.
pub fn clear_section(section: &ReserveSection, section_bids: &[AggregatorBid]) -> Vec<Award> {
    let mut awards = Vec::new();
    let mut remaining = section.delta_p_mw;
    for bid in section_bids {
        if remaining <= QUANTITY_EPS {
            break;
        }
        // Ties with the GENCO price go to the GENCO.
        if bid.price_per_mw >= section.cost_per_mw {
            break;
        }
        let q = remaining.min(bid.capacity_mw);
        awards.push(Award {
            section_k: section.index_k,
            supplier: Supplier::Aggregator(bid.aggregator_id),
            quantity_mw: q,
            price_per_mw: bid.price_per_mw,
        });
        remaining -= q;
    }
    if remaining > QUANTITY_EPS {
        awards.push(Award {
            section_k: section.index_k,
            supplier: Supplier::Genco,
            quantity_mw: remaining,
            price_per_mw: section.cost_per_mw,
        });
    }
    awards
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Settlement {
    /// GENCO / utility profit: avoided self-supply cost minus DR payments.
    pub utility_profit: f64,
    pub aggregator_profit: BTreeMap<AggregatorId, f64>,
    pub total_aggregator_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketResult {
    pub awards: Vec<Award>,
    /// Δq_k: DR shed per section (aggregator awards only), keyed by k.
    pub per_section_shed_mw: BTreeMap<usize, f64>,
    /// MW the GENCO self-supplies per section.
    pub per_section_genco_mw: BTreeMap<usize, f64>,
    pub settlement: Settlement,
}

impl MarketResult {
    pub fn shed_by(&self, id: AggregatorId) -> f64 {
        self.awards
            .iter()
            .filter(|a| a.supplier == Supplier::Aggregator(id))
            .map(|a| a.quantity_mw)
            .sum()
    }

    pub fn total_shed_mw(&self) -> f64 {
        self.per_section_shed_mw.values().sum()
    }

    /// Everything paid to any supplier, GENCO self-supply included at C_k^IR.
    pub fn total_payment(&self) -> f64 {
        self.awards.iter().map(Award::payment).sum()
    }
}

pub fn clear_market(curve: &IrCostCurve, book: &BidBook) -> MarketResult {
    let mut awards = Vec::new();
    let mut per_section_shed_mw = BTreeMap::new();
    let mut per_section_genco_mw = BTreeMap::new();
    for (i, section) in curve.sections.iter().enumerate() {
        let bids = book.sections.get(i).map(Vec::as_slice).unwrap_or(&[]);
        let cleared = clear_section(section, bids);
        let (mut shed, mut genco) = (0.0, 0.0);
        for a in &cleared {
            match a.supplier {
                Supplier::Genco => genco += a.quantity_mw,
                Supplier::Aggregator(_) => shed += a.quantity_mw,
            }
        }
        per_section_shed_mw.insert(section.index_k, shed);
        per_section_genco_mw.insert(section.index_k, genco);
        awards.extend(cleared);
    }
    let mut result = MarketResult {
        awards,
        per_section_shed_mw,
        per_section_genco_mw,
        settlement: Settlement::default(),
    };
    result.settlement = compute_profits(&result, curve, book.aggregators());
    result
}

/// Aggregator, total-aggregator and utility profits of a cleared market.
///
/// `participants` lists aggregators to report even when they won nothing.
pub fn compute_profits(
    result: &MarketResult,
    curve: &IrCostCurve,
    participants: impl IntoIterator<Item = AggregatorId>,
) -> Settlement {
    let mut aggregator_profit: BTreeMap<AggregatorId, f64> =
        participants.into_iter().map(|id| (id, 0.0)).collect();
    for award in &result.awards {
        if let Supplier::Aggregator(id) = award.supplier {
            *aggregator_profit.entry(id).or_insert(0.0) += award.payment();
        }
    }
    let total_aggregator_profit: f64 = aggregator_profit.values().sum();
    let avoided_cost: f64 = curve
        .sections
        .iter()
        .map(|s| result.per_section_shed_mw.get(&s.index_k).copied().unwrap_or(0.0) * s.cost_per_mw)
        .sum();
    Settlement {
        utility_profit: avoided_cost - total_aggregator_profit,
        aggregator_profit,
        total_aggregator_profit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GridParams;

    fn section(k: usize, mw: f64, cost: f64, class: SpeedClass) -> ReserveSection {
        ReserveSection {
            index_k: k,
            f_low: 57.0,
            f_high: 58.5,
            delta_p_mw: mw,
            cost_per_mw: cost,
            speed_class: class,
            delivery_deadline_s: None,
        }
    }

    fn curve(sections: Vec<ReserveSection>) -> IrCostCurve {
        let total = sections.iter().map(|s| s.delta_p_mw).sum();
        let p = GridParams {
            h_inertia: 5.0,
            d_damping: 0.8,
            r_droop: 0.05,
            tau_g: 0.2,
            tau_t: 0.5,
            f_nominal: 60.0,
            s_base: 100.0,
        };
        IrCostCurve {
            emergency_reserve_mw: 0.0,
            emergency_deadline_s: 0.16,
            emergency_cost_per_mw: 0.0,
            params_per_section: vec![p; sections.len()],
            sections,
            total_imbalance_mw: total,
        }
    }

    fn bid(id: u32, k: usize, price: f64, cap: f64, class: SpeedClass) -> AggregatorBid {
        AggregatorBid { aggregator_id: AggregatorId(id), section_k: k, price_per_mw: price, capacity_mw: cap, speed_class: class }
    }

    use SpeedClass::{Fast, Slow};

    #[test]
    fn ineligible_and_malformed_bids_are_rejected() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast), section(2, 10.0, 25.0, Slow)]);
        let bids = [
            bid(1, 2, 10.0, 5.0, Fast),
            bid(1, 3, 10.0, 5.0, Slow),
            bid(2, 1, f64::NAN, 5.0, Fast),
            bid(2, 1, 10.0, 0.0, Fast),
            bid(2, 1, 10.0, 5.0, Fast),
        ];
        let (book, rejected) = validate_bids(&bids, &c);
        assert_eq!(book.sections[0].len(), 1);
        assert!(book.sections[1].is_empty());
        let reasons: Vec<_> = rejected.iter().map(|r| r.reason.clone()).collect();
        assert_eq!(
            reasons,
            [
                RejectReason::SpeedClassMismatch { section_class: Slow },
                RejectReason::SectionOutOfRange { sections: 2 },
                RejectReason::InvalidPrice,
                RejectReason::InvalidCapacity,
            ]
        );
    }

    #[test]
    fn empty_bid_list_gives_empty_book() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast)]);
        let (book, rejected) = validate_bids(&[], &c);
        assert!(rejected.is_empty());
        assert!(book.sections.iter().all(Vec::is_empty));
        let r = clear_market(&c, &book);
        assert_eq!(r.awards.len(), 1);
        assert_eq!(r.awards[0].supplier, Supplier::Genco);
    }

    #[test]
    fn price_ties_break_by_lower_id_for_every_input_order() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast)]);
        let bids = [bid(2, 1, 20.0, 3.0, Fast), bid(1, 1, 20.0, 3.0, Fast), bid(3, 1, 19.0, 3.0, Fast)];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            let shuffled: Vec<_> = p.iter().map(|&i| bids[i].clone()).collect();
            let (book, _) = validate_bids(&shuffled, &c);
            let ids: Vec<u32> = book.sections[0].iter().map(|b| b.aggregator_id.0).collect();
            assert_eq!(ids, [3, 1, 2]);
        }
    }

    #[test]
    fn cheapest_bids_fill_first_pay_as_bid() {
        let s = section(1, 10.0, 25.0, Fast);
        let awards = clear_section(&s, &[bid(1, 1, 20.0, 6.0, Fast), bid(2, 1, 22.0, 10.0, Fast)]);
        assert_eq!(awards.len(), 2);
        assert_eq!((awards[0].supplier, awards[0].quantity_mw, awards[0].price_per_mw), (Supplier::Aggregator(AggregatorId(1)), 6.0, 20.0));
        assert_eq!((awards[1].supplier, awards[1].quantity_mw, awards[1].price_per_mw), (Supplier::Aggregator(AggregatorId(2)), 4.0, 22.0));
    }

    #[test]
    fn no_bids_means_genco_backstop() {
        let awards = clear_section(&section(1, 10.0, 25.0, Fast), &[]);
        assert_eq!(awards, [Award { section_k: 1, supplier: Supplier::Genco, quantity_mw: 10.0, price_per_mw: 25.0 }]);
    }

    #[test]
    fn bid_at_genco_price_loses() {
        let awards = clear_section(&section(1, 10.0, 25.0, Fast), &[bid(1, 1, 25.0, 50.0, Fast)]);
        assert_eq!(awards.len(), 1);
        assert_eq!(awards[0].supplier, Supplier::Genco);
    }

    #[test]
    fn settlement_of_two_winner_section() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast)]);
        let (book, _) = validate_bids(&[bid(1, 1, 20.0, 6.0, Fast), bid(2, 1, 22.0, 10.0, Fast)], &c);
        let r = clear_market(&c, &book);
        let s = &r.settlement;
        assert_eq!(s.aggregator_profit[&AggregatorId(1)], 120.0);
        assert_eq!(s.aggregator_profit[&AggregatorId(2)], 88.0);
        assert_eq!(s.total_aggregator_profit, 208.0);
        assert_eq!(s.utility_profit, 42.0);
    }

    #[test]
    fn empty_awards_settle_to_zero() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast)]);
        let r = MarketResult {
            awards: vec![],
            per_section_shed_mw: BTreeMap::new(),
            per_section_genco_mw: BTreeMap::new(),
            settlement: Settlement::default(),
        };
        let s = compute_profits(&r, &c, []);
        assert_eq!(s, Settlement::default());
    }

    #[test]
    fn all_bids_above_cost_leave_genco_supplying() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast), section(2, 5.0, 30.0, Slow)]);
        let (book, _) = validate_bids(&[bid(1, 1, 26.0, 20.0, Fast), bid(2, 2, 31.0, 20.0, Slow)], &c);
        let r = clear_market(&c, &book);
        assert_eq!(r.settlement.total_aggregator_profit, 0.0);
        assert_eq!(r.settlement.utility_profit, 0.0);
        assert_eq!(r.total_shed_mw(), 0.0);
        assert_eq!(r.settlement.aggregator_profit.len(), 2);
    }

    #[test]
    fn single_cheap_aggregator_takes_everything() {
        let c = curve(vec![section(1, 10.0, 25.0, Fast), section(2, 5.0, 30.0, Slow)]);
        let (book, _) = validate_bids(&[bid(1, 1, 5.0, 100.0, Fast), bid(1, 2, 5.0, 100.0, Slow)], &c);
        let r = clear_market(&c, &book);
        assert_eq!(r.shed_by(AggregatorId(1)), 15.0);
        assert!(r.per_section_genco_mw.values().all(|&q| q == 0.0));
    }

    #[test]
    fn supplier_labels() {
        assert_eq!(Supplier::Genco.to_string(), "GENCO");
        assert_eq!(Supplier::Aggregator(AggregatorId(2)).to_string(), "DRA2");
    }
}
