//! Synchronous bid/price rounds over a whole scenario, plus the regime
//! classification and oscillation diagnostics used to read the results.
//!
//! One iteration `n` is: every carrier consumes the bids of round `n` and
//! publishes a quote (price or stop); if all carriers stopped in this round
//! the run is over, otherwise every UE answers the quotes with the bids of
//! round `n + 1`. A carrier that stopped keeps quoting while others have not,
//! and resumes pricing if its bids move again.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::allocation::AllocationMatrix;
use crate::error::EngineError;
use crate::ids::{CarrierId, UeId};
use crate::protocol::{Bid, CarrierAgentState, PriceQuote, SolverLimits, UserAgentState};
use crate::scenario::Scenario;
use crate::utility::PriceCeiling;

/// Inflection demand at or below this fraction of capacity counts as abundant.
pub const ABUNDANT_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u64,
    /// Bids received by the carriers this round, sorted by (ue, carrier).
    pub bids: Vec<Bid>,
    /// One quote per carrier, sorted by carrier.
    pub quotes: Vec<PriceQuote>,
}

impl IterationRecord {
    pub fn quote(&self, carrier: CarrierId) -> Option<&PriceQuote> {
        self.quotes.iter().find(|q| q.carrier == carrier)
    }

    pub fn bid(&self, ue: UeId, carrier: CarrierId) -> Option<f64> {
        self.bids
            .iter()
            .find(|b| b.ue == ue && b.carrier == carrier)
            .map(|b| b.amount)
    }

    pub fn all_stopped(&self) -> bool {
        self.quotes.iter().all(|q| q.stop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    /// Final rates `w / p`; last-iterate rates when the run did not converge.
    pub allocation: AllocationMatrix,
    /// Last price published by each carrier.
    pub prices: BTreeMap<CarrierId, f64>,
    pub iterations_used: u64,
    pub converged: bool,
}

impl RunTrace {
    pub fn total_rate(&self, ue: UeId) -> f64 {
        self.allocation.total(ue)
    }

    pub fn price(&self, carrier: CarrierId) -> Option<f64> {
        self.prices.get(&carrier).copied()
    }

    /// Bid sequence of one (UE, carrier) pair over the whole run.
    pub fn bid_series(&self, ue: UeId, carrier: CarrierId) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.bid(ue, carrier)).collect()
    }

    /// Every (UE, carrier) pair that ever bid.
    pub fn pairs(&self) -> Vec<(UeId, CarrierId)> {
        self.records
            .first()
            .map(|r| r.bids.iter().map(|b| (b.ue, b.carrier)).collect())
            .unwrap_or_default()
    }
}

/// Runs the distributed iteration to convergence or `max_iterations`.
pub fn run(scenario: &Scenario) -> Result<RunTrace, EngineError> {
    scenario.validate()?;
    let settings = &scenario.settings;
    let limits = SolverLimits {
        rate_cap: scenario.total_capacity(),
        tol: settings.tol,
    };

    let mut ues: Vec<UserAgentState> = scenario
        .users
        .iter()
        .map(|u| {
            UserAgentState::new(u.id, u.utility, &u.coverage, settings.decay, settings.initial_bid, limits)
        })
        .collect();
    let mut carrier_ids = scenario.carrier_ids();
    carrier_ids.dedup();
    let mut carriers: Vec<CarrierAgentState> = carrier_ids
        .iter()
        .map(|&id| {
            let capacity = scenario.carrier(id).map(|c| c.capacity).unwrap_or_default();
            CarrierAgentState::new(id, capacity, &scenario.covered_users(id), settings.delta)
        })
        .collect();

    let mut bids: Vec<Bid> = ues.iter_mut().flat_map(|u| u.initial_bids()).collect();
    let mut records = Vec::new();
    let mut converged = false;

    for n in 1..=settings.max_iterations {
        let mut by_carrier: BTreeMap<CarrierId, Vec<Bid>> = BTreeMap::new();
        for b in &bids {
            by_carrier.entry(b.carrier).or_default().push(*b);
        }
        let quotes = carriers
            .iter_mut()
            .map(|c| {
                let received = by_carrier.remove(&c.carrier).unwrap_or_default();
                c.update(&received, n)
            })
            .collect::<Result<Vec<_>, _>>()?;

        bids.sort_by_key(|b| (b.ue, b.carrier));
        let record = IterationRecord {
            iteration: n,
            bids: std::mem::take(&mut bids),
            quotes,
        };
        let done = record.all_stopped();
        records.push(record);
        if done {
            converged = true;
            break;
        }
        if n == settings.max_iterations {
            break;
        }

        let quotes = &records.last().expect("just pushed").quotes;
        for ue in &mut ues {
            let in_range: Vec<PriceQuote> = quotes
                .iter()
                .filter(|q| ue.coverage.binary_search(&q.carrier).is_ok())
                .copied()
                .collect();
            bids.extend(ue.update(&in_range, n)?);
        }
    }

    let mut allocation = AllocationMatrix::new();
    let mut prices = BTreeMap::new();
    for c in &carriers {
        let rates = if converged {
            c.final_allocation()?
        } else {
            c.current_allocation()
        };
        for (ue, r) in rates {
            allocation.set(ue, c.carrier, r.value());
        }
        if let Some(p) = c.last_price() {
            prices.insert(c.carrier, p);
        }
    }

    Ok(RunTrace {
        iterations_used: records.len() as u64,
        records,
        allocation,
        prices,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Every carrier's covered inflection demand is at most half its capacity.
    Abundant,
    /// Some exclusive coverage class demands more than its carriers hold.
    Scarce,
    Borderline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarrierRegime {
    pub carrier: CarrierId,
    pub capacity: f64,
    /// Sum of inflection rates over the users this carrier covers.
    pub inflection_sum: f64,
    /// Steady-state price ceiling from the covered sigmoidal user with the
    /// largest ceiling; `None` when the carrier covers no sigmoidal user.
    pub price_ceiling: Option<PriceCeiling>,
}

/// Users whose coverage is exactly `carriers`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageClass {
    pub carriers: Vec<CarrierId>,
    pub users: Vec<UeId>,
    pub inflection_sum: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub carriers: Vec<CarrierRegime>,
    pub classes: Vec<CoverageClass>,
    pub regime: Regime,
}

impl RegimeReport {
    pub fn carrier(&self, id: CarrierId) -> Option<&CarrierRegime> {
        self.carriers.iter().find(|c| c.carrier == id)
    }
}

pub fn classify_regime(scenario: &Scenario) -> Result<RegimeReport, EngineError> {
    scenario.validate()?;

    let carriers: Vec<CarrierRegime> = scenario
        .carrier_ids()
        .into_iter()
        .map(|id| {
            let capacity = scenario.carrier(id).map(|c| c.capacity).unwrap_or_default();
            let covered: Vec<_> = scenario
                .users
                .iter()
                .filter(|u| u.coverage.contains(&id))
                .collect();
            let inflection_sum = covered.iter().map(|u| u.utility.inflection_rate().value()).sum();
            let price_ceiling = covered
                .iter()
                .filter_map(|u| u.utility.price_ceiling())
                .max_by(|x, y| x.larger().total_cmp(&y.larger()));
            CarrierRegime { carrier: id, capacity, inflection_sum, price_ceiling }
        })
        .collect();

    let mut by_coverage: BTreeMap<Vec<CarrierId>, Vec<UeId>> = BTreeMap::new();
    for u in &scenario.users {
        let set: BTreeSet<CarrierId> = u.coverage.iter().copied().collect();
        by_coverage.entry(set.into_iter().collect()).or_default().push(u.id);
    }
    let classes: Vec<CoverageClass> = by_coverage
        .into_iter()
        .map(|(set, users)| {
            let inflection_sum = users
                .iter()
                .filter_map(|&id| scenario.user(id))
                .map(|u| u.utility.inflection_rate().value())
                .sum();
            let capacity = set
                .iter()
                .filter_map(|&c| scenario.carrier(c))
                .map(|c| c.capacity)
                .sum();
            CoverageClass { carriers: set, users, inflection_sum, capacity }
        })
        .collect();

    let regime = if carriers
        .iter()
        .all(|c| c.inflection_sum <= ABUNDANT_FRACTION * c.capacity)
    {
        Regime::Abundant
    } else if classes.iter().any(|c| c.inflection_sum > c.capacity) {
        Regime::Scarce
    } else {
        Regime::Borderline
    };

    Ok(RegimeReport { carriers, classes, regime })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fluctuation {
    /// Largest `max - min` of any (UE, carrier) bid sequence over the window.
    pub amplitude: f64,
    /// Largest number of sign flips between successive bid changes of any pair.
    pub sign_alternations: usize,
    /// The pair with the largest amplitude.
    pub worst_pair: Option<(UeId, CarrierId)>,
}

/// Bid oscillation over the last `window` iterations; zero amplitude means the
/// bids did not move at all.
pub fn detect_fluctuation(trace: &RunTrace, window: usize) -> Result<Fluctuation, EngineError> {
    if window == 0 {
        return Err(EngineError::EmptyWindow);
    }
    if window > trace.records.len() {
        return Err(EngineError::WindowTooLarge { window, available: trace.records.len() });
    }
    let tail = &trace.records[trace.records.len() - window..];
    let mut out = Fluctuation { amplitude: 0.0, sign_alternations: 0, worst_pair: None };
    for (ue, carrier) in trace.pairs() {
        let series: Vec<f64> = tail.iter().filter_map(|r| r.bid(ue, carrier)).collect();
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        let amplitude = if series.is_empty() { 0.0 } else { hi - lo };
        if amplitude > out.amplitude || out.worst_pair.is_none() {
            out.amplitude = amplitude.max(out.amplitude);
            out.worst_pair = Some((ue, carrier));
        }
        let mut flips = 0;
        let mut last_sign = 0.0;
        for w in series.windows(2) {
            let d = w[1] - w[0];
            if d != 0.0 {
                let s = d.signum();
                if last_sign != 0.0 && s != last_sign {
                    flips += 1;
                }
                last_sign = s;
            }
        }
        out.sign_alternations = out.sign_alternations.max(flips);
    }
    Ok(out)
}
