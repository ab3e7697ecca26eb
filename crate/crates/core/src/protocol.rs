//! Message types and per-agent state transitions of the bid/price iteration.
//!
//! A UE receives one [`PriceQuote`] per in-range carrier, visits the carriers
//! cheapest first, and bids on each for the part of its demand not already
//! covered by a cheaper carrier. A carrier turns the bids it receives into a
//! shadow price `p = sum(w) / R`, or signals stop once no bid moved by `delta`
//! or more.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::ids::{CarrierId, UeId};
use crate::utility::{Rate, UtilityFunction};

/// Price published when a carrier receives only zero bids; the UE
/// subproblem needs a strictly positive price.
pub const PRICE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub ue: UeId,
    pub carrier: CarrierId,
    pub amount: f64,
    pub iteration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub carrier: CarrierId,
    pub price: f64,
    pub iteration: u64,
    pub stop: bool,
}

/// Cap on how far a bid may move between consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DecayPolicy {
    Off,
    /// `h1 * e^{-n/h2}`
    #[serde(alias = "exp")]
    Exponential { h1: f64, h2: f64 },
    /// `h3 / n`
    #[serde(alias = "rat")]
    Rational { h3: f64 },
}

impl Default for DecayPolicy {
    fn default() -> Self {
        DecayPolicy::Exponential { h1: 10.0, h2: 50.0 }
    }
}

impl DecayPolicy {
    /// Largest allowed bid change at iteration `n` (`n >= 1`); infinite when off.
    pub fn limit(&self, n: u64) -> f64 {
        let n = n.max(1) as f64;
        match *self {
            DecayPolicy::Off => f64::INFINITY,
            DecayPolicy::Exponential { h1, h2 } => h1 * (-n / h2).exp(),
            DecayPolicy::Rational { h3 } => h3 / n,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            DecayPolicy::Off => Ok(()),
            DecayPolicy::Exponential { h1, h2 } if ok(h1) && ok(h2) => Ok(()),
            DecayPolicy::Rational { h3 } if ok(h3) => Ok(()),
            other => Err(format!("decay parameters must be finite and > 0: {other}")),
        }
    }
}

impl fmt::Display for DecayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DecayPolicy::Off => write!(f, "off"),
            DecayPolicy::Exponential { h1, h2 } => write!(f, "exp:{h1},{h2}"),
            DecayPolicy::Rational { h3 } => write!(f, "rat:{h3}"),
        }
    }
}

/// Parses `off`, `exp:h1,h2` or `rat:h3`.
impl FromStr for DecayPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad decay parameter {v:?}: {e}"))
        };
        let policy = if s.eq_ignore_ascii_case("off") {
            DecayPolicy::Off
        } else if let Some(rest) = s.strip_prefix("exp:") {
            let (h1, h2) = rest
                .split_once(',')
                .ok_or_else(|| format!("expected exp:h1,h2, got {s:?}"))?;
            DecayPolicy::Exponential { h1: num(h1)?, h2: num(h2)? }
        } else if let Some(rest) = s.strip_prefix("rat:") {
            DecayPolicy::Rational { h3: num(rest)? }
        } else {
            return Err(format!("unknown decay policy {s:?} (use off, exp:h1,h2 or rat:h3)"));
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Limits of the UE's demand bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverLimits {
    /// Largest total rate a UE asks for; the scenario's total capacity.
    pub rate_cap: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserAgentState {
    pub ue: UeId,
    pub utility: UtilityFunction,
    /// In-range carriers, ascending and deduplicated.
    pub coverage: Vec<CarrierId>,
    /// Last bid sent to each in-range carrier.
    pub prev_bids: BTreeMap<CarrierId, f64>,
    pub decay: DecayPolicy,
    pub initial_bid: f64,
    pub limits: SolverLimits,
}

impl UserAgentState {
    pub fn new(
        ue: UeId,
        utility: UtilityFunction,
        coverage: &[CarrierId],
        decay: DecayPolicy,
        initial_bid: f64,
        limits: SolverLimits,
    ) -> Self {
        let mut coverage = coverage.to_vec();
        coverage.sort_unstable();
        coverage.dedup();
        let prev_bids = coverage.iter().map(|&c| (c, 0.0)).collect();
        UserAgentState {
            ue,
            utility,
            coverage,
            prev_bids,
            decay,
            initial_bid,
            limits,
        }
    }

    /// The opening bid `w(1)` to every in-range carrier.
    pub fn initial_bids(&mut self) -> Vec<Bid> {
        self.coverage
            .iter()
            .map(|&carrier| {
                self.prev_bids.insert(carrier, self.initial_bid);
                Bid {
                    ue: self.ue,
                    carrier,
                    amount: self.initial_bid,
                    iteration: 1,
                }
            })
            .collect()
    }

    /// Responds to the quotes of iteration `n` with one bid per in-range
    /// carrier for iteration `n + 1`, in ascending carrier order.
    ///
    /// Carriers are visited by ascending price (ties by carrier id). At the
    /// m-th cheapest price the UE solves for its total demand and bids for
    /// whatever exceeds the rate already requested from cheaper carriers.
    /// Each candidate bid is clamped to within the decay limit of the
    /// previous bid on the same carrier, and the rate counted as requested
    /// is the clamped one, so a shortfall on a cheap carrier spills over to
    /// the next.
    pub fn update(&mut self, quotes: &[PriceQuote], n: u64) -> Result<Vec<Bid>, ProtocolError> {
        let mut priced: Vec<(f64, CarrierId)> = Vec::with_capacity(self.coverage.len());
        for q in quotes {
            if self.coverage.binary_search(&q.carrier).is_err() {
                return Err(ProtocolError::UnexpectedQuote { ue: self.ue, carrier: q.carrier });
            }
            if !(q.price.is_finite() && q.price > 0.0) {
                return Err(ProtocolError::InvalidPrice { carrier: q.carrier, price: q.price });
            }
            priced.push((q.price, q.carrier));
        }
        for &carrier in &self.coverage {
            if !priced.iter().any(|&(_, c)| c == carrier) {
                return Err(ProtocolError::MissingQuote { ue: self.ue, carrier });
            }
        }
        priced.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        priced.dedup_by_key(|x| x.1);

        let limit = self.decay.limit(n);
        let mut requested = 0.0;
        let mut bids = Vec::with_capacity(priced.len());
        for &(price, carrier) in &priced {
            let total = self.utility.demand(price, self.limits.rate_cap, self.limits.tol);
            let increment = (total - requested).max(0.0);

            let prev = self.prev_bids[&carrier];
            let mut amount = price * increment;
            if (amount - prev).abs() > limit {
                amount = prev + (amount - prev).signum() * limit;
            }
            requested += amount / price;
            bids.push(Bid {
                ue: self.ue,
                carrier,
                amount,
                iteration: n + 1,
            });
        }
        for b in &bids {
            self.prev_bids.insert(b.carrier, b.amount);
        }
        bids.sort_by_key(|b| b.carrier);
        Ok(bids)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierAgentState {
    pub carrier: CarrierId,
    pub capacity: f64,
    /// Last bid received from every covered UE; zero before the first round.
    pub prev_bids: BTreeMap<UeId, f64>,
    pub price_history: Vec<f64>,
    pub delta: f64,
    pub stopped: bool,
}

impl CarrierAgentState {
    pub fn new(carrier: CarrierId, capacity: f64, covered: &[UeId], delta: f64) -> Self {
        CarrierAgentState {
            carrier,
            capacity,
            prev_bids: covered.iter().map(|&u| (u, 0.0)).collect(),
            price_history: Vec::new(),
            delta,
            stopped: false,
        }
    }

    /// Consumes the bids of iteration `n`.
    ///
    /// Returns a stop quote when every covered UE's bid moved by less than
    /// `delta` since the previous round. Either way the quote carries
    /// `sum(w) / R` (floored at [`PRICE_FLOOR`]) computed from these bids, so
    /// that rates `w / p` always add up to the capacity.
    pub fn update(&mut self, bids: &[Bid], n: u64) -> Result<PriceQuote, ProtocolError> {
        let mut received: BTreeMap<UeId, f64> = BTreeMap::new();
        for b in bids {
            if b.carrier != self.carrier || !self.prev_bids.contains_key(&b.ue) {
                return Err(ProtocolError::UnexpectedBid { carrier: self.carrier, ue: b.ue });
            }
            if !(b.amount.is_finite() && b.amount >= 0.0) {
                return Err(ProtocolError::InvalidBid {
                    carrier: self.carrier,
                    ue: b.ue,
                    amount: b.amount,
                });
            }
            received.insert(b.ue, b.amount);
        }
        if let Some(&ue) = self.prev_bids.keys().find(|u| !received.contains_key(u)) {
            return Err(ProtocolError::MissingBid { carrier: self.carrier, ue });
        }

        let settled = received
            .iter()
            .all(|(ue, w)| (w - self.prev_bids[ue]).abs() < self.delta);
        let total: f64 = received.values().sum();
        let price = (total / self.capacity).max(PRICE_FLOOR);

        self.prev_bids = received;
        self.price_history.push(price);
        self.stopped = settled;
        Ok(PriceQuote {
            carrier: self.carrier,
            price,
            iteration: n,
            stop: settled,
        })
    }

    pub fn last_price(&self) -> Option<f64> {
        self.price_history.last().copied()
    }

    /// Rates `w / p` from the last round, whether or not the carrier stopped.
    pub fn current_allocation(&self) -> BTreeMap<UeId, Rate> {
        let price = self.last_price().unwrap_or(PRICE_FLOOR);
        self.prev_bids
            .iter()
            .map(|(&ue, &w)| (ue, Rate::new(w / price).unwrap_or(Rate::ZERO)))
            .collect()
    }

    /// Final rates `w / p`; only valid once the carrier has stopped.
    pub fn final_allocation(&self) -> Result<BTreeMap<UeId, Rate>, ProtocolError> {
        if !self.stopped {
            return Err(ProtocolError::NotStopped(self.carrier));
        }
        Ok(self.current_allocation())
    }
}
