use std::collections::BTreeMap;

use serde::Serialize;

use crate::ids::{CarrierId, UeId};

/// Per-(UE, carrier) rates. Pairs outside a UE's coverage are simply absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AllocationMatrix {
    entries: BTreeMap<(UeId, CarrierId), f64>,
}

impl AllocationMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, ue: UeId, carrier: CarrierId, rate: f64) {
        self.entries.insert((ue, carrier), rate);
    }

    pub fn get(&self, ue: UeId, carrier: CarrierId) -> Option<f64> {
        self.entries.get(&(ue, carrier)).copied()
    }

    /// Rate or zero for absent pairs.
    pub fn rate(&self, ue: UeId, carrier: CarrierId) -> f64 {
        self.get(ue, carrier).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (UeId, CarrierId, f64)> + '_ {
        self.entries.iter().map(|(&(u, c), &r)| (u, c, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total rate per UE across carriers.
    pub fn totals(&self) -> BTreeMap<UeId, f64> {
        let mut out = BTreeMap::new();
        for (&(u, _), &r) in &self.entries {
            *out.entry(u).or_insert(0.0) += r;
        }
        out
    }

    pub fn total(&self, ue: UeId) -> f64 {
        self.entries
            .range((ue, CarrierId(0))..=(ue, CarrierId(u32::MAX)))
            .map(|(_, r)| r)
            .sum()
    }

    /// Sum of rates handed out by one carrier.
    pub fn carrier_load(&self, carrier: CarrierId) -> f64 {
        self.entries
            .iter()
            .filter(|((_, c), _)| *c == carrier)
            .map(|(_, r)| r)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_loads() {
        let mut m = AllocationMatrix::new();
        m.set(UeId(1), CarrierId(1), 3.0);
        m.set(UeId(1), CarrierId(2), 4.0);
        m.set(UeId(2), CarrierId(1), 5.0);
        assert_eq!(m.total(UeId(1)), 7.0);
        assert_eq!(m.totals()[&UeId(2)], 5.0);
        assert_eq!(m.carrier_load(CarrierId(1)), 8.0);
        assert_eq!(m.rate(UeId(2), CarrierId(2)), 0.0);
        assert_eq!(m.get(UeId(2), CarrierId(2)), None);
    }
}
