use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ScenarioError, ValidationError};
use crate::ids::{CarrierId, UeId};
use crate::protocol::DecayPolicy;
use crate::utility::{UtilityFunction, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Carrier {
    pub id: CarrierId,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub id: UeId,
    pub utility: UtilityFunction,
    pub coverage: Vec<CarrierId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Bid-change threshold below which a carrier stops.
    pub delta: f64,
    pub max_iterations: u64,
    pub initial_bid: f64,
    pub decay: DecayPolicy,
    /// Bracket width of the demand bisection.
    pub tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            delta: 1e-3,
            max_iterations: 5000,
            initial_bid: 1.0,
            decay: DecayPolicy::default(),
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub carriers: Vec<Carrier>,
    pub users: Vec<User>,
    #[serde(default)]
    pub settings: Settings,
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(s)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every structural rule and reports all violations at once.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut problems = Vec::new();
        if self.carriers.is_empty() {
            problems.push("scenario needs at least one carrier".to_string());
        }
        if self.users.is_empty() {
            problems.push("scenario needs at least one user".to_string());
        }

        let mut carrier_ids = BTreeSet::new();
        for c in &self.carriers {
            if !carrier_ids.insert(c.id) {
                problems.push(format!("duplicate carrier id {}", c.id));
            }
            if !positive_finite(c.capacity) {
                problems.push(format!("carrier {}: capacity must be finite and > 0, got {}", c.id, c.capacity));
            }
        }

        let mut user_ids = BTreeSet::new();
        for u in &self.users {
            if !user_ids.insert(u.id) {
                problems.push(format!("duplicate user id {}", u.id));
            }
            if let Err(e) = u.utility.validate() {
                problems.push(format!("user {}: {e}", u.id));
            }
            if u.coverage.is_empty() {
                problems.push(format!("user {}: coverage is empty", u.id));
            }
            for c in &u.coverage {
                if !carrier_ids.contains(c) {
                    problems.push(format!("user {}: coverage references unknown carrier {c}", u.id));
                }
            }
        }

        let s = &self.settings;
        if !positive_finite(s.delta) {
            problems.push(format!("delta must be finite and > 0, got {}", s.delta));
        }
        if s.max_iterations < 1 {
            problems.push("max_iterations must be at least 1".to_string());
        }
        if !positive_finite(s.initial_bid) {
            problems.push(format!("initial_bid must be finite and > 0, got {}", s.initial_bid));
        }
        if !positive_finite(s.tol) {
            problems.push(format!("tol must be finite and > 0, got {}", s.tol));
        }
        if let Err(e) = s.decay.validate() {
            problems.push(e);
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError(problems))
        }
    }

    pub fn carrier(&self, id: CarrierId) -> Option<&Carrier> {
        self.carriers.iter().find(|c| c.id == id)
    }

    pub fn user(&self, id: UeId) -> Option<&User> {
        self.users.iter().find(|u| u.id == id)
    }

    /// Sum of all carrier capacities; the UE demand cap.
    pub fn total_capacity(&self) -> f64 {
        self.carriers.iter().map(|c| c.capacity).sum()
    }

    /// Users with `carrier` in their coverage, in scenario order.
    pub fn covered_users(&self, carrier: CarrierId) -> Vec<UeId> {
        self.users
            .iter()
            .filter(|u| u.coverage.contains(&carrier))
            .map(|u| u.id)
            .collect()
    }

    /// Carrier ids in ascending order.
    pub fn carrier_ids(&self) -> Vec<CarrierId> {
        let mut ids: Vec<_> = self.carriers.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    /// Replaces the capacity of one carrier, returning `false` if it does not exist.
    pub fn set_capacity(&mut self, carrier: CarrierId, capacity: f64) -> bool {
        match self.carriers.iter_mut().find(|c| c.id == carrier) {
            Some(c) => {
                c.capacity = capacity;
                true
            }
            None => false,
        }
    }
}

/// The two-carrier, twelve-UE heterogeneous-network benchmark: one macro
/// carrier (id 1, capacity `r1`) and one small-cell carrier (id 2, capacity
/// `r2`). UEs 1-6 see only carrier 1, UEs 7-12 see both.
///
/// | UEs    | utility                   |
/// |--------|---------------------------|
/// | 1, 7   | sigmoidal a=5, b=10       |
/// | 2, 8   | sigmoidal a=3, b=20       |
/// | 3, 9   | sigmoidal a=1, b=30       |
/// | 4, 10  | logarithmic k=15, r_max=100 |
/// | 5, 11  | logarithmic k=3, r_max=100  |
/// | 6, 12  | logarithmic k=0.5, r_max=100 |
pub fn table1_scenario(r1: f64, r2: f64) -> Scenario {
    let utilities = [
        UtilityFunction::Sigmoidal { a: 5.0, b: 10.0 },
        UtilityFunction::Sigmoidal { a: 3.0, b: 20.0 },
        UtilityFunction::Sigmoidal { a: 1.0, b: 30.0 },
        UtilityFunction::Logarithmic { k: 15.0, r_max: 100.0 },
        UtilityFunction::Logarithmic { k: 3.0, r_max: 100.0 },
        UtilityFunction::Logarithmic { k: 0.5, r_max: 100.0 },
    ];
    let macro_only = vec![CarrierId(1)];
    let both = vec![CarrierId(1), CarrierId(2)];
    let users = (0..12u32)
        .map(|i| User {
            id: UeId(i + 1),
            utility: utilities[(i % 6) as usize],
            coverage: if i < 6 { macro_only.clone() } else { both.clone() },
        })
        .collect();
    Scenario {
        carriers: vec![
            Carrier { id: CarrierId(1), capacity: r1 },
            Carrier { id: CarrierId(2), capacity: r2 },
        ],
        users,
        settings: Settings::default(),
    }
}
