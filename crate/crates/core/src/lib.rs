//! Utility-proportional-fair rate allocation across aggregated carriers.
//!
//! UEs bid for rate on every carrier in range, carriers answer with shadow
//! prices, and the exchange settles on the allocation maximising the sum of
//! log-utilities subject to each carrier's capacity. An optional decay on bid
//! changes damps the oscillation that appears when real-time users' demand
//! floors exceed capacity.

pub mod allocation;
pub mod engine;
pub mod error;
pub mod ids;
pub mod oracle;
pub mod protocol;
pub mod scenario;
pub mod sweep;
pub mod trace_io;
pub mod utility;

pub use allocation::AllocationMatrix;
pub use engine::{classify_regime, detect_fluctuation, run, Fluctuation, Regime, RegimeReport, RunTrace};
pub use error::{EngineError, OracleError, ProtocolError, ScenarioError, TraceIoError, UtilityError, ValidationError};
pub use ids::{CarrierId, UeId};
pub use oracle::{compare, grid_solve, primal_objective, DeviationReport};
pub use protocol::{Bid, DecayPolicy, PriceQuote};
pub use scenario::{table1_scenario, Scenario, Settings};
pub use sweep::{run_sweep, run_sweep_on, SweepRow, SweepSpec, SweepTable};
pub use trace_io::{emit_trace, load_trace, read_trace, write_trace, TraceRow};
pub use utility::{Rate, UtilityFunction};
