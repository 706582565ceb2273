//! Two competing constant-product pools and the take rate that maximizes
//! protocol revenue, computed in closed form and by trade-level simulation.

pub mod analytical;
pub mod cpmm;
pub mod data_io;
pub mod error;
pub mod simulation;
pub mod sweep;

pub use analytical::{EquilibriumResult, ModelParams};
pub use cpmm::{Direction, PoolState, RouteSplit};
pub use error::{Error, Result};
pub use simulation::{SimOutcome, StickyLabel, TradeEvent};
pub use sweep::{SweepCurve, SweepSample};
