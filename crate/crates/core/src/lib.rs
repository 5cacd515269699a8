//! Co-simulation of control loops closed over a shared priority-driven
//! network, with feedback scheduling of sampling periods and priorities.

pub mod bus;
pub mod config;
pub mod error;
pub mod metrics;
pub mod output;
pub mod plant;
pub mod scheduler;
pub mod sim;
pub mod time;

pub use config::{parse_scenario, preset, ScenarioConfig};
pub use error::{Error, Result};
pub use scheduler::Mode;
pub use sim::{run, SimulationResult};
pub use time::SimTime;
