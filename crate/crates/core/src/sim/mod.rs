//! Discrete-event kernel and the top-level simulation run.

mod calendar;
mod engine;

pub use calendar::{Event, EventCalendar, EventId, EventKind};
pub use engine::{run, LogRow, LoopLog, SchedulerRow, SimulationResult, Summary, TxRecord};
