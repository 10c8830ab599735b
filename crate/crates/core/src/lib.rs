//! Resilience-driven dispatch of hydrogen systems in a distribution feeder
//! coupled to a transmission market.
//!
//! The distribution operator (upper level) schedules DGs, PV, hydrogen
//! systems and load shedding on a branch-flow SOCP model of its radial
//! feeder; the transmission operator (lower level) clears a DC-OPF market
//! in which the feeder buys or sells at the coupling bus. The lower level is
//! replaced by primal feasibility, dual feasibility and strong duality, with
//! the price × quantity product linearized, giving one mixed-integer SOCP per
//! planning window. [`rolling::run_rolling`] drives the windows and
//! [`analytics`] turns schedules into prices, costs and resilience figures.

pub mod analytics;
pub mod dn;
pub mod error;
pub mod io;
pub mod model;
pub mod names;
pub mod rolling;
pub mod solution;
pub mod synth;
pub mod tn;
pub mod validate;
pub mod window;

pub use error::ModelError;
pub use model::*;
pub use rolling::{run_rolling, Mode, RollingOptions, RollingRun};
pub use solution::{validate_solution, DispatchSolution};
pub use tn::{assemble_single_level, build_window_model, WindowModel};
pub use validate::{validate_scenario, ValidationReport};
pub use window::{reveal_forecast, ForecastWindow, InitialState};
