//! Time series, reference solutions and CSV output.

mod kernel;
mod ode;
mod timeseries;

pub use kernel::heat_kernel;
pub use ode::{sir_ode_oracle, SirOde};
pub use timeseries::TimeSeries;
