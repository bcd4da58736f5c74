//! Configuration, file formats and command drivers.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod experiment;
pub mod forecasting;
pub mod track;

pub use commands::{cmd_backtest, cmd_evaluate, cmd_experiment, cmd_forecast, cmd_simulate, cmd_track};
pub use config::{Method, RunConfig};
pub use csvio::{Dataset, RawSeries};
pub use track::TrajectoryRecord;
