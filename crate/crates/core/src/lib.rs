//! Resource-usage simulator for parallel evolutionary optimization on a
//! compute cluster.
//!
//! Each new individual is produced by a three-step mutation process. Step `i`
//! needs `dop_i` processors for `ceil(t_i / dop_i)` simulated milliseconds,
//! where `t_i` is a rounded normal variate. Two selection disciplines are
//! compared:
//!
//! * **Generation-based**: mutations run in batches of `eta`, and a batch
//!   starts only when the previous one has fully completed.
//! * **Steady-state**: `eta` mutations are kept in flight; each completion
//!   immediately triggers selection and the next mutation.
//!
//! The crate provides
//!
//! * [`engine`]: a deterministic discrete-event simulator producing per-processor
//!   log records, plus a wall-clock mode driven through [`tuplespace`];
//! * [`analytic`]: the closed-form batch-time model evaluated by Monte Carlo;
//! * [`analysis`]: log parsing, normalization, makespan and active/idle accounting,
//!   and CSV export;
//! * [`petrinet`]: a small timed Petri net engine for the timing rules the
//!   simulator follows.
//!
//! All simulated times are integer milliseconds ([`Millis`]). Statistics are
//! generic over the float type; [`Summary`] fixes it to `f64`.

pub mod analysis;
pub mod analytic;
pub mod engine;
pub mod model;
pub mod petrinet;
pub mod sampling;
pub mod scenario_file;
pub mod stats;
pub mod tuplespace;

pub use model::{
    Algorithm, DataEntry, Interval, LogRecord, Millis, Mode, ProcessorEntry, SampleMatrix,
    Scenario, StepSpec, TurnEntry, Violation,
};
pub use sampling::RngStream;

/// Six-number summary over `f64`.
pub type Summary = stats::SummaryStats<f64>;

/// Timed Petri net over integer milliseconds.
pub type Net = petrinet::TimedNet<Millis>;

/// Histogram over `f64` samples.
pub type Histogram = stats::Histogram<f64>;
