//! Statistic-augmented mixture-of-experts.
//!
//! Experts carry prototype memories ([`frl`]); a query feature is routed to
//! the experts whose retrieved prototypes are closest in Jensen-Shannon
//! divergence ([`router`]), and the routed experts' outputs are mixed with
//! reciprocal-divergence weights ([`aggregator`]). [`trainer`] runs the
//! whole loop with Adam, [`data`] provides synthetic scenarios and the MRDS
//! file format, and [`metrics`] / [`eval`] score segmentation quality and
//! routing behaviour.

pub mod aggregator;
pub mod data;
pub mod error;
pub mod eval;
pub mod experts;
pub mod frl;
pub mod losses;
pub mod metrics;
pub mod router;
pub mod stats;
pub mod trainer;

pub use error::{MoeError, Result};
pub use trainer::{train, train_step, TrainConfig, TrainState};
