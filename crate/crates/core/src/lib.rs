//! Desk-scale simulation of the modified Wheeler delayed-choice experiment,
//! treated as a device-independent prepare-and-measure scenario.
//!
//! The crate is split along the data flow of an analysis run:
//!
//! * [`qcore`]: one- and two-qubit pure states, the Born rule and heralded
//!   (remote) state preparation from an entangled pair.
//! * [`scenario`]: the experiment configuration and its exact outcome
//!   probabilities under visibility and detection-efficiency losses.
//! * [`hv`]: causal classical hidden-variable strategies of bounded message
//!   dimension, with exhaustive enumeration and mixture searches that certify
//!   the classical bounds.
//! * [`witness`]: the determinant witness, the dimension witness `I_DW` and
//!   the retrocausality measure `R`.
//! * [`trials`]: seeded finite-count sampling and bootstrap error bars.
//! * [`spacetime`]: lightcone checks on the event schedule.

pub mod error;
pub mod hv;
pub mod qcore;
pub mod scenario;
pub mod spacetime;
pub mod trials;
pub mod witness;

pub use error::{Error, Result};
pub use qcore::{Ket2, Ket4, Phase, Sign};
pub use scenario::{CellProbs, ProbabilityTable, Scenario};
pub use witness::WitnessReport;
