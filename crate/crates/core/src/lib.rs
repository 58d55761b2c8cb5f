//! Max-min reliability optimization for an RIS-assisted uplink where users
//! are paired into NOMA groups that share a slot through TDMA.
//!
//! The pipeline is: draw a channel realization ([`channel`]), pick a decoding
//! order from a gain-maximizing reflection ([`order`]), alternate over powers
//! ([`power`]), receive combiners ([`beam`]), RIS phases ([`ris`]) and the
//! blocklength ([`blocklength`]) for a tentative pairing, then re-pair users
//! with a bottleneck assignment ([`pairing`]) and re-optimize
//! ([`orchestrator`]). Comparison schemes live in [`baselines`] and the
//! Monte-Carlo harness in [`experiments`].

pub mod baselines;
pub mod beam;
pub mod blocklength;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod orchestrator;
pub mod order;
pub mod pairing;
pub mod power;
pub mod ris;
pub mod seeds;

pub use baselines::{run_scheme, Scheme};
pub use error::{Error, Result};
pub use model::{Allocation, DecodeOrder, Grouping, InterferenceModel, Pair, SolverSettings, SystemConfig};
pub use orchestrator::{run_three_step, RunOutput, RunTrace};
