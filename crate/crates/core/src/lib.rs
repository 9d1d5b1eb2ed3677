//! Power allocation for compute-and-forward relaying over fading
//! multiple-access channels.
//!
//! The relay decodes a fixed integer combination `a` of the users' lattice
//! codewords. Given the channel statistics and a per-user average power
//! budget, the crate chooses per-state transmit powers that maximise the
//! expected computation rate:
//!
//! * [`rate`]: rate expressions, good/bad state classification, ordering criteria;
//! * [`symmetric`]: closed-form KKT solutions, the large-budget threshold and
//!   the constant / water-filling / ordered-elimination / exhaustive algorithms;
//! * [`asymmetric`]: per-user powers via multi-start projected gradient ascent;
//! * [`continuous`]: continuous channel densities evaluated on a quadrature grid.

pub mod asymmetric;
pub mod bisection;
pub mod channel;
pub mod continuous;
pub mod error;
pub mod policy;
pub mod presets;
pub mod rate;
mod search;
pub mod symmetric;

pub use bisection::BisectionConfig;
pub use channel::{ChannelState, DiscreteChannelModel, EquationCoefficients, Marginal};
pub use error::{Error, Result};
pub use policy::{
    AlgorithmId, AsymmetricPolicy, Diagnostics, Policy, SolveReport, SymmetricPolicy,
};
pub use rate::OrderingMethod;
