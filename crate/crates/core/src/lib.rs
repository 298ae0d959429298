//! Coupled spreading of two competing opinions and a disease on two-layer
//! multiplex networks.
//!
//! The information layer carries a pro- and an anti-physical-distancing
//! opinion that compete as SIR (or SIRS) contagions with mutual immunity. The
//! physical layer carries an SIR disease whose transmission rate to a
//! susceptible node is scaled by that node's opinion.
//!
//! The crate provides:
//! - [`multiplex_net`]: configuration-model and degree-correlated layer
//!   generators, inter-layer degree coupling and correlation measurements;
//! - [`contagion`]: compartments, parameters and per-node rate laws;
//! - [`gillespie`]: exact event-driven simulation with event logs;
//! - [`meanfield`]: the fully-mixed ODE and the degree-based pair approximation;
//! - [`ctmc`]: exact transient solution of the full Markov chain on tiny networks;
//! - [`analysis`]: final sizes, opinion-at-infection decompositions and
//!   opinion-history statistics;
//! - [`harness`]: scenario files, sweeps, ensembles and CSV output.

// index loops mirror the degree-class sums; negated comparisons catch NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod contagion;
pub mod ctmc;
pub mod error;
pub mod gillespie;
pub mod harness;
pub mod meanfield;
pub mod multiplex_net;
pub mod ode;

pub use error::{Error, Result};
