//! Accelerated decentralized dual optimization over time-varying networks.
//!
//! The crate is split the way a run is assembled:
//!
//! - [`netgraph`]: communication graphs, their schedules and spectral bounds.
//! - [`adom`]: the dual solver (Modified ADOM and the plain ADOM baseline),
//!   driven by a per-node conjugate-gradient oracle.
//! - [`entot`]: entropic optimal transport, providing the Wasserstein
//!   barycenter dual oracle plus exact and Sinkhorn transport for metrics.
//! - [`harness`]: datasets, experiment orchestration, CSV/manifest output and
//!   the command-line front end.

pub mod adom;
pub mod entot;
pub mod harness;
pub mod netgraph;
