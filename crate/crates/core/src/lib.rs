//! Two-community stochastic block models with stubborn agents, gossip opinion
//! dynamics over sampled graphs, and community detection from a single state
//! trajectory.
//!
//! The crate is organised around the pipeline it simulates:
//!
//! * [`sbm`] samples graphs (plain SBM and SBM with stubborn agents), builds the
//!   averaged graph and ships the karate club network.
//! * [`gossip`] runs pairwise-averaging dynamics and records trajectories.
//! * [`detect`] clusters transient states or time averages on the line.
//! * [`oracle`] computes expected update matrices and expected final opinions.
//! * [`bench`] reproduces the Monte-Carlo experiments and writes CSV/JSON.
//!
//! Agent indices are 0-based in the API and 1-based in every file format.

pub mod bench;
pub mod detect;
mod error;
pub mod gossip;
pub mod oracle;
pub mod sbm;

pub use error::{Error, Result};

pub use detect::{accuracy, kmeans_1d_two, DetectionResult};
pub use gossip::{GossipState, InteractionDistribution, Recording, Trajectory};
pub use oracle::{expected_final_opinions, ExpectedDynamics};
pub use sbm::{AveragedGraph, CommunityStructure, SampledGraph, SbmSParams};
