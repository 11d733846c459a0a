//! Discrete-time simulator for VNF placement and SFC provisioning.
//!
//! The crate is organised bottom-up:
//!
//! * [`catalog`] holds the VNF and service-chain tables.
//! * [`model`] holds data centers, logical links and the topology, together
//!   with the capacity predicates every mutation goes through.
//! * [`request`] and [`metrics`] describe SFC requests and run statistics.
//! * [`sim`] is the environment: bundle generation, action application,
//!   tick progression and reward emission.
//! * [`episode`] drives an environment with a DC selector and an action agent.
//! * [`features`] encodes environment snapshots for the learning agents.
//! * [`heuristic`] is the rule-based baseline policy.

pub mod catalog;
pub mod episode;
pub mod features;
pub mod heuristic;
pub mod metrics;
pub mod model;
pub mod request;
pub mod sim;

pub use catalog::{Bandwidth, SfcCatalog, SfcKind, SfcType, VnfCatalog, VnfCatalogEntry, VnfType};
pub use episode::{
    run_episode, ActionAgent, DcSelector, EpisodeHook, FixedDc, NoHook, Pipeline, Policy,
    RandomDc, RoundRobinDc, StepRecord,
};
pub use heuristic::{heuristic_step, heuristic_step_extended, Heuristic};
pub use metrics::{acceptance_ratio, throughput_gbps, PerKind, RunMetrics};
pub use model::{Datacenter, DcId, LinkId, LogicalLink, ModelError, NetworkTopology, Resource};
pub use request::{RequestId, RequestStatus, SfcRequest, Stage};
pub use sim::{generate_bundles, reward_of, Action, Env, EventKind, SimConfig, SimError, SimEvent};
