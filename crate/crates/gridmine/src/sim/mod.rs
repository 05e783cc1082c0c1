//! Deterministic in-process simulation of sites, tree topologies, and
//! message accounting. Identical job specs and seeds produce byte-identical
//! result and trace artifacts.

pub mod job;
pub mod run;
pub mod topology;
pub mod trace;

pub use job::{
    AlgorithmConfig, AprioriJobConfig, DdbcConfig, JobSpec, OutputSpec, PerSite, SupportSpec,
    TopologySpec, VarLimitSpec, VarianceJobConfig,
};
pub use run::{run_job, seed_for, GenSpec, JobOutcome, Metrics};
pub use topology::{build_topology, NodeId, TopoNode, Topology, TopologyKind};
pub use trace::{account, AccountSummary, MessageTrace, MsgRecord};
