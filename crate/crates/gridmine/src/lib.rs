//! Distributed data-mining toolkit with a simulated multi-site runtime.
//!
//! The crate bundles three distributed mining algorithms — density-based
//! clustering with hierarchical model merging, variance-based clustering
//! over subcluster statistics, and top-down distributed frequent-itemset
//! mining — together with a knowledge-map registry for cataloging mined
//! models and a deterministic in-process simulation of sites, tree
//! topologies, and message accounting.

pub mod apriori;
pub mod data;
pub mod dbscan;
pub mod ddbc;
pub mod error;
pub mod km;
pub mod report;
pub mod sim;
pub mod variance;

mod util;

pub use error::{Error, Result};
