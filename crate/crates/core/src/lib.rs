//! Detection of logical defects in DeFi staking contracts.
pub mod callgraph;
pub mod cfg;
pub mod corpus;
pub mod defs;
pub mod defuse;
pub mod detect;
pub mod error;
pub mod extract;
pub mod facts;
pub mod flatten;
pub mod graphs;
pub mod ingest;
pub mod ir;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod summary;
pub mod transfer;
pub use error::{Error, Result};
