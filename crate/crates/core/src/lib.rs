//! Research-topic mapping over citation networks: corpus ingest, citation
//! graph, topic clustering, BM25 topic profiles, document and grant
//! assignment, topic prominence, funding analytics and a 2-D topic map.

pub mod analytics;
pub mod assigner;
pub mod bm25;
pub mod citegraph;
pub mod clusterer;
pub mod corpus;
mod error;
pub mod maplayout;
pub mod pipeline;
pub mod prominence;
pub mod synthetic;

pub use error::{Error, Result};
