//! Core library for detecting price-manipulation attacks in EVM
//! transactions: trace ingestion, transfer-graph construction, DeFi
//! operation recovery, pool mathematics, price-change inference, and
//! attack-pattern matching.

pub mod amm;
pub mod graph;
pub mod detect;
pub mod infer;
pub mod ingest;
pub mod primitives;
pub mod recover;
pub mod template;
