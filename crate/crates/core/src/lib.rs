//! Detection of DAO-to-DAO metagovernance on Ethereum-style chains.

pub mod abidec;
pub mod app;
pub mod chainio;
pub mod config;
pub mod govscan;
pub mod labeler;
pub mod metanet;
pub mod model;
pub mod pipeline;
pub mod scenarios;
pub mod sigstore;
pub mod snapshotio;
pub mod voterscan;
