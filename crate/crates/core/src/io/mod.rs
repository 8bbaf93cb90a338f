//! Configuration files, CSV tables and external event logs.

pub mod config;
pub mod ingest;
pub mod tables;
