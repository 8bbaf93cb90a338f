//! Limit order book simulation with adaptive market-order volumes.
//!
//! The crate couples a zero-intelligence limit order book with correlated
//! market-order flow and a liquidity-taking policy that conditions its volume
//! on how predictable the next trade sign is. Analytics cover signature plots,
//! quantile-binned conditional curves and sign-predictor diagnostics.

pub mod analytics;
pub mod book;
pub mod dar;
pub mod flow;
pub mod io;
pub mod rng;
pub mod sim;
pub mod taker;
pub mod tradelog;
pub mod zeta;
