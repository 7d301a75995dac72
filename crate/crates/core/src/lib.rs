//! Battery value-stacking across FCR capacity provision and imbalance trading.
//!
//! Stage one ([`bidding`]) picks a per-block FCR bid by Monte-Carlo rollouts
//! of a rule-based controller; stage two ([`env`], [`agent`]) trains a masked
//! double-DQN controller to trade the residual flexibility.

pub mod agent;
pub mod bidding;
pub mod config;
pub mod env;
pub mod error;
pub mod heuristic;
pub mod market;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod settlement;

pub use error::{Error, Result};
