//! Goal-conditioned DDPG with asymmetric hindsight relabeling, trained on a
//! simplified three-effector cube-carry environment.

pub mod ablation;
pub mod agent;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod numerics;
pub mod replay;
pub mod scripted;
pub mod trainer;

pub use error::{Error, Result};
