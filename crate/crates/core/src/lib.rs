//! Exact simulation of EPR correlations between two atomic species in a
//! tunnel-coupled double well.

pub mod analytics;
pub mod app;
pub mod basis;
pub mod config;
pub mod criteria;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod noise;
pub mod operator;
pub mod schemes;
pub mod selfcheck;
pub mod sweep;

pub use error::{Error, Result};
