pub mod error;
pub mod control;
pub mod dynamics;
pub mod gait_planner;
pub mod harness;
pub mod ik_network;
pub mod model;
pub mod stability;

pub use error::{Error, Result};
