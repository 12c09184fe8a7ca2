//! Simulation and design of ice-skating figures traced by a Chaplygin sleigh
//! steered by a movable internal mass.

pub mod arcfit;
pub mod arcopt;
pub mod cli;
pub mod controls;
pub mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod ode;
pub mod optim;
pub mod pattern;

pub use error::{Error, Result};
