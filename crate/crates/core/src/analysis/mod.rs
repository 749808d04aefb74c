//! Closed-form reliability results and Monte Carlo models.

pub mod collision;
pub mod placement;
pub mod run;
pub mod stats;
