//! Cost-aware bubble clustering of patient care in long-term care facilities.
//!
//! The pipeline reads an HCP mobility log and a facility floor plan, derives
//! pairwise transmission weights between rooms, partitions rooms and staff
//! into bubbles with a branch-and-bound solver, rewires the schedule to the
//! bubbles, prices the disruption, and compares epidemic outcomes with an
//! agent-based simulator.

pub mod cli;
pub mod episim;
pub mod model;
pub mod optimizer;
pub mod rewiring;
pub mod simplex;
pub mod spatial;
pub mod synth;
pub mod weights;
