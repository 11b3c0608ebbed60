//! Co-scheduling of UAV flight routes and on-board batch analytics.
//!
//! A fleet of identical drones leaves a depot to capture video at activity
//! waypoints, each within a fixed time window. Captured video is cut into
//! batches that may be processed on board, earning utility when finished
//! before landing and more when finished before the activity's deadline.
//! Flying, hovering and computing all draw on the same battery.
//!
//! The crate provides
//!  * the problem and schedule models with a strict validator ([`schedule`]),
//!  * two heuristics: a clustering-first scheduler ([`jsc`]) and a
//!    routing-first scheduler ([`vrc`]),
//!  * an exhaustive optimal solver for tiny instances and an LP-format model
//!    writer ([`exact`]),
//!  * seeded workload generators ([`workloads`]) and a trace-driven replay
//!    of schedules under perturbed energy draw ([`emulator`]).

pub mod emulator;
pub mod energy;
pub mod error;
pub mod exact;
pub mod io;
pub mod jsc;
pub mod model;
mod plan;
pub mod schedule;
pub mod timeline;
pub mod vrc;
pub mod workloads;

pub use error::MspError;
pub use model::{Activity, ActivityId, DepotConfig, DroneSpec, Point3, ProblemInstance, Utility};
pub use schedule::{compute_utility, validate_schedule, MissionSchedule, UtilityReport, Violation};
