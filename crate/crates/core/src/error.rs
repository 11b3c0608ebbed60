use thiserror::Error;

use crate::model::{ActivityId, InstanceViolation};

#[derive(Debug, Error)]
pub enum MspError {
    #[error("invalid activity {id}: {reason}")]
    InvalidActivity { id: ActivityId, reason: String },

    #[error("invalid instance: {}", join(.0))]
    InvalidInstance(Vec<InstanceViolation>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance exceeds solver caps: {0}")]
    CapsExceeded(String),

    #[error("slot for activity {activity} batch {batch} lies outside its trip [{takeoff}, {landing})")]
    SlotOutsideTrip { activity: ActivityId, batch: u32, takeoff: u64, landing: u64 },

    #[error("activity {0} is reached after its capture start")]
    LateArrival(ActivityId),

    #[error("unknown activity {0}")]
    UnknownActivity(ActivityId),

    #[error("road graph exhausted: selected {selected} of {requested} waypoints")]
    GraphExhausted { selected: usize, requested: usize },

    #[error("energy trace mismatch: {0}")]
    TraceMismatch(String),

    #[error("unsupported format tag {found:?}, expected {expected:?}")]
    Format { found: String, expected: &'static str },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join(v: &[InstanceViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
