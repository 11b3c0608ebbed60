//! Problem input: depot, fleet, activities and the batch decomposition of
//! each activity's captured video.
//!
//! Every time is an integer number of seconds from the mission epoch (t = 0),
//! distances are meters and energies joules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::MspError;

/// Seconds from the mission epoch.
pub type Seconds = u64;

/// Joules.
pub type Joules = u64;

/// Exact utility value. Per-batch utilities are fractions `γ / q`.
pub type Utility = Ratio<u128>;

/// Identifier of an activity, unique within an instance.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ActivityId(pub u32);

impl fmt::Display for ActivityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A location in meters relative to the depot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Planar distance from the origin, ignoring altitude.
    pub fn horizontal_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotConfig {
    pub location: Point3,
    /// Latest admissible landing time of any trip.
    pub mission_horizon: Seconds,
    #[serde(rename = "max_trips")]
    pub max_trips_per_drone: u32,
}

/// Parameters shared by every drone of the (homogeneous) fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub count: u32,
    /// Cruise speed, m/s.
    pub speed: f64,
    /// J/s while flying.
    pub fly_power: u64,
    /// J/s while hovering.
    pub hover_power: u64,
    /// J/s while running analytics.
    pub compute_power: u64,
    /// Battery capacity, J.
    pub battery: Joules,
    /// On-board processing speed, FLOP/s.
    pub proc_speed: u64,
}

impl DroneSpec {
    /// Drone parameters of the benchmarked quad-copter (speed, fly, hover and
    /// compute power, battery) for a fleet of `count` drones. The processing
    /// speed is a free choice: only per-batch runtimes matter.
    pub fn reference(count: u32) -> Self {
        DroneSpec {
            count,
            speed: 4.0,
            fly_power: 750,
            hover_power: 700,
            compute_power: 20,
            battery: 1_350_000,
            proc_speed: 1_000_000_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: ActivityId,
    pub waypoint: Point3,
    /// Capture window start.
    #[serde(rename = "t_start")]
    pub start: Seconds,
    /// Capture window end.
    #[serde(rename = "t_end")]
    pub end: Seconds,
    /// Compute cost of the whole capture, FLOP.
    pub kappa: u64,
    /// Deadline for on-time processing.
    pub deadline: Seconds,
    pub gamma_capture: u32,
    pub gamma_onboard: u32,
    pub gamma_ontime: u32,
}

impl Activity {
    pub fn capture_duration(&self) -> Seconds {
        self.end.saturating_sub(self.start)
    }

    /// Upper bound of the utility this activity can earn.
    pub fn max_utility(&self) -> Utility {
        Utility::from_integer(
            self.gamma_capture as u128 + self.gamma_onboard as u128 + self.gamma_ontime as u128,
        )
    }
}

/// Batch decomposition of one activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSet {
    pub activity: ActivityId,
    pub beta: Seconds,
    pub count: u32,
    /// Per-batch cost `κ / q` in FLOP, kept exact.
    pub per_batch_cost: Ratio<u64>,
    /// Per-batch runtime in whole seconds.
    pub runtime: Seconds,
    capture_start: Seconds,
    capture_end: Seconds,
}

impl BatchSet {
    /// Time at which batch `k` (1-indexed) has been fully captured.
    pub fn available_at(&self, k: u32) -> Seconds {
        debug_assert!(k >= 1 && k <= self.count);
        (self.capture_start + k as u64 * self.beta).min(self.capture_end)
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> {
        1..=self.count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub depot: DepotConfig,
    pub fleet: DroneSpec,
    pub beta: Seconds,
    pub activities: Vec<Activity>,
}

/// Flying time between two points at the fleet's cruise speed, rounded up
/// to whole seconds.
pub fn flight_time(p: &Point3, q: &Point3, spec: &DroneSpec) -> Seconds {
    let d = p.distance(q);
    if d == 0.0 {
        return 0;
    }
    (d / spec.speed).ceil() as Seconds
}

/// Splits an activity's capture into `β`-second batches.
pub fn derive_batches(a: &Activity, beta: Seconds, proc_speed: u64) -> Result<BatchSet, MspError> {
    if a.start >= a.end {
        return Err(MspError::InvalidActivity {
            id: a.id,
            reason: "empty capture window".into(),
        });
    }
    if beta == 0 || proc_speed == 0 {
        return Err(MspError::InvalidParameter(
            "batch duration and processing speed must be positive".into(),
        ));
    }
    let count = (a.end - a.start).div_ceil(beta);
    let per_batch_cost = Ratio::new(a.kappa, count);
    // ceil(κ / (q·π)) without leaving integers
    let denom = count as u128 * proc_speed as u128;
    let runtime = (a.kappa as u128).div_ceil(denom) as Seconds;
    Ok(BatchSet {
        activity: a.id,
        beta,
        count: count as u32,
        per_batch_cost,
        runtime,
        capture_start: a.start,
        capture_end: a.end,
    })
}

/// One broken invariant of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceViolation {
    pub activity: Option<ActivityId>,
    pub message: String,
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.activity {
            Some(id) => write!(f, "activity {id}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Checks every invariant of the instance and reports all violations.
pub fn validate_instance(inst: &ProblemInstance) -> Vec<InstanceViolation> {
    let mut out = Vec::new();
    let mut global = |m: &str| {
        out.push(InstanceViolation { activity: None, message: m.to_string() });
    };
    if inst.depot.mission_horizon == 0 {
        global("mission horizon must be positive");
    }
    if inst.depot.max_trips_per_drone == 0 {
        global("max trips per drone must be at least 1");
    }
    let f = &inst.fleet;
    if f.count == 0 {
        global("fleet must contain at least one drone");
    }
    if !(f.speed.is_finite() && f.speed > 0.0) {
        global("speed must be positive");
    }
    if f.fly_power == 0 || f.hover_power == 0 || f.compute_power == 0 {
        global("power draws must be positive");
    }
    if f.battery == 0 {
        global("battery capacity must be positive");
    }
    if f.proc_speed == 0 {
        global("processing speed must be positive");
    }
    if inst.beta == 0 {
        global("batch duration must be positive");
    }

    let mut seen = BTreeSet::new();
    for a in &inst.activities {
        let mut bad = |m: &str| {
            out.push(InstanceViolation { activity: Some(a.id), message: m.to_string() });
        };
        if !seen.insert(a.id) {
            bad("duplicate activity id");
        }
        if a.end <= a.start {
            bad("empty capture window");
        }
        if a.deadline < a.end {
            bad("deadline precedes capture end");
        }
        let p = a.waypoint;
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            bad("waypoint coordinates must be finite");
        }
    }
    out
}

/// Precomputed, index-addressed view of an instance used by the schedulers.
///
/// Activities are addressed by their position in `inst.activities`.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub inst: &'a ProblemInstance,
    pub batches: Vec<BatchSet>,
    /// `depot_leg[i]` = F(depot, λ_i).
    pub depot_leg: Vec<Seconds>,
    legs: Vec<Seconds>,
    index: BTreeMap<ActivityId, usize>,
}

impl<'a> Prepared<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Result<Self, MspError> {
        let violations = validate_instance(inst);
        if !violations.is_empty() {
            return Err(MspError::InvalidInstance(violations));
        }
        let n = inst.activities.len();
        let batches = inst
            .activities
            .iter()
            .map(|a| derive_batches(a, inst.beta, inst.fleet.proc_speed))
            .collect::<Result<Vec<_>, _>>()?;
        let depot = inst.depot.location;
        let depot_leg = inst
            .activities
            .iter()
            .map(|a| flight_time(&depot, &a.waypoint, &inst.fleet))
            .collect();
        let mut legs = vec![0; n * n];
        for (i, a) in inst.activities.iter().enumerate() {
            for (j, b) in inst.activities.iter().enumerate() {
                legs[i * n + j] = flight_time(&a.waypoint, &b.waypoint, &inst.fleet);
            }
        }
        let index = inst.activities.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        Ok(Prepared { inst, batches, depot_leg, legs, index })
    }

    pub fn len(&self) -> usize {
        self.inst.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inst.activities.is_empty()
    }

    pub fn activity(&self, i: usize) -> &'a Activity {
        &self.inst.activities[i]
    }

    pub fn index_of(&self, id: ActivityId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Flying time between the waypoints of activities `i` and `j`.
    pub fn leg(&self, i: usize, j: usize) -> Seconds {
        self.legs[i * self.len() + j]
    }

    pub fn spec(&self) -> &'a DroneSpec {
        &self.inst.fleet
    }
}
