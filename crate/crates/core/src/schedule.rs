//! Mission schedules: trips, compute slots, utility accounting and the
//! constraint validator every solver's output is checked against.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;

use crate::energy;
use crate::error::MspError;
use crate::model::{flight_time, ActivityId, Prepared, ProblemInstance, Seconds, Utility};

/// A visited waypoint within a trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stop {
    pub activity: ActivityId,
    pub arrival: Seconds,
    pub departure: Seconds,
}

/// One depot-to-depot flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trip {
    pub drone: u32,
    pub index: u32,
    pub takeoff: Seconds,
    pub landing: Seconds,
    pub stops: Vec<Stop>,
}

impl Trip {
    pub fn activities(&self) -> impl Iterator<Item = ActivityId> + '_ {
        self.stops.iter().map(|s| s.activity)
    }

    /// Whether `[start, end)` lies inside the trip's airborne interval.
    pub fn contains(&self, start: Seconds, end: Seconds) -> bool {
        self.takeoff <= start && end <= self.landing
    }
}

/// Execution slot `[start, end)` of batch `batch` (1-indexed) of an activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ComputeSlot {
    pub activity: ActivityId,
    pub batch: u32,
    pub start: Seconds,
    pub end: Seconds,
}

impl ComputeSlot {
    pub fn len(&self) -> Seconds {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    fn overlaps(&self, other: &ComputeSlot) -> bool {
        !self.is_empty() && !other.is_empty() && self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DroneMission {
    pub drone: u32,
    pub trips: Vec<Trip>,
    pub slots: Vec<ComputeSlot>,
}

impl DroneMission {
    /// The trip of this drone that captures `activity`, if any.
    pub fn trip_of(&self, activity: ActivityId) -> Option<&Trip> {
        self.trips.iter().find(|t| t.stops.iter().any(|s| s.activity == activity))
    }

    /// Slots executed during `trip`.
    pub fn slots_in<'s>(&'s self, trip: &'s Trip) -> impl Iterator<Item = &'s ComputeSlot> + 's {
        self.slots.iter().filter(move |s| trip.stops.iter().any(|st| st.activity == s.activity))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MissionSchedule {
    pub drones: Vec<DroneMission>,
    pub dropped: Vec<ActivityId>,
}

impl MissionSchedule {
    pub fn trips(&self) -> impl Iterator<Item = &Trip> {
        self.drones.iter().flat_map(|d| d.trips.iter())
    }

    pub fn scheduled_count(&self) -> usize {
        self.trips().map(|t| t.stops.len()).sum()
    }

    pub fn trip_count(&self) -> usize {
        self.trips().count()
    }
}

/// Trip timing under the latest-possible takeoff: the drone reaches its first
/// waypoint exactly at the capture start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripTiming {
    pub takeoff: Seconds,
    pub landing: Seconds,
    pub fly: Seconds,
    pub hover: Seconds,
}

/// Timing of the trip visiting `seq` (indices into `prep`) in order, or `None`
/// if some waypoint cannot be reached by its capture start.
pub fn alap_timing(prep: &Prepared<'_>, seq: &[usize]) -> Option<TripTiming> {
    let (&first, &last) = match (seq.first(), seq.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Some(TripTiming { takeoff: 0, landing: 0, fly: 0, hover: 0 }),
    };
    let a0 = prep.activity(first);
    let out = prep.depot_leg[first];
    let takeoff = a0.start.checked_sub(out)?;
    let mut fly = out;
    let mut hover = a0.end - a0.start;
    for w in seq.windows(2) {
        let (p, q) = (prep.activity(w[0]), prep.activity(w[1]));
        let leg = prep.leg(w[0], w[1]);
        let arrival = p.end + leg;
        if arrival > q.start {
            return None;
        }
        fly += leg;
        hover += q.end - arrival;
    }
    let back = prep.depot_leg[last];
    fly += back;
    Some(TripTiming { takeoff, landing: prep.activity(last).end + back, fly, hover })
}

/// Builds a trip for `seq` with latest-possible takeoff.
pub fn build_trip(prep: &Prepared<'_>, drone: u32, index: u32, seq: &[usize]) -> Option<Trip> {
    let timing = alap_timing(prep, seq)?;
    let mut stops = Vec::with_capacity(seq.len());
    let mut clock = timing.takeoff;
    let mut prev: Option<usize> = None;
    for &i in seq {
        let a = prep.activity(i);
        let leg = match prev {
            None => prep.depot_leg[i],
            Some(p) => prep.leg(p, i),
        };
        stops.push(Stop { activity: a.id, arrival: clock + leg, departure: a.end });
        clock = a.end;
        prev = Some(i);
    }
    Some(Trip { drone, index, takeoff: timing.takeoff, landing: timing.landing, stops })
}

/// Total flying and hovering seconds of a trip.
///
/// Hover covers both early arrival and the capture itself, `Σ (t̄ − τ̄)`.
pub fn trip_times(trip: &Trip, inst: &ProblemInstance) -> Result<(Seconds, Seconds), MspError> {
    let mut fly = 0;
    let mut hover = 0;
    let mut clock = trip.takeoff;
    for stop in &trip.stops {
        let a = inst
            .activities
            .iter()
            .find(|a| a.id == stop.activity)
            .ok_or(MspError::UnknownActivity(stop.activity))?;
        if stop.arrival > a.start {
            return Err(MspError::LateArrival(a.id));
        }
        fly += stop.arrival.saturating_sub(clock);
        hover += a.end - stop.arrival;
        clock = stop.departure;
    }
    fly += trip.landing.saturating_sub(clock);
    Ok((fly, hover))
}

/// Completion and utility of one activity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityUtility {
    pub id: ActivityId,
    pub drone: Option<u32>,
    /// Data captured over the full window.
    pub captured: bool,
    /// Fraction of batches completed before landing.
    pub onboard: Ratio<u128>,
    /// Fraction of batches completed by the deadline.
    pub ontime: Ratio<u128>,
    pub utility: Utility,
}

impl ActivityUtility {
    pub fn capture_utility(&self, gamma: u32) -> Utility {
        if self.captured {
            Utility::from_integer(gamma as u128)
        } else {
            Utility::zero()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityReport {
    pub activities: Vec<ActivityUtility>,
    pub total: Utility,
    /// Capture, on-board and on-time components of `total`.
    pub capture_total: Utility,
    pub onboard_total: Utility,
    pub ontime_total: Utility,
    /// Utility earned by each drone, indexed by drone id.
    pub per_drone: Vec<Utility>,
}

impl UtilityReport {
    pub fn scheduled_fraction(&self) -> f64 {
        if self.activities.is_empty() {
            return 0.0;
        }
        self.activities.iter().filter(|a| a.captured).count() as f64 / self.activities.len() as f64
    }
}

/// Nearest `f64` to an exact ratio, for reporting.
pub fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Evaluates the utility earned by a (valid) schedule.
pub fn compute_utility(sched: &MissionSchedule, inst: &ProblemInstance) -> UtilityReport {
    // activity -> (drone, landing of the capturing trip)
    let mut visited: BTreeMap<ActivityId, (u32, Seconds)> = BTreeMap::new();
    for d in &sched.drones {
        for t in &d.trips {
            for s in &t.stops {
                visited.entry(s.activity).or_insert((d.drone, t.landing));
            }
        }
    }
    // activity -> batch -> (on-board, on-time)
    let mut done: BTreeMap<ActivityId, BTreeMap<u32, (bool, bool)>> = BTreeMap::new();
    for d in &sched.drones {
        for s in &d.slots {
            let Some(&(drone, landing)) = visited.get(&s.activity) else { continue };
            if drone != d.drone || s.end > landing {
                continue;
            }
            let deadline = inst.activities.iter().find(|a| a.id == s.activity).map(|a| a.deadline);
            let ontime = deadline.is_some_and(|dl| s.end <= dl);
            let e = done.entry(s.activity).or_default().entry(s.batch).or_insert((true, false));
            e.1 |= ontime;
        }
    }

    let m = inst.fleet.count as usize;
    let mut per_drone = vec![Utility::zero(); m];
    let mut activities = Vec::with_capacity(inst.activities.len());
    let (mut cap, mut onb, mut ont) = (Utility::zero(), Utility::zero(), Utility::zero());
    for a in &inst.activities {
        let q = (a.end.saturating_sub(a.start)).div_ceil(inst.beta.max(1)).max(1) as u128;
        let drone = visited.get(&a.id).map(|v| v.0);
        let captured = drone.is_some();
        let batches = done.get(&a.id);
        let valid = |k: &u32| *k >= 1 && (*k as u128) <= q;
        let n_onboard = batches.map_or(0, |b| b.keys().filter(|k| valid(k)).count()) as u128;
        let n_ontime =
            batches.map_or(0, |b| b.iter().filter(|(k, v)| valid(k) && v.1).count()) as u128;
        let onboard = Ratio::new(n_onboard, q);
        let ontime = Ratio::new(n_ontime, q);
        let c = if captured { Utility::from_integer(a.gamma_capture as u128) } else { Utility::zero() };
        let o = onboard * a.gamma_onboard as u128;
        let t = ontime * a.gamma_ontime as u128;
        let utility = c + o + t;
        cap += c;
        onb += o;
        ont += t;
        if let Some(d) = drone {
            if let Some(slot) = per_drone.get_mut(d as usize) {
                *slot += utility;
            }
        }
        activities.push(ActivityUtility { id: a.id, drone, captured, onboard, ontime, utility });
    }
    UtilityReport {
        activities,
        total: cap + onb + ont,
        capture_total: cap,
        onboard_total: onb,
        ontime_total: ont,
        per_drone,
    }
}

/// A broken constraint of a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownActivity(ActivityId),
    UnknownDrone(u32),
    DuplicateDrone(u32),
    DuplicateAssignment(ActivityId),
    DroppedAndScheduled(ActivityId),
    Unaccounted(ActivityId),
    TripDroneMismatch { drone: u32, trip: u32, found: u32 },
    EmptyTrip { drone: u32, trip: u32 },
    TooManyTrips { drone: u32, count: usize, max: u32 },
    ArrivalMismatch { activity: ActivityId, expected: Seconds, found: Seconds },
    LateArrival { activity: ActivityId, arrival: Seconds, start: Seconds },
    DepartureMismatch { activity: ActivityId, expected: Seconds, found: Seconds },
    LandingMismatch { drone: u32, trip: u32, expected: Seconds, found: Seconds },
    TripsOverlap { drone: u32, first: u32, second: u32 },
    HorizonExceeded { drone: u32, trip: u32, landing: Seconds, horizon: Seconds },
    EnergyExceeded { drone: u32, trip: u32, energy: u64, capacity: u64 },
    SlotUnknownBatch { activity: ActivityId, batch: u32 },
    SlotNotCaptured { drone: u32, activity: ActivityId, batch: u32 },
    SlotLength { activity: ActivityId, batch: u32, expected: Seconds, found: Seconds },
    DuplicateSlot { activity: ActivityId, batch: u32 },
    CaptureIncomplete { activity: ActivityId, batch: u32, start: Seconds, available: Seconds },
    BatchOrder { activity: ActivityId, batch: u32 },
    SlotOverlap { drone: u32, first: (ActivityId, u32), second: (ActivityId, u32) },
    SlotAfterLanding { activity: ActivityId, batch: u32, end: Seconds, landing: Seconds },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            UnknownActivity(a) => write!(f, "unknown activity {a}"),
            UnknownDrone(d) => write!(f, "unknown drone {d}"),
            DuplicateDrone(d) => write!(f, "drone {d} listed twice"),
            DuplicateAssignment(a) => write!(f, "activity {a} assigned more than once"),
            DroppedAndScheduled(a) => write!(f, "activity {a} is both dropped and scheduled"),
            Unaccounted(a) => write!(f, "activity {a} is neither scheduled nor dropped"),
            TripDroneMismatch { drone, trip, found } => {
                write!(f, "trip {trip} listed under drone {drone} claims drone {found}")
            }
            EmptyTrip { drone, trip } => write!(f, "drone {drone} trip {trip} visits no waypoint"),
            TooManyTrips { drone, count, max } => {
                write!(f, "drone {drone} flies {count} trips, limit {max}")
            }
            ArrivalMismatch { activity, expected, found } => write!(
                f,
                "arrival at activity {activity} is {found}, route timing gives {expected}"
            ),
            LateArrival { activity, arrival, start } => write!(
                f,
                "late arrival at activity {activity}: {arrival} after capture start {start}"
            ),
            DepartureMismatch { activity, expected, found } => write!(
                f,
                "departure from activity {activity} is {found}, capture ends at {expected}"
            ),
            LandingMismatch { drone, trip, expected, found } => write!(
                f,
                "drone {drone} trip {trip} lands at {found}, route timing gives {expected}"
            ),
            TripsOverlap { drone, first, second } => {
                write!(f, "drone {drone} trip {second} takes off before trip {first} lands")
            }
            HorizonExceeded { drone, trip, landing, horizon } => write!(
                f,
                "drone {drone} trip {trip} lands at {landing}, after mission horizon {horizon}"
            ),
            EnergyExceeded { drone, trip, energy, capacity } => write!(
                f,
                "drone {drone} trip {trip} needs {energy} J, battery holds {capacity} J"
            ),
            SlotUnknownBatch { activity, batch } => {
                write!(f, "activity {activity} has no batch {batch}")
            }
            SlotNotCaptured { drone, activity, batch } => write!(
                f,
                "drone {drone} processes batch {batch} of activity {activity} it did not capture"
            ),
            SlotLength { activity, batch, expected, found } => write!(
                f,
                "slot of activity {activity} batch {batch} lasts {found} s, runtime is {expected} s"
            ),
            DuplicateSlot { activity, batch } => {
                write!(f, "batch {batch} of activity {activity} processed twice")
            }
            CaptureIncomplete { activity, batch, start, available } => write!(
                f,
                "capture incomplete: activity {activity} batch {batch} starts at {start}, \
                 captured at {available}"
            ),
            BatchOrder { activity, batch } => write!(
                f,
                "batch order: activity {activity} batch {batch} starts before its predecessor ends"
            ),
            SlotOverlap { drone, first, second } => write!(
                f,
                "slot overlap on drone {drone}: activity {} batch {} and activity {} batch {}",
                first.0, first.1, second.0, second.1
            ),
            SlotAfterLanding { activity, batch, end, landing } => write!(
                f,
                "slot of activity {activity} batch {batch} ends at {end}, after landing {landing}"
            ),
        }
    }
}

/// Checks every constraint of the mission scheduling problem. An empty result
/// means the schedule is legal.
pub fn validate_schedule(sched: &MissionSchedule, inst: &ProblemInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    let spec = &inst.fleet;
    let depot = inst.depot.location;
    let by_id: BTreeMap<ActivityId, usize> =
        inst.activities.iter().enumerate().map(|(i, a)| (a.id, i)).collect();

    let mut assigned: BTreeSet<ActivityId> = BTreeSet::new();
    let mut drones_seen = BTreeSet::new();
    for d in &sched.drones {
        if d.drone >= spec.count {
            out.push(Violation::UnknownDrone(d.drone));
        }
        if !drones_seen.insert(d.drone) {
            out.push(Violation::DuplicateDrone(d.drone));
        }
        if d.trips.len() > inst.depot.max_trips_per_drone as usize {
            out.push(Violation::TooManyTrips {
                drone: d.drone,
                count: d.trips.len(),
                max: inst.depot.max_trips_per_drone,
            });
        }

        let mut trips: Vec<&Trip> = d.trips.iter().collect();
        trips.sort_by_key(|t| (t.takeoff, t.index));
        for w in trips.windows(2) {
            if w[0].landing > w[1].takeoff {
                out.push(Violation::TripsOverlap { drone: d.drone, first: w[0].index, second: w[1].index });
            }
        }

        // activity -> capturing trip
        let mut capture: BTreeMap<ActivityId, &Trip> = BTreeMap::new();
        for t in &d.trips {
            if t.drone != d.drone {
                out.push(Violation::TripDroneMismatch { drone: d.drone, trip: t.index, found: t.drone });
            }
            if t.stops.is_empty() {
                out.push(Violation::EmptyTrip { drone: d.drone, trip: t.index });
            }
            check_route(t, inst, &by_id, &depot, &mut out);
            if t.landing > inst.depot.mission_horizon {
                out.push(Violation::HorizonExceeded {
                    drone: d.drone,
                    trip: t.index,
                    landing: t.landing,
                    horizon: inst.depot.mission_horizon,
                });
            }
            for s in &t.stops {
                if !by_id.contains_key(&s.activity) {
                    out.push(Violation::UnknownActivity(s.activity));
                    continue;
                }
                if !assigned.insert(s.activity) {
                    out.push(Violation::DuplicateAssignment(s.activity));
                }
                capture.entry(s.activity).or_insert(t);
            }
        }

        check_slots(d, inst, &by_id, &capture, &mut out);

        for t in &d.trips {
            let slots: Vec<ComputeSlot> = d
                .slots
                .iter()
                .filter(|s| capture.get(&s.activity).is_some_and(|ct| std::ptr::eq(*ct, t)))
                .copied()
                .collect();
            let fh = trip_times(t, inst).unwrap_or((0, 0));
            let compute: Seconds = slots.iter().map(|s| s.len()).sum();
            let energy = energy::energy_of(fh.0, fh.1, compute, spec);
            if energy > spec.battery {
                out.push(Violation::EnergyExceeded {
                    drone: d.drone,
                    trip: t.index,
                    energy,
                    capacity: spec.battery,
                });
            }
        }
    }

    let dropped: BTreeSet<ActivityId> = sched.dropped.iter().copied().collect();
    for id in &dropped {
        if !by_id.contains_key(id) {
            out.push(Violation::UnknownActivity(*id));
        } else if assigned.contains(id) {
            out.push(Violation::DroppedAndScheduled(*id));
        }
    }
    for a in &inst.activities {
        if !assigned.contains(&a.id) && !dropped.contains(&a.id) {
            out.push(Violation::Unaccounted(a.id));
        }
    }
    out
}

fn check_route(
    t: &Trip,
    inst: &ProblemInstance,
    by_id: &BTreeMap<ActivityId, usize>,
    depot: &crate::model::Point3,
    out: &mut Vec<Violation>,
) {
    let spec = &inst.fleet;
    let mut pos = *depot;
    let mut clock = t.takeoff;
    for s in &t.stops {
        let Some(&i) = by_id.get(&s.activity) else { continue };
        let a = &inst.activities[i];
        let expected = clock + flight_time(&pos, &a.waypoint, spec);
        if s.arrival != expected {
            out.push(Violation::ArrivalMismatch { activity: a.id, expected, found: s.arrival });
        }
        if s.arrival > a.start {
            out.push(Violation::LateArrival { activity: a.id, arrival: s.arrival, start: a.start });
        }
        if s.departure != a.end {
            out.push(Violation::DepartureMismatch { activity: a.id, expected: a.end, found: s.departure });
        }
        pos = a.waypoint;
        clock = s.departure;
    }
    let expected = clock + flight_time(&pos, depot, spec);
    if !t.stops.is_empty() && t.landing != expected {
        out.push(Violation::LandingMismatch { drone: t.drone, trip: t.index, expected, found: t.landing });
    }
}

fn check_slots(
    d: &DroneMission,
    inst: &ProblemInstance,
    by_id: &BTreeMap<ActivityId, usize>,
    capture: &BTreeMap<ActivityId, &Trip>,
    out: &mut Vec<Violation>,
) {
    let mut seen: BTreeSet<(ActivityId, u32)> = BTreeSet::new();
    let mut per_activity: BTreeMap<ActivityId, Vec<&ComputeSlot>> = BTreeMap::new();
    for s in &d.slots {
        let Some(&i) = by_id.get(&s.activity) else {
            out.push(Violation::UnknownActivity(s.activity));
            continue;
        };
        let a = &inst.activities[i];
        let Ok(b) = crate::model::derive_batches(a, inst.beta, inst.fleet.proc_speed) else {
            continue;
        };
        if s.batch == 0 || s.batch > b.count {
            out.push(Violation::SlotUnknownBatch { activity: a.id, batch: s.batch });
            continue;
        }
        if !seen.insert((s.activity, s.batch)) {
            out.push(Violation::DuplicateSlot { activity: a.id, batch: s.batch });
        }
        if s.end < s.start || s.end - s.start != b.runtime {
            out.push(Violation::SlotLength {
                activity: a.id,
                batch: s.batch,
                expected: b.runtime,
                found: s.end.saturating_sub(s.start),
            });
        }
        let available = b.available_at(s.batch);
        if s.start < available {
            out.push(Violation::CaptureIncomplete { activity: a.id, batch: s.batch, start: s.start, available });
        }
        match capture.get(&s.activity) {
            None => out.push(Violation::SlotNotCaptured { drone: d.drone, activity: a.id, batch: s.batch }),
            Some(t) => {
                if s.end > t.landing {
                    out.push(Violation::SlotAfterLanding {
                        activity: a.id,
                        batch: s.batch,
                        end: s.end,
                        landing: t.landing,
                    });
                }
            }
        }
        per_activity.entry(s.activity).or_default().push(s);
    }
    for (id, mut slots) in per_activity {
        slots.sort_by_key(|s| s.batch);
        for w in slots.windows(2) {
            if w[0].end > w[1].start {
                out.push(Violation::BatchOrder { activity: id, batch: w[1].batch });
            }
        }
    }
    let mut sorted: Vec<&ComputeSlot> = d.slots.iter().filter(|s| !s.is_empty()).collect();
    sorted.sort_by_key(|s| (s.start, s.end, s.activity, s.batch));
    // sweep: compare each slot against the furthest-reaching earlier one
    let mut reach: Option<&ComputeSlot> = None;
    for s in sorted {
        if let Some(r) = reach {
            if r.overlaps(s) {
                out.push(Violation::SlotOverlap {
                    drone: d.drone,
                    first: (r.activity, r.batch),
                    second: (s.activity, s.batch),
                });
            }
        }
        if reach.is_none_or(|r| s.end > r.end) {
            reach = Some(s);
        }
    }
}
