//! Replays a schedule with perturbed energy draw to see which trips would
//! run out of battery and how much utility survives.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MspError;
use crate::model::{flight_time, Activity, ActivityId, Joules, ProblemInstance, Seconds, Utility};
use crate::schedule::{compute_utility, trip_times, validate_schedule, DroneMission, MissionSchedule, Trip};

/// Multipliers on the nominal fly, hover and compute energy of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegFactors {
    pub fly: f64,
    pub hover: f64,
    pub compute: f64,
}

impl LegFactors {
    pub const ONE: LegFactors = LegFactors { fly: 1.0, hover: 1.0, compute: 1.0 };

    pub fn uniform(f: f64) -> Self {
        LegFactors { fly: f, hover: f, compute: f }
    }

    fn check(&self) -> Result<(), MspError> {
        for v in [self.fly, self.hover, self.compute] {
            if !(v.is_finite() && v > 0.0) {
                return Err(MspError::TraceMismatch(format!("energy factor {v} is not positive")));
            }
        }
        Ok(())
    }
}

/// How actual energy draw departs from the nominal model.
///
/// Trips are numbered from 0 in schedule order (drone by drone, trip by
/// trip). Leg `l` of a trip is the flight to its `l`-th stop (0-based)
/// together with the hover there; the last leg is the flight home. Compute
/// seconds are charged with the factor of the leg during which they run.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyTrace {
    /// The same factors on every leg.
    Constant(LegFactors),
    /// Factors by `(trip_id, leg_index)`; missing legs use 1.0.
    PerLeg(BTreeMap<(u32, u32), LegFactors>),
    /// One factor per leg, uniform in `[low, high]`, applied to fly, hover
    /// and compute alike.
    Noise { low: f64, high: f64, seed: u64 },
}

impl Default for EnergyTrace {
    fn default() -> Self {
        EnergyTrace::Constant(LegFactors::ONE)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    trip_id: u32,
    leg_index: u32,
    fly_factor: f64,
    hover_factor: f64,
    compute_factor: f64,
}

impl EnergyTrace {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn noise(spread: f64, seed: u64) -> Self {
        EnergyTrace::Noise { low: 1.0 - spread, high: 1.0 + spread, seed }
    }

    /// Factors per trip and leg of `sched`.
    pub fn resolve(&self, sched: &MissionSchedule) -> Result<Vec<Vec<LegFactors>>, MspError> {
        let legs: Vec<usize> = sched.drones.iter().flat_map(|d| &d.trips).map(|t| t.stops.len() + 1).collect();
        match self {
            EnergyTrace::Constant(f) => {
                f.check()?;
                Ok(legs.iter().map(|&n| vec![*f; n]).collect())
            }
            EnergyTrace::PerLeg(map) => {
                let mut out: Vec<Vec<LegFactors>> = legs.iter().map(|&n| vec![LegFactors::ONE; n]).collect();
                for (&(trip, leg), f) in map {
                    f.check()?;
                    let slot = out.get_mut(trip as usize).and_then(|t| t.get_mut(leg as usize)).ok_or_else(|| {
                        MspError::TraceMismatch(format!("trip {trip} leg {leg} is not in the schedule"))
                    })?;
                    *slot = *f;
                }
                Ok(out)
            }
            EnergyTrace::Noise { low, high, seed } => {
                if !(low.is_finite() && high.is_finite() && *low > 0.0 && low <= high) {
                    return Err(MspError::InvalidParameter(format!("bad noise range [{low}, {high}]")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(legs
                    .iter()
                    .map(|&n| (0..n).map(|_| LegFactors::uniform(rng.gen_range(*low..=*high))).collect())
                    .collect())
            }
        }
    }

    /// Reads a `trip_id,leg_index,fly_factor,hover_factor,compute_factor` CSV.
    pub fn read_csv(reader: impl Read) -> Result<Self, MspError> {
        let mut map = BTreeMap::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: TraceRow = row.map_err(|e| MspError::TraceMismatch(e.to_string()))?;
            let f = LegFactors { fly: row.fly_factor, hover: row.hover_factor, compute: row.compute_factor };
            f.check()?;
            if map.insert((row.trip_id, row.leg_index), f).is_some() {
                return Err(MspError::TraceMismatch(format!(
                    "trip {} leg {} appears twice",
                    row.trip_id, row.leg_index
                )));
            }
        }
        Ok(EnergyTrace::PerLeg(map))
    }

    /// Writes the resolved factors for `sched` as CSV.
    pub fn write_csv(&self, sched: &MissionSchedule, writer: impl Write) -> Result<(), MspError> {
        let mut w = csv::Writer::from_writer(writer);
        for (trip_id, legs) in self.resolve(sched)?.iter().enumerate() {
            for (leg_index, f) in legs.iter().enumerate() {
                w.serialize(TraceRow {
                    trip_id: trip_id as u32,
                    leg_index: leg_index as u32,
                    fly_factor: f.fly,
                    hover_factor: f.hover,
                    compute_factor: f.compute,
                })
                .map_err(|e| MspError::TraceMismatch(e.to_string()))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripReplay {
    pub trip_id: u32,
    pub drone: u32,
    pub index: u32,
    pub planned: Joules,
    /// Energy the full trip would draw under the trace.
    pub needed: f64,
    pub stops: usize,
    /// Stops captured in full before the drone turned home.
    pub completed_stops: usize,
    /// For incomplete trips, the extra battery needed as a fraction of
    /// capacity.
    pub deficit: Option<f64>,
}

impl TripReplay {
    pub fn incomplete(&self) -> bool {
        self.deficit.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulationReport {
    pub expected: Utility,
    pub effective: Utility,
    pub trips: Vec<TripReplay>,
    /// The schedule as actually flown: aborted trips cut at their last
    /// completed stop.
    pub flown: MissionSchedule,
}

impl EmulationReport {
    pub fn incomplete_count(&self) -> usize {
        self.trips.iter().filter(|t| t.incomplete()).count()
    }

    /// Percentage of trips that did not complete.
    pub fn incomplete_pct(&self) -> f64 {
        if self.trips.is_empty() {
            return 0.0;
        }
        100.0 * self.incomplete_count() as f64 / self.trips.len() as f64
    }

    pub fn deficits(&self) -> Vec<f64> {
        self.trips.iter().filter_map(|t| t.deficit).collect()
    }

    pub fn mean_deficit(&self) -> Option<f64> {
        let d = self.deficits();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    }

    pub fn max_deficit(&self) -> Option<f64> {
        self.deficits().into_iter().reduce(f64::max)
    }
}

fn overlap(a: (Seconds, Seconds), b: (Seconds, Seconds)) -> Seconds {
    a.1.min(b.1).saturating_sub(a.0.max(b.0))
}

struct Leg {
    span: (Seconds, Seconds),
    energy: f64,
}

fn legs_of(trip: &Trip, mission: &DroneMission, factors: &[LegFactors], inst: &ProblemInstance) -> Vec<Leg> {
    let spec = &inst.fleet;
    let mut out = Vec::with_capacity(trip.stops.len() + 1);
    let mut clock = trip.takeoff;
    for (l, f) in factors.iter().enumerate() {
        let (fly, hover, end) = match trip.stops.get(l) {
            Some(s) => (s.arrival.saturating_sub(clock), s.departure.saturating_sub(s.arrival), s.departure),
            None => (trip.landing.saturating_sub(clock), 0, trip.landing),
        };
        let span = (clock, end);
        let compute: Seconds = mission.slots_in(trip).map(|s| overlap(span, (s.start, s.end))).sum();
        let energy = fly as f64 * spec.fly_power as f64 * f.fly
            + hover as f64 * spec.hover_power as f64 * f.hover
            + compute as f64 * spec.compute_power as f64 * f.compute;
        out.push(Leg { span, energy });
        clock = end;
    }
    out
}

/// Replays `sched` against `trace`.
///
/// A trip whose perturbed energy exceeds the battery is incomplete. Its
/// drone keeps enough charge to fly home: before each leg it checks that it
/// could still return from the next stop, and otherwise turns home from
/// where it is and stops computing. Captures and batches finished by then
/// keep their utility; the rest of the trip earns nothing.
pub fn replay(sched: &MissionSchedule, inst: &ProblemInstance, trace: &EnergyTrace) -> Result<EmulationReport, MspError> {
    let violations = validate_schedule(sched, inst);
    if !violations.is_empty() {
        return Err(MspError::InvalidParameter(format!(
            "schedule is not valid under nominal energy: {violations:?}"
        )));
    }
    let factors = trace.resolve(sched)?;
    let spec = &inst.fleet;
    let battery = spec.battery as f64;
    let depot = inst.depot.location;
    let by_id: BTreeMap<ActivityId, &Activity> = inst.activities.iter().map(|a| (a.id, a)).collect();

    let mut trips = Vec::new();
    let mut flown = MissionSchedule { drones: Vec::new(), dropped: sched.dropped.clone() };
    let mut lost: BTreeSet<ActivityId> = BTreeSet::new();
    let mut trip_id = 0u32;
    for mission in &sched.drones {
        let mut kept = DroneMission { drone: mission.drone, trips: Vec::new(), slots: Vec::new() };
        for trip in &mission.trips {
            let f = &factors[trip_id as usize];
            let legs = legs_of(trip, mission, f, inst);
            let needed: f64 = legs.iter().map(|l| l.energy).sum();
            let (fly, hover) = trip_times(trip, inst)?;
            let compute: Seconds = mission.slots_in(trip).map(|s| s.len()).sum();
            let planned = fly * spec.fly_power + hover * spec.hover_power + compute * spec.compute_power;

            let mut completed = trip.stops.len();
            let mut cut = trip.landing;
            if needed > battery {
                let home_factor = f.last().map_or(1.0, |f| f.fly);
                let mut used = 0.0;
                completed = 0;
                cut = trip.takeoff;
                for (stop, leg) in trip.stops.iter().zip(&legs) {
                    let wp = by_id[&stop.activity].waypoint;
                    let home = flight_time(&wp, &depot, spec) as f64 * spec.fly_power as f64 * home_factor;
                    if used + leg.energy + home > battery {
                        break;
                    }
                    used += leg.energy;
                    completed += 1;
                    cut = leg.span.1;
                }
            }
            let replayed = TripReplay {
                trip_id,
                drone: mission.drone,
                index: trip.index,
                planned,
                needed,
                stops: trip.stops.len(),
                completed_stops: completed,
                deficit: (needed > battery).then(|| (needed - battery) / battery),
            };
            trip_id += 1;

            let mut t = trip.clone();
            if replayed.incomplete() {
                lost.extend(t.stops.drain(completed..).map(|s| s.activity));
                let from = t.stops.last().map(|s| by_id[&s.activity].waypoint);
                t.landing = cut + from.map_or(0, |p| flight_time(&p, &depot, spec));
                kept.slots.extend(mission.slots_in(trip).filter(|s| s.end <= cut).copied());
            } else {
                kept.slots.extend(mission.slots_in(trip).copied());
            }
            if !t.stops.is_empty() {
                kept.trips.push(t);
            }
            trips.push(replayed);
        }
        for (k, t) in kept.trips.iter_mut().enumerate() {
            t.index = k as u32;
        }
        if !kept.trips.is_empty() {
            flown.drones.push(kept);
        }
    }
    flown.dropped.extend(lost);
    flown.dropped.sort();
    Ok(EmulationReport {
        expected: compute_utility(sched, inst).total,
        effective: compute_utility(&flown, inst).total,
        trips,
        flown,
    })
}
