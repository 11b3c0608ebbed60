//! Per-drone mission plan shared by the heuristics: trips under construction
//! plus the drone's compute timeline.

use crate::energy::{energy_of, Reserve};
use crate::model::{Joules, Prepared};
use crate::schedule::{alap_timing, build_trip, DroneMission, TripTiming};
use crate::timeline::{BatchJob, SlotTimeline, TripKey};

#[derive(Debug, Clone)]
pub(crate) struct PlannedTrip {
    pub key: TripKey,
    pub seq: Vec<usize>,
    pub timing: TripTiming,
}

#[derive(Debug, Clone)]
pub(crate) struct DronePlan {
    pub drone: u32,
    /// Sorted by takeoff.
    pub trips: Vec<PlannedTrip>,
    pub timeline: SlotTimeline,
    next_key: TripKey,
}

impl DronePlan {
    pub fn new(drone: u32) -> Self {
        DronePlan { drone, trips: Vec::new(), timeline: SlotTimeline::new(drone), next_key: 0 }
    }

    fn fly_hover(prep: &Prepared<'_>, t: &TripTiming) -> Joules {
        energy_of(t.fly, t.hover, 0, prep.spec())
    }

    /// Whether `[takeoff, landing)` fits between the neighbours of position
    /// `pos` in `self.trips`, ignoring the trip at `skip`.
    fn fits_between(&self, takeoff: u64, landing: u64, skip: Option<usize>) -> bool {
        self.trips.iter().enumerate().all(|(k, t)| {
            Some(k) == skip || t.timing.landing <= takeoff || landing <= t.timing.takeoff
        })
    }

    /// Adds activity `i` to an existing trip, or opens a new trip for it.
    /// Trip energy, including compute already booked on the trip, must stay
    /// within the budget. Returns the key of the trip that now captures `i`.
    pub fn try_insert(&mut self, prep: &Prepared<'_>, i: usize, reserve: Reserve) -> Option<TripKey> {
        let budget = reserve.budget(prep.spec().battery);
        let horizon = prep.inst.depot.mission_horizon;
        let a = prep.activity(i);
        for k in 0..self.trips.len() {
            let trip = &self.trips[k];
            let pos = trip
                .seq
                .partition_point(|&j| (prep.activity(j).start, prep.activity(j).id) < (a.start, a.id));
            let mut seq = trip.seq.clone();
            seq.insert(pos, i);
            let Some(timing) = alap_timing(prep, &seq) else { continue };
            if timing.landing > horizon || !self.fits_between(timing.takeoff, timing.landing, Some(k)) {
                continue;
            }
            let compute = self.timeline.compute_seconds(trip.key) * prep.spec().compute_power;
            if Self::fly_hover(prep, &timing) + compute > budget {
                continue;
            }
            let key = trip.key;
            self.trips[k].seq = seq;
            self.trips[k].timing = timing;
            self.timeline.set_trip(key, timing.takeoff, timing.landing);
            return Some(key);
        }
        self.try_add_trip(prep, vec![i], reserve)
    }

    /// Opens a new trip flying `seq`, if the drone has a free trip and the
    /// trip is feasible and does not overlap the drone's other trips.
    pub fn try_add_trip(&mut self, prep: &Prepared<'_>, seq: Vec<usize>, reserve: Reserve) -> Option<TripKey> {
        if self.trips.len() >= prep.inst.depot.max_trips_per_drone as usize {
            return None;
        }
        let timing = alap_timing(prep, &seq)?;
        if timing.landing > prep.inst.depot.mission_horizon
            || Self::fly_hover(prep, &timing) > reserve.budget(prep.spec().battery)
            || !self.fits_between(timing.takeoff, timing.landing, None)
        {
            return None;
        }
        let key = self.next_key;
        self.next_key += 1;
        self.timeline.set_trip(key, timing.takeoff, timing.landing);
        let pos = self.trips.partition_point(|t| t.timing.takeoff < timing.takeoff);
        self.trips.insert(pos, PlannedTrip { key, seq, timing });
        Some(key)
    }

    /// Places the batches of activity `i` (captured on `key`): the longest
    /// prefix of batches whose compute energy keeps the trip within budget,
    /// by the better of default assignment and test-and-swap.
    pub fn schedule_batches(&mut self, prep: &Prepared<'_>, i: usize, key: TripKey, reserve: Reserve) {
        let Some(trip) = self.trips.iter().find(|t| t.key == key) else { return };
        let spec = prep.spec();
        let batches = &prep.batches[i];
        let used = Self::fly_hover(prep, &trip.timing)
            + self.timeline.compute_seconds(key) * spec.compute_power;
        let remaining = reserve.budget(spec.battery).saturating_sub(used);
        let per_batch = batches.runtime * spec.compute_power;
        let limit = if per_batch == 0 {
            batches.count
        } else {
            (remaining / per_batch).min(batches.count as u64) as u32
        };
        if limit == 0 {
            return;
        }
        let jobs = BatchJob::for_activity(prep.activity(i), batches, key, limit);
        self.timeline.best_assignment(jobs);
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    pub fn into_mission(self, prep: &Prepared<'_>) -> DroneMission {
        let trips = self
            .trips
            .iter()
            .enumerate()
            .map(|(idx, t)| {
                build_trip(prep, self.drone, idx as u32, &t.seq).expect("planned trips are temporally feasible")
            })
            .collect();
        DroneMission { drone: self.drone, trips, slots: self.timeline.slots() }
    }
}
