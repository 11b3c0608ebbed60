//! Placement of batch executions on a drone's compute timeline.
//!
//! Each drone owns one [`SlotTimeline`]: the disjoint execution intervals
//! already booked on it, the airborne intervals of its trips, and the batch
//! jobs those intervals belong to. Jobs are placed by first-fit, preferring the
//! window between capture and deadline (on-time) and falling back to the
//! window between deadline and landing (on-board only). A single test-and-swap
//! pass then tries to pull late batches back before their deadline.
//!
//! Occupied intervals are indexed by start time in a balanced tree. Because
//! they are pairwise disjoint, an overlap query only needs the predecessor of
//! the query start and an ordered range scan.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::model::{Activity, ActivityId, BatchSet, Seconds, Utility};
use crate::schedule::ComputeSlot;

/// Identifies a trip within one drone's plan. Keys are stable while trips are
/// added, so they need not follow chronological order.
pub type TripKey = u32;

type JobKey = (ActivityId, u32);

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: Seconds,
    pub end: Seconds,
}

impl Interval {
    pub fn new(start: Seconds, end: Seconds) -> Self {
        Interval { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// One batch waiting to be (or already) placed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchJob {
    pub activity: ActivityId,
    /// 1-indexed batch number.
    pub batch: u32,
    pub trip: TripKey,
    /// Capture of the batch completes here.
    pub available: Seconds,
    pub deadline: Seconds,
    pub runtime: Seconds,
    /// Utility for finishing before landing, `γ̄ / q`.
    pub onboard_value: Utility,
    /// Extra utility for finishing by the deadline, `γ̄̄ / q`.
    pub ontime_value: Utility,
}

impl BatchJob {
    /// Jobs for the first `limit` batches of `activity`, captured on `trip`.
    pub fn for_activity(activity: &Activity, batches: &BatchSet, trip: TripKey, limit: u32) -> Vec<BatchJob> {
        let q = batches.count as u128;
        let onboard = Utility::new(activity.gamma_onboard as u128, q);
        let ontime = Utility::new(activity.gamma_ontime as u128, q);
        batches
            .indices()
            .take(limit as usize)
            .map(|k| BatchJob {
                activity: activity.id,
                batch: k,
                trip,
                available: batches.available_at(k),
                deadline: activity.deadline,
                runtime: batches.runtime,
                onboard_value: onboard,
                ontime_value: ontime,
            })
            .collect()
    }

    fn key(&self) -> JobKey {
        (self.activity, self.batch)
    }

    /// Utility of the job if it ran in a slot ending at `end` (already known
    /// to be before landing).
    fn value_ending_at(&self, end: Seconds) -> Utility {
        if end <= self.deadline {
            self.onboard_value + self.ontime_value
        } else {
            self.onboard_value
        }
    }
}

/// The windows a batch may run in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchWindows {
    /// From capture completion to the deadline.
    pub preferred: Interval,
    /// From the deadline to the landing of the capturing trip.
    pub schedulable: Interval,
    /// Parts of `preferred` not occupied by other batches.
    pub free_preferred: Vec<Interval>,
}

#[derive(Debug, Clone)]
struct JobState {
    job: BatchJob,
    start: Option<Seconds>,
}

#[derive(Debug, Clone, Copy)]
struct Occupant {
    end: Seconds,
    key: JobKey,
}

#[derive(Debug, Clone)]
pub struct SlotTimeline {
    drone: u32,
    trips: BTreeMap<TripKey, Interval>,
    occupied: BTreeMap<Seconds, Occupant>,
    jobs: BTreeMap<JobKey, JobState>,
}

impl SlotTimeline {
    pub fn new(drone: u32) -> Self {
        SlotTimeline { drone, trips: BTreeMap::new(), occupied: BTreeMap::new(), jobs: BTreeMap::new() }
    }

    pub fn drone(&self) -> u32 {
        self.drone
    }

    /// Registers or updates the airborne interval of a trip. Bounds may only
    /// widen once jobs of that trip are placed.
    pub fn set_trip(&mut self, key: TripKey, takeoff: Seconds, landing: Seconds) {
        if let Some(old) = self.trips.get(&key) {
            debug_assert!(takeoff <= old.start && landing >= old.end, "trip bounds may only widen");
        }
        self.trips.insert(key, Interval::new(takeoff, landing));
    }

    pub fn trip(&self, key: TripKey) -> Option<Interval> {
        self.trips.get(&key).copied()
    }

    fn landing(&self, job: &BatchJob) -> Seconds {
        self.trips.get(&job.trip).map_or(0, |t| t.end)
    }

    /// Whether `[start, end)` overlaps no booked interval.
    pub fn is_free(&self, start: Seconds, end: Seconds) -> bool {
        if end <= start {
            return true;
        }
        if let Some((_, o)) = self.occupied.range(..=start).next_back() {
            if o.end > start {
                return false;
            }
        }
        self.occupied.range(start..end).next().is_none()
    }

    /// Earliest `θ ≥ lo` with `[θ, θ + len)` free and `θ + len ≤ hi`.
    pub fn earliest_fit(&self, lo: Seconds, hi: Seconds, len: Seconds) -> Option<Seconds> {
        let mut cursor = lo;
        if let Some((_, o)) = self.occupied.range(..lo).next_back() {
            cursor = cursor.max(o.end);
        }
        for (&s, o) in self.occupied.range(lo..) {
            if cursor.checked_add(len)? > hi {
                return None;
            }
            if s >= cursor + len {
                return Some(cursor);
            }
            cursor = cursor.max(o.end);
        }
        (cursor + len <= hi).then_some(cursor)
    }

    /// Free sub-intervals of `[lo, hi)`, in increasing start order.
    pub fn free_gaps(&self, lo: Seconds, hi: Seconds) -> Vec<Interval> {
        let mut gaps = Vec::new();
        let mut cursor = lo;
        if let Some((_, o)) = self.occupied.range(..lo).next_back() {
            cursor = cursor.max(o.end);
        }
        for (&s, o) in self.occupied.range(lo..hi) {
            if s > cursor {
                gaps.push(Interval::new(cursor, s));
            }
            cursor = cursor.max(o.end);
        }
        if cursor < hi {
            gaps.push(Interval::new(cursor, hi));
        }
        gaps
    }

    pub fn windows(&self, job: &BatchJob) -> BatchWindows {
        let landing = self.landing(job);
        let preferred = Interval::new(job.available, job.deadline);
        BatchWindows {
            preferred,
            schedulable: Interval::new(job.deadline, landing.max(job.deadline)),
            free_preferred: self.free_gaps(preferred.start, preferred.end),
        }
    }

    /// End of the previous scheduled batch and start of the next scheduled
    /// batch of the same activity.
    fn sibling_bounds(&self, key: JobKey) -> (Seconds, Seconds) {
        let (activity, batch) = key;
        let lower = self
            .jobs
            .range((activity, 0)..(activity, batch))
            .rev()
            .find_map(|(_, s)| s.start.map(|st| st + s.job.runtime))
            .unwrap_or(0);
        let upper = self
            .jobs
            .range((activity, batch + 1)..=(activity, u32::MAX))
            .find_map(|(_, s)| s.start)
            .unwrap_or(Seconds::MAX);
        (lower, upper)
    }

    /// First-fit start within the preferred window, respecting batch order.
    fn fit_preferred(&self, job: &BatchJob) -> Option<Seconds> {
        let (lower, upper) = self.sibling_bounds(job.key());
        let lo = job.available.max(lower);
        let hi = job.deadline.min(upper).min(self.landing(job));
        self.earliest_fit(lo, hi, job.runtime)
    }

    /// First-fit start within the schedulable window, respecting batch order.
    fn fit_schedulable(&self, job: &BatchJob) -> Option<Seconds> {
        let (lower, upper) = self.sibling_bounds(job.key());
        let lo = job.deadline.max(job.available).max(lower);
        let hi = self.landing(job).min(upper);
        self.earliest_fit(lo, hi, job.runtime)
    }

    fn place(&mut self, key: JobKey, start: Seconds) {
        let state = self.jobs.get_mut(&key).expect("job registered");
        debug_assert!(state.start.is_none());
        state.start = Some(start);
        let end = start + state.job.runtime;
        if end > start {
            debug_assert!(self.is_free(start, end));
            self.occupied.insert(start, Occupant { end, key });
        }
    }

    fn unplace(&mut self, key: JobKey) -> Option<Seconds> {
        let state = self.jobs.get_mut(&key)?;
        let start = state.start.take()?;
        if state.job.runtime > 0 {
            self.occupied.remove(&start);
        }
        Some(start)
    }

    fn value_of(&self, key: JobKey) -> Utility {
        let s = &self.jobs[&key];
        match s.start {
            Some(st) => s.job.value_ending_at(st + s.job.runtime),
            None => Utility::zero(),
        }
    }

    fn is_late(&self, key: JobKey) -> bool {
        let s = &self.jobs[&key];
        s.start.is_some_and(|st| st + s.job.runtime > s.job.deadline)
    }

    /// Total on-board and on-time utility of the placed batches.
    pub fn utility(&self) -> Utility {
        self.jobs.keys().map(|&k| self.value_of(k)).sum()
    }

    /// Compute seconds booked for batches captured on `trip`.
    pub fn compute_seconds(&self, trip: TripKey) -> Seconds {
        self.jobs
            .values()
            .filter(|s| s.job.trip == trip && s.start.is_some())
            .map(|s| s.job.runtime)
            .sum()
    }

    pub fn placed(&self, activity: ActivityId, batch: u32) -> Option<Interval> {
        let s = self.jobs.get(&(activity, batch))?;
        s.start.map(|st| Interval::new(st, st + s.job.runtime))
    }

    /// All placed batches as compute slots, ordered by activity and batch.
    pub fn slots(&self) -> Vec<ComputeSlot> {
        self.jobs
            .iter()
            .filter_map(|(&(activity, batch), s)| {
                s.start.map(|start| ComputeSlot { activity, batch, start, end: start + s.job.runtime })
            })
            .collect()
    }

    /// Places `jobs` in index order by first-fit, preferred window first.
    /// Returns the jobs left unscheduled.
    pub fn default_assign(&mut self, jobs: Vec<BatchJob>) -> Vec<BatchJob> {
        let mut unscheduled = Vec::new();
        for job in jobs {
            let key = job.key();
            self.jobs.insert(key, JobState { job, start: None });
            let job = &self.jobs[&key].job;
            match self.fit_preferred(job).or_else(|| self.fit_schedulable(job)) {
                Some(start) => self.place(key, start),
                None => unscheduled.push(self.jobs[&key].job.clone()),
            }
        }
        unscheduled
    }

    /// One test-and-swap pass over the batches that miss their deadline.
    pub fn test_and_swap(&mut self) {
        let mut late: Vec<(Seconds, JobKey)> = self
            .jobs
            .iter()
            .filter(|(&k, _)| self.is_late(k))
            .map(|(&k, s)| (s.start.unwrap_or(0), k))
            .collect();
        late.sort();

        for (_, key) in late {
            if !self.is_late(key) {
                continue;
            }
            let activity = key.0;
            // total preferred interval of the activity
            let span_start = self
                .jobs
                .range((activity, 0)..=(activity, u32::MAX))
                .map(|(_, s)| s.job.available)
                .min()
                .unwrap_or(0);
            let span_end = self.jobs[&key].job.deadline;
            let mut victims: Vec<(Seconds, JobKey)> = Vec::new();
            if let Some((&s, o)) = self.occupied.range(..span_start).next_back() {
                if o.end > span_start {
                    victims.push((s, o.key));
                }
            }
            victims.extend(self.occupied.range(span_start..span_end).map(|(&s, o)| (s, o.key)));
            for (_, victim) in victims {
                if victim.0 == activity {
                    continue;
                }
                if self.try_swap(key, victim) {
                    break;
                }
            }
        }
    }

    fn try_swap(&mut self, late: JobKey, victim: JobKey) -> bool {
        let snapshot = self.clone();
        let before = self.utility();
        let victim_late = self.is_late(victim);
        self.unplace(victim);
        self.unplace(late);

        let job = self.jobs[&late].job.clone();
        let Some(start) = self.fit_preferred(&job) else {
            *self = snapshot;
            return false;
        };
        self.place(late, start);

        let vjob = self.jobs[&victim].job.clone();
        let ok = if victim_late {
            // both miss their deadline: the victim moves on within its schedulable window
            match self.fit_schedulable(&vjob) {
                Some(s) => {
                    self.place(victim, s);
                    true
                }
                None => false,
            }
        } else if let Some(s) = self.fit_preferred(&vjob) {
            self.place(victim, s);
            true
        } else {
            // contended slot: the batch worth more when on time keeps it
            let mine = job.onboard_value + job.ontime_value;
            let theirs = vjob.onboard_value + vjob.ontime_value;
            if mine > theirs {
                if let Some(s) = self.fit_schedulable(&vjob) {
                    self.place(victim, s);
                }
                true
            } else {
                false
            }
        };
        if !ok || self.utility() < before {
            *self = snapshot;
            return false;
        }
        true
    }

    /// Default assignment of `jobs`, improved by test-and-swap when that
    /// yields strictly more utility.
    pub fn best_assignment(&mut self, jobs: Vec<BatchJob>) -> Vec<BatchJob> {
        let unscheduled = self.default_assign(jobs);
        if self.jobs.keys().any(|&k| self.is_late(k)) {
            let mut swapped = self.clone();
            swapped.test_and_swap();
            if swapped.utility() > self.utility() {
                *self = swapped;
            }
        }
        unscheduled
    }

    /// Checks the timeline's structural invariants.
    #[cfg(test)]
    pub(crate) fn check_invariants(&self) {
        let slots: Vec<_> = self.slots().into_iter().filter(|s| s.end > s.start).collect();
        for (i, a) in slots.iter().enumerate() {
            for b in &slots[i + 1..] {
                assert!(a.end <= b.start || b.end <= a.start, "overlap {a:?} {b:?}");
            }
        }
        for s in self.jobs.values() {
            if let Some(st) = s.start {
                assert!(st >= s.job.available);
                assert!(st + s.job.runtime <= self.landing(&s.job));
            }
        }
        for ((a, k), s) in &self.jobs {
            if let (Some(st), Some(next)) = (s.start, self.placed(*a, k + 1)) {
                assert!(st + s.job.runtime <= next.start);
            }
        }
    }
}
