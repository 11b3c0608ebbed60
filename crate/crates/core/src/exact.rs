//! Ground truth for small instances: an exhaustive optimal solver, and a
//! writer for the mixed-integer model in LP format for external solvers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::energy::energy_of;
use crate::error::MspError;
use crate::model::{ActivityId, Prepared, ProblemInstance, Seconds, Utility};
use crate::schedule::{alap_timing, build_trip, ComputeSlot, DroneMission, MissionSchedule, TripTiming};

/// Size limits above which [`brute_force_opt`] refuses to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteForceConfig {
    pub max_activities: usize,
    pub max_drones: u32,
    pub max_trips: u32,
    /// Total batches over all activities.
    pub max_batches: u32,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        BruteForceConfig { max_activities: 6, max_drones: 2, max_trips: 2, max_batches: 8 }
    }
}

impl BruteForceConfig {
    pub fn check(&self, prep: &Prepared<'_>) -> Result<(), MspError> {
        let inst = prep.inst;
        let batches: u32 = prep.batches.iter().map(|b| b.count).sum();
        let over = |what: &str, got: u64, cap: u64| {
            Err(MspError::CapsExceeded(format!("{what} {got} exceeds the cap of {cap}")))
        };
        if prep.len() > self.max_activities {
            return over("activity count", prep.len() as u64, self.max_activities as u64);
        }
        if inst.fleet.count > self.max_drones {
            return over("drone count", inst.fleet.count as u64, self.max_drones as u64);
        }
        if inst.depot.max_trips_per_drone > self.max_trips {
            return over("trips per drone", inst.depot.max_trips_per_drone as u64, self.max_trips as u64);
        }
        if batches > self.max_batches {
            return over("batch count", batches as u64, self.max_batches as u64);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalSchedule {
    pub schedule: MissionSchedule,
    pub utility: Utility,
}

/// Best trip over a fixed set of activities, with utility scaled by the
/// least common multiple of all batch counts.
#[derive(Debug, Clone)]
struct TripPlan {
    seq: Vec<usize>,
    timing: TripTiming,
    value: u128,
    slots: Vec<ComputeSlot>,
}

struct BatchInfo {
    id: ActivityId,
    count: u32,
    runtime: Seconds,
    available: Vec<Seconds>,
    deadline: Seconds,
    onboard: u128,
    ontime: u128,
}

struct BatchSearch<'a> {
    acts: &'a [BatchInfo],
    landing: Seconds,
    cost: Vec<u64>,
    best: u128,
    best_slots: Vec<ComputeSlot>,
    cur: Vec<ComputeSlot>,
}

impl BatchSearch<'_> {
    /// Extends the current processing sequence by every batch that may come
    /// next. Each batch starts as soon as it is captured and the processor
    /// is free; for a fixed order this is never worse than any later start.
    fn run(&mut self, next: &mut [u32], prev_end: Seconds, energy_left: u64, value: u128) {
        if value > self.best {
            self.best = value;
            self.best_slots = self.cur.clone();
        }
        let bound: u128 = self
            .acts
            .iter()
            .zip(next.iter())
            .map(|(a, &n)| (a.count + 1 - n) as u128 * (a.onboard + a.ontime))
            .sum();
        if value + bound <= self.best {
            return;
        }
        for k in 0..self.acts.len() {
            let a = &self.acts[k];
            if self.cost[k] > energy_left {
                continue;
            }
            let first = next[k];
            for g in first..=a.count {
                let start = prev_end.max(a.available[g as usize - 1]);
                let end = start + a.runtime;
                if end > self.landing {
                    break;
                }
                let gain = a.onboard + if end <= a.deadline { a.ontime } else { 0 };
                next[k] = g + 1;
                self.cur.push(ComputeSlot { activity: a.id, batch: g, start, end });
                self.run(next, end, energy_left - self.cost[k], value + gain);
                self.cur.pop();
            }
            next[k] = first;
        }
    }
}

fn plan_trip(prep: &Prepared<'_>, mask: u32, scale: u128) -> Option<TripPlan> {
    let spec = prep.spec();
    let mut seq: Vec<usize> = (0..prep.len()).filter(|&i| mask & (1 << i) != 0).collect();
    seq.sort_by_key(|&i| (prep.activity(i).start, prep.activity(i).id));
    let timing = alap_timing(prep, &seq)?;
    if timing.landing > prep.inst.depot.mission_horizon {
        return None;
    }
    let flying = energy_of(timing.fly, timing.hover, 0, spec);
    if flying > spec.battery {
        return None;
    }

    let mut value: u128 = seq.iter().map(|&i| prep.activity(i).gamma_capture as u128 * scale).sum();
    let mut slots = Vec::new();
    let mut acts = Vec::new();
    for &i in &seq {
        let a = prep.activity(i);
        let b = &prep.batches[i];
        let q = b.count as u128;
        let onboard = a.gamma_onboard as u128 * scale / q;
        let ontime = a.gamma_ontime as u128 * scale / q;
        let available: Vec<Seconds> = b.indices().map(|k| b.available_at(k)).collect();
        if b.runtime == 0 {
            // zero-length slots take no processor time and finish when captured
            for (k, &at) in b.indices().zip(&available) {
                slots.push(ComputeSlot { activity: a.id, batch: k, start: at, end: at });
                value += onboard + if at <= a.deadline { ontime } else { 0 };
            }
            continue;
        }
        acts.push(BatchInfo {
            id: a.id,
            count: b.count,
            runtime: b.runtime,
            available,
            deadline: a.deadline,
            onboard,
            ontime,
        });
    }
    let cost = acts.iter().map(|a| a.runtime * spec.compute_power).collect();
    let mut search =
        BatchSearch { acts: &acts, landing: timing.landing, cost, best: 0, best_slots: Vec::new(), cur: Vec::new() };
    let mut next = vec![1u32; acts.len()];
    search.run(&mut next, 0, spec.battery - flying, 0);
    value += search.best;
    slots.extend(search.best_slots);
    slots.sort();
    Some(TripPlan { seq, timing, value, slots })
}

/// Exhaustive search over every assignment of activities to (drone, trip)
/// pairs or to nobody, with drones and trips labelled in order of first use.
/// Each trip flies its activities in capture order with the latest takeoff;
/// its batches are chosen by trying every processing order and subset.
/// Ties keep the first maximum found.
pub fn brute_force_opt(inst: &ProblemInstance, cfg: &BruteForceConfig) -> Result<OptimalSchedule, MspError> {
    let prep = Prepared::new(inst)?;
    cfg.check(&prep)?;
    let n = prep.len();
    let m = inst.fleet.count as usize;
    let r = inst.depot.max_trips_per_drone as usize;
    let scale = prep.batches.iter().fold(1u128, |l, b| l.lcm(&(b.count as u128)));
    let plans: Vec<Option<TripPlan>> = (0..1u32 << n).map(|mask| plan_trip(&prep, mask, scale)).collect();

    struct Search<'a> {
        plans: &'a [Option<TripPlan>],
        n: usize,
        m: usize,
        r: usize,
        masks: Vec<Vec<u32>>,
        best: Option<(u128, Vec<Vec<u32>>)>,
    }

    impl Search<'_> {
        fn leaf(&mut self) {
            let mut total = 0u128;
            for trips in &self.masks {
                let mut used: Vec<&TripPlan> = Vec::new();
                for &mask in trips.iter().filter(|&&mk| mk != 0) {
                    let Some(p) = &self.plans[mask as usize] else { return };
                    if used.iter().any(|u| u.timing.takeoff < p.timing.landing && p.timing.takeoff < u.timing.landing) {
                        return;
                    }
                    used.push(p);
                    total += p.value;
                }
            }
            if self.best.as_ref().is_none_or(|(b, _)| total > *b) {
                self.best = Some((total, self.masks.clone()));
            }
        }

        fn go(&mut self, k: usize) {
            if k == self.n {
                self.leaf();
                return;
            }
            self.go(k + 1);
            for d in 0..self.m {
                if d > 0 && self.masks[d - 1][0] == 0 {
                    break;
                }
                for t in 0..self.r {
                    if t > 0 && self.masks[d][t - 1] == 0 {
                        break;
                    }
                    let grown = self.masks[d][t] | (1 << k);
                    // supersets of an infeasible trip stay infeasible
                    if self.plans[grown as usize].is_none() {
                        continue;
                    }
                    self.masks[d][t] = grown;
                    self.go(k + 1);
                    self.masks[d][t] &= !(1 << k);
                }
            }
        }
    }

    let mut s = Search { plans: &plans, n, m, r, masks: vec![vec![0; r]; m], best: None };
    s.go(0);
    let (value, masks) = s.best.expect("dropping everything is always feasible");

    let mut drones = Vec::new();
    let mut dropped: BTreeSet<ActivityId> = prep.inst.activities.iter().map(|a| a.id).collect();
    for (d, trips) in masks.iter().enumerate() {
        let mut used: Vec<&TripPlan> =
            trips.iter().filter(|&&mk| mk != 0).map(|&mk| plans[mk as usize].as_ref().expect("feasible")).collect();
        if used.is_empty() {
            continue;
        }
        used.sort_by_key(|p| p.timing.takeoff);
        let mut mission = DroneMission { drone: d as u32, ..Default::default() };
        for (idx, p) in used.iter().enumerate() {
            let trip = build_trip(&prep, d as u32, idx as u32, &p.seq).expect("feasible");
            for s in &trip.stops {
                dropped.remove(&s.activity);
            }
            mission.trips.push(trip);
            mission.slots.extend(p.slots.iter().copied());
        }
        mission.slots.sort_by_key(|s| (s.start, s.end, s.activity, s.batch));
        drones.push(mission);
    }
    Ok(OptimalSchedule {
        schedule: MissionSchedule { drones, dropped: dropped.into_iter().collect() },
        utility: Ratio::new(value, scale),
    })
}

/// Largest model [`emit_milp`] writes, in variables.
pub const DEFAULT_MAX_VARIABLES: usize = 2_000_000;

/// Variable and row counts of an emitted model. Rows are keyed by family
/// name, the part of the row name before the first underscore.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MilpCounts {
    /// Edge-traversal binaries, one per directed edge, drone and trip.
    pub x: usize,
    /// On-time binaries, one per batch, drone and trip.
    pub y: usize,
    /// On-board binaries, one per batch, drone and trip.
    pub z: usize,
    /// Batch precedence binaries, one per ordered pair of batches of
    /// different activities.
    pub w: usize,
    /// Batch start times.
    pub theta: usize,
    /// Landing time, takeoff time and activation per drone and trip.
    pub trip: usize,
    pub rows: BTreeMap<String, usize>,
}

impl MilpCounts {
    pub fn variables(&self) -> usize {
        self.x + self.y + self.z + self.w + self.theta + self.trip
    }

    pub fn constraints(&self) -> usize {
        self.rows.values().sum()
    }

    /// Counts from the closed-form formulas, without building the model.
    pub fn expected(prep: &Prepared<'_>) -> MilpCounts {
        let n = prep.len();
        if n == 0 {
            return MilpCounts::default();
        }
        let mr = (prep.inst.fleet.count * prep.inst.depot.max_trips_per_drone) as usize;
        let m = prep.inst.fleet.count as usize;
        let r = prep.inst.depot.max_trips_per_drone as usize;
        let q: Vec<usize> = prep.batches.iter().map(|b| b.count as usize).collect();
        let total: usize = q.iter().sum();
        let pairs: usize = (0..n).flat_map(|i| (i + 1..n).map(move |a| (i, a))).map(|(i, a)| q[i] * q[a]).sum();
        let rows = [
            ("C1", n),
            ("C2", mr),
            ("C3a", mr),
            ("C3b", n * mr),
            ("C3c", mr),
            ("C4", n * mr),
            ("C5", n),
            ("C6", n * (n - 1)),
            ("C7", mr),
            ("C8", mr),
            ("C9", total),
            ("C10", total - n),
            ("C11", pairs * mr),
            ("C12", 2 * pairs),
            ("C13", total * mr),
            ("C14", total * mr),
            ("C15", mr),
            ("L1", total * mr),
            ("L2", total * mr),
            ("T1", mr),
            ("T2", m * r.saturating_sub(1)),
        ];
        MilpCounts {
            x: (n + 1) * n * mr,
            y: total * mr,
            z: total * mr,
            w: 2 * pairs,
            theta: total,
            trip: 3 * mr,
            rows: rows.into_iter().filter(|(_, c)| *c > 0).map(|(k, c)| (k.to_string(), c)).collect(),
        }
    }
}

/// A mixed-integer model in LP format. Its objective is the schedule
/// utility multiplied by `scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilpModel {
    pub text: String,
    pub counts: MilpCounts,
    pub big_m: u64,
    pub scale: u64,
}

struct Expr(Vec<(i128, String)>);

impl Expr {
    fn new() -> Self {
        Expr(Vec::new())
    }

    fn add(&mut self, coef: i128, var: impl Into<String>) -> &mut Self {
        self.0.push((coef, var.into()));
        self
    }

    fn write(&self, out: &mut String) {
        for (k, (c, v)) in self.0.iter().enumerate() {
            if k > 0 && k % 8 == 0 {
                out.push_str("\n   ");
            }
            let sign = if *c < 0 { "-" } else { "+" };
            let mag = c.unsigned_abs();
            if k == 0 {
                if *c < 0 {
                    out.push_str(" -");
                }
            } else {
                let _ = write!(out, " {sign}");
            }
            if mag == 1 {
                let _ = write!(out, " {v}");
            } else {
                let _ = write!(out, " {mag} {v}");
            }
        }
    }
}

struct Writer {
    out: String,
    rows: BTreeMap<String, usize>,
}

impl Writer {
    fn row(&mut self, family: &str, name: String, expr: &Expr, op: &str, rhs: i128) {
        *self.rows.entry(family.to_string()).or_default() += 1;
        let _ = write!(self.out, " {name}:");
        expr.write(&mut self.out);
        let _ = writeln!(self.out, " {op} {rhs}");
    }
}

const HEADER: &str = "\
\\ Mission scheduling model
\\ x_i_j_k_l  drone k on trip l flies from vertex i to j (vertex 0 is the depot)
\\ y_i_g_k_l  batch g of activity i finishes by its deadline on drone k, trip l
\\ z_i_g_k_l  batch g of activity i finishes on board before trip l of drone k lands
\\ w_i_g_a_h  batch g of activity i runs before batch h of activity a
\\ u_k_l      trip l of drone k is flown
\\ th_i_g     start of batch g of activity i
\\ tl_k_l     landing time of trip l of drone k, tt_k_l its takeoff
\\ C1   each waypoint is visited at most once
\\ C2   a trip leaving the depot returns to it
\\ C3   a trip is flown iff it visits a waypoint (a, b, c)
\\ C4   a drone entering a waypoint leaves it
\\ C5   the first waypoint is reached by its capture start from a takeoff at 0
\\ C6   consecutive waypoints are reached by their capture starts
\\ C7   landing time of each trip
\\ C8   landings within the mission horizon
\\ C9   a batch is processed after it is captured
\\ C10  batches of one activity are processed in order
\\ C11  batches processed on the same trip are ordered
\\ C12  ordered batches do not overlap
\\ C13  on-time batches finish by the deadline
\\ C14  on-board batches finish by landing
\\ C15  flying, hovering and computing energy per trip within the battery
\\ L1   only captured activities are processed
\\ L2   on-time batches also count as on board
\\ T1   takeoff time of each trip
\\ T2   trips of one drone do not overlap
";

/// Writes the model with the default variable cap.
pub fn emit_milp(inst: &ProblemInstance) -> Result<MilpModel, MspError> {
    emit_milp_capped(inst, DEFAULT_MAX_VARIABLES)
}

/// Writes the mixed-integer model of `inst` in LP format.
///
/// Trips take off as late as possible, so hover at the first waypoint of a
/// trip lasts exactly the capture. Timing constraints that only matter for
/// processed batches are switched off through the on-board binaries with
/// big-M equal to the horizon plus one, which is enough because every batch
/// start is bounded by the horizon minus its runtime.
pub fn emit_milp_capped(inst: &ProblemInstance, max_variables: usize) -> Result<MilpModel, MspError> {
    let prep = Prepared::new(inst)?;
    let expected = MilpCounts::expected(&prep);
    if expected.variables() > max_variables {
        return Err(MspError::CapsExceeded(format!(
            "model needs {} variables, above the cap of {max_variables}",
            expected.variables()
        )));
    }
    let horizon = inst.depot.mission_horizon;
    for (i, b) in prep.batches.iter().enumerate() {
        let a = prep.activity(i);
        if a.end > horizon || b.runtime > horizon {
            return Err(MspError::InvalidParameter(format!(
                "activity {} does not fit in the mission horizon of {horizon} s",
                a.id.0
            )));
        }
    }

    let n = prep.len();
    let m = inst.fleet.count as usize;
    let r = inst.depot.max_trips_per_drone as usize;
    let big_m = horizon as i128 + 1;
    let scale = prep.batches.iter().fold(1u64, |l, b| l.lcm(&(b.count as u64)));
    let spec = prep.spec();
    let act = |v: usize| prep.activity(v - 1);
    let q = |v: usize| prep.batches[v - 1].count as usize;
    let rho = |v: usize| prep.batches[v - 1].runtime as i128;
    // flight time between vertices, 0 being the depot
    let f = |i: usize, j: usize| -> i128 {
        (match (i, j) {
            (0, j) => prep.depot_leg[j - 1],
            (i, 0) => prep.depot_leg[i - 1],
            (i, j) => prep.leg(i - 1, j - 1),
        }) as i128
    };
    let hover = |i: usize, j: usize| -> i128 {
        match (i, j) {
            (_, 0) => 0,
            (0, j) => (act(j).end - act(j).start) as i128,
            (i, j) => act(j).end as i128 - (act(i).end as i128 + f(i, j)),
        }
    };
    let x = |i: usize, j: usize, k: usize, l: usize| format!("x_{i}_{j}_{k}_{l}");
    let y = |i: usize, g: usize, k: usize, l: usize| format!("y_{i}_{g}_{k}_{l}");
    let z = |i: usize, g: usize, k: usize, l: usize| format!("z_{i}_{g}_{k}_{l}");
    let w = |i: usize, g: usize, a: usize, h: usize| format!("w_{i}_{g}_{a}_{h}");
    let th = |i: usize, g: usize| format!("th_{i}_{g}");
    let tl = |k: usize, l: usize| format!("tl_{k}_{l}");
    let tt = |k: usize, l: usize| format!("tt_{k}_{l}");
    let u = |k: usize, l: usize| format!("u_{k}_{l}");
    let verts = || 0..=n;
    let wps = || 1..=n;
    let kl = || (0..m).flat_map(move |k| (0..r).map(move |l| (k, l)));

    let mut wr = Writer { out: String::from(HEADER), rows: BTreeMap::new() };
    let _ = writeln!(wr.out, "\\ objective scale {scale}, big-M {big_m}");
    wr.out.push_str("Maximize\n obj:");
    let mut obj = Expr::new();
    if n > 0 {
        for (k, l) in kl() {
            for i in wps() {
                let a = act(i);
                for j in verts().filter(|&j| j != i) {
                    obj.add(a.gamma_capture as i128 * scale as i128, x(i, j, k, l));
                }
                let per = scale as i128 / q(i) as i128;
                for g in 1..=q(i) {
                    obj.add(a.gamma_onboard as i128 * per, z(i, g, k, l));
                    obj.add(a.gamma_ontime as i128 * per, y(i, g, k, l));
                }
            }
        }
    }
    obj.0.retain(|(c, _)| *c != 0);
    obj.write(&mut wr.out);
    wr.out.push_str("\nSubject To\n");

    if n > 0 {
        for i in wps() {
            let mut e = Expr::new();
            for (k, l) in kl() {
                for j in verts().filter(|&j| j != i) {
                    e.add(1, x(i, j, k, l));
                }
            }
            wr.row("C1", format!("C1_{i}"), &e, "<=", 1);
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            for j in wps() {
                e.add(1, x(0, j, k, l));
            }
            for j in wps() {
                e.add(-1, x(j, 0, k, l));
            }
            wr.row("C2", format!("C2_{k}_{l}"), &e, "=", 0);
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            for j in wps() {
                e.add(1, x(0, j, k, l));
            }
            e.add(-1, u(k, l));
            wr.row("C3a", format!("C3a_{k}_{l}"), &e, "=", 0);
            for i in wps() {
                let mut e = Expr::new();
                for j in verts().filter(|&j| j != i) {
                    e.add(1, x(i, j, k, l));
                }
                e.add(-1, u(k, l));
                wr.row("C3b", format!("C3b_{i}_{k}_{l}"), &e, "<=", 0);
            }
            let mut e = Expr::new();
            e.add(1, u(k, l));
            for i in wps() {
                for j in verts().filter(|&j| j != i) {
                    e.add(-1, x(i, j, k, l));
                }
            }
            wr.row("C3c", format!("C3c_{k}_{l}"), &e, "<=", 0);
        }
        for (k, l) in kl() {
            for j in wps() {
                let mut e = Expr::new();
                for i in verts().filter(|&i| i != j) {
                    e.add(1, x(i, j, k, l));
                }
                for i in verts().filter(|&i| i != j) {
                    e.add(-1, x(j, i, k, l));
                }
                wr.row("C4", format!("C4_{j}_{k}_{l}"), &e, "=", 0);
            }
        }
        for j in wps() {
            let c = act(j).start as i128 - f(0, j);
            let mut e = Expr::new();
            for (k, l) in kl() {
                e.add(c, x(0, j, k, l));
            }
            wr.row("C5", format!("C5_{j}"), &e, ">=", 0);
        }
        for i in wps() {
            for j in wps().filter(|&j| j != i) {
                let c = act(j).start as i128 - act(i).end as i128 - f(i, j);
                let mut e = Expr::new();
                for (k, l) in kl() {
                    e.add(c, x(i, j, k, l));
                }
                wr.row("C6", format!("C6_{i}_{j}"), &e, ">=", 0);
            }
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            e.add(1, tl(k, l));
            for i in wps() {
                e.add(-(act(i).end as i128 + f(i, 0)), x(i, 0, k, l));
            }
            wr.row("C7", format!("C7_{k}_{l}"), &e, "=", 0);
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            e.add(1, tl(k, l));
            wr.row("C8", format!("C8_{k}_{l}"), &e, "<=", horizon as i128);
        }
        for i in wps() {
            let b = &prep.batches[i - 1];
            for g in 1..=q(i) {
                let mut e = Expr::new();
                e.add(1, th(i, g));
                for (k, l) in kl() {
                    e.add(-big_m, z(i, g, k, l));
                }
                wr.row("C9", format!("C9_{i}_{g}"), &e, ">=", b.available_at(g as u32) as i128 - big_m);
            }
        }
        for i in wps() {
            for g in 1..q(i) {
                let mut e = Expr::new();
                e.add(1, th(i, g)).add(-1, th(i, g + 1));
                for (k, l) in kl() {
                    e.add(big_m, z(i, g, k, l));
                }
                for (k, l) in kl() {
                    e.add(big_m, z(i, g + 1, k, l));
                }
                wr.row("C10", format!("C10_{i}_{g}"), &e, "<=", 2 * big_m - rho(i));
            }
        }
        for i in wps() {
            for a in wps().filter(|&a| a > i) {
                for g in 1..=q(i) {
                    for h in 1..=q(a) {
                        for (k, l) in kl() {
                            let mut e = Expr::new();
                            e.add(1, z(i, g, k, l)).add(1, z(a, h, k, l));
                            e.add(-1, w(i, g, a, h)).add(-1, w(a, h, i, g));
                            wr.row("C11", format!("C11_{i}_{g}_{a}_{h}_{k}_{l}"), &e, "<=", 1);
                        }
                    }
                }
            }
        }
        for i in wps() {
            for a in wps().filter(|&a| a != i) {
                for g in 1..=q(i) {
                    for h in 1..=q(a) {
                        let mut e = Expr::new();
                        e.add(1, th(i, g)).add(-1, th(a, h)).add(big_m, w(i, g, a, h));
                        wr.row("C12", format!("C12_{i}_{g}_{a}_{h}"), &e, "<=", big_m - rho(i));
                    }
                }
            }
        }
        for i in wps() {
            for g in 1..=q(i) {
                for (k, l) in kl() {
                    let mut e = Expr::new();
                    e.add(1, th(i, g)).add(big_m, y(i, g, k, l));
                    let rhs = act(i).deadline as i128 - rho(i) + big_m;
                    wr.row("C13", format!("C13_{i}_{g}_{k}_{l}"), &e, "<=", rhs);
                }
            }
        }
        for i in wps() {
            for g in 1..=q(i) {
                for (k, l) in kl() {
                    let mut e = Expr::new();
                    e.add(1, th(i, g)).add(-1, tl(k, l)).add(big_m, z(i, g, k, l));
                    wr.row("C14", format!("C14_{i}_{g}_{k}_{l}"), &e, "<=", big_m - rho(i));
                }
            }
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            for i in verts() {
                for j in verts().filter(|&j| j != i) {
                    let c = f(i, j) * spec.fly_power as i128 + hover(i, j) * spec.hover_power as i128;
                    e.add(c, x(i, j, k, l));
                }
            }
            for i in wps() {
                for g in 1..=q(i) {
                    e.add(rho(i) * spec.compute_power as i128, z(i, g, k, l));
                }
            }
            wr.row("C15", format!("C15_{k}_{l}"), &e, "<=", spec.battery as i128);
        }
        for i in wps() {
            for g in 1..=q(i) {
                for (k, l) in kl() {
                    let mut e = Expr::new();
                    e.add(1, z(i, g, k, l));
                    for j in verts().filter(|&j| j != i) {
                        e.add(-1, x(i, j, k, l));
                    }
                    wr.row("L1", format!("L1_{i}_{g}_{k}_{l}"), &e, "<=", 0);
                    let mut e = Expr::new();
                    e.add(1, y(i, g, k, l)).add(-1, z(i, g, k, l));
                    wr.row("L2", format!("L2_{i}_{g}_{k}_{l}"), &e, "<=", 0);
                }
            }
        }
        for (k, l) in kl() {
            let mut e = Expr::new();
            e.add(1, tt(k, l));
            for j in wps() {
                e.add(-(act(j).start as i128 - f(0, j)), x(0, j, k, l));
            }
            wr.row("T1", format!("T1_{k}_{l}"), &e, "=", 0);
        }
        for k in 0..m {
            for l in 0..r.saturating_sub(1) {
                let mut e = Expr::new();
                e.add(1, tl(k, l)).add(-1, tt(k, l + 1)).add(big_m, u(k, l + 1));
                wr.row("T2", format!("T2_{k}_{l}"), &e, "<=", big_m);
            }
        }
    }

    let mut counts = MilpCounts { rows: wr.rows, ..Default::default() };
    let mut binaries: Vec<String> = Vec::new();
    wr.out.push_str("Bounds\n");
    if n > 0 {
        for i in wps() {
            for g in 1..=q(i) {
                let _ = writeln!(wr.out, " 0 <= {} <= {}", th(i, g), horizon as i128 - rho(i));
                counts.theta += 1;
            }
        }
        for (k, l) in kl() {
            let _ = writeln!(wr.out, " {} >= 0", tl(k, l));
            let _ = writeln!(wr.out, " {} >= 0", tt(k, l));
            binaries.push(u(k, l));
            counts.trip += 3;
        }
        for (k, l) in kl() {
            for i in verts() {
                for j in verts().filter(|&j| j != i) {
                    binaries.push(x(i, j, k, l));
                    counts.x += 1;
                }
            }
            for i in wps() {
                for g in 1..=q(i) {
                    binaries.push(y(i, g, k, l));
                    binaries.push(z(i, g, k, l));
                    counts.y += 1;
                    counts.z += 1;
                }
            }
        }
        for i in wps() {
            for a in wps().filter(|&a| a != i) {
                for g in 1..=q(i) {
                    for h in 1..=q(a) {
                        binaries.push(w(i, g, a, h));
                        counts.w += 1;
                    }
                }
            }
        }
    }
    wr.out.push_str("Binaries\n");
    for chunk in binaries.chunks(8) {
        let _ = writeln!(wr.out, " {}", chunk.join(" "));
    }
    wr.out.push_str("End\n");
    Ok(MilpModel { text: wr.out, counts, big_m: big_m as u64, scale })
}

/// Structure of an LP-format file, as read back by [`check_lp`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LpSummary {
    pub maximize: bool,
    pub objective: Vec<(i128, String)>,
    /// Row names in file order.
    pub rows: Vec<String>,
    pub binaries: BTreeSet<String>,
    pub bounded: BTreeSet<String>,
    pub used: BTreeSet<String>,
}

impl LpSummary {
    pub fn family_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            let family = r.split('_').next().unwrap_or(r);
            *out.entry(family.to_string()).or_insert(0) += 1;
        }
        out
    }

    /// Declared variables whose name starts with `prefix` and an underscore.
    pub fn count_declared(&self, prefix: &str) -> usize {
        let p = format!("{prefix}_");
        self.binaries.iter().chain(&self.bounded).filter(|v| v.starts_with(&p)).count()
    }
}

fn is_var(tok: &str) -> bool {
    let mut c = tok.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '.')
}

fn is_op(tok: &str) -> bool {
    matches!(tok, "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>")
}

fn lp_err(msg: impl Into<String>) -> MspError {
    MspError::Format { found: msg.into(), expected: "LP model" }
}

/// Parses `[sign] [coef] var` terms until a relational operator or the end.
fn parse_terms(toks: &[String], pos: &mut usize, stop_at_op: bool) -> Result<Vec<(i128, String)>, MspError> {
    let mut terms = Vec::new();
    while *pos < toks.len() {
        let t = toks[*pos].as_str();
        if stop_at_op && is_op(t) {
            break;
        }
        let mut sign = 1i128;
        let mut tok = t;
        if tok == "+" || tok == "-" {
            sign = if tok == "-" { -1 } else { 1 };
            *pos += 1;
            tok = toks.get(*pos).map(String::as_str).ok_or_else(|| lp_err("dangling sign"))?;
        } else if !terms.is_empty() {
            return Err(lp_err(format!("missing operator before `{tok}`")));
        }
        let mut coef = 1i128;
        if let Ok(c) = tok.parse::<i128>() {
            coef = c;
            *pos += 1;
            tok = toks.get(*pos).map(String::as_str).ok_or_else(|| lp_err("coefficient without variable"))?;
        }
        if !is_var(tok) {
            return Err(lp_err(format!("bad variable `{tok}`")));
        }
        terms.push((sign * coef, tok.to_string()));
        *pos += 1;
    }
    Ok(terms)
}

/// Checks `text` against the LP-format grammar used by [`emit_milp`]:
/// objective, constraints, bounds, binaries and `End`, with integer
/// coefficients. Every variable used must be declared in the bounds or
/// binaries sections and row names must be unique.
pub fn check_lp(text: &str) -> Result<LpSummary, MspError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Sec {
        Start,
        Objective,
        Rows,
        Bounds,
        Binaries,
        End,
    }
    let mut sec = Sec::Start;
    let mut summary = LpSummary::default();
    let mut obj_toks: Vec<String> = Vec::new();
    let mut row_toks: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let next = match lower.as_str() {
            "maximize" | "maximise" | "max" => Some((Sec::Objective, Sec::Start, true)),
            "minimize" | "minimise" | "min" => Some((Sec::Objective, Sec::Start, false)),
            "subject to" | "st" | "s.t." => Some((Sec::Rows, Sec::Objective, summary.maximize)),
            "bounds" => Some((Sec::Bounds, Sec::Rows, summary.maximize)),
            "binaries" | "binary" | "bin" => Some((Sec::Binaries, Sec::Bounds, summary.maximize)),
            "end" => Some((Sec::End, Sec::Binaries, summary.maximize)),
            _ => None,
        };
        if let Some((to, from, maximize)) = next {
            if sec != from {
                return Err(lp_err(format!("section `{line}` out of order")));
            }
            summary.maximize = maximize;
            sec = to;
            continue;
        }
        let toks = line.split_whitespace().map(str::to_string);
        match sec {
            Sec::Objective => obj_toks.extend(toks),
            Sec::Rows => row_toks.extend(toks),
            Sec::Bounds => {
                let t: Vec<String> = toks.collect();
                let num = |s: &str| s.parse::<i128>().is_ok();
                let var = match t.len() {
                    5 if num(&t[0]) && t[1] == "<=" && t[3] == "<=" && num(&t[4]) => &t[2],
                    3 if is_op(&t[1]) && num(&t[2]) => &t[0],
                    2 if t[1] == "free" => &t[0],
                    _ => return Err(lp_err(format!("bad bound `{line}`"))),
                };
                if !is_var(var) {
                    return Err(lp_err(format!("bad variable `{var}`")));
                }
                summary.bounded.insert(var.clone());
            }
            Sec::Binaries => {
                for v in toks {
                    if !is_var(&v) {
                        return Err(lp_err(format!("bad variable `{v}`")));
                    }
                    summary.binaries.insert(v);
                }
            }
            Sec::Start | Sec::End => return Err(lp_err(format!("unexpected `{line}`"))),
        }
    }
    if sec != Sec::End {
        return Err(lp_err("missing End"));
    }

    let mut pos = 0;
    if obj_toks.first().is_some_and(|t| t.ends_with(':')) {
        pos = 1;
    }
    summary.objective = parse_terms(&obj_toks, &mut pos, false)?;

    let mut pos = 0;
    let mut names = BTreeSet::new();
    while pos < row_toks.len() {
        let name = row_toks[pos].strip_suffix(':').ok_or_else(|| lp_err(format!("row without name at `{}`", row_toks[pos])))?;
        if !is_var(name) || !names.insert(name.to_string()) {
            return Err(lp_err(format!("bad or duplicate row name `{name}`")));
        }
        pos += 1;
        let terms = parse_terms(&row_toks, &mut pos, true)?;
        let op = row_toks.get(pos).filter(|t| is_op(t)).ok_or_else(|| lp_err(format!("row {name} lacks an operator")))?;
        let _ = op;
        let rhs = row_toks.get(pos + 1).ok_or_else(|| lp_err(format!("row {name} lacks a right-hand side")))?;
        let rhs = rhs.strip_prefix('+').unwrap_or(rhs);
        rhs.parse::<i128>().map_err(|_| lp_err(format!("row {name}: bad right-hand side `{rhs}`")))?;
        pos += 2;
        summary.used.extend(terms.into_iter().map(|(_, v)| v));
        summary.rows.push(name.to_string());
    }
    summary.used.extend(summary.objective.iter().map(|(_, v)| v.clone()));
    if let Some(v) = summary.used.iter().find(|v| !summary.binaries.contains(*v) && !summary.bounded.contains(*v)) {
        return Err(lp_err(format!("variable `{v}` is never declared")));
    }
    Ok(summary)
}
