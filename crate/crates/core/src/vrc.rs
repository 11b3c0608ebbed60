//! Vehicle-routing-centric heuristic.
//!
//! Routes are grown greedily over temporally compatible neighbours, improved
//! by inter-route tail exchanges, then split into energy-feasible trips at
//! the edges with the highest split score. Trips are handed to drones in
//! decreasing order of capture utility and batches are placed last.

use serde::{Deserialize, Serialize};

use crate::energy::{energy_of, Reserve};
use crate::error::MspError;
use crate::model::{ActivityId, Joules, Prepared, ProblemInstance, Seconds};
use crate::plan::DronePlan;
use crate::schedule::{alap_timing, MissionSchedule, TripTiming};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub energy: f64,
    pub utility: f64,
    pub compute: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { energy: 1.0, utility: 1.0, compute: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VrcParams {
    /// Neighbours considered at each routing step.
    pub k: usize,
    pub weights: ScoreWeights,
    pub reserve: Reserve,
}

impl Default for VrcParams {
    fn default() -> Self {
        VrcParams { k: 3, weights: ScoreWeights::default(), reserve: Reserve::NONE }
    }
}

/// A depot-to-depot route over activity indices, possibly too long to fly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteDraft {
    pub seq: Vec<usize>,
    /// Latest-takeoff timing, `None` when the first waypoint cannot be
    /// reached from a takeoff at time 0 or consecutive captures conflict.
    pub timing: Option<TripTiming>,
    pub temporal_ok: bool,
    pub energy_ok: bool,
}

impl RouteDraft {
    pub fn new(prep: &Prepared<'_>, seq: Vec<usize>, reserve: Reserve) -> Self {
        let timing = alap_timing(prep, &seq);
        let temporal_ok = timing.is_some_and(|t| t.landing <= prep.inst.depot.mission_horizon);
        let energy_ok = temporal_ok && fly_hover(prep, &seq) <= reserve.budget(prep.spec().battery);
        RouteDraft { seq, timing, temporal_ok, energy_ok }
    }

    pub fn feasible(&self) -> bool {
        self.temporal_ok && self.energy_ok
    }
}

/// Whether `j` may directly follow `i` on a route.
fn follows(prep: &Prepared<'_>, i: usize, j: usize) -> bool {
    prep.activity(i).end + prep.leg(i, j) <= prep.activity(j).start
}

fn reachable_from_depot(prep: &Prepared<'_>, j: usize) -> bool {
    prep.depot_leg[j] <= prep.activity(j).start
}

/// Fly and hover energy of the depot-bracketed route over `seq`, with hover
/// counted from arrival to capture end at each waypoint. Does not require
/// the route to be temporally feasible.
pub fn fly_hover(prep: &Prepared<'_>, seq: &[usize]) -> Joules {
    let (Some(&first), Some(&last)) = (seq.first(), seq.last()) else { return 0 };
    let mut fly = prep.depot_leg[first];
    let mut hover = prep.activity(first).capture_duration();
    for w in seq.windows(2) {
        let leg = prep.leg(w[0], w[1]);
        let arrival = prep.activity(w[0]).end + leg;
        fly += leg;
        hover += prep.activity(w[1]).end.saturating_sub(arrival);
    }
    fly += prep.depot_leg[last];
    energy_of(fly, hover, 0, prep.spec())
}

/// Greedy route construction. From the current position, among the `k`
/// nearest unvisited waypoints that can be reached in time, the one whose
/// capture starts first is visited next. A route closes when no candidate
/// remains. Activities unreachable from the depot start a route of their own.
pub fn build_routes_knn(prep: &Prepared<'_>, k: usize) -> Vec<Vec<usize>> {
    let k = k.max(1);
    let n = prep.len();
    let mut visited = vec![false; n];
    let mut left = n;
    let mut routes = Vec::new();
    let depot = prep.inst.depot.location;
    while left > 0 {
        let mut route: Vec<usize> = Vec::new();
        loop {
            let here = route.last().copied();
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| !visited[j])
                .filter(|&j| match here {
                    None => reachable_from_depot(prep, j),
                    Some(i) => follows(prep, i, j),
                })
                .map(|j| {
                    let from = here.map_or(depot, |i| prep.activity(i).waypoint);
                    (from.distance(&prep.activity(j).waypoint), j)
                })
                .collect();
            if cand.is_empty() {
                break;
            }
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(prep.activity(a.1).id.cmp(&prep.activity(b.1).id)));
            cand.truncate(k);
            let &(_, next) = cand
                .iter()
                .min_by_key(|(_, j)| (prep.activity(*j).start, prep.activity(*j).id))
                .expect("non-empty");
            visited[next] = true;
            left -= 1;
            route.push(next);
        }
        if route.is_empty() {
            let j = (0..n)
                .filter(|&j| !visited[j])
                .min_by_key(|&j| (prep.activity(j).start, prep.activity(j).id))
                .expect("unvisited activity");
            visited[j] = true;
            left -= 1;
            route.push(j);
        }
        routes.push(route);
    }
    routes
}

fn chain_ok(prep: &Prepared<'_>, seq: &[usize]) -> bool {
    seq.first().is_none_or(|&f| reachable_from_depot(prep, f)) && seq.windows(2).all(|w| follows(prep, w[0], w[1]))
}

/// Inter-route tail exchange. For two routes `A` and `B` and cut points
/// `i`, `j`, replaces them with `A[..i] ++ B[j..]` and `B[..j] ++ A[i..]`.
/// Each round applies the exchange with the largest strict decrease in total
/// fly and hover energy among those keeping both routes temporally feasible,
/// until none remains. Routes that are not temporally feasible to begin with
/// take no part. Emptied routes are removed.
pub fn two_opt_star(prep: &Prepared<'_>, routes: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let (mut live, fixed): (Vec<Vec<usize>>, Vec<Vec<usize>>) =
        routes.into_iter().partition(|r| chain_ok(prep, r));
    let mut energy: Vec<Joules> = live.iter().map(|r| fly_hover(prep, r)).collect();
    loop {
        let mut best: Option<(Joules, usize, usize, usize, usize)> = None;
        for a in 0..live.len() {
            for b in a + 1..live.len() {
                let before = energy[a] + energy[b];
                for i in 0..=live[a].len() {
                    for j in 0..=live[b].len() {
                        if (i == 0 && j == 0) || (i == live[a].len() && j == live[b].len()) {
                            continue;
                        }
                        let (na, nb) = exchange(&live[a], &live[b], i, j);
                        if !chain_ok(prep, &na) || !chain_ok(prep, &nb) {
                            continue;
                        }
                        let after = fly_hover(prep, &na) + fly_hover(prep, &nb);
                        if after < before {
                            let gain = before - after;
                            if best.is_none_or(|(g, ..)| gain > g) {
                                best = Some((gain, a, b, i, j));
                            }
                        }
                    }
                }
            }
        }
        let Some((_, a, b, i, j)) = best else { break };
        let (na, nb) = exchange(&live[a], &live[b], i, j);
        energy[a] = fly_hover(prep, &na);
        energy[b] = fly_hover(prep, &nb);
        live[a] = na;
        live[b] = nb;
        if live[b].is_empty() {
            live.remove(b);
            energy.remove(b);
        }
        if live[a].is_empty() {
            live.remove(a);
            energy.remove(a);
        }
    }
    live.extend(fixed);
    live
}

fn exchange(a: &[usize], b: &[usize], i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    let na = a[..i].iter().chain(&b[j..]).copied().collect();
    let nb = b[..j].iter().chain(&a[i..]).copied().collect();
    (na, nb)
}

/// Scores of the edge between positions `g` and `g + 1` of a route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub edge: usize,
    pub energy: f64,
    pub utility: f64,
    pub compute: f64,
    pub total: f64,
}

/// Sequential partition of `seq` into maximal prefixes whose fly and hover
/// energy fits `budget`, as `(first, last)` position pairs. A waypoint that
/// alone exceeds the budget forms its own part.
pub fn viable_partition(prep: &Prepared<'_>, seq: &[usize], budget: Joules) -> Vec<(usize, usize)> {
    let mut parts = Vec::new();
    let mut lo = 0;
    while lo < seq.len() {
        let mut hi = lo;
        while hi + 1 < seq.len() && fly_hover(prep, &seq[lo..=hi + 1]) <= budget {
            hi += 1;
        }
        parts.push((lo, hi));
        lo = hi + 1;
    }
    parts
}

fn capture_utility(prep: &Prepared<'_>, seq: &[usize]) -> u64 {
    seq.iter().map(|&i| prep.activity(i).gamma_capture as u64).sum()
}

/// For each activity on the route, how many of its batches collide with a
/// batch of another activity when every batch is placed as early as possible
/// in its preferred window and nothing else occupies the processor.
fn soft_overlaps(prep: &Prepared<'_>, seq: &[usize]) -> (Vec<usize>, usize) {
    let mut slots: Vec<Vec<(Seconds, Seconds)>> = Vec::with_capacity(seq.len());
    for &i in seq {
        let b = &prep.batches[i];
        let mut prev = 0;
        let mut own = Vec::with_capacity(b.count as usize);
        for k in b.indices() {
            let start = b.available_at(k).max(prev);
            prev = start + b.runtime;
            own.push((start, prev));
        }
        slots.push(own);
    }
    let total = slots.iter().map(Vec::len).sum();
    let counts = (0..seq.len())
        .map(|g| {
            slots[g]
                .iter()
                .filter(|&&(s, e)| {
                    s < e
                        && slots.iter().enumerate().any(|(h, other)| {
                            h != g && other.iter().any(|&(os, oe)| os < oe && s < oe && os < e)
                        })
                })
                .count()
        })
        .collect();
    (counts, total)
}

/// Split scores for every edge of `seq`, using `budget` as the battery.
pub fn score_edges(prep: &Prepared<'_>, seq: &[usize], budget: Joules, weights: &ScoreWeights) -> Vec<SplitScore> {
    if seq.len() < 2 {
        return Vec::new();
    }
    let parts = viable_partition(prep, seq, budget);
    let (overlaps, batch_total) = soft_overlaps(prep, seq);
    (0..seq.len() - 1)
        .map(|g| {
            let &(lo, hi) = parts.iter().find(|(lo, hi)| (*lo..=*hi).contains(&g)).expect("partition covers route");
            let energy = (fly_hover(prep, &seq[lo..=g]) as f64 / budget as f64).min(1.0);
            let mut l = g + 1;
            while l + 1 < seq.len() && fly_hover(prep, &seq[g + 1..=l + 1]) <= budget {
                l += 1;
            }
            let denom = capture_utility(prep, &seq[lo..=hi]);
            let utility =
                if denom == 0 { 0.0 } else { capture_utility(prep, &seq[g + 1..=l]) as f64 / denom as f64 };
            let compute = if batch_total == 0 { 0.0 } else { overlaps[g] as f64 / batch_total as f64 };
            let total = weights.energy * energy + weights.utility * utility + weights.compute * compute;
            SplitScore { edge: g, energy, utility, compute, total }
        })
        .collect()
}

/// Splits each route recursively at its highest-scoring edge until every
/// part can be flown. Returns the feasible trips and the activities of
/// single-waypoint parts that still cannot be flown.
pub fn split_routes(
    prep: &Prepared<'_>,
    routes: Vec<Vec<usize>>,
    reserve: Reserve,
    weights: &ScoreWeights,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let budget = reserve.budget(prep.spec().battery);
    let mut trips = Vec::new();
    let mut dropped = Vec::new();
    let mut stack: Vec<Vec<usize>> = routes.into_iter().rev().collect();
    while let Some(seq) = stack.pop() {
        if seq.is_empty() {
            continue;
        }
        if RouteDraft::new(prep, seq.clone(), reserve).feasible() {
            trips.push(seq);
            continue;
        }
        if seq.len() == 1 {
            dropped.push(seq[0]);
            continue;
        }
        let scores = score_edges(prep, &seq, budget, weights);
        let g = scores.iter().fold(0, |best, s| if s.total > scores[best].total { s.edge } else { best });
        stack.push(seq[g + 1..].to_vec());
        stack.push(seq[..=g].to_vec());
    }
    (trips, dropped)
}

pub fn vrc_schedule(inst: &ProblemInstance, params: &VrcParams) -> Result<MissionSchedule, MspError> {
    let prep = Prepared::new(inst)?;
    let routes = build_routes_knn(&prep, params.k);
    let routes = two_opt_star(&prep, routes);
    let (mut trips, unflyable) = split_routes(&prep, routes, params.reserve, &params.weights);

    let key = |seq: &Vec<usize>| {
        let t = alap_timing(&prep, seq).expect("split trips are feasible");
        (std::cmp::Reverse(capture_utility(&prep, seq)), t.takeoff, prep.activity(seq[0]).id)
    };
    trips.sort_by_cached_key(key);

    let mut plans: Vec<DronePlan> = (0..inst.fleet.count).map(DronePlan::new).collect();
    let mut assigned: Vec<Vec<(usize, u32)>> = vec![Vec::new(); plans.len()];
    let mut dropped: Vec<ActivityId> = unflyable.iter().map(|&i| prep.activity(i).id).collect();
    for seq in trips {
        let hit = plans
            .iter_mut()
            .enumerate()
            .find_map(|(d, p)| p.try_add_trip(&prep, seq.clone(), params.reserve).map(|k| (d, k)));
        match hit {
            Some((d, key)) => assigned[d].extend(seq.iter().map(|&i| (i, key))),
            None => dropped.extend(seq.iter().map(|&i| prep.activity(i).id)),
        }
    }
    for (plan, mut acts) in plans.iter_mut().zip(assigned) {
        acts.sort_by_key(|&(i, _)| (prep.activity(i).start, prep.activity(i).id));
        for (i, key) in acts {
            plan.schedule_batches(&prep, i, key, params.reserve);
        }
    }

    dropped.sort();
    Ok(MissionSchedule {
        drones: plans.into_iter().filter(|p| !p.is_empty()).map(|p| p.into_mission(&prep)).collect(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jsc::{jsc_schedule, JscParams};
    use crate::model::{Activity, DepotConfig, DroneSpec, Point3};
    use crate::schedule::{compute_utility, validate_schedule};

    fn act(id: u32, x: f64, y: f64, start: u64, end: u64) -> Activity {
        Activity {
            id: ActivityId(id),
            waypoint: Point3::new(x, y, 0.0),
            start,
            end,
            kappa: 0,
            deadline: end + 120,
            gamma_capture: 1,
            gamma_onboard: 1,
            gamma_ontime: 1,
        }
    }

    fn inst(m: u32, activities: Vec<Activity>) -> ProblemInstance {
        ProblemInstance {
            depot: DepotConfig { location: Point3::ORIGIN, mission_horizon: 14_400, max_trips_per_drone: 4 },
            fleet: DroneSpec::reference(m),
            beta: 60,
            activities,
        }
    }

    const E: Joules = 1_350_000;

    #[test]
    fn single_activity_route() {
        let i = inst(1, vec![act(1, 400.0, 0.0, 1000, 1060)]);
        let p = Prepared::new(&i).unwrap();
        assert_eq!(build_routes_knn(&p, 3), vec![vec![0]]);
    }

    #[test]
    fn collinear_waypoints_follow_window_order() {
        // F = 100 s between neighbours, 100 s gaps between windows
        let i = inst(
            1,
            vec![act(3, 1200.0, 0.0, 1400, 1460), act(1, 400.0, 0.0, 1000, 1060), act(2, 800.0, 0.0, 1160, 1300)],
        );
        let p = Prepared::new(&i).unwrap();
        assert_eq!(build_routes_knn(&p, 3), vec![vec![1, 2, 0]]);
    }

    #[test]
    fn identical_windows_need_separate_routes() {
        let i = inst(1, vec![act(1, 400.0, 0.0, 1000, 1060), act(2, -400.0, 0.0, 1000, 1060)]);
        let p = Prepared::new(&i).unwrap();
        assert_eq!(build_routes_knn(&p, 3), vec![vec![0], vec![1]]);
    }

    #[test]
    fn k_limits_the_candidate_set() {
        // from the depot: a at 400 m starts late, b at 1200 m starts early
        let i = inst(1, vec![act(1, 400.0, 0.0, 3000, 3060), act(2, 1200.0, 0.0, 1000, 1060)]);
        let p = Prepared::new(&i).unwrap();
        // k = 1 sees only the nearest waypoint
        assert_eq!(build_routes_knn(&p, 1), vec![vec![0], vec![1]]);
        // k = 2 picks the earlier start, then a is reachable after b
        assert_eq!(build_routes_knn(&p, 2), vec![vec![1, 0]]);
    }

    #[test]
    fn unreachable_activity_gets_its_own_route() {
        // 4000 m away but capture starts at 500 s: no takeoff time works
        let i = inst(1, vec![act(1, 4000.0, 0.0, 500, 560), act(2, 400.0, 0.0, 1000, 1060)]);
        let p = Prepared::new(&i).unwrap();
        let routes = build_routes_knn(&p, 3);
        assert_eq!(routes, vec![vec![1], vec![0]]);
    }

    fn total(p: &Prepared<'_>, routes: &[Vec<usize>]) -> Joules {
        routes.iter().map(|r| fly_hover(p, r)).sum()
    }

    #[test]
    fn two_opt_star_single_route_unchanged() {
        let i = inst(1, vec![act(1, 400.0, 0.0, 1000, 1060), act(2, 800.0, 0.0, 1200, 1260)]);
        let p = Prepared::new(&i).unwrap();
        assert_eq!(two_opt_star(&p, vec![vec![0, 1]]), vec![vec![0, 1]]);
    }

    #[test]
    fn two_opt_star_uncrosses_routes() {
        // A runs east then crosses to the far west, B runs west then east.
        let i = inst(
            2,
            vec![
                act(1, 800.0, 0.0, 1000, 1060),
                act(2, -800.0, 0.0, 2000, 2060),
                act(3, -800.0, 100.0, 1000, 1060),
                act(4, 800.0, 100.0, 2000, 2060),
            ],
        );
        let p = Prepared::new(&i).unwrap();
        let start = vec![vec![0, 1], vec![2, 3]];
        let before = total(&p, &start);

        // every single exchange, enumerated
        let mut best_single = before;
        for ii in 0..=2 {
            for jj in 0..=2 {
                let (a, b) = exchange(&start[0], &start[1], ii, jj);
                if chain_ok(&p, &a) && chain_ok(&p, &b) {
                    best_single = best_single.min(fly_hover(&p, &a) + fly_hover(&p, &b));
                }
            }
        }
        assert!(best_single < before);

        let out = two_opt_star(&p, start);
        let after = total(&p, &out);
        assert!(after <= best_single);
        let mut seen: Vec<usize> = out.iter().flatten().copied().collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
        // fixed point
        assert_eq!(two_opt_star(&p, out.clone()), out);
    }

    /// Four waypoints 100 s apart along the x axis, each with 600 s of hover.
    fn ladder() -> ProblemInstance {
        inst(
            1,
            vec![
                act(1, 400.0, 0.0, 1000, 1600),
                act(2, 800.0, 0.0, 1700, 2300),
                act(3, 1200.0, 0.0, 2400, 3000),
                act(4, 1600.0, 0.0, 3100, 3700),
            ],
        )
    }

    #[test]
    fn partition_and_energy_scores_by_hand() {
        let i = ladder();
        let p = Prepared::new(&i).unwrap();
        // E(1) = 200·750 + 600·700, E(1,2) = 400·750 + 1200·700
        assert_eq!(fly_hover(&p, &[0]), 570_000);
        assert_eq!(fly_hover(&p, &[0, 1]), 1_140_000);
        // E(1,3) = 600·750 + 1800·700 > E
        assert_eq!(fly_hover(&p, &[0, 1, 2]), 1_710_000);
        // E(3,4) = 800·750 + 1200·700 > E; E(3) = 600·750 + 600·700
        assert_eq!(fly_hover(&p, &[2, 3]), 1_440_000);
        assert_eq!(fly_hover(&p, &[2]), 870_000);
        assert_eq!(viable_partition(&p, &[0, 1, 2, 3], E), vec![(0, 1), (2, 2), (3, 3)]);

        let s = score_edges(&p, &[0, 1, 2, 3], E, &ScoreWeights::default());
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].energy, 570_000.0 / 1_350_000.0);
        assert_eq!(s[1].energy, 1_140_000.0 / 1_350_000.0);
        assert_eq!(s[2].energy, 870_000.0 / 1_350_000.0);
        assert!(s[1].energy > s[0].energy);
        // new trip from waypoint 2 extends to waypoint 3: E(2,3) = 600·750 + 1200·700
        assert_eq!(fly_hover(&p, &[1, 2]), 1_290_000);
        assert_eq!(s[0].utility, 1.0);
        assert_eq!(s[1].utility, 0.5);
        assert_eq!(s[2].utility, 1.0);
        assert!(s.iter().all(|x| x.compute == 0.0));
        assert_eq!(s[1].total, s[1].energy + 0.5);
    }

    #[test]
    fn feasible_draft_scores_below_one() {
        let i = inst(1, vec![act(1, 400.0, 0.0, 1000, 1060), act(2, 800.0, 0.0, 1200, 1260)]);
        let p = Prepared::new(&i).unwrap();
        assert_eq!(viable_partition(&p, &[0, 1], E), vec![(0, 1)]);
        let s = score_edges(&p, &[0, 1], E, &ScoreWeights::default());
        assert!(s.iter().all(|x| x.energy < 1.0 && x.compute == 0.0));
    }

    #[test]
    fn compute_score_counts_colliding_batches() {
        let spec = DroneSpec::reference(1);
        let mut a = act(1, 400.0, 0.0, 1000, 1120);
        let mut b = act(2, 800.0, 0.0, 1220, 1340);
        // two batches of 200 s each: a's run [1060,1260) and [1260,1460)
        a.kappa = 400 * spec.proc_speed;
        a.deadline = 2000;
        // b's first batch [1280,1480) collides with a's second, b's second is clear
        b.kappa = 400 * spec.proc_speed;
        b.deadline = 2000;
        let i = inst(1, vec![a, b]);
        let p = Prepared::new(&i).unwrap();
        let (counts, total) = soft_overlaps(&p, &[0, 1]);
        assert_eq!(total, 4);
        assert_eq!(counts, vec![1, 1]);
        let s = score_edges(&p, &[0, 1], E, &ScoreWeights::default());
        assert_eq!(s[0].compute, 0.25);
    }

    #[test]
    fn split_feasible_route_unchanged() {
        let i = inst(1, vec![act(1, 400.0, 0.0, 1000, 1060), act(2, 800.0, 0.0, 1200, 1260)]);
        let p = Prepared::new(&i).unwrap();
        let (t, d) = split_routes(&p, vec![vec![0, 1]], Reserve::NONE, &ScoreWeights::default());
        assert_eq!(t, vec![vec![0, 1]]);
        assert!(d.is_empty());
    }

    #[test]
    fn split_two_waypoint_route() {
        let i = ladder();
        let p = Prepared::new(&i).unwrap();
        let (t, d) = split_routes(&p, vec![vec![1, 2]], Reserve::new(0.1).unwrap(), &ScoreWeights::default());
        assert_eq!(t, vec![vec![1], vec![2]]);
        assert!(d.is_empty());
    }

    #[test]
    fn split_ladder_covers_everything() {
        let i = ladder();
        let p = Prepared::new(&i).unwrap();
        let (t, d) = split_routes(&p, vec![vec![0, 1, 2, 3]], Reserve::NONE, &ScoreWeights::default());
        assert!(d.is_empty());
        assert_eq!(t.concat(), vec![0, 1, 2, 3]);
        assert!(t.iter().all(|s| fly_hover(&p, s) <= E));
    }

    #[test]
    fn unflyable_single_waypoint_is_dropped() {
        let i = inst(1, vec![act(1, 3000.0, 0.0, 1000, 2000)]);
        let p = Prepared::new(&i).unwrap();
        let (t, d) = split_routes(&p, vec![vec![0]], Reserve::NONE, &ScoreWeights::default());
        assert!(t.is_empty());
        assert_eq!(d, vec![0]);
    }

    #[test]
    fn single_activity_matches_jsc() {
        let mut a = act(1, 400.0, 0.0, 1000, 1180);
        a.kappa = 33 * DroneSpec::reference(1).proc_speed;
        let i = inst(1, vec![a]);
        let v = vrc_schedule(&i, &VrcParams::default()).unwrap();
        let j = jsc_schedule(&i, &JscParams::default()).unwrap();
        assert_eq!(v, j);
        assert!(validate_schedule(&v, &i).is_empty());
    }

    #[test]
    fn ladder_schedule_validates() {
        let i = inst(2, ladder().activities);
        let s = vrc_schedule(&i, &VrcParams::default()).unwrap();
        assert!(validate_schedule(&s, &i).is_empty(), "{:?}", validate_schedule(&s, &i));
        assert_eq!(s.scheduled_count(), 4);
        assert_eq!(compute_utility(&s, &i).capture_total, crate::model::Utility::from_integer(4));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = ProblemInstance> {
            proptest::collection::vec((-2500.0..2500.0f64, -2500.0..2500.0f64, 0u64..8000, 30u64..600, 0u64..600), 1..9)
                .prop_map(|v| {
                    let spec = DroneSpec::reference(2);
                    let acts = v
                        .into_iter()
                        .enumerate()
                        .map(|(k, (x, y, s, d, c))| {
                            let mut a = act(k as u32, x, y, s, s + d);
                            a.kappa = c * spec.proc_speed;
                            a
                        })
                        .collect();
                    inst(2, acts)
                })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn pipeline_invariants(i in instance()) {
                let p = Prepared::new(&i).unwrap();
                let routes = build_routes_knn(&p, 3);
                let mut seen: Vec<usize> = routes.iter().flatten().copied().collect();
                seen.sort();
                prop_assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());

                let before = total(&p, &routes);
                let improved = two_opt_star(&p, routes);
                prop_assert!(total(&p, &improved) <= before);

                let (trips, dropped) = split_routes(&p, improved, Reserve::NONE, &ScoreWeights::default());
                let mut cover: Vec<usize> = trips.iter().flatten().chain(&dropped).copied().collect();
                cover.sort();
                prop_assert_eq!(cover, (0..p.len()).collect::<Vec<_>>());
                for t in &trips {
                    prop_assert!(RouteDraft::new(&p, t.clone(), Reserve::NONE).feasible());
                }

                let s = vrc_schedule(&i, &VrcParams::default()).unwrap();
                prop_assert!(validate_schedule(&s, &i).is_empty(), "{:?}", validate_schedule(&s, &i));
                prop_assert_eq!(&s, &vrc_schedule(&i, &VrcParams::default()).unwrap());
            }
        }
    }
}
