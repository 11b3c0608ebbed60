//! Job-scheduling-centric heuristic.
//!
//! Activities are grouped by spatio-temporal density, drones are handed to
//! groups in proportion to group size as they become free, and each activity
//! is then appended greedily to the first allocated drone that can still fly
//! it. Batches are placed right after each successful assignment.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::energy::Reserve;
use crate::error::MspError;
use crate::model::{Activity, ActivityId, Prepared, ProblemInstance};
use crate::plan::DronePlan;
use crate::schedule::MissionSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JscParams {
    /// Spatial neighbourhood radius, m.
    pub eps_space: f64,
    /// Temporal neighbourhood radius on capture start, s.
    pub eps_time: u64,
    pub min_pts: usize,
    pub reserve: Reserve,
}

impl Default for JscParams {
    fn default() -> Self {
        JscParams { eps_space: 1000.0, eps_time: 1800, min_pts: 2, reserve: Reserve::NONE }
    }
}

/// A group of activities served by the same set of drones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub id: usize,
    /// Indices into the instance's activity list.
    pub members: Vec<usize>,
    /// Earliest take-off, `min (t − F(depot, λ))`. May be negative.
    pub earliest_takeoff: i64,
    /// Latest landing, `max (t̄ + F(λ, depot))`.
    pub latest_landing: i64,
}

/// Density-based clustering over (waypoint, capture start).
///
/// Two activities are neighbours when their waypoints are within
/// `eps_space` meters AND their capture starts within `eps_time` seconds.
/// A point's neighbourhood includes the point itself. Returns clusters in
/// discovery order followed by each noise point as a singleton.
pub fn st_dbscan(activities: &[Activity], eps_space: f64, eps_time: u64, min_pts: usize) -> Vec<Vec<usize>> {
    let n = activities.len();
    let neighbours = |i: usize| -> Vec<usize> {
        let a = &activities[i];
        (0..n)
            .filter(|&j| {
                let b = &activities[j];
                a.start.abs_diff(b.start) <= eps_time && a.waypoint.distance(&b.waypoint) <= eps_space
            })
            .collect()
    };

    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i] != UNSEEN {
            continue;
        }
        let seeds = neighbours(i);
        if seeds.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let c = clusters.len();
        clusters.push(Vec::new());
        label[i] = c;
        let mut stack: Vec<usize> = seeds.into_iter().filter(|&j| j != i).collect();
        while let Some(j) = stack.pop() {
            if label[j] == NOISE {
                label[j] = c;
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = c;
            let nb = neighbours(j);
            if nb.len() >= min_pts {
                stack.extend(nb.into_iter().filter(|&k| label[k] == UNSEEN || label[k] == NOISE));
            }
        }
    }
    for (i, &l) in label.iter().enumerate() {
        if l < clusters.len() {
            clusters[l].push(i);
        }
    }
    clusters.extend(label.iter().enumerate().filter(|(_, &l)| l == NOISE).map(|(i, _)| vec![i]));
    clusters
}

/// Clusters with their service windows, sorted by earliest take-off.
pub fn build_clusters(prep: &Prepared<'_>, params: &JscParams) -> Vec<Cluster> {
    let groups = st_dbscan(&prep.inst.activities, params.eps_space, params.eps_time, params.min_pts);
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let earliest_takeoff = members
                .iter()
                .map(|&i| prep.activity(i).start as i64 - prep.depot_leg[i] as i64)
                .min()
                .unwrap_or(0);
            let latest_landing =
                members.iter().map(|&i| (prep.activity(i).end + prep.depot_leg[i]) as i64).max().unwrap_or(0);
            Cluster { id, members, earliest_takeoff, latest_landing }
        })
        .collect();
    clusters.sort_by_key(|c| (c.earliest_takeoff, c.id));
    clusters
}

/// Drones granted to one cluster for its window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub cluster: usize,
    pub drones: Vec<u32>,
    pub from: i64,
    pub until: i64,
}

/// Hands drones to clusters in order of earliest take-off.
///
/// Cluster `C` receives `⌊free · |C| / remaining⌋` drones, at least one while
/// any drone is free, where `remaining` counts activities of `C` and all later
/// clusters. Drones return to the pool once a cluster's latest landing is at
/// or before the next cluster's earliest take-off. A cluster that gets no
/// drone has its activities dropped.
pub fn allocate_drones(clusters: &[Cluster], m: u32) -> Vec<Allocation> {
    let mut free: BTreeSet<u32> = (0..m).collect();
    let mut busy: Vec<(i64, Vec<u32>)> = Vec::new();
    let mut remaining: usize = clusters.iter().map(|c| c.members.len()).sum();
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        busy.retain(|(release, drones)| {
            if *release <= c.earliest_takeoff {
                free.extend(drones.iter().copied());
                false
            } else {
                true
            }
        });
        let avail = free.len();
        let size = c.members.len();
        let mut count = if remaining == 0 { 0 } else { avail * size / remaining };
        if count == 0 && avail > 0 {
            count = 1;
        }
        let drones: Vec<u32> = free.iter().copied().take(count).collect();
        for d in &drones {
            free.remove(d);
        }
        if !drones.is_empty() {
            busy.push((c.latest_landing, drones.clone()));
        }
        remaining -= size;
        out.push(Allocation { cluster: c.id, drones, from: c.earliest_takeoff, until: c.latest_landing });
    }
    out
}

pub fn jsc_schedule(inst: &ProblemInstance, params: &JscParams) -> Result<MissionSchedule, MspError> {
    let prep = Prepared::new(inst)?;
    let clusters = build_clusters(&prep, params);
    let allocations = allocate_drones(&clusters, inst.fleet.count);
    let mut plans: Vec<DronePlan> = (0..inst.fleet.count).map(DronePlan::new).collect();
    let mut dropped: Vec<ActivityId> = Vec::new();

    for (cluster, alloc) in clusters.iter().zip(&allocations) {
        debug_assert_eq!(cluster.id, alloc.cluster);
        let mut members = cluster.members.clone();
        members.sort_by_key(|&i| (prep.activity(i).start, prep.activity(i).id));
        for i in members {
            let placed = alloc.drones.iter().find_map(|&d| {
                let plan = &mut plans[d as usize];
                plan.try_insert(&prep, i, params.reserve).map(|key| (d, key))
            });
            match placed {
                Some((d, key)) => plans[d as usize].schedule_batches(&prep, i, key, params.reserve),
                None => dropped.push(prep.activity(i).id),
            }
        }
    }

    dropped.sort();
    Ok(MissionSchedule {
        drones: plans.into_iter().filter(|p| !p.is_empty()).map(|p| p.into_mission(&prep)).collect(),
        dropped,
    })
}
