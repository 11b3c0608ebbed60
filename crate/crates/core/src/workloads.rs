//! Seeded workload generators.
//!
//! All randomness comes from ChaCha8 seeded with a `u64`, drawn in a fixed
//! order, so an instance is a pure function of its parameters and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MspError;
use crate::model::{Activity, ActivityId, DepotConfig, DroneSpec, Point3, ProblemInstance, Seconds};

/// Per-batch runtime of the lighter detection network, s.
pub const MNET_RUNTIME: Seconds = 11;
/// Per-batch runtime of the heavier segmentation network, s.
pub const RNET_RUNTIME: Seconds = 98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub drones: u32,
    /// Activities per drone.
    pub load: u32,
    pub seed: u64,
    pub fleet: DroneSpec,
    pub beta: Seconds,
    pub runtime: Seconds,
    pub capture_min: Seconds,
    pub capture_max: Seconds,
    pub deadline_offset: Seconds,
    pub utility_min: u32,
    pub utility_max: u32,
    pub horizon: Seconds,
    pub radius: f64,
    pub altitude: f64,
    pub slack_min: Seconds,
    pub slack_max: Seconds,
}

impl ScenarioParams {
    pub fn new(drones: u32, load: u32, seed: u64) -> Self {
        ScenarioParams {
            drones,
            load,
            seed,
            fleet: DroneSpec::reference(drones),
            beta: 60,
            runtime: MNET_RUNTIME,
            capture_min: 60,
            capture_max: 300,
            deadline_offset: 120,
            utility_min: 1,
            utility_max: 5,
            horizon: 14_400,
            radius: 3500.0,
            altitude: 50.0,
            slack_min: 60,
            slack_max: 300,
        }
    }

    pub fn with_runtime(mut self, runtime: Seconds) -> Self {
        self.runtime = runtime;
        self
    }

    pub fn activity_count(&self) -> usize {
        (self.drones * self.load) as usize
    }

    /// Road-graph size that a depth-first pick of all activities can never
    /// exhaust: each pick rejects at most nine vertices.
    pub fn dfs_graph_size(&self) -> usize {
        (10 * self.activity_count()).max(2)
    }

    fn check(&self) -> Result<(), MspError> {
        let bad = |m: &str| Err(MspError::InvalidParameter(m.to_string()));
        if self.drones == 0 {
            return bad("at least one drone is required");
        }
        if self.beta == 0 {
            return bad("batch interval must be positive");
        }
        if self.capture_min == 0 || self.capture_min > self.capture_max {
            return bad("capture duration range is empty");
        }
        if self.utility_min > self.utility_max || self.slack_min > self.slack_max {
            return bad("empty utility or slack range");
        }
        if !(self.radius > 0.0) {
            return bad("radius must be positive");
        }
        Ok(())
    }

    fn instance(&self, activities: Vec<Activity>) -> ProblemInstance {
        ProblemInstance {
            depot: DepotConfig {
                location: Point3::ORIGIN,
                mission_horizon: self.horizon,
                max_trips_per_drone: self.load.max(1),
            },
            fleet: DroneSpec { count: self.drones, ..self.fleet.clone() },
            beta: self.beta,
            activities,
        }
    }

    fn activity(&self, rng: &mut ChaCha8Rng, id: u32, waypoint: Point3, start: Seconds) -> Activity {
        let duration = rng.gen_range(self.capture_min..=self.capture_max);
        let end = start + duration;
        let q = duration.div_ceil(self.beta);
        let mut gamma = || rng.gen_range(self.utility_min..=self.utility_max);
        let (gamma_capture, gamma_onboard, gamma_ontime) = (gamma(), gamma(), gamma());
        Activity {
            id: ActivityId(id),
            waypoint,
            start,
            end,
            kappa: self.runtime * self.fleet.proc_speed * q,
            deadline: end + self.deadline_offset,
            gamma_capture,
            gamma_onboard,
            gamma_ontime,
        }
    }
}

fn point_in_disc(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    loop {
        let x = rng.gen_range(-radius..=radius);
        let y = rng.gen_range(-radius..=radius);
        if x * x + y * y <= radius * radius {
            return (x, y);
        }
    }
}

/// Waypoints uniform in the disc around the depot, capture starts uniform in
/// `(0, horizon]`.
pub fn gen_rnd(params: &ScenarioParams) -> Result<ProblemInstance, MspError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let activities = (0..params.activity_count())
        .map(|k| {
            let (x, y) = point_in_disc(&mut rng, params.radius);
            let start = rng.gen_range(1..=params.horizon);
            params.activity(&mut rng, k as u32 + 1, Point3::new(x, y, params.altitude), start)
        })
        .collect();
    Ok(params.instance(activities))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub a: usize,
    pub b: usize,
    /// Meters.
    pub length: f64,
}

/// Undirected road network around the depot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadGraph {
    pub vertices: Vec<Point3>,
    pub edges: Vec<RoadEdge>,
}

impl RoadGraph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Checks edge endpoints and connectivity.
    pub fn validate(&self) -> Result<(), MspError> {
        let n = self.vertices.len();
        if let Some(e) = self.edges.iter().find(|e| e.a >= n || e.b >= n) {
            return Err(MspError::InvalidParameter(format!("edge {}-{} names a missing vertex", e.a, e.b)));
        }
        if !self.is_connected() {
            return Err(MspError::InvalidParameter("road graph is not connected".into()));
        }
        Ok(())
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn find(&mut self, mut v: usize) -> usize {
        while self.0[v] != v {
            self.0[v] = self.0[self.0[v]];
            v = self.0[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Random geometric graph on the ground plane within `radius` of the depot.
///
/// Vertices closer than `radius·√(6/n)` are joined, which gives an average
/// degree near six. Remaining components are then linked by their shortest
/// crossing pairs, shortest first.
pub fn synth_road_graph(radius: f64, vertex_count: usize, seed: u64) -> Result<RoadGraph, MspError> {
    if vertex_count < 2 {
        return Err(MspError::InvalidParameter("a road graph needs at least two vertices".into()));
    }
    if !(radius > 0.0) {
        return Err(MspError::InvalidParameter("radius must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices: Vec<Point3> = (0..vertex_count)
        .map(|_| {
            let (x, y) = point_in_disc(&mut rng, radius);
            Point3::new(x, y, 0.0)
        })
        .collect();
    let reach = radius * (6.0 / vertex_count as f64).sqrt();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(vertex_count * (vertex_count - 1) / 2);
    for a in 0..vertex_count {
        for b in a + 1..vertex_count {
            pairs.push((vertices[a].distance(&vertices[b]), a, b));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then((p.1, p.2).cmp(&(q.1, q.2))));
    let mut sets = DisjointSets((0..vertex_count).collect());
    let mut edges = Vec::new();
    for (length, a, b) in pairs {
        if sets.union(a, b) || length <= reach {
            edges.push(RoadEdge { a, b, length });
        }
    }
    Ok(RoadGraph { vertices, edges })
}

/// Depth-first pick of activity waypoints along the road network.
///
/// The traversal starts at the vertex nearest the depot and visits
/// neighbours in index order. Each visited vertex is picked with probability
/// `p`, which starts at 1/10, grows by 1/10 per rejection and resets on a
/// pick. Capture starts grow along the traversal: each one follows the
/// previous by the straight-line travel time between consecutive visited
/// vertices plus a slack uniform in `[slack_min, slack_max]`. When the last
/// capture could not finish and fly home within the horizon, all starts are
/// scaled down proportionally, keeping them strictly increasing.
pub fn gen_dfs(graph: &RoadGraph, params: &ScenarioParams) -> Result<ProblemInstance, MspError> {
    params.check()?;
    graph.validate()?;
    let n = params.activity_count();
    if n == 0 {
        return Ok(params.instance(Vec::new()));
    }
    if graph.vertices.is_empty() {
        return Err(MspError::GraphExhausted { selected: 0, requested: n });
    }
    let depot = Point3::ORIGIN;
    let root = (0..graph.vertices.len())
        .min_by(|&a, &b| {
            let (da, db) = (graph.vertices[a].distance(&depot), graph.vertices[b].distance(&depot));
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("non-empty graph");
    let adj = graph.adjacency();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seen = vec![false; graph.vertices.len()];
    let mut stack = vec![root];
    let mut tenths = 1u32;
    let mut clock: Seconds = 0;
    let mut prev = depot;
    let mut picks: Vec<(Point3, Seconds)> = Vec::with_capacity(n);
    while let Some(v) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        stack.extend(adj[v].iter().rev().filter(|&&u| !seen[u]));

        let here = graph.vertices[v];
        let ground = Point3::new(here.x, here.y, 0.0);
        clock += (ground.distance(&prev) / params.fleet.speed).ceil() as Seconds;
        prev = ground;
        if rng.gen_range(0..10) < tenths {
            tenths = 1;
            clock += rng.gen_range(params.slack_min..=params.slack_max);
            picks.push((Point3::new(here.x, here.y, params.altitude), clock));
            if picks.len() == n {
                break;
            }
        } else {
            tenths += 1;
        }
    }
    if picks.len() < n {
        return Err(MspError::GraphExhausted { selected: picks.len(), requested: n });
    }

    let latest = params
        .horizon
        .saturating_sub(params.capture_max)
        .saturating_sub((params.radius / params.fleet.speed).ceil() as Seconds);
    let last = picks[n - 1].1;
    if last > latest {
        let mut floor = 0;
        for p in &mut picks {
            let scaled = (p.1 as u128 * latest as u128 / last as u128) as Seconds;
            p.1 = scaled.max(floor + 1);
            floor = p.1;
        }
    }

    let activities = picks
        .into_iter()
        .enumerate()
        .map(|(k, (waypoint, start))| params.activity(&mut rng, k as u32 + 1, waypoint, start))
        .collect();
    Ok(params.instance(activities))
}

/// Small instances the exhaustive solver can handle: at most five
/// activities, two drones, two trips each and eight batches in total, packed
/// closely around the depot so that trips, energy and the processor all
/// compete.
pub fn gen_tiny(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drones = rng.gen_range(1..=2);
    let n = rng.gen_range(2..=5usize);
    let fleet = DroneSpec::reference(drones);
    let mut batches_left = 8u64;
    let activities = (0..n)
        .map(|k| {
            let (x, y) = point_in_disc(&mut rng, 1200.0);
            let start = rng.gen_range(300..=2400);
            let left_after = (n - k - 1) as u64;
            let max_q = batches_left.saturating_sub(left_after).clamp(1, 2);
            let q = rng.gen_range(1..=max_q);
            batches_left -= q;
            let duration = rng.gen_range((q - 1) * 60 + 1..=q * 60);
            let runtime = rng.gen_range(5..=90);
            let end = start + duration;
            Activity {
                id: ActivityId(k as u32 + 1),
                waypoint: Point3::new(x, y, 50.0),
                start,
                end,
                kappa: runtime * fleet.proc_speed * q,
                deadline: end + rng.gen_range(20..=150),
                gamma_capture: rng.gen_range(1..=5),
                gamma_onboard: rng.gen_range(1..=5),
                gamma_ontime: rng.gen_range(1..=5),
            }
        })
        .collect();
    ProblemInstance {
        depot: DepotConfig { location: Point3::ORIGIN, mission_horizon: 3600, max_trips_per_drone: 2 },
        fleet,
        beta: 60,
        activities,
    }
}
