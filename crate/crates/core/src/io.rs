//! File formats: tagged JSON documents for instances, schedules and road
//! graphs, and the per-activity utility report as CSV.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::MspError;
use crate::model::{ActivityId, ProblemInstance, Seconds};
use crate::schedule::{ratio_to_f64, ComputeSlot, DroneMission, MissionSchedule, Stop, Trip, UtilityReport};
use crate::workloads::RoadGraph;

pub const INSTANCE_FORMAT: &str = "msp-instance/1";
pub const SCHEDULE_FORMAT: &str = "msp-schedule/1";
pub const ROADGRAPH_FORMAT: &str = "msp-roadgraph/1";

#[derive(Serialize)]
struct Tagged<'a, T> {
    format: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn to_tagged<T: Serialize>(body: &T, format: &str) -> Result<String, MspError> {
    let mut s = serde_json::to_string_pretty(&Tagged { format, body })?;
    s.push('\n');
    Ok(s)
}

fn from_tagged<T: DeserializeOwned>(text: &str, expected: &'static str) -> Result<T, MspError> {
    let mut v: serde_json::Value = serde_json::from_str(text)?;
    let obj = v.as_object_mut().ok_or_else(|| MspError::Format { found: "non-object".into(), expected })?;
    match obj.remove("format") {
        Some(serde_json::Value::String(s)) if s == expected => {}
        Some(other) => {
            let found = other.as_str().map_or_else(|| other.to_string(), str::to_string);
            return Err(MspError::Format { found, expected });
        }
        None => return Err(MspError::Format { found: "missing".into(), expected }),
    }
    Ok(serde_json::from_value(v)?)
}

pub fn instance_to_json(inst: &ProblemInstance) -> Result<String, MspError> {
    to_tagged(inst, INSTANCE_FORMAT)
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance, MspError> {
    from_tagged(text, INSTANCE_FORMAT)
}

pub fn roadgraph_to_json(graph: &RoadGraph) -> Result<String, MspError> {
    to_tagged(graph, ROADGRAPH_FORMAT)
}

pub fn roadgraph_from_json(text: &str) -> Result<RoadGraph, MspError> {
    from_tagged(text, ROADGRAPH_FORMAT)
}

#[derive(Serialize, Deserialize)]
struct TripDoc {
    index: u32,
    takeoff: Seconds,
    landing: Seconds,
    waypoints: Vec<ActivityId>,
    arrivals: Vec<Seconds>,
    departures: Vec<Seconds>,
}

#[derive(Serialize, Deserialize)]
struct SlotDoc {
    activity: ActivityId,
    batch: u32,
    start: Seconds,
    end: Seconds,
}

#[derive(Serialize, Deserialize)]
struct DroneDoc {
    drone: u32,
    trips: Vec<TripDoc>,
    slots: Vec<SlotDoc>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleDoc {
    drones: Vec<DroneDoc>,
    dropped: Vec<ActivityId>,
}

pub fn schedule_to_json(sched: &MissionSchedule) -> Result<String, MspError> {
    let doc = ScheduleDoc {
        drones: sched
            .drones
            .iter()
            .map(|d| DroneDoc {
                drone: d.drone,
                trips: d
                    .trips
                    .iter()
                    .map(|t| TripDoc {
                        index: t.index,
                        takeoff: t.takeoff,
                        landing: t.landing,
                        waypoints: t.stops.iter().map(|s| s.activity).collect(),
                        arrivals: t.stops.iter().map(|s| s.arrival).collect(),
                        departures: t.stops.iter().map(|s| s.departure).collect(),
                    })
                    .collect(),
                slots: d
                    .slots
                    .iter()
                    .map(|s| SlotDoc { activity: s.activity, batch: s.batch, start: s.start, end: s.end })
                    .collect(),
            })
            .collect(),
        dropped: sched.dropped.clone(),
    };
    to_tagged(&doc, SCHEDULE_FORMAT)
}

pub fn schedule_from_json(text: &str) -> Result<MissionSchedule, MspError> {
    let doc: ScheduleDoc = from_tagged(text, SCHEDULE_FORMAT)?;
    let mut drones = Vec::with_capacity(doc.drones.len());
    for d in doc.drones {
        let mut trips = Vec::with_capacity(d.trips.len());
        for t in d.trips {
            let n = t.waypoints.len();
            if t.arrivals.len() != n || t.departures.len() != n {
                return Err(MspError::Format {
                    found: format!("trip {} of drone {} with uneven waypoint and timing arrays", t.index, d.drone),
                    expected: SCHEDULE_FORMAT,
                });
            }
            let stops = (0..n)
                .map(|k| Stop { activity: t.waypoints[k], arrival: t.arrivals[k], departure: t.departures[k] })
                .collect();
            trips.push(Trip { drone: d.drone, index: t.index, takeoff: t.takeoff, landing: t.landing, stops });
        }
        let slots = d
            .slots
            .into_iter()
            .map(|s| ComputeSlot { activity: s.activity, batch: s.batch, start: s.start, end: s.end })
            .collect();
        drones.push(DroneMission { drone: d.drone, trips, slots });
    }
    Ok(MissionSchedule { drones, dropped: doc.dropped })
}

/// Writes `activity_id,u,u_bar,u_bbar,U`: capture flag, on-board and
/// on-time completion fractions and the activity's utility.
pub fn write_report_csv(report: &UtilityReport, writer: impl Write) -> Result<(), MspError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| MspError::Io(std::io::Error::other(e));
    w.write_record(["activity_id", "u", "u_bar", "u_bbar", "U"]).map_err(csv_err)?;
    for a in &report.activities {
        w.write_record([
            a.id.0.to_string(),
            u8::from(a.captured).to_string(),
            ratio_to_f64(&a.onboard).to_string(),
            ratio_to_f64(&a.ontime).to_string(),
            ratio_to_f64(&a.utility).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
