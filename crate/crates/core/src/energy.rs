//! Per-trip energy accounting and the feasibility checks both heuristics use.

use serde::{Deserialize, Serialize};

use crate::error::MspError;
use crate::model::{flight_time, Activity, DroneSpec, Joules, ProblemInstance, Seconds};
use crate::schedule::{ComputeSlot, Trip};

/// Seconds spent flying, hovering and computing on one trip and the energy
/// they draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub fly: Seconds,
    pub hover: Seconds,
    pub compute: Seconds,
    pub energy: Joules,
    pub capacity: Joules,
}

impl EnergyBreakdown {
    pub fn feasible(&self) -> bool {
        self.energy <= self.capacity
    }

    pub fn feasible_with(&self, reserve: Reserve) -> bool {
        self.energy <= reserve.budget(self.capacity)
    }

    /// Energy as a fraction of battery capacity.
    pub fn utilization(&self) -> f64 {
        self.energy as f64 / self.capacity as f64
    }
}

/// Fraction of battery capacity withheld when planning.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct Reserve(f64);

impl Reserve {
    pub const NONE: Reserve = Reserve(0.0);

    pub fn new(fraction: f64) -> Result<Self, MspError> {
        if (0.0..1.0).contains(&fraction) {
            Ok(Reserve(fraction))
        } else {
            Err(MspError::InvalidParameter(format!("reserve {fraction} outside [0, 1)")))
        }
    }

    pub fn fraction(&self) -> f64 {
        self.0
    }

    /// Usable joules out of `capacity`, rounded down.
    pub fn budget(&self, capacity: Joules) -> Joules {
        if self.0 == 0.0 {
            capacity
        } else {
            (capacity as f64 * (1.0 - self.0)).floor() as Joules
        }
    }
}

pub fn energy_of(fly: Seconds, hover: Seconds, compute: Seconds, spec: &DroneSpec) -> Joules {
    fly * spec.fly_power + hover * spec.hover_power + compute * spec.compute_power
}

/// Energy drawn by `trip`, given the compute slots executed during it.
///
/// Fly and hover seconds come from the trip's recorded timings.
pub fn trip_energy(
    trip: &Trip,
    slots: &[ComputeSlot],
    spec: &DroneSpec,
) -> Result<EnergyBreakdown, MspError> {
    let mut fly = 0;
    let mut hover = 0;
    let mut clock = trip.takeoff;
    for s in &trip.stops {
        fly += s.arrival.saturating_sub(clock);
        hover += s.departure.saturating_sub(s.arrival);
        clock = s.departure;
    }
    fly += trip.landing.saturating_sub(clock);

    let mut compute = 0;
    for s in slots {
        if !trip.contains(s.start, s.end) {
            return Err(MspError::SlotOutsideTrip {
                activity: s.activity,
                batch: s.batch,
                takeoff: trip.takeoff,
                landing: trip.landing,
            });
        }
        compute += s.len();
    }
    Ok(EnergyBreakdown {
        fly,
        hover,
        compute,
        energy: energy_of(fly, hover, compute, spec),
        capacity: spec.battery,
    })
}

/// Whether a drone can fly the trip visiting `seq` in order, capturing each
/// activity in full, within the flying and hovering budget. Compute energy is
/// not considered.
pub fn fly_hover_feasible(seq: &[&Activity], inst: &ProblemInstance, reserve: Reserve) -> bool {
    let Some(first) = seq.first() else { return true };
    let spec = &inst.fleet;
    let depot = inst.depot.location;
    let out = flight_time(&depot, &first.waypoint, spec);
    if out > first.start {
        return false;
    }
    let mut fly = out;
    let mut hover = first.end.saturating_sub(first.start);
    for w in seq.windows(2) {
        let leg = flight_time(&w[0].waypoint, &w[1].waypoint, spec);
        let arrival = w[0].end + leg;
        if arrival > w[1].start {
            return false;
        }
        fly += leg;
        hover += w[1].end - arrival;
    }
    fly += flight_time(&seq[seq.len() - 1].waypoint, &depot, spec);
    energy_of(fly, hover, 0, spec) <= reserve.budget(spec.battery)
}
