use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use msp_core::emulator::{replay, EnergyTrace};
use msp_core::energy::{trip_energy, EnergyBreakdown, Reserve};
use msp_core::exact::{brute_force_opt, emit_milp, BruteForceConfig};
use msp_core::io::{
    instance_from_json, instance_to_json, roadgraph_from_json, roadgraph_to_json, schedule_from_json,
    schedule_to_json, write_report_csv,
};
use msp_core::jsc::{jsc_schedule, JscParams};
use msp_core::model::{Prepared, ProblemInstance};
use msp_core::schedule::{compute_utility, ratio_to_f64, validate_schedule, MissionSchedule};
use msp_core::vrc::{vrc_schedule, VrcParams};
use msp_core::workloads::{gen_dfs, gen_rnd, synth_road_graph, ScenarioParams};

use crate::{
    Algo, EmulateArgs, EvaluateArgs, Failure, GenerateArgs, RoadgraphArgs, ScheduleArgs, SolverArgs, Workload,
};

pub(crate) fn print_config<T: Serialize>(command: &str, args: &T) {
    let json = serde_json::to_string(args).unwrap_or_default();
    println!("config {command} {json}");
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    let inst = instance_from_json(&read(path)?)?;
    Prepared::new(&inst)?;
    Ok(inst)
}

fn read_valid_schedule(path: &Path, inst: &ProblemInstance) -> Result<MissionSchedule, Failure> {
    let sched = schedule_from_json(&read(path)?)?;
    let violations = validate_schedule(&sched, inst);
    if violations.is_empty() {
        return Ok(sched);
    }
    for v in &violations {
        println!("violation {v}");
    }
    Err(Failure::Invalid(format!("schedule has {} violation(s)", violations.len())))
}

impl SolverArgs {
    pub(crate) fn jsc(&self) -> Result<JscParams, Failure> {
        Ok(JscParams {
            eps_space: self.eps_space,
            eps_time: self.eps_time,
            min_pts: self.min_pts,
            reserve: Reserve::new(self.reserve)?,
        })
    }

    pub(crate) fn vrc(&self) -> Result<VrcParams, Failure> {
        if self.knn_k == 0 {
            return Err(Failure::Input("--knn-k must be at least 1".into()));
        }
        Ok(VrcParams { k: self.knn_k, reserve: Reserve::new(self.reserve)?, ..Default::default() })
    }

    pub(crate) fn caps(&self) -> Result<BruteForceConfig, Failure> {
        let v: Vec<u64> = self
            .opt_caps
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Input(format!("bad --opt-caps `{}`", self.opt_caps)))?;
        let [a, d, t, b] = v[..] else {
            return Err(Failure::Input("--opt-caps takes activities,drones,trips,batches".into()));
        };
        Ok(BruteForceConfig { max_activities: a as usize, max_drones: d as u32, max_trips: t as u32, max_batches: b as u32 })
    }
}

/// Runs one scheduler and times the solver call alone.
pub(crate) fn solve(
    inst: &ProblemInstance,
    algo: Algo,
    solver: &SolverArgs,
) -> Result<(MissionSchedule, Duration), Failure> {
    let (jsc, vrc, caps) = (solver.jsc()?, solver.vrc()?, solver.caps()?);
    let t0 = Instant::now();
    let sched = match algo {
        Algo::Jsc => jsc_schedule(inst, &jsc)?,
        Algo::Vrc => vrc_schedule(inst, &vrc)?,
        Algo::Opt => brute_force_opt(inst, &caps)?.schedule,
        Algo::MilpExport => return Err(Failure::Input("milp-export does not produce a schedule".into())),
    };
    Ok((sched, t0.elapsed()))
}

pub(crate) fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    print_config("generate", args);
    let params = ScenarioParams::new(args.drones, args.load, args.seed).with_runtime(args.runtime);
    let inst = match args.workload {
        Workload::Rnd => gen_rnd(&params)?,
        Workload::Dfs => {
            let path = args.graph.as_ref().ok_or_else(|| Failure::Input("the dfs workload needs --graph".into()))?;
            gen_dfs(&roadgraph_from_json(&read(path)?)?, &params)?
        }
    };
    write(&args.out, &instance_to_json(&inst)?)?;
    println!("activities {} written to {}", inst.activities.len(), args.out.display());
    Ok(())
}

pub(crate) fn roadgraph(args: &RoadgraphArgs) -> Result<(), Failure> {
    print_config("roadgraph", args);
    let g = synth_road_graph(args.radius, args.vertices, args.seed)?;
    write(&args.out, &roadgraph_to_json(&g)?)?;
    println!("vertices {} edges {} written to {}", g.vertices.len(), g.edges.len(), args.out.display());
    Ok(())
}

pub(crate) fn schedule(args: &ScheduleArgs) -> Result<(), Failure> {
    print_config("schedule", args);
    let inst = read_instance(&args.instance)?;
    if args.algo == Algo::MilpExport || args.milp_out.is_some() {
        let path = args
            .milp_out
            .as_ref()
            .or(args.out.as_ref().filter(|_| args.algo == Algo::MilpExport))
            .ok_or_else(|| Failure::Input("milp-export needs --milp-out or --out".into()))?;
        let model = emit_milp(&inst)?;
        write(path, &model.text)?;
        println!(
            "milp variables={} constraints={} scale={} big_m={} written to {}",
            model.counts.variables(),
            model.counts.constraints(),
            model.scale,
            model.big_m,
            path.display()
        );
        if args.algo == Algo::MilpExport {
            return Ok(());
        }
    }
    let (sched, elapsed) = solve(&inst, args.algo, &args.solver)?;
    let violations = validate_schedule(&sched, &inst);
    if !violations.is_empty() {
        for v in &violations {
            println!("violation {v}");
        }
        return Err(Failure::Invalid(format!("solver produced {} violation(s)", violations.len())));
    }
    let report = compute_utility(&sched, &inst);
    let total = ratio_to_f64(&report.total);
    println!(
        "metrics algo={} utility={} utility_per_drone={} scheduled_pct={:.2} trips={} runtime_ms={:.3}",
        serde_json::to_value(args.algo).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        total,
        total / inst.fleet.count as f64,
        100.0 * report.scheduled_fraction(),
        sched.trip_count(),
        elapsed.as_secs_f64() * 1e3
    );
    if let Some(out) = &args.out {
        write(out, &schedule_to_json(&sched)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TripSummary {
    drone: u32,
    index: u32,
    takeoff: u64,
    landing: u64,
    activities: usize,
    energy: EnergyBreakdown,
}

#[derive(Serialize)]
struct Evaluation {
    utility: f64,
    utility_per_drone: f64,
    capture: f64,
    onboard: f64,
    ontime: f64,
    scheduled_pct: f64,
    trips: Vec<TripSummary>,
}

pub(crate) fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    print_config("evaluate", args);
    let inst = read_instance(&args.instance)?;
    let sched = read_valid_schedule(&args.schedule, &inst)?;
    let report = compute_utility(&sched, &inst);
    let mut trips = Vec::new();
    for d in &sched.drones {
        for t in &d.trips {
            let slots: Vec<_> = d.slots_in(t).copied().collect();
            let energy = trip_energy(t, &slots, &inst.fleet)?;
            println!(
                "trip drone={} index={} takeoff={} landing={} fly_s={} hover_s={} compute_s={} energy_j={} used_pct={:.2}",
                d.drone,
                t.index,
                t.takeoff,
                t.landing,
                energy.fly,
                energy.hover,
                energy.compute,
                energy.energy,
                100.0 * energy.utilization()
            );
            trips.push(TripSummary {
                drone: d.drone,
                index: t.index,
                takeoff: t.takeoff,
                landing: t.landing,
                activities: t.stops.len(),
                energy,
            });
        }
    }
    let total = ratio_to_f64(&report.total);
    let eval = Evaluation {
        utility: total,
        utility_per_drone: total / inst.fleet.count as f64,
        capture: ratio_to_f64(&report.capture_total),
        onboard: ratio_to_f64(&report.onboard_total),
        ontime: ratio_to_f64(&report.ontime_total),
        scheduled_pct: 100.0 * report.scheduled_fraction(),
        trips,
    };
    println!(
        "valid utility={} utility_per_drone={} capture={} onboard={} ontime={} scheduled_pct={:.2}",
        eval.utility, eval.utility_per_drone, eval.capture, eval.onboard, eval.ontime, eval.scheduled_pct
    );
    if let Some(out) = &args.out {
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf)?;
        fs::write(out, buf)?;
    }
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&eval).map_err(|e| Failure::Input(e.to_string()))?;
        write(path, &text)?;
    }
    Ok(())
}

pub(crate) fn emulate(args: &EmulateArgs) -> Result<(), Failure> {
    print_config("emulate", args);
    if !(args.inflation.is_finite() && args.inflation > 0.0) {
        return Err(Failure::Input("--inflation must be positive".into()));
    }
    let inst = read_instance(&args.instance)?;
    let sched = read_valid_schedule(&args.schedule, &inst)?;
    let file_trace = match &args.trace {
        Some(p) => Some(EnergyTrace::read_csv(fs::File::open(p)?)?),
        None => None,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "repeat",
        "seed",
        "trips",
        "incomplete",
        "incomplete_pct",
        "mean_deficit",
        "max_deficit",
        "expected_utility",
        "effective_utility",
    ])
    .map_err(|e| Failure::Input(e.to_string()))?;
    let mut rates = Vec::new();
    let mut worst: f64 = 0.0;
    for r in 0..args.repeats {
        let seed = args.seed.wrapping_add(r as u64);
        let base = file_trace.clone().unwrap_or_else(|| EnergyTrace::noise(args.noise, seed));
        let mut map = BTreeMap::new();
        for (t, legs) in base.resolve(&sched)?.into_iter().enumerate() {
            for (l, mut f) in legs.into_iter().enumerate() {
                f.fly *= args.inflation;
                f.hover *= args.inflation;
                f.compute *= args.inflation;
                map.insert((t as u32, l as u32), f);
            }
        }
        let rep = replay(&sched, &inst, &EnergyTrace::PerLeg(map))?;
        rates.push(rep.incomplete_pct());
        worst = worst.max(rep.max_deficit().unwrap_or(0.0));
        w.write_record([
            r.to_string(),
            seed.to_string(),
            rep.trips.len().to_string(),
            rep.incomplete_count().to_string(),
            rep.incomplete_pct().to_string(),
            rep.mean_deficit().unwrap_or(0.0).to_string(),
            rep.max_deficit().unwrap_or(0.0).to_string(),
            ratio_to_f64(&rep.expected).to_string(),
            ratio_to_f64(&rep.effective).to_string(),
        ])
        .map_err(|e| Failure::Input(e.to_string()))?;
    }
    let mean = if rates.is_empty() { 0.0 } else { rates.iter().sum::<f64>() / rates.len() as f64 };
    println!("emulation repeats={} incomplete_pct_mean={mean:.3} max_deficit={worst:.4}", args.repeats);
    if let Some(out) = &args.out {
        fs::write(out, w.into_inner().map_err(|e| Failure::Input(e.to_string()))?)?;
    }
    Ok(())
}
