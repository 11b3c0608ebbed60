//! Experiment grid: every (fleet size, load) cell is generated and solved
//! `repeats` times; the output holds per-run rows and per-cell means and
//! standard deviations.

use std::fs;

use rayon::prelude::*;
use serde::Serialize;

use msp_core::model::{Prepared, ProblemInstance};
use msp_core::schedule::{compute_utility, ratio_to_f64};
use msp_core::workloads::{gen_dfs, gen_rnd, synth_road_graph, ScenarioParams};

use crate::commands::{print_config, solve};
use crate::{Algo, ExperimentArgs, Failure, Workload};

/// Value of the `format` column of both experiment files.
pub const EXPERIMENT_FORMAT: &str = "msp-experiment/1";

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one run, a function of the master seed, cell and repeat only.
pub fn run_seed(master: u64, cell: usize, repeat: u32) -> u64 {
    splitmix(master ^ splitmix(((cell as u64) << 32) | repeat as u64))
}

#[derive(Debug, Clone, Serialize)]
struct RunRow {
    format: &'static str,
    suite: &'static str,
    drones: u32,
    load: u32,
    repeat: u32,
    seed: u64,
    algo: &'static str,
    activities: usize,
    utility: f64,
    utility_per_drone: f64,
    ontime_utility: f64,
    scheduled_pct: f64,
    runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CellRow {
    format: &'static str,
    suite: &'static str,
    drones: u32,
    load: u32,
    algo: &'static str,
    runs: usize,
    utility_per_drone_mean: f64,
    utility_per_drone_std: f64,
    ontime_utility_mean: f64,
    ontime_utility_std: f64,
    scheduled_pct_mean: f64,
    scheduled_pct_std: f64,
    runtime_ms_mean: f64,
    runtime_ms_std: f64,
}

/// Mean and population standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn instance(suite: Workload, params: &ScenarioParams) -> Result<ProblemInstance, Failure> {
    Ok(match suite {
        Workload::Rnd => gen_rnd(params)?,
        Workload::Dfs => {
            let graph = synth_road_graph(params.radius, params.dfs_graph_size(), params.seed)?;
            gen_dfs(&graph, params)?
        }
    })
}

fn suite_name(w: Workload) -> &'static str {
    match w {
        Workload::Rnd => "rnd",
        Workload::Dfs => "dfs",
    }
}

fn algo_name(a: Algo) -> &'static str {
    match a {
        Algo::Jsc => "jsc",
        Algo::Vrc => "vrc",
        Algo::Opt => "opt",
        Algo::MilpExport => "milp-export",
    }
}

fn one_run(args: &ExperimentArgs, cell: usize, m: u32, x: u32, repeat: u32) -> Result<Vec<RunRow>, Failure> {
    let seed = run_seed(args.seed, cell, repeat);
    let params = ScenarioParams::new(m, x, seed).with_runtime(args.runtime);
    let inst = instance(args.suite, &params)?;
    let caps = args.solver.caps()?;
    let mut algos = vec![Algo::Jsc, Algo::Vrc];
    if caps.check(&Prepared::new(&inst)?).is_ok() {
        algos.push(Algo::Opt);
    }
    let suite = suite_name(args.suite);
    let mut rows = Vec::new();
    for algo in algos {
        let (sched, elapsed) = solve(&inst, algo, &args.solver)?;
        let report = compute_utility(&sched, &inst);
        let utility = ratio_to_f64(&report.total);
        rows.push(RunRow {
            format: EXPERIMENT_FORMAT,
            suite,
            drones: m,
            load: x,
            repeat,
            seed,
            algo: algo_name(algo),
            activities: inst.activities.len(),
            utility,
            utility_per_drone: utility / m as f64,
            ontime_utility: ratio_to_f64(&report.ontime_total),
            scheduled_pct: 100.0 * report.scheduled_fraction(),
            runtime_ms: elapsed.as_secs_f64() * 1e3,
        });
    }
    Ok(rows)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MSP_THREADS") {
        let n: usize = v.parse().map_err(|_| Failure::Input(format!("MSP_THREADS={v} is not a number")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Input(e.to_string()))
}

fn write_csv<T: Serialize>(path: &std::path::Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Input(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Input(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn run(args: &ExperimentArgs) -> Result<(), Failure> {
    print_config("experiment", args);
    if args.repeats == 0 {
        return Err(Failure::Input("--repeats must be at least 1".into()));
    }
    let cells: Vec<(u32, u32)> = args.drones.iter().flat_map(|&m| args.loads.iter().map(move |&x| (m, x))).collect();
    let jobs: Vec<(usize, u32)> = (0..cells.len()).flat_map(|c| (0..args.repeats).map(move |r| (c, r))).collect();
    let pool = thread_pool()?;
    let results: Vec<Result<Vec<RunRow>, Failure>> = pool.install(|| {
        jobs.par_iter().map(|&(c, r)| one_run(args, c, cells[c].0, cells[c].1, r)).collect()
    });
    let mut runs = Vec::new();
    for r in results {
        runs.extend(r?);
    }

    let mut summary = Vec::new();
    for &(m, x) in &cells {
        for algo in ["jsc", "vrc", "opt"] {
            let rows: Vec<&RunRow> = runs.iter().filter(|r| r.drones == m && r.load == x && r.algo == algo).collect();
            if rows.is_empty() {
                continue;
            }
            let col = |f: fn(&RunRow) -> f64| mean_std(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (upd, upd_s) = col(|r| r.utility_per_drone);
            let (ont, ont_s) = col(|r| r.ontime_utility);
            let (pct, pct_s) = col(|r| r.scheduled_pct);
            let (ms, ms_s) = col(|r| r.runtime_ms);
            summary.push(CellRow {
                format: EXPERIMENT_FORMAT,
                suite: rows[0].suite,
                drones: m,
                load: x,
                algo: rows[0].algo,
                runs: rows.len(),
                utility_per_drone_mean: upd,
                utility_per_drone_std: upd_s,
                ontime_utility_mean: ont,
                ontime_utility_std: ont_s,
                scheduled_pct_mean: pct,
                scheduled_pct_std: pct_s,
                runtime_ms_mean: ms,
                runtime_ms_std: ms_s,
            });
            println!(
                "cell m={m} x={x} algo={algo} utility_per_drone={upd:.3}±{upd_s:.3} scheduled_pct={pct:.1}±{pct_s:.1} runtime_ms={ms:.2}"
            );
        }
    }
    fs::create_dir_all(&args.out)?;
    let suite = suite_name(args.suite);
    write_csv(&args.out.join(format!("experiment-{suite}.csv")), &summary)?;
    write_csv(&args.out.join(format!("experiment-{suite}-runs.csv")), &runs)?;
    Ok(())
}
