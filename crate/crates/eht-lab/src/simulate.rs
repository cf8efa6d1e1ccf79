//! Trajectory simulation: seeded replications of the epoch dynamics,
//! occupancy statistics, and the agreement check against the idealized
//! chain's stationary distribution.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use eht_core::chain::{
    analyze_potentials, consistent_states, idealized_transition_matrix, stationary_distribution,
    subset_mass,
};
use eht_core::dynamics::{occupancy, run, RunResult};

use crate::config::{InitialCondition, Prepared};
use crate::emit;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub seed: u64,
    pub initial_state: usize,
    pub final_state: usize,
    pub occupancy_stable: f64,
    pub occupancy_consistent: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub xi: f64,
    pub epochs: u64,
    pub epoch_length: u64,
    pub epoch_length_capped: bool,
    pub replications: usize,
    pub seed: u64,
    pub stable: Vec<usize>,
    pub num_consistent: usize,
    /// Stationary mass of the stable set in the idealized chain.
    pub mu_stable: f64,
    pub mu_consistent: f64,
    /// Pooled over replications; absent when no epochs were simulated.
    pub occupancy_stable: Option<f64>,
    pub occupancy_consistent: Option<f64>,
    pub agreement_gap: Option<f64>,
    pub rows: Vec<ReplicationRow>,
}

/// Per-replication seeds and starting states, drawn sequentially from one
/// seeded generator so the plan is independent of scheduling.
pub(crate) fn replication_plan(
    prepared: &Prepared,
    seed: u64,
    mu: &[f64],
) -> Vec<(u64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = prepared.config.run.replications;
    let states = prepared.space.state_count();
    (0..count)
        .map(|rep| {
            let seed = rng.next_u64();
            let initial = match &prepared.config.run.initial {
                InitialCondition::Stationary => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut chosen = states - 1;
                    for (z, &p) in mu.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            chosen = z;
                            break;
                        }
                    }
                    chosen
                }
                InitialCondition::UniformRandom => rng.gen_range(0..states),
                InitialCondition::States(list) => list[rep % list.len()],
            };
            (seed, initial)
        })
        .collect()
}

fn trajectory_ndjson(result: &RunResult) -> Result<String, CliError> {
    let mut out = String::new();
    for record in &result.records {
        out.push_str(
            &serde_json::to_string(record)
                .map_err(|e| CliError::Other(format!("serialize epoch record: {e}")))?,
        );
        out.push('\n');
    }
    Ok(out)
}

fn trajectory_csv(result: Option<&RunResult>, consistent: &[usize], stable: &[usize]) -> String {
    let mut out = String::from("epoch,state_before,state_after,consistent,stable\n");
    if let Some(result) = result {
        for r in &result.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch,
                r.state_before,
                r.state_after,
                consistent.contains(&r.state_before),
                stable.contains(&r.state_before),
            ));
        }
    }
    out
}

fn occupancy_csv(report: &SimulateReport) -> String {
    let mut out = String::from(
        "replication,seed,initial_state,final_state,occupancy_stable,occupancy_consistent\n",
    );
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.replication,
            row.seed,
            row.initial_state,
            row.final_state,
            emit::cell(row.occupancy_stable),
            emit::cell(row.occupancy_consistent),
        ));
    }
    if let (Some(os), Some(oc)) = (report.occupancy_stable, report.occupancy_consistent) {
        out.push_str(&format!("pooled,,,,{},{}\n", emit::cell(os), emit::cell(oc)));
    }
    out
}

pub fn cmd_simulate(prepared: &Prepared, out_dir: &Path) -> Result<SimulateReport, CliError> {
    let analysis = analyze_potentials(&prepared.game, &prepared.space, &prepared.run)?;
    let stable = analysis.stable.clone();
    let consistent = consistent_states(&prepared.space, prepared.tau(), prepared.mode());

    let matrix = idealized_transition_matrix(
        &prepared.game,
        &prepared.space,
        &prepared.run,
        prepared.run.xi,
    )?;
    let mu = stationary_distribution(&matrix)?;
    let mu_stable = subset_mass(&mu, &stable);
    let mu_consistent = subset_mass(&mu, &consistent);

    let epochs = prepared.config.run.epochs;
    let mut report = SimulateReport {
        xi: prepared.run.xi,
        epochs,
        epoch_length: prepared.epoch_length,
        epoch_length_capped: prepared.epoch_length_capped,
        replications: prepared.config.run.replications,
        seed: prepared.run.seed,
        stable: stable.clone(),
        num_consistent: consistent.len(),
        mu_stable,
        mu_consistent,
        occupancy_stable: None,
        occupancy_consistent: None,
        agreement_gap: None,
        rows: Vec::new(),
    };

    let mut first: Option<RunResult> = None;
    if epochs > 0 {
        let plan = replication_plan(prepared, prepared.run.seed, &mu);
        let results: Vec<RunResult> = plan
            .par_iter()
            .map(|&(seed, initial)| {
                let mut cfg = prepared.run.clone();
                cfg.seed = seed;
                cfg.epochs = epochs;
                run(&prepared.game, &prepared.space, &cfg, initial)
            })
            .collect::<Result<_, _>>()?;

        let mut stable_sum = 0.0;
        let mut consistent_sum = 0.0;
        for (rep, result) in results.iter().enumerate() {
            let os = occupancy(&result.records, &stable);
            let oc = occupancy(&result.records, &consistent);
            stable_sum += os;
            consistent_sum += oc;
            report.rows.push(ReplicationRow {
                replication: rep,
                seed: plan[rep].0,
                initial_state: result.initial_state,
                final_state: result.final_state,
                occupancy_stable: os,
                occupancy_consistent: oc,
            });
        }
        let count = results.len() as f64;
        let pooled_stable = stable_sum / count;
        report.occupancy_stable = Some(pooled_stable);
        report.occupancy_consistent = Some(consistent_sum / count);
        report.agreement_gap = Some((pooled_stable - mu_stable).abs());
        first = results.into_iter().next();
    }

    emit::ensure_dir(out_dir)?;
    if prepared.config.emit("ndjson") {
        let text = match &first {
            Some(result) => trajectory_ndjson(result)?,
            None => String::new(),
        };
        emit::write_text(out_dir, "trajectory.ndjson", &text)?;
    }
    if prepared.config.emit("csv") {
        emit::write_text(
            out_dir,
            "trajectory.csv",
            &trajectory_csv(first.as_ref(), &consistent, &stable),
        )?;
        emit::write_text(out_dir, "occupancy.csv", &occupancy_csv(&report))?;
    }
    if prepared.config.emit("json") {
        emit::write_json(out_dir, "simulate_report.json", &report)?;
    }

    match (report.occupancy_stable, report.agreement_gap) {
        (Some(os), Some(gap)) => println!(
            "agreement: occupancy(stable)={:.4} mu(stable)={:.4} gap={:.4} (xi={}, {} replications, {} epochs)",
            os, mu_stable, gap, report.xi, report.replications, epochs
        ),
        _ => println!(
            "agreement: skipped (no epochs simulated); mu(stable)={:.4} at xi={}",
            mu_stable, report.xi
        ),
    }
    Ok(report)
}
