//! Perturbation sweep: stationary mass of the stable set across a grid of
//! levels, optional simulated occupancy per level, and log-log slope
//! checks of transition probabilities against their resistances.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use eht_core::chain::{
    analyze_potentials, consistent_states, default_slope_pairs, idealized_transition_matrix,
    perturbation_slope_checks, stationary_distribution, subset_mass, SlopeCheck,
};
use eht_core::dynamics::{occupancy, run};
use eht_core::testing::{required_sample_size, RequiredSampleSize};

use crate::config::Prepared;
use crate::emit;
use crate::error::CliError;
use crate::simulate::replication_plan;

const DEFAULT_SLOPE_GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];
const DEFAULT_SLOPE_PAIRS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub xi: f64,
    pub mu_stable: f64,
    pub mu_consistent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupancy_stable: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub grid: Vec<f64>,
    pub pairs: usize,
    pub max_relative_error: f64,
    pub checks: Vec<SlopeCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub stable: Vec<usize>,
    pub rows: Vec<SweepRow>,
    /// Whether the stable set's stationary mass never drops as the
    /// perturbation shrinks.
    pub mu_nondecreasing: bool,
    pub slope: SlopeSummary,
}

/// Epoch length for one grid cell; the reliability bound depends on the
/// cell's significance level, so it is derived per level.
fn cell_epoch_length(prepared: &Prepared, xi: f64) -> Result<u64, CliError> {
    if let Some(t) = prepared.config.run.epoch_length {
        return Ok(t);
    }
    let cap = prepared.config.run.max_epoch_length;
    let alpha = xi.powf(prepared.ceiling).max(f64::MIN_POSITIVE);
    let needed = required_sample_size(
        &prepared.game,
        prepared.space.sets(),
        prepared.tau(),
        alpha,
        cap,
    )?;
    Ok(match needed {
        RequiredSampleSize::NeverNeeded => prepared.epoch_length.min(cap),
        RequiredSampleSize::Bounded { t, .. } => t,
    })
}

/// Fixed stride between per-cell seed streams.
fn cell_seed(base: u64, cell: usize) -> u64 {
    base ^ (cell as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn sweep_csv(report: &SweepReport, with_occupancy: bool) -> String {
    let mut out = String::from("xi,mu_stable,mu_consistent");
    if with_occupancy {
        out.push_str(",occupancy_stable");
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{}",
            emit::cell(row.xi),
            emit::cell(row.mu_stable),
            emit::cell(row.mu_consistent)
        ));
        if with_occupancy {
            out.push(',');
            if let Some(o) = row.occupancy_stable {
                out.push_str(&emit::cell(o));
            }
        }
        out.push('\n');
    }
    out
}

fn slopes_csv(summary: &SlopeSummary) -> String {
    let mut out = String::from("from,to,resistance,fitted_slope,relative_error\n");
    for check in &summary.checks {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            check.from,
            check.to,
            emit::cell(check.resistance),
            emit::cell(check.fitted_slope),
            emit::cell(check.relative_error),
        ));
    }
    out
}

pub fn cmd_sweep(prepared: &Prepared, out_dir: &Path) -> Result<SweepReport, CliError> {
    let Some(sweep) = prepared.config.sweep.clone() else {
        return Err(CliError::config_at("/sweep", "sweep command needs a sweep block"));
    };

    let analysis = analyze_potentials(&prepared.game, &prepared.space, &prepared.run)?;
    let stable = analysis.stable.clone();
    let consistent = consistent_states(&prepared.space, prepared.tau(), prepared.mode());
    let epochs = prepared.config.run.epochs;
    let simulate = sweep.simulate && epochs > 0;

    let rows: Vec<SweepRow> = sweep
        .xi_grid
        .par_iter()
        .enumerate()
        .map(|(cell, &xi)| -> Result<SweepRow, CliError> {
            let matrix =
                idealized_transition_matrix(&prepared.game, &prepared.space, &prepared.run, xi)?;
            let mu = stationary_distribution(&matrix)?;
            let mu_stable = subset_mass(&mu, &stable);
            let mu_consistent = subset_mass(&mu, &consistent);
            let occupancy_stable = if simulate {
                let mut cfg = prepared.run.clone();
                cfg.xi = xi;
                cfg.epoch_length = cell_epoch_length(prepared, xi)?;
                cfg.epochs = epochs;
                let plan = replication_plan(prepared, cell_seed(prepared.run.seed, cell), &mu);
                let mut total = 0.0;
                for &(seed, initial) in &plan {
                    cfg.seed = seed;
                    let result = run(&prepared.game, &prepared.space, &cfg, initial)?;
                    total += occupancy(&result.records, &stable);
                }
                Some(total / plan.len() as f64)
            } else {
                None
            };
            Ok(SweepRow {
                xi,
                mu_stable,
                mu_consistent,
                occupancy_stable,
            })
        })
        .collect::<Result<_, _>>()?;

    // Nondecreasing mass along shrinking perturbation, checked on a copy
    // sorted by level so the config may list the grid in any order.
    let mut ordered: Vec<&SweepRow> = rows.iter().collect();
    ordered.sort_by(|a, b| b.xi.partial_cmp(&a.xi).unwrap());
    let mu_nondecreasing = ordered
        .windows(2)
        .all(|w| w[1].mu_stable >= w[0].mu_stable - 1e-12);

    let slope_grid = sweep
        .slope_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_SLOPE_GRID.to_vec());
    let limit = sweep.slope_pairs.unwrap_or(DEFAULT_SLOPE_PAIRS);
    let pairs = default_slope_pairs(&prepared.game, &prepared.space, &prepared.run, limit)?;
    let checks = perturbation_slope_checks(
        &prepared.game,
        &prepared.space,
        &prepared.run,
        &slope_grid,
        &pairs,
    )?;
    let max_relative_error = checks.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    let slope = SlopeSummary {
        grid: slope_grid,
        pairs: checks.len(),
        max_relative_error,
        checks,
    };

    let report = SweepReport {
        stable,
        rows,
        mu_nondecreasing,
        slope,
    };

    emit::ensure_dir(out_dir)?;
    if prepared.config.emit("csv") {
        emit::write_text(out_dir, "sweep.csv", &sweep_csv(&report, simulate))?;
        emit::write_text(out_dir, "slopes.csv", &slopes_csv(&report.slope))?;
    }
    if prepared.config.emit("json") {
        emit::write_json(out_dir, "sweep_report.json", &report)?;
    }

    for row in &report.rows {
        match row.occupancy_stable {
            Some(o) => println!(
                "sweep: xi={} mu(stable)={:.6} occupancy(stable)={:.4}",
                row.xi, row.mu_stable, o
            ),
            None => println!("sweep: xi={} mu(stable)={:.6}", row.xi, row.mu_stable),
        }
    }
    println!(
        "sweep: mu nondecreasing as xi shrinks: {}; {} slope pairs, max relative error {:.5}",
        report.mu_nondecreasing, report.slope.pairs, report.slope.max_relative_error
    );
    Ok(report)
}
