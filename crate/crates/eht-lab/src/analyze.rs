//! Exact analysis: consistent states, node values, stochastic potentials
//! by both routes, the stable set, and equilibrium gaps.

use std::path::Path;

use serde::Serialize;

use eht_core::belief::DistanceMode;
use eht_core::chain::{analyze_potentials, corollary_selection, PotentialAnalysis, SelectionReport};
use eht_core::game::epsilon_ne_gap;

use crate::config::Prepared;
use crate::emit;
use crate::error::CliError;

/// One consistent state with everything the selection argument uses.
#[derive(Debug, Clone, Serialize)]
pub struct StateRow {
    pub state: usize,
    /// Belief index per player.
    pub beliefs: Vec<usize>,
    /// Per player, per opponent slot, that opponent's believed marginal.
    pub belief_marginals: Vec<Vec<Vec<f64>>>,
    /// Induced play per player.
    pub strategies: Vec<Vec<f64>>,
    /// Anticipated utility per player.
    pub utilities: Vec<f64>,
    /// Transformed anticipated utility per player.
    pub transformed: Vec<f64>,
    /// Node value: the cheapest player's transformed utility.
    pub value: f64,
    pub realized_value: f64,
    pub potential: f64,
    pub tree_potential: f64,
    pub stable: bool,
    /// Best unilateral improvement at the induced profile.
    pub ne_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub num_states: usize,
    pub num_consistent: usize,
    pub sigma: f64,
    pub tau: f64,
    pub resolution: usize,
    pub distance_mode: DistanceMode,
    pub ceiling: f64,
    pub stable: Vec<usize>,
    pub corollary: SelectionReport,
    pub states: Vec<StateRow>,
}

/// Runs the potential analysis and assembles the report rows.
pub fn build_report(prepared: &Prepared) -> Result<AnalysisReport, CliError> {
    let analysis: PotentialAnalysis =
        analyze_potentials(&prepared.game, &prepared.space, &prepared.run)?;
    let corollary = corollary_selection(&analysis, prepared.transforms());

    let mut states = Vec::with_capacity(analysis.graph.nodes.len());
    for (k, node) in analysis.graph.nodes.iter().enumerate() {
        let beliefs = prepared.space.decode_state(node.state);
        let belief_marginals: Vec<Vec<Vec<f64>>> = beliefs
            .iter()
            .enumerate()
            .map(|(i, &b)| prepared.space.sets().belief_marginals(i, b))
            .collect();
        let profile: Vec<_> = prepared
            .space
            .strategy_profile(&beliefs)
            .into_iter()
            .cloned()
            .collect();
        let strategies: Vec<Vec<f64>> = profile.iter().map(|s| s.probs().to_vec()).collect();
        let ne_gap = epsilon_ne_gap(&prepared.game, &profile)?;
        states.push(StateRow {
            state: node.state,
            beliefs,
            belief_marginals,
            strategies,
            utilities: node.utilities.clone(),
            transformed: node.transformed.clone(),
            value: node.value,
            realized_value: node.realized_value,
            potential: analysis.potentials[k],
            tree_potential: analysis.tree_potentials[k],
            stable: analysis.stable.contains(&node.state),
            ne_gap,
        });
    }

    Ok(AnalysisReport {
        num_states: prepared.space.state_count(),
        num_consistent: states.len(),
        sigma: prepared.config.parameters.sigma,
        tau: prepared.tau(),
        resolution: prepared.config.parameters.resolution,
        distance_mode: prepared.mode(),
        ceiling: prepared.ceiling,
        stable: analysis.stable,
        corollary,
        states,
    })
}

fn states_csv(report: &AnalysisReport) -> String {
    let mut out = String::from(
        "state,stable,value,potential,tree_potential,ne_gap,strategies,beliefs\n",
    );
    for row in &report.states {
        let beliefs = row
            .belief_marginals
            .iter()
            .map(|per_opp| emit::join_profile(per_opp).replace(';', "|"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.state,
            row.stable,
            emit::cell(row.value),
            emit::cell(row.potential),
            emit::cell(row.tree_potential),
            emit::cell(row.ne_gap),
            emit::join_profile(&row.strategies),
            beliefs,
        ));
    }
    out
}

pub fn cmd_analyze(prepared: &Prepared, out_dir: &Path) -> Result<AnalysisReport, CliError> {
    let report = build_report(prepared)?;
    emit::ensure_dir(out_dir)?;
    if prepared.config.emit("json") {
        emit::write_json(out_dir, "report.json", &report)?;
    }
    if prepared.config.emit("csv") {
        emit::write_text(out_dir, "states.csv", &states_csv(&report))?;
    }

    println!(
        "analyze: {} states, {} consistent, stable {:?}",
        report.num_states, report.num_consistent, report.stable
    );
    for row in report.states.iter().filter(|r| r.stable) {
        println!(
            "  stable state {}: value {:.6}, potential {:.6}, play {}",
            row.state,
            row.value,
            row.potential,
            emit::join_profile(&row.strategies)
        );
    }
    match report.corollary.matches {
        Some(true) => println!("  special-case selection agrees: {:?}", report.corollary.prediction),
        Some(false) => println!("  special-case selection DISAGREES: {:?}", report.corollary.prediction),
        None => println!("  no special-case selection applies"),
    }
    Ok(report)
}
