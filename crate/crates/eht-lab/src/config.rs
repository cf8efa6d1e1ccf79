//! Experiment configuration: JSON schema, validation with field pointers,
//! and conversion into the core game, state space, and run settings.
//!
//! Configs are the reproducibility artifact: every output file is a
//! deterministic function of (config, seed), so loading is strict.
//! Unknown fields are rejected and every semantic error carries a JSON
//! pointer to the offending field.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use eht_core::belief::{DistanceMode, StateSpace, DEFAULT_STATE_CAP};
use eht_core::dynamics::{Resampler, RunConfig};
use eht_core::game::{exploration_ceiling, Game, UtilityTransform};
use eht_core::testing::{required_sample_size, RequiredSampleSize};

use crate::error::CliError;

/// Name of the environment variable that overrides the state-count cap.
pub const STATE_CAP_ENV: &str = "EHT_STATE_CAP";

/// Epoch length used when no override is given and the belief space needs
/// no minimum sample size.
const FALLBACK_EPOCH_LENGTH: u64 = 1_000;

fn default_max_epoch_length() -> u64 {
    50_000
}

fn default_replications() -> usize {
    1
}

fn default_distance_mode() -> DistanceMode {
    DistanceMode::JointProduct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub parameters: ParameterConfig,
    /// Per-player utility transforms; empty means identity for everyone.
    #[serde(default)]
    pub transforms: Vec<UtilityTransform>,
    pub run: RunBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    /// Action names per player; the player count is this list's length.
    pub action_labels: Vec<Vec<String>>,
    /// Flat payoff table per player over joint action profiles, first
    /// player's action most significant, last player's fastest. For two
    /// players this is the row-major matrix with player 0 on rows.
    pub payoffs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterConfig {
    /// Smoothing temperature of the logit response.
    pub sigma: f64,
    /// Test tolerance.
    pub tau: f64,
    /// Belief grid resolution: beliefs are multiples of 1/resolution.
    pub resolution: usize,
    /// Equilibrium slack for certificates and gap reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_distance_mode")]
    pub distance_mode: DistanceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    /// Perturbation level in (0, 1).
    pub xi: f64,
    /// Per-player test probabilities, each in (0, 1).
    pub gammas: Vec<f64>,
    /// Per-player resampling distributions; omitted means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resamplers: Option<Vec<ResamplerConfig>>,
    /// Number of epochs to simulate. Zero is allowed and produces empty
    /// trajectory files.
    pub epochs: u64,
    /// Plays per epoch. Omitted: derived from the test-reliability bound
    /// at significance xi^ceiling, capped at `max_epoch_length`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_length: Option<u64>,
    #[serde(default = "default_max_epoch_length")]
    pub max_epoch_length: u64,
    pub seed: u64,
    /// Independent trajectories per `simulate` invocation.
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub initial: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResamplerConfig {
    Uniform,
    /// One positive weight vector per opponent slot (opponents ascending),
    /// each over that opponent's belief grid.
    Weighted { weights: Vec<Vec<f64>> },
}

/// Where replications start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Sampled from the stationary distribution of the idealized chain at
    /// the run's perturbation level (seeded, so still deterministic).
    #[default]
    Stationary,
    /// Uniform over all states.
    UniformRandom,
    /// Fixed state indices, cycled over replications.
    States(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Perturbation levels, at least two, each in (0, 1).
    pub xi_grid: Vec<f64>,
    /// Grid for the log-log slope fit; omitted means {1e-2, 1e-3, 1e-4}.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_grid: Option<Vec<f64>>,
    /// Maximum number of transition pairs in the slope table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_pairs: Option<usize>,
    /// Also simulate at every grid level and report occupancy.
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Subset of {"json", "csv", "ndjson"}; omitted means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn num_players(&self) -> usize {
        self.game.action_labels.len()
    }

    pub fn emit(&self, format: &str) -> bool {
        match self.outputs.as_ref().and_then(|o| o.formats.as_ref()) {
            Some(list) => list.iter().any(|f| f == format),
            None => true,
        }
    }

    pub fn output_directory(&self) -> Option<&str> {
        self.outputs.as_ref()?.directory.as_deref()
    }
}

/// Renders a deserialization path ("game.payoffs[0]") as a JSON pointer
/// ("/game/payoffs/0").
fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses a config from a JSON string; schema errors carry a pointer.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(deserializer).map_err(|e| {
            CliError::config_at(json_pointer(e.path()), e.inner().to_string())
        })?;
    validate(&config)?;
    Ok(config)
}

/// Loads and validates a config file.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::config(format!("cannot read {}: {e}", path.display()))
    })?;
    parse(&text)
}

fn require(ok: bool, pointer: &str, message: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config_at(pointer, message))
    }
}

/// Semantic checks that serde cannot express. Everything here reports the
/// JSON pointer of the field it rejects.
pub fn validate(config: &ExperimentConfig) -> Result<(), CliError> {
    let n = config.num_players();
    require(n >= 2, "/game/action_labels", format!("need at least 2 players, got {n}"))?;
    for (i, labels) in config.game.action_labels.iter().enumerate() {
        require(
            !labels.is_empty(),
            &format!("/game/action_labels/{i}"),
            format!("player {i} has no actions"),
        )?;
    }
    let profiles: usize = config.game.action_labels.iter().map(|l| l.len()).product();
    require(
        config.game.payoffs.len() == n,
        "/game/payoffs",
        format!("expected one payoff table per player ({n}), got {}", config.game.payoffs.len()),
    )?;
    for (i, table) in config.game.payoffs.iter().enumerate() {
        let pointer = format!("/game/payoffs/{i}");
        require(
            table.len() == profiles,
            &pointer,
            format!("expected {profiles} entries (one per joint action profile), got {}", table.len()),
        )?;
        if let Some(k) = table.iter().position(|v| !v.is_finite()) {
            return Err(CliError::config_at(
                format!("{pointer}/{k}"),
                "payoff is not finite",
            ));
        }
    }

    let p = &config.parameters;
    require(p.sigma.is_finite() && p.sigma > 0.0, "/parameters/sigma", format!("must be positive, got {}", p.sigma))?;
    require(p.tau.is_finite() && p.tau >= 0.0, "/parameters/tau", format!("must be nonnegative, got {}", p.tau))?;
    require(p.resolution >= 1, "/parameters/resolution", "must be at least 1")?;
    if let Some(eps) = p.epsilon {
        require(eps.is_finite() && eps > 0.0, "/parameters/epsilon", format!("must be positive, got {eps}"))?;
    }

    if !config.transforms.is_empty() {
        require(
            config.transforms.len() == n,
            "/transforms",
            format!("expected {n} transforms (or none for identity), got {}", config.transforms.len()),
        )?;
        for (i, t) in config.transforms.iter().enumerate() {
            t.validate()
                .map_err(|e| CliError::config_at(format!("/transforms/{i}"), e.to_string()))?;
        }
    }

    let run = &config.run;
    require(run.xi.is_finite() && run.xi > 0.0 && run.xi < 1.0, "/run/xi", format!("must lie strictly between 0 and 1, got {}", run.xi))?;
    require(
        run.gammas.len() == n,
        "/run/gammas",
        format!("expected {n} test probabilities, got {}", run.gammas.len()),
    )?;
    for (i, &g) in run.gammas.iter().enumerate() {
        require(
            g.is_finite() && g > 0.0 && g < 1.0,
            &format!("/run/gammas/{i}"),
            format!("must lie strictly between 0 and 1, got {g}"),
        )?;
    }
    if let Some(resamplers) = &run.resamplers {
        require(
            resamplers.len() == n,
            "/run/resamplers",
            format!("expected {n} resamplers, got {}", resamplers.len()),
        )?;
    }
    if let Some(t) = run.epoch_length {
        require(t >= 1, "/run/epoch_length", "must be at least 1 when given")?;
    }
    require(run.max_epoch_length >= 1, "/run/max_epoch_length", "must be at least 1")?;
    require(run.replications >= 1, "/run/replications", "must be at least 1")?;

    if let Some(sweep) = &config.sweep {
        validate_sweep(sweep)?;
    }

    if let Some(outputs) = &config.outputs {
        if let Some(formats) = &outputs.formats {
            for (i, f) in formats.iter().enumerate() {
                require(
                    matches!(f.as_str(), "json" | "csv" | "ndjson"),
                    &format!("/outputs/formats/{i}"),
                    format!("unknown format {f:?}; expected json, csv, or ndjson"),
                )?;
            }
        }
    }
    Ok(())
}

fn validate_grid(grid: &[f64], pointer: &str) -> Result<(), CliError> {
    for (i, &x) in grid.iter().enumerate() {
        require(
            x.is_finite() && x > 0.0 && x < 1.0,
            &format!("{pointer}/{i}"),
            format!("perturbation level must lie strictly between 0 and 1, got {x}"),
        )?;
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    require(
        sorted.len() >= 2,
        pointer,
        format!("need at least two distinct levels, got {}", sorted.len()),
    )
}

pub fn validate_sweep(sweep: &SweepBlock) -> Result<(), CliError> {
    validate_grid(&sweep.xi_grid, "/sweep/xi_grid")?;
    if let Some(grid) = &sweep.slope_grid {
        validate_grid(grid, "/sweep/slope_grid")?;
    }
    if let Some(pairs) = sweep.slope_pairs {
        require(pairs >= 1, "/sweep/slope_pairs", "must be at least 1")?;
    }
    Ok(())
}

/// Reads the state-count cap, honoring the environment override.
pub fn state_cap() -> Result<usize, CliError> {
    match std::env::var(STATE_CAP_ENV) {
        Ok(raw) => raw.trim().parse::<usize>().map_err(|_| {
            CliError::config(format!("{STATE_CAP_ENV} must be a nonnegative integer, got {raw:?}"))
        }),
        Err(_) => Ok(DEFAULT_STATE_CAP),
    }
}

/// A validated config materialized into core objects.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub game: Game,
    pub space: StateSpace,
    pub ceiling: f64,
    /// Run settings at the config's perturbation level. `epochs` is
    /// clamped to at least 1 so analysis functions accept the config;
    /// commands consult `config.run.epochs` for the real count.
    pub run: RunConfig,
    pub epoch_length: u64,
    pub epoch_length_capped: bool,
}

impl Prepared {
    pub fn transforms(&self) -> &[UtilityTransform] {
        &self.run.transforms
    }

    pub fn tau(&self) -> f64 {
        self.config.parameters.tau
    }

    pub fn mode(&self) -> DistanceMode {
        self.config.parameters.distance_mode
    }
}

fn build_resamplers(
    config: &ExperimentConfig,
) -> Result<Vec<Resampler>, CliError> {
    let n = config.num_players();
    match &config.run.resamplers {
        None => Ok((0..n).map(|_| Resampler::uniform()).collect()),
        Some(list) => list
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                ResamplerConfig::Uniform => Ok(Resampler::uniform()),
                ResamplerConfig::Weighted { weights } => Resampler::weighted(weights.clone())
                    .map_err(|e| {
                        CliError::config_at(format!("/run/resamplers/{i}"), e.to_string())
                    }),
            })
            .collect(),
    }
}

/// Epoch length: explicit override, or the test-reliability bound at the
/// dynamics' own significance level, capped.
fn derive_epoch_length(
    config: &ExperimentConfig,
    game: &Game,
    space: &StateSpace,
    ceiling: f64,
) -> Result<(u64, bool), CliError> {
    if let Some(t) = config.run.epoch_length {
        return Ok((t, false));
    }
    let cap = config.run.max_epoch_length;
    let alpha = config.run.xi.powf(ceiling).max(f64::MIN_POSITIVE);
    let needed = required_sample_size(game, space.sets(), config.parameters.tau, alpha, cap)?;
    Ok(match needed {
        RequiredSampleSize::NeverNeeded => (FALLBACK_EPOCH_LENGTH.min(cap), false),
        RequiredSampleSize::Bounded { t, capped, .. } => (t, capped),
    })
}

/// Builds everything a command needs from a validated config.
pub fn prepare(config: ExperimentConfig, cap: usize) -> Result<Prepared, CliError> {
    let n = config.num_players();
    let action_counts: Vec<usize> = config.game.action_labels.iter().map(|l| l.len()).collect();
    let game = Game::new(action_counts, config.game.payoffs.clone())
        .map_err(|e| CliError::config_at("/game", e.to_string()))?;

    let transforms = if config.transforms.is_empty() {
        vec![UtilityTransform::Identity; n]
    } else {
        config.transforms.clone()
    };
    let ceiling = exploration_ceiling(&game, &transforms)
        .map_err(|e| CliError::config_at("/transforms", e.to_string()))?;

    let space = StateSpace::build(
        &game,
        config.parameters.resolution,
        config.parameters.sigma,
        cap,
    )?;

    let (epoch_length, epoch_length_capped) =
        derive_epoch_length(&config, &game, &space, ceiling)?;
    let resamplers = build_resamplers(&config)?;

    let run = RunConfig {
        xi: config.run.xi,
        gammas: config.run.gammas.clone(),
        resamplers,
        transforms,
        tau: config.parameters.tau,
        ceiling,
        distance_mode: config.parameters.distance_mode,
        epoch_length,
        epochs: config.run.epochs.max(1),
        seed: config.run.seed,
    };
    run.validate(&game, &space)?;

    if let InitialCondition::States(states) = &config.run.initial {
        require(!states.is_empty(), "/run/initial", "state list must not be empty")?;
        for (i, &z) in states.iter().enumerate() {
            require(
                z < space.state_count(),
                &format!("/run/initial/{i}"),
                format!("state {z} out of range ({} states)", space.state_count()),
            )?;
        }
    }

    Ok(Prepared {
        config,
        game,
        space,
        ceiling,
        run,
        epoch_length,
        epoch_length_capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "game": {
                "action_labels": [["a","b"],["a","b"]],
                "payoffs": [[1,0,0,1],[1,0,0,1]]
            },
            "parameters": {"sigma": 0.25, "tau": 0.3, "resolution": 2},
            "run": {"xi": 0.1, "gammas": [0.5, 0.5], "epochs": 5, "seed": 3}
        }"#
        .to_string()
    }

    #[test]
    fn round_trip_preserves_the_configuration() {
        let config = parse(&minimal()).unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let again = parse(&text).unwrap();
        assert_eq!(config, again);
    }

    #[test]
    fn unknown_fields_are_rejected_with_a_pointer() {
        let text = minimal().replace("\"epochs\": 5", "\"epochs\": 5, \"bogus\": 1");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/run"), "{err}");
    }

    #[test]
    fn payoff_length_errors_point_at_the_table() {
        let text = minimal().replace("[1,0,0,1],[1,0,0,1]", "[1,0,0],[1,0,0,1]");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/game/payoffs/0"), "{err}");
    }

    #[test]
    fn gamma_bounds_are_open() {
        let text = minimal().replace("[0.5, 0.5]", "[0.5, 1.0]");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("/run/gammas/1"), "{err}");
    }

    #[test]
    fn prepared_run_carries_the_derived_epoch_length() {
        let config = parse(&minimal()).unwrap();
        let prepared = prepare(config, DEFAULT_STATE_CAP).unwrap();
        assert!(prepared.epoch_length >= 1);
        assert_eq!(prepared.run.epoch_length, prepared.epoch_length);
        // Analysis functions must accept the prepared settings even when
        // the config asks for zero epochs.
        assert!(prepared.run.epochs >= 1);
    }

    #[test]
    fn sweep_grid_needs_two_distinct_interior_levels() {
        let single = SweepBlock {
            xi_grid: vec![0.1],
            slope_grid: None,
            slope_pairs: None,
            simulate: false,
        };
        assert_eq!(validate_sweep(&single).unwrap_err().exit_code(), 2);
        let boundary = SweepBlock {
            xi_grid: vec![0.1, 1.0],
            slope_grid: None,
            slope_pairs: None,
            simulate: false,
        };
        let err = validate_sweep(&boundary).unwrap_err();
        assert!(err.to_string().contains("/sweep/xi_grid/1"), "{err}");
    }
}
