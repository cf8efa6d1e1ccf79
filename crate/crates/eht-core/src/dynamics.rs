//! Epoch-level simulation of the learning process.
//!
//! Each epoch the current state fixes every player's mixed strategy. Play
//! is sampled as joint action counts over one epoch of fixed length. Each
//! player then flips a test coin; testers compare their belief against the
//! observed opponent frequencies and resample their belief on rejection,
//! while testers whose belief survives may still abandon it with a small
//! exploration probability tied to how much utility they anticipate.
//!
//! Randomness is consumed in a fixed order so that runs are reproducible
//! from a seed alone: (1) the joint action counts, (2) one test coin per
//! player in ascending order (drawn even when the test probability is 0 or
//! 1), (3) test decisions, which use no randomness, (4) exploration coins
//! for players whose test passed, ascending, (5) resampling draws for
//! players who rejected or explored, ascending.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{product_distribution, BeliefSets, DistanceMode, StateSpace};
use crate::game::{Game, UtilityTransform};
use crate::testing::{run_test, sample_multinomial, SampleCounts, TestParams};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("test probability for player {player} must lie in [0, 1], got {value}")]
    BadGamma { player: usize, value: f64 },
    #[error("perturbation level must lie strictly between 0 and 1, got {value}")]
    BadXi { value: f64 },
    #[error("exploration ceiling must be positive and finite, got {value}")]
    BadCeiling { value: f64 },
    #[error("significance {xi}^{ceiling} underflows to zero")]
    SignificanceUnderflow { xi: f64, ceiling: f64 },
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("epoch length must be at least 1")]
    ZeroEpochLength,
    #[error("epoch count must be at least 1")]
    ZeroEpochs,
    #[error("initial state {state} out of range for {count} states")]
    BadInitialState { state: usize, count: usize },
    #[error("resampling weights: {0}")]
    BadWeights(String),
    #[error("resampler for player {player} does not fit their belief grid: {reason}")]
    ResamplerMismatch { player: usize, reason: String },
    #[error(
        "transformed anticipated utility {value} for player {player} is not positive, \
         so no exploration probability exists"
    )]
    NonpositiveExponent { player: usize, value: f64 },
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
    #[error(transparent)]
    Test(#[from] crate::testing::TestError),
}

/// Distribution over one player's belief set used after a rejection or an
/// exploration event. It never depends on the current belief, which keeps
/// every belief reachable in one resampling step.
#[derive(Debug, Clone)]
pub struct Resampler {
    kind: ResamplerKind,
}

#[derive(Debug, Clone)]
enum ResamplerKind {
    Uniform,
    /// One normalized weight vector per opponent slot in ascending
    /// opponent order; the joint draw is the product across slots.
    Weighted { per_opponent: Vec<Vec<f64>> },
}

impl Resampler {
    pub fn uniform() -> Self {
        Self {
            kind: ResamplerKind::Uniform,
        }
    }

    /// Weighted product-form resampler. Each inner vector weights one
    /// opponent's grid points; weights must be positive and finite and are
    /// normalized here.
    pub fn weighted(per_opponent: Vec<Vec<f64>>) -> Result<Self, DynamicsError> {
        if per_opponent.is_empty() {
            return Err(DynamicsError::BadWeights("no opponent slots".into()));
        }
        let mut normalized = Vec::with_capacity(per_opponent.len());
        for (slot, weights) in per_opponent.into_iter().enumerate() {
            if weights.is_empty() {
                return Err(DynamicsError::BadWeights(format!("slot {slot} is empty")));
            }
            if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                return Err(DynamicsError::BadWeights(format!(
                    "slot {slot} has a weight that is not positive and finite"
                )));
            }
            let sum: f64 = weights.iter().sum();
            normalized.push(weights.iter().map(|w| w / sum).collect());
        }
        Ok(Self {
            kind: ResamplerKind::Weighted {
                per_opponent: normalized,
            },
        })
    }

    /// Checks the shape against `player`'s belief grid.
    pub fn validate(&self, sets: &BeliefSets, player: usize) -> Result<(), DynamicsError> {
        let ResamplerKind::Weighted { per_opponent } = &self.kind else {
            return Ok(());
        };
        let slots: Vec<usize> = sets.opponents(player).collect();
        if per_opponent.len() != slots.len() {
            return Err(DynamicsError::ResamplerMismatch {
                player,
                reason: format!(
                    "{} weight vectors for {} opponents",
                    per_opponent.len(),
                    slots.len()
                ),
            });
        }
        for (pos, &j) in slots.iter().enumerate() {
            let expected = sets.grid(j).len();
            if per_opponent[pos].len() != expected {
                return Err(DynamicsError::ResamplerMismatch {
                    player,
                    reason: format!(
                        "slot {pos} has {} weights but opponent {j}'s grid has {expected} points",
                        per_opponent[pos].len()
                    ),
                });
            }
        }
        Ok(())
    }

    /// Probability of drawing belief index `to` for `player`.
    pub fn prob(&self, sets: &BeliefSets, player: usize, to: usize) -> f64 {
        match &self.kind {
            ResamplerKind::Uniform => 1.0 / sets.belief_count(player) as f64,
            ResamplerKind::Weighted { per_opponent } => {
                let digits = sets.decode_belief(player, to);
                digits
                    .iter()
                    .zip(per_opponent)
                    .map(|(&d, w)| w[d])
                    .product()
            }
        }
    }

    /// Smallest single-draw probability; positive by construction.
    pub fn floor(&self, sets: &BeliefSets, player: usize) -> f64 {
        match &self.kind {
            ResamplerKind::Uniform => 1.0 / sets.belief_count(player) as f64,
            ResamplerKind::Weighted { per_opponent } => per_opponent
                .iter()
                .map(|w| w.iter().cloned().fold(f64::INFINITY, f64::min))
                .product(),
        }
    }

    /// Draws a belief index. Uniform consumes one uniform variate; weighted
    /// consumes one per opponent slot, slots in ascending order.
    pub fn sample<R: Rng>(&self, sets: &BeliefSets, player: usize, rng: &mut R) -> usize {
        match &self.kind {
            ResamplerKind::Uniform => rng.gen_range(0..sets.belief_count(player)),
            ResamplerKind::Weighted { per_opponent } => {
                let mut digits = Vec::with_capacity(per_opponent.len());
                for weights in per_opponent {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut chosen = weights.len() - 1;
                    for (k, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            chosen = k;
                            break;
                        }
                    }
                    digits.push(chosen);
                }
                sets.encode_belief(player, &digits)
            }
        }
    }
}

/// Everything a run needs besides the game and the state space.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Perturbation level in (0, 1). Drives both the test significance
    /// `xi^ceiling` and the exploration probabilities.
    pub xi: f64,
    /// Per-player test probabilities in [0, 1].
    pub gammas: Vec<f64>,
    pub resamplers: Vec<Resampler>,
    /// Per-player utility transforms; exploration probability is
    /// `xi^(transform(anticipated utility))`.
    pub transforms: Vec<UtilityTransform>,
    /// Test tolerance.
    pub tau: f64,
    /// Exponent giving the test significance `xi^ceiling`. Chosen above
    /// every attainable transformed utility so that rejections at
    /// consistent states are rarer than any exploration.
    pub ceiling: f64,
    pub distance_mode: DistanceMode,
    /// Plays per epoch.
    pub epoch_length: u64,
    pub epochs: u64,
    pub seed: u64,
}

impl RunConfig {
    /// Test significance level `xi^ceiling`.
    pub fn significance(&self) -> f64 {
        self.xi.powf(self.ceiling)
    }

    pub fn validate(&self, game: &Game, space: &StateSpace) -> Result<(), DynamicsError> {
        let n = game.num_players();
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(DynamicsError::BadXi { value: self.xi });
        }
        if !(self.ceiling.is_finite() && self.ceiling > 0.0) {
            return Err(DynamicsError::BadCeiling {
                value: self.ceiling,
            });
        }
        if self.significance() <= 0.0 {
            return Err(DynamicsError::SignificanceUnderflow {
                xi: self.xi,
                ceiling: self.ceiling,
            });
        }
        if self.gammas.len() != n {
            return Err(DynamicsError::LengthMismatch {
                what: "test probabilities",
                expected: n,
                got: self.gammas.len(),
            });
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            if !(g.is_finite() && (0.0..=1.0).contains(&g)) {
                return Err(DynamicsError::BadGamma {
                    player: i,
                    value: g,
                });
            }
        }
        if self.resamplers.len() != n {
            return Err(DynamicsError::LengthMismatch {
                what: "resamplers",
                expected: n,
                got: self.resamplers.len(),
            });
        }
        for (i, r) in self.resamplers.iter().enumerate() {
            r.validate(space.sets(), i)?;
        }
        if self.transforms.len() != n {
            return Err(DynamicsError::LengthMismatch {
                what: "utility transforms",
                expected: n,
                got: self.transforms.len(),
            });
        }
        for t in &self.transforms {
            t.validate()?;
        }
        TestParams {
            tau: self.tau,
            alpha: self.significance(),
        }
        .validate()?;
        if self.epoch_length == 0 {
            return Err(DynamicsError::ZeroEpochLength);
        }
        if self.epochs == 0 {
            return Err(DynamicsError::ZeroEpochs);
        }
        Ok(())
    }
}

/// What one player did in one epoch. Fields are `None` when the branch
/// was never reached.
#[derive(Debug, Clone, Serialize)]
pub struct PlayerEpochRecord {
    pub tested: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explored: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resampled_to: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// State whose strategies generated this epoch's play.
    pub state_before: usize,
    pub state_after: usize,
    /// Action-profile counts, indexed like [`Game::profile_index`].
    pub joint_counts: Vec<u64>,
    /// Untransformed anticipated utility per player at `state_before`.
    pub anticipated_utilities: Vec<f64>,
    pub players: Vec<PlayerEpochRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub initial_state: usize,
    pub final_state: usize,
    pub records: Vec<EpochRecord>,
}

/// Maps each joint action profile to each player's opponent-profile index
/// (opponents ascending, first slot most significant).
pub(crate) fn build_projection(game: &Game) -> Vec<Vec<usize>> {
    let n = game.num_players();
    let mut map = vec![vec![0usize; game.num_profiles()]; n];
    for idx in 0..game.num_profiles() {
        let actions = game.profile_from_index(idx);
        for i in 0..n {
            let mut opp = 0usize;
            for (j, &a) in actions.iter().enumerate() {
                if j != i {
                    opp = opp * game.action_count(j) + a;
                }
            }
            map[i][idx] = opp;
        }
    }
    map
}

/// Advances one epoch from `state`, consuming randomness in the
/// module-level order. Convenience wrapper that rebuilds the projection
/// tables; [`run`] amortizes them across epochs.
pub fn run_epoch<R: Rng>(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    epoch: u64,
    state: usize,
    rng: &mut R,
) -> Result<EpochRecord, DynamicsError> {
    let projection = build_projection(game);
    run_epoch_with(game, space, cfg, epoch, state, rng, &projection)
}

fn run_epoch_with<R: Rng>(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    epoch: u64,
    state: usize,
    rng: &mut R,
    projection: &[Vec<usize>],
) -> Result<EpochRecord, DynamicsError> {
    let n = game.num_players();
    let sets = space.sets();
    let beliefs = space.decode_state(state);

    // Phase 1: joint play for the whole epoch.
    let profile = space.strategy_profile(&beliefs);
    let marginals: Vec<&[f64]> = profile.iter().map(|s| s.probs()).collect();
    let joint = product_distribution(&marginals);
    let joint_counts = sample_multinomial(&joint, cfg.epoch_length, rng)?;

    // Phase 2: test coins, one per player regardless of gamma.
    let tested: Vec<bool> = (0..n).map(|i| rng.gen::<f64>() < cfg.gammas[i]).collect();

    // Phase 3: deterministic test decisions.
    let mut players: Vec<PlayerEpochRecord> = (0..n)
        .map(|i| PlayerEpochRecord {
            tested: tested[i],
            statistic: None,
            threshold: None,
            rejected: None,
            explored: None,
            resampled_to: None,
        })
        .collect();
    let params = TestParams {
        tau: cfg.tau,
        alpha: cfg.significance(),
    };
    for i in 0..n {
        if !tested[i] {
            continue;
        }
        let mut opp_counts = vec![0u64; game.num_opponent_profiles(i)];
        for (idx, &c) in joint_counts.iter().enumerate() {
            opp_counts[projection[i][idx]] += c;
        }
        let counts = SampleCounts::new(opp_counts)?;
        let belief = sets.belief_marginals(i, beliefs[i]);
        let refs: Vec<&[f64]> = belief.iter().map(Vec::as_slice).collect();
        let belief_joint = product_distribution(&refs);
        let outcome = run_test(&counts, &belief_joint, &params)?;
        players[i].statistic = Some(outcome.statistic);
        players[i].threshold = Some(outcome.threshold);
        players[i].rejected = Some(outcome.rejected);
    }

    // Phase 4: exploration coins for surviving testers.
    let anticipated: Vec<f64> = (0..n)
        .map(|i| sets.anticipated_utility(i, beliefs[i]))
        .collect();
    for i in 0..n {
        if players[i].rejected != Some(false) {
            continue;
        }
        let exponent = cfg.transforms[i].eval(anticipated[i]);
        if exponent <= 0.0 {
            return Err(DynamicsError::NonpositiveExponent {
                player: i,
                value: exponent,
            });
        }
        let p = cfg.xi.powf(exponent);
        players[i].explored = Some(rng.gen::<f64>() < p);
    }

    // Phase 5: resampling draws.
    let mut next = beliefs.clone();
    for i in 0..n {
        if players[i].rejected == Some(true) || players[i].explored == Some(true) {
            let b = cfg.resamplers[i].sample(sets, i, rng);
            players[i].resampled_to = Some(b);
            next[i] = b;
        }
    }

    Ok(EpochRecord {
        epoch,
        state_before: state,
        state_after: space.encode_state(&next),
        joint_counts,
        anticipated_utilities: anticipated,
        players,
    })
}

/// Runs `cfg.epochs` epochs from `initial_state` with a fresh generator
/// seeded from `cfg.seed`.
pub fn run(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    initial_state: usize,
) -> Result<RunResult, DynamicsError> {
    cfg.validate(game, space)?;
    if initial_state >= space.state_count() {
        return Err(DynamicsError::BadInitialState {
            state: initial_state,
            count: space.state_count(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let projection = build_projection(game);
    let mut state = initial_state;
    let mut records = Vec::with_capacity(cfg.epochs as usize);
    for k in 0..cfg.epochs {
        let record = run_epoch_with(game, space, cfg, k, state, &mut rng, &projection)?;
        state = record.state_after;
        records.push(record);
    }
    Ok(RunResult {
        initial_state,
        final_state: state,
        records,
    })
}

/// Fraction of epochs whose generating state lies in `states`. Empty
/// trajectories count as zero.
pub fn occupancy(records: &[EpochRecord], states: &[usize]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let set: HashSet<usize> = states.iter().copied().collect();
    let hits = records
        .iter()
        .filter(|r| set.contains(&r.state_before))
        .count();
    hits as f64 / records.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::exploration_ceiling;
    use approx::assert_abs_diff_eq;

    fn stag_hunt() -> Game {
        Game::two_player(
            vec![vec![4.0, 0.0], vec![3.0, 3.0]],
            vec![vec![4.0, 3.0], vec![0.0, 3.0]],
        )
        .unwrap()
    }

    fn space(game: &Game) -> StateSpace {
        StateSpace::build(game, 4, 0.25, 1_000_000).unwrap()
    }

    fn config(game: &Game, xi: f64, epoch_length: u64, epochs: u64, seed: u64) -> RunConfig {
        let transforms = vec![UtilityTransform::Identity; 2];
        RunConfig {
            xi,
            gammas: vec![1.0, 1.0],
            resamplers: vec![Resampler::uniform(), Resampler::uniform()],
            ceiling: exploration_ceiling(game, &transforms).unwrap(),
            transforms,
            tau: 0.3,
            distance_mode: DistanceMode::JointProduct,
            epoch_length,
            epochs,
            seed,
        }
    }

    // Player beliefs (4, 4) put probability one on the first action; both
    // smooth best responses then play it with probability 0.982.
    const MUTUAL_FIRST: [usize; 2] = [4, 4];

    #[test]
    fn projection_inverts_profile_indexing() {
        let game = Game::new(vec![2, 3, 2], vec![vec![0.0; 12]; 3]).unwrap();
        let map = build_projection(&game);
        for idx in 0..game.num_profiles() {
            let a = game.profile_from_index(idx);
            assert_eq!(map[0][idx], a[1] * 2 + a[2]);
            assert_eq!(map[1][idx], a[0] * 2 + a[2]);
            assert_eq!(map[2][idx], a[0] * 3 + a[1]);
        }
    }

    #[test]
    fn zero_test_probability_freezes_the_state() {
        let game = stag_hunt();
        let space = space(&game);
        let mut cfg = config(&game, 0.05, 50, 40, 7);
        cfg.gammas = vec![0.0, 0.0];
        let result = run(&game, &space, &cfg, 13).unwrap();
        assert_eq!(result.final_state, 13);
        for r in &result.records {
            assert_eq!(r.state_after, 13);
            assert!(r.players.iter().all(|p| !p.tested));
        }
    }

    #[test]
    fn consistent_state_survives_small_perturbation() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 1e-3, 2000, 300, 11);
        let start = space.encode_state(&MUTUAL_FIRST);
        assert!(space.is_consistent(&MUTUAL_FIRST, cfg.tau, cfg.distance_mode));
        let result = run(&game, &space, &cfg, start).unwrap();
        assert_eq!(result.final_state, start);
        assert!(result.records.iter().all(|r| r.state_after == start));
    }

    #[test]
    fn inconsistent_players_reject_and_resample() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 0.05, 500, 1, 3);
        // Player 0 expects the second action, player 1 expects the first;
        // both are off by nearly the whole simplex.
        let start = space.encode_state(&[0, 4]);
        assert!(!space.is_consistent(&[0, 4], cfg.tau, cfg.distance_mode));
        let result = run(&game, &space, &cfg, start).unwrap();
        let record = &result.records[0];
        for p in &record.players {
            assert_eq!(p.rejected, Some(true));
            assert!(p.resampled_to.is_some());
        }
    }

    #[test]
    fn runs_are_reproducible_from_the_seed() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 0.2, 100, 50, 99);
        let a = run(&game, &space, &cfg, 6).unwrap();
        let b = run(&game, &space, &cfg, 6).unwrap();
        let states_a: Vec<usize> = a.records.iter().map(|r| r.state_after).collect();
        let states_b: Vec<usize> = b.records.iter().map(|r| r.state_after).collect();
        assert_eq!(states_a, states_b);
        assert_eq!(a.records[0].joint_counts, b.records[0].joint_counts);
    }

    #[test]
    fn joint_counts_sum_to_the_epoch_length() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 0.1, 333, 20, 5);
        let result = run(&game, &space, &cfg, 12).unwrap();
        for r in &result.records {
            assert_eq!(r.joint_counts.iter().sum::<u64>(), 333);
        }
    }

    #[test]
    fn exploration_rate_matches_the_assigned_probability() {
        let game = stag_hunt();
        let space = space(&game);
        let start = space.encode_state(&MUTUAL_FIRST);
        let expected = {
            let u = space.sets().anticipated_utility(0, MUTUAL_FIRST[0]);
            0.5f64.powf(u)
        };
        let trials = 2000;
        let mut explored = 0;
        for seed in 0..trials {
            let cfg = config(&game, 0.5, 500, 1, seed);
            let result = run(&game, &space, &cfg, start).unwrap();
            let p = &result.records[0].players[0];
            assert_eq!(p.rejected, Some(false), "seed {seed} rejected unexpectedly");
            if p.explored == Some(true) {
                explored += 1;
            }
        }
        let rate = explored as f64 / trials as f64;
        let band = 3.0 * (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!(
            (rate - expected).abs() <= band,
            "rate {rate} vs expected {expected} (band {band})"
        );
    }

    #[test]
    fn occupancy_counts_generating_states() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 0.2, 50, 30, 17);
        let result = run(&game, &space, &cfg, 24).unwrap();
        let all: Vec<usize> = (0..space.state_count()).collect();
        assert_abs_diff_eq!(occupancy(&result.records, &all), 1.0);
        assert_abs_diff_eq!(occupancy(&result.records, &[]), 0.0);
        let hits = result
            .records
            .iter()
            .filter(|r| r.state_before == 24)
            .count();
        assert_abs_diff_eq!(
            occupancy(&result.records, &[24]),
            hits as f64 / 30.0
        );
    }

    #[test]
    fn uniform_resampler_has_flat_probabilities() {
        let game = stag_hunt();
        let space = space(&game);
        let sets = space.sets();
        let r = Resampler::uniform();
        for b in 0..sets.belief_count(0) {
            assert_abs_diff_eq!(r.prob(sets, 0, b), 0.2);
        }
        assert_abs_diff_eq!(r.floor(sets, 0), 0.2);
    }

    #[test]
    fn weighted_resampler_normalizes_and_multiplies() {
        let game = stag_hunt();
        let space = space(&game);
        let sets = space.sets();
        let r = Resampler::weighted(vec![vec![1.0, 1.0, 2.0, 2.0, 4.0]]).unwrap();
        r.validate(sets, 0).unwrap();
        let expected = [0.1, 0.1, 0.2, 0.2, 0.4];
        for (b, &p) in expected.iter().enumerate() {
            assert_abs_diff_eq!(r.prob(sets, 0, b), p, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(r.floor(sets, 0), 0.1, epsilon = 1e-12);
        let total: f64 = (0..sets.belief_count(0)).map(|b| r.prob(sets, 0, b)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_resampler_multiplies_across_slots() {
        let game = Game::new(vec![2, 2, 2], vec![vec![1.0; 8]; 3]).unwrap();
        let space = StateSpace::build(&game, 2, 0.5, 1_000_000).unwrap();
        let sets = space.sets();
        let r = Resampler::weighted(vec![vec![1.0, 1.0, 2.0], vec![3.0, 1.0, 1.0]]).unwrap();
        r.validate(sets, 1).unwrap();
        // Belief digits (2, 0) for player 1: slots are players 0 and 2.
        let b = sets.encode_belief(1, &[2, 0]);
        assert_abs_diff_eq!(r.prob(sets, 1, b), 0.5 * 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(r.floor(sets, 1), 0.25 * 0.2, epsilon = 1e-12);
    }

    #[test]
    fn weighted_sampling_tracks_the_weights() {
        let game = stag_hunt();
        let space = space(&game);
        let sets = space.sets();
        let r = Resampler::weighted(vec![vec![1.0, 1.0, 2.0, 2.0, 4.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 20_000;
        let mut hist = vec![0usize; 5];
        for _ in 0..draws {
            hist[r.sample(sets, 0, &mut rng)] += 1;
        }
        for (b, &count) in hist.iter().enumerate() {
            let p = r.prob(sets, 0, b);
            let rate = count as f64 / draws as f64;
            let band = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
            assert!(
                (rate - p).abs() <= band,
                "belief {b}: rate {rate} vs prob {p}"
            );
        }
    }

    #[test]
    fn bad_resampler_shapes_are_rejected() {
        let game = stag_hunt();
        let space = space(&game);
        let sets = space.sets();
        assert!(Resampler::weighted(vec![]).is_err());
        assert!(Resampler::weighted(vec![vec![]]).is_err());
        assert!(Resampler::weighted(vec![vec![1.0, -1.0]]).is_err());
        assert!(Resampler::weighted(vec![vec![1.0, f64::NAN]]).is_err());
        let wrong_len = Resampler::weighted(vec![vec![1.0, 1.0]]).unwrap();
        assert!(wrong_len.validate(sets, 0).is_err());
        let wrong_slots =
            Resampler::weighted(vec![vec![1.0; 5], vec![1.0; 5]]).unwrap();
        assert!(wrong_slots.validate(sets, 0).is_err());
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let game = stag_hunt();
        let space = space(&game);
        let good = config(&game, 0.05, 100, 10, 0);
        good.validate(&game, &space).unwrap();

        let mut c = good.clone();
        c.xi = 0.0;
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::BadXi { .. })
        ));
        c = good.clone();
        c.xi = 1.0;
        assert!(c.validate(&game, &space).is_err());
        c = good.clone();
        c.gammas = vec![0.5, 1.5];
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::BadGamma { player: 1, .. })
        ));
        c = good.clone();
        c.gammas = vec![0.5];
        assert!(c.validate(&game, &space).is_err());
        c = good.clone();
        c.ceiling = 0.0;
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::BadCeiling { .. })
        ));
        c = good.clone();
        c.ceiling = 2000.0;
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::SignificanceUnderflow { .. })
        ));
        c = good.clone();
        c.epoch_length = 0;
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::ZeroEpochLength)
        ));
        c = good.clone();
        c.epochs = 0;
        assert!(matches!(
            c.validate(&game, &space),
            Err(DynamicsError::ZeroEpochs)
        ));
        c = good;
        c.tau = -0.1;
        assert!(c.validate(&game, &space).is_err());
    }

    #[test]
    fn out_of_range_initial_state_is_rejected() {
        let game = stag_hunt();
        let space = space(&game);
        let cfg = config(&game, 0.05, 100, 10, 0);
        assert!(matches!(
            run(&game, &space, &cfg, 25),
            Err(DynamicsError::BadInitialState { state: 25, count: 25 })
        ));
    }
}
