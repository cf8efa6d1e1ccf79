//! Finite normal-form games, mixed strategies, smooth best responses, and
//! monotone utility transforms.
//!
//! Joint action profiles are indexed in mixed radix with player 0 as the
//! most significant digit and the last player varying fastest; the same
//! convention orders each player's joint opponent space. All orderings in
//! this crate are deterministic so that repeated runs enumerate identically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for accepting a probability vector whose entries were produced
/// by floating-point arithmetic.
pub const SIMPLEX_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("a game needs at least two players, got {0}")]
    TooFewPlayers(usize),
    #[error("player {player} has no actions")]
    EmptyActionSet { player: usize },
    #[error("payoff table for player {player} has {got} entries, expected {expected}")]
    PayoffLength {
        player: usize,
        got: usize,
        expected: usize,
    },
    #[error("payoff for player {player} at joint profile {profile} is not finite")]
    NonFinitePayoff { player: usize, profile: usize },
    #[error("player index {player} out of range for {players} players")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("strategy vector has length {got}, expected {expected}")]
    StrategyLength { got: usize, expected: usize },
    #[error("probability vector invalid: {0}")]
    NotAProbability(String),
    #[error("expected {expected} opponent marginals, got {got}")]
    OpponentCount { got: usize, expected: usize },
    #[error("smoothing temperature must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("utility transform invalid: {0}")]
    BadTransform(String),
}

/// A probability vector over one player's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    /// Validates non-negativity and that the entries sum to 1 within
    /// [`SIMPLEX_SUM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::NotAProbability("empty vector".into()));
        }
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(GameError::NotAProbability(format!("entry {p} out of range")));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(GameError::NotAProbability(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Point mass on one action.
    pub fn pure(action: usize, len: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One mixed strategy per player.
pub type StrategyProfile = Vec<MixedStrategy>;

/// A finite normal-form game with dense payoff tables.
#[derive(Debug, Clone)]
pub struct Game {
    action_counts: Vec<usize>,
    /// `payoffs[i][joint]` for the mixed-radix joint profile index.
    payoffs: Vec<Vec<f64>>,
}

impl Game {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if action_counts.len() < 2 {
            return Err(GameError::TooFewPlayers(action_counts.len()));
        }
        for (player, &k) in action_counts.iter().enumerate() {
            if k == 0 {
                return Err(GameError::EmptyActionSet { player });
            }
        }
        let expected: usize = action_counts.iter().product();
        if payoffs.len() != action_counts.len() {
            return Err(GameError::PayoffLength {
                player: payoffs.len(),
                got: payoffs.len(),
                expected: action_counts.len(),
            });
        }
        for (player, table) in payoffs.iter().enumerate() {
            if table.len() != expected {
                return Err(GameError::PayoffLength {
                    player,
                    got: table.len(),
                    expected,
                });
            }
            for (profile, &u) in table.iter().enumerate() {
                if !u.is_finite() {
                    return Err(GameError::NonFinitePayoff { player, profile });
                }
            }
        }
        Ok(Self {
            action_counts,
            payoffs,
        })
    }

    /// Two-player convenience constructor from row-major tables indexed
    /// `[row action][column action]`.
    pub fn two_player(u_row: Vec<Vec<f64>>, u_col: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let rows = u_row.len();
        let cols = u_row.first().map_or(0, Vec::len);
        let flatten = |t: &[Vec<f64>]| t.iter().flatten().copied().collect::<Vec<f64>>();
        Game::new(vec![rows, cols], vec![flatten(&u_row), flatten(&u_col)])
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn action_count(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    /// Number of joint action profiles `|A|`.
    pub fn num_profiles(&self) -> usize {
        self.action_counts.iter().product()
    }

    /// Number of joint opponent profiles `|A_{-i}|`.
    pub fn num_opponent_profiles(&self, player: usize) -> usize {
        self.action_counts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != player)
            .map(|(_, &k)| k)
            .product()
    }

    /// Action counts of the opponents of `player`, in ascending player order.
    pub fn opponent_action_counts(&self, player: usize) -> Vec<usize> {
        self.action_counts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != player)
            .map(|(_, &k)| k)
            .collect()
    }

    /// Mixed-radix index of a joint action profile.
    pub fn profile_index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.num_players());
        let mut idx = 0;
        for (j, &a) in actions.iter().enumerate() {
            debug_assert!(a < self.action_counts[j]);
            idx = idx * self.action_counts[j] + a;
        }
        idx
    }

    /// Inverse of [`Game::profile_index`].
    pub fn profile_from_index(&self, mut index: usize) -> Vec<usize> {
        let n = self.num_players();
        let mut actions = vec![0; n];
        for j in (0..n).rev() {
            actions[j] = index % self.action_counts[j];
            index /= self.action_counts[j];
        }
        actions
    }

    pub fn payoff(&self, player: usize, actions: &[usize]) -> f64 {
        self.payoffs[player][self.profile_index(actions)]
    }

    pub fn payoff_by_index(&self, player: usize, profile: usize) -> f64 {
        self.payoffs[player][profile]
    }

    pub fn max_payoff(&self, player: usize) -> f64 {
        self.payoffs[player].iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min_payoff(&self, player: usize) -> f64 {
        self.payoffs[player].iter().copied().fold(f64::MAX, f64::min)
    }

    /// Largest payoff across all players and profiles.
    pub fn max_payoff_overall(&self) -> f64 {
        (0..self.num_players())
            .map(|i| self.max_payoff(i))
            .fold(f64::MIN, f64::max)
    }

    fn check_player(&self, player: usize) -> Result<(), GameError> {
        if player >= self.num_players() {
            return Err(GameError::PlayerOutOfRange {
                player,
                players: self.num_players(),
            });
        }
        Ok(())
    }

    fn check_profile(&self, profile: &[MixedStrategy]) -> Result<(), GameError> {
        if profile.len() != self.num_players() {
            return Err(GameError::StrategyLength {
                got: profile.len(),
                expected: self.num_players(),
            });
        }
        for (j, s) in profile.iter().enumerate() {
            if s.len() != self.action_counts[j] {
                return Err(GameError::StrategyLength {
                    got: s.len(),
                    expected: self.action_counts[j],
                });
            }
        }
        Ok(())
    }
}

/// Iterates joint profiles in index order, yielding the digit vector.
pub(crate) struct ProfileIter {
    counts: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
    started: bool,
}

impl ProfileIter {
    pub(crate) fn new(counts: Vec<usize>) -> Self {
        let done = counts.iter().any(|&k| k == 0);
        let digits = vec![0; counts.len()];
        Self {
            counts,
            digits,
            done,
            started: false,
        }
    }
}

impl Iterator for ProfileIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.digits.clone());
        }
        // Odometer increment, last digit fastest.
        for j in (0..self.digits.len()).rev() {
            self.digits[j] += 1;
            if self.digits[j] < self.counts[j] {
                return Some(self.digits.clone());
            }
            self.digits[j] = 0;
        }
        self.done = true;
        None
    }
}

/// Expected utility of `player` under independent mixing, the full
/// multilinear sum over joint profiles.
pub fn expected_utility(
    game: &Game,
    player: usize,
    profile: &[MixedStrategy],
) -> Result<f64, GameError> {
    game.check_player(player)?;
    game.check_profile(profile)?;
    let mut total = 0.0;
    for (idx, actions) in ProfileIter::new(game.action_counts.clone()).enumerate() {
        let mut w = 1.0;
        for (j, &a) in actions.iter().enumerate() {
            w *= profile[j].probs()[a];
        }
        total += w * game.payoff_by_index(player, idx);
    }
    Ok(total)
}

fn check_marginals(game: &Game, player: usize, marginals: &[Vec<f64>]) -> Result<(), GameError> {
    let opp_counts = game.opponent_action_counts(player);
    if marginals.len() != opp_counts.len() {
        return Err(GameError::OpponentCount {
            got: marginals.len(),
            expected: opp_counts.len(),
        });
    }
    for (slot, m) in marginals.iter().enumerate() {
        if m.len() != opp_counts[slot] {
            return Err(GameError::StrategyLength {
                got: m.len(),
                expected: opp_counts[slot],
            });
        }
    }
    Ok(())
}

/// Utility of each own action against independent opponent marginals,
/// `U_i(a_i, b) = sum over joint opponent profiles of payoff times the
/// product of marginal probabilities`. Marginals are ordered by ascending
/// opponent player index.
pub fn action_utilities(
    game: &Game,
    player: usize,
    opponent_marginals: &[Vec<f64>],
) -> Result<Vec<f64>, GameError> {
    game.check_player(player)?;
    check_marginals(game, player, opponent_marginals)?;
    let mut utils = vec![0.0; game.action_count(player)];
    for (idx, actions) in ProfileIter::new(game.action_counts.clone()).enumerate() {
        let mut w = 1.0;
        let mut slot = 0;
        for (j, &a) in actions.iter().enumerate() {
            if j != player {
                w *= opponent_marginals[slot][a];
                slot += 1;
            }
        }
        utils[actions[player]] += w * game.payoff_by_index(player, idx);
    }
    Ok(utils)
}

/// Logit response with temperature `sigma`: softmax of `utils / sigma`,
/// computed with max subtraction so large payoffs do not overflow.
pub fn logit_choice(utils: &[f64], sigma: f64) -> Result<MixedStrategy, GameError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GameError::BadSigma(sigma));
    }
    let m = utils.iter().copied().fold(f64::MIN, f64::max);
    let weights: Vec<f64> = utils.iter().map(|&u| ((u - m) / sigma).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(MixedStrategy {
        probs: weights.into_iter().map(|w| w / z).collect(),
    })
}

/// Smooth best response of `player` to independent opponent marginals.
pub fn smooth_best_response(
    game: &Game,
    player: usize,
    opponent_marginals: &[Vec<f64>],
    sigma: f64,
) -> Result<MixedStrategy, GameError> {
    let utils = action_utilities(game, player, opponent_marginals)?;
    logit_choice(&utils, sigma)
}

/// Utility `player` anticipates from playing `own` while holding the given
/// opponent marginals: the marginal-utility vector dotted with `own`.
pub fn anticipated_utility(
    game: &Game,
    player: usize,
    own: &MixedStrategy,
    opponent_marginals: &[Vec<f64>],
) -> Result<f64, GameError> {
    if own.len() != game.action_count(player) {
        return Err(GameError::StrategyLength {
            got: own.len(),
            expected: game.action_count(player),
        });
    }
    let utils = action_utilities(game, player, opponent_marginals)?;
    Ok(utils.iter().zip(own.probs()).map(|(u, p)| u * p).sum())
}

/// Largest gain any player can get by deviating from `profile`. Pure
/// deviations suffice: expected utility is linear in one player's own mix,
/// so the best deviation is attained at a vertex.
pub fn epsilon_ne_gap(game: &Game, profile: &[MixedStrategy]) -> Result<f64, GameError> {
    game.check_profile(profile)?;
    let mut worst: f64 = 0.0;
    for i in 0..game.num_players() {
        let marginals: Vec<Vec<f64>> = profile
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.probs().to_vec())
            .collect();
        let utils = action_utilities(game, i, &marginals)?;
        let current: f64 = utils.iter().zip(profile[i].probs()).map(|(u, p)| u * p).sum();
        let best = utils.iter().copied().fold(f64::MIN, f64::max);
        worst = worst.max(best - current);
    }
    Ok(worst)
}

/// A strictly increasing map applied to one player's utility scale.
///
/// `Table` interpolates linearly between sorted breakpoints and clamps
/// outside them; its breakpoints must be strictly increasing in both
/// coordinates and have strictly positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityTransform {
    Identity,
    Affine { scale: f64, shift: f64 },
    Table { points: Vec<(f64, f64)> },
}

impl UtilityTransform {
    /// Structural validation. Non-monotone configurations are rejected, and
    /// table values must be strictly positive.
    pub fn validate(&self) -> Result<(), GameError> {
        match self {
            UtilityTransform::Identity => Ok(()),
            UtilityTransform::Affine { scale, shift } => {
                if !scale.is_finite() || !shift.is_finite() {
                    return Err(GameError::BadTransform("non-finite coefficient".into()));
                }
                if *scale <= 0.0 {
                    return Err(GameError::BadTransform(format!(
                        "affine scale {scale} is not strictly positive"
                    )));
                }
                Ok(())
            }
            UtilityTransform::Table { points } => {
                if points.len() < 2 {
                    return Err(GameError::BadTransform(
                        "table needs at least two breakpoints".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                        return Err(GameError::BadTransform(format!(
                            "table breakpoints not strictly increasing at x = {}",
                            w[1].0
                        )));
                    }
                }
                if points.iter().any(|&(_, y)| !(y > 0.0)) {
                    return Err(GameError::BadTransform(
                        "table values must be strictly positive".into(),
                    ));
                }
                if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
                    return Err(GameError::BadTransform("non-finite breakpoint".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            UtilityTransform::Identity => u,
            UtilityTransform::Affine { scale, shift } => scale * u + shift,
            UtilityTransform::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if u <= first.0 {
                    return first.1;
                }
                if u >= last.0 {
                    return last.1;
                }
                for w in points.windows(2) {
                    if u <= w[1].0 {
                        let t = (u - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + t * (w[1].1 - w[0].1);
                    }
                }
                last.1
            }
        }
    }

    /// Smallest value the transform takes on `[lo, hi]`; transforms are
    /// increasing, so this is the value at `lo`.
    pub fn min_on(&self, lo: f64, _hi: f64) -> f64 {
        self.eval(lo)
    }
}

/// Exploration cost ceiling: one more than the total transformed utility
/// when every player is at their individual payoff maximum. Any sum of
/// transformed utilities realized in play stays strictly below it.
pub fn exploration_ceiling(game: &Game, transforms: &[UtilityTransform]) -> Result<f64, GameError> {
    if transforms.len() != game.num_players() {
        return Err(GameError::StrategyLength {
            got: transforms.len(),
            expected: game.num_players(),
        });
    }
    let mut total = 0.0;
    for (i, f) in transforms.iter().enumerate() {
        total += f.eval(game.max_payoff(i));
    }
    Ok(total + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn stag_hunt() -> Game {
        Game::two_player(
            vec![vec![4.0, 0.0], vec![3.0, 3.0]],
            vec![vec![4.0, 3.0], vec![0.0, 3.0]],
        )
        .unwrap()
    }

    fn battle_of_sexes() -> Game {
        Game::two_player(
            vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        )
        .unwrap()
    }

    /// Independent oracle: recursive evaluation over players instead of the
    /// flat profile iteration used by the implementation.
    fn expected_utility_recursive(
        game: &Game,
        player: usize,
        profile: &[MixedStrategy],
        depth: usize,
        actions: &mut Vec<usize>,
        weight: f64,
    ) -> f64 {
        if depth == game.num_players() {
            return weight * game.payoff(player, actions);
        }
        let mut total = 0.0;
        for a in 0..game.action_count(depth) {
            actions.push(a);
            total += expected_utility_recursive(
                game,
                player,
                profile,
                depth + 1,
                actions,
                weight * profile[depth].probs()[a],
            );
            actions.pop();
        }
        total
    }

    #[test]
    fn profile_index_roundtrip() {
        let game = Game::new(vec![2, 3, 2], vec![vec![0.0; 12]; 3]).unwrap();
        for idx in 0..game.num_profiles() {
            let actions = game.profile_from_index(idx);
            assert_eq!(game.profile_index(&actions), idx);
        }
        // Last player varies fastest.
        assert_eq!(game.profile_from_index(0), vec![0, 0, 0]);
        assert_eq!(game.profile_from_index(1), vec![0, 0, 1]);
        assert_eq!(game.profile_from_index(2), vec![0, 1, 0]);
    }

    #[test]
    fn stag_hunt_pure_and_mixed_values() {
        let game = stag_hunt();
        let both_stag = vec![MixedStrategy::pure(0, 2), MixedStrategy::pure(0, 2)];
        assert_abs_diff_eq!(expected_utility(&game, 0, &both_stag).unwrap(), 4.0);
        assert_abs_diff_eq!(expected_utility(&game, 1, &both_stag).unwrap(), 4.0);

        let mix = MixedStrategy::new(vec![0.75, 0.25]).unwrap();
        let profile = vec![mix.clone(), mix];
        assert_abs_diff_eq!(expected_utility(&game, 0, &profile).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_utility(&game, 1, &profile).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn expected_utility_matches_recursive_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let counts = vec![
                rng.gen_range(2..=3),
                rng.gen_range(2..=3),
                rng.gen_range(2..=3),
            ];
            let profiles: usize = counts.iter().product();
            let payoffs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..profiles).map(|_| rng.gen_range(-5.0..5.0)).collect())
                .collect();
            let game = Game::new(counts.clone(), payoffs).unwrap();
            let profile: Vec<MixedStrategy> = counts
                .iter()
                .map(|&k| {
                    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    MixedStrategy::new(raw.into_iter().map(|x| x / s).collect()).unwrap()
                })
                .collect();
            for i in 0..3 {
                let direct = expected_utility(&game, i, &profile).unwrap();
                let oracle =
                    expected_utility_recursive(&game, i, &profile, 0, &mut Vec::new(), 1.0);
                assert_abs_diff_eq!(direct, oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn action_utilities_against_pure_belief() {
        let game = stag_hunt();
        // Row player sure the opponent hunts stag.
        let utils = action_utilities(&game, 0, &[vec![1.0, 0.0]]).unwrap();
        assert_eq!(utils, vec![4.0, 3.0]);
    }

    #[test]
    fn logit_matches_logistic_values() {
        let s = logit_choice(&[1.0, 0.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(s.probs()[0], e / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(s.probs()[1], 1.0 / (1.0 + e), epsilon = 1e-12);
    }

    #[test]
    fn logit_is_shift_invariant_and_overflow_safe() {
        let a = logit_choice(&[1000.0, 998.0], 1.0).unwrap();
        let b = logit_choice(&[2.0, 0.0], 1.0).unwrap();
        assert!(a.probs().iter().all(|p| p.is_finite()));
        assert_abs_diff_eq!(a.probs()[0], b.probs()[0], epsilon = 1e-12);
    }

    #[test]
    fn logit_rejects_bad_sigma() {
        assert!(logit_choice(&[1.0, 0.0], 0.0).is_err());
        assert!(logit_choice(&[1.0, 0.0], -1.0).is_err());
        assert!(logit_choice(&[1.0, 0.0], f64::NAN).is_err());
    }

    #[test]
    fn stag_hunt_miscoordination_gap() {
        let game = stag_hunt();
        // Row hunts stag, column hunts hare: row would gain 3 by switching,
        // column would gain 1.
        let profile = vec![MixedStrategy::pure(0, 2), MixedStrategy::pure(1, 2)];
        assert_abs_diff_eq!(epsilon_ne_gap(&game, &profile).unwrap(), 3.0);
    }

    #[test]
    fn battle_of_sexes_mixed_equilibrium_gap_is_zero() {
        let game = battle_of_sexes();
        let profile = vec![
            MixedStrategy::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
            MixedStrategy::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap(),
        ];
        assert!(epsilon_ne_gap(&game, &profile).unwrap() <= 1e-12);
    }

    #[test]
    fn transform_values() {
        let affine = UtilityTransform::Affine {
            scale: 1.0,
            shift: -0.1,
        };
        affine.validate().unwrap();
        assert_abs_diff_eq!(affine.eval(2.0), 1.9, epsilon = 1e-12);

        let table = UtilityTransform::Table {
            points: vec![(0.0, 0.5), (4.0, 4.5)],
        };
        table.validate().unwrap();
        assert_abs_diff_eq!(table.eval(2.0), 2.5, epsilon = 1e-12);
        // Clamped outside the breakpoints.
        assert_abs_diff_eq!(table.eval(-1.0), 0.5);
        assert_abs_diff_eq!(table.eval(9.0), 4.5);
    }

    #[test]
    fn transform_rejects_bad_configurations() {
        assert!(UtilityTransform::Affine {
            scale: 0.0,
            shift: 1.0
        }
        .validate()
        .is_err());
        assert!(UtilityTransform::Table {
            points: vec![(0.0, 1.0), (1.0, 0.5)]
        }
        .validate()
        .is_err());
        assert!(UtilityTransform::Table {
            points: vec![(0.0, -0.5), (1.0, 0.5)]
        }
        .validate()
        .is_err());
        assert!(UtilityTransform::Table {
            points: vec![(0.0, 0.5)]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn exploration_ceiling_values() {
        let game = stag_hunt();
        let identity = vec![UtilityTransform::Identity, UtilityTransform::Identity];
        assert_abs_diff_eq!(exploration_ceiling(&game, &identity).unwrap(), 9.0);

        let bos = battle_of_sexes();
        let mixed = vec![
            UtilityTransform::Identity,
            UtilityTransform::Affine {
                scale: 1.0,
                shift: -0.1,
            },
        ];
        assert_abs_diff_eq!(exploration_ceiling(&bos, &mixed).unwrap(), 4.9, epsilon = 1e-12);
    }

    #[test]
    fn gap_is_nonnegative_on_random_profiles() {
        let mut rng = StdRng::seed_from_u64(11);
        let game = stag_hunt();
        for _ in 0..200 {
            let draw = |rng: &mut StdRng| {
                let p: f64 = rng.gen_range(0.0..1.0);
                MixedStrategy::new(vec![p, 1.0 - p]).unwrap()
            };
            let profile = vec![draw(&mut rng), draw(&mut rng)];
            assert!(epsilon_ne_gap(&game, &profile).unwrap() >= 0.0);
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let game = stag_hunt();
        assert!(expected_utility(&game, 2, &[]).is_err());
        let short = vec![MixedStrategy::pure(0, 2)];
        assert!(expected_utility(&game, 0, &short).is_err());
        assert!(action_utilities(&game, 0, &[vec![1.0, 0.0], vec![1.0, 0.0]]).is_err());
        assert!(action_utilities(&game, 0, &[vec![0.5, 0.25, 0.25]]).is_err());
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![-0.1, 1.1]).is_err());
    }
}
