//! Discretized belief simplices, belief profiles, and the finite state
//! space of the learning process.
//!
//! Each player's belief about opponent `j` lives on the grid of integer
//! count vectors over `|A_j|` categories summing to the resolution `M`.
//! A player's belief set is the product of those grids over their
//! opponents; a system state is one belief per player. Grid points, belief
//! indices, and state indices are all enumerated in deterministic
//! lexicographic order, and a state's strategy profile is the cached smooth
//! best response to its beliefs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    anticipated_utility, smooth_best_response, Game, GameError, MixedStrategy, ProfileIter,
    SIMPLEX_SUM_TOL,
};

/// Default ceiling on enumerated grid points, belief sets, and states.
/// Binaries may override it via the `EHT_STATE_CAP` environment variable.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum BeliefError {
    #[error("simplex needs at least one category")]
    EmptyDimension,
    #[error("resolution must be at least 1")]
    ZeroResolution,
    #[error("enumeration would produce {required} points, cap is {cap}")]
    CapacityExceeded { required: u128, cap: usize },
    #[error("target vector has length {got}, expected {expected}")]
    TargetLength { got: usize, expected: usize },
    #[error("target is not a probability vector: {0}")]
    TargetNotSimplex(String),
    #[error("belief index {index} out of range for player {player} ({count} beliefs)")]
    BeliefIndex {
        player: usize,
        index: usize,
        count: usize,
    },
    #[error("state index {index} out of range ({count} states)")]
    StateIndex { index: usize, count: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Number of integer count vectors of length `dimension` summing to
/// `resolution`: C(resolution + dimension - 1, dimension - 1). `None`
/// signals overflow past `u128`.
pub fn simplex_point_count(dimension: usize, resolution: usize) -> Option<u128> {
    let n = (resolution as u128).checked_add(dimension as u128 - 1)?;
    let k = (dimension - 1) as u128;
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for j in 0..k {
        result = result.checked_mul(n - j)?;
        result /= j + 1;
    }
    Some(result)
}

/// The grid of count vectors over one opponent's actions.
#[derive(Debug, Clone)]
pub struct DiscretizedSimplex {
    dimension: usize,
    resolution: usize,
    points: Vec<Vec<u32>>,
    fractions: Vec<Vec<f64>>,
    index_of: HashMap<Vec<u32>, usize>,
}

impl DiscretizedSimplex {
    /// Enumerates all grid points in ascending lexicographic order.
    pub fn enumerate(dimension: usize, resolution: usize, cap: usize) -> Result<Self, BeliefError> {
        if dimension == 0 {
            return Err(BeliefError::EmptyDimension);
        }
        if resolution == 0 {
            return Err(BeliefError::ZeroResolution);
        }
        let required =
            simplex_point_count(dimension, resolution).unwrap_or(u128::MAX);
        if required > cap as u128 {
            return Err(BeliefError::CapacityExceeded { required, cap });
        }
        let mut points = Vec::with_capacity(required as usize);
        let mut current = vec![0u32; dimension];
        fill_compositions(dimension, resolution as u32, 0, &mut current, &mut points);
        let fractions = points
            .iter()
            .map(|p| {
                p.iter()
                    .map(|&c| c as f64 / resolution as f64)
                    .collect::<Vec<f64>>()
            })
            .collect();
        let index_of = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Ok(Self {
            dimension,
            resolution,
            points,
            fractions,
            index_of,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn counts(&self, index: usize) -> &[u32] {
        &self.points[index]
    }

    pub fn fractions(&self, index: usize) -> &[f64] {
        &self.fractions[index]
    }

    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        self.index_of.get(counts).copied()
    }

    /// Index of the grid point closest in squared distance to `target`.
    pub fn nearest(&self, target: &[f64]) -> Result<usize, BeliefError> {
        let counts = nearest_grid_point(target, self.dimension, self.resolution)?;
        Ok(self.index_of[&counts])
    }
}

fn fill_compositions(
    dimension: usize,
    remaining: u32,
    pos: usize,
    current: &mut Vec<u32>,
    out: &mut Vec<Vec<u32>>,
) {
    if pos == dimension - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for c in 0..=remaining {
        current[pos] = c;
        fill_compositions(dimension, remaining - c, pos + 1, current, out);
    }
}

/// Grid point on the resolution-`m` simplex minimizing squared distance to
/// `target`, computed by flooring and distributing the remainder to the
/// largest fractional parts. Distance ties resolve to the lexicographically
/// smallest count vector. Runs without enumerating the grid.
pub fn nearest_grid_point(
    target: &[f64],
    dimension: usize,
    m: usize,
) -> Result<Vec<u32>, BeliefError> {
    if target.len() != dimension {
        return Err(BeliefError::TargetLength {
            got: target.len(),
            expected: dimension,
        });
    }
    if m == 0 {
        return Err(BeliefError::ZeroResolution);
    }
    let sum: f64 = target.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || target.iter().any(|&x| !x.is_finite() || x < -SIMPLEX_SUM_TOL) {
        return Err(BeliefError::TargetNotSimplex(format!("entries sum to {sum}")));
    }
    let scaled: Vec<f64> = target.iter().map(|&x| x.max(0.0) * m as f64).collect();
    let mut counts: Vec<i64> = scaled.iter().map(|&y| y.floor() as i64).collect();
    let fracs: Vec<f64> = scaled
        .iter()
        .zip(&counts)
        .map(|(&y, &c)| y - c as f64)
        .collect();
    let mut remainder = m as i64 - counts.iter().sum::<i64>();
    if remainder > 0 {
        // Bumping coordinate k changes the squared distance by (1 - 2 frac_k);
        // take the largest fractions, later indices first on ties so the
        // result is lexicographically smallest.
        let mut order: Vec<usize> = (0..dimension).collect();
        order.sort_by(|&a, &b| {
            fracs[b]
                .partial_cmp(&fracs[a])
                .unwrap()
                .then(b.cmp(&a))
        });
        for &k in order.iter().take(remainder as usize) {
            counts[k] += 1;
        }
    } else if remainder < 0 {
        // Float-edge case: floors overshoot when entries sit just above
        // integers. Remove from the smallest fractions, earlier indices
        // first, skipping zeros.
        let mut order: Vec<usize> = (0..dimension).collect();
        order.sort_by(|&a, &b| fracs[a].partial_cmp(&fracs[b]).unwrap().then(a.cmp(&b)));
        let mut i = 0;
        while remainder < 0 {
            let k = order[i % dimension];
            if counts[k] > 0 {
                counts[k] -= 1;
                remainder += 1;
            }
            i += 1;
        }
    }
    Ok(counts.into_iter().map(|c| c as u32).collect())
}

/// How the gap between one player's belief and the opponents' actual
/// mixed strategies is measured.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Distance between the induced product distributions over joint
    /// opponent profiles. Matches the geometry of the frequency test.
    JointProduct,
    /// Root sum of squared per-opponent marginal distances.
    ConcatenatedMarginals,
}

impl Default for DistanceMode {
    fn default() -> Self {
        DistanceMode::JointProduct
    }
}

/// Product distribution over the joint space of the given marginals,
/// enumerated in mixed-radix order (last marginal fastest).
pub fn product_distribution(marginals: &[&[f64]]) -> Vec<f64> {
    let counts: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for digits in ProfileIter::new(counts) {
        let mut w = 1.0;
        for (slot, &a) in digits.iter().enumerate() {
            w *= marginals[slot][a];
        }
        out.push(w);
    }
    out
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl DistanceMode {
    /// Distance between a belief (per-opponent marginals) and the opponents'
    /// actual strategies, both ordered by ascending opponent index.
    pub fn distance(&self, belief: &[&[f64]], strategies: &[&[f64]]) -> f64 {
        debug_assert_eq!(belief.len(), strategies.len());
        match self {
            DistanceMode::JointProduct => {
                let b = product_distribution(belief);
                let s = product_distribution(strategies);
                l2(&b, &s)
            }
            DistanceMode::ConcatenatedMarginals => belief
                .iter()
                .zip(strategies)
                .map(|(bm, sm)| {
                    bm.iter()
                        .zip(sm.iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Per-player belief grids with cached smooth best responses and
/// anticipated utilities.
#[derive(Debug)]
pub struct BeliefSets {
    m: usize,
    sigma: f64,
    /// `grids[j]`: the grid every other player uses for beliefs about `j`.
    grids: Vec<DiscretizedSimplex>,
    belief_counts: Vec<usize>,
    /// `strategies[i][b]`: smooth best response of `i` holding belief `b`.
    strategies: Vec<Vec<MixedStrategy>>,
    /// `anticipated[i][b]`: utility `i` expects at that response and belief.
    anticipated: Vec<Vec<f64>>,
}

impl BeliefSets {
    pub fn build(game: &Game, m: usize, sigma: f64, cap: usize) -> Result<Self, BeliefError> {
        let n = game.num_players();
        let mut grids = Vec::with_capacity(n);
        for j in 0..n {
            grids.push(DiscretizedSimplex::enumerate(game.action_count(j), m, cap)?);
        }
        let mut belief_counts = Vec::with_capacity(n);
        for i in 0..n {
            let mut count: u128 = 1;
            for (j, grid) in grids.iter().enumerate() {
                if j != i {
                    count = count.saturating_mul(grid.len() as u128);
                }
            }
            if count > cap as u128 {
                return Err(BeliefError::CapacityExceeded {
                    required: count,
                    cap,
                });
            }
            belief_counts.push(count as usize);
        }
        let mut strategies = Vec::with_capacity(n);
        let mut anticipated = Vec::with_capacity(n);
        for i in 0..n {
            let mut st = Vec::with_capacity(belief_counts[i]);
            let mut au = Vec::with_capacity(belief_counts[i]);
            for b in 0..belief_counts[i] {
                let marginals = belief_marginals_from(&grids, i, b);
                let response = smooth_best_response(game, i, &marginals, sigma)?;
                let utility = anticipated_utility(game, i, &response, &marginals)?;
                st.push(response);
                au.push(utility);
            }
            strategies.push(st);
            anticipated.push(au);
        }
        Ok(Self {
            m,
            sigma,
            grids,
            belief_counts,
            strategies,
            anticipated,
        })
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn num_players(&self) -> usize {
        self.grids.len()
    }

    pub fn grid(&self, player: usize) -> &DiscretizedSimplex {
        &self.grids[player]
    }

    /// Size of player `i`'s belief set.
    pub fn belief_count(&self, player: usize) -> usize {
        self.belief_counts[player]
    }

    /// Grid indices per opponent slot (ascending opponent order) for one
    /// belief index; last opponent varies fastest.
    pub fn decode_belief(&self, player: usize, mut index: usize) -> Vec<usize> {
        let slots: Vec<usize> = self.opponents(player).collect();
        let mut digits = vec![0; slots.len()];
        for (pos, &j) in slots.iter().enumerate().rev() {
            let base = self.grids[j].len();
            digits[pos] = index % base;
            index /= base;
        }
        digits
    }

    pub fn encode_belief(&self, player: usize, digits: &[usize]) -> usize {
        let mut index = 0;
        for (pos, j) in self.opponents(player).enumerate() {
            index = index * self.grids[j].len() + digits[pos];
        }
        index
    }

    pub fn opponents(&self, player: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_players()).filter(move |&j| j != player)
    }

    /// Per-opponent fraction vectors for one belief.
    pub fn belief_marginals(&self, player: usize, index: usize) -> Vec<Vec<f64>> {
        belief_marginals_from(&self.grids, player, index)
    }

    pub fn strategy(&self, player: usize, belief: usize) -> &MixedStrategy {
        &self.strategies[player][belief]
    }

    pub fn anticipated_utility(&self, player: usize, belief: usize) -> f64 {
        self.anticipated[player][belief]
    }
}

fn belief_marginals_from(
    grids: &[DiscretizedSimplex],
    player: usize,
    index: usize,
) -> Vec<Vec<f64>> {
    let slots: Vec<usize> = (0..grids.len()).filter(|&j| j != player).collect();
    let mut digits = vec![0; slots.len()];
    let mut rem = index;
    for (pos, &j) in slots.iter().enumerate().rev() {
        let base = grids[j].len();
        digits[pos] = rem % base;
        rem /= base;
    }
    slots
        .iter()
        .zip(&digits)
        .map(|(&j, &g)| grids[j].fractions(g).to_vec())
        .collect()
}

/// One system state: a belief index per player. Strategies are looked up
/// through the owning [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemState {
    pub index: usize,
    pub beliefs: Vec<usize>,
}

/// The full product state space with deterministic indexing.
#[derive(Debug)]
pub struct StateSpace {
    sets: BeliefSets,
    state_count: usize,
}

impl StateSpace {
    pub fn build(game: &Game, m: usize, sigma: f64, cap: usize) -> Result<Self, BeliefError> {
        let sets = BeliefSets::build(game, m, sigma, cap)?;
        let mut count: u128 = 1;
        for i in 0..sets.num_players() {
            count = count.saturating_mul(sets.belief_count(i) as u128);
        }
        if count > cap as u128 {
            return Err(BeliefError::CapacityExceeded {
                required: count,
                cap,
            });
        }
        Ok(Self {
            sets,
            state_count: count as usize,
        })
    }

    pub fn sets(&self) -> &BeliefSets {
        &self.sets
    }

    pub fn num_players(&self) -> usize {
        self.sets.num_players()
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// Belief index per player; last player varies fastest.
    pub fn decode_state(&self, mut index: usize) -> Vec<usize> {
        let n = self.num_players();
        let mut beliefs = vec![0; n];
        for i in (0..n).rev() {
            let base = self.sets.belief_count(i);
            beliefs[i] = index % base;
            index /= base;
        }
        beliefs
    }

    pub fn encode_state(&self, beliefs: &[usize]) -> usize {
        let mut index = 0;
        for (i, &b) in beliefs.iter().enumerate() {
            index = index * self.sets.belief_count(i) + b;
        }
        index
    }

    pub fn state(&self, index: usize) -> Result<SystemState, BeliefError> {
        if index >= self.state_count {
            return Err(BeliefError::StateIndex {
                index,
                count: self.state_count,
            });
        }
        Ok(SystemState {
            index,
            beliefs: self.decode_state(index),
        })
    }

    /// Strategy actually played by each player at this state.
    pub fn strategy_profile(&self, beliefs: &[usize]) -> Vec<&MixedStrategy> {
        beliefs
            .iter()
            .enumerate()
            .map(|(i, &b)| self.sets.strategy(i, b))
            .collect()
    }

    /// Mixed strategies of everyone except `player`, ascending order.
    pub fn opponent_strategies(&self, player: usize, beliefs: &[usize]) -> Vec<&[f64]> {
        self.sets
            .opponents(player)
            .map(|j| self.sets.strategy(j, beliefs[j]).probs())
            .collect()
    }

    /// Gap between `player`'s belief and what the opponents actually play.
    pub fn belief_gap(&self, player: usize, beliefs: &[usize], mode: DistanceMode) -> f64 {
        let marginals = self.sets.belief_marginals(player, beliefs[player]);
        let refs: Vec<&[f64]> = marginals.iter().map(Vec::as_slice).collect();
        let strategies = self.opponent_strategies(player, beliefs);
        mode.distance(&refs, &strategies)
    }

    /// Which players' beliefs sit within `tau` of the opponents' play.
    pub fn consistent_players(
        &self,
        beliefs: &[usize],
        tau: f64,
        mode: DistanceMode,
    ) -> Vec<bool> {
        (0..self.num_players())
            .map(|i| self.belief_gap(i, beliefs, mode) <= tau)
            .collect()
    }

    pub fn is_consistent(&self, beliefs: &[usize], tau: f64, mode: DistanceMode) -> bool {
        self.consistent_players(beliefs, tau, mode)
            .iter()
            .all(|&c| c)
    }
}

/// Distinct smooth best responses of `player` across their whole belief
/// set, deduplicated within `tol` in the maximum norm.
pub fn br_image(sets: &BeliefSets, player: usize, tol: f64) -> Vec<MixedStrategy> {
    let mut image: Vec<MixedStrategy> = Vec::new();
    for b in 0..sets.belief_count(player) {
        let s = sets.strategy(player, b);
        let duplicate = image.iter().any(|t| {
            t.probs()
                .iter()
                .zip(s.probs())
                .all(|(a, b)| (a - b).abs() <= tol)
        });
        if !duplicate {
            image.push(s.clone());
        }
    }
    image
}
