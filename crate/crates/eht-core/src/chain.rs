//! The belief-revision process as a finite Markov chain, analyzed exactly.
//!
//! The idealized chain replaces the finite-sample frequency test with its
//! limit behavior: a consistent player's test rejects with the bare
//! significance `xi^ceiling`, an inconsistent player's test rejects with
//! the complementary probability. Players move independently, so each
//! transition probability is a product of per-player kernels. As `xi`
//! approaches zero the chain freezes into the unperturbed process whose
//! absorbing states are exactly the consistent ones.
//!
//! Long-run selection is computed two independent ways: a closed form that
//! subtracts each consistent state's exit resistance from the total, and a
//! direct minimization over spanning in-trees of the resistance graph. The
//! two must agree; a mismatch means the structural conditions behind the
//! closed form fail for the given game and is reported as an error rather
//! than silently picking one route.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{BeliefError, DistanceMode, StateSpace};
use crate::dynamics::{DynamicsError, RunConfig};
use crate::game::{expected_utility, Game, GameError, MixedStrategy, UtilityTransform};
use crate::trees::{
    min_in_tree_weight_bruteforce, min_in_tree_weight_edmonds, shortest_path_costs,
    BRUTE_FORCE_MAX,
};

/// Largest state count solved by dense LU factorization; bigger chains use
/// power iteration.
pub const DENSE_SOLVER_MAX: usize = 2000;

/// Required accuracy of a stationary distribution, measured as the maximum
/// absolute entry of `mu P - mu`.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Tolerance for row sums of a transition matrix.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Tolerance for value and potential ties.
pub const VALUE_TIE_TOL: f64 = 1e-9;

const POWER_ITERATION_CAP: usize = 500_000;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("row {row} of the transition matrix sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("transition matrix entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("matrix of {got} entries does not fit {n} states")]
    MatrixShape { n: usize, got: usize },
    #[error(
        "the unperturbed chain can have several absorbing states, so its \
         stationary distribution is not computed"
    )]
    UnperturbedStationary,
    #[error("stationary solve left residual {residual}, above {STATIONARY_RESIDUAL_TOL}")]
    StationaryResidual { residual: f64 },
    #[error("linear system for the stationary distribution is singular")]
    SingularSystem,
    #[error("stationary solve produced entry {value} at state {index}")]
    NotADistribution { index: usize, value: f64 },
    #[error("perturbation level must lie strictly between 0 and 1, got {value}")]
    BadPerturbation { value: f64 },
    #[error("no state is consistent at this tolerance")]
    NoConsistentStates,
    #[error(
        "transformed anticipated utility {value} for player {player} at belief \
         {belief} is not positive; resistances require positive transformed utilities"
    )]
    NonpositiveValue {
        player: usize,
        belief: usize,
        value: f64,
    },
    #[error(
        "potential routes disagree at state {state}: closed form {closed}, \
         tree minimization {tree}; the game violates the structural conditions \
         behind the closed form"
    )]
    PotentialMismatch { state: usize, closed: f64, tree: f64 },
    #[error("minimum-potential and maximum-value selections disagree")]
    SelectionMismatch,
    #[error("resistance graph has no spanning in-tree rooted at node {root}")]
    NoSpanningTree { root: usize },
    #[error("perturbation grid needs at least two distinct levels in (0, 1)")]
    BadSlopeGrid,
    #[error(
        "resistance {resistance} of pair ({from}, {to}) is not below the \
         ceiling {ceiling}, so its slope is not governed by the resistance"
    )]
    SlopePairAboveCeiling {
        from: usize,
        to: usize,
        resistance: f64,
        ceiling: f64,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Which rejection behavior a transition matrix encodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ErrorModel {
    /// Zero-perturbation limit: consistent players never move.
    Unperturbed,
    /// Idealized test errors at perturbation level `xi`.
    Idealized { xi: f64 },
}

/// Dense row-stochastic transition matrix over system states.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    n: usize,
    rows: Vec<f64>,
    error_model: ErrorModel,
}

impl TransitionModel {
    /// Wraps a row-major matrix after checking shape, nonnegativity, and
    /// row sums.
    pub fn new(n: usize, rows: Vec<f64>, error_model: ErrorModel) -> Result<Self, ChainError> {
        if rows.len() != n * n {
            return Err(ChainError::MatrixShape { n, got: rows.len() });
        }
        for row in 0..n {
            let mut sum = 0.0;
            for col in 0..n {
                let v = rows[row * n + col];
                if v < 0.0 {
                    return Err(ChainError::NegativeEntry {
                        row,
                        col,
                        value: v,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ChainError::RowSum { row, sum });
            }
        }
        Ok(Self {
            n,
            rows,
            error_model,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn error_model(&self) -> ErrorModel {
        self.error_model
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        self.rows[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from * self.n..(from + 1) * self.n]
    }

    /// Row vector times matrix.
    pub fn multiply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (j, &p) in self.row(i).iter().enumerate() {
                out[j] += m * p;
            }
        }
        out
    }
}

/// Maximum absolute entry of `mu P - mu`.
pub fn stationary_residual(model: &TransitionModel, mu: &[f64]) -> f64 {
    model
        .multiply_left(mu)
        .iter()
        .zip(mu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Per-player kernel data shared by every transition computation.
struct KernelContext<'a> {
    space: &'a StateSpace,
    cfg: &'a RunConfig,
    xi: Option<f64>,
    /// Resampling probability per player per target belief.
    psi: Vec<Vec<f64>>,
    /// Transformed anticipated utility per player per own belief; only
    /// validated and used when perturbed.
    exponents: Vec<Vec<f64>>,
}

impl<'a> KernelContext<'a> {
    fn new(
        game: &Game,
        space: &'a StateSpace,
        cfg: &'a RunConfig,
        xi: Option<f64>,
    ) -> Result<Self, ChainError> {
        cfg.validate(game, space)?;
        if let Some(x) = xi {
            if !(x > 0.0 && x < 1.0) {
                return Err(ChainError::BadPerturbation { value: x });
            }
            if x.powf(cfg.ceiling) <= 0.0 {
                return Err(ChainError::Dynamics(DynamicsError::SignificanceUnderflow {
                    xi: x,
                    ceiling: cfg.ceiling,
                }));
            }
        }
        let sets = space.sets();
        let n = space.num_players();
        let psi: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..sets.belief_count(i))
                    .map(|b| cfg.resamplers[i].prob(sets, i, b))
                    .collect()
            })
            .collect();
        let mut exponents = vec![Vec::new(); n];
        if xi.is_some() {
            for (i, exps) in exponents.iter_mut().enumerate() {
                *exps = (0..sets.belief_count(i))
                    .map(|b| cfg.transforms[i].eval(sets.anticipated_utility(i, b)))
                    .collect();
                for (b, &e) in exps.iter().enumerate() {
                    if e <= 0.0 {
                        return Err(ChainError::NonpositiveValue {
                            player: i,
                            belief: b,
                            value: e,
                        });
                    }
                }
            }
        }
        Ok(Self {
            space,
            cfg,
            xi,
            psi,
            exponents,
        })
    }

    /// Probability that `player` draws a fresh belief this epoch, given the
    /// consistency of their current one.
    fn move_probability(&self, player: usize, belief: usize, consistent: bool) -> f64 {
        let tested = match self.xi {
            // Zero-perturbation limit: rejection is deterministic and
            // exploration never happens.
            None => {
                if consistent {
                    0.0
                } else {
                    1.0
                }
            }
            Some(x) => {
                let reject = if consistent {
                    x.powf(self.cfg.ceiling)
                } else {
                    1.0 - x.powf(self.cfg.ceiling)
                };
                let explore = x.powf(self.exponents[player][belief]);
                reject + (1.0 - reject) * explore
            }
        };
        self.cfg.gammas[player] * tested
    }

    /// Kernel over `player`'s next belief indices.
    fn player_kernel(&self, player: usize, belief: usize, consistent: bool) -> Vec<f64> {
        let mv = self.move_probability(player, belief, consistent);
        let psi = &self.psi[player];
        let mut kernel: Vec<f64> = psi.iter().map(|&p| mv * p).collect();
        kernel[belief] += 1.0 - mv;
        kernel
    }

    fn state_kernels(&self, beliefs: &[usize]) -> Vec<Vec<f64>> {
        let flags = self
            .space
            .consistent_players(beliefs, self.cfg.tau, self.cfg.distance_mode);
        beliefs
            .iter()
            .enumerate()
            .map(|(i, &b)| self.player_kernel(i, b, flags[i]))
            .collect()
    }
}

fn build_matrix(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    xi: Option<f64>,
) -> Result<TransitionModel, ChainError> {
    let ctx = KernelContext::new(game, space, cfg, xi)?;
    let n = space.state_count();
    let decoded: Vec<Vec<usize>> = (0..n).map(|z| space.decode_state(z)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|z| {
            let kernels = ctx.state_kernels(&decoded[z]);
            let mut row = vec![0.0; n];
            for (z2, target) in decoded.iter().enumerate() {
                let mut p = 1.0;
                for (i, &b2) in target.iter().enumerate() {
                    p *= kernels[i][b2];
                }
                row[z2] = p;
            }
            row
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let error_model = match xi {
        None => ErrorModel::Unperturbed,
        Some(x) => ErrorModel::Idealized { xi: x },
    };
    TransitionModel::new(n, flat, error_model)
}

/// Zero-perturbation transition matrix: consistent players keep their
/// beliefs, inconsistent testers always reject.
pub fn unperturbed_matrix(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
) -> Result<TransitionModel, ChainError> {
    build_matrix(game, space, cfg, None)
}

/// Idealized perturbed transition matrix at level `xi`.
pub fn idealized_transition_matrix(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    xi: f64,
) -> Result<TransitionModel, ChainError> {
    build_matrix(game, space, cfg, Some(xi))
}

/// One transition probability of the idealized chain, without building the
/// whole matrix.
pub fn transition_entry(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    xi: f64,
    from: usize,
    to: usize,
) -> Result<f64, ChainError> {
    let ctx = KernelContext::new(game, space, cfg, Some(xi))?;
    let from_beliefs = space.state(from)?.beliefs;
    let to_beliefs = space.state(to)?.beliefs;
    let kernels = ctx.state_kernels(&from_beliefs);
    Ok(to_beliefs
        .iter()
        .enumerate()
        .map(|(i, &b)| kernels[i][b])
        .product())
}

/// Unique stationary distribution of a perturbed chain. Dense LU up to
/// [`DENSE_SOLVER_MAX`] states, power iteration beyond; either way the
/// result must satisfy the residual tolerance.
pub fn stationary_distribution(model: &TransitionModel) -> Result<Vec<f64>, ChainError> {
    if model.error_model() == ErrorModel::Unperturbed {
        return Err(ChainError::UnperturbedStationary);
    }
    let mu = if model.len() <= DENSE_SOLVER_MAX {
        dense_stationary(model)?
    } else {
        power_stationary(model)
    };
    let residual = stationary_residual(model, &mu);
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(ChainError::StationaryResidual { residual });
    }
    Ok(mu)
}

/// Solves `mu (P - I) = 0` with the last equation replaced by the
/// normalization constraint.
fn dense_stationary(model: &TransitionModel) -> Result<Vec<f64>, ChainError> {
    let n = model.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = model.entry(i, j);
        }
    }
    for d in 0..n {
        a[(d, d)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(ChainError::SingularSystem)?;
    let mut mu = Vec::with_capacity(n);
    for (index, &v) in x.iter().enumerate() {
        if v < -1e-9 {
            return Err(ChainError::NotADistribution { index, value: v });
        }
        mu.push(v.max(0.0));
    }
    let sum: f64 = mu.iter().sum();
    for v in &mut mu {
        *v /= sum;
    }
    Ok(mu)
}

fn power_stationary(model: &TransitionModel) -> Vec<f64> {
    let n = model.len();
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITERATION_CAP {
        let next = model.multiply_left(&mu);
        let delta = next
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        mu = next;
        let sum: f64 = mu.iter().sum();
        for v in &mut mu {
            *v /= sum;
        }
        if delta < STATIONARY_RESIDUAL_TOL / 10.0 {
            break;
        }
    }
    mu
}

/// Total stationary mass on a set of states.
pub fn subset_mass(mu: &[f64], states: &[usize]) -> f64 {
    states.iter().map(|&z| mu[z]).sum()
}

/// Recurrent classes: strongly connected components of the support graph
/// with no edge leaving them. Classes and their members are sorted.
pub fn recurrent_classes(model: &TransitionModel) -> Vec<Vec<usize>> {
    let n = model.len();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            model
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &p)| p > 0.0 && j != i)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let component = strongly_connected_components(&adjacency);
    let count = component.iter().copied().max().map_or(0, |c| c + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (v, &c) in component.iter().enumerate() {
        members[c].push(v);
    }
    let mut closed = vec![true; count];
    for (v, targets) in adjacency.iter().enumerate() {
        for &w in targets {
            if component[w] != component[v] {
                closed[component[v]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = members
        .into_iter()
        .zip(&closed)
        .filter(|&(_, &c)| c)
        .map(|(mut m, _)| {
            m.sort_unstable();
            m
        })
        .collect();
    classes.sort();
    classes
}

/// Kosaraju's algorithm with iterative traversals; returns a component id
/// per vertex.
fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Stack holds (vertex, next edge position) frames.
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            if *pos < adjacency[v].len() {
                let w = adjacency[v][*pos];
                *pos += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, targets) in adjacency.iter().enumerate() {
        for &w in targets {
            reverse[w].push(v);
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut current = 0;
    for &start in order.iter().rev() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = current;
        while let Some(v) = stack.pop() {
            for &w in &reverse[v] {
                if component[w] == usize::MAX {
                    component[w] = current;
                    stack.push(w);
                }
            }
        }
        current += 1;
    }
    component
}

/// States where every player's belief is within `tau` of actual play.
pub fn consistent_states(space: &StateSpace, tau: f64, mode: DistanceMode) -> Vec<usize> {
    let mut states: Vec<usize> = (0..space.state_count())
        .into_par_iter()
        .filter(|&z| space.is_consistent(&space.decode_state(z), tau, mode))
        .collect();
    states.sort_unstable();
    states
}

/// One consistent state in the resistance graph.
#[derive(Debug, Clone, Serialize)]
pub struct ResistanceNode {
    pub state: usize,
    /// Anticipated utility per player.
    pub utilities: Vec<f64>,
    /// Transformed anticipated utility per player.
    pub transformed: Vec<f64>,
    /// Exit resistance: the smallest transformed anticipated utility.
    pub value: f64,
    /// Same minimum computed on realized expected utilities, kept as a
    /// diagnostic for how far anticipation and play diverge.
    pub realized_value: f64,
}

/// Consistent states with pairwise minimum path resistances through the
/// full state space.
#[derive(Debug, Clone, Serialize)]
pub struct ResistanceGraph {
    pub nodes: Vec<ResistanceNode>,
    /// `rhat[a][b]` is the cheapest total resistance of any path from
    /// `nodes[a]` to `nodes[b]`.
    pub rhat: Vec<Vec<f64>>,
}

impl ResistanceGraph {
    pub fn node_values(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.value).collect()
    }

    pub fn states(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.state).collect()
    }
}

/// Resistance of the direct transition between two states: the sum of
/// transformed anticipated utilities of players who are consistent at the
/// source and change their belief.
pub fn edge_resistance(
    space: &StateSpace,
    cfg: &RunConfig,
    from: usize,
    to: usize,
) -> Result<f64, ChainError> {
    let from_beliefs = space.state(from)?.beliefs;
    let to_beliefs = space.state(to)?.beliefs;
    let flags = space.consistent_players(&from_beliefs, cfg.tau, cfg.distance_mode);
    let sets = space.sets();
    let mut total = 0.0;
    for i in 0..space.num_players() {
        if flags[i] && from_beliefs[i] != to_beliefs[i] {
            let value = cfg.transforms[i].eval(sets.anticipated_utility(i, from_beliefs[i]));
            if value <= 0.0 {
                return Err(ChainError::NonpositiveValue {
                    player: i,
                    belief: from_beliefs[i],
                    value,
                });
            }
            total += value;
        }
    }
    Ok(total)
}

/// Builds the resistance graph over consistent states, with minimum path
/// resistances computed by shortest paths over the full state space.
pub fn build_resistance_graph(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
) -> Result<ResistanceGraph, ChainError> {
    cfg.validate(game, space)?;
    let node_states = consistent_states(space, cfg.tau, cfg.distance_mode);
    if node_states.is_empty() {
        return Err(ChainError::NoConsistentStates);
    }
    let sets = space.sets();
    let players = space.num_players();
    let n = space.state_count();
    let decoded: Vec<Vec<usize>> = (0..n).map(|z| space.decode_state(z)).collect();
    let flags: Vec<Vec<bool>> = decoded
        .par_iter()
        .map(|b| space.consistent_players(b, cfg.tau, cfg.distance_mode))
        .collect();

    // Transformed anticipated utility per player per own belief.
    let transformed: Vec<Vec<f64>> = (0..players)
        .map(|i| {
            (0..sets.belief_count(i))
                .map(|b| cfg.transforms[i].eval(sets.anticipated_utility(i, b)))
                .collect()
        })
        .collect();
    // Any belief that is ever consistency-flagged can contribute to a
    // resistance, so it must carry a positive transformed utility.
    for (z, f) in flags.iter().enumerate() {
        for i in 0..players {
            if f[i] {
                let b = decoded[z][i];
                if transformed[i][b] <= 0.0 {
                    return Err(ChainError::NonpositiveValue {
                        player: i,
                        belief: b,
                        value: transformed[i][b],
                    });
                }
            }
        }
    }

    let cost = |u: usize, v: usize| -> f64 {
        let mut total = 0.0;
        for i in 0..players {
            if flags[u][i] && decoded[u][i] != decoded[v][i] {
                total += transformed[i][decoded[u][i]];
            }
        }
        total
    };
    let rhat: Vec<Vec<f64>> = node_states
        .par_iter()
        .map(|&source| {
            let dist = shortest_path_costs(n, source, cost);
            node_states.iter().map(|&t| dist[t]).collect()
        })
        .collect();

    let mut nodes = Vec::with_capacity(node_states.len());
    for &state in &node_states {
        let beliefs = &decoded[state];
        let utilities: Vec<f64> = (0..players)
            .map(|i| sets.anticipated_utility(i, beliefs[i]))
            .collect();
        let node_transformed: Vec<f64> =
            (0..players).map(|i| transformed[i][beliefs[i]]).collect();
        let value = node_transformed
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let profile: Vec<MixedStrategy> = space
            .strategy_profile(beliefs)
            .into_iter()
            .cloned()
            .collect();
        let realized_value = (0..players)
            .map(|i| {
                let u = expected_utility(game, i, &profile)?;
                Ok(cfg.transforms[i].eval(u))
            })
            .collect::<Result<Vec<f64>, GameError>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        nodes.push(ResistanceNode {
            state,
            utilities,
            transformed: node_transformed,
            value,
            realized_value,
        });
    }
    Ok(ResistanceGraph { nodes, rhat })
}

/// Closed-form potentials: total node value minus each node's own value.
/// Valid when every node's cheapest escape costs exactly its value.
pub fn stochastic_potential_closed_form(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    values.iter().map(|v| total - v).collect()
}

/// Potentials by direct minimization over spanning in-trees of the
/// resistance graph: exhaustive enumeration up to [`BRUTE_FORCE_MAX`]
/// nodes, cycle contraction beyond.
pub fn stochastic_potential_trees(rhat: &[Vec<f64>]) -> Result<Vec<f64>, ChainError> {
    let k = rhat.len();
    if k == 1 {
        return Ok(vec![0.0]);
    }
    (0..k)
        .map(|root| {
            let weight = if k <= BRUTE_FORCE_MAX {
                min_in_tree_weight_bruteforce(rhat, root)
            } else {
                min_in_tree_weight_edmonds(rhat, root)
            };
            weight.ok_or(ChainError::NoSpanningTree { root })
        })
        .collect()
}

/// Potentials by both routes plus the selected node positions, checked for
/// agreement.
pub fn cross_checked_potentials(
    values: &[f64],
    rhat: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>), ChainError> {
    let closed = stochastic_potential_closed_form(values);
    let tree = stochastic_potential_trees(rhat)?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = VALUE_TIE_TOL * scale;
    for (k, (&c, &t)) in closed.iter().zip(&tree).enumerate() {
        if (c - t).abs() > tol {
            return Err(ChainError::PotentialMismatch {
                state: k,
                closed: c,
                tree: t,
            });
        }
    }
    let min_potential = closed.iter().cloned().fold(f64::INFINITY, f64::min);
    let stable: Vec<usize> = (0..closed.len())
        .filter(|&k| closed[k] <= min_potential + tol)
        .collect();
    let max_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let by_value: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] >= max_value - tol)
        .collect();
    if stable != by_value {
        return Err(ChainError::SelectionMismatch);
    }
    Ok((closed, tree, stable))
}

/// Full long-run selection analysis over the consistent states.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialAnalysis {
    pub graph: ResistanceGraph,
    /// Closed-form potentials, verified against the tree route.
    pub potentials: Vec<f64>,
    pub tree_potentials: Vec<f64>,
    /// Minimum-potential states, ascending state indices.
    pub stable: Vec<usize>,
}

pub fn analyze_potentials(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
) -> Result<PotentialAnalysis, ChainError> {
    let graph = build_resistance_graph(game, space, cfg)?;
    let values = graph.node_values();
    let (potentials, tree_potentials, positions) = cross_checked_potentials(&values, &graph.rhat)?;
    let stable = positions.iter().map(|&k| graph.nodes[k].state).collect();
    Ok(PotentialAnalysis {
        graph,
        potentials,
        tree_potentials,
        stable,
    })
}

/// Which structural case the utility transforms fall into, with the
/// selection each case predicts.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum SelectionPrediction {
    /// All players share one transform, so selection maximizes the worst
    /// anticipated utility.
    IdenticalTransforms { predicted: Vec<usize> },
    /// One player's transformed utilities lie below everyone else's over
    /// the observed ranges, so selection maximizes that player's utility.
    DominatedPlayer { player: usize, predicted: Vec<usize> },
    /// Neither special case applies; only the potentials order the nodes.
    General,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub prediction: SelectionPrediction,
    pub stable: Vec<usize>,
    /// Whether the stable set equals the predicted set; absent in the
    /// general case.
    pub matches: Option<bool>,
}

/// Compares the computed stable set against the special-case selection
/// rules evaluated on observed node utilities.
pub fn corollary_selection(
    analysis: &PotentialAnalysis,
    transforms: &[UtilityTransform],
) -> SelectionReport {
    let nodes = &analysis.graph.nodes;
    let scale = nodes
        .iter()
        .flat_map(|n| n.transformed.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = VALUE_TIE_TOL * scale;

    let lo = nodes
        .iter()
        .flat_map(|n| n.utilities.iter().cloned())
        .fold(f64::INFINITY, f64::min);
    let hi = nodes
        .iter()
        .flat_map(|n| n.utilities.iter().cloned())
        .fold(f64::NEG_INFINITY, f64::max);
    let identical = transforms.windows(2).all(|pair| {
        (0..=100).all(|k| {
            let u = lo + (hi - lo) * k as f64 / 100.0;
            (pair[0].eval(u) - pair[1].eval(u)).abs() <= 1e-12
        })
    });
    if identical {
        let worst: Vec<f64> = nodes
            .iter()
            .map(|n| n.utilities.iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let predicted = argmax_states(nodes, &worst, tol);
        let matches = predicted == analysis.stable;
        return SelectionReport {
            prediction: SelectionPrediction::IdenticalTransforms { predicted },
            stable: analysis.stable.clone(),
            matches: Some(matches),
        };
    }

    let players = nodes[0].transformed.len();
    for i in 0..players {
        let own_max = nodes
            .iter()
            .map(|n| n.transformed[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let others_min = nodes
            .iter()
            .flat_map(|n| {
                n.transformed
                    .iter()
                    .enumerate()
                    .filter(move |&(j, _)| j != i)
                    .map(|(_, &v)| v)
            })
            .fold(f64::INFINITY, f64::min);
        if own_max <= others_min + 1e-12 {
            let own: Vec<f64> = nodes.iter().map(|n| n.utilities[i]).collect();
            let predicted = argmax_states(nodes, &own, tol);
            let matches = predicted == analysis.stable;
            return SelectionReport {
                prediction: SelectionPrediction::DominatedPlayer {
                    player: i,
                    predicted,
                },
                stable: analysis.stable.clone(),
                matches: Some(matches),
            };
        }
    }

    SelectionReport {
        prediction: SelectionPrediction::General,
        stable: analysis.stable.clone(),
        matches: None,
    }
}

fn argmax_states(nodes: &[ResistanceNode], scores: &[f64], tol: f64) -> Vec<usize> {
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    nodes
        .iter()
        .zip(scores)
        .filter(|&(_, &s)| s >= best - tol)
        .map(|(n, _)| n.state)
        .collect()
}

/// Fit of one transition probability's decay against its resistance.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeCheck {
    pub from: usize,
    pub to: usize,
    pub resistance: f64,
    /// Least-squares slope of `ln P^xi(from, to)` against `ln xi`.
    pub fitted_slope: f64,
    /// `|fitted - resistance| / resistance`, or `|fitted|` for resistance
    /// zero.
    pub relative_error: f64,
}

/// Verifies that transition probabilities scale like `xi^resistance` over
/// a grid of perturbation levels. Every pair's resistance must sit below
/// the ceiling, otherwise the rejection term dominates the decay.
pub fn perturbation_slope_checks(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    xi_grid: &[f64],
    pairs: &[(usize, usize)],
) -> Result<Vec<SlopeCheck>, ChainError> {
    let mut grid: Vec<f64> = xi_grid.to_vec();
    grid.dedup();
    if grid.len() < 2 || grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(ChainError::BadSlopeGrid);
    }
    let contexts: Vec<KernelContext> = grid
        .iter()
        .map(|&x| KernelContext::new(game, space, cfg, Some(x)))
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::with_capacity(pairs.len());
    for &(from, to) in pairs {
        let resistance = edge_resistance(space, cfg, from, to)?;
        if resistance >= cfg.ceiling {
            return Err(ChainError::SlopePairAboveCeiling {
                from,
                to,
                resistance,
                ceiling: cfg.ceiling,
            });
        }
        let from_beliefs = space.state(from)?.beliefs;
        let to_beliefs = space.state(to)?.beliefs;
        let points: Vec<(f64, f64)> = contexts
            .iter()
            .zip(&grid)
            .map(|(ctx, &x)| {
                let kernels = ctx.state_kernels(&from_beliefs);
                let p: f64 = to_beliefs
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| kernels[i][b])
                    .product();
                (x.ln(), p.ln())
            })
            .collect();
        let fitted_slope = least_squares_slope(&points);
        let relative_error = if resistance > 0.0 {
            (fitted_slope - resistance).abs() / resistance
        } else {
            fitted_slope.abs()
        };
        checks.push(SlopeCheck {
            from,
            to,
            resistance,
            fitted_slope,
            relative_error,
        });
    }
    Ok(checks)
}

/// Deterministic selection of transition pairs with positive resistance
/// below the ceiling, ordered by source then target.
pub fn default_slope_pairs(
    game: &Game,
    space: &StateSpace,
    cfg: &RunConfig,
    limit: usize,
) -> Result<Vec<(usize, usize)>, ChainError> {
    cfg.validate(game, space)?;
    let sources = consistent_states(space, cfg.tau, cfg.distance_mode);
    let mut pairs = Vec::new();
    'outer: for &from in &sources {
        for to in 0..space.state_count() {
            if to == from {
                continue;
            }
            let r = edge_resistance(space, cfg, from, to)?;
            if r > 0.0 && r < cfg.ceiling {
                pairs.push((from, to));
                if pairs.len() == limit {
                    break 'outer;
                }
            }
        }
    }
    Ok(pairs)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    num / den
}
