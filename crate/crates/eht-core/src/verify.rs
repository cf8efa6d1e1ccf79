//! Checkers for the structural conditions the exact analysis relies on.
//!
//! Nothing here blocks the other modules: desk-scale studies deliberately
//! run far outside the parameter regime that guarantees consistent states
//! are approximate equilibria. Each checker returns a report with the
//! relevant numbers so violations are visible instead of fatal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{br_image, nearest_grid_point, BeliefError, BeliefSets, DistanceMode};
use crate::game::{
    action_utilities, epsilon_ne_gap, logit_choice, smooth_best_response, Game, GameError,
    MixedStrategy, StrategyProfile,
};
use crate::game::ProfileIter;

/// Dedup tolerance for counting distinct smooth best responses.
const IMAGE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("tau must be nonnegative, got {0}")]
    BadTau(f64),
    #[error("grid resolution must be at least 1")]
    BadResolution,
    #[error("need at least one trial")]
    NoTrials,
    #[error(
        "fixed-point iteration left residual {residual} after {iterations} steps, \
         target {tol}"
    )]
    NoConvergence {
        residual: f64,
        tol: f64,
        iterations: usize,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The three parameter bounds that make every consistent state an
/// `epsilon`-equilibrium, evaluated literally on the game's constants.
#[derive(Debug, Clone, Serialize)]
pub struct ParameterCertificate {
    pub epsilon: f64,
    pub sigma: f64,
    pub sigma_bound: f64,
    pub sigma_ok: bool,
    pub tau: f64,
    pub tau_bound: f64,
    pub tau_ok: bool,
    pub resolution: usize,
    pub resolution_bound: f64,
    pub resolution_ok: bool,
    pub pass: bool,
    // Constants the bounds are built from, kept for auditability.
    pub num_players: usize,
    pub max_actions: usize,
    pub num_profiles: usize,
    pub max_own_times_opponent_profiles: usize,
    pub max_payoff: f64,
}

/// Evaluates the closed-form bounds `sigma <= eps / (2 ln max|A_i|)`,
/// `tau <= eps sigma / (2 sqrt|A| u_max^2 max_i |A_i||A_-i|)`, and the
/// matching lower bound on the grid resolution. Failing a bound is
/// reported, not fatal.
pub fn check_assumption1(
    game: &Game,
    epsilon: f64,
    sigma: f64,
    tau: f64,
    resolution: usize,
) -> Result<ParameterCertificate, VerifyError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(VerifyError::BadEpsilon(epsilon));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(VerifyError::Game(GameError::BadSigma(sigma)));
    }
    if tau < 0.0 || !tau.is_finite() {
        return Err(VerifyError::BadTau(tau));
    }
    if resolution == 0 {
        return Err(VerifyError::BadResolution);
    }
    let num_players = game.num_players();
    let max_actions = *game.action_counts().iter().max().unwrap();
    let num_profiles = game.num_profiles();
    let max_own_times_opponent_profiles = (0..num_players)
        .map(|i| game.action_count(i) * game.num_opponent_profiles(i))
        .max()
        .unwrap();
    let max_payoff = game.max_payoff_overall();

    let sigma_bound = epsilon / (2.0 * (max_actions as f64).ln());
    let tau_bound = epsilon * sigma
        / (2.0
            * (num_profiles as f64).sqrt()
            * max_payoff
            * max_payoff
            * max_own_times_opponent_profiles as f64);
    let resolution_bound = (num_players as f64 * max_actions as f64 / tau)
        * (1.0
            + (max_actions as f64).sqrt() / sigma
                * max_payoff
                * max_own_times_opponent_profiles as f64
                * num_players as f64);

    let sigma_ok = sigma <= sigma_bound;
    let tau_ok = tau <= tau_bound;
    let resolution_ok = resolution as f64 >= resolution_bound;
    Ok(ParameterCertificate {
        epsilon,
        sigma,
        sigma_bound,
        sigma_ok,
        tau,
        tau_bound,
        tau_ok,
        resolution,
        resolution_bound,
        resolution_ok,
        pass: sigma_ok && tau_ok && resolution_ok,
        num_players,
        max_actions,
        num_profiles,
        max_own_times_opponent_profiles,
        max_payoff,
    })
}

/// A profile where every player's strategy is their own smooth best
/// response to the others, with the certified residual.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub profile: StrategyProfile,
    /// Max-norm distance between the profile and its best-response image.
    pub residual: f64,
    pub iterations: usize,
}

fn best_response_profile(
    game: &Game,
    sigma: f64,
    profile: &[MixedStrategy],
) -> Result<StrategyProfile, GameError> {
    (0..game.num_players())
        .map(|i| {
            let marginals: Vec<Vec<f64>> = profile
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| s.probs().to_vec())
                .collect();
            smooth_best_response(game, i, &marginals, sigma)
        })
        .collect()
}

/// Finds a smooth best-response fixed point by damped iteration
/// `pi <- (pi + Br(pi)) / 2` from the uniform profile. Plain iteration can
/// oscillate at small temperatures; damping trades speed for stability but
/// still carries no general convergence guarantee, so failure is an error
/// with the last residual.
pub fn find_smooth_br_fixed_point(
    game: &Game,
    sigma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint, VerifyError> {
    let mut profile: StrategyProfile = game
        .action_counts()
        .iter()
        .map(|&k| MixedStrategy::uniform(k))
        .collect();
    let mut residual = f64::INFINITY;
    for iterations in 0..=max_iter {
        let br = best_response_profile(game, sigma, &profile)?;
        residual = profile
            .iter()
            .zip(&br)
            .flat_map(|(p, b)| p.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        if residual < tol {
            return Ok(FixedPoint {
                profile,
                residual,
                iterations,
            });
        }
        profile = profile
            .iter()
            .zip(&br)
            .map(|(p, b)| {
                let mixed: Vec<f64> = p
                    .probs()
                    .iter()
                    .zip(b.probs())
                    .map(|(x, y)| 0.5 * x + 0.5 * y)
                    .collect();
                MixedStrategy::new(mixed)
            })
            .collect::<Result<_, _>>()?;
    }
    Err(VerifyError::NoConvergence {
        residual,
        tol,
        iterations: max_iter,
    })
}

/// Numeric record of the constructive equilibrium check: snap the fixed
/// point onto the belief grid, take smooth best responses, and measure how
/// far each step moved.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructiveCheck {
    pub fixed_point_residual: f64,
    pub fixed_point_iterations: usize,
    /// Worst distance between a snapped belief and the fixed point's play.
    pub snap_distance: f64,
    pub snap_ok: bool,
    /// Worst per-player shift of the smooth best response after snapping.
    pub response_shift: f64,
    pub response_ok: bool,
    /// Worst distance between a snapped belief and the snapped profile's
    /// actual play: the consistency of the constructed state.
    pub consistency_distance: f64,
    pub consistency_ok: bool,
    pub epsilon: f64,
    pub ne_gap: f64,
    pub gap_ok: bool,
    pub pass: bool,
}

/// Builds the candidate consistent state for the given parameters and
/// checks the three snap inequalities plus the equilibrium gap, all
/// against `tau` and `epsilon`. Needs only per-player grid rounding, so
/// the resolution can be astronomically large.
pub fn verify_prop2_constructive(
    game: &Game,
    epsilon: f64,
    sigma: f64,
    tau: f64,
    resolution: usize,
    mode: DistanceMode,
) -> Result<ConstructiveCheck, VerifyError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(VerifyError::BadEpsilon(epsilon));
    }
    if tau < 0.0 || !tau.is_finite() {
        return Err(VerifyError::BadTau(tau));
    }
    if resolution == 0 {
        return Err(VerifyError::BadResolution);
    }
    let fp = find_smooth_br_fixed_point(game, sigma, 1e-10, 100_000)?;
    let n = game.num_players();

    // Snapped belief per player: each opponent's strategy rounded to the
    // grid, kept as per-opponent fraction vectors.
    let snapped: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let counts =
                        nearest_grid_point(fp.profile[j].probs(), game.action_count(j), resolution)?;
                    Ok(counts
                        .into_iter()
                        .map(|c| c as f64 / resolution as f64)
                        .collect())
                })
                .collect::<Result<_, BeliefError>>()
        })
        .collect::<Result<_, _>>()?;

    let snapped_profile: StrategyProfile = (0..n)
        .map(|i| smooth_best_response(game, i, &snapped[i], sigma))
        .collect::<Result<_, _>>()?;

    let mut snap_distance = 0.0f64;
    let mut response_shift = 0.0f64;
    let mut consistency_distance = 0.0f64;
    for i in 0..n {
        let belief_refs: Vec<&[f64]> = snapped[i].iter().map(Vec::as_slice).collect();
        let fp_opponents: Vec<&[f64]> = fp
            .profile
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.probs())
            .collect();
        snap_distance = snap_distance.max(mode.distance(&belief_refs, &fp_opponents));

        let fp_marginals: Vec<Vec<f64>> = fp_opponents.iter().map(|s| s.to_vec()).collect();
        let response_at_fp = smooth_best_response(game, i, &fp_marginals, sigma)?;
        response_shift = response_shift.max(l2(
            response_at_fp.probs(),
            snapped_profile[i].probs(),
        ));

        let snapped_opponents: Vec<&[f64]> = snapped_profile
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, s)| s.probs())
            .collect();
        consistency_distance =
            consistency_distance.max(mode.distance(&belief_refs, &snapped_opponents));
    }
    let ne_gap = epsilon_ne_gap(game, &snapped_profile)?;

    let snap_ok = snap_distance <= tau;
    let response_ok = response_shift <= tau;
    let consistency_ok = consistency_distance <= tau;
    let gap_ok = ne_gap <= epsilon;
    Ok(ConstructiveCheck {
        fixed_point_residual: fp.residual,
        fixed_point_iterations: fp.iterations,
        snap_distance,
        snap_ok,
        response_shift,
        response_ok,
        consistency_distance,
        consistency_ok,
        epsilon,
        ne_gap,
        gap_ok,
        pass: snap_ok && response_ok && consistency_ok && gap_ok,
    })
}

/// Player `j`'s belief about player `i`, as fractions over `i`'s actions.
fn belief_about(sets: &BeliefSets, j: usize, belief: usize, i: usize) -> Vec<f64> {
    let digits = sets.decode_belief(j, belief);
    let slot = sets.opponents(j).position(|p| p == i).unwrap();
    sets.grid(i).fractions(digits[slot]).to_vec()
}

/// Best escape belief for one `(player, opponent beliefs)` cell: the grid
/// belief maximizing the smaller of its distance to the opponents' play
/// and its response's distance to the opponents' beliefs about `player`.
fn escape_margin(
    sets: &BeliefSets,
    mode: DistanceMode,
    player: usize,
    opp_beliefs: &[usize],
) -> (usize, f64, f64, f64) {
    let opponents: Vec<usize> = sets.opponents(player).collect();
    let play: Vec<&[f64]> = opponents
        .iter()
        .zip(opp_beliefs)
        .map(|(&j, &b)| sets.strategy(j, b).probs())
        .collect();
    let views: Vec<Vec<f64>> = opponents
        .iter()
        .zip(opp_beliefs)
        .map(|(&j, &b)| belief_about(sets, j, b, player))
        .collect();
    let mut best = (0usize, f64::NEG_INFINITY, 0.0, 0.0);
    for candidate in 0..sets.belief_count(player) {
        let marginals = sets.belief_marginals(player, candidate);
        let refs: Vec<&[f64]> = marginals.iter().map(Vec::as_slice).collect();
        let play_distance = mode.distance(&refs, &play);
        let response = sets.strategy(player, candidate).probs();
        let view_distance = views
            .iter()
            .map(|v| l2(response, v))
            .fold(f64::INFINITY, f64::min);
        let margin = play_distance.min(view_distance);
        if margin > best.1 {
            best = (candidate, margin, play_distance, view_distance);
        }
    }
    best
}

fn opponent_belief_cells(sets: &BeliefSets, player: usize) -> Vec<Vec<usize>> {
    let counts: Vec<usize> = sets
        .opponents(player)
        .map(|j| sets.belief_count(j))
        .collect();
    ProfileIter::new(counts).collect()
}

/// One satisfied escape cell: from any state where the opponents hold
/// these beliefs, `player` can jump to `witness` and trigger rejections
/// all around.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeWitness {
    pub player: usize,
    /// Opponent belief indices, ascending opponent order.
    pub opponent_beliefs: Vec<usize>,
    pub witness: usize,
    /// Distance from the witness belief to the opponents' play.
    pub play_distance: f64,
    /// Smallest distance from the witness response to any opponent's
    /// belief about `player`.
    pub view_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscapeCell {
    pub player: usize,
    pub opponent_beliefs: Vec<usize>,
    /// Best attainable margin; a pass needs it strictly above tau.
    pub margin: f64,
}

/// Report of the escape-belief search over every (player, opponent
/// beliefs) cell.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeReport {
    pub tau: f64,
    pub pass: bool,
    /// One witness per cell when passing, emptied on failure.
    pub witnesses: Vec<EscapeWitness>,
    /// First failing cell in (player, cell) order.
    pub failure: Option<EscapeCell>,
}

fn all_cells(sets: &BeliefSets) -> Vec<(usize, Vec<usize>)> {
    (0..sets.num_players())
        .flat_map(|player| {
            opponent_belief_cells(sets, player)
                .into_iter()
                .map(move |cell| (player, cell))
        })
        .collect()
}

/// Exhaustively checks that every player can always move strictly more
/// than `tau` away from the opponents' play while their response also
/// stays strictly more than `tau` from the opponents' beliefs about them.
/// Cells are searched in parallel; the reported failure is always the
/// first one in (player, cell) order.
pub fn check_assumption2(sets: &BeliefSets, tau: f64, mode: DistanceMode) -> EscapeReport {
    let cells = all_cells(sets);
    let margins: Vec<(usize, f64, f64, f64)> = cells
        .par_iter()
        .map(|(player, cell)| escape_margin(sets, mode, *player, cell))
        .collect();
    let mut witnesses = Vec::with_capacity(cells.len());
    for ((player, cell), (witness, margin, play_distance, view_distance)) in
        cells.into_iter().zip(margins)
    {
        if margin > tau {
            witnesses.push(EscapeWitness {
                player,
                opponent_beliefs: cell,
                witness,
                play_distance,
                view_distance,
            });
        } else {
            return EscapeReport {
                tau,
                pass: false,
                witnesses: Vec::new(),
                failure: Some(EscapeCell {
                    player,
                    opponent_beliefs: cell,
                    margin,
                }),
            };
        }
    }
    EscapeReport {
        tau,
        pass: true,
        witnesses,
        failure: None,
    }
}

/// The easily-auditable sufficient condition: enough distinct smooth best
/// responses per player, and `tau` strictly below the worst-cell escape
/// margin.
#[derive(Debug, Clone, Serialize)]
pub struct SimpleConditionReport {
    pub image_sizes: Vec<usize>,
    pub num_players: usize,
    /// Every image strictly larger than the player count.
    pub image_condition: bool,
    pub tau: f64,
    /// Smallest escape margin over all cells.
    pub tau_threshold: f64,
    pub tau_condition: bool,
    pub pass: bool,
}

pub fn check_simple_condition(
    sets: &BeliefSets,
    tau: f64,
    mode: DistanceMode,
) -> SimpleConditionReport {
    let n = sets.num_players();
    let image_sizes: Vec<usize> = (0..n).map(|i| br_image(sets, i, IMAGE_TOL).len()).collect();
    let image_condition = image_sizes.iter().all(|&s| s > n);
    let tau_threshold = all_cells(sets)
        .par_iter()
        .map(|(player, cell)| escape_margin(sets, mode, *player, cell).1)
        .reduce(|| f64::INFINITY, f64::min);
    let tau_condition = tau < tau_threshold;
    SimpleConditionReport {
        image_sizes,
        num_players: n,
        image_condition,
        tau,
        tau_threshold,
        tau_condition,
        pass: image_condition && tau_condition,
    }
}

fn random_simplex_point<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim)
        .map(|_| -rng.gen::<f64>().max(1e-300).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

fn lipschitz_ratio(
    game: &Game,
    player: usize,
    sigma: f64,
    first: &[Vec<f64>],
    second: &[Vec<f64>],
) -> Result<f64, GameError> {
    let u1 = action_utilities(game, player, first)?;
    let u2 = action_utilities(game, player, second)?;
    let du = l2(&u1, &u2);
    if du == 0.0 {
        return Ok(0.0);
    }
    let r1 = logit_choice(&u1, sigma)?;
    let r2 = logit_choice(&u2, sigma)?;
    Ok(sigma * l2(r1.probs(), r2.probs()) / du)
}

/// Monte Carlo check that the smooth best response moves at most `1/sigma`
/// times as far as the utility vector: samples `trials` random belief
/// pairs per player and returns the largest observed ratio of response
/// shift times `sigma` to utility shift.
pub fn verify_lipschitz(
    game: &Game,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::NoTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0f64;
    for _ in 0..trials {
        for i in 0..game.num_players() {
            let counts = game.opponent_action_counts(i);
            let first: Vec<Vec<f64>> = counts
                .iter()
                .map(|&k| random_simplex_point(k, &mut rng))
                .collect();
            let second: Vec<Vec<f64>> = counts
                .iter()
                .map(|&k| random_simplex_point(k, &mut rng))
                .collect();
            max_ratio = max_ratio.max(lipschitz_ratio(game, i, sigma, &first, &second)?);
        }
    }
    Ok(max_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;

    fn stag_hunt() -> Game {
        Game::two_player(
            vec![vec![4.0, 0.0], vec![3.0, 3.0]],
            vec![vec![4.0, 3.0], vec![0.0, 3.0]],
        )
        .unwrap()
    }

    fn unit_matching_pennies() -> Game {
        Game::two_player(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn certificate_bounds_follow_the_formulas() {
        let game = unit_matching_pennies();
        let epsilon = 0.5;
        let sigma = epsilon / (2.0 * 2.0f64.ln());
        let tau = epsilon * sigma / (2.0 * 4.0f64.sqrt() * 1.0 * 4.0);
        let resolution =
            ((2.0 * 2.0 / tau) * (1.0 + 2.0f64.sqrt() / sigma * 4.0 * 2.0)).ceil() as usize;
        let cert = check_assumption1(&game, epsilon, sigma, tau, resolution).unwrap();
        assert_abs_diff_eq!(cert.sigma_bound, 0.5 / (2.0 * 2.0f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(cert.tau_bound, tau, epsilon = 1e-15);
        assert!(cert.sigma_ok && cert.tau_ok && cert.resolution_ok && cert.pass);
        assert_eq!(cert.max_actions, 2);
        assert_eq!(cert.num_profiles, 4);
        assert_eq!(cert.max_own_times_opponent_profiles, 4);
        assert_abs_diff_eq!(cert.max_payoff, 1.0);

        let low = check_assumption1(&game, epsilon, sigma, tau, resolution / 2).unwrap();
        assert!(!low.resolution_ok && !low.pass);
    }

    #[test]
    fn certificate_rejects_bad_parameters() {
        let game = unit_matching_pennies();
        assert!(check_assumption1(&game, 0.0, 0.1, 0.1, 10).is_err());
        assert!(check_assumption1(&game, 0.5, 0.0, 0.1, 10).is_err());
        assert!(check_assumption1(&game, 0.5, 0.1, -0.1, 10).is_err());
        assert!(check_assumption1(&game, 0.5, 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn constant_payoffs_fix_the_uniform_profile_immediately() {
        let game = Game::two_player(vec![vec![1.0; 2]; 2], vec![vec![1.0; 2]; 2]).unwrap();
        let fp = find_smooth_br_fixed_point(&game, 0.5, 1e-10, 100).unwrap();
        assert_eq!(fp.iterations, 0);
        for s in &fp.profile {
            assert_abs_diff_eq!(s.probs()[0], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn fixed_point_is_certified_by_its_residual() {
        let game = stag_hunt();
        let fp = find_smooth_br_fixed_point(&game, 0.25, 1e-10, 100_000).unwrap();
        assert!(fp.residual < 1e-10);
        let br = best_response_profile(&game, 0.25, &fp.profile).unwrap();
        for (p, b) in fp.profile.iter().zip(&br) {
            for (x, y) in p.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn high_temperature_fixed_point_is_nearly_uniform() {
        let game = stag_hunt();
        let fp = find_smooth_br_fixed_point(&game, 400.0, 1e-12, 10_000).unwrap();
        for s in &fp.profile {
            assert_abs_diff_eq!(s.probs()[0], 0.5, epsilon = 1e-3);
        }
    }

    #[test]
    fn compliant_parameters_pass_the_constructive_check() {
        let game = unit_matching_pennies();
        let epsilon = 0.5;
        let sigma = epsilon / (2.0 * 2.0f64.ln());
        let tau = epsilon * sigma / (2.0 * 2.0 * 4.0);
        let cert = check_assumption1(&game, epsilon, sigma, tau, usize::MAX).unwrap();
        assert!(cert.sigma_ok && cert.tau_ok);
        let resolution = cert.resolution_bound.ceil() as usize;
        let report = verify_prop2_constructive(
            &game,
            epsilon,
            sigma,
            tau,
            resolution,
            DistanceMode::JointProduct,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.ne_gap <= epsilon);
    }

    #[test]
    fn desk_scale_parameters_report_instead_of_failing() {
        let game = stag_hunt();
        let report = verify_prop2_constructive(
            &game,
            0.5,
            0.25,
            0.01,
            4,
            DistanceMode::JointProduct,
        )
        .unwrap();
        // Snapping onto a 4-point grid cannot stay within 0.01; only the
        // numbers matter here, not the verdict.
        assert!(report.snap_distance > 0.0);
        assert!(report.fixed_point_residual < 1e-10);
    }

    #[test]
    fn huge_tau_trivializes_the_snap_checks() {
        let game = stag_hunt();
        let report = verify_prop2_constructive(
            &game,
            10.0,
            0.25,
            3.0,
            4,
            DistanceMode::JointProduct,
        )
        .unwrap();
        assert!(report.snap_ok && report.response_ok && report.consistency_ok);
        assert!(report.pass);
    }

    #[test]
    fn escape_beliefs_exist_on_the_stag_hunt_grid() {
        let game = stag_hunt();
        let sets = BeliefSets::build(&game, 4, 0.25, 1_000_000).unwrap();
        let report = check_assumption2(&sets, 0.1, DistanceMode::JointProduct);
        assert!(report.pass);
        // One cell per (player, opponent belief); all witnessed.
        assert_eq!(report.witnesses.len(), 10);
        for w in &report.witnesses {
            assert!(w.play_distance > 0.1 && w.view_distance > 0.1);
        }
    }

    #[test]
    fn constant_payoffs_leave_no_escape_belief() {
        let game = Game::two_player(vec![vec![1.0; 2]; 2], vec![vec![1.0; 2]; 2]).unwrap();
        let sets = BeliefSets::build(&game, 4, 0.25, 1_000_000).unwrap();
        // Every response is uniform; when an opponent's belief is exactly
        // uniform the view distance is zero for every candidate.
        let report = check_assumption2(&sets, 0.1, DistanceMode::JointProduct);
        assert!(!report.pass);
        let failure = report.failure.unwrap();
        assert_eq!(failure.opponent_beliefs, vec![2]);
        assert!(failure.margin <= 0.1);
    }

    #[test]
    fn tau_beyond_the_simplex_diameter_fails_everywhere() {
        let game = stag_hunt();
        let sets = BeliefSets::build(&game, 4, 0.25, 1_000_000).unwrap();
        let report = check_assumption2(&sets, 2.0, DistanceMode::JointProduct);
        assert!(!report.pass);
        assert!(report.failure.is_some());
    }

    #[test]
    fn simple_condition_holds_on_the_stag_hunt() {
        let game = stag_hunt();
        let sets = BeliefSets::build(&game, 4, 0.25, 1_000_000).unwrap();
        let report = check_simple_condition(&sets, 0.3, DistanceMode::JointProduct);
        assert_eq!(report.image_sizes, vec![5, 5]);
        assert!(report.image_condition);
        assert!(report.tau_threshold > 0.3, "threshold {}", report.tau_threshold);
        assert!(report.pass);

        // The threshold itself fails: the inequality is strict.
        let at = check_simple_condition(&sets, report.tau_threshold, DistanceMode::JointProduct);
        assert!(!at.tau_condition && !at.pass);
    }

    #[test]
    fn constant_payoffs_fail_the_image_condition() {
        let game = Game::two_player(vec![vec![1.0; 2]; 2], vec![vec![1.0; 2]; 2]).unwrap();
        let sets = BeliefSets::build(&game, 4, 0.25, 1_000_000).unwrap();
        let report = check_simple_condition(&sets, 0.1, DistanceMode::JointProduct);
        assert_eq!(report.image_sizes, vec![1, 1]);
        assert!(!report.image_condition && !report.pass);
    }

    #[test]
    fn simple_condition_implies_the_exhaustive_check() {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(23);
        let mut passes = 0;
        for _ in 0..20 {
            let rows = rng.gen_range(2..=3);
            let cols = rng.gen_range(2..=3);
            let u_row: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0.0..3.0)).collect())
                .collect();
            let u_col: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0.0..3.0)).collect())
                .collect();
            let game = Game::two_player(u_row, u_col).unwrap();
            let m = rng.gen_range(2..=3);
            let sigma = [0.2, 0.5][rng.gen_range(0..2)];
            let tau = [0.05, 0.3][rng.gen_range(0..2)];
            let sets = BeliefSets::build(&game, m, sigma, 1_000_000).unwrap();
            let simple = check_simple_condition(&sets, tau, DistanceMode::JointProduct);
            if simple.pass {
                passes += 1;
                let full = check_assumption2(&sets, tau, DistanceMode::JointProduct);
                assert!(full.pass);
            }
        }
        assert!(passes > 0, "no random config exercised the implication");
    }

    #[test]
    fn response_shifts_stay_within_the_utility_shift() {
        let game = stag_hunt();
        let ratio = verify_lipschitz(&game, 0.25, 2000, 7).unwrap();
        assert!(ratio <= 1.0 + 1e-6, "ratio {ratio}");
        assert!(ratio > 0.0);
    }

    #[test]
    fn lipschitz_ratio_is_scale_invariant() {
        let base = stag_hunt();
        let scaled = Game::two_player(
            vec![vec![12.0, 0.0], vec![9.0, 9.0]],
            vec![vec![12.0, 9.0], vec![0.0, 9.0]],
        )
        .unwrap();
        let a = verify_lipschitz(&base, 0.25, 500, 11).unwrap();
        let b = verify_lipschitz(&scaled, 0.75, 500, 11).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn identical_beliefs_give_ratio_zero() {
        let game = stag_hunt();
        let b = vec![vec![0.3, 0.7]];
        assert_abs_diff_eq!(
            lipschitz_ratio(&game, 0, 0.25, &b, &b).unwrap(),
            0.0,
            epsilon = 0.0
        );
        assert!(verify_lipschitz(&game, 0.25, 0, 1).is_err());
    }
}
