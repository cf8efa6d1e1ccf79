//! The epoch-level frequency test and its sample-size bounds.
//!
//! A player holding belief `b` observes `T` joint opponent actions and
//! rejects when the empirical distribution sits farther from the belief's
//! product distribution (in L2) than `tau` plus a concentration slack. The
//! slack shrinks with `T` so that false rejections stay below the
//! significance level regardless of sample size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::belief::{br_image, product_distribution, BeliefSets};
use crate::game::Game;

#[derive(Debug, Error)]
pub enum TestError {
    #[error("empty sample")]
    EmptySample,
    #[error("counts have {got} cells, belief has {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("tolerance must be nonnegative and finite, got {0}")]
    BadTau(f64),
    #[error("probabilities must be nonnegative and sum to 1, got sum {0}")]
    BadProbabilities(f64),
}

/// Joint opponent action counts observed during one epoch. The cell order
/// matches the mixed-radix joint opponent profile index.
#[derive(Debug, Clone, Serialize)]
pub struct SampleCounts {
    counts: Vec<u64>,
    total: u64,
}

impl SampleCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self, TestError> {
        if counts.is_empty() {
            return Err(TestError::EmptySample);
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(TestError::EmptySample);
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Empirical frequencies: each entry is the exact rational `count/total`
    /// rounded once to f64.
    pub fn empirical(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }
}

/// Test tolerance and significance level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestParams {
    pub tau: f64,
    pub alpha: f64,
}

impl TestParams {
    pub fn validate(&self) -> Result<(), TestError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TestError::BadAlpha(self.alpha));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(TestError::BadTau(self.tau));
        }
        Ok(())
    }
}

/// `tau` plus the concentration slack `sqrt(dim * ln(2/alpha) / (2 T))`.
pub fn rejection_threshold(tau: f64, dim: usize, alpha: f64, t: u64) -> f64 {
    tau + (dim as f64 * (2.0 / alpha).ln() / (2.0 * t as f64)).sqrt()
}

/// Equality keeps the null: only a statistic strictly above the threshold
/// rejects.
#[inline]
pub fn rejects(statistic: f64, threshold: f64) -> bool {
    statistic > threshold
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub rejected: bool,
}

/// Runs the frequency test of `belief_joint` (a product distribution over
/// joint opponent profiles) against observed counts.
pub fn run_test(
    counts: &SampleCounts,
    belief_joint: &[f64],
    params: &TestParams,
) -> Result<TestOutcome, TestError> {
    params.validate()?;
    if counts.counts.len() != belief_joint.len() {
        return Err(TestError::DimensionMismatch {
            got: counts.counts.len(),
            expected: belief_joint.len(),
        });
    }
    let empirical = counts.empirical();
    let statistic = empirical
        .iter()
        .zip(belief_joint)
        .map(|(e, b)| (e - b) * (e - b))
        .sum::<f64>()
        .sqrt();
    let threshold = rejection_threshold(params.tau, belief_joint.len(), params.alpha, counts.total);
    Ok(TestOutcome {
        statistic,
        threshold,
        rejected: rejects(statistic, threshold),
    })
}

/// Samples needed so that a belief-vs-play gap `gap` past `tau` is detected
/// with error probability at most `alpha`: `2 dim ln(2/alpha) / gap^2`.
pub fn sample_size_for_gap(gap: f64, dim: usize, alpha: f64) -> f64 {
    2.0 * dim as f64 * (2.0 / alpha).ln() / (gap * gap)
}

/// Epoch length required for uniform test reliability over the whole
/// discretized belief space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RequiredSampleSize {
    /// No belief sits farther than `tau` from any reachable strategy
    /// profile, so rejections are never required.
    NeverNeeded,
    Bounded {
        t: u64,
        /// True when the bound exceeded `max_t` and was clamped to it.
        capped: bool,
        /// Smallest positive gap past `tau`, which attains the bound.
        min_gap: f64,
    },
}

/// Worst-case sample size over every player, every belief in the grid, and
/// every strategy profile the opponents' smooth best responses can realize.
/// Gaps are measured between product distributions over joint opponent
/// profiles, the same geometry the test statistic uses.
pub fn required_sample_size(
    game: &Game,
    sets: &BeliefSets,
    tau: f64,
    alpha: f64,
    max_t: u64,
) -> Result<RequiredSampleSize, TestError> {
    TestParams { tau, alpha }.validate()?;
    let n = game.num_players();
    let images: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            br_image(sets, j, 1e-12)
                .into_iter()
                .map(|s| s.probs().to_vec())
                .collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        let opponents: Vec<usize> = sets.opponents(i).collect();
        let dim = game.num_opponent_profiles(i);
        for b in 0..sets.belief_count(i) {
            let marginals = sets.belief_marginals(i, b);
            let refs: Vec<&[f64]> = marginals.iter().map(Vec::as_slice).collect();
            let belief_joint = product_distribution(&refs);
            // Odometer over one image strategy per opponent.
            let sizes: Vec<usize> = opponents.iter().map(|&j| images[j].len()).collect();
            let mut combo = vec![0usize; opponents.len()];
            loop {
                let strat_refs: Vec<&[f64]> = opponents
                    .iter()
                    .zip(&combo)
                    .map(|(&j, &c)| images[j][c].as_slice())
                    .collect();
                let play_joint = product_distribution(&strat_refs);
                let d = belief_joint
                    .iter()
                    .zip(&play_joint)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if d > tau {
                    let gap = d - tau;
                    min_gap = min_gap.min(gap);
                    worst = worst.max(sample_size_for_gap(gap, dim, alpha));
                }
                // Increment the odometer.
                let mut pos = combo.len();
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    combo[pos] += 1;
                    if combo[pos] < sizes[pos] {
                        break;
                    }
                    combo[pos] = 0;
                }
                if combo.iter().all(|&c| c == 0) {
                    break;
                }
            }
        }
    }
    if !min_gap.is_finite() {
        return Ok(RequiredSampleSize::NeverNeeded);
    }
    let t = worst.ceil();
    if t > max_t as f64 {
        Ok(RequiredSampleSize::Bounded {
            t: max_t,
            capped: true,
            min_gap,
        })
    } else {
        Ok(RequiredSampleSize::Bounded {
            t: t as u64,
            capped: false,
            min_gap,
        })
    }
}

/// Draws multinomial counts by chained conditional binomials, O(cells) per
/// draw regardless of `t`.
pub fn sample_multinomial<R: rand::Rng>(
    probs: &[f64],
    t: u64,
    rng: &mut R,
) -> Result<Vec<u64>, TestError> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(TestError::BadProbabilities(sum));
    }
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = t;
    let mut remaining_p = 1.0f64;
    for k in 0..probs.len() {
        if remaining == 0 {
            break;
        }
        if k == probs.len() - 1 {
            counts[k] = remaining;
            break;
        }
        let cond = if remaining_p <= 0.0 {
            0.0
        } else {
            (probs[k] / remaining_p).clamp(0.0, 1.0)
        };
        let draw = Binomial::new(remaining, cond).unwrap().sample(rng);
        counts[k] = draw;
        remaining -= draw;
        remaining_p -= probs[k];
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    /// Belief within `tau` of actual play: errors are false rejections.
    TypeI,
    /// Belief farther than `tau`: errors are missed rejections.
    TypeII,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRateEstimate {
    pub kind: ErrorKind,
    pub distance: f64,
    pub sample_size: u64,
    pub trials: u64,
    pub rate: f64,
    /// Three-sigma binomial half width of `rate`.
    pub half_width: f64,
}

/// Monte Carlo estimate of the test's error rate for one belief/play pair.
/// Trial `k` uses an independent, reproducible stream derived from `seed`.
pub fn estimate_error_rates(
    belief_joint: &[f64],
    play_joint: &[f64],
    params: &TestParams,
    t: u64,
    trials: u64,
    seed: u64,
) -> Result<ErrorRateEstimate, TestError> {
    params.validate()?;
    if belief_joint.len() != play_joint.len() {
        return Err(TestError::DimensionMismatch {
            got: play_joint.len(),
            expected: belief_joint.len(),
        });
    }
    let distance = belief_joint
        .iter()
        .zip(play_joint)
        .map(|(b, p)| (b - p) * (b - p))
        .sum::<f64>()
        .sqrt();
    let kind = if distance <= params.tau {
        ErrorKind::TypeI
    } else {
        ErrorKind::TypeII
    };
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let counts = sample_multinomial(play_joint, t, &mut rng).expect("validated");
            let outcome = run_test(&SampleCounts::new(counts).expect("t >= 1"), belief_joint, params)
                .expect("validated");
            let is_error = match kind {
                ErrorKind::TypeI => outcome.rejected,
                ErrorKind::TypeII => !outcome.rejected,
            };
            u64::from(is_error)
        })
        .sum();
    let rate = errors as f64 / trials as f64;
    let half_width = 3.0 * (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(ErrorRateEstimate {
        kind,
        distance,
        sample_size: t,
        trials,
        rate,
        half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::DEFAULT_STATE_CAP;
    use approx::assert_abs_diff_eq;

    fn stag_hunt() -> Game {
        Game::two_player(
            vec![vec![4.0, 0.0], vec![3.0, 3.0]],
            vec![vec![4.0, 3.0], vec![0.0, 3.0]],
        )
        .unwrap()
    }

    #[test]
    fn threshold_value() {
        let th = rejection_threshold(0.1, 2, 0.05, 200);
        // 0.1 + sqrt(2 ln(40) / 400)
        assert_abs_diff_eq!(th, 0.23581015, epsilon = 1e-7);
    }

    #[test]
    fn threshold_shrinks_with_samples_and_grows_with_dim() {
        assert!(rejection_threshold(0.1, 2, 0.05, 100) > rejection_threshold(0.1, 2, 0.05, 1000));
        assert!(rejection_threshold(0.1, 4, 0.05, 100) > rejection_threshold(0.1, 2, 0.05, 100));
    }

    #[test]
    fn equality_does_not_reject() {
        assert!(!rejects(1.0, 1.0));
        assert!(rejects(1.0 + 1e-15, 1.0));
        assert!(!rejects(1.0 - 1e-15, 1.0));
    }

    #[test]
    fn empirical_distribution_is_exact() {
        let counts = SampleCounts::new(vec![50, 150]).unwrap();
        assert_eq!(counts.total(), 200);
        let e = counts.empirical();
        assert_eq!(e, vec![0.25, 0.75]);
        assert_abs_diff_eq!(e.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn run_test_detects_large_gap() {
        let params = TestParams {
            tau: 0.1,
            alpha: 0.05,
        };
        // Belief says uniform; play is lopsided.
        let counts = SampleCounts::new(vec![960, 40]).unwrap();
        let outcome = run_test(&counts, &[0.5, 0.5], &params).unwrap();
        assert!(outcome.rejected);
        // Matching frequencies never reject.
        let counts = SampleCounts::new(vec![500, 500]).unwrap();
        let outcome = run_test(&counts, &[0.5, 0.5], &params).unwrap();
        assert_abs_diff_eq!(outcome.statistic, 0.0);
        assert!(!outcome.rejected);
    }

    #[test]
    fn sample_size_formula_value() {
        // gap 0.3, two cells, alpha 0.01: ceil(4/0.09 * ln 200) = 236
        let t = sample_size_for_gap(0.3, 2, 0.01).ceil() as u64;
        assert_eq!(t, 236);
    }

    #[test]
    fn required_sample_size_matches_pairwise_oracle() {
        let game = stag_hunt();
        let sets = BeliefSets::build(&game, 4, 0.25, DEFAULT_STATE_CAP).unwrap();
        let tau = 0.3;
        let alpha = 0.05;
        let result = required_sample_size(&game, &sets, tau, alpha, 10_000_000).unwrap();

        // Oracle: both players share one grid here, so scan belief-vs-image
        // distances directly.
        let mut oracle: f64 = 0.0;
        let mut any = false;
        for i in 0..2 {
            let opp = 1 - i;
            let image = br_image(&sets, opp, 1e-12);
            for b in 0..sets.belief_count(i) {
                let bm = sets.belief_marginals(i, b);
                for s in &image {
                    let d: f64 = bm[0]
                        .iter()
                        .zip(s.probs())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    if d > tau {
                        any = true;
                        oracle = oracle.max(sample_size_for_gap(d - tau, 2, alpha));
                    }
                }
            }
        }
        assert!(any);
        match result {
            RequiredSampleSize::Bounded { t, capped, .. } => {
                assert!(!capped);
                assert_eq!(t, oracle.ceil() as u64);
            }
            other => panic!("expected a bound, got {other:?}"),
        }
    }

    #[test]
    fn required_sample_size_can_be_capped_or_unneeded() {
        let game = stag_hunt();
        let sets = BeliefSets::build(&game, 4, 0.25, DEFAULT_STATE_CAP).unwrap();
        match required_sample_size(&game, &sets, 0.3, 0.05, 100).unwrap() {
            RequiredSampleSize::Bounded { t, capped, .. } => {
                assert!(capped);
                assert_eq!(t, 100);
            }
            other => panic!("expected capped bound, got {other:?}"),
        }
        // A huge tolerance leaves nothing to detect.
        assert_eq!(
            required_sample_size(&game, &sets, 2.0, 0.05, 100).unwrap(),
            RequiredSampleSize::NeverNeeded
        );
    }

    #[test]
    fn multinomial_counts_sum_and_reproduce() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let probs = [0.2, 0.3, 0.5];
        let a = sample_multinomial(&probs, 10_000, &mut rng).unwrap();
        assert_eq!(a.iter().sum::<u64>(), 10_000);
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        let b = sample_multinomial(&probs, 10_000, &mut rng2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multinomial_concentrates_at_large_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let counts = sample_multinomial(&[0.25, 0.75], 100_000, &mut rng).unwrap();
        let sample = SampleCounts::new(counts).unwrap();
        let e = sample.empirical();
        assert!((e[0] - 0.25).abs() < 0.01);
        assert!((e[1] - 0.75).abs() < 0.01);
    }

    #[test]
    fn type_one_errors_are_rare_at_honest_beliefs() {
        let params = TestParams {
            tau: 0.2,
            alpha: 0.05,
        };
        let est = estimate_error_rates(&[0.5, 0.5], &[0.5, 0.5], &params, 500, 2000, 9).unwrap();
        assert_eq!(est.kind, ErrorKind::TypeI);
        assert!(est.rate <= 0.05 + est.half_width);
    }

    #[test]
    fn tiny_samples_cannot_detect_small_gaps() {
        let params = TestParams {
            tau: 0.05,
            alpha: 0.05,
        };
        // One observation: the slack alone exceeds any achievable statistic.
        let est = estimate_error_rates(&[0.55, 0.45], &[0.45, 0.55], &params, 1, 500, 11).unwrap();
        assert_eq!(est.kind, ErrorKind::TypeII);
        assert_abs_diff_eq!(est.rate, 1.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let params = TestParams {
            tau: 0.1,
            alpha: 1.5,
        };
        let counts = SampleCounts::new(vec![1, 1]).unwrap();
        assert!(run_test(&counts, &[0.5, 0.5], &params).is_err());
        let params = TestParams {
            tau: -0.1,
            alpha: 0.05,
        };
        assert!(run_test(&counts, &[0.5, 0.5], &params).is_err());
        assert!(SampleCounts::new(vec![]).is_err());
        assert!(SampleCounts::new(vec![0, 0]).is_err());
        let good = TestParams {
            tau: 0.1,
            alpha: 0.05,
        };
        assert!(run_test(&counts, &[0.5, 0.25, 0.25], &good).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_multinomial(&[0.5, 0.4], 10, &mut rng).is_err());
    }
}
