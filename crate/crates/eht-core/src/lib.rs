//! Simulation and exact analysis of learning dynamics driven by episodic
//! hypothesis testing in finite normal-form games.
//!
//! Players hold discretized beliefs about each opponent's mixed strategy,
//! play smooth best responses against those beliefs for an epoch, and then
//! test the observed action frequencies against the beliefs. Rejection or
//! spontaneous exploration triggers a belief resample. The induced process
//! over belief profiles is a finite Markov chain; this crate provides both
//! a faithful simulator for that process and exact chain analysis: the
//! unperturbed and idealized perturbed transition matrices, stationary
//! distributions, recurrent classes, transition resistances, stochastic
//! potentials, and the stochastically stable states.
//!
//! Modules:
//! - [`game`]: games, mixed strategies, smooth best responses, utility transforms
//! - [`belief`]: discretized belief simplices, belief profiles, state enumeration
//! - [`testing`]: the frequency test, its threshold, and sample-size bounds
//! - [`dynamics`]: the epoch simulator
//! - [`chain`]: transition matrices, stationary analysis, resistances, potentials
//! - [`trees`]: generic shortest-path and minimum in-tree machinery on digraphs
//! - [`verify`]: parameter certificates and constructive equilibrium checks

pub mod belief;
pub mod chain;
pub mod dynamics;
pub mod game;
pub mod testing;
pub mod trees;
pub mod verify;

pub use belief::{BeliefSets, DistanceMode, StateSpace};
pub use chain::{ErrorModel, ResistanceGraph, TransitionModel};
pub use dynamics::{EpochRecord, Resampler, RunConfig, RunResult};
pub use game::{Game, MixedStrategy, UtilityTransform};
pub use verify::{ConstructiveCheck, EscapeReport, ParameterCertificate, SimpleConditionReport};
