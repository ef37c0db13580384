//! Repeated two-player matrix games: enforceable bargaining solutions, the
//! LAFF expert controller, a zoo of opponents, average-reward benchmarks and
//! the tournament / replicator evaluation pipeline.

pub mod bargaining;
pub mod engine;
pub mod evaluation;
pub mod experts;
pub mod games;
pub mod io;
pub mod laff;
pub mod lp;
pub mod matrix_game;
pub mod mdp;
pub mod opponents;

pub use bargaining::{EnforceParams, JointAction, PairSolution, SolutionKind, Tuning};
pub use laff::{LaffAgent, LaffController};
pub use matrix_game::{BimatrixGame, GameError, MixedStrategy, Player};
