//! Recursive backwards Q-learning (RBQL) and a tabular Q-learning baseline
//! on randomly generated grid-world mazes.
//!
//! The crate is split along the experiment pipeline:
//!
//! - [`maze`]: maze generation, the deterministic `step` environment and the
//!   hex text format.
//! - [`qlearn`]: the baseline Q-learning agent and its ε schedule.
//! - [`rbql`]: the model-building agent that propagates values backwards
//!   from terminal states after every episode.
//! - [`bench`]: batched runs, trimmed statistics, CSV and SVG outputs.

pub mod bench;
pub mod error;
pub mod maze;
pub mod qlearn;
pub mod rbql;
pub mod seed;

pub use error::{Error, Result};
pub use maze::{ActionDir, Environment, GridPos, Maze, StepOutcome, TileId};
pub use qlearn::{EpisodeResult, Hyperparams, QTable};
pub use rbql::{RbqlAgent, WorldModel};
