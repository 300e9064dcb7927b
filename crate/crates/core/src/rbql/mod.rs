//! Recursive backwards Q-learning.
//!
//! The agent explores with a model: every observed transition is stored in a
//! [`WorldModel`], walls around each new tile are probed on arrival, and dead
//! ends are left by retracing the trail of exploration moves. When an
//! episode ends, values are propagated backwards from the terminal states
//! through the whole model (see [`propagate_values`]).
//!
//! Within an episode the agent moves by priority:
//!
//! 1. an unexplored action at the current state (actions leading to unknown
//!    tiles before ones leading to known tiles),
//! 2. the greedy action, if the current state has been evaluated,
//! 3. a backtracking step.
//!
//! After the first episode, each episode is an exploration episode with
//! probability ε. Exploration episodes first travel along the model (A*) to
//! a random unexplored state-action pair and take it.

mod model;
mod propagate;

pub use model::{astar_path, look_ahead, select_frontier, Edge, WorldModel};
pub use propagate::{
    bellman_residual, evaluation_order, propagate_values, rbql_update_stochastic, Candidate,
    CONVERGENCE_TOLERANCE,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::maze::{ActionDir, Environment, GridPos, StepOutcome};
use crate::qlearn::{epsilon_at, EpisodeResult, Hyperparams, QTable};
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeKind {
    Exploration,
    Exploitation,
}

/// Training state of one RBQL run.
#[derive(Debug, Clone)]
pub struct RbqlAgent {
    hp: Hyperparams,
    model: WorldModel,
    q: QTable,
    rng: ChaCha8Rng,
    episode: usize,
    next_kind: EpisodeKind,
}

/// Output of [`train_rbql`].
#[derive(Debug, Clone)]
pub struct RbqlRun {
    pub q: QTable,
    pub model: WorldModel,
    pub episodes: Vec<EpisodeResult>,
}

/// Step counting for one episode, enforcing the cap.
struct Episode<'e, E: ?Sized> {
    env: &'e E,
    steps: usize,
    cap: usize,
}

impl<E: Environment + ?Sized> Episode<'_, E> {
    fn step(&mut self, state: GridPos, action: ActionDir) -> Result<StepOutcome> {
        self.steps += 1;
        self.env.step(state, action)
    }

    fn exhausted(&self) -> bool {
        self.steps >= self.cap
    }
}

impl RbqlAgent {
    pub fn new(hp: Hyperparams, seed: u64) -> Result<Self> {
        hp.validate()?;
        Ok(RbqlAgent {
            hp,
            model: WorldModel::new(),
            q: QTable::new(f64::NEG_INFINITY),
            rng: stream_rng(seed, Stream::RbqlPolicy, 0, 0),
            episode: 0,
            // the first episode is a plain discovery walk
            next_kind: EpisodeKind::Exploitation,
        })
    }

    pub fn model(&self) -> &WorldModel {
        &self.model
    }

    pub fn q_table(&self) -> &QTable {
        &self.q
    }

    pub fn episodes_run(&self) -> usize {
        self.episode
    }

    pub fn next_kind(&self) -> EpisodeKind {
        self.next_kind
    }

    /// Forces the kind of the next episode.
    pub fn set_next_kind(&mut self, kind: EpisodeKind) {
        self.next_kind = kind;
    }

    pub fn into_parts(self) -> (QTable, WorldModel) {
        (self.q, self.model)
    }

    /// Runs one episode, re-evaluates the model and draws the next
    /// episode's kind.
    pub fn run_episode<E: Environment + ?Sized>(&mut self, env: &E) -> Result<EpisodeResult> {
        let mut ep = Episode {
            env,
            steps: 0,
            cap: self.hp.step_cap_for(env.state_count()),
        };
        let reached_goal = self.walk(&mut ep)?;
        if !self.model.terminals().is_empty() {
            self.q = propagate_values(&self.model, self.hp.gamma)?;
        }
        let result = EpisodeResult {
            episode: self.episode,
            steps: ep.steps,
            reached_goal,
        };
        self.episode += 1;
        self.next_kind = if self.rng.gen::<f64>() < epsilon_at(self.episode, &self.hp) {
            EpisodeKind::Exploration
        } else {
            EpisodeKind::Exploitation
        };
        Ok(result)
    }

    fn walk<E: Environment + ?Sized>(&mut self, ep: &mut Episode<'_, E>) -> Result<bool> {
        self.model.clear_trail();
        let mut state = ep.env.start();
        if ep.env.is_terminal(state) {
            self.model.mark_terminal(state);
            return Ok(true);
        }
        if self.model.ensure_state(state) {
            ep.steps += look_ahead(ep.env, &mut self.model, state)?;
        }

        if self.next_kind == EpisodeKind::Exploration {
            if let Some((target, action, path)) = self.pick_frontier(state) {
                for a in path {
                    if ep.exhausted() {
                        return Ok(false);
                    }
                    let out = ep.step(state, a)?;
                    self.model.record_transition(state, a, &out)?;
                    state = out.next_state;
                }
                debug_assert_eq!(state, target);
                if ep.exhausted() {
                    return Ok(false);
                }
                let (next, terminal) = self.explore(ep, state, action)?;
                if terminal {
                    return Ok(true);
                }
                state = next;
            }
        }

        while !ep.exhausted() {
            let outcome = if let Some(action) = self.pick_unexplored(state) {
                let (next, terminal) = self.explore(ep, state, action)?;
                (next, terminal)
            } else if let Some(action) = self.pick_greedy(state) {
                self.follow(ep, state, action)?
            } else {
                let action = self.model.backtrack(state)?;
                self.follow(ep, state, action)?
            };
            state = outcome.0;
            if outcome.1 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Takes an unexplored action, records it, extends the trail and probes
    /// the walls of a newly discovered tile.
    fn explore<E: Environment + ?Sized>(
        &mut self,
        ep: &mut Episode<'_, E>,
        state: GridPos,
        action: ActionDir,
    ) -> Result<(GridPos, bool)> {
        let out = ep.step(state, action)?;
        self.model.record_transition(state, action, &out)?;
        if out.wall_hit {
            return Ok((state, false));
        }
        self.model.push_trail(action);
        let next = out.next_state;
        if self.model.ensure_state(next) && !out.terminal {
            ep.steps += look_ahead(ep.env, &mut self.model, next)?;
        }
        Ok((next, out.terminal))
    }

    /// Executes a known move (greedy or backtracking) and records it if the
    /// slot was still empty.
    fn follow<E: Environment + ?Sized>(
        &mut self,
        ep: &mut Episode<'_, E>,
        state: GridPos,
        action: ActionDir,
    ) -> Result<(GridPos, bool)> {
        let out = ep.step(state, action)?;
        self.model.record_transition(state, action, &out)?;
        if self.model.ensure_state(out.next_state) && !out.terminal {
            ep.steps += look_ahead(ep.env, &mut self.model, out.next_state)?;
        }
        Ok((out.next_state, out.terminal))
    }

    fn pick_unexplored(&mut self, state: GridPos) -> Option<ActionDir> {
        let open = self.model.unexplored_actions(state);
        if open.is_empty() {
            return None;
        }
        let unknown: Vec<ActionDir> = open
            .iter()
            .copied()
            .filter(|a| state.offset(*a).is_none_or(|n| !self.model.is_known(n)))
            .collect();
        let pool = if unknown.is_empty() { open } else { unknown };
        Some(pool[self.rng.gen_range(0..pool.len())])
    }

    fn pick_greedy(&mut self, state: GridPos) -> Option<ActionDir> {
        let best = self.q.greedy_actions(state);
        if best.is_empty() {
            None
        } else {
            Some(best[self.rng.gen_range(0..best.len())])
        }
    }

    /// A random frontier pair reachable from `from`, with the route to it.
    fn pick_frontier(&mut self, from: GridPos) -> Option<(GridPos, ActionDir, Vec<ActionDir>)> {
        let mut frontier = self.model.frontier();
        while !frontier.is_empty() {
            let i = self.rng.gen_range(0..frontier.len());
            let (target, action) = frontier[i];
            match astar_path(&self.model, from, target) {
                Ok(path) => return Some((target, action, path)),
                Err(Error::NoPath { .. }) => {
                    frontier.swap_remove(i);
                }
                Err(_) => unreachable!("astar_path only fails with NoPath"),
            }
        }
        None
    }
}

/// Trains an RBQL agent for `episodes` episodes.
pub fn train_rbql<E: Environment + ?Sized>(
    env: &E,
    episodes: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<RbqlRun> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let mut agent = RbqlAgent::new(*hp, seed)?;
    let mut results = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        results.push(agent.run_episode(env)?);
    }
    let (q, model) = agent.into_parts();
    Ok(RbqlRun {
        q,
        model,
        episodes: results,
    })
}

/// Follows the greedy policy of `q` from the start, taking the first maximal
/// action on ties. Returns the number of moves to a terminal, or `None` if
/// the policy gets stuck or exceeds `max_steps`.
pub fn greedy_rollout<E: Environment + ?Sized>(
    env: &E,
    q: &QTable,
    max_steps: usize,
) -> Result<Option<usize>> {
    let mut state = env.start();
    for steps in 1..=max_steps {
        let Some(&action) = q.greedy_actions(state).first() else {
            return Ok(None);
        };
        let out = env.step(state, action)?;
        if out.terminal {
            return Ok(Some(steps));
        }
        state = out.next_state;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::{generate_with_extra_paths, Maze};

    #[test]
    fn corridor_first_episode() {
        let maze = Maze::open(5, 1).unwrap();
        let run = train_rbql(&maze, 1, &Hyperparams::rbql(), 3).unwrap();
        assert!(run.episodes[0].steps >= 4);
        assert!(run.episodes[0].reached_goal);
        assert_eq!(greedy_rollout(&maze, &run.q, 100).unwrap(), Some(4));
    }

    #[test]
    fn replay_is_deterministic() {
        let maze = generate_with_extra_paths(8, 8, 21).unwrap();
        let a = train_rbql(&maze, 15, &Hyperparams::rbql(), 5).unwrap();
        let b = train_rbql(&maze, 15, &Hyperparams::rbql(), 5).unwrap();
        assert_eq!(a.episodes, b.episodes);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn model_is_sound_after_every_episode() {
        let maze = generate_with_extra_paths(7, 7, 8).unwrap();
        let mut agent = RbqlAgent::new(Hyperparams::rbql(), 2).unwrap();
        for _ in 0..10 {
            agent.run_episode(&maze).unwrap();
            for (s, a, e) in agent.model().edges() {
                let out = maze.step(s, a).unwrap();
                assert_eq!((out.next_state, out.reward), (e.next, e.reward));
                if out.wall_hit {
                    assert_eq!((e.next, e.reward), (s, -5));
                }
            }
        }
    }

    #[test]
    fn single_cell_maze_is_already_solved() {
        let maze = Maze::closed(1, 1).unwrap();
        let run = train_rbql(&maze, 2, &Hyperparams::rbql(), 0).unwrap();
        assert!(run.episodes.iter().all(|e| e.reached_goal && e.steps == 0));
    }
}
