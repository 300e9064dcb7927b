//! Tabular Q-learning with ε-greedy action selection.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::maze::{ActionDir, Environment, GridPos};
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub alpha: f64,
    pub min_epsilon: f64,
    pub max_epsilon: f64,
    /// Only the magnitude is used: ε always decays.
    pub decay_rate: f64,
    pub q_init: f64,
    /// Per-episode step cap; `None` means `40 · state_count`.
    pub step_cap: Option<usize>,
}

impl Hyperparams {
    pub const fn q_learning() -> Self {
        Hyperparams {
            gamma: 0.9,
            alpha: 0.1,
            min_epsilon: 0.01,
            max_epsilon: 1.0,
            decay_rate: 0.01,
            q_init: -1.0,
            step_cap: None,
        }
    }

    pub const fn rbql() -> Self {
        Hyperparams {
            alpha: 1.0,
            ..Hyperparams::q_learning()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        unit("gamma", self.gamma)?;
        unit("alpha", self.alpha)?;
        unit("min_epsilon", self.min_epsilon)?;
        unit("max_epsilon", self.max_epsilon)?;
        if self.min_epsilon > self.max_epsilon {
            return Err(Error::InvalidArgument(format!(
                "min_epsilon {} exceeds max_epsilon {}",
                self.min_epsilon, self.max_epsilon
            )));
        }
        if !self.decay_rate.is_finite() || !self.q_init.is_finite() {
            return Err(Error::InvalidArgument(
                "decay_rate and q_init must be finite".into(),
            ));
        }
        if self.step_cap == Some(0) {
            return Err(Error::InvalidArgument("step_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn step_cap_for(&self, state_count: usize) -> usize {
        self.step_cap.unwrap_or(10 * state_count * 4)
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams::q_learning()
    }
}

/// Action values per state. States never written read as `default`;
/// terminal states read as zero and ignore writes.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    default: f64,
    values: HashMap<GridPos, [f64; 4]>,
    terminals: HashSet<GridPos>,
}

impl QTable {
    pub fn new(default: f64) -> Self {
        QTable {
            default,
            values: HashMap::new(),
            terminals: HashSet::new(),
        }
    }

    pub fn default_value(&self) -> f64 {
        self.default
    }

    pub fn pin_terminal(&mut self, state: GridPos) {
        self.terminals.insert(state);
        self.values.insert(state, [0.0; 4]);
    }

    pub fn is_terminal(&self, state: GridPos) -> bool {
        self.terminals.contains(&state)
    }

    pub fn row(&self, state: GridPos) -> [f64; 4] {
        self.values
            .get(&state)
            .copied()
            .unwrap_or([self.default; 4])
    }

    pub fn get(&self, state: GridPos, action: ActionDir) -> f64 {
        self.row(state)[action.ordinal()]
    }

    pub fn set(&mut self, state: GridPos, action: ActionDir, value: f64) {
        if self.is_terminal(state) {
            return;
        }
        let default = self.default;
        self.values.entry(state).or_insert([default; 4])[action.ordinal()] = value;
    }

    pub fn set_row(&mut self, state: GridPos, row: [f64; 4]) {
        if !self.is_terminal(state) {
            self.values.insert(state, row);
        }
    }

    /// `max_a Q(state, a)`; zero for terminals.
    pub fn max_value(&self, state: GridPos) -> f64 {
        max_of(&self.row(state))
    }

    /// Actions attaining the row maximum. Empty if nothing is finite.
    pub fn greedy_actions(&self, state: GridPos) -> Vec<ActionDir> {
        let row = self.row(state);
        let best = max_of(&row);
        if !best.is_finite() {
            return Vec::new();
        }
        ActionDir::ALL
            .into_iter()
            .filter(|a| row[a.ordinal()] == best)
            .collect()
    }

    /// States with a stored row, in no particular order.
    pub fn states(&self) -> impl Iterator<Item = GridPos> + '_ {
        self.values.keys().copied()
    }
}

pub(crate) fn max_of(row: &[f64; 4]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeResult {
    pub episode: usize,
    pub steps: usize,
    pub reached_goal: bool,
}

/// `Q(s,a) ← Q(s,a) + α·[r + γ·max_a' Q(s',a') − Q(s,a)]`.
pub fn q_update(
    q: &mut QTable,
    state: GridPos,
    action: ActionDir,
    reward: f64,
    next: GridPos,
    hp: &Hyperparams,
) {
    let current = q.get(state, action);
    let target = reward + hp.gamma * q.max_value(next);
    q.set(state, action, current + hp.alpha * (target - current));
}

pub fn epsilon_at(episode: usize, hp: &Hyperparams) -> f64 {
    hp.min_epsilon
        + (hp.max_epsilon - hp.min_epsilon) * (-hp.decay_rate.abs() * episode as f64).exp()
}

/// ε-greedy with uniform tie-breaking among maximal actions.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    state: GridPos,
    epsilon: f64,
    rng: &mut R,
) -> ActionDir {
    if rng.gen::<f64>() < epsilon {
        return ActionDir::ALL[rng.gen_range(0..4)];
    }
    let best = q.greedy_actions(state);
    if best.is_empty() {
        ActionDir::ALL[rng.gen_range(0..4)]
    } else {
        best[rng.gen_range(0..best.len())]
    }
}

/// Runs one episode from the start state, updating `q` after every step.
/// `choose` picks the action for the current state.
pub fn run_episode<E, F>(
    env: &E,
    q: &mut QTable,
    hp: &Hyperparams,
    episode: usize,
    mut choose: F,
) -> Result<EpisodeResult>
where
    E: Environment + ?Sized,
    F: FnMut(&QTable, GridPos) -> ActionDir,
{
    let cap = hp.step_cap_for(env.state_count());
    let mut state = env.start();
    if env.is_terminal(state) {
        return Ok(EpisodeResult {
            episode,
            steps: 0,
            reached_goal: true,
        });
    }
    let mut steps = 0;
    while steps < cap {
        let action = choose(q, state);
        let outcome = env.step(state, action)?;
        steps += 1;
        if outcome.terminal {
            q.pin_terminal(outcome.next_state);
        }
        q_update(
            q,
            state,
            action,
            outcome.reward as f64,
            outcome.next_state,
            hp,
        );
        state = outcome.next_state;
        if outcome.terminal {
            return Ok(EpisodeResult {
                episode,
                steps,
                reached_goal: true,
            });
        }
    }
    Ok(EpisodeResult {
        episode,
        steps,
        reached_goal: false,
    })
}

/// Q-learning for `episodes` episodes. ε is fixed within an episode and
/// follows [`epsilon_at`] across episodes.
pub fn train_q<E: Environment + ?Sized>(
    env: &E,
    episodes: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(QTable, Vec<EpisodeResult>)> {
    hp.validate()?;
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::QPolicy, 0, 0);
    let mut q = QTable::new(hp.q_init);
    let mut results = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let epsilon = epsilon_at(episode, hp);
        let result = run_episode(env, &mut q, hp, episode, |q, s| {
            select_action(q, s, epsilon, &mut rng)
        })?;
        results.push(result);
    }
    Ok((q, results))
}
