//! The agent's learned world model: a directed graph of observed
//! state-action outcomes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::maze::{ActionDir, Environment, GridPos, StepOutcome};

/// One observed transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub next: GridPos,
    pub reward: i32,
}

impl Edge {
    pub fn is_self_loop(&self, from: GridPos) -> bool {
        self.next == from
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorldModel {
    slots: BTreeMap<GridPos, [Option<Edge>; 4]>,
    terminals: BTreeSet<GridPos>,
    trail: Vec<ActionDir>,
}

impl WorldModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an empty entry for `state`; returns `true` if it was unknown.
    pub fn ensure_state(&mut self, state: GridPos) -> bool {
        if self.slots.contains_key(&state) {
            return false;
        }
        self.slots.insert(state, [None; 4]);
        true
    }

    pub fn mark_terminal(&mut self, state: GridPos) {
        self.ensure_state(state);
        self.terminals.insert(state);
    }

    pub fn is_known(&self, state: GridPos) -> bool {
        self.slots.contains_key(&state)
    }

    pub fn is_terminal(&self, state: GridPos) -> bool {
        self.terminals.contains(&state)
    }

    pub fn terminals(&self) -> &BTreeSet<GridPos> {
        &self.terminals
    }

    pub fn known_states(&self) -> impl Iterator<Item = GridPos> + '_ {
        self.slots.keys().copied()
    }

    pub fn state_count(&self) -> usize {
        self.slots.len()
    }

    pub fn edge(&self, state: GridPos, action: ActionDir) -> Option<Edge> {
        self.slots.get(&state)?[action.ordinal()]
    }

    pub fn successor(&self, state: GridPos, action: ActionDir) -> Option<GridPos> {
        self.edge(state, action).map(|e| e.next)
    }

    pub fn reward(&self, state: GridPos, action: ActionDir) -> Option<i32> {
        self.edge(state, action).map(|e| e.reward)
    }

    pub fn row(&self, state: GridPos) -> Option<&[Option<Edge>; 4]> {
        self.slots.get(&state)
    }

    /// Every recorded `(state, action, edge)`, wall self-loops included.
    pub fn edges(&self) -> impl Iterator<Item = (GridPos, ActionDir, Edge)> + '_ {
        self.slots.iter().flat_map(|(&s, row)| {
            ActionDir::ALL
                .into_iter()
                .filter_map(move |a| row[a.ordinal()].map(|e| (s, a, e)))
        })
    }

    /// Stores the outcome of `action` at `state`. Only the forward direction
    /// is learned. Recording the same outcome twice is a no-op.
    pub fn record_transition(
        &mut self,
        state: GridPos,
        action: ActionDir,
        outcome: &StepOutcome,
    ) -> Result<()> {
        let edge = Edge {
            next: outcome.next_state,
            reward: outcome.reward,
        };
        let slot = &mut self.slots.entry(state).or_insert([None; 4])[action.ordinal()];
        match slot {
            Some(existing) if *existing != edge => {
                return Err(Error::ModelInconsistency { state, action })
            }
            _ => *slot = Some(edge),
        }
        if outcome.terminal {
            self.terminals.insert(outcome.next_state);
            self.ensure_state(outcome.next_state);
        }
        Ok(())
    }

    /// Unexplored action slots of known, non-terminal states.
    pub fn frontier(&self) -> Vec<(GridPos, ActionDir)> {
        self.slots
            .iter()
            .filter(|(s, _)| !self.terminals.contains(s))
            .flat_map(|(&s, row)| {
                ActionDir::ALL
                    .into_iter()
                    .filter(move |a| row[a.ordinal()].is_none())
                    .map(move |a| (s, a))
            })
            .collect()
    }

    pub fn is_fully_explored(&self) -> bool {
        self.slots
            .iter()
            .filter(|(s, _)| !self.terminals.contains(s))
            .all(|(_, row)| row.iter().all(Option::is_some))
    }

    pub fn unexplored_actions(&self, state: GridPos) -> Vec<ActionDir> {
        match self.slots.get(&state) {
            Some(row) if !self.terminals.contains(&state) => ActionDir::ALL
                .into_iter()
                .filter(|a| row[a.ordinal()].is_none())
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn trail(&self) -> &[ActionDir] {
        &self.trail
    }

    pub fn push_trail(&mut self, action: ActionDir) {
        self.trail.push(action);
    }

    pub fn clear_trail(&mut self) {
        self.trail.clear();
    }

    /// Pops the most recent trail action and returns its opposite.
    pub fn backtrack(&mut self, at: GridPos) -> Result<ActionDir> {
        self.trail
            .pop()
            .map(ActionDir::opposite)
            .ok_or(Error::DeadEnd(at))
    }
}

/// Probes every unexplored direction at `state` once. Only wall hits are
/// stored. Returns the number of `step` calls made.
pub fn look_ahead<E: Environment + ?Sized>(
    env: &E,
    model: &mut WorldModel,
    state: GridPos,
) -> Result<usize> {
    model.ensure_state(state);
    let mut probes = 0;
    for action in model.unexplored_actions(state) {
        let outcome = env.step(state, action)?;
        probes += 1;
        if outcome.wall_hit {
            model.record_transition(state, action, &outcome)?;
        }
    }
    Ok(probes)
}

/// A uniformly random unexplored `(state, action)` pair.
pub fn select_frontier<R: Rng + ?Sized>(
    model: &WorldModel,
    rng: &mut R,
) -> Result<(GridPos, ActionDir)> {
    let frontier = model.frontier();
    if frontier.is_empty() {
        return Err(Error::ExplorationComplete);
    }
    Ok(frontier[rng.gen_range(0..frontier.len())])
}

/// Minimum-hop route through recorded, non-wall edges. Manhattan distance
/// guides the search; ties on `f` pop in insertion order.
pub fn astar_path(model: &WorldModel, from: GridPos, to: GridPos) -> Result<Vec<ActionDir>> {
    if from == to {
        return Ok(Vec::new());
    }
    let no_path = || Error::NoPath { from, to };
    if !model.is_known(from) || !model.is_known(to) {
        return Err(no_path());
    }

    let mut g: HashMap<GridPos, usize> = HashMap::from([(from, 0)]);
    let mut came_from: HashMap<GridPos, (GridPos, ActionDir)> = HashMap::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Reverse((from.manhattan(to), seq, from)));

    while let Some(Reverse((_, _, current))) = open.pop() {
        if current == to {
            let mut path = Vec::new();
            let mut at = to;
            while let Some(&(prev, action)) = came_from.get(&at) {
                path.push(action);
                at = prev;
            }
            path.reverse();
            return Ok(path);
        }
        let cost = g[&current];
        let Some(row) = model.row(current) else {
            continue;
        };
        for action in ActionDir::ALL {
            let Some(edge) = row[action.ordinal()] else {
                continue;
            };
            if edge.is_self_loop(current) {
                continue;
            }
            let tentative = cost + 1;
            if g.get(&edge.next).is_none_or(|&old| tentative < old) {
                g.insert(edge.next, tentative);
                came_from.insert(edge.next, (current, action));
                seq += 1;
                open.push(Reverse((
                    tentative + edge.next.manhattan(to),
                    seq,
                    edge.next,
                )));
            }
        }
    }
    Err(no_path())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::Maze;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: usize, y: usize) -> GridPos {
        GridPos::new(x, y)
    }

    #[test]
    fn wall_hit_is_a_self_loop() {
        let maze = Maze::open(3, 3).unwrap();
        let mut m = WorldModel::new();
        let out = maze.step(p(0, 0), ActionDir::Up).unwrap();
        m.record_transition(p(0, 0), ActionDir::Up, &out).unwrap();
        assert_eq!(m.successor(p(0, 0), ActionDir::Up), Some(p(0, 0)));
        assert_eq!(m.reward(p(0, 0), ActionDir::Up), Some(-5));
    }

    #[test]
    fn goal_becomes_terminal_and_edges_are_directed() {
        let maze = Maze::open(2, 1).unwrap();
        let mut m = WorldModel::new();
        let out = maze.step(p(0, 0), ActionDir::Right).unwrap();
        m.record_transition(p(0, 0), ActionDir::Right, &out)
            .unwrap();
        assert!(m.is_terminal(p(1, 0)));
        assert_eq!(m.reward(p(0, 0), ActionDir::Right), Some(10));
        assert_eq!(m.successor(p(1, 0), ActionDir::Left), None);
    }

    #[test]
    fn conflicting_record_is_rejected() {
        let mut m = WorldModel::new();
        let a = StepOutcome {
            next_state: p(1, 0),
            reward: -1,
            terminal: false,
            wall_hit: false,
        };
        m.record_transition(p(0, 0), ActionDir::Right, &a).unwrap();
        m.record_transition(p(0, 0), ActionDir::Right, &a).unwrap();
        let b = StepOutcome {
            next_state: p(0, 0),
            reward: -5,
            terminal: false,
            wall_hit: true,
        };
        assert!(matches!(
            m.record_transition(p(0, 0), ActionDir::Right, &b),
            Err(Error::ModelInconsistency { .. })
        ));
    }

    #[test]
    fn look_ahead_records_only_walls() {
        // 3x3 open grid, middle of the top row: UP is a wall, the rest open.
        let maze = Maze::open(3, 3).unwrap();
        let mut m = WorldModel::new();
        let s = p(1, 0);
        m.ensure_state(s);
        let out = maze.step(s, ActionDir::Down).unwrap();
        m.record_transition(s, ActionDir::Down, &out).unwrap();
        let probes = look_ahead(&maze, &mut m, s).unwrap();
        assert_eq!(probes, 3);
        assert_eq!(m.successor(s, ActionDir::Up), Some(s));
        assert_eq!(m.successor(s, ActionDir::Left), None);
        assert_eq!(m.successor(s, ActionDir::Right), None);

        // corner: two walls among three unexplored
        let c = p(0, 0);
        let out = maze.step(c, ActionDir::Right).unwrap();
        m.record_transition(c, ActionDir::Right, &out).unwrap();
        assert_eq!(look_ahead(&maze, &mut m, c).unwrap(), 3);
        assert_eq!(m.row(c).unwrap().iter().flatten().count(), 3);

        let mut closed = WorldModel::new();
        let walls = Maze::closed(3, 3).unwrap();
        assert_eq!(look_ahead(&walls, &mut closed, p(1, 1)).unwrap(), 4);
        let before = closed.clone();
        assert_eq!(look_ahead(&walls, &mut closed, p(1, 1)).unwrap(), 0);
        assert_eq!(before, closed);
    }

    #[test]
    fn backtrack_unwinds_the_trail() {
        let mut m = WorldModel::new();
        m.push_trail(ActionDir::Right);
        m.push_trail(ActionDir::Up);
        assert_eq!(m.backtrack(p(0, 0)).unwrap(), ActionDir::Down);
        assert_eq!(m.trail(), &[ActionDir::Right]);
        assert_eq!(m.backtrack(p(0, 0)).unwrap(), ActionDir::Left);
        assert!(m.trail().is_empty());
        assert!(matches!(m.backtrack(p(0, 0)), Err(Error::DeadEnd(_))));
    }

    #[test]
    fn dead_end_unwinds_in_trail_length_calls() {
        // junction at (0,0), corridor running right into a dead end at (4,0)
        let maze = Maze::open(5, 2).unwrap();
        let mut m = WorldModel::new();
        let mut s = p(0, 0);
        for _ in 0..4 {
            let out = maze.step(s, ActionDir::Right).unwrap();
            m.record_transition(s, ActionDir::Right, &out).unwrap();
            m.push_trail(ActionDir::Right);
            s = out.next_state;
        }
        let mut calls = 0;
        while s != p(0, 0) {
            let a = m.backtrack(s).unwrap();
            s = maze.step(s, a).unwrap().next_state;
            calls += 1;
        }
        assert_eq!(calls, 4);
        assert!(m.trail().is_empty());
    }

    #[test]
    fn frontier_selection() {
        let mut m = WorldModel::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            select_frontier(&m, &mut rng),
            Err(Error::ExplorationComplete)
        ));
        m.ensure_state(p(0, 0));
        let wall = |s| StepOutcome {
            next_state: s,
            reward: -5,
            terminal: false,
            wall_hit: true,
        };
        for a in [ActionDir::Up, ActionDir::Right, ActionDir::Down] {
            m.record_transition(p(0, 0), a, &wall(p(0, 0))).unwrap();
        }
        assert_eq!(
            select_frontier(&m, &mut rng).unwrap(),
            (p(0, 0), ActionDir::Left)
        );

        m.ensure_state(p(3, 3));
        for a in [ActionDir::Right, ActionDir::Down, ActionDir::Left] {
            m.record_transition(p(3, 3), a, &wall(p(3, 3))).unwrap();
        }
        let mut left = 0;
        for _ in 0..10_000 {
            if select_frontier(&m, &mut rng).unwrap().1 == ActionDir::Left {
                left += 1;
            }
        }
        // binomial(10^4, 0.5): sd = 50
        assert!((left as i64 - 5000).abs() < 250, "{left}");
    }

    #[test]
    fn astar_trivial_cases() {
        let maze = Maze::open(5, 1).unwrap();
        let mut m = WorldModel::new();
        let mut s = p(0, 0);
        m.ensure_state(s);
        assert_eq!(astar_path(&m, s, s).unwrap(), vec![]);
        for _ in 0..4 {
            let out = maze.step(s, ActionDir::Right).unwrap();
            m.record_transition(s, ActionDir::Right, &out).unwrap();
            s = out.next_state;
        }
        assert_eq!(
            astar_path(&m, p(0, 0), p(4, 0)).unwrap(),
            vec![ActionDir::Right; 4]
        );
        assert!(matches!(
            astar_path(&m, p(4, 0), p(0, 0)),
            Err(Error::NoPath { .. })
        ));
    }
}
