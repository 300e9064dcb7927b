//! Backward value propagation over the world model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::maze::{ActionDir, GridPos};
use crate::qlearn::{max_of, QTable};

use super::model::WorldModel;

/// Sweeps stop once no value moves by more than this.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100_000;

/// Evaluates every state that can reach a terminal through recorded edges.
///
/// States are visited breadth-first from the terminals over the reversed
/// graph, each exactly once, applying `Q(s,a) = r(s,a) + γ·max_a' Q(s',a')`
/// to all recorded slots. The BFS pass already fixes the greedy values;
/// slots pointing away from the goal can read neighbours that were not yet
/// final, so the pass is followed by sweeps in the same order until the
/// table stops changing.
///
/// Unrecorded slots, and states that cannot reach a terminal, stay at
/// `-inf`; terminal rows are pinned to zero.
pub fn propagate_values(model: &WorldModel, gamma: f64) -> Result<QTable> {
    let order = evaluation_order(model)?;
    let mut q = QTable::new(f64::NEG_INFINITY);
    for &t in model.terminals() {
        q.pin_terminal(t);
    }
    for &s in &order {
        q.set_row(s, backup_row(model, &q, s, gamma));
    }
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for &s in &order {
            let old = q.row(s);
            let new = backup_row(model, &q, s, gamma);
            for (a, b) in old.iter().zip(&new) {
                if a != b {
                    delta = delta.max((a - b).abs());
                }
            }
            q.set_row(s, new);
        }
        if delta <= CONVERGENCE_TOLERANCE {
            break;
        }
    }
    Ok(q)
}

/// Non-terminal states in breadth-first order from the terminals, following
/// recorded edges backwards. Wall self-loops are not traversed.
pub fn evaluation_order(model: &WorldModel) -> Result<Vec<GridPos>> {
    if model.terminals().is_empty() {
        return Err(Error::NotReady);
    }
    let mut predecessors: BTreeMap<GridPos, Vec<GridPos>> = BTreeMap::new();
    for (s, _, edge) in model.edges() {
        if !edge.is_self_loop(s) {
            predecessors.entry(edge.next).or_default().push(s);
        }
    }
    let mut seen: BTreeSet<GridPos> = model.terminals().clone();
    let mut queue: VecDeque<GridPos> = model.terminals().iter().copied().collect();
    let mut order = Vec::new();
    while let Some(s) = queue.pop_front() {
        if !model.is_terminal(s) {
            order.push(s);
        }
        for &pred in predecessors.get(&s).into_iter().flatten() {
            if seen.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    Ok(order)
}

/// One Bellman backup of every recorded slot at `state`, reading the current
/// table. Self-loops are evaluated last so they see the updated row.
fn backup_row(model: &WorldModel, q: &QTable, state: GridPos, gamma: f64) -> [f64; 4] {
    let mut row = [f64::NEG_INFINITY; 4];
    let Some(slots) = model.row(state) else {
        return row;
    };
    let mut loops = Vec::new();
    for a in ActionDir::ALL {
        match slots[a.ordinal()] {
            Some(edge) if edge.is_self_loop(state) => loops.push((a, edge.reward)),
            Some(edge) => {
                row[a.ordinal()] = edge.reward as f64 + gamma * q.max_value(edge.next);
            }
            None => {}
        }
    }
    let best = max_of(&row);
    for (a, reward) in loops {
        row[a.ordinal()] = reward as f64 + gamma * best;
    }
    row
}

/// Largest `|Q(s,a) − (r + γ·max Q(s',·))|` over recorded slots of evaluated
/// states.
pub fn bellman_residual(model: &WorldModel, q: &QTable, gamma: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (s, a, edge) in model.edges() {
        let value = q.get(s, a);
        if !value.is_finite() {
            continue;
        }
        let target = edge.reward as f64 + gamma * q.max_value(edge.next);
        worst = worst.max((value - target).abs());
    }
    worst
}

/// One possible outcome of an action in a stochastic environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Action values of the successor state.
    pub q_row: [f64; 4],
    pub reward: f64,
    pub probability: f64,
}

/// Expected backup `Σ_s (R_s + γ·max_a Q(s,a)) · p_s`.
pub fn rbql_update_stochastic(candidates: &[Candidate], gamma: f64) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate successors".into()));
    }
    if candidates
        .iter()
        .any(|c| c.probability.is_nan() || c.probability < 0.0)
    {
        return Err(Error::InvalidArgument(
            "probabilities must be nonnegative".into(),
        ));
    }
    let total: f64 = candidates.iter().map(|c| c.probability).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    let term = |c: &Candidate| (c.reward + gamma * max_of(&c.q_row)) * c.probability;
    let (first, rest) = candidates.split_first().expect("non-empty");
    Ok(rest.iter().fold(term(first), |acc, c| acc + term(c)))
}
