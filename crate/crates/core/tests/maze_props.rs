use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use proptest::prelude::*;
use rbql::maze::{
    carve_extra_paths_with_stats, decode_maze, encode_maze, generate_maze,
    generate_with_extra_paths, ActionDir, Environment, GridPos, Maze, REWARD_GOAL, REWARD_STEP,
    REWARD_WALL,
};

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..12, 1usize..12, any::<u64>())
}

/// Dijkstra on the raw wall bits, independent of the maze's own search.
fn oracle_distance(maze: &Maze) -> Option<usize> {
    let (w, h) = (maze.width(), maze.height());
    let tiles = maze.tiles();
    let goal = (w - 1, h - 1);
    let mut best: HashMap<(usize, usize), usize> = HashMap::new();
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0usize, 0usize, 0usize)));
    while let Some(Reverse((d, x, y))) = heap.pop() {
        if best.contains_key(&(x, y)) {
            continue;
        }
        best.insert((x, y), d);
        if (x, y) == goal {
            return Some(d);
        }
        let bits = tiles[y * w + x].bits();
        let moves = [(0u8, 0isize, -1isize), (1, 1, 0), (2, 0, 1), (3, -1, 0)];
        for (bit, dx, dy) in moves {
            if bits & (1 << bit) != 0 {
                continue;
            }
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            heap.push(Reverse((d + 1, nx as usize, ny as usize)));
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoding_round_trips((w, h, seed) in dims()) {
        let maze = generate_with_extra_paths(w, h, seed).unwrap();
        let text = encode_maze(&maze);
        prop_assert_eq!(decode_maze(&text).unwrap(), maze.clone());
        prop_assert_eq!(encode_maze(&decode_maze(&text).unwrap()), text);
    }

    #[test]
    fn generated_maze_is_spanning_tree((w, h, seed) in dims()) {
        let maze = generate_maze(w, h, seed).unwrap();
        prop_assert_eq!(maze.passage_count(), w * h - 1);
        prop_assert_eq!(maze.reachable_count(), w * h);
        prop_assert!(maze.first_inconsistency().is_none());
    }

    #[test]
    fn carving_keeps_border_and_symmetry((w, h, seed) in dims()) {
        let base = generate_maze(w, h, seed).unwrap();
        let (carved, stats) = carve_extra_paths_with_stats(&base, seed ^ 0xA5A5);
        prop_assert_eq!(stats.attempts, w * h / 4);
        prop_assert!(stats.removed <= stats.attempts);
        prop_assert_eq!(carved.passage_count(), w * h - 1 + stats.removed);
        prop_assert!(carved.first_inconsistency().is_none());
        for p in carved.positions() {
            for d in ActionDir::ALL {
                if p.offset(d).is_none_or(|n| !carved.contains(n)) {
                    prop_assert!(carved.tile(p).unwrap().has_wall(d));
                }
            }
        }
    }

    #[test]
    fn step_matches_wall_bits((w, h, seed) in dims(), probes in prop::collection::vec((0usize..12, 0usize..12, 0usize..4), 1..30)) {
        let maze = generate_with_extra_paths(w, h, seed).unwrap();
        for (x, y, d) in probes {
            let s = GridPos::new(x % w, y % h);
            if s == maze.goal() {
                continue;
            }
            let a = ActionDir::from_ordinal(d).unwrap();
            let first = maze.step(s, a).unwrap();
            prop_assert_eq!(first, maze.step(s, a).unwrap());
            prop_assert_eq!(maze.can_move(s, a).unwrap(), !first.wall_hit);
            if first.wall_hit {
                prop_assert_eq!(first.next_state, s);
                prop_assert_eq!(first.reward, REWARD_WALL);
            } else {
                prop_assert_eq!(Some(first.next_state), s.offset(a));
                let expected = if first.next_state == maze.goal() { REWARD_GOAL } else { REWARD_STEP };
                prop_assert_eq!(first.reward, expected);
            }
            prop_assert_eq!(first.terminal, first.next_state == maze.goal());
        }
    }

    #[test]
    fn shortest_path_never_beats_manhattan((w, h, seed) in dims()) {
        let maze = generate_with_extra_paths(w, h, seed).unwrap();
        let d = maze.shortest_path_length().unwrap();
        prop_assert!(d >= w + h - 2);
        prop_assert_eq!(Some(d), oracle_distance(&maze));
    }
}

#[test]
fn shortest_path_agrees_with_dijkstra_on_ten_by_ten() {
    for seed in 0..100 {
        let maze = generate_with_extra_paths(10, 10, seed).unwrap();
        assert_eq!(
            Some(maze.shortest_path_length().unwrap()),
            oracle_distance(&maze),
            "seed {seed}"
        );
    }
}

#[test]
fn environment_trait_matches_inherent_step() {
    let maze = generate_with_extra_paths(6, 4, 9).unwrap();
    let env: &dyn Environment = &maze;
    assert_eq!(env.start(), GridPos::new(0, 0));
    assert_eq!(env.state_count(), 24);
    assert!(env.is_terminal(GridPos::new(5, 3)));
    for s in maze.positions().filter(|&s| s != maze.goal()) {
        for a in ActionDir::ALL {
            assert_eq!(env.step(s, a).unwrap(), maze.step(s, a).unwrap());
        }
    }
}

#[test]
fn same_seed_same_maze() {
    for seed in [0, 1, u64::MAX] {
        assert_eq!(
            generate_with_extra_paths(13, 7, seed).unwrap(),
            generate_with_extra_paths(13, 7, seed).unwrap()
        );
    }
    assert_ne!(
        generate_maze(13, 7, 1).unwrap(),
        generate_maze(13, 7, 2).unwrap()
    );
}
