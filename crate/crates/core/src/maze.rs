//! Grid-world maze environment.
//!
//! Each tile is a four-bit wall flag: bit `d` set means a wall on the side
//! given by the [`ActionDir`] with ordinal `d`. The agent starts at `(0, 0)`
//! and the single terminal state is the opposite corner.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{stream_rng, Stream};

pub const REWARD_STEP: i32 = -1;
pub const REWARD_WALL: i32 = -5;
pub const REWARD_GOAL: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub x: usize,
    pub y: usize,
}

impl GridPos {
    pub const fn new(x: usize, y: usize) -> Self {
        GridPos { x, y }
    }

    /// Neighbouring coordinate, or `None` when it would leave the
    /// non-negative quadrant. Upper bounds are the maze's concern.
    pub fn offset(self, dir: ActionDir) -> Option<GridPos> {
        let (dx, dy) = dir.delta();
        Some(GridPos {
            x: self.x.checked_add_signed(dx)?,
            y: self.y.checked_add_signed(dy)?,
        })
    }

    pub fn manhattan(self, other: GridPos) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionDir {
    Up = 0,
    Right = 1,
    Down = 2,
    Left = 3,
}

impl ActionDir {
    pub const ALL: [ActionDir; 4] = [
        ActionDir::Up,
        ActionDir::Right,
        ActionDir::Down,
        ActionDir::Left,
    ];

    pub const fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<ActionDir> {
        ActionDir::ALL.get(ordinal).copied()
    }

    pub const fn opposite(self) -> ActionDir {
        match self {
            ActionDir::Up => ActionDir::Down,
            ActionDir::Right => ActionDir::Left,
            ActionDir::Down => ActionDir::Up,
            ActionDir::Left => ActionDir::Right,
        }
    }

    /// `(dx, dy)` with `y` growing downwards.
    pub const fn delta(self) -> (isize, isize) {
        match self {
            ActionDir::Up => (0, -1),
            ActionDir::Right => (1, 0),
            ActionDir::Down => (0, 1),
            ActionDir::Left => (-1, 0),
        }
    }

    pub const fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Four-bit wall flag of a single tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileId(u8);

impl TileId {
    pub const OPEN: TileId = TileId(0);
    pub const CLOSED: TileId = TileId(0b1111);

    pub fn new(bits: u8) -> Option<TileId> {
        (bits < 16).then_some(TileId(bits))
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn has_wall(self, dir: ActionDir) -> bool {
        self.0 & dir.bit() != 0
    }

    /// `(!id & 2^d) != 0`, masked to the four flag bits.
    pub const fn is_open(self, dir: ActionDir) -> bool {
        (!self.0 & 0x0f) & dir.bit() != 0
    }

    const fn with_wall(self, dir: ActionDir) -> TileId {
        TileId(self.0 | dir.bit())
    }

    const fn without_wall(self, dir: ActionDir) -> TileId {
        TileId(self.0 & !dir.bit())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next_state: GridPos,
    pub reward: i32,
    pub terminal: bool,
    pub wall_hit: bool,
}

/// The agent-facing side of an episodic task.
pub trait Environment {
    fn start(&self) -> GridPos;
    fn step(&self, state: GridPos, action: ActionDir) -> Result<StepOutcome>;
    fn is_terminal(&self, state: GridPos) -> bool;
    /// Number of states; used to size step caps.
    fn state_count(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Maze {
    width: usize,
    height: usize,
    tiles: Vec<TileId>,
}

/// What [`carve_extra_paths_with_stats`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarveStats {
    pub attempts: usize,
    pub removed: usize,
}

impl Maze {
    /// A maze with only its border walls.
    pub fn open(width: usize, height: usize) -> Result<Maze> {
        check_dims(width, height)?;
        let mut maze = Maze {
            width,
            height,
            tiles: vec![TileId::OPEN; width * height],
        };
        for y in 0..height {
            for x in 0..width {
                let pos = GridPos::new(x, y);
                for dir in ActionDir::ALL {
                    if maze.neighbor(pos, dir).is_none() {
                        let i = maze.index(pos);
                        maze.tiles[i] = maze.tiles[i].with_wall(dir);
                    }
                }
            }
        }
        Ok(maze)
    }

    /// A maze with every wall present.
    pub fn closed(width: usize, height: usize) -> Result<Maze> {
        check_dims(width, height)?;
        Ok(Maze {
            width,
            height,
            tiles: vec![TileId::CLOSED; width * height],
        })
    }

    /// Builds a maze from row-major tiles, validating borders and wall symmetry.
    pub fn from_tiles(width: usize, height: usize, tiles: Vec<TileId>) -> Result<Maze> {
        check_dims(width, height)?;
        if tiles.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} tiles, got {}",
                width * height,
                tiles.len()
            )));
        }
        let maze = Maze {
            width,
            height,
            tiles,
        };
        if let Some((pos, dir)) = maze.first_inconsistency() {
            return Err(Error::InvalidArgument(format!(
                "wall {dir:?} of tile {pos} is inconsistent with its neighbour"
            )));
        }
        Ok(maze)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> GridPos {
        GridPos::new(0, 0)
    }

    pub fn goal(&self) -> GridPos {
        GridPos::new(self.width - 1, self.height - 1)
    }

    pub fn contains(&self, pos: GridPos) -> bool {
        pos.x < self.width && pos.y < self.height
    }

    pub fn tiles(&self) -> &[TileId] {
        &self.tiles
    }

    pub fn tile(&self, pos: GridPos) -> Result<TileId> {
        self.check_pos(pos)?;
        Ok(self.tiles[self.index(pos)])
    }

    /// In-bounds neighbour in `dir`, ignoring walls.
    pub fn neighbor(&self, pos: GridPos, dir: ActionDir) -> Option<GridPos> {
        pos.offset(dir).filter(|p| self.contains(*p))
    }

    pub fn can_move(&self, pos: GridPos, dir: ActionDir) -> Result<bool> {
        Ok(self.tile(pos)?.is_open(dir))
    }

    /// Applies `action` from `state`. Pure: equal inputs give equal outputs.
    pub fn step(&self, state: GridPos, action: ActionDir) -> Result<StepOutcome> {
        self.check_pos(state)?;
        if state == self.goal() {
            return Err(Error::StepFromTerminal(state));
        }
        if !self.tiles[self.index(state)].is_open(action) {
            return Ok(StepOutcome {
                next_state: state,
                reward: REWARD_WALL,
                terminal: false,
                wall_hit: true,
            });
        }
        // Open sides always have an in-bounds neighbour: borders are walled.
        let next = self
            .neighbor(state, action)
            .expect("open side on the maze border");
        let terminal = next == self.goal();
        Ok(StepOutcome {
            next_state: next,
            reward: if terminal { REWARD_GOAL } else { REWARD_STEP },
            terminal,
            wall_hit: false,
        })
    }

    /// Open neighbours of `pos`.
    pub fn passages(&self, pos: GridPos) -> impl Iterator<Item = (ActionDir, GridPos)> + '_ {
        let tile = self.tiles[self.index(pos)];
        ActionDir::ALL
            .into_iter()
            .filter(move |d| tile.is_open(*d))
            .filter_map(move |d| self.neighbor(pos, d).map(|n| (d, n)))
    }

    /// Number of removed interior walls, each counted once.
    pub fn passage_count(&self) -> usize {
        self.positions()
            .map(|p| {
                let tile = self.tiles[self.index(p)];
                [ActionDir::Right, ActionDir::Down]
                    .into_iter()
                    .filter(|d| tile.is_open(*d) && self.neighbor(p, *d).is_some())
                    .count()
            })
            .sum()
    }

    /// Cells reachable from the start through open passages.
    pub fn reachable_count(&self) -> usize {
        self.bfs_distances(self.start())
            .iter()
            .filter(|d| d.is_some())
            .count()
    }

    /// Length of a shortest start→goal path.
    pub fn shortest_path_length(&self) -> Result<usize> {
        let dist = self.bfs_distances(self.start());
        dist[self.index(self.goal())].ok_or(Error::UnreachableGoal)
    }

    /// Breadth-first move counts from `from` to every cell.
    pub fn bfs_distances(&self, from: GridPos) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.tiles.len()];
        let mut queue = VecDeque::new();
        dist[self.index(from)] = Some(0);
        queue.push_back(from);
        while let Some(pos) = queue.pop_front() {
            let d = dist[self.index(pos)].unwrap_or_default();
            for (_, next) in self.passages(pos) {
                let i = self.index(next);
                if dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    /// First tile whose wall record disagrees with its neighbour or leaves
    /// the border open.
    pub fn first_inconsistency(&self) -> Option<(GridPos, ActionDir)> {
        for pos in self.positions() {
            let tile = self.tiles[self.index(pos)];
            for dir in ActionDir::ALL {
                match self.neighbor(pos, dir) {
                    None if !tile.has_wall(dir) => return Some((pos, dir)),
                    Some(n)
                        if self.tiles[self.index(n)].has_wall(dir.opposite())
                            != tile.has_wall(dir) =>
                    {
                        return Some((pos, dir))
                    }
                    _ => {}
                }
            }
        }
        None
    }

    pub fn positions(&self) -> impl Iterator<Item = GridPos> {
        let w = self.width;
        (0..self.width * self.height).map(move |i| GridPos::new(i % w, i / w))
    }

    fn remove_wall(&mut self, pos: GridPos, dir: ActionDir) -> bool {
        let Some(next) = self.neighbor(pos, dir) else {
            return false;
        };
        let (i, j) = (self.index(pos), self.index(next));
        if !self.tiles[i].has_wall(dir) {
            return false;
        }
        self.tiles[i] = self.tiles[i].without_wall(dir);
        self.tiles[j] = self.tiles[j].without_wall(dir.opposite());
        true
    }

    fn index(&self, pos: GridPos) -> usize {
        pos.y * self.width + pos.x
    }

    fn check_pos(&self, pos: GridPos) -> Result<()> {
        if self.contains(pos) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                pos,
                width: self.width,
                height: self.height,
            })
        }
    }
}

impl Environment for Maze {
    fn start(&self) -> GridPos {
        Maze::start(self)
    }

    fn step(&self, state: GridPos, action: ActionDir) -> Result<StepOutcome> {
        Maze::step(self, state, action)
    }

    fn is_terminal(&self, state: GridPos) -> bool {
        state == self.goal()
    }

    fn state_count(&self) -> usize {
        self.width * self.height
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "maze dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Perfect maze via a randomized depth-first (recursive backtracker) walk,
/// run with an explicit stack.
pub fn generate_maze(width: usize, height: usize, seed: u64) -> Result<Maze> {
    let mut maze = Maze::closed(width, height)?;
    let mut rng = stream_rng(seed, Stream::MazeGeneration, 0, 0);
    let mut visited = vec![false; width * height];

    let first = GridPos::new(rng.gen_range(0..width), rng.gen_range(0..height));
    visited[maze.index(first)] = true;
    let mut stack = vec![first];

    while let Some(&current) = stack.last() {
        let mut options = [ActionDir::Up; 4];
        let mut n = 0;
        for dir in ActionDir::ALL {
            if let Some(next) = maze.neighbor(current, dir) {
                if !visited[maze.index(next)] {
                    options[n] = dir;
                    n += 1;
                }
            }
        }
        if n == 0 {
            stack.pop();
            continue;
        }
        let dir = options[rng.gen_range(0..n)];
        let next = maze.neighbor(current, dir).expect("checked above");
        maze.remove_wall(current, dir);
        visited[maze.index(next)] = true;
        stack.push(next);
    }
    Ok(maze)
}

/// Opens alternative routes: `floor(w·h/4)` attempts, each at a uniform
/// position and direction. Border walls are never removed.
pub fn carve_extra_paths(maze: &Maze, seed: u64) -> Maze {
    carve_extra_paths_with_stats(maze, seed).0
}

pub fn carve_extra_paths_with_stats(maze: &Maze, seed: u64) -> (Maze, CarveStats) {
    let mut carved = maze.clone();
    let mut rng = stream_rng(seed, Stream::Carving, 0, 0);
    let attempts = maze.width * maze.height / 4;
    let mut removed = 0;
    for _ in 0..attempts {
        let pos = GridPos::new(rng.gen_range(0..maze.width), rng.gen_range(0..maze.height));
        let dir = ActionDir::ALL[rng.gen_range(0..4)];
        if carved.remove_wall(pos, dir) {
            removed += 1;
        }
    }
    (carved, CarveStats { attempts, removed })
}

/// Generation followed by carving, both driven by `seed`.
pub fn generate_with_extra_paths(width: usize, height: usize, seed: u64) -> Result<Maze> {
    Ok(carve_extra_paths(
        &generate_maze(width, height, seed)?,
        seed,
    ))
}

/// `"w h\n"` followed by one line of uppercase hex tile ids per row.
pub fn encode_maze(maze: &Maze) -> String {
    let mut out = String::with_capacity((maze.width + 1) * maze.height + 16);
    out.push_str(&format!("{} {}\n", maze.width, maze.height));
    for row in maze.tiles.chunks(maze.width) {
        for tile in row {
            out.push(
                char::from_digit(tile.bits() as u32, 16)
                    .unwrap()
                    .to_ascii_uppercase(),
            );
        }
        out.push('\n');
    }
    out
}

pub fn decode_maze(text: &str) -> Result<Maze> {
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        line,
        column,
        message,
    };
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or_default();
    let mut fields = header.split(' ');
    let mut dim = |column: usize, name: &str| -> Result<usize> {
        let field = fields
            .next()
            .ok_or_else(|| parse_err(1, column, format!("missing {name}")))?;
        match field.parse::<usize>() {
            Ok(v) if v >= 1 && field.bytes().all(|b| b.is_ascii_digit()) => Ok(v),
            _ => Err(parse_err(1, column, format!("invalid {name} {field:?}"))),
        }
    };
    let width = dim(1, "width")?;
    let height = dim(header.find(' ').map_or(1, |i| i + 2), "height")?;
    if fields.next().is_some() {
        return Err(parse_err(1, header.len(), "trailing data in header".into()));
    }

    let mut tiles = Vec::with_capacity(width * height);
    for row in 0..height {
        let line_no = row + 2;
        let line = lines
            .next()
            .filter(|l| !(l.is_empty() && width > 0))
            .ok_or_else(|| parse_err(line_no, 1, format!("expected {height} tile rows")))?;
        let mut count = 0;
        for (col, ch) in line.chars().enumerate() {
            if col >= width {
                return Err(parse_err(
                    line_no,
                    col + 1,
                    format!("row longer than width {width}"),
                ));
            }
            let bits = match ch {
                '0'..='9' | 'A'..='F' => ch.to_digit(16).unwrap() as u8,
                _ => {
                    return Err(parse_err(
                        line_no,
                        col + 1,
                        format!("invalid tile digit {ch:?}"),
                    ))
                }
            };
            tiles.push(TileId(bits));
            count += 1;
        }
        if count != width {
            return Err(parse_err(
                line_no,
                count + 1,
                format!("row has {count} tiles, expected {width}"),
            ));
        }
    }
    match (lines.next(), lines.next()) {
        (Some(""), None) | (None, None) => {}
        _ => {
            return Err(parse_err(
                height + 2,
                1,
                "unexpected data after the last row".into(),
            ))
        }
    }

    let maze = Maze {
        width,
        height,
        tiles,
    };
    if let Some((pos, dir)) = maze.first_inconsistency() {
        let message = if maze.neighbor(pos, dir).is_none() {
            format!("border wall {dir:?} missing")
        } else {
            format!("wall {dir:?} not mirrored by the neighbouring tile")
        };
        return Err(parse_err(pos.y + 2, pos.x + 1, message));
    }
    Ok(maze)
}
