use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

/// Grid coordinate. `x` is the column, `y` the row; North is `y + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, action: Action) -> Cell {
        let (dx, dy) = action.delta();
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
    Wait = 4,
}

impl Action {
    /// Size of the action space.
    pub const COUNT: usize = 5;

    /// Declaration order; also the one-hot index order.
    pub const ALL: [Action; 5] = [
        Action::North,
        Action::South,
        Action::East,
        Action::West,
        Action::Wait,
    ];

    pub const MOVES: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::North => (0, 1),
            Action::South => (0, -1),
            Action::East => (1, 0),
            Action::West => (-1, 0),
            Action::Wait => (0, 0),
        }
    }

    pub fn is_move(self) -> bool {
        self != Action::Wait
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// The action that moves `from` onto the 4-neighbour (or same cell) `to`.
    pub fn between(from: Cell, to: Cell) -> Option<Action> {
        Action::ALL.into_iter().find(|a| from.offset(*a) == to)
    }

    /// One-character code used by the plan text format.
    pub fn symbol(self) -> char {
        match self {
            Action::North => 'N',
            Action::South => 'S',
            Action::East => 'E',
            Action::West => 'W',
            Action::Wait => '.',
        }
    }

    pub fn from_symbol(c: char) -> Option<Action> {
        match c {
            'N' => Some(Action::North),
            'S' => Some(Action::South),
            'E' => Some(Action::East),
            'W' => Some(Action::West),
            '.' => Some(Action::Wait),
            _ => None,
        }
    }
}

/// Static world: a `width × height` array of free and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    width: usize,
    height: usize,
    obstacles: Vec<bool>,
}

impl GridMap {
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::from_obstacles(width, height, vec![false; width * height])
    }

    /// `obstacles` is row-major with row 0 at `y = 0`.
    pub fn from_obstacles(width: usize, height: usize, obstacles: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract(format!(
                "grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if obstacles.len() != width * height {
            return Err(Error::contract(format!(
                "grid {width}x{height} needs {} cells, got {}",
                width * height,
                obstacles.len()
            )));
        }
        if width > i32::MAX as usize || height > i32::MAX as usize {
            return Err(Error::contract("grid dimensions overflow i32"));
        }
        Ok(GridMap {
            width,
            height,
            obstacles,
        })
    }

    /// Parses rows of `.` (free) and `@` (obstacle); `rows[0]` is `y = 0`.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut obstacles = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != width {
                return Err(Error::contract(format!("row {y} has inconsistent width")));
            }
            for c in row.chars() {
                match c {
                    '.' => obstacles.push(false),
                    '@' => obstacles.push(true),
                    other => {
                        return Err(Error::contract(format!(
                            "row {y}: unexpected map character {other:?}"
                        )))
                    }
                }
            }
        }
        Self::from_obstacles(width, height, obstacles)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.obstacles.len()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacles[self.index(c)]
    }

    /// In bounds and not an obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.obstacles[self.index(c)]
    }

    pub fn obstacle_count(&self) -> usize {
        self.obstacles.iter().filter(|&&o| o).count()
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_cells())
            .filter(|&i| !self.obstacles[i])
            .map(|i| self.cell(i))
    }

    /// Free 4-neighbours of `c`, in `Action::MOVES` order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Action::MOVES
            .into_iter()
            .map(move |a| c.offset(a))
            .filter(|n| self.is_free(*n))
    }

    /// Breadth-first distances from `source` to every cell; `None` marks
    /// obstacles and unreachable cells.
    pub fn distance_map(&self, source: Cell) -> DistanceMap {
        let mut dist = vec![None; self.n_cells()];
        if !self.is_free(source) {
            return DistanceMap { dist, width: self.width, height: self.height };
        }
        let mut queue = VecDeque::new();
        dist[self.index(source)] = Some(0);
        queue.push_back(source);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.index(c)].unwrap();
            for n in self.neighbors(c) {
                let slot = &mut dist[self.index(n)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        DistanceMap { dist, width: self.width, height: self.height }
    }

    pub fn render_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| if self.obstacles[y * self.width + x] { '@' } else { '.' })
                    .collect()
            })
            .collect()
    }
}

/// Precomputed BFS distances to (or from) one cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    dist: Vec<Option<u32>>,
    width: usize,
    height: usize,
}

impl DistanceMap {
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width || c.y as usize >= self.height {
            return None;
        }
        self.dist[c.y as usize * self.width + c.x as usize]
    }
}

/// Length of the shortest 4-connected path through free cells, or `None`
/// when `to` is unreachable.
pub fn shortest_path_distance(grid: &GridMap, from: Cell, to: Cell) -> Result<Option<u32>> {
    for c in [from, to] {
        if !grid.is_free(c) {
            return Err(Error::contract(format!("{c} is not a free cell")));
        }
    }
    Ok(grid.distance_map(from).get(to))
}

/// A MAPF problem: a grid plus one start and one goal per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub grid: GridMap,
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
}

impl Instance {
    pub fn new(grid: GridMap, starts: Vec<Cell>, goals: Vec<Cell>) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::contract("instance needs at least one agent"));
        }
        if starts.len() != goals.len() {
            return Err(Error::contract(format!(
                "{} starts but {} goals",
                starts.len(),
                goals.len()
            )));
        }
        for (what, cells) in [("start", &starts), ("goal", &goals)] {
            for (i, c) in cells.iter().enumerate() {
                if !grid.is_free(*c) {
                    return Err(Error::contract(format!("{what} of agent {i} at {c} is not free")));
                }
                if cells[..i].contains(c) {
                    return Err(Error::contract(format!("duplicate {what} {c} for agent {i}")));
                }
            }
        }
        for (i, (s, g)) in starts.iter().zip(&goals).enumerate() {
            if grid.distance_map(*g).get(*s).is_none() {
                return Err(Error::contract(format!(
                    "goal {g} of agent {i} is unreachable from {s}"
                )));
            }
        }
        Ok(Instance { grid, starts, goals })
    }

    pub fn n_agents(&self) -> usize {
        self.starts.len()
    }

    /// One BFS distance map per agent, rooted at its goal.
    pub fn goal_distance_maps(&self) -> Vec<DistanceMap> {
        self.goals.iter().map(|g| self.grid.distance_map(*g)).collect()
    }
}
