//! Coupled planning in the joint configuration space.
//!
//! [`plan`] runs a weighted A* (`f = g + ε·h`) over joint states. Joint
//! moves are generated one agent at a time (operator decomposition), which
//! reaches exactly the joint successors that avoid vertex and swap
//! conflicts while keeping the branching factor at five per node.
//!
//! The objective is sum-of-costs. Waiting on the goal is free until the
//! agent leaves it again, at which point the accumulated waits are charged.
//! With ε = 1 the result is optimal; otherwise its cost is within a factor
//! ε of optimal.

mod oracle;

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

pub use oracle::{brute_force_optimal, MAX_ORACLE_AGENTS};

use crate::error::{Error, Result};
use crate::mapf::{Action, Cell, Instance, Solution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Heuristic inflation, at least 1.
    pub epsilon: f64,
    pub timeout: Duration,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            epsilon: 2.0,
            timeout: Duration::from_millis(12_000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Solved(Solution),
    Timeout,
    Unsolvable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult {
    pub outcome: Outcome,
    pub expanded_nodes: u64,
    pub elapsed: Duration,
}

impl PlannerResult {
    pub fn solution(&self) -> Option<&Solution> {
        match &self.outcome {
            Outcome::Solved(s) => Some(s),
            _ => None,
        }
    }

    /// Sum-of-costs of the solution, if any.
    pub fn cost(&self) -> Option<usize> {
        self.solution().map(Solution::sum_of_costs)
    }
}

/// Upper bound on `states × successors` for the joint reachability check.
const REACHABILITY_BUDGET: u64 = 20_000_000;

/// Per-agent BFS distances to goal, indexed by grid cell.
pub(crate) fn goal_distances(instance: &Instance) -> Vec<Vec<u32>> {
    let grid = &instance.grid;
    instance
        .goal_distance_maps()
        .iter()
        .map(|m| {
            (0..grid.n_cells())
                .map(|k| m.get(grid.cell(k)).unwrap_or(u32::MAX))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Node {
    /// Next cell for agents `< k`, current cell for the rest.
    cells: Vec<u32>,
    /// Cells that agents `< k` are leaving; empty on full joint states.
    prev: Vec<u32>,
    /// Waits on goal not yet charged.
    pending: Vec<u32>,
    k: usize,
    g: u64,
    h: u64,
    parent: Option<usize>,
}

impl Node {
    fn key(&self) -> Vec<u32> {
        let mut key =
            Vec::with_capacity(self.cells.len() * 2 + self.prev.len() + 1);
        key.extend_from_slice(&self.cells);
        key.extend_from_slice(&self.prev);
        key.extend_from_slice(&self.pending);
        key.push(self.k as u32);
        key
    }
}

#[derive(Debug, PartialEq)]
struct Entry_ {
    f: f64,
    h: u64,
    seq: u64,
    node: usize,
}

impl Eq for Entry_ {}

impl Ord for Entry_ {
    // BinaryHeap is a max-heap: reverse so the lowest f, then lowest h,
    // then earliest insertion is popped first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry_ {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn plan(instance: &Instance, config: &PlannerConfig) -> Result<PlannerResult> {
    if !config.epsilon.is_finite() || config.epsilon < 1.0 {
        return Err(Error::contract(format!("epsilon must be >= 1, got {}", config.epsilon)));
    }
    let started = Instant::now();
    let finish = |outcome, expanded_nodes| PlannerResult {
        outcome,
        expanded_nodes,
        elapsed: started.elapsed(),
    };

    if joint_goal_reachable(instance, REACHABILITY_BUDGET) == Some(false) {
        return Ok(finish(Outcome::Unsolvable, 0));
    }

    let grid = &instance.grid;
    let n = instance.n_agents();
    let dist = goal_distances(instance);
    let goals: Vec<u32> = instance.goals.iter().map(|&c| grid.index(c) as u32).collect();
    let neighbors: Vec<Vec<u32>> = (0..grid.n_cells())
        .map(|k| {
            grid.neighbors(grid.cell(k))
                .map(|c| grid.index(c) as u32)
                .collect()
        })
        .collect();

    let start_cells: Vec<u32> = instance.starts.iter().map(|&c| grid.index(c) as u32).collect();
    let h0 = start_cells
        .iter()
        .enumerate()
        .map(|(i, &c)| dist[i][c as usize] as u64)
        .sum();
    let mut nodes = vec![Node {
        cells: start_cells,
        prev: Vec::new(),
        pending: vec![0; n],
        k: 0,
        g: 0,
        h: h0,
        parent: None,
    }];
    // key -> (best node index, closed)
    let mut seen: HashMap<Vec<u32>, (usize, bool)> = HashMap::new();
    seen.insert(nodes[0].key(), (0, false));
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(Entry_ {
        f: config.epsilon * h0 as f64,
        h: h0,
        seq,
        node: 0,
    });

    let mut expanded = 0u64;
    while let Some(entry) = open.pop() {
        let idx = entry.node;
        let key = nodes[idx].key();
        match seen.get_mut(&key) {
            Some((best, closed)) if *best == idx && !*closed => *closed = true,
            _ => continue,
        }
        expanded += 1;
        if expanded.is_multiple_of(1024) && started.elapsed() >= config.timeout {
            return Ok(finish(Outcome::Timeout, expanded));
        }

        let node = &nodes[idx];
        if node.k == 0 && node.cells == goals {
            let solution = reconstruct(&nodes, idx, instance)?;
            debug_assert_eq!(solution.sum_of_costs() as u64, nodes[idx].g);
            return Ok(finish(Outcome::Solved(solution), expanded));
        }

        let agent = node.k;
        let here = node.cells[agent];
        let at_goal = here == goals[agent];
        let options = std::iter::once(here).chain(neighbors[here as usize].iter().copied());
        let mut children = Vec::with_capacity(5);
        for target in options {
            let blocked = (0..agent).any(|j| {
                node.cells[j] == target || (node.prev[j] == target && node.cells[j] == here)
            });
            if blocked {
                continue;
            }
            let mut child = Node {
                cells: node.cells.clone(),
                prev: node.prev.clone(),
                pending: node.pending.clone(),
                k: agent + 1,
                g: node.g,
                h: node.h - dist[agent][here as usize] as u64 + dist[agent][target as usize] as u64,
                parent: Some(idx),
            };
            if target == here {
                if at_goal {
                    child.pending[agent] += 1;
                } else {
                    child.g += 1;
                }
            } else {
                child.g += 1 + child.pending[agent] as u64;
                child.pending[agent] = 0;
            }
            child.cells[agent] = target;
            child.prev.push(here);
            if child.k == n {
                child.k = 0;
                child.prev.clear();
            }
            children.push(child);
        }

        for child in children {
            let key = child.key();
            let (g, h) = (child.g, child.h);
            let child_idx = nodes.len();
            match seen.entry(key) {
                Entry::Occupied(mut e) => {
                    let (best, closed) = *e.get();
                    if closed || nodes[best].g <= g {
                        continue;
                    }
                    e.insert((child_idx, false));
                }
                Entry::Vacant(e) => {
                    e.insert((child_idx, false));
                }
            }
            nodes.push(child);
            seq += 1;
            open.push(Entry_ {
                f: g as f64 + config.epsilon * h as f64,
                h,
                seq,
                node: child_idx,
            });
        }
    }
    // Only reachable when waits on goal cannot accumulate, e.g. no agent
    // can ever stand on its goal.
    Ok(finish(Outcome::Unsolvable, expanded))
}

fn reconstruct(nodes: &[Node], goal: usize, instance: &Instance) -> Result<Solution> {
    let grid = &instance.grid;
    let mut path: Vec<Vec<Cell>> = Vec::new();
    let mut cur = Some(goal);
    while let Some(i) = cur {
        if nodes[i].k == 0 {
            path.push(nodes[i].cells.iter().map(|&c| grid.cell(c as usize)).collect());
        }
        cur = nodes[i].parent;
    }
    path.reverse();
    Solution::from_joint_path(&path)
}

/// Every joint move from `cells` that avoids obstacles, vertex conflicts
/// and swaps. `f` receives the next joint configuration.
pub(crate) fn for_each_joint_successor(
    instance: &Instance,
    cells: &[Cell],
    mut f: impl FnMut(&[Cell]),
) {
    let n = cells.len();
    let options: Vec<Vec<Cell>> = cells
        .iter()
        .map(|&c| {
            Action::ALL
                .iter()
                .map(|&a| c.offset(a))
                .filter(|t| instance.grid.is_free(*t))
                .collect()
        })
        .collect();
    let mut choice = vec![0usize; n];
    let mut next: Vec<Cell> = options.iter().map(|o| o[0]).collect();
    loop {
        let ok = (0..n).all(|i| {
            (0..i).all(|j| {
                next[i] != next[j] && !(next[i] == cells[j] && next[j] == cells[i])
            })
        });
        if ok {
            f(&next);
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                next[i] = options[i][choice[i]];
                break;
            }
            choice[i] = 0;
            next[i] = options[i][0];
            i += 1;
        }
    }
}

/// Whether the goal configuration is reachable in the joint transition
/// system, or `None` when the check would exceed `budget` work units.
pub fn joint_goal_reachable(instance: &Instance, budget: u64) -> Option<bool> {
    let n = instance.n_agents() as u32;
    let free = instance.grid.free_cells().count() as u64;
    let work = free
        .checked_pow(n)
        .and_then(|s| s.checked_mul(5u64.checked_pow(n)?));
    if work.is_none_or(|w| w > budget) {
        return None;
    }
    let mut seen: HashSet<Vec<Cell>> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(instance.starts.clone());
    queue.push_back(instance.starts.clone());
    while let Some(cells) = queue.pop_front() {
        if cells == instance.goals {
            return Some(true);
        }
        for_each_joint_successor(instance, &cells, |next| {
            if !seen.contains(next) {
                seen.insert(next.to_vec());
                queue.push_back(next.to_vec());
            }
        });
    }
    Some(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapf::GridMap;

    fn cfg(epsilon: f64) -> PlannerConfig {
        PlannerConfig { epsilon, ..PlannerConfig::default() }
    }

    #[test]
    fn single_agent_goes_straight_north() {
        let i = Instance::new(GridMap::empty(5, 5).unwrap(), vec![Cell::new(0, 0)], vec![Cell::new(0, 3)])
            .unwrap();
        let r = plan(&i, &cfg(1.0)).unwrap();
        assert_eq!(r.solution().unwrap().plans[0].actions, vec![Action::North; 3]);
    }

    #[test]
    fn corridor_with_pocket_needs_sidestep() {
        // Corridor y = 0, pocket at (2, 1).
        let g = GridMap::from_rows(&[".....", "@@.@@"]).unwrap();
        let i = Instance::new(g, vec![Cell::new(0, 0), Cell::new(4, 0)], vec![Cell::new(4, 0), Cell::new(0, 0)])
            .unwrap();
        let r = plan(&i, &cfg(1.0)).unwrap();
        let s = r.solution().expect("solvable");
        let oracle = brute_force_optimal(&i, 64).unwrap();
        assert_eq!(r.cost(), oracle.cost());
        let cells: Vec<Vec<Cell>> = s.plans.iter().map(|p| p.cells(i.starts[p.agent_id])).collect();
        assert!(cells.iter().any(|c| c.contains(&Cell::new(2, 1))));
        let trace = s.replay(&i, 256).unwrap();
        assert!(trace.success && trace.events.is_empty());
    }

    #[test]
    fn blocked_corridor_is_unsolvable() {
        let g = GridMap::from_rows(&["...."]).unwrap();
        let i = Instance::new(g, vec![Cell::new(0, 0), Cell::new(3, 0)], vec![Cell::new(3, 0), Cell::new(0, 0)])
            .unwrap();
        assert_eq!(plan(&i, &cfg(2.0)).unwrap().outcome, Outcome::Unsolvable);
    }

    #[test]
    fn agents_on_goals_cost_nothing() {
        let i = Instance::new(GridMap::empty(3, 3).unwrap(), vec![Cell::new(0, 0), Cell::new(2, 2)], vec![
            Cell::new(0, 0),
            Cell::new(2, 2),
        ])
        .unwrap();
        let r = plan(&i, &cfg(1.0)).unwrap();
        assert_eq!(r.cost(), Some(0));
        assert_eq!(r.solution().unwrap().makespan(), 0);
    }

    #[test]
    fn leaving_goal_charges_accumulated_waits() {
        // Agent 0 sits on its goal in a dead end that agent 1 must pass
        // through twice; optimal cost includes agent 0's lazily-charged waits.
        let g = GridMap::from_rows(&["....", "@.@@"]).unwrap();
        let c = Cell::new;
        let i = Instance::new(g, vec![c(1, 0), c(0, 0)], vec![c(1, 0), c(3, 0)]).unwrap();
        let r = plan(&i, &cfg(1.0)).unwrap();
        let o = brute_force_optimal(&i, 64).unwrap();
        assert_eq!(r.cost(), o.cost());
        assert!(r.solution().unwrap().replay(&i, 64).unwrap().events.is_empty());
    }

    #[test]
    fn zero_timeout_times_out() {
        let i = Instance::new(
            GridMap::empty(12, 12).unwrap(),
            (0..6).map(|k| Cell::new(k, 0)).collect(),
            (0..6).map(|k| Cell::new(11 - k, 11)).collect(),
        )
        .unwrap();
        let r = plan(&i, &PlannerConfig { epsilon: 1.0, timeout: Duration::ZERO }).unwrap();
        assert_eq!(r.outcome, Outcome::Timeout);
    }

    #[test]
    fn epsilon_below_one_is_rejected() {
        let i = Instance::new(GridMap::empty(2, 2).unwrap(), vec![Cell::new(0, 0)], vec![Cell::new(1, 1)]).unwrap();
        assert!(plan(&i, &cfg(0.5)).is_err());
        assert!(plan(&i, &cfg(f64::NAN)).is_err());
    }

    #[test]
    fn successor_enumeration_excludes_swaps_and_vertex_conflicts() {
        let g = GridMap::from_rows(&["..."]).unwrap();
        let c = Cell::new;
        let i = Instance::new(g, vec![c(0, 0), c(1, 0)], vec![c(1, 0), c(0, 0)]).unwrap();
        let mut seen = Vec::new();
        for_each_joint_successor(&i, &i.starts, |n| seen.push(n.to_vec()));
        assert!(!seen.contains(&vec![c(1, 0), c(0, 0)]));
        assert!(!seen.iter().any(|n| n[0] == n[1]));
        assert!(seen.contains(&vec![c(1, 0), c(2, 0)]));
        assert!(seen.contains(&vec![c(0, 0), c(1, 0)]));
    }
}
