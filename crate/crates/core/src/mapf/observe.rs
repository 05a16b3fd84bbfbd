use crate::error::{Error, Result};
use crate::mapf::grid::{Cell, Instance};
use crate::mapf::sim::SimState;

pub const DEFAULT_FOV: usize = 11;

pub const CHANNEL_OBSTACLES: usize = 0;
pub const CHANNEL_AGENTS: usize = 1;
pub const CHANNEL_OWN_GOAL: usize = 2;
pub const CHANNEL_OTHER_GOALS: usize = 3;

/// Local view of one agent.
///
/// Spatial channels are `fov × fov`, row-major. Row `r`, column `c` covers
/// the cell `(x - fov/2 + c, y - fov/2 + r)` around the observer at `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub fov: usize,
    /// Four channels of `fov * fov` flags each.
    pub spatial: [Vec<bool>; 4],
    /// Unit vector towards the goal; `(0, 0)` on the goal.
    pub goal_direction: (f32, f32),
    /// Manhattan distance to the goal, in cells.
    pub goal_distance: f32,
}

impl Observation {
    pub fn get(&self, channel: usize, row: usize, col: usize) -> bool {
        self.spatial[channel][row * self.fov + col]
    }
}

/// Unit vector from `from` to `to`, or `(0, 0)` when they coincide.
pub fn goal_direction(from: Cell, to: Cell) -> (f32, f32) {
    let dx = (to.x - from.x) as f64;
    let dy = (to.y - from.y) as f64;
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        (0.0, 0.0)
    } else {
        ((dx / norm) as f32, (dy / norm) as f32)
    }
}

pub fn observe(state: &SimState, instance: &Instance, agent: usize, fov: usize) -> Result<Observation> {
    if fov < 3 || fov.is_multiple_of(2) {
        return Err(Error::contract(format!("fov must be odd and >= 3, got {fov}")));
    }
    if agent >= state.positions.len() {
        return Err(Error::contract(format!("agent {agent} out of range")));
    }
    let grid = &instance.grid;
    let me = state.positions[agent];
    let half = (fov / 2) as i32;
    let origin = Cell::new(me.x - half, me.y - half);
    let slot = |c: Cell| -> Option<usize> {
        let (col, row) = (c.x - origin.x, c.y - origin.y);
        let span = 0..fov as i32;
        (span.contains(&col) && span.contains(&row)).then(|| row as usize * fov + col as usize)
    };

    let mut spatial: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; fov * fov]);
    for row in 0..fov {
        for col in 0..fov {
            let c = Cell::new(origin.x + col as i32, origin.y + row as i32);
            spatial[CHANNEL_OBSTACLES][row * fov + col] = !grid.in_bounds(c) || grid.is_obstacle(c);
        }
    }
    for (j, (&p, &g)) in state.positions.iter().zip(&instance.goals).enumerate() {
        if j == agent {
            if let Some(k) = slot(g) {
                spatial[CHANNEL_OWN_GOAL][k] = true;
            }
            continue;
        }
        if let Some(k) = slot(p) {
            spatial[CHANNEL_AGENTS][k] = true;
        }
        if let Some(k) = slot(g) {
            spatial[CHANNEL_OTHER_GOALS][k] = true;
        }
    }

    let goal = instance.goals[agent];
    Ok(Observation {
        fov,
        spatial,
        goal_direction: goal_direction(me, goal),
        goal_distance: me.manhattan(goal) as f32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapf::grid::GridMap;

    fn single(w: usize, start: Cell, goal: Cell) -> (SimState, Instance) {
        let i = Instance::new(GridMap::empty(w, w).unwrap(), vec![start], vec![goal]).unwrap();
        (SimState::initial(&i), i)
    }

    #[test]
    fn at_goal_has_zero_direction_and_distance() {
        let (s, i) = single(5, Cell::new(2, 2), Cell::new(2, 2));
        let o = observe(&s, &i, 0, 3).unwrap();
        assert_eq!(o.goal_direction, (0.0, 0.0));
        assert_eq!(o.goal_distance, 0.0);
        assert!(o.get(CHANNEL_OWN_GOAL, 1, 1));
    }

    #[test]
    fn lone_agent_sees_no_agents() {
        let (s, i) = single(7, Cell::new(3, 3), Cell::new(0, 6));
        let o = observe(&s, &i, 0, 5).unwrap();
        assert!(o.spatial[CHANNEL_AGENTS].iter().all(|&b| !b));
        assert!(o.spatial[CHANNEL_OBSTACLES].iter().all(|&b| !b));
        let (dx, dy) = o.goal_direction;
        assert!(((dx * dx + dy * dy) - 1.0).abs() < 1e-6);
        assert_eq!(o.goal_distance, 6.0);
    }

    #[test]
    fn corner_marks_outside_cells_as_obstacles() {
        let (s, i) = single(6, Cell::new(0, 0), Cell::new(5, 5));
        let o = observe(&s, &i, 0, 5).unwrap();
        // Enumerate the 25 cells against the map bounds.
        let mut outside = 0;
        for row in 0..5 {
            for col in 0..5 {
                let c = Cell::new(col as i32 - 2, row as i32 - 2);
                let expect = !i.grid.in_bounds(c);
                outside += expect as usize;
                assert_eq!(o.get(CHANNEL_OBSTACLES, row, col), expect, "row {row} col {col}");
            }
        }
        assert_eq!(outside, 16);
    }

    #[test]
    fn others_and_their_goals_are_placed() {
        let g = GridMap::from_rows(&[".....", ".....", "..@..", ".....", "....."]).unwrap();
        let c = Cell::new;
        let i = Instance::new(g, vec![c(1, 1), c(2, 1), c(4, 4)], vec![c(3, 3), c(0, 0), c(4, 0)]).unwrap();
        let s = SimState::initial(&i);
        let o = observe(&s, &i, 0, 3).unwrap();
        // Observer at (1,1): row r is y = r, column c is x = c.
        assert!(o.get(CHANNEL_AGENTS, 1, 2));
        assert!(!o.get(CHANNEL_AGENTS, 1, 1));
        assert!(o.get(CHANNEL_OBSTACLES, 2, 2));
        assert!(o.get(CHANNEL_OTHER_GOALS, 0, 0));
        assert!(o.spatial[CHANNEL_OWN_GOAL].iter().all(|&b| !b));
        assert_eq!(o.spatial[CHANNEL_AGENTS].iter().filter(|&&b| b).count(), 1);
    }

    #[test]
    fn even_fov_is_rejected() {
        let (s, i) = single(5, Cell::new(2, 2), Cell::new(2, 2));
        assert!(observe(&s, &i, 0, 4).is_err());
        assert!(observe(&s, &i, 0, 1).is_err());
    }
}
