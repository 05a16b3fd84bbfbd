use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mapf::grid::{Action, Cell, Instance};

/// Mutable world state of one simulation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub positions: Vec<Cell>,
    pub timestep: u32,
    pub arrived: Vec<bool>,
}

impl SimState {
    pub fn initial(instance: &Instance) -> Self {
        Self::at(instance, instance.starts.clone(), 0)
    }

    pub fn at(instance: &Instance, positions: Vec<Cell>, timestep: u32) -> Self {
        let arrived = positions
            .iter()
            .zip(&instance.goals)
            .map(|(p, g)| p == g)
            .collect();
        SimState {
            positions,
            timestep,
            arrived,
        }
    }

    pub fn all_arrived(&self) -> bool {
        self.arrived.iter().all(|&a| a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConflictKind {
    /// Target cell occupied by a staying agent, contested by another mover,
    /// or part of a swap.
    AgentVertex,
    Obstacle,
    OutOfBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConflictEvent {
    pub timestep: u32,
    pub agent_id: usize,
    pub kind: ConflictKind,
}

/// Actions whose target is in bounds, not an obstacle and not occupied by
/// another agent. `Wait` is always included. Returned in `Action::ALL` order.
pub fn valid_actions(state: &SimState, instance: &Instance, agent: usize) -> Vec<Action> {
    let here = state.positions[agent];
    Action::ALL
        .into_iter()
        .filter(|&a| {
            if !a.is_move() {
                return true;
            }
            let target = here.offset(a);
            instance.grid.is_free(target) && !state.positions.contains(&target)
        })
        .collect()
}

/// Outcome of one agent's intent within a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveOutcome {
    Waited,
    Moved,
    Rejected(ConflictKind),
}

/// Advances every agent simultaneously.
///
/// A move executes only if its target is inside the map, free, not
/// contested by another mover, not a swap, and not occupied by an agent
/// that ends up staying. The last condition is resolved to a fixed point so
/// that following into a vacated cell succeeds exactly when the vacating
/// move itself executes. Every rejected move emits one event.
pub fn step(
    state: &SimState,
    instance: &Instance,
    joint_action: &[Action],
) -> Result<(SimState, Vec<ConflictEvent>)> {
    let (next, outcomes) = step_detailed(state, instance, joint_action)?;
    let events = outcomes
        .iter()
        .enumerate()
        .filter_map(|(agent_id, o)| match o {
            MoveOutcome::Rejected(kind) => Some(ConflictEvent {
                timestep: state.timestep,
                agent_id,
                kind: *kind,
            }),
            _ => None,
        })
        .collect();
    Ok((next, events))
}

/// Like [`step`], but reports each agent's outcome.
pub fn step_detailed(
    state: &SimState,
    instance: &Instance,
    joint_action: &[Action],
) -> Result<(SimState, Vec<MoveOutcome>)> {
    let n = state.positions.len();
    if joint_action.len() != n {
        return Err(Error::contract(format!(
            "joint action has {} entries for {n} agents",
            joint_action.len()
        )));
    }
    let grid = &instance.grid;
    let mut outcome = vec![MoveOutcome::Waited; n];
    let mut targets = state.positions.clone();

    for (i, &a) in joint_action.iter().enumerate() {
        if !a.is_move() {
            continue;
        }
        let t = state.positions[i].offset(a);
        targets[i] = t;
        outcome[i] = if !grid.in_bounds(t) {
            MoveOutcome::Rejected(ConflictKind::OutOfBounds)
        } else if grid.is_obstacle(t) {
            MoveOutcome::Rejected(ConflictKind::Obstacle)
        } else {
            MoveOutcome::Moved
        };
    }

    let mut intents: HashMap<Cell, u32> = HashMap::new();
    for i in 0..n {
        if outcome[i] == MoveOutcome::Moved {
            *intents.entry(targets[i]).or_default() += 1;
        }
    }
    let occupant: HashMap<Cell, usize> = state
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i))
        .collect();

    let reject = MoveOutcome::Rejected(ConflictKind::AgentVertex);
    let mut verdict = outcome.clone();
    for i in 0..n {
        if outcome[i] != MoveOutcome::Moved {
            continue;
        }
        if intents[&targets[i]] > 1 {
            verdict[i] = reject;
            continue;
        }
        if let Some(&j) = occupant.get(&targets[i]) {
            let swapping = outcome[j] == MoveOutcome::Moved && targets[j] == state.positions[i];
            if swapping {
                verdict[i] = reject;
            }
        }
    }

    // Movers blocked by stayers become stayers themselves; repeat.
    loop {
        let mut changed = false;
        for i in 0..n {
            if verdict[i] != MoveOutcome::Moved {
                continue;
            }
            if let Some(&j) = occupant.get(&targets[i]) {
                if verdict[j] != MoveOutcome::Moved {
                    verdict[i] = reject;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let positions: Vec<Cell> = (0..n)
        .map(|i| {
            if verdict[i] == MoveOutcome::Moved {
                targets[i]
            } else {
                state.positions[i]
            }
        })
        .collect();
    Ok((SimState::at(instance, positions, state.timestep + 1), verdict))
}

/// Per-step reward shaping; every value is a plain field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub executed_move: f64,
    pub wait_off_goal: f64,
    pub wait_on_goal: f64,
    pub rejected_move: f64,
    pub completion_bonus: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            executed_move: -0.3,
            wait_off_goal: -0.5,
            wait_on_goal: 0.0,
            rejected_move: -2.0,
            completion_bonus: 20.0,
        }
    }
}

impl RewardConfig {
    /// Rewards for one step given each agent's outcome and the state after it.
    pub fn rewards(&self, outcomes: &[MoveOutcome], after: &SimState) -> Vec<f64> {
        let done = after.all_arrived();
        outcomes
            .iter()
            .zip(&after.arrived)
            .map(|(o, &on_goal)| {
                let mut r = match o {
                    MoveOutcome::Moved => self.executed_move,
                    MoveOutcome::Rejected(_) => self.rejected_move,
                    MoveOutcome::Waited if on_goal => self.wait_on_goal,
                    MoveOutcome::Waited => self.wait_off_goal,
                };
                if done && on_goal {
                    r += self.completion_bonus;
                }
                r
            })
            .collect()
    }
}

/// Timestep-by-timestep record of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    /// Joint positions at t = 0..=steps executed.
    pub positions: Vec<Vec<Cell>>,
    pub events: Vec<ConflictEvent>,
    /// Per-step, per-agent rewards.
    pub rewards: Vec<Vec<f64>>,
    pub success: bool,
    pub makespan: u32,
    pub total_moves: u64,
}

impl ExecutionTrace {
    pub fn count(&self, kind: ConflictKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Trace of an episode that never ran (e.g. a planner failure).
    pub fn failed(instance: &Instance, max_steps: u32) -> Self {
        ExecutionTrace {
            positions: vec![instance.starts.clone()],
            events: Vec::new(),
            rewards: Vec::new(),
            success: false,
            makespan: max_steps,
            total_moves: 0,
        }
    }
}

/// Runs `policy` until every agent is on its goal at the same time or
/// `max_steps` elapse.
pub fn execute_policy<P>(instance: &Instance, policy: P, max_steps: u32) -> Result<ExecutionTrace>
where
    P: FnMut(&SimState, &Instance) -> Vec<Action>,
{
    execute_policy_with(instance, policy, max_steps, &RewardConfig::default())
}

pub fn execute_policy_with<P>(
    instance: &Instance,
    mut policy: P,
    max_steps: u32,
    rewards: &RewardConfig,
) -> Result<ExecutionTrace>
where
    P: FnMut(&SimState, &Instance) -> Vec<Action>,
{
    if max_steps == 0 {
        return Err(Error::contract("max_steps must be at least 1"));
    }
    let mut state = SimState::initial(instance);
    let mut trace = ExecutionTrace {
        positions: vec![state.positions.clone()],
        events: Vec::new(),
        rewards: Vec::new(),
        success: state.all_arrived(),
        makespan: 0,
        total_moves: 0,
    };
    while !trace.success && state.timestep < max_steps {
        let joint = policy(&state, instance);
        let (next, outcomes) = step_detailed(&state, instance, &joint)?;
        for (agent_id, o) in outcomes.iter().enumerate() {
            match o {
                MoveOutcome::Moved => trace.total_moves += 1,
                MoveOutcome::Rejected(kind) => trace.events.push(ConflictEvent {
                    timestep: state.timestep,
                    agent_id,
                    kind: *kind,
                }),
                MoveOutcome::Waited => {}
            }
        }
        trace.rewards.push(rewards.rewards(&outcomes, &next));
        trace.positions.push(next.positions.clone());
        trace.success = next.all_arrived();
        state = next;
    }
    trace.makespan = state.timestep;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapf::grid::GridMap;
    use proptest::prelude::*;

    fn inst(w: usize, h: usize, starts: &[(i32, i32)], goals: &[(i32, i32)]) -> Instance {
        let c = |v: &[(i32, i32)]| v.iter().map(|&(x, y)| Cell::new(x, y)).collect();
        Instance::new(GridMap::empty(w, h).unwrap(), c(starts), c(goals)).unwrap()
    }

    #[test]
    fn open_center_has_all_actions() {
        let i = inst(3, 3, &[(1, 1)], &[(0, 0)]);
        assert_eq!(valid_actions(&SimState::initial(&i), &i, 0), Action::ALL.to_vec());
    }

    #[test]
    fn single_cell_map_only_waits() {
        let i = inst(1, 1, &[(0, 0)], &[(0, 0)]);
        assert_eq!(valid_actions(&SimState::initial(&i), &i, 0), vec![Action::Wait]);
    }

    #[test]
    fn corner_with_northern_neighbour() {
        let i = inst(5, 5, &[(0, 0), (0, 1)], &[(4, 4), (4, 3)]);
        // Enumerate the five targets against bounds and occupancy.
        let s = SimState::initial(&i);
        let expected: Vec<Action> = Action::ALL
            .into_iter()
            .filter(|a| {
                let t = s.positions[0].offset(*a);
                !a.is_move() || (i.grid.is_free(t) && t != s.positions[1])
            })
            .collect();
        assert_eq!(expected, vec![Action::East, Action::Wait]);
        assert_eq!(valid_actions(&s, &i, 0), expected);
    }

    #[test]
    fn contested_cell_rejects_both() {
        let i = inst(5, 5, &[(1, 2), (3, 2)], &[(0, 0), (4, 4)]);
        let s = SimState::initial(&i);
        let (next, ev) = step(&s, &i, &[Action::East, Action::West]).unwrap();
        assert_eq!(next.positions, s.positions);
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.kind == ConflictKind::AgentVertex));
    }

    #[test]
    fn following_into_vacated_cell_executes() {
        // A at (0,0) follows B at (1,0), which moves on to (2,0).
        let i = inst(4, 1, &[(0, 0), (1, 0)], &[(1, 0), (2, 0)]);
        let s = SimState::initial(&i);
        let (next, ev) = step(&s, &i, &[Action::East, Action::East]).unwrap();
        assert!(ev.is_empty());
        assert_eq!(next.positions, vec![Cell::new(1, 0), Cell::new(2, 0)]);
        assert!(next.all_arrived());
    }

    #[test]
    fn blocked_chain_propagates() {
        // C waits at (2,0); B cannot enter, so A cannot follow B.
        let i = inst(4, 1, &[(0, 0), (1, 0), (2, 0)], &[(1, 0), (2, 0), (3, 0)]);
        let s = SimState::initial(&i);
        let (next, ev) = step(&s, &i, &[Action::East, Action::East, Action::Wait]).unwrap();
        assert_eq!(next.positions, s.positions);
        assert_eq!(ev.len(), 2);
    }

    #[test]
    fn swap_is_rejected() {
        let i = inst(2, 1, &[(0, 0), (1, 0)], &[(1, 0), (0, 0)]);
        let s = SimState::initial(&i);
        let (next, ev) = step(&s, &i, &[Action::East, Action::West]).unwrap();
        assert_eq!(next.positions, s.positions);
        assert_eq!(ev.len(), 2);
    }

    #[test]
    fn rotation_executes() {
        // Four agents rotate around a 2x2 block.
        let i = inst(2, 2, &[(0, 0), (1, 0), (1, 1), (0, 1)], &[(1, 0), (1, 1), (0, 1), (0, 0)]);
        let s = SimState::initial(&i);
        let (next, ev) =
            step(&s, &i, &[Action::East, Action::North, Action::West, Action::South]).unwrap();
        assert!(ev.is_empty());
        assert!(next.all_arrived());
    }

    #[test]
    fn obstacle_and_bounds_are_reported() {
        let g = GridMap::from_rows(&[".@"]).unwrap();
        let i = Instance::new(g, vec![Cell::new(0, 0)], vec![Cell::new(0, 0)]).unwrap();
        let s = SimState::initial(&i);
        let (_, ev) = step(&s, &i, &[Action::East]).unwrap();
        assert_eq!(ev[0].kind, ConflictKind::Obstacle);
        let (_, ev) = step(&s, &i, &[Action::West]).unwrap();
        assert_eq!(ev[0].kind, ConflictKind::OutOfBounds);
        let (_, ev) = step(&s, &i, &[Action::Wait]).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn mismatched_joint_action_is_contract_error() {
        let i = inst(3, 3, &[(0, 0), (1, 1)], &[(2, 2), (0, 1)]);
        let s = SimState::initial(&i);
        assert!(matches!(step(&s, &i, &[Action::Wait]), Err(Error::Contract(_))));
    }

    #[test]
    fn execute_starts_on_goals() {
        let i = inst(3, 3, &[(0, 0), (2, 2)], &[(0, 0), (2, 2)]);
        let t = execute_policy(&i, |_, _| vec![Action::North; 2], 10).unwrap();
        assert!(t.success);
        assert_eq!((t.makespan, t.total_moves), (0, 0));
    }

    #[test]
    fn execute_greedy_corridor() {
        let i = inst(5, 1, &[(0, 0)], &[(4, 0)]);
        let t = execute_policy(
            &i,
            |s, inst| {
                vec![if s.positions[0] == inst.goals[0] { Action::Wait } else { Action::East }]
            },
            256,
        )
        .unwrap();
        assert!(t.success);
        assert_eq!((t.makespan, t.total_moves), (4, 4));
        assert!(t.events.is_empty());
        assert_eq!(t.rewards.len(), 4);
        assert_eq!(t.rewards[3][0], -0.3 + 20.0);
    }

    #[test]
    fn execute_waiting_fails_at_cap() {
        let i = inst(5, 1, &[(0, 0)], &[(4, 0)]);
        let t = execute_policy(&i, |_, _| vec![Action::Wait], 17).unwrap();
        assert!(!t.success);
        assert_eq!(t.makespan, 17);
        assert_eq!(t.rewards.len(), 17);
        assert!(t.rewards.iter().all(|r| r[0] == -0.5));
    }

    #[test]
    fn execute_rejects_malformed_policy() {
        let i = inst(5, 1, &[(0, 0)], &[(4, 0)]);
        assert!(execute_policy(&i, |_, _| vec![], 5).is_err());
        assert!(execute_policy(&i, |_, _| vec![Action::Wait], 0).is_err());
    }

    fn arb_world() -> impl Strategy<Value = (Instance, Vec<Vec<Action>>)> {
        (3usize..7, 3usize..7, 1usize..7, any::<u64>()).prop_flat_map(|(w, h, n, seed)| {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = n.min(w * h);
            let mut cells: Vec<Cell> = (0..(w * h) as i32)
                .map(|k| Cell::new(k % w as i32, k / w as i32))
                .collect();
            cells.shuffle(&mut rng);
            let starts = cells[..n].to_vec();
            cells.shuffle(&mut rng);
            let goals = cells[..n].to_vec();
            let instance = Instance::new(GridMap::empty(w, h).unwrap(), starts, goals).unwrap();
            let actions = proptest::collection::vec(
                proptest::collection::vec(proptest::sample::select(Action::ALL.to_vec()), n),
                1..12,
            );
            (Just(instance), actions)
        })
    }

    proptest! {
        #[test]
        fn step_keeps_occupancy_exclusive((instance, stream) in arb_world()) {
            let mut s = SimState::initial(&instance);
            for joint in &stream {
                let (next, _) = step(&s, &instance, joint).unwrap();
                let mut seen = std::collections::HashSet::new();
                for (p, q) in s.positions.iter().zip(&next.positions) {
                    prop_assert!(seen.insert(*q));
                    prop_assert!(p.manhattan(*q) <= 1);
                }
                s = next;
            }
        }

        #[test]
        fn step_is_permutation_equivariant((instance, stream) in arb_world(), rot in 0usize..7) {
            let n = instance.n_agents();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted = Instance::new(
                instance.grid.clone(),
                perm.iter().map(|&i| instance.starts[i]).collect(),
                perm.iter().map(|&i| instance.goals[i]).collect(),
            ).unwrap();
            let joint = &stream[0];
            let pj: Vec<Action> = perm.iter().map(|&i| joint[i]).collect();
            let (a, ea) = step_detailed(&SimState::initial(&instance), &instance, joint).unwrap();
            let (b, eb) = step_detailed(&SimState::initial(&permuted), &permuted, &pj).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(a.positions[i], b.positions[k]);
                prop_assert_eq!(ea[i], eb[k]);
            }
        }

        #[test]
        fn valid_actions_execute_when_others_wait((instance, _s) in arb_world(), pick in any::<usize>()) {
            let s = SimState::initial(&instance);
            let agent = pick % instance.n_agents();
            for a in valid_actions(&s, &instance, agent) {
                let mut joint = vec![Action::Wait; instance.n_agents()];
                joint[agent] = a;
                let (_, ev) = step(&s, &instance, &joint).unwrap();
                prop_assert!(ev.is_empty());
            }
        }
    }
}
