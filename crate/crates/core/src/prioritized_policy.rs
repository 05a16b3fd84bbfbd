//! Decentralized prioritized one-step planning.
//!
//! Each timestep runs four stages: heuristic priorities, cluster election
//! with the priorities as weights, message exchange through the clusters,
//! and priority-ordered one-step planning inside each cluster. Agents of a
//! cluster reserve the cells they occupy and intend to enter, so cluster
//! mates never contend for a cell. Nothing coordinates across clusters;
//! those contests show up as conflicts when the step executes.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cbrp_topology::{self, ClusterTopology, Message, Payload, DEFAULT_RADIUS};
use crate::error::{Error, Result};
use crate::mapf::observe::goal_direction;
use crate::mapf::{valid_actions, Action, Cell, DistanceMap, GridMap, Instance, SimState};

/// Action order used to break ties between equally good choices.
const TIE_ORDER: [Action; 5] = [Action::North, Action::East, Action::South, Action::West, Action::Wait];

/// `-mh_t / mh0`, or 0 when the agent started on its goal. Higher values
/// rank first, so agents on their goals (value 0) lead.
pub fn heuristic_priority(mh_t: i64, mh0: i64) -> Result<f64> {
    if mh_t < 0 || mh0 < 0 {
        return Err(Error::contract(format!(
            "distances must be non-negative, got mh_t={mh_t} mh0={mh0}"
        )));
    }
    if mh0 == 0 {
        return Ok(0.0);
    }
    Ok(-(mh_t as f64) / mh0 as f64)
}

/// Tie-break between two agents with equal primary priority: the larger
/// initial distance ranks higher; equal distances are settled by a coin
/// flip drawn from `seed`. `Greater` means agent `i` ranks higher.
pub fn secondary_order(mh0_i: u32, mh0_j: u32, seed: u64) -> Ordering {
    match mh0_i.cmp(&mh0_j) {
        Ordering::Equal => {
            if ChaCha8Rng::seed_from_u64(seed).random::<bool>() {
                Ordering::Greater
            } else {
                Ordering::Less
            }
        }
        o => o,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Cluster radius (Chebyshev).
    pub radius: f64,
    /// Off-goal steps without moving before a random escape; `None` disables.
    pub deadlock_wait: Option<u32>,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            radius: DEFAULT_RADIUS,
            deadlock_wait: Some(8),
            seed: 0,
        }
    }
}

/// Everything one decision step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub actions: Vec<Action>,
    pub priorities: Vec<f64>,
    /// Agents from highest to lowest priority.
    pub order: Vec<usize>,
    pub topology: ClusterTopology,
    pub inboxes: Vec<Vec<Message>>,
    /// Cell each agent intends to occupy next.
    pub targets: Vec<Cell>,
}

impl Decision {
    /// Pairs of same-cluster agents that intend the same cell.
    pub fn reservation_violations(&self) -> Vec<(usize, usize)> {
        let n = self.targets.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if self.topology.central_of[a] == self.topology.central_of[b]
                    && self.targets[a] == self.targets[b]
                {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Total order: primary priority, then initial distance, then a seeded
/// per-step random key.
fn priority_order(priorities: &[f64], mh0: &[u32], seed: u64, timestep: u32) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (timestep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let coin: Vec<u64> = (0..priorities.len()).map(|_| rng.random()).collect();
    let mut order: Vec<usize> = (0..priorities.len()).collect();
    order.sort_by(|&a, &b| {
        priorities[b]
            .total_cmp(&priorities[a])
            .then(mh0[b].cmp(&mh0[a]))
            .then(coin[a].cmp(&coin[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Stateless core of the pipeline. `escape[i]` forces agent `i` to take a
/// random reservation-respecting move drawn from `rng`.
#[allow(clippy::too_many_arguments)]
fn plan_step(
    state: &SimState,
    instance: &Instance,
    dist: &[DistanceMap],
    mh0: &[u32],
    radius: f64,
    seed: u64,
    escape: &[bool],
    rng: &mut ChaCha8Rng,
) -> Result<Decision> {
    let n = instance.n_agents();
    if state.positions.len() != n {
        return Err(Error::contract("state does not match instance"));
    }
    let priorities: Vec<f64> = (0..n)
        .map(|i| {
            let mh_t = state.positions[i].manhattan(instance.goals[i]);
            heuristic_priority(mh_t as i64, mh0[i] as i64)
        })
        .collect::<Result<_>>()?;
    let order = priority_order(&priorities, mh0, seed, state.timestep);
    let rank = cbrp_topology::ranks_from_order(&order);
    let topology = cbrp_topology::form_clusters_ranked(&state.positions, &rank, radius)?;

    let greedy = |i: usize, to_goal: &DistanceMap, allowed: &dyn Fn(Cell) -> bool| -> Action {
        let here = state.positions[i];
        if here == instance.goals[i] {
            return Action::Wait;
        }
        valid_actions(state, instance, i)
            .into_iter()
            .filter(|a| allowed(here.offset(*a)))
            .min_by_key(|a| {
                let tie = TIE_ORDER.iter().position(|t| t == a).unwrap();
                (to_goal.get(here.offset(*a)).unwrap_or(u32::MAX), !a.is_move(), tie)
            })
            .unwrap_or(Action::Wait)
    };

    // Outboxes carry each agent's unconstrained greedy intent.
    let outboxes: Vec<Message> = (0..n)
        .map(|i| {
            let (dx, dy) = goal_direction(state.positions[i], instance.goals[i]);
            Message {
                sender: i,
                payload: Payload {
                    position: state.positions[i],
                    goal_direction: (dx as f64, dy as f64),
                    weight: priorities[i],
                    intended_action: greedy(i, &dist[i], &|_| true),
                },
            }
        })
        .collect();
    let inboxes = cbrp_topology::route(&topology, &outboxes)?;

    let mut actions = vec![Action::Wait; n];
    for (central, members) in topology.clusters() {
        let mut sequence = vec![central];
        let mut rest = members;
        rest.sort_by_key(|&m| rank[m]);
        sequence.extend(rest);

        // Cluster mates parked on their goals, as announced in the central's
        // inbox and its own message.
        let parked: Vec<Cell> = inboxes[central]
            .iter()
            .chain(std::iter::once(&outboxes[central]))
            .filter(|m| m.payload.goal_direction == (0.0, 0.0))
            .map(|m| m.payload.position)
            .collect();

        let mut reserved: HashSet<Cell> = HashSet::new();
        for i in sequence {
            let here = state.positions[i];
            let detour;
            let to_goal = if parked.iter().any(|&c| c != here) {
                detour = distances_around(instance, i, here, &parked);
                detour.as_ref().unwrap_or(&dist[i])
            } else {
                &dist[i]
            };
            let action = if escape[i] && here != instance.goals[i] {
                let moves: Vec<Action> = valid_actions(state, instance, i)
                    .into_iter()
                    .filter(|a| a.is_move() && !reserved.contains(&here.offset(*a)))
                    .collect();
                moves.choose(rng).copied().unwrap_or(Action::Wait)
            } else {
                greedy(i, to_goal, &|c| !reserved.contains(&c))
            };
            reserved.insert(here);
            reserved.insert(here.offset(action));
            actions[i] = action;
        }
    }
    let targets = (0..n).map(|i| state.positions[i].offset(actions[i])).collect();
    Ok(Decision {
        actions,
        priorities,
        order,
        topology,
        inboxes,
        targets,
    })
}

/// Goal distances for agent `i` at `here` with the `blocked` cells removed
/// from the grid, or `None` if that cuts `here` off the goal.
fn distances_around(instance: &Instance, i: usize, here: Cell, blocked: &[Cell]) -> Option<DistanceMap> {
    let grid = &instance.grid;
    let mut obstacles: Vec<bool> = (0..grid.n_cells()).map(|k| !grid.is_free(grid.cell(k))).collect();
    for &c in blocked.iter().filter(|&&c| c != here) {
        obstacles[grid.index(c)] = true;
    }
    let reduced = GridMap::from_obstacles(grid.width(), grid.height(), obstacles).ok()?;
    let map = reduced.distance_map(instance.goals[i]);
    map.get(here).is_some().then_some(map)
}

/// One pipeline step without deadlock relief.
pub fn decide_joint_action(state: &SimState, instance: &Instance, radius: f64, seed: u64) -> Result<Vec<Action>> {
    let dist = instance.goal_distance_maps();
    let mh0: Vec<u32> = instance.starts.iter().zip(&instance.goals).map(|(s, g)| s.manhattan(*g)).collect();
    let n = instance.n_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(plan_step(state, instance, &dist, &mh0, radius, seed, &vec![false; n], &mut rng)?.actions)
}

/// Stateful policy for episodes: caches goal distances and tracks how long
/// each agent has been stuck off its goal.
#[derive(Debug, Clone)]
pub struct PrioritizedPolicy {
    config: PolicyConfig,
    dist: Vec<DistanceMap>,
    mh0: Vec<u32>,
    stuck: Vec<u32>,
    last: Option<Vec<Cell>>,
    rng: ChaCha8Rng,
}

impl PrioritizedPolicy {
    pub fn new(instance: &Instance, config: PolicyConfig) -> Self {
        PrioritizedPolicy {
            config,
            dist: instance.goal_distance_maps(),
            mh0: instance
                .starts
                .iter()
                .zip(&instance.goals)
                .map(|(s, g)| s.manhattan(*g))
                .collect(),
            stuck: vec![0; instance.n_agents()],
            last: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Decides the joint action for `state`.
    ///
    /// # Panics
    /// If `state` does not belong to `instance` or the radius is not
    /// positive; the policy callable contract has no error channel.
    pub fn decide(&mut self, state: &SimState, instance: &Instance) -> Decision {
        self.try_decide(state, instance).expect("policy inputs must be consistent")
    }

    pub fn try_decide(&mut self, state: &SimState, instance: &Instance) -> Result<Decision> {
        if let Some(last) = &self.last {
            for (i, stuck) in self.stuck.iter_mut().enumerate() {
                let here = state.positions[i];
                let still = last[i] == here && here != instance.goals[i];
                *stuck = if still { *stuck + 1 } else { 0 };
            }
        }
        self.last = Some(state.positions.clone());
        let escape: Vec<bool> = self
            .stuck
            .iter()
            .map(|&s| self.config.deadlock_wait.is_some_and(|w| s >= w))
            .collect();
        let decision = plan_step(
            state,
            instance,
            &self.dist,
            &self.mh0,
            self.config.radius,
            self.config.seed,
            &escape,
            &mut self.rng,
        )?;
        for (i, &e) in escape.iter().enumerate() {
            if e {
                self.stuck[i] = 0;
            }
        }
        Ok(decision)
    }
}
