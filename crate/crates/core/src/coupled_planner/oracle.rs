use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use super::{for_each_joint_successor, joint_goal_reachable, Outcome, PlannerResult};
use crate::error::{Error, Result};
use crate::mapf::{Cell, Instance, Solution};

pub const MAX_ORACLE_AGENTS: usize = 4;

/// Exhaustive uniform-cost search over full joint moves.
///
/// Shares no search code with [`super::plan`]: successors are whole joint
/// moves, there is no heuristic, and states are keyed by joint cells plus
/// each agent's uncharged goal waits. Returns `Timeout` when no solution
/// costs at most `cost_cap` but the goal configuration is reachable.
pub fn brute_force_optimal(instance: &Instance, cost_cap: u64) -> Result<PlannerResult> {
    let n = instance.n_agents();
    if n > MAX_ORACLE_AGENTS {
        return Err(Error::contract(format!(
            "brute-force oracle supports at most {MAX_ORACLE_AGENTS} agents, got {n}"
        )));
    }
    let started = Instant::now();
    type Key = (Vec<Cell>, Vec<u64>);

    let start: Key = (instance.starts.clone(), vec![0; n]);
    let mut best: HashMap<Key, (u64, Option<Key>)> = HashMap::new();
    best.insert(start.clone(), (0, None));
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Reverse((0u64, seq, start)));
    let mut expanded = 0u64;

    while let Some(Reverse((g, _, key))) = heap.pop() {
        if best[&key].0 < g {
            continue;
        }
        expanded += 1;
        let (cells, pending) = &key;
        if *cells == instance.goals {
            let mut path = vec![cells.clone()];
            let mut cur = best[&key].1.clone();
            while let Some(k) = cur {
                path.push(k.0.clone());
                cur = best[&k].1.clone();
            }
            path.reverse();
            return Ok(PlannerResult {
                outcome: Outcome::Solved(Solution::from_joint_path(&path)?),
                expanded_nodes: expanded,
                elapsed: started.elapsed(),
            });
        }
        let mut successors = Vec::new();
        for_each_joint_successor(instance, cells, |next| {
            let mut cost = 0u64;
            let mut next_pending = pending.clone();
            for i in 0..n {
                if next[i] != cells[i] {
                    cost += 1 + next_pending[i];
                    next_pending[i] = 0;
                } else if cells[i] == instance.goals[i] {
                    next_pending[i] += 1;
                } else {
                    cost += 1;
                }
            }
            successors.push((g + cost, (next.to_vec(), next_pending)));
        });
        for (g2, k2) in successors {
            if g2 > cost_cap {
                continue;
            }
            if best.get(&k2).is_some_and(|(old, _)| *old <= g2) {
                continue;
            }
            best.insert(k2.clone(), (g2, Some(key.clone())));
            seq += 1;
            heap.push(Reverse((g2, seq, k2)));
        }
    }

    let outcome = match joint_goal_reachable(instance, u64::MAX) {
        Some(false) => Outcome::Unsolvable,
        _ => Outcome::Timeout,
    };
    Ok(PlannerResult {
        outcome,
        expanded_nodes: expanded,
        elapsed: started.elapsed(),
    })
}
