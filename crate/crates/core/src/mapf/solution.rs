use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mapf::grid::{Action, Cell, Instance};
use crate::mapf::sim::{execute_policy, ExecutionTrace, SimState};

/// Single-agent action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Plan {
    pub agent_id: usize,
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Action at `t`, or `Wait` once the plan is exhausted.
    pub fn action_at(&self, t: usize) -> Action {
        self.actions.get(t).copied().unwrap_or(Action::Wait)
    }

    /// Cells visited from `start`, including it.
    pub fn cells(&self, start: Cell) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.actions.len() + 1);
        out.push(start);
        let mut c = start;
        for a in &self.actions {
            c = c.offset(*a);
            out.push(c);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    pub plans: Vec<Plan>,
}

impl Solution {
    /// Builds per-agent plans from a sequence of joint positions. Trailing
    /// waits on the final cell are dropped.
    pub fn from_joint_path(path: &[Vec<Cell>]) -> Result<Self> {
        let n = path.first().map_or(0, Vec::len);
        let mut plans = Vec::with_capacity(n);
        for i in 0..n {
            let mut actions = Vec::with_capacity(path.len());
            for w in path.windows(2) {
                let a = Action::between(w[0][i], w[1][i]).ok_or_else(|| {
                    Error::contract(format!("agent {i} jumps from {} to {}", w[0][i], w[1][i]))
                })?;
                actions.push(a);
            }
            while actions.last() == Some(&Action::Wait) {
                actions.pop();
            }
            plans.push(Plan { agent_id: i, actions });
        }
        Ok(Solution { plans })
    }

    /// Longest plan length.
    pub fn makespan(&self) -> usize {
        self.plans.iter().map(Plan::len).max().unwrap_or(0)
    }

    /// Sum of plan lengths, ignoring trailing waits.
    pub fn sum_of_costs(&self) -> usize {
        self.plans
            .iter()
            .map(|p| {
                p.actions
                    .iter()
                    .rposition(|a| a.is_move())
                    .map_or(0, |k| k + 1)
            })
            .sum()
    }

    pub fn joint_action(&self, t: usize) -> Vec<Action> {
        self.plans.iter().map(|p| p.action_at(t)).collect()
    }

    /// Executes the plans as a scripted policy.
    pub fn replay(&self, instance: &Instance, max_steps: u32) -> Result<ExecutionTrace> {
        if self.plans.len() != instance.n_agents() {
            return Err(Error::contract(format!(
                "solution has {} plans for {} agents",
                self.plans.len(),
                instance.n_agents()
            )));
        }
        execute_policy(
            instance,
            |s: &SimState, _: &Instance| self.joint_action(s.timestep as usize),
            max_steps,
        )
    }

    /// One line per agent: `agent_id actions`, actions over `{N,S,E,W,.}`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.plans {
            let s: String = p.actions.iter().map(|a| a.symbol()).collect();
            if s.is_empty() {
                writeln!(out, "{}", p.agent_id).unwrap();
            } else {
                writeln!(out, "{} {}", p.agent_id, s).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut plans = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let id: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::contract(format!("plan line {}: bad agent id", lineno + 1)))?;
            if id != plans.len() {
                return Err(Error::contract(format!(
                    "plan line {}: expected agent {}, got {id}",
                    lineno + 1,
                    plans.len()
                )));
            }
            let actions = parts
                .next()
                .unwrap_or("")
                .chars()
                .map(|c| {
                    Action::from_symbol(c).ok_or_else(|| {
                        Error::contract(format!("plan line {}: bad action {c:?}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            plans.push(Plan { agent_id: id, actions });
        }
        Ok(Solution { plans })
    }
}
