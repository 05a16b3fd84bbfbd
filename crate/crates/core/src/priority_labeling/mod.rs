//! Imitation datasets unfolded from coupled-planner solutions.
//!
//! Every solved instance of makespan `T` contributes one action sample and
//! one priority sample per agent per timestep `t < T`. Plans shorter than
//! `T` are padded with waits.

pub mod picd;

use rayon::prelude::*;

use crate::coupled_planner::{self, PlannerConfig};
use crate::error::{Error, Result};
use crate::mapf::{observe, step, Action, Cell, GridMap, Instance, Observation, SimState};

/// Moves that bring `position` one step closer to `goal`, ignoring agents.
/// Empty when already on the goal.
pub fn optimal_action_set(grid: &GridMap, position: Cell, goal: Cell) -> Result<Vec<Action>> {
    for c in [position, goal] {
        if !grid.is_free(c) {
            return Err(Error::contract(format!("{c:?} is not a free cell")));
        }
    }
    if position == goal {
        return Ok(Vec::new());
    }
    let dist = grid.distance_map(goal);
    let here = dist
        .get(position)
        .ok_or_else(|| Error::contract(format!("goal {goal:?} unreachable from {position:?}")))?;
    Ok(Action::MOVES
        .into_iter()
        .filter(|&a| dist.get(position.offset(a)) == Some(here - 1))
        .collect())
}

/// Wait is high priority only when nothing better exists; a move is high
/// priority when it lies on a shortest path.
pub fn label_priority(action: Action, optimal_set: &[Action]) -> u8 {
    if action.is_move() {
        optimal_set.contains(&action) as u8
    } else {
        optimal_set.is_empty() as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub observation: Observation,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrioritySample {
    pub observation: Observation,
    pub priority: u8,
}

/// Where a sample came from, enough to relabel it from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOrigin {
    /// Index into the instance list passed to [`build_datasets`].
    pub instance: usize,
    pub t: usize,
    pub agent: usize,
    pub position: Cell,
    pub goal: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationDatasets {
    pub d_imt: Vec<ActionSample>,
    pub d_imp: Vec<PrioritySample>,
    /// Parallel to `d_imt` and `d_imp`.
    pub origins: Vec<SampleOrigin>,
    /// Instances offered to the builder.
    pub source_instances: usize,
    /// Indices of the instances that were solved, in order.
    pub solved: Vec<usize>,
    /// Makespan of each solved instance, parallel to `solved`.
    pub makespans: Vec<usize>,
    /// Instances dropped because the planner timed out or proved them unsolvable.
    pub skipped: usize,
    pub n_agents: usize,
    pub fov: usize,
}

impl ImitationDatasets {
    pub fn len(&self) -> usize {
        self.d_imt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_imt.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.d_imp.is_empty() {
            return 0.0;
        }
        let pos = self.d_imp.iter().filter(|s| s.priority == 1).count();
        pos as f64 / self.d_imp.len() as f64
    }

    pub fn summary(&self) -> String {
        format!(
            "instances={} solved={} samples={} pos_fraction={:.6}",
            self.source_instances,
            self.solved.len(),
            self.len(),
            self.positive_fraction()
        )
    }

    /// Recomputes every priority label from the stored origin and action.
    pub fn relabel(&self, instances: &[Instance]) -> Result<Vec<u8>> {
        self.origins
            .iter()
            .zip(&self.d_imt)
            .map(|(o, s)| {
                let grid = &instances
                    .get(o.instance)
                    .ok_or_else(|| Error::contract(format!("origin instance {} out of range", o.instance)))?
                    .grid;
                Ok(label_priority(s.action, &optimal_action_set(grid, o.position, o.goal)?))
            })
            .collect()
    }
}

struct Unfolded {
    makespan: usize,
    samples: Vec<(ActionSample, PrioritySample, SampleOrigin)>,
}

fn unfold(index: usize, instance: &Instance, config: &PlannerConfig, fov: usize) -> Result<Option<Unfolded>> {
    let result = coupled_planner::plan(instance, config)?;
    let Some(solution) = result.solution() else {
        return Ok(None);
    };
    let makespan = solution.makespan();
    let n = instance.n_agents();
    let mut samples = Vec::with_capacity(n * makespan);
    let mut state = SimState::initial(instance);
    for t in 0..makespan {
        let joint = solution.joint_action(t);
        for (agent, &action) in joint.iter().enumerate() {
            let position = state.positions[agent];
            let goal = instance.goals[agent];
            let observation = observe(&state, instance, agent, fov)?;
            let priority = label_priority(action, &optimal_action_set(&instance.grid, position, goal)?);
            samples.push((
                ActionSample { observation: observation.clone(), action },
                PrioritySample { observation, priority },
                SampleOrigin { instance: index, t, agent, position, goal },
            ));
        }
        let (next, events) = step(&state, instance, &joint)?;
        if !events.is_empty() {
            return Err(Error::contract(format!(
                "planner solution for instance {index} conflicts at t={t}: {events:?}"
            )));
        }
        state = next;
    }
    if state.positions != instance.goals {
        return Err(Error::contract(format!("planner solution for instance {index} misses the goals")));
    }
    Ok(Some(Unfolded { makespan, samples }))
}

/// Plans every instance and unfolds the solutions into per-step samples.
///
/// Instances are processed in parallel and concatenated in input order.
/// All instances must share one agent count.
pub fn build_datasets(instances: &[Instance], config: &PlannerConfig, fov: usize) -> Result<ImitationDatasets> {
    let first = instances
        .first()
        .ok_or_else(|| Error::contract("no instances to label"))?;
    let n_agents = first.n_agents();
    if let Some(bad) = instances.iter().position(|i| i.n_agents() != n_agents) {
        return Err(Error::contract(format!(
            "instance {bad} has {} agents, expected {n_agents}",
            instances[bad].n_agents()
        )));
    }
    let unfolded: Vec<Option<Unfolded>> = instances
        .par_iter()
        .enumerate()
        .map(|(k, inst)| unfold(k, inst, config, fov))
        .collect::<Result<_>>()?;

    let mut out = ImitationDatasets {
        d_imt: Vec::new(),
        d_imp: Vec::new(),
        origins: Vec::new(),
        source_instances: instances.len(),
        solved: Vec::new(),
        makespans: Vec::new(),
        skipped: 0,
        n_agents,
        fov,
    };
    for (k, u) in unfolded.into_iter().enumerate() {
        let Some(u) = u else {
            out.skipped += 1;
            continue;
        };
        out.solved.push(k);
        out.makespans.push(u.makespan);
        for (a, p, o) in u.samples {
            out.d_imt.push(a);
            out.d_imp.push(p);
            out.origins.push(o);
        }
    }
    Ok(out)
}
