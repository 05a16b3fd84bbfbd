//! Scenario generation and benchmark aggregation.

use std::fmt::Write as _;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Triangular;
use rayon::prelude::*;

use crate::coupled_planner::{self, PlannerConfig};
use crate::error::{Error, Result};
use crate::mapf::{measurements, Cell, ExecutionTrace, GridMap, Instance, MeasurementRow};
use crate::prioritized_policy::{PolicyConfig, PrioritizedPolicy};

pub const DEFAULT_EPISODE_CAP: u32 = 256;
pub const SWEEP_AGENTS: [usize; 4] = [8, 16, 32, 64];
pub const SWEEP_DENSITIES: [f64; 4] = [0.0, 0.1, 0.2, 0.3];

/// Connected resamples allowed before the obstacle layout is redrawn.
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    /// Side of the square grid, in cells.
    pub size: usize,
    pub n_agents: usize,
    /// Obstacle fraction in `[0, 0.5]`.
    pub density: f64,
    pub seed: u64,
    pub episode_cap: u32,
}

impl ScenarioSpec {
    pub fn new(size: usize, n_agents: usize, density: f64, seed: u64) -> Self {
        ScenarioSpec {
            size,
            n_agents,
            density,
            seed,
            episode_cap: DEFAULT_EPISODE_CAP,
        }
    }

    pub fn obstacle_count(&self) -> usize {
        (self.density * (self.size * self.size) as f64).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::contract("size must be positive"));
        }
        if !(0.0..=0.5).contains(&self.density) {
            return Err(Error::contract(format!("density {} outside [0, 0.5]", self.density)));
        }
        if self.n_agents == 0 {
            return Err(Error::contract("need at least one agent"));
        }
        let free = self.size * self.size - self.obstacle_count();
        if self.n_agents > free {
            return Err(Error::contract(format!(
                "{} agents do not fit in {free} free cells",
                self.n_agents
            )));
        }
        if self.episode_cap == 0 {
            return Err(Error::contract("episode cap must be positive"));
        }
        Ok(())
    }
}

/// Connected-component label per cell (`usize::MAX` on obstacles).
fn components(grid: &GridMap) -> Vec<usize> {
    let mut label = vec![usize::MAX; grid.n_cells()];
    let mut next = 0;
    for seed in grid.free_cells() {
        if label[grid.index(seed)] != usize::MAX {
            continue;
        }
        let mut stack = vec![seed];
        label[grid.index(seed)] = next;
        while let Some(c) = stack.pop() {
            for n in grid.neighbors(c) {
                if label[grid.index(n)] == usize::MAX {
                    label[grid.index(n)] = next;
                    stack.push(n);
                }
            }
        }
        next += 1;
    }
    label
}

/// Deterministic random instance: `⌊density·size²⌋` obstacles placed
/// uniformly, then distinct starts and distinct goals with every
/// start/goal pair connected.
pub fn generate_instance(spec: &ScenarioSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cells = spec.size * spec.size;
    'layout: loop {
        let mut obstacles = vec![false; cells];
        for k in index::sample(&mut rng, cells, spec.obstacle_count()) {
            obstacles[k] = true;
        }
        let grid = GridMap::from_obstacles(spec.size, spec.size, obstacles)?;
        let label = components(&grid);
        let mut open_starts: Vec<Cell> = grid.free_cells().collect();
        let mut open_goals = open_starts.clone();
        let mut starts = Vec::with_capacity(spec.n_agents);
        let mut goals = Vec::with_capacity(spec.n_agents);
        let mut resamples = 0;
        while starts.len() < spec.n_agents {
            let si = rng.random_range(0..open_starts.len());
            let gi = rng.random_range(0..open_goals.len());
            let (s, g) = (open_starts[si], open_goals[gi]);
            if label[grid.index(s)] == label[grid.index(g)] {
                starts.push(open_starts.swap_remove(si));
                goals.push(open_goals.swap_remove(gi));
                continue;
            }
            resamples += 1;
            if resamples > MAX_RESAMPLES {
                continue 'layout;
            }
        }
        return Instance::new(grid, starts, goals);
    }
}

/// Training-mode scenario: size 10 (twice as likely), 40 or 70; density
/// from a triangular distribution on `[0, 0.5]` with the given mode.
pub fn training_spec(n_agents: usize, mode: f64, seed: u64) -> Result<ScenarioSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [10usize, 40, 70];
    let pick = WeightedIndex::new([2, 1, 1]).expect("static weights");
    let size = sizes[pick.sample(&mut rng)];
    let tri = Triangular::new(0.0, 0.5, mode)
        .map_err(|e| Error::contract(format!("triangular mode {mode}: {e}")))?;
    Ok(ScenarioSpec::new(size, n_agents, tri.sample(&mut rng), rng.random()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Coupled(PlannerConfig),
    Prioritized(PolicyConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Coupled(_) => "coupled",
            Method::Prioritized(_) => "prioritized",
        }
    }
}

/// Runs one episode of `method` on the instance for `spec`.
pub fn run_case(spec: &ScenarioSpec, method: &Method) -> Result<ExecutionTrace> {
    run_instance(&generate_instance(spec)?, method, spec.seed, spec.episode_cap)
}

/// Runs one episode on a given instance; `seed` drives the policy's coin flips.
pub fn run_instance(instance: &Instance, method: &Method, seed: u64, episode_cap: u32) -> Result<ExecutionTrace> {
    match method {
        Method::Coupled(config) => {
            let result = coupled_planner::plan(instance, config)?;
            match result.solution() {
                Some(s) => s.replay(instance, episode_cap),
                None => Ok(ExecutionTrace::failed(instance, episode_cap)),
            }
        }
        Method::Prioritized(config) => {
            let mut policy = PrioritizedPolicy::new(instance, PolicyConfig { seed, ..*config });
            crate::mapf::execute_policy(instance, |s, i| policy.decide(s, i).actions, episode_cap)
        }
    }
}

/// Seeds `spec.seed, spec.seed + 1, …` for `n_cases` episodes, in order.
pub fn run_spec(spec: &ScenarioSpec, method: &Method, n_cases: usize) -> Result<Vec<ExecutionTrace>> {
    if n_cases == 0 {
        return Err(Error::contract("n_cases must be at least 1"));
    }
    (0..n_cases as u64)
        .into_par_iter()
        .map(|k| {
            let case = ScenarioSpec {
                seed: spec.seed.wrapping_add(k),
                ..*spec
            };
            run_case(&case, method)
        })
        .collect()
}

pub const CSV_HEADER: &str = "method,size,agents,density,seed0,n_cases,CA,CO,SR,MS,CR,TM";

pub fn csv_row(method: &Method, spec: &ScenarioSpec, row: &MeasurementRow) -> String {
    format!(
        "{},{},{},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
        method.name(),
        spec.size,
        spec.n_agents,
        spec.density,
        spec.seed,
        row.n_cases,
        row.ca,
        row.co,
        row.sr,
        row.ms,
        row.cr,
        row.tm
    )
}

/// Runs each `(method, spec)` job and renders the CSV table, header first.
pub fn benchmark_csv(jobs: &[(Method, ScenarioSpec)], n_cases: usize) -> Result<(String, Vec<MeasurementRow>)> {
    let mut csv = String::new();
    writeln!(csv, "{CSV_HEADER}").unwrap();
    let mut rows = Vec::with_capacity(jobs.len());
    for (method, spec) in jobs {
        let traces = run_spec(spec, method, n_cases)?;
        let row = measurements(&traces)?;
        writeln!(csv, "{}", csv_row(method, spec, &row)).unwrap();
        rows.push(row);
    }
    Ok((csv, rows))
}

/// Runs every spec and writes one CSV row per spec to `out_path`.
pub fn run_benchmark(
    specs: &[ScenarioSpec],
    method: &Method,
    n_cases: usize,
    out_path: &Path,
) -> Result<Vec<MeasurementRow>> {
    let jobs: Vec<_> = specs.iter().map(|s| (*method, *s)).collect();
    let (csv, rows) = benchmark_csv(&jobs, n_cases)?;
    std::fs::write(out_path, csv).map_err(|e| Error::io(out_path, e))?;
    Ok(rows)
}
