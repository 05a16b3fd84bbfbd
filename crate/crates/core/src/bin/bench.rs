use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prioritized_mapf::bench::{
    benchmark_csv, generate_instance, Method, ScenarioSpec, DEFAULT_EPISODE_CAP, SWEEP_AGENTS, SWEEP_DENSITIES,
};
use prioritized_mapf::cbrp_topology::DEFAULT_RADIUS;
use prioritized_mapf::coupled_planner::{self, Outcome, PlannerConfig};
use prioritized_mapf::mapf::format::{load_instance, map_to_string, scenario_to_string, write_bytes};
use prioritized_mapf::mapf::DEFAULT_FOV;
use prioritized_mapf::prioritized_policy::PolicyConfig;
use prioritized_mapf::priority_labeling::{build_datasets, picd};
use prioritized_mapf::{Error, Result};

#[derive(Parser)]
#[command(name = "bench", about = "Multi-agent path finding benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random map and scenario.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out_map: PathBuf,
        #[arg(long)]
        out_scen: PathBuf,
    },
    /// Plan a map/scenario pair with the coupled planner.
    Solve {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scen: PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long)]
        out_plan: PathBuf,
    },
    /// Build imitation datasets from planned instances.
    Label {
        /// Number of instances, seeded `seed, seed + 1, …`.
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        planner: PlannerArgs,
        #[arg(long, default_value_t = DEFAULT_FOV)]
        fov: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure one method on one scenario family.
    Run {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep agent counts and densities for one or both methods.
    Bench {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Coupled, MethodArg::Prioritized])]
        methods: Vec<MethodArg>,
        #[arg(long, default_value_t = 20)]
        size: usize,
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_AGENTS)]
        agents: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_DENSITIES)]
        densities: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 20)]
    size: usize,
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 0.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn spec(&self) -> ScenarioSpec {
        ScenarioSpec::new(self.size, self.agents, self.density, self.seed)
    }
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, default_value_t = 2.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 12_000)]
    timeout_ms: u64,
}

impl PlannerArgs {
    fn config(&self) -> PlannerConfig {
        PlannerConfig {
            epsilon: self.epsilon,
            timeout: Duration::from_millis(self.timeout_ms),
        }
    }
}

#[derive(Args)]
struct ExecArgs {
    /// Cluster radius for the prioritized policy.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    /// Episode cap in timesteps.
    #[arg(long, default_value_t = DEFAULT_EPISODE_CAP)]
    max_steps: u32,
    #[command(flatten)]
    planner: PlannerArgs,
}

impl ExecArgs {
    fn method(&self, m: MethodArg) -> Method {
        match m {
            MethodArg::Coupled => Method::Coupled(self.planner.config()),
            MethodArg::Prioritized => Method::Prioritized(PolicyConfig {
                radius: self.radius,
                ..PolicyConfig::default()
            }),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Coupled,
    Prioritized,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { scenario, out_map, out_scen } => {
            let inst = generate_instance(&scenario.spec())?;
            write_text(&out_map, &map_to_string(&inst.grid))?;
            write_text(&out_scen, &scenario_to_string(&inst))?;
        }
        Command::Solve { map, scen, planner, out_plan } => {
            let inst = load_instance(&map, &scen)?;
            let result = coupled_planner::plan(&inst, &planner.config())?;
            match &result.outcome {
                Outcome::Solved(sol) => {
                    write_text(&out_plan, &sol.to_text())?;
                    println!(
                        "solved cost={} makespan={} expanded={}",
                        sol.sum_of_costs(),
                        sol.makespan(),
                        result.expanded_nodes
                    );
                }
                Outcome::Timeout => return Err(Error::Contract("planner timed out".into())),
                Outcome::Unsolvable => return Err(Error::Contract("instance is unsolvable".into())),
            }
        }
        Command::Label { count, scenario, planner, fov, out } => {
            let instances = (0..count as u64)
                .map(|k| {
                    generate_instance(&ScenarioSpec {
                        seed: scenario.seed.wrapping_add(k),
                        ..scenario.spec()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let ds = build_datasets(&instances, &planner.config(), fov)?;
            write_bytes(&out, &picd::encode(&ds)?)?;
            println!("{}", ds.summary());
        }
        Command::Run { method, scenario, cases, exec, out } => {
            let spec = ScenarioSpec {
                episode_cap: exec.max_steps,
                ..scenario.spec()
            };
            let (csv, _) = benchmark_csv(&[(exec.method(method), spec)], cases)?;
            write_text(&out, &csv)?;
            print!("{csv}");
        }
        Command::Bench { methods, size, agents, densities, seed, cases, exec, out } => {
            let mut jobs = Vec::new();
            for &m in &methods {
                for &n in &agents {
                    for &d in &densities {
                        let spec = ScenarioSpec {
                            episode_cap: exec.max_steps,
                            ..ScenarioSpec::new(size, n, d, seed)
                        };
                        jobs.push((exec.method(m), spec));
                    }
                }
            }
            let (csv, _) = benchmark_csv(&jobs, cases)?;
            write_text(&out, &csv)?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Contract(_) => ExitCode::from(1),
                Error::Io { .. } | Error::Parse { .. } | Error::Malformed { .. } => ExitCode::from(2),
            }
        }
    }
}
