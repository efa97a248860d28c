use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drecsim::agents::AgentKind;
use drecsim::harness::{
    load_simulator, run_benchmark, run_factorize, run_ingest, run_slate_eval, run_sweep, run_training, ExperimentPlan,
    HarnessConfig, HarnessError,
};
use log::error;

#[derive(Parser)]
#[command(name = "drecsim", version, about = "Simulated movie-recommendation RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate the dataset, writing summary statistics.
    Ingest(Common),
    /// Factorize the utility matrix and save the simulator model.
    Factorize(Common),
    /// Train one agent with one seed.
    Train(Common),
    /// Sweep one config key over candidate values.
    Sweep(Common),
    /// Compare agents over several seeds against the random baseline.
    Benchmark(Common),
    /// Train on slates and report NDCG.
    SlateEval(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed, overriding `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Episodes per run, overriding `experiment.episodes`.
    #[arg(long)]
    episodes: Option<usize>,
    /// Maximum concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory, overriding `experiment.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Agent for `train` and `sweep`, overriding `agent.kind`.
    #[arg(long)]
    agent: Option<AgentKind>,
}

impl Common {
    fn plan(&self) -> Result<ExperimentPlan, HarnessError> {
        let mut config = HarnessConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            config.experiment.seed = s;
        }
        if let Some(e) = self.episodes {
            config.experiment.episodes = e;
        }
        if let Some(o) = &self.out {
            config.experiment.output_dir = o.clone();
        }
        if let Some(a) = self.agent {
            config.agent.kind = Some(a);
        }
        if self.jobs == 0 {
            return Err(HarnessError::Config("--jobs must be >= 1".into()));
        }
        let mut plan = ExperimentPlan::new(config);
        plan.jobs = self.jobs;
        Ok(plan)
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Ingest(c) => {
            let s = run_ingest(&c.plan()?)?;
            println!("{} users, {} movies, {} ratings", s.users, s.movies, s.ratings);
        }
        Command::Factorize(c) => {
            let f = run_factorize(&c.plan()?)?;
            println!(
                "{} iterations, final error {:.6}",
                f.iterations(),
                f.errors.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Train(c) => {
            let plan = c.plan()?;
            let sim = load_simulator(&plan.config)?;
            let r = run_training(&plan, &sim)?;
            println!("{}: final moving mean {:.4}", r.stats.run_id, r.final_moving_mean);
        }
        Command::Sweep(c) => {
            let plan = c.plan()?;
            let sim = load_simulator(&plan.config)?;
            let r = run_sweep(&plan, &sim)?;
            for (i, row) in r.rows.iter().enumerate() {
                let mark = if i == r.best { " *" } else { "" };
                println!("{}={}: {:.4}{mark}", r.parameter, row.value, row.mean);
            }
        }
        Command::Benchmark(c) => {
            let plan = c.plan()?;
            let sim = load_simulator(&plan.config)?;
            for row in run_benchmark(&plan, &sim)?.rows {
                match row.ci_half_width {
                    Some(h) => println!("{}: {:.4} ± {:.4}", row.kind, row.mean, h),
                    None => println!("{}: {:.4}", row.kind, row.mean),
                }
            }
        }
        Command::SlateEval(c) => {
            let plan = c.plan()?;
            let sim = load_simulator(&plan.config)?;
            for row in run_slate_eval(&plan, &sim)?.rows {
                println!("{}: mean NDCG {:.4} (std {:.4})", row.kind, row.mean, row.std);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
