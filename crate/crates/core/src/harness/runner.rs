use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use super::{AgentSection, HarnessConfig, HarnessError, Result};
use crate::agents::{Agent, AgentKind, DqnAgent, PolicyAgent, RandomAgent};
use crate::environment::{EnvConfig, Environment, Observation};
use crate::ingest::{parse_movies, parse_users, parse_violence, Dataset, MovieDoc, UserProfile};
use crate::metrics::{ci95, mean, ndcg, sample_std, write_runs_csv, RunStatistics, IDEAL_RELEVANCE};
use crate::replay::Experience;
use crate::simulator::{factorize, Factorization, FactorizationModel, Simulator};

const AGENT_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// A config plus the execution knobs that don't belong in it.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub config: HarnessConfig,
    /// Maximum concurrent runs.
    pub jobs: usize,
    pub out: PathBuf,
}

impl ExperimentPlan {
    pub fn new(config: HarnessConfig) -> Self {
        Self {
            out: config.experiment.output_dir.clone(),
            config,
            jobs: 1,
        }
    }

    fn prepare_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
    }

    /// Runs `f` over `items` on at most `jobs` threads; results keep item
    /// order whatever the scheduling.
    fn par_runs<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
        let results: Vec<Result<R>> = self.pool()?.install(|| items.par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn write_metrics(path: &Path, runs: &[RunStatistics]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_runs_csv(&mut out, runs)?;
    out.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Data(format!("{}: {e}", path.display()))
}

/// User and movie tables only, sorted by id (the factor order).
pub fn load_catalog(config: &HarnessConfig) -> Result<(Vec<UserProfile>, Vec<MovieDoc>)> {
    let dir = &config.dataset.dir;
    let violence = match &config.dataset.violence_csv {
        Some(p) => parse_violence(File::open(p).map_err(|e| data_err(p, e))?)?,
        None => HashMap::new(),
    };
    let users_path = dir.join("users.dat");
    let movies_path = dir.join("movies.dat");
    let mut users = parse_users(File::open(&users_path).map_err(|e| data_err(&users_path, e))?)?;
    let mut movies = parse_movies(
        File::open(&movies_path).map_err(|e| data_err(&movies_path, e))?,
        &violence,
    )?;
    users.sort_by_key(|u| u.user_id);
    movies.sort_by_key(|m| m.movie_id);
    Ok((users, movies))
}

fn load_dataset(config: &HarnessConfig) -> Result<Dataset> {
    let dir = &config.dataset.dir;
    if !dir.join("ratings.dat").is_file() {
        return Err(HarnessError::Data(format!("no ratings.dat under {}", dir.display())));
    }
    Ok(Dataset::load(dir, config.dataset.violence_csv.as_deref())?)
}

/// Catalog plus the saved factorization.
pub fn load_simulator(config: &HarnessConfig) -> Result<Arc<Simulator>> {
    let path = config.factorization_path();
    if !path.is_file() {
        return Err(HarnessError::MissingFactorization(path));
    }
    let model = FactorizationModel::load(&path)?;
    let (users, movies) = load_catalog(config)?;
    Ok(Arc::new(Simulator::new(model, users, movies)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub users: usize,
    pub movies: usize,
    pub ratings: usize,
    pub mean_rating: f64,
    pub density: f64,
    pub violence_scored: usize,
}

/// Parses and cross-checks the dataset, writing `summary.csv`.
pub fn run_ingest(plan: &ExperimentPlan) -> Result<IngestSummary> {
    plan.prepare_out()?;
    let data = load_dataset(&plan.config)?;
    let u = data.utility_matrix()?;
    let summary = IngestSummary {
        users: u.n_users,
        movies: u.n_movies,
        ratings: u.len(),
        mean_rating: u.global_mean().unwrap_or(0.0),
        density: u.len() as f64 / (u.n_users as f64 * u.n_movies as f64),
        violence_scored: data.movies.iter().filter(|m| m.violence > 0.0).count(),
    };
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record(["metric", "value"])?;
    for (k, v) in [
        ("users", summary.users as f64),
        ("movies", summary.movies as f64),
        ("ratings", summary.ratings as f64),
        ("mean_rating", summary.mean_rating),
        ("density", summary.density),
        ("violence_scored", summary.violence_scored as f64),
    ] {
        w.write_record([k, &v.to_string()])?;
    }
    w.flush()?;
    info!(
        "ingested {} ratings from {} users on {} movies",
        summary.ratings, summary.users, summary.movies
    );
    Ok(summary)
}

/// Factorizes the utility matrix and saves the model where the training
/// commands look for it.
pub fn run_factorize(plan: &ExperimentPlan) -> Result<Factorization> {
    plan.prepare_out()?;
    let data = load_dataset(&plan.config)?;
    let u = data.utility_matrix()?;
    let opts = plan.config.factorization;
    info!(
        "factorizing {}x{} matrix, k = {}",
        u.n_users, u.n_movies, opts.components
    );
    let fact = factorize(&u, &opts)?;
    let path = plan.config.factorization_path();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    fact.model.save(&path)?;

    let mut w = open_csv(&plan.out.join("factorization_errors.csv"))?;
    w.write_record(["iteration", "error"])?;
    for (i, e) in fact.errors.iter().enumerate() {
        w.write_record([i.to_string(), e.to_string()])?;
    }
    w.flush()?;
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record(["metric", "value"])?;
    for (k, v) in [
        ("components", opts.components as f64),
        ("iterations", fact.iterations() as f64),
        ("converged", if fact.converged { 1.0 } else { 0.0 }),
        ("final_error", *fact.errors.last().unwrap_or(&f64::NAN)),
        ("observed_rmse", fact.model.observed_rmse(&u)),
    ] {
        w.write_record([k, &v.to_string()])?;
    }
    w.flush()?;
    info!("saved factorization to {}", path.display());
    Ok(fact)
}

pub fn build_agent(agents: &AgentSection, kind: AgentKind, n_actions: usize, seed: u64) -> Result<Box<dyn Agent>> {
    Ok(match kind {
        AgentKind::Random => Box::new(RandomAgent::new(n_actions, seed)),
        AgentKind::Dqn => Box::new(DqnAgent::new(agents.dqn.clone(), n_actions, seed)?),
        AgentKind::Reinforce => Box::new(PolicyAgent::reinforce(agents.reinforce.clone(), n_actions, seed)?),
        AgentKind::ActorCritic => Box::new(PolicyAgent::actor_critic(agents.actor_critic.clone(), n_actions, seed)?),
    })
}

fn env_for(sim: &Arc<Simulator>, base: &EnvConfig, seed: u64, slate_size: usize) -> Result<Environment> {
    let cfg = EnvConfig {
        seed: base.seed.wrapping_add(seed),
        slate_size,
        ..*base
    };
    Ok(Environment::new(Arc::clone(sim), cfg)?)
}

fn env_label(cfg: &EnvConfig) -> String {
    format!(
        "len{}-slate{}-wv{}",
        cfg.episode_length, cfg.slate_size, cfg.violence_weight
    )
}

fn single_episode(env: &mut Environment, agent: &mut dyn Agent, stats: &mut RunStatistics) -> Result<()> {
    let mut obs = env.reset(None);
    loop {
        let action = agent.act(&obs);
        let res = env.step(action)?;
        let loss = agent.observe(Experience {
            state: obs,
            action,
            reward: res.reward,
            done: res.done,
            next_state: res.observation,
        })?;
        stats.record_step(res.reward, loss);
        obs = res.observation;
        if res.done {
            break;
        }
    }
    stats.finish_episode(agent.end_episode()?);
    Ok(())
}

/// Plays one slate episode. `pick` chooses each slate (normally the agent's
/// top-k); the agent learns from the item the user chose. Records and
/// returns the episode's mean NDCG.
pub fn slate_episode<F>(
    env: &mut Environment,
    agent: &mut dyn Agent,
    stats: &mut RunStatistics,
    mut pick: F,
) -> Result<f64>
where
    F: FnMut(&Environment, &mut dyn Agent, &Observation) -> Result<Vec<usize>>,
{
    let mut obs = env.reset(None);
    let mut scores = Vec::with_capacity(env.config().episode_length);
    loop {
        let slate = pick(env, agent, &obs)?;
        let res = env.step_slate(&slate)?;
        scores.push(ndcg(&res.slate_ratings, IDEAL_RELEVANCE)?);
        let loss = agent.observe(Experience {
            state: obs,
            action: res.chosen_index,
            reward: res.reward,
            done: res.done,
            next_state: res.observation,
        })?;
        stats.record_step(res.reward, loss);
        obs = res.observation;
        if res.done {
            break;
        }
    }
    stats.finish_episode(agent.end_episode()?);
    let score = mean(&scores);
    stats.record_metric("ndcg", score);
    Ok(score)
}

/// One seeded single-item training run.
pub fn train_run(
    sim: &Arc<Simulator>,
    config: &HarnessConfig,
    kind: AgentKind,
    seed: u64,
    run_id: &str,
) -> Result<RunStatistics> {
    let episodes = config.experiment.episodes;
    if episodes == 0 {
        return Err(HarnessError::Config("experiment.episodes must be >= 1".into()));
    }
    let mut env = env_for(sim, &config.environment, seed, 1)?;
    let mut agent = build_agent(
        &config.agent,
        kind,
        env.n_actions(),
        seed.wrapping_add(AGENT_SEED_OFFSET),
    )?;
    let mut stats = RunStatistics::new(run_id, seed, kind.label(), env_label(env.config()));
    for _ in 0..episodes {
        single_episode(&mut env, agent.as_mut(), &mut stats)?;
    }
    info!(
        "{run_id}: final moving mean {:.3}",
        stats.final_moving_mean(config.experiment.window)?
    );
    Ok(stats)
}

fn slate_run(
    sim: &Arc<Simulator>,
    config: &HarnessConfig,
    kind: AgentKind,
    seed: u64,
    run_id: &str,
) -> Result<RunStatistics> {
    let k = config.experiment.slate_size;
    let mut env = env_for(sim, &config.environment, seed, k)?;
    let mut agent = build_agent(
        &config.agent,
        kind,
        env.n_actions(),
        seed.wrapping_add(AGENT_SEED_OFFSET),
    )?;
    let mut stats = RunStatistics::new(run_id, seed, kind.label(), env_label(env.config()));
    for _ in 0..config.experiment.episodes {
        slate_episode(&mut env, agent.as_mut(), &mut stats, |_, a, o| Ok(a.top_k(o, k)?))?;
    }
    Ok(stats)
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub stats: RunStatistics,
    pub final_moving_mean: f64,
}

/// Trains `config.agent.kind` (DQN when unset) once with the experiment seed.
pub fn run_training(plan: &ExperimentPlan, sim: &Arc<Simulator>) -> Result<TrainingReport> {
    plan.config.validate()?;
    plan.prepare_out()?;
    let kind = plan.config.agent.kind.unwrap_or(AgentKind::Dqn);
    let seed = plan.config.experiment.seed;
    let stats = train_run(sim, &plan.config, kind, seed, &format!("{kind}-s{seed}"))?;
    let final_moving_mean = stats.final_moving_mean(plan.config.experiment.window)?;
    write_metrics(&plan.out.join("metrics.csv"), std::slice::from_ref(&stats))?;
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record([
        "run_id",
        "seed",
        "model",
        "episodes",
        "total_steps",
        "final_moving_mean",
        "ci_half_width",
    ])?;
    w.write_record([
        stats.run_id.clone(),
        seed.to_string(),
        stats.model.clone(),
        stats.episodes.len().to_string(),
        stats.total_steps().to_string(),
        final_moving_mean.to_string(),
        String::new(),
    ])?;
    w.flush()?;
    Ok(TrainingReport {
        stats,
        final_moving_mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: toml::Value,
    pub finals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub ci_half_width: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub best: usize,
    pub runs: Vec<RunStatistics>,
}

/// Index of the best row: highest mean, then lowest spread, then first.
fn best_row(rows: &[SweepRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        if r.mean > b.mean || (r.mean == b.mean && r.std < b.std) {
            best = i;
        }
    }
    best
}

/// Trains the configured agent `experiment.runs` times for each candidate
/// value of the swept key, everything else frozen.
pub fn run_sweep(plan: &ExperimentPlan, sim: &Arc<Simulator>) -> Result<SweepReport> {
    let base = &plan.config;
    base.validate()?;
    let exp = &base.experiment;
    let key = exp
        .sweep_parameter
        .clone()
        .ok_or_else(|| HarnessError::Config("experiment.sweep_parameter is not set".into()))?;
    if exp.sweep_values.is_empty() {
        return Err(HarnessError::Config("experiment.sweep_values is empty".into()));
    }
    if exp.runs == 0 {
        return Err(HarnessError::Config("experiment.runs must be >= 1".into()));
    }
    let kind = base.agent.kind.unwrap_or(AgentKind::Dqn);
    let configs = exp
        .sweep_values
        .iter()
        .map(|v| {
            let c = base.with_override(&key, v)?;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    plan.prepare_out()?;

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..exp.runs as u64).map(move |r| (c, r)))
        .collect();
    let runs = plan.par_runs(&jobs, |&(c, r)| {
        let seed = exp.seed.wrapping_add(r);
        let id = format!("{key}={}-r{r}", exp.sweep_values[c]);
        train_run(sim, &configs[c], kind, seed, &id)
    })?;

    let mut rows = Vec::with_capacity(configs.len());
    for (c, value) in exp.sweep_values.iter().enumerate() {
        let finals = runs[c * exp.runs..(c + 1) * exp.runs]
            .iter()
            .map(|s| s.final_moving_mean(exp.window))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(SweepRow {
            value: value.clone(),
            mean: mean(&finals),
            std: sample_std(&finals),
            ci_half_width: ci95(&finals).ok().map(|c| c.1),
            finals,
        });
    }
    let best = best_row(&rows);

    write_metrics(&plan.out.join("metrics.csv"), &runs)?;
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record([
        "parameter",
        "value",
        "runs",
        "final_moving_mean",
        "std",
        "ci_half_width",
        "best",
    ])?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([
            key.clone(),
            r.value.to_string(),
            r.finals.len().to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            fmt_opt(r.ci_half_width),
            (i == best).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(SweepReport {
        parameter: key,
        rows,
        best,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub kind: AgentKind,
    pub finals: Vec<f64>,
    pub mean: f64,
    pub ci_half_width: Option<f64>,
    /// Mean moving-mean curve across seeds, with CI half width per episode
    /// when there are at least two seeds.
    pub curve: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<RunStatistics>,
}

impl BenchmarkReport {
    pub fn row(&self, kind: AgentKind) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Listed kinds in order, each once, with the random baseline appended when
/// missing.
fn with_baseline(kinds: &[AgentKind]) -> Vec<AgentKind> {
    let mut out: Vec<AgentKind> = Vec::new();
    for &k in kinds.iter().chain(std::iter::once(&AgentKind::Random)) {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

/// Multi-seed comparison of agents against the random baseline.
pub fn run_benchmark(plan: &ExperimentPlan, sim: &Arc<Simulator>) -> Result<BenchmarkReport> {
    let cfg = &plan.config;
    cfg.validate()?;
    let exp = &cfg.experiment;
    let kinds = with_baseline(&exp.benchmark_agents);
    if kinds.len() < 2 {
        return Err(HarnessError::Config(
            "benchmark needs at least one agent besides random".into(),
        ));
    }
    if let Some(k) = kinds.iter().find(|k| exp.seeds_for(**k) == 0) {
        return Err(HarnessError::Config(format!("no seeds for `{k}`")));
    }
    plan.prepare_out()?;
    let jobs: Vec<(AgentKind, u64)> = kinds
        .iter()
        .flat_map(|&k| (0..exp.seeds_for(k) as u64).map(move |s| (k, s)))
        .collect();
    let runs = plan.par_runs(&jobs, |&(k, s)| {
        let seed = exp.seed.wrapping_add(s);
        train_run(sim, cfg, k, seed, &format!("{k}-s{seed}"))
    })?;

    let mut rows = Vec::new();
    let mut offset = 0;
    for &k in &kinds {
        let group = &runs[offset..offset + exp.seeds_for(k)];
        offset += group.len();
        let curves = group
            .iter()
            .map(|s| s.moving_returns(exp.window))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let curve = (0..exp.episodes)
            .map(|e| {
                let vals: Vec<f64> = curves.iter().map(|c| c[e]).collect();
                (mean(&vals), ci95(&vals).ok().map(|c| c.1))
            })
            .collect();
        let finals: Vec<f64> = curves.iter().map(|c| *c.last().expect("episodes >= 1")).collect();
        rows.push(BenchmarkRow {
            kind: k,
            mean: mean(&finals),
            ci_half_width: ci95(&finals).ok().map(|c| c.1),
            finals,
            curve,
        });
    }

    write_metrics(&plan.out.join("metrics.csv"), &runs)?;
    let mut w = open_csv(&plan.out.join("curves.csv"))?;
    w.write_record(["model", "episode", "mean", "ci_low", "ci_high"])?;
    for r in &rows {
        for (e, (m, h)) in r.curve.iter().enumerate() {
            w.write_record([
                r.kind.label().to_string(),
                e.to_string(),
                m.to_string(),
                fmt_opt(h.map(|h| m - h)),
                fmt_opt(h.map(|h| m + h)),
            ])?;
        }
    }
    w.flush()?;
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record([
        "model",
        "seeds",
        "episodes",
        "final_moving_mean",
        "std",
        "ci_half_width",
    ])?;
    for r in &rows {
        w.write_record([
            r.kind.label().to_string(),
            r.finals.len().to_string(),
            exp.episodes.to_string(),
            r.mean.to_string(),
            sample_std(&r.finals).to_string(),
            fmt_opt(r.ci_half_width),
        ])?;
    }
    w.flush()?;
    Ok(BenchmarkReport { rows, runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlateRow {
    pub kind: AgentKind,
    /// Per-episode mean NDCG of every run, concatenated in seed order.
    pub ndcg: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct SlateReport {
    pub rows: Vec<SlateRow>,
    pub runs: Vec<RunStatistics>,
}

impl SlateReport {
    pub fn row(&self, kind: AgentKind) -> Option<&SlateRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Trains agents on slates of `experiment.slate_size` and reports NDCG
/// against the random baseline.
pub fn run_slate_eval(plan: &ExperimentPlan, sim: &Arc<Simulator>) -> Result<SlateReport> {
    let cfg = &plan.config;
    cfg.validate()?;
    let exp = &cfg.experiment;
    if exp.slate_size < 2 {
        return Err(HarnessError::Config(
            "slate-eval needs experiment.slate_size >= 2".into(),
        ));
    }
    let kinds = with_baseline(&exp.slate_agents);
    plan.prepare_out()?;
    let jobs: Vec<(AgentKind, u64)> = kinds
        .iter()
        .flat_map(|&k| (0..exp.seeds_for(k) as u64).map(move |s| (k, s)))
        .collect();
    let runs = plan.par_runs(&jobs, |&(k, s)| {
        let seed = exp.seed.wrapping_add(s);
        slate_run(sim, cfg, k, seed, &format!("{k}-slate{}-s{seed}", exp.slate_size))
    })?;

    let mut rows = Vec::new();
    for &k in &kinds {
        let scores: Vec<f64> = runs
            .iter()
            .filter(|r| r.model == k.label())
            .flat_map(|r| r.metric_series("ndcg"))
            .collect();
        if scores.is_empty() {
            return Err(HarnessError::Config(format!("no seeds for `{k}`")));
        }
        rows.push(SlateRow {
            kind: k,
            mean: mean(&scores),
            std: sample_std(&scores),
            min: scores.iter().copied().fold(f64::INFINITY, f64::min),
            max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ndcg: scores,
        });
    }

    write_metrics(&plan.out.join("metrics.csv"), &runs)?;
    let mut w = open_csv(&plan.out.join("summary.csv"))?;
    w.write_record([
        "model",
        "seeds",
        "slate_size",
        "mean_ndcg",
        "std",
        "min",
        "max",
        "ci_half_width",
    ])?;
    for r in &rows {
        let seeds = exp.seeds_for(r.kind);
        let per_run: Vec<f64> = runs
            .iter()
            .filter(|s| s.model == r.kind.label())
            .map(|s| mean(&s.metric_series("ndcg")))
            .collect();
        w.write_record([
            r.kind.label().to_string(),
            seeds.to_string(),
            exp.slate_size.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
            r.min.to_string(),
            r.max.to_string(),
            fmt_opt(ci95(&per_run).ok().map(|c| c.1)),
        ])?;
    }
    w.flush()?;
    Ok(SlateReport { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mean: f64, std: f64) -> SweepRow {
        SweepRow {
            value: toml::Value::Float(mean),
            finals: vec![],
            mean,
            std,
            ci_half_width: None,
        }
    }

    #[test]
    fn best_row_rules() {
        assert_eq!(best_row(&[row(1.0, 0.0)]), 0);
        assert_eq!(best_row(&[row(1.0, 0.0), row(2.0, 5.0)]), 1);
        assert_eq!(best_row(&[row(2.0, 3.0), row(2.0, 1.0)]), 1);
        assert_eq!(best_row(&[row(2.0, 1.0), row(2.0, 1.0)]), 0);
    }

    #[test]
    fn baseline_always_present_once() {
        assert_eq!(
            with_baseline(&[AgentKind::Dqn]),
            vec![AgentKind::Dqn, AgentKind::Random]
        );
        assert_eq!(
            with_baseline(&[AgentKind::Random, AgentKind::Dqn, AgentKind::Dqn]),
            vec![AgentKind::Random, AgentKind::Dqn]
        );
        assert_eq!(with_baseline(&[]), vec![AgentKind::Random]);
    }
}
