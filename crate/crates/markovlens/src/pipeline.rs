//! Experiment orchestration: the seed protocol, per-run training and panel
//! collection, the bounded worker pool, resumable result directories, and
//! per-environment summary emission.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::{Array2, ArrayView1};

use crate::config::{Condition, EnvironmentSpec, ExperimentConfig, PcmciSettings};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mvs::{compute_mvs, MvsConfig, MvsReport};
use crate::pcmci::{aggregate_runs, run_pcmci, AggregatedResult, TimeSeriesPanel};
use crate::perturb::EnvRecipe;
use crate::plot;
use crate::ppo::{stream_rng, train, Policy, PpoConfig};
use crate::report::{
    self, MvsRow, RunManifest, SummaryRow, SweepMeta,
};

pub const TRAINING_SEED_BASE: u64 = 10000;
pub const PANEL_SEED_BASE: u64 = 20000;
/// Episodes averaged into the per-seed final return.
const FINAL_RETURN_WINDOW: usize = 10;
/// Smoothing window for report-time learning-curve plots.
const SMOOTH_WINDOW: usize = 10;

/// Training seed for run `run_index`: 10000 + i.
pub fn seed_for(run_index: usize, seed_count: usize) -> Result<u64> {
    if run_index >= seed_count {
        return Err(Error::Contract(format!(
            "seed_for: run index {run_index} outside the configured count {seed_count}"
        )));
    }
    Ok(TRAINING_SEED_BASE + run_index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectedPanel {
    pub panel: TimeSeriesPanel,
    /// Row indices at which an episode terminated or truncated.
    pub episode_ends: Vec<usize>,
}

/// Runs the trained policy in its stochastic sampling mode for `steps`
/// environment steps, recording the (perturbed) observation at every step
/// and resetting on episode end. Short episodes are concatenated into one
/// panel. Sampling (rather than argmax/mean) actions keeps the observed
/// process genuinely stochastic, which the partial-correlation tests need:
/// argmax rollouts of a solved policy are near-deterministic orbits whose
/// unmodeled nonlinearity shows up as spurious multi-lag structure.
pub fn collect_panel(
    policy: &Policy,
    recipe: &EnvRecipe,
    steps: usize,
    seed: u64,
) -> Result<CollectedPanel> {
    let mut env = recipe.build(seed)?;
    let dim = env.observation_dim();
    if policy.obs_dim() != dim {
        return Err(Error::Contract(format!(
            "collect_panel: policy expects {} dims, environment provides {dim}",
            policy.obs_dim()
        )));
    }
    let mut rng = stream_rng(seed, crate::streams::ACTION);
    let mut obs = env.reset(Some(seed));
    let mut data = Array2::zeros((steps, dim));
    let mut episode_ends = Vec::new();
    for row in 0..steps {
        data.row_mut(row).assign(&ArrayView1::from(&obs));
        let (action, _, _) = policy.act(&obs, &mut rng);
        let out = env.step(policy.execute(action))?;
        if out.terminated || out.truncated {
            episode_ends.push(row);
            obs = env.reset(None);
        } else {
            obs = out.observation;
        }
    }
    let panel = TimeSeriesPanel::new(data, env.observation_labels())?;
    Ok(CollectedPanel {
        panel,
        episode_ends,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub out_dir: PathBuf,
    pub env_filter: Option<String>,
    pub parallelism: usize,
    /// Overrides the config's seed count when set.
    pub seed_count: Option<usize>,
    /// Use the small-sample t multiplier (2.776) for the summary CI instead
    /// of the normal 1.96.
    pub t_ci: bool,
}

impl SweepOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> SweepOptions {
        SweepOptions {
            out_dir: out_dir.into(),
            env_filter: None,
            parallelism: 10,
            seed_count: None,
            t_ci: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub env: String,
    pub condition_id: String,
    pub seed: u64,
    pub final_return: Option<f64>,
    pub mvs: Option<f64>,
    pub n_links: Option<usize>,
    pub error: Option<String>,
    /// True when the run was restored from a completed manifest.
    pub resumed: bool,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub outcomes: Vec<RunOutcome>,
    pub failed_runs: usize,
}

struct Job {
    env: EnvironmentSpec,
    condition: Condition,
    seed: u64,
    pcmci: PcmciSettings,
    dir: PathBuf,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs the full sweep: every environment × condition × seed, scheduled on
/// a bounded worker pool. Completed runs found on disk are not recomputed.
/// Individual run failures are recorded and the sweep continues.
pub fn run_experiment(config: &ExperimentConfig, options: &SweepOptions) -> Result<SweepReport> {
    let started = unix_now();
    let environments: Vec<&EnvironmentSpec> = config
        .environments
        .iter()
        .filter(|e| {
            options
                .env_filter
                .as_ref()
                .is_none_or(|wanted| *wanted == e.name)
        })
        .collect();
    if environments.is_empty() {
        return Err(Error::Config(match &options.env_filter {
            Some(name) => format!("no configured environment named {name:?}"),
            None => "no environments configured".to_string(),
        }));
    }
    let seed_count = options.seed_count.unwrap_or(config.seeds);
    if seed_count == 0 {
        return Err(Error::Config("seed count must be ≥ 1".into()));
    }

    let mut jobs = Vec::new();
    for env in &environments {
        for condition in config.conditions_for(env)? {
            for i in 0..seed_count {
                let seed = seed_for(i, seed_count)?;
                let dir = options
                    .out_dir
                    .join(&env.name)
                    .join(&condition.id)
                    .join(seed.to_string());
                jobs.push(Job {
                    env: (*env).clone(),
                    condition: condition.clone(),
                    seed,
                    pcmci: config.pcmci,
                    dir,
                });
            }
        }
    }

    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..jobs.len()).collect());
    let results: Mutex<Vec<Option<RunOutcome>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = options.parallelism.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().pop_front();
                let Some(idx) = next else { break };
                let outcome = execute_run(&jobs[idx]);
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<RunOutcome> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("every job index was executed"))
        .collect();

    for env in &environments {
        let conditions = config.conditions_for(env)?;
        emit_env_reports(env, &conditions, &outcomes, options)?;
    }

    let failed_runs = outcomes.iter().filter(|o| o.failed()).count();
    let meta = SweepMeta {
        started_unix: started,
        finished_unix: unix_now(),
        environments: environments.iter().map(|e| e.name.clone()).collect(),
        seed_count,
        parallelism: options.parallelism,
        failed_runs,
    };
    report::write_sweep_meta(&options.out_dir.join("sweep_meta.json"), &meta)?;

    Ok(SweepReport {
        outcomes,
        failed_runs,
    })
}

fn manifest_outcome(manifest: RunManifest, resumed: bool) -> RunOutcome {
    RunOutcome {
        env: manifest.env,
        condition_id: manifest.condition_id,
        seed: manifest.seed,
        final_return: manifest.final_return,
        mvs: manifest.mvs,
        n_links: manifest.n_contributing_links,
        error: manifest.error,
        resumed,
    }
}

fn execute_run(job: &Job) -> RunOutcome {
    let manifest_path = job.dir.join("manifest.json");
    if let Ok(manifest) = report::read_manifest(&manifest_path) {
        if manifest.complete
            && manifest.env == job.env.name
            && manifest.condition_id == job.condition.id
            && manifest.seed == job.seed
        {
            return manifest_outcome(manifest, true);
        }
    }

    let produced = std::fs::create_dir_all(&job.dir)
        .map_err(Error::from)
        .and_then(|()| run_one(job));
    let manifest = match produced {
        Ok(done) => RunManifest {
            env: job.env.name.clone(),
            condition_id: job.condition.id.clone(),
            seed: job.seed,
            complete: true,
            error: None,
            final_return: Some(done.final_return),
            mvs: Some(done.mvs.score),
            n_contributing_links: Some(done.mvs.contributions.len()),
            episodes: done.episodes,
            panel_episode_ends: done.panel_episode_ends,
        },
        Err(e) => RunManifest {
            env: job.env.name.clone(),
            condition_id: job.condition.id.clone(),
            seed: job.seed,
            complete: true,
            error: Some(e.to_string()),
            final_return: None,
            mvs: None,
            n_contributing_links: None,
            episodes: 0,
            panel_episode_ends: vec![],
        },
    };
    if let Err(e) = report::write_manifest(&manifest_path, &manifest) {
        log::warn!(
            "failed to persist manifest {}: {e}",
            manifest_path.display()
        );
    }
    manifest_outcome(manifest, false)
}

struct FinishedRun {
    final_return: f64,
    mvs: MvsReport,
    episodes: usize,
    panel_episode_ends: Vec<Vec<usize>>,
}

fn run_one(job: &Job) -> Result<FinishedRun> {
    let ppo = PpoConfig::new(job.env.time_steps);
    let (policy, curve) = train(&job.condition.recipe, &ppo, job.seed)?;
    report::write_curves_csv(
        &job.dir.join("curves.csv"),
        &curve,
        job.seed,
        &job.condition.id,
    )?;
    if curve.is_empty() {
        return Err(Error::Training(
            "no completed episodes during training".into(),
        ));
    }
    let tail = &curve[curve.len().saturating_sub(FINAL_RETURN_WINDOW)..];
    let final_return = tail.iter().map(|p| p.episode_return).sum::<f64>() / tail.len() as f64;

    let mut results = Vec::with_capacity(job.pcmci.runs);
    let mut panel_episode_ends = Vec::with_capacity(job.pcmci.runs);
    let mut var_names = Vec::new();
    for p in 0..job.pcmci.runs {
        let panel_seed = PANEL_SEED_BASE + p as u64;
        let collected = collect_panel(
            &policy,
            &job.condition.recipe,
            job.pcmci.rollout_steps,
            panel_seed,
        )?;
        report::write_panel_csv(&job.dir.join(format!("panel_{p}.csv")), &collected.panel)?;
        results.push(run_pcmci(
            &collected.panel,
            job.pcmci.tau_max,
            job.pcmci.alpha,
            panel_seed,
        )?);
        var_names = collected.panel.var_names.clone();
        panel_episode_ends.push(collected.episode_ends);
    }
    let aggregated = aggregate_runs(&results)?;
    report::write_links_csv(&job.dir.join("links.csv"), &aggregated, &var_names)?;
    let mvs = compute_mvs(
        &aggregated,
        &MvsConfig {
            tau_max: job.pcmci.tau_max,
            alpha_level: job.pcmci.alpha,
            p_floor: 1e-10,
        },
    )?;

    Ok(FinishedRun {
        final_return,
        mvs,
        episodes: curve.len(),
        panel_episode_ends,
    })
}

fn mean_and_ci(values: &[f64], multiplier: f64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, multiplier * var.sqrt() / n.sqrt())
}

fn emit_env_reports(
    env: &EnvironmentSpec,
    conditions: &[Condition],
    outcomes: &[RunOutcome],
    options: &SweepOptions,
) -> Result<()> {
    let env_dir = options.out_dir.join(&env.name);
    std::fs::create_dir_all(env_dir.join("plots"))?;
    let multiplier = if options.t_ci { 2.776 } else { 1.96 };

    let mut summary_rows = Vec::new();
    let mut mvs_rows = Vec::new();
    for condition in conditions {
        let runs: Vec<&RunOutcome> = outcomes
            .iter()
            .filter(|o| o.env == env.name && o.condition_id == condition.id)
            .collect();
        let returns: Vec<f64> = runs.iter().filter_map(|o| o.final_return).collect();
        let scores: Vec<f64> = runs.iter().filter_map(|o| o.mvs).collect();
        let (mean_return, ci) = mean_and_ci(&returns, multiplier);
        let (mvs_mean, _) = mean_and_ci(&scores, multiplier);
        summary_rows.push(SummaryRow {
            condition_id: condition.id.clone(),
            mean_return,
            return_ci95: ci,
            mvs: mvs_mean,
        });
        for run in &runs {
            if let (Some(mvs), Some(n)) = (run.mvs, run.n_links) {
                mvs_rows.push(MvsRow {
                    condition_id: condition.id.clone(),
                    seed_group: run.seed,
                    mvs,
                    n_contributing_links: n,
                });
            }
        }
    }
    report::write_summary_csv(&env_dir.join("summary.csv"), &summary_rows)?;
    report::write_mvs_csv(&env_dir.join("mvs.csv"), &mvs_rows)?;

    emit_env_plots(env, conditions, outcomes, &summary_rows, &env_dir)?;
    Ok(())
}

fn curve_series(
    env: &EnvironmentSpec,
    condition: &Condition,
    outcomes: &[RunOutcome],
    out_dir: &Path,
    color: &str,
    label: &str,
) -> Vec<plot::Series> {
    let mut series = Vec::new();
    for outcome in outcomes {
        if outcome.env != env.name
            || outcome.condition_id != condition.id
            || outcome.failed()
        {
            continue;
        }
        let path = out_dir
            .join(&env.name)
            .join(&condition.id)
            .join(outcome.seed.to_string())
            .join("curves.csv");
        let Ok(curve) = report::read_curves_csv(&path) else {
            continue;
        };
        let points: Vec<(f64, f64)> = curve
            .iter()
            .map(|p| (p.timestep as f64, p.episode_return))
            .collect();
        series.push(plot::Series {
            label: label.to_string(),
            color: color.to_string(),
            points: plot::smooth(&points, SMOOTH_WINDOW),
        });
    }
    series
}

fn emit_env_plots(
    env: &EnvironmentSpec,
    conditions: &[Condition],
    outcomes: &[RunOutcome],
    summary: &[SummaryRow],
    env_dir: &Path,
) -> Result<()> {
    let plots_dir = env_dir.join("plots");
    let out_dir = env_dir.parent().expect("env dir sits inside the out dir");
    let baseline = conditions.iter().find(|c| c.id == "baseline");

    for (idx, condition) in conditions.iter().enumerate() {
        let mut series = Vec::new();
        if let Some(base) = baseline {
            if base.id != condition.id {
                series.extend(curve_series(
                    env, base, outcomes, out_dir, "#bbbbbb", "baseline",
                ));
            }
        }
        let color = plot::PALETTE[idx % plot::PALETTE.len()];
        series.extend(curve_series(
            env,
            condition,
            outcomes,
            out_dir,
            color,
            &condition.id,
        ));
        let svg = plot::line_chart(
            &format!("{} — {}", env.name, condition.id),
            "timestep",
            "episode return (smoothed)",
            &series,
        );
        std::fs::write(
            plots_dir.join(format!("curves_{}.svg", condition.id)),
            svg,
        )?;
    }

    let scatter_points: Vec<(f64, f64, String)> = summary
        .iter()
        .filter(|r| r.mvs.is_finite() && r.mean_return.is_finite())
        .map(|r| (r.mvs, r.mean_return, r.condition_id.clone()))
        .collect();
    let svg = plot::scatter_chart(
        &format!("{} — return vs MVS", env.name),
        "MVS",
        "mean final return",
        &scatter_points,
    );
    std::fs::write(plots_dir.join("reward_vs_mvs.svg"), svg)?;

    let baseline_return = summary
        .iter()
        .find(|r| r.condition_id == "baseline")
        .map(|r| r.mean_return);
    let drop_rows: Vec<(String, f64)> = summary
        .iter()
        .filter(|r| r.condition_id.starts_with("drop("))
        .filter_map(|r| {
            let base = baseline_return?;
            if !r.mean_return.is_finite() || !base.is_finite() || base == 0.0 {
                return None;
            }
            Some((
                r.condition_id.clone(),
                (r.mean_return - base) / base.abs() * 100.0,
            ))
        })
        .collect();
    if !drop_rows.is_empty() {
        let svg = plot::bar_chart(
            &format!("{} — return change when dropping dimensions", env.name),
            "condition",
            "Δ mean return vs baseline (%)",
            &drop_rows,
        );
        std::fs::write(plots_dir.join("drop_returns.svg"), svg)?;
    }
    Ok(())
}

/// Standalone analysis of an external panel CSV: one PCMCI pass wrapped in
/// an R = 1 aggregate, plus its MVS.
pub fn analyze_panel(
    path: &Path,
    tau_max: usize,
    alpha: f64,
) -> Result<(AggregatedResult, MvsReport, Vec<String>)> {
    let panel = report::read_panel_csv(path)?;
    let result = run_pcmci(&panel, tau_max, alpha, 0)?;
    let aggregated = aggregate_runs(std::slice::from_ref(&result))?;
    let mvs = compute_mvs(
        &aggregated,
        &MvsConfig {
            tau_max,
            alpha_level: alpha,
            p_floor: 1e-10,
        },
    )?;
    Ok((aggregated, mvs, panel.var_names))
}
