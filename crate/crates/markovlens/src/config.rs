//! Experiment configuration: JSON schema, validation, and enumeration of
//! the perturbation conditions each environment runs under.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::env::make_env;
use crate::error::{Error, Result};
use crate::perturb::{ArNoiseSpec, DropSpec, EnvRecipe, GaussianNoiseSpec};

/// A dimension referenced either by index or by label.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DimRef {
    Index(usize),
    Label(String),
}

impl DimRef {
    fn resolve(&self, labels: &[String]) -> Result<usize> {
        match self {
            DimRef::Index(i) => {
                if *i < labels.len() {
                    Ok(*i)
                } else {
                    Err(Error::Config(format!(
                        "dimension index {i} out of range (environment has {})",
                        labels.len()
                    )))
                }
            }
            DimRef::Label(name) => labels.iter().position(|l| l == name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown dimension label {name:?} (available: {})",
                    labels.join(", ")
                ))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    name: String,
    time_steps: usize,
    #[serde(default)]
    observations: Option<Vec<String>>,
    #[serde(default)]
    n_envs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGaussian {
    mean: f64,
    variance: f64,
    #[serde(default)]
    target_dims: Option<Vec<DimRef>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAr {
    alphas: Vec<f64>,
    sigma: f64,
    #[serde(default)]
    target_dims: Option<Vec<DimRef>>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(default)]
    gaussian: Vec<RawGaussian>,
    #[serde(default)]
    auto_regressive: BTreeMap<String, Vec<RawAr>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawDrop {
    One(DimRef),
    Many(Vec<DimRef>),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcmciSettings {
    pub tau_max: usize,
    pub alpha: f64,
    pub rollout_steps: usize,
    pub runs: usize,
}

impl Default for PcmciSettings {
    fn default() -> PcmciSettings {
        PcmciSettings {
            tau_max: 5,
            alpha: 0.05,
            rollout_steps: 2000,
            runs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    environments: Vec<RawEnvironment>,
    #[serde(default)]
    noise_strategies: RawNoise,
    #[serde(default)]
    drop_dimensions: Vec<RawDrop>,
    #[serde(default)]
    seeds: Option<usize>,
    #[serde(default)]
    pcmci: Option<PcmciSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub name: String,
    pub time_steps: usize,
    /// Canonical observation labels of the environment.
    pub labels: Vec<String>,
}

/// One perturbation arm of the sweep, resolved against one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: String,
    pub recipe: EnvRecipe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGridEntry {
    pub mean: f64,
    pub variance: f64,
    pub target_dims: Option<Vec<DimRef>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArGridEntry {
    pub alphas: Vec<f64>,
    pub sigma: f64,
    pub target_dims: Option<Vec<DimRef>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environments: Vec<EnvironmentSpec>,
    pub gaussian: Vec<GaussianGridEntry>,
    pub auto_regressive: BTreeMap<String, Vec<ArGridEntry>>,
    pub drop_conditions: Vec<Vec<DimRef>>,
    pub seeds: usize,
    pub pcmci: PcmciSettings,
}

/// Parses and validates a JSON config document. Unknown keys are rejected
/// with the offending path; omitted blocks fall back to defaults
/// (seeds = 5, pcmci = {tau_max 5, alpha 0.05, rollout_steps 2000, runs 5}).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        Error::Config(format!("config at {}: {}", e.path(), e.inner()))
    })?;

    if raw.environments.is_empty() {
        return Err(Error::Config("config: environments list is empty".into()));
    }

    let mut environments = Vec::new();
    for (idx, env) in raw.environments.iter().enumerate() {
        let probe = make_env(&env.name)
            .map_err(|e| Error::Config(format!("environments[{idx}]: {e}")))?;
        let labels = probe.observation_labels();
        if let Some(ref obs) = env.observations {
            if *obs != labels {
                return Err(Error::Config(format!(
                    "environments[{idx}].observations: expected [{}] for {}, got [{}]",
                    labels.join(", "),
                    env.name,
                    obs.join(", ")
                )));
            }
        }
        if let Some(n) = env.n_envs {
            if n != 1 {
                return Err(Error::Config(format!(
                    "environments[{idx}].n_envs: only 1 is supported, got {n}"
                )));
            }
        }
        if env.time_steps == 0 {
            return Err(Error::Config(format!(
                "environments[{idx}].time_steps: must be > 0"
            )));
        }
        environments.push(EnvironmentSpec {
            name: env.name.clone(),
            time_steps: env.time_steps,
            labels,
        });
    }

    for (idx, g) in raw.noise_strategies.gaussian.iter().enumerate() {
        if g.variance < 0.0 {
            return Err(Error::Config(format!(
                "noise_strategies.gaussian[{idx}].variance: must be ≥ 0, got {}",
                g.variance
            )));
        }
    }
    for (key, entries) in &raw.noise_strategies.auto_regressive {
        for (idx, ar) in entries.iter().enumerate() {
            if ar.alphas.is_empty() {
                return Err(Error::Config(format!(
                    "noise_strategies.auto_regressive[{key:?}][{idx}].alphas: must be nonempty"
                )));
            }
            if ar.sigma < 0.0 {
                return Err(Error::Config(format!(
                    "noise_strategies.auto_regressive[{key:?}][{idx}].sigma: must be ≥ 0, got {}",
                    ar.sigma
                )));
            }
        }
    }

    let seeds = raw.seeds.unwrap_or(5);
    if seeds == 0 {
        return Err(Error::Config("config: seeds must be ≥ 1".into()));
    }
    let pcmci = raw.pcmci.unwrap_or_default();
    if pcmci.tau_max < 2 {
        return Err(Error::Config("pcmci.tau_max: must be ≥ 2".into()));
    }
    if !(pcmci.alpha > 0.0 && pcmci.alpha < 1.0) {
        return Err(Error::Config("pcmci.alpha: must be in (0, 1)".into()));
    }
    if pcmci.rollout_steps <= 10 * (pcmci.tau_max + 1) {
        return Err(Error::Config(format!(
            "pcmci.rollout_steps: must exceed {} for tau_max {}",
            10 * (pcmci.tau_max + 1),
            pcmci.tau_max
        )));
    }
    if pcmci.runs == 0 {
        return Err(Error::Config("pcmci.runs: must be ≥ 1".into()));
    }

    let config = ExperimentConfig {
        environments,
        gaussian: raw
            .noise_strategies
            .gaussian
            .into_iter()
            .map(|g| GaussianGridEntry {
                mean: g.mean,
                variance: g.variance,
                target_dims: g.target_dims,
            })
            .collect(),
        auto_regressive: raw
            .noise_strategies
            .auto_regressive
            .into_iter()
            .map(|(k, v)| {
                (
                    k,
                    v.into_iter()
                        .map(|ar| ArGridEntry {
                            alphas: ar.alphas,
                            sigma: ar.sigma,
                            target_dims: ar.target_dims,
                        })
                        .collect(),
                )
            })
            .collect(),
        drop_conditions: raw
            .drop_dimensions
            .into_iter()
            .map(|d| match d {
                RawDrop::One(r) => vec![r],
                RawDrop::Many(rs) => rs,
            })
            .collect(),
        seeds,
        pcmci,
    };

    // surface unresolvable labels and duplicate ids now, not mid-sweep
    for env in &config.environments {
        config.conditions_for(env)?;
    }
    Ok(config)
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn dims_tag(dims: &Option<Vec<DimRef>>, labels: &[String]) -> Result<(String, Vec<usize>)> {
    match dims {
        None => Ok(("all".to_string(), (0..labels.len()).collect())),
        Some(refs) => {
            let mut idx = Vec::new();
            for r in refs {
                let i = r.resolve(labels)?;
                if idx.contains(&i) {
                    return Err(Error::Config(format!(
                        "duplicate dimension {} in target list",
                        labels[i]
                    )));
                }
                idx.push(i);
            }
            if idx.is_empty() {
                return Err(Error::Config("empty target dimension list".into()));
            }
            let tag = idx
                .iter()
                .map(|&i| labels[i].clone())
                .collect::<Vec<_>>()
                .join("+");
            Ok((tag, idx))
        }
    }
}

impl ExperimentConfig {
    /// Enumerates the conditions for one environment, in sweep order:
    /// baseline, the Gaussian grid, the AR grid (map order), then drops.
    /// Condition ids double as directory names.
    pub fn conditions_for(&self, env: &EnvironmentSpec) -> Result<Vec<Condition>> {
        let labels = &env.labels;
        let mut out = vec![Condition {
            id: "baseline".to_string(),
            recipe: EnvRecipe::bare(&env.name),
        }];

        for g in &self.gaussian {
            let (tag, dims) = dims_tag(&g.target_dims, labels)?;
            let mut recipe = EnvRecipe::bare(&env.name);
            recipe.gaussian.push(GaussianNoiseSpec {
                mean: g.mean,
                variance: g.variance,
                target_dims: dims,
            });
            out.push(Condition {
                id: format!("gaussian({},{},{tag})", fmt_num(g.mean), fmt_num(g.variance)),
                recipe,
            });
        }

        for entries in self.auto_regressive.values() {
            for ar in entries {
                let (tag, dims) = dims_tag(&ar.target_dims, labels)?;
                let mut recipe = EnvRecipe::bare(&env.name);
                recipe.ar = Some(ArNoiseSpec {
                    alphas: ar.alphas.clone(),
                    sigma: ar.sigma,
                    target_dims: dims,
                });
                let alphas = ar
                    .alphas
                    .iter()
                    .map(|a| fmt_num(*a))
                    .collect::<Vec<_>>()
                    .join("+");
                out.push(Condition {
                    id: format!(
                        "ar({},{alphas},{},{tag})",
                        ar.alphas.len(),
                        fmt_num(ar.sigma)
                    ),
                    recipe,
                });
            }
        }

        for refs in &self.drop_conditions {
            let (tag, dims) = dims_tag(&Some(refs.clone()), labels)?;
            if dims.len() >= labels.len() {
                return Err(Error::Config(format!(
                    "drop_dimensions: dropping every dimension of {}",
                    env.name
                )));
            }
            let mut recipe = EnvRecipe::bare(&env.name);
            recipe.drop = Some(DropSpec { dropped_dims: dims });
            out.push(Condition {
                id: format!("drop({tag})"),
                recipe,
            });
        }

        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                if a.id == b.id {
                    return Err(Error::Config(format!(
                        "duplicate condition id {:?}",
                        a.id
                    )));
                }
            }
        }
        Ok(out)
    }
}
