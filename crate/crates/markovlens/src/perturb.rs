//! Observation-space perturbations: i.i.d. Gaussian noise, a shared AR(p)
//! noise process, and dimension dropping, composable over any environment.
//! Noise indexes the full observation space and dropping applies last.
//! Perturbations never touch dynamics, rewards, or termination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::env::{Action, ActionSpace, Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::streams;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNoiseSpec {
    pub mean: f64,
    pub variance: f64,
    pub target_dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArNoiseSpec {
    /// ρ_0..ρ_{p−1}, coefficients on z_t..z_{t−p+1}.
    pub alphas: Vec<f64>,
    /// Innovation standard deviation.
    pub sigma: f64,
    pub target_dims: Vec<usize>,
}

impl ArNoiseSpec {
    /// True when Σ|ρ_ℓ| ≥ 1 and the recurrence may not be stationary.
    pub fn is_explosive(&self) -> bool {
        self.alphas.iter().map(|a| a.abs()).sum::<f64>() >= 1.0
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }
}

/// Last p values of the AR process, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct ArState {
    history: Vec<f64>,
}

impl ArState {
    pub fn new(order: usize) -> ArState {
        ArState {
            history: vec![0.0; order],
        }
    }

    pub fn from_history(history: Vec<f64>) -> ArState {
        ArState { history }
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|h| *h = 0.0);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropSpec {
    pub dropped_dims: Vec<usize>,
}

fn check_dims(dims: &[usize], len: usize, what: &str) -> Result<()> {
    for (i, &d) in dims.iter().enumerate() {
        if d >= len {
            return Err(Error::Config(format!(
                "{what}: dimension index {d} out of range for a {len}-dimensional observation"
            )));
        }
        if dims[..i].contains(&d) {
            return Err(Error::Config(format!(
                "{what}: duplicate dimension index {d}"
            )));
        }
    }
    Ok(())
}

/// Adds an independent N(μ, σ²) draw to each targeted entry.
pub fn gaussian_perturb(
    obs: &[f64],
    spec: &GaussianNoiseSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if spec.variance < 0.0 {
        return Err(Error::Config(format!(
            "gaussian noise: variance must be ≥ 0, got {}",
            spec.variance
        )));
    }
    check_dims(&spec.target_dims, obs.len(), "gaussian noise")?;
    let mut out = obs.to_vec();
    if spec.variance > 0.0 {
        let normal = Normal::new(spec.mean, spec.variance.sqrt()).expect("finite parameters");
        for &d in &spec.target_dims {
            out[d] += normal.sample(rng);
        }
    } else {
        for &d in &spec.target_dims {
            out[d] += spec.mean;
        }
    }
    Ok(out)
}

/// Advances the AR recurrence z_{t+1} = Σ_ℓ ρ_ℓ·z_{t−ℓ} + ε, ε ∼ N(0, σ²),
/// pushing the new value into the history. Returns z_{t+1}. No rng draw is
/// consumed when σ = 0.
pub fn ar_advance(state: &mut ArState, spec: &ArNoiseSpec, rng: &mut ChaCha8Rng) -> f64 {
    debug_assert_eq!(state.history.len(), spec.alphas.len());
    let mut z: f64 = spec
        .alphas
        .iter()
        .zip(&state.history)
        .map(|(a, h)| a * h)
        .sum();
    if spec.sigma > 0.0 {
        z += Normal::new(0.0, spec.sigma).expect("finite sigma").sample(rng);
    }
    state.history.pop();
    state.history.insert(0, z);
    z
}

/// Adds the shared AR value z to every targeted entry.
pub fn ar_perturb(obs: &[f64], z: f64, spec: &ArNoiseSpec) -> Result<Vec<f64>> {
    check_dims(&spec.target_dims, obs.len(), "autoregressive noise")?;
    let mut out = obs.to_vec();
    for &d in &spec.target_dims {
        out[d] += z;
    }
    Ok(out)
}

/// Removes the dropped entries, preserving the order of the rest.
pub fn drop_dims(obs: &[f64], spec: &DropSpec) -> Result<Vec<f64>> {
    check_dims(&spec.dropped_dims, obs.len(), "dimension drop")?;
    if spec.dropped_dims.len() >= obs.len() {
        return Err(Error::Config(
            "dimension drop: at least one observation dimension must remain".into(),
        ));
    }
    Ok(obs
        .iter()
        .enumerate()
        .filter(|(i, _)| !spec.dropped_dims.contains(i))
        .map(|(_, &v)| v)
        .collect())
}

/// Everything needed to rebuild a perturbed environment from scratch: the
/// base environment name plus the perturbation stack.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvRecipe {
    pub env_name: String,
    pub gaussian: Vec<GaussianNoiseSpec>,
    pub ar: Option<ArNoiseSpec>,
    pub drop: Option<DropSpec>,
}

impl EnvRecipe {
    pub fn bare(env_name: &str) -> EnvRecipe {
        EnvRecipe {
            env_name: env_name.to_string(),
            ..EnvRecipe::default()
        }
    }

    /// Builds the wrapped environment. `noise_seed` seeds the perturbation
    /// stream; the environment itself is seeded at reset.
    pub fn build(&self, noise_seed: u64) -> Result<PerturbedEnv> {
        let inner = crate::env::make_env(&self.env_name)?;
        PerturbedEnv::new(inner, self.clone(), noise_seed)
    }
}

/// An environment handle emitting perturbed observations while stepping the
/// true underlying dynamics.
pub struct PerturbedEnv {
    inner: Box<dyn Environment>,
    gaussian: Vec<GaussianNoiseSpec>,
    ar: Option<ArNoiseSpec>,
    ar_state: ArState,
    drop: Option<DropSpec>,
    rng: ChaCha8Rng,
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::NOISE);
    rng
}

impl PerturbedEnv {
    pub fn new(
        inner: Box<dyn Environment>,
        recipe: EnvRecipe,
        noise_seed: u64,
    ) -> Result<PerturbedEnv> {
        let dim = inner.observation_dim();
        for g in &recipe.gaussian {
            if g.variance < 0.0 {
                return Err(Error::Config(format!(
                    "gaussian noise: variance must be ≥ 0, got {}",
                    g.variance
                )));
            }
            check_dims(&g.target_dims, dim, "gaussian noise")?;
        }
        if let Some(ar) = &recipe.ar {
            if ar.alphas.is_empty() {
                return Err(Error::Config(
                    "autoregressive noise: alphas must be nonempty".into(),
                ));
            }
            if ar.sigma < 0.0 {
                return Err(Error::Config(format!(
                    "autoregressive noise: sigma must be ≥ 0, got {}",
                    ar.sigma
                )));
            }
            check_dims(&ar.target_dims, dim, "autoregressive noise")?;
            if ar.is_explosive() {
                log::warn!(
                    "AR coefficients {:?} have Σ|ρ| ≥ 1; the noise process may diverge",
                    ar.alphas
                );
            }
        }
        if let Some(drop) = &recipe.drop {
            check_dims(&drop.dropped_dims, dim, "dimension drop")?;
            if drop.dropped_dims.len() >= dim {
                return Err(Error::Config(
                    "dimension drop: at least one observation dimension must remain".into(),
                ));
            }
        }
        let ar_state = ArState::new(recipe.ar.as_ref().map_or(0, |a| a.order()));
        Ok(PerturbedEnv {
            inner,
            gaussian: recipe.gaussian,
            ar: recipe.ar,
            ar_state,
            drop: recipe.drop,
            rng: noise_rng(noise_seed),
        })
    }

    /// Applies the stack to a raw observation. `z` is this step's AR value.
    fn perturb(&mut self, obs: Vec<f64>, z: f64) -> Vec<f64> {
        let mut obs = obs;
        for g in &self.gaussian {
            obs = gaussian_perturb(&obs, g, &mut self.rng).expect("validated at construction");
        }
        if let Some(ar) = &self.ar {
            obs = ar_perturb(&obs, z, ar).expect("validated at construction");
        }
        if let Some(drop) = &self.drop {
            obs = drop_dims(&obs, drop).expect("validated at construction");
        }
        obs
    }
}

impl Environment for PerturbedEnv {
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn observation_dim(&self) -> usize {
        let dropped = self.drop.as_ref().map_or(0, |d| d.dropped_dims.len());
        self.inner.observation_dim() - dropped
    }

    fn observation_labels(&self) -> Vec<String> {
        let labels = self.inner.observation_labels();
        match &self.drop {
            None => labels,
            Some(d) => labels
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !d.dropped_dims.contains(i))
                .map(|(_, l)| l)
                .collect(),
        }
    }

    fn action_space(&self) -> ActionSpace {
        self.inner.action_space()
    }

    fn episode_limit(&self) -> usize {
        self.inner.episode_limit()
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(s) = seed {
            self.rng = noise_rng(s);
        }
        self.ar_state.reset();
        let obs = self.inner.reset(seed);
        // the AR process contributes z = 0 at reset; it advances on steps
        self.perturb(obs, 0.0)
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let out = self.inner.step(action)?;
        let z = match &self.ar {
            Some(ar) => ar_advance(&mut self.ar_state, ar, &mut self.rng),
            None => 0.0,
        };
        let observation = self.perturb(out.observation, z);
        Ok(StepOutcome {
            observation,
            reward: out.reward,
            terminated: out.terminated,
            truncated: out.truncated,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        self.inner.state_vector()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        self.inner.set_state(state)
    }
}
