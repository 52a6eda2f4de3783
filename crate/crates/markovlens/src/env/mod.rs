//! Classic-control environments reimplemented behind one interface: CartPole,
//! Pendulum, and Acrobot with the dynamics constants of their v1 reference
//! versions. Dynamics, rewards, and termination are deterministic given state
//! and action; randomness enters only through reset sampling.

mod acrobot;
mod cartpole;
mod pendulum;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use pendulum::Pendulum;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::streams;

/// Action-space descriptor exposed by an environment handle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

pub trait Environment: Send {
    fn name(&self) -> &'static str;
    fn observation_dim(&self) -> usize;
    fn observation_labels(&self) -> Vec<String>;
    fn action_space(&self) -> ActionSpace;
    fn episode_limit(&self) -> usize;
    /// Starts a new episode. `Some(seed)` reseeds the environment's RNG;
    /// `None` draws the next initial state from the existing stream.
    fn reset(&mut self, seed: Option<u64>) -> Vec<f64>;
    /// Advances one step. Stepping a finished episode without reset is a
    /// contract violation, as is an action outside the action space.
    fn step(&mut self, action: Action) -> Result<StepOutcome>;
    /// Internal state vector (diagnostics; not the observation).
    fn state_vector(&self) -> Vec<f64>;
    /// Overwrites the internal state (same layout as [`state_vector`]) while
    /// leaving episode bookkeeping untouched. Values must be finite and the
    /// length must match; physical plausibility is the caller's business.
    ///
    /// [`state_vector`]: Environment::state_vector
    fn set_state(&mut self, state: &[f64]) -> Result<()>;
}

pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "CartPole-v1" => Ok(Box::new(CartPole::new())),
        "Pendulum-v1" => Ok(Box::new(Pendulum::new())),
        "Acrobot-v1" => Ok(Box::new(Acrobot::new())),
        other => Err(Error::Config(format!(
            "unknown environment \"{other}\" (expected CartPole-v1, Pendulum-v1, or Acrobot-v1)"
        ))),
    }
}

pub(crate) fn copy_state(env_name: &str, target: &mut [f64], source: &[f64]) -> Result<()> {
    if source.len() != target.len() {
        return Err(Error::Contract(format!(
            "{env_name}: set_state expects {} values, got {}",
            target.len(),
            source.len()
        )));
    }
    if source.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!(
            "{env_name}: set_state values must be finite"
        )));
    }
    target.copy_from_slice(source);
    Ok(())
}

pub(crate) fn env_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::ENV);
    rng
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    rng.random_range(low..high)
}

pub(crate) fn discrete_action(action: Action, n: usize, env: &str) -> Result<usize> {
    match action {
        Action::Discrete(a) if a < n => Ok(a),
        other => Err(Error::Contract(format!(
            "{env}: expected a discrete action in 0..{n}, got {other:?}"
        ))),
    }
}

pub(crate) fn continuous_action(action: Action, env: &str) -> Result<f64> {
    match action {
        Action::Continuous(u) if u.is_finite() => Ok(u),
        other => Err(Error::Contract(format!(
            "{env}: expected a finite continuous action, got {other:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roster_and_descriptors() {
        let cp = make_env("CartPole-v1").unwrap();
        assert_eq!(cp.observation_dim(), 4);
        assert_eq!(cp.action_space(), ActionSpace::Discrete(2));
        assert_eq!(cp.episode_limit(), 500);

        let pd = make_env("Pendulum-v1").unwrap();
        assert_eq!(pd.observation_dim(), 3);
        assert_eq!(
            pd.action_space(),
            ActionSpace::Continuous {
                low: -2.0,
                high: 2.0
            }
        );
        assert_eq!(pd.episode_limit(), 200);

        let ab = make_env("Acrobot-v1").unwrap();
        assert_eq!(ab.observation_dim(), 6);
        assert_eq!(ab.action_space(), ActionSpace::Discrete(3));
        assert_eq!(ab.episode_limit(), 500);
    }

    #[test]
    fn unknown_name_is_a_config_error() {
        let err = match make_env("FrozenLake-v1") {
            Err(e) => e,
            Ok(_) => panic!("FrozenLake-v1 should not resolve"),
        };
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("FrozenLake-v1"));
    }

    #[test]
    fn reset_is_reproducible_across_handles() {
        for name in ["CartPole-v1", "Pendulum-v1", "Acrobot-v1"] {
            let mut a = make_env(name).unwrap();
            let mut b = make_env(name).unwrap();
            let oa = a.reset(Some(77));
            let ob = b.reset(Some(77));
            assert_eq!(oa, ob, "{name}");
            assert_eq!(a.reset(Some(77)), oa, "{name}: same seed twice");
        }
    }

    #[test]
    fn unseeded_reset_continues_the_stream() {
        let mut env = make_env("CartPole-v1").unwrap();
        let first = env.reset(Some(5));
        let second = env.reset(None);
        assert_ne!(first, second);
        // replay: the pair (seeded, unseeded) is itself deterministic
        let mut replay = make_env("CartPole-v1").unwrap();
        assert_eq!(replay.reset(Some(5)), first);
        assert_eq!(replay.reset(None), second);
    }

    #[test]
    fn stepping_without_reset_is_a_contract_violation() {
        let mut env = make_env("CartPole-v1").unwrap();
        assert!(env.step(Action::Discrete(0)).is_err());
    }

    #[test]
    fn wrong_action_kind_is_rejected() {
        let mut env = make_env("CartPole-v1").unwrap();
        env.reset(Some(1));
        assert!(env.step(Action::Continuous(0.3)).is_err());
        assert!(env.step(Action::Discrete(2)).is_err());
        let mut pd = make_env("Pendulum-v1").unwrap();
        pd.reset(Some(1));
        assert!(pd.step(Action::Discrete(0)).is_err());
        assert!(pd.step(Action::Continuous(f64::NAN)).is_err());
    }
}
