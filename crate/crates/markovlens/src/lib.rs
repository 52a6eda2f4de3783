//! markovlens: train PPO agents on classic control tasks under observation
//! perturbations, then quantify departures from first-order Markov structure
//! with PCMCI causal discovery and the Markov Violation Score (MVS).
//!
//! Module map:
//! - [`env`]: CartPole-v1 / Pendulum-v1 / Acrobot-v1 dynamics behind a common trait
//! - [`perturb`]: Gaussian noise, AR(p) noise, and dimension-dropping observation wrappers
//! - [`nn`]: fixed two-hidden-layer tanh MLP, reverse-mode gradients, Adam
//! - [`ppo`]: GAE + clipped-surrogate PPO for discrete and continuous actions
//! - [`citest`]: ParCorr conditional-independence test (OLS residuals, Student-t p)
//! - [`pcmci`]: PC1 parent selection, MCI link tests, Fisher aggregation
//! - [`mvs`]: the Markov Violation Score
//! - [`config`] / [`pipeline`] / [`report`] / [`plot`]: config-driven sweeps and artifacts

pub mod citest;
pub mod config;
pub mod env;
pub mod error;
pub mod mvs;
pub mod nn;
pub mod pcmci;
pub mod perturb;
pub mod pipeline;
pub mod plot;
pub mod ppo;
pub mod report;
pub mod special;

pub use error::{Error, Result};

/// ChaCha stream ids used to derive independent substreams from one run seed.
pub(crate) mod streams {
    pub const ENV: u64 = 0;
    pub const POLICY_INIT: u64 = 1;
    pub const ACTION: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const NOISE: u64 = 4;
}
