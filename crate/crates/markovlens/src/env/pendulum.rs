//! Torque-limited pendulum swing-up. Semi-implicit Euler at 20 Hz: the
//! angular velocity is updated and clipped first, then the angle integrates
//! with the new velocity. Never terminates; episodes end by truncation.

use rand_chacha::ChaCha8Rng;

use super::{continuous_action, env_rng, uniform, Action, ActionSpace, Environment, StepOutcome};
use crate::error::Result;

const DT: f64 = 0.05;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_TORQUE: f64 = 2.0;
const MAX_SPEED: f64 = 8.0;
const EPISODE_LIMIT: usize = 200;

pub struct Pendulum {
    /// θ, θ̇
    state: [f64; 2],
    steps: usize,
    needs_reset: bool,
    rng: ChaCha8Rng,
}

impl Pendulum {
    pub fn new() -> Pendulum {
        Pendulum {
            state: [0.0; 2],
            steps: 0,
            needs_reset: true,
            rng: env_rng(0),
        }
    }

    fn observation(&self) -> Vec<f64> {
        let [th, thdot] = self.state;
        vec![th.cos(), th.sin(), thdot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum::new()
    }
}

/// Wraps an angle to [-π, π).
fn angle_normalize(x: f64) -> f64 {
    use std::f64::consts::PI;
    ((x + PI).rem_euclid(2.0 * PI)) - PI
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "Pendulum-v1"
    }

    fn observation_dim(&self) -> usize {
        3
    }

    fn observation_labels(&self) -> Vec<String> {
        ["CosTheta", "SinTheta", "ThetaDot"].map(String::from).to_vec()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous {
            low: -MAX_TORQUE,
            high: MAX_TORQUE,
        }
    }

    fn episode_limit(&self) -> usize {
        EPISODE_LIMIT
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(s) = seed {
            self.rng = env_rng(s);
        }
        self.state = [
            uniform(&mut self.rng, -std::f64::consts::PI, std::f64::consts::PI),
            uniform(&mut self.rng, -1.0, 1.0),
        ];
        self.steps = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.needs_reset {
            return Err(crate::Error::Contract(
                "Pendulum-v1: step called on a finished episode".into(),
            ));
        }
        let u = continuous_action(action, "Pendulum-v1")?.clamp(-MAX_TORQUE, MAX_TORQUE);
        let [th, thdot] = self.state;

        let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;

        let new_thdot = (thdot
            + (3.0 * GRAVITY / (2.0 * LENGTH) * th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u)
                * DT)
            .clamp(-MAX_SPEED, MAX_SPEED);
        let new_th = th + new_thdot * DT;
        self.state = [new_th, new_thdot];
        self.steps += 1;

        let truncated = self.steps >= EPISODE_LIMIT;
        self.needs_reset = truncated;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: -cost,
            terminated: false,
            truncated,
        })
    }

    fn state_vector(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        super::copy_state(self.name(), &mut self.state, state)
    }
}
