//! Cart-pole balancing: a pole hinged to a cart on a frictionless track,
//! pushed left or right with a fixed force. Explicit Euler at 50 Hz.

use rand_chacha::ChaCha8Rng;

use super::{
    discrete_action, env_rng, uniform, Action, ActionSpace, Environment, StepOutcome,
};
use crate::error::Result;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_THRESHOLD: f64 = 2.4;
const EPISODE_LIMIT: usize = 500;

pub struct CartPole {
    /// x, ẋ, θ, θ̇
    state: [f64; 4],
    steps: usize,
    needs_reset: bool,
    rng: ChaCha8Rng,
}

impl CartPole {
    pub fn new() -> CartPole {
        CartPole {
            state: [0.0; 4],
            steps: 0,
            needs_reset: true,
            rng: env_rng(0),
        }
    }
}

impl Default for CartPole {
    fn default() -> Self {
        CartPole::new()
    }
}

impl Environment for CartPole {
    fn name(&self) -> &'static str {
        "CartPole-v1"
    }

    fn observation_dim(&self) -> usize {
        4
    }

    fn observation_labels(&self) -> Vec<String> {
        ["CartPos", "CartVel", "PoleAngle", "PoleAngVel"]
            .map(String::from)
            .to_vec()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn episode_limit(&self) -> usize {
        EPISODE_LIMIT
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(s) = seed {
            self.rng = env_rng(s);
        }
        for e in self.state.iter_mut() {
            *e = uniform(&mut self.rng, -0.05, 0.05);
        }
        self.steps = 0;
        self.needs_reset = false;
        self.state.to_vec()
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.needs_reset {
            return Err(crate::Error::Contract(
                "CartPole-v1: step called on a finished episode".into(),
            ));
        }
        let a = discrete_action(action, 2, "CartPole-v1")?;
        let force = if a == 1 { FORCE_MAG } else { -FORCE_MAG };
        let [x, x_dot, theta, theta_dot] = self.state;
        let cos_theta = theta.cos();
        let sin_theta = theta.sin();

        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_theta) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_theta * cos_theta / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;

        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        self.steps += 1;

        let [x, _, theta, _] = self.state;
        let terminated =
            !(-X_THRESHOLD..=X_THRESHOLD).contains(&x) || theta.abs() > THETA_THRESHOLD;
        let truncated = self.steps >= EPISODE_LIMIT;
        self.needs_reset = terminated || truncated;
        Ok(StepOutcome {
            observation: self.state.to_vec(),
            reward: 1.0,
            terminated,
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
