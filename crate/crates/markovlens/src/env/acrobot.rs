//! Acrobot swing-up: a two-link underactuated arm with torque on the elbow
//! joint only. One RK4 step of 0.2 s per environment step; joint angles wrap
//! to [-π, π], velocities are bounded, and the episode ends when the tip
//! swings above the bar (−cos θ1 − cos(θ1+θ2) > 1).

use rand_chacha::ChaCha8Rng;

use super::{discrete_action, env_rng, uniform, Action, ActionSpace, Environment, StepOutcome};
use crate::error::Result;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const MAX_VEL_1: f64 = 4.0 * std::f64::consts::PI;
const MAX_VEL_2: f64 = 9.0 * std::f64::consts::PI;
const EPISODE_LIMIT: usize = 500;

pub struct Acrobot {
    /// θ1, θ2, θ̇1, θ̇2
    state: [f64; 4],
    steps: usize,
    needs_reset: bool,
    rng: ChaCha8Rng,
}

impl Acrobot {
    pub fn new() -> Acrobot {
        Acrobot {
            state: [0.0; 4],
            steps: 0,
            needs_reset: true,
            rng: env_rng(0),
        }
    }

    fn observation(&self) -> Vec<f64> {
        let [th1, th2, dth1, dth2] = self.state;
        vec![th1.cos(), th1.sin(), th2.cos(), th2.sin(), dth1, dth2]
    }

    fn terminal(&self) -> bool {
        let [th1, th2, ..] = self.state;
        -th1.cos() - (th1 + th2).cos() > 1.0
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Acrobot::new()
    }
}

/// Equations of motion over the augmented state (θ1, θ2, θ̇1, θ̇2, torque);
/// the torque component has zero derivative.
fn dsdt(s: [f64; 5]) -> [f64; 5] {
    let [theta1, theta2, dtheta1, dtheta2, a] = s;
    let (m1, m2) = (LINK_MASS_1, LINK_MASS_2);
    let l1 = LINK_LENGTH_1;
    let (lc1, lc2) = (LINK_COM_1, LINK_COM_2);
    let (i1, i2) = (LINK_MOI, LINK_MOI);
    let g = GRAVITY;
    let half_pi = std::f64::consts::FRAC_PI_2;

    let d1 = m1 * lc1 * lc1
        + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos())
        + i1
        + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - half_pi).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - half_pi).cos()
        + phi2;
    let ddtheta2 = (a + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2, 0.0]
}

fn rk4_step(y0: [f64; 5], dt: f64) -> [f64; 5] {
    let add = |y: [f64; 5], k: [f64; 5], h: f64| {
        let mut out = y;
        for (o, &ki) in out.iter_mut().zip(k.iter()) {
            *o += h * ki;
        }
        out
    };
    let k1 = dsdt(y0);
    let k2 = dsdt(add(y0, k1, dt / 2.0));
    let k3 = dsdt(add(y0, k2, dt / 2.0));
    let k4 = dsdt(add(y0, k3, dt));
    let mut out = y0;
    for i in 0..5 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn wrap(mut x: f64, low: f64, high: f64) -> f64 {
    let diff = high - low;
    while x > high {
        x -= diff;
    }
    while x < low {
        x += diff;
    }
    x
}

impl Environment for Acrobot {
    fn name(&self) -> &'static str {
        "Acrobot-v1"
    }

    fn observation_dim(&self) -> usize {
        6
    }

    fn observation_labels(&self) -> Vec<String> {
        [
            "CosTheta1",
            "SinTheta1",
            "CosTheta2",
            "SinTheta2",
            "Theta1Dot",
            "Theta2Dot",
        ]
        .map(String::from)
        .to_vec()
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(3)
    }

    fn episode_limit(&self) -> usize {
        EPISODE_LIMIT
    }

    fn reset(&mut self, seed: Option<u64>) -> Vec<f64> {
        if let Some(s) = seed {
            self.rng = env_rng(s);
        }
        for e in self.state.iter_mut() {
            *e = uniform(&mut self.rng, -0.1, 0.1);
        }
        self.steps = 0;
        self.needs_reset = false;
        self.observation()
    }

    fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.needs_reset {
            return Err(crate::Error::Contract(
                "Acrobot-v1: step called on a finished episode".into(),
            ));
        }
        let a = discrete_action(action, 3, "Acrobot-v1")?;
        let torque = a as f64 - 1.0;

        let [th1, th2, dth1, dth2] = self.state;
        let ns = rk4_step([th1, th2, dth1, dth2, torque], DT);
        self.state = [
            wrap(ns[0], -std::f64::consts::PI, std::f64::consts::PI),
            wrap(ns[1], -std::f64::consts::PI, std::f64::consts::PI),
            ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ];
        self.steps += 1;

        let terminated = self.terminal();
        let truncated = self.steps >= EPISODE_LIMIT;
        self.needs_reset = terminated || truncated;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: if terminated { 0.0 } else { -1.0 },
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn at_rest_no_termination() {
        let mut env = Acrobot::new();
        env.reset(Some(0));
        env.state = [0.0; 4];
        let out = env.step(Action::Discrete(1)).unwrap();
        assert!(!out.terminated);
        assert_eq!(out.reward, -1.0);
        // zero torque at the stable equilibrium: nothing moves
        assert!(env.state.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn reward_is_minus_one_until_goal() {
        let mut env = Acrobot::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        env.reset(Some(1));
        for _ in 0..10_000 {
            let out = env.step(Action::Discrete(rng.random_range(0..3))).unwrap();
            if out.terminated {
                assert_eq!(out.reward, 0.0);
            } else {
                assert_eq!(out.reward, -1.0);
            }
            if out.terminated || out.truncated {
                env.reset(None);
            }
        }
    }

    #[test]
    fn velocities_stay_bounded() {
        let mut env = Acrobot::new();
        env.reset(Some(2));
        for i in 0..2_000 {
            let out = env.step(Action::Discrete(if i % 7 < 4 { 2 } else { 0 })).unwrap();
            let s = env.state_vector();
            assert!(s[2].abs() <= MAX_VEL_1 + 1e-12);
            assert!(s[3].abs() <= MAX_VEL_2 + 1e-12);
            assert!(s[0].abs() <= std::f64::consts::PI + 1e-12);
            assert!(s[1].abs() <= std::f64::consts::PI + 1e-12);
            if out.terminated || out.truncated {
                env.reset(None);
            }
        }
    }

    #[test]
    fn terminal_predicate_matches_goal_geometry() {
        let mut env = Acrobot::new();
        env.reset(Some(0));
        // both links straight up: -cos(π) - cos(π+0) = 2 > 1
        env.state = [std::f64::consts::PI, 0.0, 0.0, 0.0];
        assert!(env.terminal());
        env.state = [0.0; 4];
        assert!(!env.terminal());
    }

    #[test]
    fn truncates_at_500_steps() {
        let mut env = Acrobot::new();
        env.reset(Some(11));
        let mut steps = 0;
        loop {
            // zero torque cannot pump energy in; the episode must truncate
            let out = env.step(Action::Discrete(1)).unwrap();
            steps += 1;
            assert!(!out.terminated);
            if out.truncated {
                break;
            }
        }
        assert_eq!(steps, EPISODE_LIMIT);
    }

    #[test]
    fn wrap_keeps_angles_in_range() {
        use std::f64::consts::PI;
        assert!((wrap(3.5 * PI, -PI, PI) - (-0.5 * PI)).abs() < 1e-12);
        assert!((wrap(-3.5 * PI, -PI, PI) - (0.5 * PI)).abs() < 1e-12);
        assert_eq!(wrap(0.3, -PI, PI), 0.3);
    }
}
