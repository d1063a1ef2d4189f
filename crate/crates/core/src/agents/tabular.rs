//! Tabular Q-learning over a few discretized RAM features.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Agent, AgentError, Observation};
use crate::games::{bricks, crossing, paddleball, Game};
use crate::machine::{Env, Machine, MachineConfig};
use crate::ram::{Action, RamState};

/// One state dimension: a byte read from RAM, split into `buckets` equal bins.
#[derive(Clone, Debug)]
pub struct Feature {
    pub name: String,
    pub extract: fn(&RamState) -> u8,
    pub buckets: u16,
}

impl Feature {
    pub fn new(name: &str, extract: fn(&RamState) -> u8, buckets: u16) -> Self {
        Feature {
            name: name.into(),
            extract,
            buckets,
        }
    }

    pub fn bucket(&self, ram: &RamState) -> usize {
        (self.extract)(ram) as usize * self.buckets as usize / 256
    }
}

#[derive(Clone, Debug)]
pub struct QHyperparams {
    pub episodes: u32,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Starting value of every Q entry; optimism drives early exploration.
    pub initial_q: f64,
    pub frameskip: u32,
    pub sticky: f64,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for QHyperparams {
    fn default() -> Self {
        QHyperparams {
            episodes: 2000,
            alpha: 0.1,
            gamma: 0.99,
            epsilon: 0.1,
            initial_q: 1.0,
            frameskip: 4,
            sticky: 0.25,
            max_steps: 10_000,
            seed: 0,
        }
    }
}

pub struct QTable {
    features: Vec<Feature>,
    actions: Vec<Action>,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(features: Vec<Feature>, actions: &[Action]) -> Result<QTable, AgentError> {
        if features.is_empty() {
            return Err(AgentError::Config("tabular_q needs at least one feature".into()));
        }
        if let Some(f) = features.iter().find(|f| f.buckets == 0 || f.buckets > 256) {
            return Err(AgentError::Config(format!(
                "feature '{}' has {} buckets, expected 1..=256",
                f.name, f.buckets
            )));
        }
        let states: usize = features.iter().map(|f| f.buckets as usize).product();
        Ok(QTable {
            values: vec![0.0; states * actions.len()],
            features,
            actions: actions.to_vec(),
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn num_states(&self) -> usize {
        self.values.len() / self.actions.len()
    }

    pub fn state_index(&self, ram: &RamState) -> usize {
        self.features
            .iter()
            .fold(0, |acc, f| acc * f.buckets as usize + f.bucket(ram))
    }

    pub fn values(&self, state: usize) -> &[f64] {
        let n = self.actions.len();
        &self.values[state * n..(state + 1) * n]
    }

    /// Index of the best action; ties go to the lowest index.
    pub fn greedy(&self, state: usize) -> usize {
        let q = self.values(state);
        let mut best = 0;
        for (i, v) in q.iter().enumerate().skip(1) {
            if *v > q[best] {
                best = i;
            }
        }
        best
    }

    pub fn action(&self, index: usize) -> Action {
        self.actions[index]
    }

    fn update(&mut self, state: usize, action: usize, target: f64, alpha: f64) {
        let n = self.actions.len();
        let q = &mut self.values[state * n + action];
        *q += alpha * (target - *q);
    }
}

/// Feature set and hyperparameters used by the `tabular_q` built-in.
pub fn defaults_for(game: &dyn Game) -> (Vec<Feature>, QHyperparams) {
    let features = match game.id() {
        "crossing" => vec![
            Feature::new("chicken_y", |r| r.read(crossing::CHICKEN_Y), 14),
            Feature::new("car_x_in_chicken_lane", crossing::car_x_in_chicken_lane, 16),
        ],
        "paddleball" => vec![
            Feature::new("player_y", |r| r.read(paddleball::PLAYER_Y), 12),
            Feature::new("ball_y", |r| r.read(paddleball::BALL_Y), 12),
            Feature::new("ball_dx", |r| r.read(paddleball::BALL_DX), 2),
        ],
        _ => vec![
            Feature::new("paddle_x", |r| r.read(bricks::PADDLE_X), 16),
            Feature::new("ball_x", |r| r.read(bricks::BALL_X), 16),
            Feature::new("ball_y", |r| r.read(bricks::BALL_Y), 4),
        ],
    };
    let hyper = match game.id() {
        // Sparse reward: a shorter horizon and more exploration find the far side.
        "crossing" => QHyperparams {
            gamma: 0.9,
            epsilon: 0.2,
            ..QHyperparams::default()
        },
        _ => QHyperparams::default(),
    };
    (features, hyper)
}

/// Trains on the unpatched game with sticky actions and frameskip, using
/// ε-greedy exploration. Deterministic given `hyper.seed`.
pub fn train(game: &'static dyn Game, features: Vec<Feature>, hyper: &QHyperparams) -> Result<QTable, AgentError> {
    let mut table = QTable::new(features, game.legal_actions())?;
    table.values.fill(hyper.initial_q);
    let config = MachineConfig::new(game.id(), hyper.seed).with_max_steps(hyper.max_steps);
    let mut machine = Machine::create(&config).map_err(|e| AgentError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x7ab1_e0f0);
    let n_actions = table.actions.len();
    for episode in 0..hyper.episodes {
        machine.reset(crate::rng::mix(hyper.seed.wrapping_add(episode as u64)));
        let mut state = table.state_index(&machine.ram());
        let mut previous = Action::Noop;
        while !machine.is_terminated() {
            let choice = if rng.gen::<f64>() < hyper.epsilon {
                rng.gen_range(0..n_actions)
            } else {
                table.greedy(state)
            };
            let executed = if rng.gen::<f64>() < hyper.sticky {
                previous
            } else {
                table.actions[choice]
            };
            previous = executed;
            let mut reward = 0.0;
            for _ in 0..hyper.frameskip.max(1) {
                if machine.is_terminated() {
                    break;
                }
                let tick = machine.advance(executed).map_err(|e| AgentError::Config(e.to_string()))?;
                reward += tick.reward as f64;
            }
            let next = table.state_index(&machine.ram());
            let target = if machine.is_terminated() {
                reward
            } else {
                let best = table.values(next)[table.greedy(next)];
                reward + hyper.gamma * best
            };
            table.update(state, choice, target, hyper.alpha);
            state = next;
        }
    }
    log::debug!(
        "tabular_q trained on {} for {} episodes ({} states)",
        game.id(),
        hyper.episodes,
        table.num_states()
    );
    Ok(table)
}

/// Greedy policy over a trained table.
pub struct TabularQAgent {
    table: Arc<QTable>,
}

impl TabularQAgent {
    pub fn new(table: Arc<QTable>) -> Self {
        TabularQAgent { table }
    }
}

pub fn tabular_q_agent(table: Arc<QTable>) -> TabularQAgent {
    TabularQAgent::new(table)
}

impl Agent for TabularQAgent {
    fn id(&self) -> &str {
        "tabular_q"
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        let state = self.table.state_index(&obs.ram);
        Ok(self.table.action(self.table.greedy(state)))
    }
}
