use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Agent, AgentError, Observation};
use crate::games::paddleball;
use crate::ram::Action;

pub struct RandomAgent {
    rng: ChaCha8Rng,
}

/// Uniform over the observation's legal actions.
pub fn random_agent(seed: u64) -> RandomAgent {
    RandomAgent {
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

impl Agent for RandomAgent {
    fn id(&self) -> &str {
        "random"
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        Ok(obs.legal_actions[self.rng.gen_range(0..obs.legal_actions.len())])
    }
}

pub struct NoopAgent;

pub fn noop_agent() -> NoopAgent {
    NoopAgent
}

impl Agent for NoopAgent {
    fn id(&self) -> &str {
        "noop"
    }

    fn decide(&mut self, _obs: &Observation<'_>) -> Result<Action, AgentError> {
        Ok(Action::Noop)
    }
}

/// Moves the player paddle toward the row held in one RAM cell.
pub struct TrackerAgent {
    id: &'static str,
    target: u8,
}

pub const TRACKER_DEADBAND: i32 = 2;

/// Follows the ball: the aligned policy.
pub fn ball_tracker_agent() -> TrackerAgent {
    TrackerAgent {
        id: "ball_tracker",
        target: paddleball::BALL_Y,
    }
}

/// Follows the enemy paddle and never reads the ball cells: the shortcut.
pub fn enemy_tracker_agent() -> TrackerAgent {
    TrackerAgent {
        id: "enemy_tracker",
        target: paddleball::ENEMY_Y,
    }
}

impl Agent for TrackerAgent {
    fn id(&self) -> &str {
        self.id
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        if obs.game != "paddleball" {
            return Err(AgentError::WrongGame {
                agent: self.id.into(),
                expected: "paddleball".into(),
                game: obs.game.into(),
            });
        }
        let gap = obs.ram.read(self.target) as i32 - obs.ram.read(paddleball::PLAYER_Y) as i32;
        Ok(if gap > TRACKER_DEADBAND {
            Action::Down
        } else if gap < -TRACKER_DEADBAND {
            Action::Up
        } else {
            Action::Noop
        })
    }
}
