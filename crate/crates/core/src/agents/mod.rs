//! Agents and the observation they decide from.
//!
//! Built-ins: `random`, `noop`, the paddleball pair `ball_tracker` (reads the
//! ball) and `enemy_tracker` (reads only the enemy paddle, the shortcut),
//! `tabular_q` (trained on the unpatched game) and `external:<command>`
//! (a child process speaking line-delimited JSON).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::frame::Frame;
use crate::games::Game;
use crate::ram::{Action, RamState};

mod external;
mod scripted;
pub mod tabular;

pub use external::ExternalAgent;
pub use scripted::{ball_tracker_agent, enemy_tracker_agent, noop_agent, random_agent, TrackerAgent};
pub use tabular::{tabular_q_agent, Feature, QHyperparams, QTable, TabularQAgent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("unknown agent '{0}'")]
    UnknownAgent(String),
    #[error("agent '{agent}' only plays {expected}, not {game}")]
    WrongGame {
        agent: String,
        expected: String,
        game: String,
    },
    #[error("agent config error: {0}")]
    Config(String),
    #[error("agent protocol error: {0}")]
    Protocol(String),
}

/// Fixed-depth history of rendered frames, oldest first.
#[derive(Clone, Debug)]
pub struct FrameStack {
    frames: Vec<Frame>,
    newest: usize,
}

impl FrameStack {
    pub fn new(depth: usize) -> Self {
        assert!(depth > 0, "frame stack depth must be positive");
        FrameStack {
            frames: vec![Frame::new(0); depth],
            newest: depth - 1,
        }
    }

    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    /// Renders into the oldest slot, which becomes the newest.
    pub fn push_with(&mut self, render: impl FnOnce(&mut Frame)) {
        self.newest = (self.newest + 1) % self.frames.len();
        render(&mut self.frames[self.newest]);
    }

    /// Fills every slot with the same frame (start of episode).
    pub fn fill_with(&mut self, render: impl FnOnce(&mut Frame)) {
        self.push_with(render);
        let first = self.frames[self.newest].clone();
        for (i, slot) in self.frames.iter_mut().enumerate() {
            if i != self.newest {
                slot.clone_from(&first);
            }
        }
    }

    pub fn latest(&self) -> &Frame {
        &self.frames[self.newest]
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Frame> {
        let n = self.frames.len();
        (1..=n).map(move |k| &self.frames[(self.newest + k) % n])
    }
}

pub struct Observation<'a> {
    pub game: &'a str,
    pub legal_actions: &'a [Action],
    pub ram: RamState,
    pub frames: &'a FrameStack,
    pub score: i32,
    pub tick: u32,
}

#[derive(Clone, Debug)]
pub struct EpisodeInfo<'a> {
    pub game: &'a str,
    pub variant: &'a str,
    pub legal_actions: &'a [Action],
}

pub trait Agent: Send {
    fn id(&self) -> &str;

    /// Called once before each episode.
    fn reset(&mut self, _info: &EpisodeInfo<'_>) -> Result<(), AgentError> {
        Ok(())
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError>;
}

pub type AgentHandle = Box<dyn Agent>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Random,
    Noop,
    BallTracker,
    EnemyTracker,
    TabularQ,
    External(String),
}

impl AgentKind {
    pub fn parse(s: &str) -> Result<AgentKind, AgentError> {
        Ok(match s {
            "random" => AgentKind::Random,
            "noop" => AgentKind::Noop,
            "ball_tracker" => AgentKind::BallTracker,
            "enemy_tracker" => AgentKind::EnemyTracker,
            "tabular_q" => AgentKind::TabularQ,
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => AgentKind::External(cmd.to_string()),
                _ => return Err(AgentError::UnknownAgent(s.to_string())),
            },
        })
    }

    pub fn id(&self) -> String {
        match self {
            AgentKind::Random => "random".into(),
            AgentKind::Noop => "noop".into(),
            AgentKind::BallTracker => "ball_tracker".into(),
            AgentKind::EnemyTracker => "enemy_tracker".into(),
            AgentKind::TabularQ => "tabular_q".into(),
            AgentKind::External(cmd) => format!("external:{cmd}"),
        }
    }

    pub fn builtin() -> Vec<(AgentKind, &'static str)> {
        vec![
            (AgentKind::Random, "uniform over the game's legal actions"),
            (AgentKind::Noop, "always NOOP"),
            (AgentKind::BallTracker, "paddleball: follows the ball's row"),
            (AgentKind::EnemyTracker, "paddleball: follows the enemy paddle's row, never reads the ball"),
            (AgentKind::TabularQ, "Q-learning over discretized RAM, trained on the unpatched game"),
        ]
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Builds per-episode agent instances for one game. Expensive setup
/// (training) happens once in [`prepare`].
pub trait AgentFactory: Send + Sync {
    fn id(&self) -> &str;

    fn build(&self, seed: u64) -> AgentHandle;
}

struct FnFactory<F> {
    id: String,
    make: F,
}

impl<F> AgentFactory for FnFactory<F>
where
    F: Fn(u64) -> AgentHandle + Send + Sync,
{
    fn id(&self) -> &str {
        &self.id
    }

    fn build(&self, seed: u64) -> AgentHandle {
        (self.make)(seed)
    }
}

fn factory(id: String, make: impl Fn(u64) -> AgentHandle + Send + Sync + 'static) -> Arc<dyn AgentFactory> {
    Arc::new(FnFactory { id, make })
}

fn require_paddleball(kind: &AgentKind, game: &dyn Game) -> Result<(), AgentError> {
    if game.id() == "paddleball" {
        Ok(())
    } else {
        Err(AgentError::WrongGame {
            agent: kind.id(),
            expected: "paddleball".into(),
            game: game.id().into(),
        })
    }
}

/// Resolves an agent for `game`, training it first if needed.
pub fn prepare(kind: &AgentKind, game: &'static dyn Game) -> Result<Arc<dyn AgentFactory>, AgentError> {
    let id = kind.id();
    Ok(match kind {
        AgentKind::Random => factory(id, |seed| Box::new(random_agent(seed))),
        AgentKind::Noop => factory(id, |_| Box::new(noop_agent())),
        AgentKind::BallTracker => {
            require_paddleball(kind, game)?;
            factory(id, |_| Box::new(ball_tracker_agent()))
        }
        AgentKind::EnemyTracker => {
            require_paddleball(kind, game)?;
            factory(id, |_| Box::new(enemy_tracker_agent()))
        }
        AgentKind::TabularQ => {
            let (features, hyper) = tabular::defaults_for(game);
            let table = Arc::new(tabular::train(game, features, &hyper)?);
            factory(id, move |_| Box::new(TabularQAgent::new(table.clone())))
        }
        AgentKind::External(cmd) => {
            let cmd = cmd.clone();
            factory(id, move |_| Box::new(ExternalAgent::new(&cmd)))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_agent_ids() {
        for (kind, _) in AgentKind::builtin() {
            assert_eq!(AgentKind::parse(&kind.id()).unwrap(), kind);
        }
        assert_eq!(
            AgentKind::parse("external:python3 agent.py").unwrap(),
            AgentKind::External("python3 agent.py".into())
        );
        assert_eq!(AgentKind::parse("dqn"), Err(AgentError::UnknownAgent("dqn".into())));
        assert!(AgentKind::parse("external:").is_err());
    }

    #[test]
    fn frame_stack_keeps_most_recent_last() {
        let mut stack = FrameStack::new(4);
        stack.fill_with(|f| f.clear(1));
        assert!(stack.iter().all(|f| f.get(0, 0) == 1));
        stack.push_with(|f| f.clear(2));
        stack.push_with(|f| f.clear(3));
        let order: Vec<u8> = stack.iter().map(|f| f.get(0, 0)).collect();
        assert_eq!(order, [1, 1, 2, 3]);
        assert_eq!(stack.latest().get(0, 0), 3);
        assert_eq!(stack.depth(), 4);
    }

    #[test]
    fn trackers_require_paddleball() {
        let crossing = crate::games::game("crossing").unwrap();
        assert!(matches!(
            prepare(&AgentKind::BallTracker, crossing),
            Err(AgentError::WrongGame { .. })
        ));
    }
}
