//! One participant's session: train on the original game, then eval1 on the
//! original, then eval2 on the token's variant. Time is counted in ticks so
//! a paused session keeps its place exactly.

use std::path::Path;
use std::time::Duration;

use ramhack::eval::{build_env, derive_streams};
use ramhack::{Action, Env, Frame, PatchSpec};

use crate::messages::{keys_to_action, Phase, ServerMsg};
use crate::study::{SessionLog, SessionLogRow, StudyEntry, StudyError};

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    /// Earliest point at which "ready" ends free training.
    pub train_min: Duration,
    pub train_max: Duration,
    pub eval1: Duration,
    pub eval2: Duration,
    pub tick_hz: u32,
    /// How long a disconnected session waits before it is aborted.
    pub reconnect_grace: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            train_min: Duration::from_secs(10 * 60),
            train_max: Duration::from_secs(15 * 60),
            eval1: Duration::from_secs(15 * 60),
            eval2: Duration::from_secs(15 * 60),
            tick_hz: 30,
            reconnect_grace: Duration::from_secs(60),
        }
    }
}

impl SessionConfig {
    /// All three phases the same length, no early exit from training.
    pub fn uniform(phase: Duration) -> Self {
        SessionConfig {
            train_min: phase,
            train_max: phase,
            eval1: phase,
            eval2: phase,
            ..SessionConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tick_hz == 0 {
            return Err("tick rate must be positive".into());
        }
        if self.train_min > self.train_max {
            return Err("train_min exceeds train_max".into());
        }
        if [self.train_max, self.eval1, self.eval2].iter().any(|d| self.ticks(*d) == 0) {
            return Err("every phase needs at least one tick".into());
        }
        Ok(())
    }

    pub fn ticks(&self, d: Duration) -> u64 {
        (d.as_secs_f64() * self.tick_hz as f64).round() as u64
    }

    pub fn tick_period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.tick_hz as f64)
    }
}

pub struct Session {
    entry: StudyEntry,
    spec: PatchSpec,
    config: SessionConfig,
    reference_score: Option<f64>,
    phase: Phase,
    phase_ticks: u64,
    episode: u32,
    episode_steps: u32,
    env: Box<dyn Env>,
    frame: Frame,
    log: SessionLog,
    ended: bool,
}

impl Session {
    pub fn start(entry: &StudyEntry, config: SessionConfig, log_dir: &Path) -> Result<Session, StudyError> {
        let spec = entry.patch();
        let env = new_env(entry, &spec, Phase::Train, 0);
        let reference_score = env.game().reference_score();
        Ok(Session {
            entry: entry.clone(),
            spec,
            config,
            reference_score,
            phase: Phase::Train,
            phase_ticks: 0,
            episode: 0,
            episode_steps: 0,
            env,
            frame: Frame::new(0),
            log: SessionLog::open(log_dir, &entry.token)?,
            ended: false,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_ended(&self) -> bool {
        self.ended
    }

    pub fn env(&self) -> &dyn Env {
        self.env.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn phase_len(&self) -> u64 {
        self.config.ticks(match self.phase {
            Phase::Train => self.config.train_max,
            Phase::Eval1 => self.config.eval1,
            Phase::Eval2 => self.config.eval2,
        })
    }

    pub fn ready_allowed(&self) -> bool {
        self.phase == Phase::Train && self.phase_ticks >= self.config.ticks(self.config.train_min)
    }

    pub fn remaining_s(&self) -> u32 {
        let left = self.phase_len().saturating_sub(self.phase_ticks);
        left.div_ceil(self.config.tick_hz as u64) as u32
    }

    pub fn phase_message(&self) -> ServerMsg {
        ServerMsg::Phase {
            phase: self.phase,
            ready_allowed: self.ready_allowed(),
            reference_score: if self.phase == Phase::Train { self.reference_score } else { None },
        }
    }

    pub fn frame_message(&mut self) -> ServerMsg {
        self.env.render_into(&mut self.frame);
        ServerMsg::frame(&self.frame, self.env.score(), self.phase, self.remaining_s())
    }

    fn log_episode(&mut self) -> Result<(), StudyError> {
        self.log.append(&SessionLogRow {
            token: self.entry.token.clone(),
            phase: self.phase,
            episode: self.episode,
            score: self.env.score(),
            steps: self.episode_steps,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    /// Ends the phase; an episode cut short by the clock is logged as is.
    fn finish_phase(&mut self, out: &mut Vec<ServerMsg>) -> Result<(), StudyError> {
        if self.episode_steps > 0 {
            self.log_episode()?;
        }
        match self.phase.next() {
            Some(next) => {
                self.phase = next;
                self.phase_ticks = 0;
                self.episode = 0;
                self.episode_steps = 0;
                self.env = new_env(&self.entry, &self.spec, next, 0);
                out.push(self.phase_message());
            }
            None => {
                self.ended = true;
                self.log.mark(true)?;
                out.push(ServerMsg::End);
            }
        }
        Ok(())
    }

    /// One real-time tick: no frameskip and no sticky actions.
    pub fn tick(&mut self, held: &[String]) -> Result<Vec<ServerMsg>, StudyError> {
        let mut out = Vec::new();
        if self.ended {
            return Ok(out);
        }
        let action = keys_to_action(held, self.env.game().legal_actions());
        self.advance(action)?;
        out.push(self.frame_message());
        if self.phase == Phase::Train && self.phase_ticks == self.config.ticks(self.config.train_min) {
            out.push(self.phase_message());
        }
        if self.phase_ticks >= self.phase_len() {
            self.finish_phase(&mut out)?;
        }
        Ok(out)
    }

    fn advance(&mut self, action: Action) -> Result<(), StudyError> {
        self.env.advance(action).expect("live episode");
        self.phase_ticks += 1;
        self.episode_steps += 1;
        if self.env.is_terminated() {
            self.log_episode()?;
            self.episode += 1;
            self.episode_steps = 0;
            self.env = new_env(&self.entry, &self.spec, self.phase, self.episode);
        }
        Ok(())
    }

    /// The participant leaves free training early.
    pub fn ready(&mut self) -> Result<Vec<ServerMsg>, String> {
        if self.phase != Phase::Train {
            return Err("ready is only accepted during training".into());
        }
        if !self.ready_allowed() {
            return Err("ready not allowed yet".into());
        }
        let mut out = Vec::new();
        self.finish_phase(&mut out).map_err(|e| e.to_string())?;
        Ok(out)
    }

    pub fn abort(&mut self) -> Result<(), StudyError> {
        if !self.ended {
            self.ended = true;
            self.log.mark(false)?;
        }
        Ok(())
    }
}

/// Train and eval1 play the original game; only eval2 carries the patch.
fn new_env(entry: &StudyEntry, spec: &PatchSpec, phase: Phase, episode: u32) -> Box<dyn Env> {
    let game = ramhack::games::game(&entry.game).expect("validated study");
    let variant = (phase == Phase::Eval2).then_some(spec);
    let stream = derive_streams(0, &entry.game, variant.map_or("original", |s| &s.name), &format!("human:{}:{}", entry.token, phase.as_str()), episode);
    build_env(game, variant, stream.machine, u16::MAX as u32).expect("registered game")
}
