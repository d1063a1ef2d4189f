//! Child-process agent speaking line-delimited JSON over stdin/stdout.
//!
//! Harness to agent:
//! `{"type":"reset","game":..,"variant":..,"legal_actions":[..]}` once per
//! episode, `{"type":"obs","ram":[128 ints],"score":..,"tick":..}` per
//! decision and `{"type":"terminate"}` before the pipe is closed.
//! Agent to harness: `{"action":A}` in reply to each `obs`, with A in 0..=5.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, EpisodeInfo, Observation};
use crate::ram::Action;

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Outgoing<'a> {
    Reset {
        game: &'a str,
        variant: &'a str,
        legal_actions: Vec<u8>,
    },
    Obs {
        ram: &'a [u8],
        score: i32,
        tick: u32,
    },
    Terminate,
}

#[derive(Deserialize)]
struct Reply {
    action: i64,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ExternalAgent {
    id: String,
    command: String,
    pipe: Option<Pipe>,
}

impl ExternalAgent {
    pub fn new(command: &str) -> Self {
        ExternalAgent {
            id: format!("external:{command}"),
            command: command.into(),
            pipe: None,
        }
    }

    fn spawn(&mut self) -> Result<&mut Pipe, AgentError> {
        if self.pipe.is_none() {
            let mut child = Command::new("sh")
                .arg("-c")
                .arg(&self.command)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| AgentError::Protocol(format!("cannot start '{}': {e}", self.command)))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
            self.pipe = Some(Pipe { child, stdin, stdout });
        }
        Ok(self.pipe.as_mut().expect("spawned"))
    }

    fn send(&mut self, msg: &Outgoing<'_>) -> Result<(), AgentError> {
        let mut line = serde_json::to_string(msg).expect("serializable message");
        line.push('\n');
        let pipe = self.spawn()?;
        pipe.stdin
            .write_all(line.as_bytes())
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| AgentError::Protocol(format!("write to agent failed: {e}")))
    }

    fn receive(&mut self) -> Result<Action, AgentError> {
        let pipe = self.spawn()?;
        let mut line = String::new();
        let n = pipe
            .stdout
            .read_line(&mut line)
            .map_err(|e| AgentError::Protocol(format!("read from agent failed: {e}")))?;
        if n == 0 {
            return Err(AgentError::Protocol("agent closed its output".into()));
        }
        let reply: Reply = serde_json::from_str(line.trim())
            .map_err(|e| AgentError::Protocol(format!("malformed reply {:?}: {e}", line.trim())))?;
        u8::try_from(reply.action)
            .ok()
            .and_then(Action::from_code)
            .ok_or_else(|| AgentError::Protocol(format!("action {} out of range 0..=5", reply.action)))
    }
}

impl Agent for ExternalAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn reset(&mut self, info: &EpisodeInfo<'_>) -> Result<(), AgentError> {
        self.send(&Outgoing::Reset {
            game: info.game,
            variant: info.variant,
            legal_actions: info.legal_actions.iter().map(|a| a.code()).collect(),
        })
    }

    fn decide(&mut self, obs: &Observation<'_>) -> Result<Action, AgentError> {
        self.send(&Outgoing::Obs {
            ram: obs.ram.as_bytes(),
            score: obs.score,
            tick: obs.tick,
        })?;
        self.receive()
    }
}

impl Drop for ExternalAgent {
    fn drop(&mut self) {
        let Some(mut pipe) = self.pipe.take() else {
            return;
        };
        let line = serde_json::to_string(&Outgoing::Terminate).expect("serializable message");
        let _ = writeln!(pipe.stdin, "{line}").and_then(|_| pipe.stdin.flush());
        drop(pipe.stdin);
        let deadline = Instant::now() + Duration::from_millis(500);
        loop {
            match pipe.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(5)),
                _ => break,
            }
        }
        let _ = pipe.child.kill();
        let _ = pipe.child.wait();
    }
}
