//! WebSocket message schema, one JSON object per text message.

use serde::{Deserialize, Serialize};

use ramhack::{Action, Frame};

use crate::rle::encode_frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval1,
    Eval2,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval1 => "eval1",
            Phase::Eval2 => "eval2",
        }
    }

    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::Train => Some(Phase::Eval1),
            Phase::Eval1 => Some(Phase::Eval2),
            Phase::Eval2 => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMsg {
    Frame {
        rle: String,
        /// `[index, r, g, b]` for each palette index present in the frame.
        palette: Vec<[u8; 4]>,
        score: i32,
        phase: Phase,
        remaining_s: u32,
    },
    Phase {
        phase: Phase,
        /// Whether the "ready" message is currently accepted.
        ready_allowed: bool,
        /// Score shown as a target line during free training.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        reference_score: Option<f64>,
    },
    End,
    Error {
        msg: String,
    },
}

impl ServerMsg {
    pub fn frame(frame: &Frame, score: i32, phase: Phase, remaining_s: u32) -> ServerMsg {
        let palette = frame
            .used_colors()
            .into_iter()
            .map(|i| {
                let c = frame.palette()[i as usize];
                [i, c.0, c.1, c.2]
            })
            .collect();
        ServerMsg::Frame {
            rle: encode_frame(frame),
            palette,
            score,
            phase,
            remaining_s,
        }
    }

    pub fn error(msg: impl Into<String>) -> ServerMsg {
        ServerMsg::Error { msg: msg.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable message")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMsg {
    Keys { held: Vec<String> },
    Ready,
}

impl ClientMsg {
    pub fn parse(text: &str) -> Result<ClientMsg, String> {
        serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))
    }
}

/// Held keys in priority order; only one action is played per tick.
pub const KEY_PRIORITY: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Fire];

/// The highest-priority held key that is legal in the game, else NOOP.
/// Unknown key names are ignored.
pub fn keys_to_action(held: &[String], legal: &[Action]) -> Action {
    KEY_PRIORITY
        .into_iter()
        .find(|a| legal.contains(a) && held.iter().any(|k| k.eq_ignore_ascii_case(a.name())))
        .unwrap_or(Action::Noop)
}
