//! Play service for human sessions: a WebSocket server streaming game frames
//! to a browser, a three-phase session flow (free training, evaluation on the
//! original game, evaluation on the variant) and per-token CSV logs.

pub mod messages;
pub mod rle;
pub mod server;
pub mod session;
pub mod study;

pub use messages::{keys_to_action, ClientMsg, Phase, ServerMsg};
pub use server::{router, run_blocking, serve, AppState, ServerConfig};
pub use session::{Session, SessionConfig};
pub use study::{aggregate_study, read_session_log, SessionLogRow, Study, StudyEntry, StudyReport};
