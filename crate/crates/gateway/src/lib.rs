//! Control and telemetry server for an operator console.
//!
//! Commands go through a single engine mailbox; sway frames stream to any
//! number of WebSocket clients as JSON text. See `docs/api.md` for shapes.

pub mod api;
pub mod engine;
pub mod server;

pub use api::{EngineState, Phase, TelemetryFrame};
pub use engine::{start, CommandError, EngineConfig, EngineError, EngineHandle};
pub use server::{router, serve, GatewayError, RunningGateway, DEFAULT_BIND};
