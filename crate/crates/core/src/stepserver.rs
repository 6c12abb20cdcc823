//! Reset/step protocol for external trainers.
//!
//! Frames are single-line JSON objects terminated by `\n`. Every request
//! gets exactly one response, in order:
//!
//! | request                                   | response |
//! |-------------------------------------------|----------|
//! | `{"cmd":"spec"}`                          | `{"spec":{n_drones, n_effectors, stack_frames, observation_len, action_dims, fingerprint}}` |
//! | `{"cmd":"reset","seed":7}`                | `{"observation":[..],"mask":[[..]],"reward":0.0,"terminated":false,"info":{"damage_pct":..,"step":0}}` |
//! | `{"cmd":"step","action":[j0,..,jM-1]}`    | same shape as reset |
//! | `{"cmd":"close"}`                         | `{"closed":true}`, then the session ends |
//!
//! Any failure yields `{"error":"..."}` and the session continues. A
//! trailing frame without its newline is discarded.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::encoding::{decode_action, ObservationSpec};
use crate::env::{Environment, Transition};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase", deny_unknown_fields)]
pub enum Request {
    Spec,
    Reset {
        #[serde(default)]
        seed: u64,
    },
    Step {
        action: Vec<usize>,
    },
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecPayload {
    pub n_drones: usize,
    pub n_effectors: usize,
    pub stack_frames: usize,
    pub observation_len: usize,
    pub action_dims: [usize; 2],
    pub fingerprint: String,
}

impl From<&ObservationSpec> for SpecPayload {
    fn from(s: &ObservationSpec) -> Self {
        SpecPayload {
            n_drones: s.n_drones,
            n_effectors: s.n_effectors,
            stack_frames: s.stack_frames,
            observation_len: s.total_len(),
            action_dims: s.action_dims(),
            fingerprint: s.fingerprint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Transition(Transition),
    Spec { spec: SpecPayload },
    Closed { closed: bool },
    Error { error: String },
}

/// One connection's environment. No state is shared between sessions.
#[derive(Debug)]
pub struct Session {
    env: Environment,
    open: bool,
}

impl Session {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        Ok(Session {
            env: Environment::new(config)?,
            open: true,
        })
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn handle(&mut self, request: Request) -> Response {
        match self.try_handle(request) {
            Ok(r) => r,
            Err(e) => Response::Error {
                error: e.to_string(),
            },
        }
    }

    fn try_handle(&mut self, request: Request) -> Result<Response> {
        Ok(match request {
            Request::Spec => Response::Spec {
                spec: SpecPayload::from(self.env.spec()),
            },
            Request::Reset { seed } => Response::Transition(self.env.reset(seed)),
            Request::Step { action } => {
                let spec = self.env.spec();
                let assignment = decode_action(&action, spec.n_effectors, spec.n_drones)?;
                Response::Transition(self.env.step(&assignment)?)
            }
            Request::Close => {
                self.open = false;
                Response::Closed { closed: true }
            }
        })
    }

    /// Parse one frame and answer it. Malformed frames get an error response.
    pub fn handle_frame(&mut self, frame: &str) -> Response {
        match serde_json::from_str::<Request>(frame) {
            Ok(req) => self.handle(req),
            Err(e) => Response::Error {
                error: format!("malformed frame: {e}"),
            },
        }
    }
}

fn write_frame<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Serve one session until `close`, end of input, or transport failure.
pub fn serve_session<R: BufRead, W: Write>(
    config: ScenarioConfig,
    mut input: R,
    mut output: W,
) -> Result<()> {
    let mut session = Session::new(config)?;
    let mut buf = Vec::new();
    while session.is_open() {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 || buf.last() != Some(&b'\n') {
            break;
        }
        let response = match std::str::from_utf8(&buf) {
            Ok(line) if line.trim().is_empty() => continue,
            Ok(line) => session.handle_frame(line.trim_end()),
            Err(_) => Response::Error {
                error: "malformed frame: not valid UTF-8".into(),
            },
        };
        write_frame(&mut output, &response)?;
    }
    Ok(())
}

pub fn serve_stdio(config: ScenarioConfig) -> Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_session(config, stdin.lock(), BufWriter::new(stdout.lock()))
}

/// Accept connections forever, one thread and one environment per
/// connection. Beyond `max_connections` concurrent sessions, new clients
/// receive an error frame and are closed.
pub fn serve_tcp_listener(
    listener: TcpListener,
    config: ScenarioConfig,
    max_connections: usize,
) -> Result<()> {
    config.validate()?;
    let active = Arc::new(AtomicUsize::new(0));
    for stream in listener.incoming() {
        let mut stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        if active.load(Ordering::SeqCst) >= max_connections {
            let _ = write_frame(
                &mut stream,
                &Response::Error {
                    error: format!("server busy: {max_connections} sessions already open"),
                },
            );
            continue;
        }
        // Small request/response frames: disable Nagle.
        let _ = stream.set_nodelay(true);
        active.fetch_add(1, Ordering::SeqCst);
        let active = Arc::clone(&active);
        let config = config.clone();
        thread::spawn(move || {
            let peer = stream
                .peer_addr()
                .map(|a| a.to_string())
                .unwrap_or_default();
            log::info!("session opened: {peer}");
            let result = stream.try_clone().map_err(Error::from).and_then(|read| {
                serve_session(config, BufReader::new(read), BufWriter::new(stream))
            });
            if let Err(e) = result {
                log::warn!("session {peer} ended: {e}");
            }
            active.fetch_sub(1, Ordering::SeqCst);
        });
    }
    Ok(())
}

pub fn serve_tcp(
    config: ScenarioConfig,
    addr: impl ToSocketAddrs,
    max_connections: usize,
) -> Result<()> {
    let listener = TcpListener::bind(addr)?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_tcp_listener(listener, config, max_connections)
}

/// Minimal blocking client, used by tests and Rust-side tooling.
pub struct StepClient<R, W> {
    input: R,
    output: W,
}

impl StepClient<BufReader<TcpStream>, TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(StepClient {
            input: BufReader::new(stream.try_clone()?),
            output: stream,
        })
    }
}

impl<R: BufRead, W: Write> StepClient<R, W> {
    pub fn new(input: R, output: W) -> Self {
        StepClient { input, output }
    }

    pub fn request(&mut self, request: &Request) -> Result<Response> {
        write_frame(&mut self.output, request)?;
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Err(Error::Contract("server closed the connection".into()));
        }
        Ok(serde_json::from_str(&line)?)
    }

    /// Like [`request`](Self::request) but expects a transition.
    pub fn transition(&mut self, request: &Request) -> Result<Transition> {
        match self.request(request)? {
            Response::Transition(t) => Ok(t),
            Response::Error { error } => Err(Error::Contract(error)),
            other => Err(Error::Contract(format!("unexpected response {other:?}"))),
        }
    }
}
