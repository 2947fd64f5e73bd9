//! Ordered, reliable transports between the two endpoints and a lockstep
//! driver that runs a negotiation to quiescence.

use std::collections::VecDeque;
use std::fmt;
use std::io;

use thiserror::Error;

use super::endpoint::{
    AppCommand, AppEvent, ApplicationSession, NegotiationState, NetworkSession, NetworkState,
    TableStore,
};
use super::wire::{decode_message, encode_message, ControlMessage, WireError};

#[derive(Debug, Error)]
pub enum DuctError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("wire: {0}")]
    Wire(#[from] WireError),
    #[error("duct closed with {0} frame(s) in flight")]
    Closed(usize),
}

/// A duplex pipe carrying encoded frames. Receives are only issued when a
/// frame is known to be in flight, so implementations may block.
pub trait Duct {
    fn send_to_network(&mut self, frame: &[u8]) -> io::Result<()>;
    fn send_to_application(&mut self, frame: &[u8]) -> io::Result<()>;
    fn recv_at_network(&mut self) -> io::Result<Option<Vec<u8>>>;
    fn recv_at_application(&mut self) -> io::Result<Option<Vec<u8>>>;
}

#[derive(Debug, Default)]
pub struct InProcessDuct {
    to_network: VecDeque<Vec<u8>>,
    to_application: VecDeque<Vec<u8>>,
}

impl InProcessDuct {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Duct for InProcessDuct {
    fn send_to_network(&mut self, frame: &[u8]) -> io::Result<()> {
        self.to_network.push_back(frame.to_vec());
        Ok(())
    }

    fn send_to_application(&mut self, frame: &[u8]) -> io::Result<()> {
        self.to_application.push_back(frame.to_vec());
        Ok(())
    }

    fn recv_at_network(&mut self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.to_network.pop_front())
    }

    fn recv_at_application(&mut self) -> io::Result<Option<Vec<u8>>> {
        Ok(self.to_application.pop_front())
    }
}

#[cfg(unix)]
pub use socket::SocketDuct;

#[cfg(unix)]
mod socket {
    use std::io::{self, BufRead, BufReader, Write};
    use std::os::unix::net::UnixStream;

    use super::Duct;

    /// Both ends of a connected Unix stream socket pair; frames are
    /// newline-terminated so a line read yields exactly one frame.
    #[derive(Debug)]
    pub struct SocketDuct {
        app: BufReader<UnixStream>,
        net: BufReader<UnixStream>,
    }

    impl SocketDuct {
        pub fn new() -> io::Result<Self> {
            let (a, n) = UnixStream::pair()?;
            Ok(SocketDuct {
                app: BufReader::new(a),
                net: BufReader::new(n),
            })
        }

        fn read_frame(r: &mut BufReader<UnixStream>) -> io::Result<Option<Vec<u8>>> {
            let mut buf = Vec::new();
            if r.read_until(b'\n', &mut buf)? == 0 {
                return Ok(None);
            }
            Ok(Some(buf))
        }
    }

    impl Duct for SocketDuct {
        fn send_to_network(&mut self, frame: &[u8]) -> io::Result<()> {
            self.app.get_mut().write_all(frame)
        }

        fn send_to_application(&mut self, frame: &[u8]) -> io::Result<()> {
            self.net.get_mut().write_all(frame)
        }

        fn recv_at_network(&mut self) -> io::Result<Option<Vec<u8>>> {
            Self::read_frame(&mut self.net)
        }

        fn recv_at_application(&mut self) -> io::Result<Option<Vec<u8>>> {
            Self::read_frame(&mut self.app)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Command,
    ToNetwork,
    ToApplication,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub kind: TraceKind,
    /// Frame text without the trailing newline, or the command description.
    pub text: String,
    pub application: NegotiationState,
    pub network: NetworkState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationOutcome {
    pub application: ApplicationSession,
    pub network: NetworkSession,
    pub trace: Vec<TraceEntry>,
}

impl NegotiationOutcome {
    /// Number of control messages exchanged in either direction.
    pub fn message_count(&self) -> usize {
        self.trace.iter().filter(|e| e.kind != TraceKind::Command).count()
    }

    pub fn messages(&self) -> impl Iterator<Item = &TraceEntry> {
        self.trace.iter().filter(|e| e.kind != TraceKind::Command)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut n = 0;
        for e in &self.trace {
            let tag = match e.kind {
                TraceKind::Command => "cmd    ".to_string(),
                _ => {
                    n += 1;
                    let dir = if e.kind == TraceKind::ToNetwork { "A->N" } else { "N->A" };
                    format!("{n:>2} {dir}")
                }
            };
            out.push_str(&format!(
                "{tag} {:<48} app={} net={}\n",
                e.text, e.application, e.network
            ));
        }
        out
    }
}

impl fmt::Display for AppCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppCommand::Connect { level } => write!(f, "connect level={}", level.get()),
            AppCommand::ReportBer { ber } => write!(f, "report-ber ber={ber}"),
            AppCommand::Require {
                benchmark_id,
                floor_ratio,
            } => write!(f, "require benchmark={benchmark_id} floor_ratio={floor_ratio}"),
            AppCommand::Close => f.write_str("close"),
        }
    }
}

struct Lockstep<'a, D: Duct> {
    duct: &'a mut D,
    store: &'a TableStore,
    app: ApplicationSession,
    net: NetworkSession,
    to_net: usize,
    to_app: usize,
    trace: Vec<TraceEntry>,
}

impl<D: Duct> Lockstep<'_, D> {
    fn record(&mut self, kind: TraceKind, text: String) {
        self.trace.push(TraceEntry {
            kind,
            text,
            application: self.app.state(),
            network: self.net.state(),
        });
    }

    fn send(&mut self, msgs: Vec<ControlMessage>, to_network: bool) -> Result<(), DuctError> {
        for m in msgs {
            let frame = encode_message(&m);
            if to_network {
                self.duct.send_to_network(&frame)?;
                self.to_net += 1;
            } else {
                self.duct.send_to_application(&frame)?;
                self.to_app += 1;
            }
        }
        Ok(())
    }

    fn pump(&mut self) -> Result<(), DuctError> {
        while self.to_net + self.to_app > 0 {
            while self.to_net > 0 {
                let frame = self.duct.recv_at_network()?.ok_or(DuctError::Closed(self.to_net))?;
                self.to_net -= 1;
                let msg = decode_message(&frame)?;
                let replies = self.net.step(msg, self.store);
                self.record(TraceKind::ToNetwork, frame_text(&frame));
                self.send(replies, false)?;
            }
            while self.to_app > 0 {
                let frame = self
                    .duct
                    .recv_at_application()?
                    .ok_or(DuctError::Closed(self.to_app))?;
                self.to_app -= 1;
                let msg = decode_message(&frame)?;
                let replies = self.app.step(AppEvent::Message(msg));
                self.record(TraceKind::ToApplication, frame_text(&frame));
                self.send(replies, true)?;
            }
        }
        Ok(())
    }
}

fn frame_text(frame: &[u8]) -> String {
    String::from_utf8_lossy(frame).trim_end_matches('\n').to_string()
}

/// Applies each command to a fresh application endpoint, then delivers
/// messages back and forth until neither side has anything in flight.
pub fn run_lockstep<D: Duct>(
    script: &[AppCommand],
    store: &TableStore,
    duct: &mut D,
) -> Result<NegotiationOutcome, DuctError> {
    let mut ls = Lockstep {
        duct,
        store,
        app: ApplicationSession::new(),
        net: NetworkSession::new(),
        to_net: 0,
        to_app: 0,
        trace: Vec::new(),
    };
    for cmd in script {
        let out = ls.app.step(AppEvent::Command(cmd.clone()));
        ls.record(TraceKind::Command, cmd.to_string());
        ls.send(out, true)?;
        ls.pump()?;
    }
    Ok(NegotiationOutcome {
        application: ls.app,
        network: ls.net,
        trace: ls.trace,
    })
}

/// The usual level-3 flow: connect, report the observed BER, then require
/// `floor_ratio` of the benchmark's nominal accuracy.
pub fn standard_script(benchmark_id: &str, floor_ratio: f64, ber: f64) -> Vec<AppCommand> {
    vec![
        AppCommand::Connect {
            level: super::wire::IntegrationLevel::BENCHMARK_CATALOG,
        },
        AppCommand::ReportBer { ber },
        AppCommand::Require {
            benchmark_id: benchmark_id.to_string(),
            floor_ratio,
        },
    ]
}
