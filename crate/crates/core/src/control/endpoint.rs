//! Application and network session state machines.
//!
//! Each endpoint is single-owner. Outbound messages are stamped with a
//! per-direction sequence number starting at 1; an inbound sequence number
//! that does not increase is a protocol violation.

use std::collections::BTreeMap;
use std::fmt;

use super::wire::{CatalogEntry, ControlMessage, IntegrationLevel, MessageBody, RejectReason};
use crate::bench::BenchmarkTable;
use crate::error::Error;
use crate::sla::{select_config, Ssla};

/// Outbound sequence numbering and inbound ordering checks.
#[derive(Debug, Clone, PartialEq, Default)]
struct SeqTracker {
    sent: u64,
    received: u64,
}

impl SeqTracker {
    fn stamp(&mut self, body: MessageBody) -> ControlMessage {
        self.sent += 1;
        ControlMessage {
            seq: self.sent,
            body,
        }
    }

    fn accept(&mut self, seq: u64) -> bool {
        if seq <= self.received {
            return false;
        }
        self.received = seq;
        true
    }
}

/// Application-side negotiation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NegotiationState {
    Idle,
    HelloSent,
    CatalogReceived,
    SslaProposed,
    Active,
    Failed,
    Closed,
}

impl NegotiationState {
    pub fn is_terminal(self) -> bool {
        matches!(self, NegotiationState::Failed | NegotiationState::Closed)
    }
}

impl fmt::Display for NegotiationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegotiationState::Idle => "IDLE",
            NegotiationState::HelloSent => "HELLO_SENT",
            NegotiationState::CatalogReceived => "CATALOG_RECEIVED",
            NegotiationState::SslaProposed => "SSLA_PROPOSED",
            NegotiationState::Active => "ACTIVE",
            NegotiationState::Failed => "FAILED",
            NegotiationState::Closed => "CLOSED",
        })
    }
}

/// Local commands issued to the application endpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum AppCommand {
    Connect { level: IntegrationLevel },
    /// Tell the network the BER the application observes on the data plane.
    ReportBer { ber: f64 },
    Require { benchmark_id: String, floor_ratio: f64 },
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppEvent {
    Command(AppCommand),
    Message(ControlMessage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationSession {
    state: NegotiationState,
    seq: SeqTracker,
    catalog: Vec<CatalogEntry>,
    ssla: Option<Ssla>,
    config: Option<(usize, u32)>,
    last_ber: Option<f64>,
    failure: Option<String>,
    ignored: usize,
}

impl Default for ApplicationSession {
    fn default() -> Self {
        Self::new()
    }
}

impl ApplicationSession {
    pub fn new() -> Self {
        ApplicationSession {
            state: NegotiationState::Idle,
            seq: SeqTracker::default(),
            catalog: Vec::new(),
            ssla: None,
            config: None,
            last_ber: None,
            failure: None,
            ignored: 0,
        }
    }

    pub fn state(&self) -> NegotiationState {
        self.state
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn ssla(&self) -> Option<&Ssla> {
        self.ssla.as_ref()
    }

    /// Agreed `(d, b)`, set once ACTIVE.
    pub fn config(&self) -> Option<(usize, u32)> {
        self.config
    }

    pub fn last_ber(&self) -> Option<f64> {
        self.last_ber
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    /// Events that arrived after the session had ended.
    pub fn ignored_events(&self) -> usize {
        self.ignored
    }

    fn fail(&mut self, reason: String, notify_peer: bool) -> Vec<ControlMessage> {
        let had_peer = self.state != NegotiationState::Idle;
        self.state = NegotiationState::Failed;
        self.failure = Some(reason);
        if notify_peer && had_peer {
            vec![self.seq.stamp(MessageBody::Reject {
                reason: RejectReason::ProtocolViolation,
            })]
        } else {
            vec![]
        }
    }

    pub fn step(&mut self, event: AppEvent) -> Vec<ControlMessage> {
        use NegotiationState as S;
        if self.state.is_terminal() {
            self.ignored += 1;
            return vec![];
        }
        match event {
            AppEvent::Command(cmd) => match (self.state, cmd) {
                (S::Idle, AppCommand::Connect { level }) => {
                    self.state = S::HelloSent;
                    vec![self.seq.stamp(MessageBody::Hello { level })]
                }
                (S::CatalogReceived | S::Active, AppCommand::ReportBer { ber }) => {
                    self.last_ber = Some(ber);
                    vec![self.seq.stamp(MessageBody::ReportBer { ber })]
                }
                (S::CatalogReceived, AppCommand::Require { benchmark_id, floor_ratio }) => {
                    match Ssla::new(benchmark_id.clone(), floor_ratio) {
                        Ok(ssla) => {
                            self.ssla = Some(ssla);
                            self.state = S::SslaProposed;
                            vec![
                                self.seq.stamp(MessageBody::Select { benchmark_id }),
                                self.seq.stamp(MessageBody::ProposeSsla { floor_ratio }),
                            ]
                        }
                        Err(e) => self.fail(format!("invalid requirement: {e}"), true),
                    }
                }
                (_, AppCommand::Close) => {
                    let was_idle = self.state == S::Idle;
                    self.state = S::Closed;
                    if was_idle {
                        vec![]
                    } else {
                        vec![self.seq.stamp(MessageBody::Close)]
                    }
                }
                (state, cmd) => self.fail(format!("command {cmd:?} not allowed in {state}"), true),
            },
            AppEvent::Message(msg) => {
                if !self.seq.accept(msg.seq) {
                    return self.fail(format!("sequence number {} did not increase", msg.seq), true);
                }
                match (self.state, msg.body) {
                    (S::HelloSent, MessageBody::Catalog { entries }) => {
                        self.catalog = entries;
                        self.state = S::CatalogReceived;
                        vec![]
                    }
                    (S::SslaProposed, MessageBody::Accept { d, b }) => {
                        self.config = Some((d, b));
                        self.state = S::Active;
                        vec![]
                    }
                    (S::Active, MessageBody::Reconfig { d, b }) => {
                        self.config = Some((d, b));
                        vec![]
                    }
                    (_, MessageBody::Reject { reason }) => self.fail(format!("rejected: {reason}"), false),
                    (_, MessageBody::Close) => {
                        self.state = S::Closed;
                        vec![]
                    }
                    (state, body) => {
                        self.fail(format!("unexpected {} in {state}", body.type_name()), true)
                    }
                }
            }
        }
    }
}

/// Network-side negotiation state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkState {
    Idle,
    CatalogSent,
    BenchmarkSelected,
    Active,
    Failed,
    Closed,
}

impl NetworkState {
    pub fn is_terminal(self) -> bool {
        matches!(self, NetworkState::Failed | NetworkState::Closed)
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkState::Idle => "IDLE",
            NetworkState::CatalogSent => "CATALOG_SENT",
            NetworkState::BenchmarkSelected => "BENCHMARK_SELECTED",
            NetworkState::Active => "ACTIVE",
            NetworkState::Failed => "FAILED",
            NetworkState::Closed => "CLOSED",
        })
    }
}

/// Benchmark tables offered by the network, plus the embedding dimension
/// its data plane carries.
#[derive(Debug, Clone, PartialEq)]
pub struct TableStore {
    tables: BTreeMap<String, BenchmarkTable>,
    embedding_dim: usize,
}

impl TableStore {
    pub fn new(embedding_dim: usize) -> Self {
        TableStore {
            tables: BTreeMap::new(),
            embedding_dim,
        }
    }

    pub fn insert(&mut self, table: BenchmarkTable) {
        self.tables.insert(table.dataset_id().to_string(), table);
    }

    pub fn with(mut self, table: BenchmarkTable) -> Self {
        self.insert(table);
        self
    }

    pub fn get(&self, id: &str) -> Option<&BenchmarkTable> {
        self.tables.get(id)
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    fn catalog(&self) -> Vec<CatalogEntry> {
        self.tables
            .values()
            .map(|t| CatalogEntry {
                benchmark_id: t.dataset_id().to_string(),
                nominal_accuracy: t.nominal_accuracy(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSession {
    state: NetworkState,
    seq: SeqTracker,
    benchmark_id: Option<String>,
    ssla: Option<Ssla>,
    config: Option<(usize, u32)>,
    last_ber: Option<f64>,
    failure: Option<String>,
    ignored: usize,
}

impl Default for NetworkSession {
    fn default() -> Self {
        Self::new()
    }
}

impl NetworkSession {
    pub fn new() -> Self {
        NetworkSession {
            state: NetworkState::Idle,
            seq: SeqTracker::default(),
            benchmark_id: None,
            ssla: None,
            config: None,
            last_ber: None,
            failure: None,
            ignored: 0,
        }
    }

    pub fn state(&self) -> NetworkState {
        self.state
    }

    pub fn ssla(&self) -> Option<&Ssla> {
        self.ssla.as_ref()
    }

    pub fn config(&self) -> Option<(usize, u32)> {
        self.config
    }

    pub fn last_ber(&self) -> Option<f64> {
        self.last_ber
    }

    pub fn failure(&self) -> Option<&str> {
        self.failure.as_deref()
    }

    pub fn ignored_events(&self) -> usize {
        self.ignored
    }

    fn reject(&mut self, reason: RejectReason, detail: String) -> Vec<ControlMessage> {
        self.state = NetworkState::Failed;
        self.failure = Some(detail);
        vec![self.seq.stamp(MessageBody::Reject { reason })]
    }

    /// Runs selection for the stored SSLA at the last reported BER, or the
    /// table's lowest grid BER when none was reported.
    fn select(&self, store: &TableStore) -> Result<(usize, u32), (RejectReason, String)> {
        let (Some(id), Some(ssla)) = (&self.benchmark_id, &self.ssla) else {
            return Err((RejectReason::ProtocolViolation, "no SSLA on record".into()));
        };
        let table = store
            .get(id)
            .ok_or_else(|| (RejectReason::UnknownBenchmark, format!("unknown benchmark {id}")))?;
        let ber = self
            .last_ber
            .unwrap_or_else(|| table.ber_values().first().copied().unwrap_or(0.0));
        match select_config(table, ssla, ber, store.embedding_dim()) {
            Ok(cfg) => Ok((cfg.fragment_dim(), cfg.bits())),
            Err(e @ Error::BerOutOfRange { .. }) => Err((RejectReason::BerOutOfRange, e.to_string())),
            Err(e) => Err((RejectReason::NoFeasibleConfig, e.to_string())),
        }
    }

    pub fn step(&mut self, msg: ControlMessage, store: &TableStore) -> Vec<ControlMessage> {
        use NetworkState as S;
        if self.state.is_terminal() {
            self.ignored += 1;
            return vec![];
        }
        if !self.seq.accept(msg.seq) {
            let detail = format!("sequence number {} did not increase", msg.seq);
            return self.reject(RejectReason::ProtocolViolation, detail);
        }
        match (self.state, msg.body) {
            (S::Idle, MessageBody::Hello { level }) => {
                if level != IntegrationLevel::BENCHMARK_CATALOG {
                    return self.reject(
                        RejectReason::UnsupportedLevel,
                        format!("integration level {} not offered", level.get()),
                    );
                }
                self.state = S::CatalogSent;
                vec![self.seq.stamp(MessageBody::Catalog {
                    entries: store.catalog(),
                })]
            }
            (S::CatalogSent, MessageBody::Select { benchmark_id }) => {
                if store.get(&benchmark_id).is_none() {
                    return self.reject(
                        RejectReason::UnknownBenchmark,
                        format!("unknown benchmark {benchmark_id}"),
                    );
                }
                self.benchmark_id = Some(benchmark_id);
                self.state = S::BenchmarkSelected;
                vec![]
            }
            (S::CatalogSent | S::BenchmarkSelected, MessageBody::ReportBer { ber }) => {
                self.last_ber = Some(ber);
                vec![]
            }
            (S::BenchmarkSelected, MessageBody::ProposeSsla { floor_ratio }) => {
                let id = self.benchmark_id.clone().unwrap_or_default();
                match Ssla::new(id, floor_ratio) {
                    Ok(ssla) => self.ssla = Some(ssla),
                    Err(e) => return self.reject(RejectReason::ProtocolViolation, e.to_string()),
                }
                match self.select(store) {
                    Ok((d, b)) => {
                        self.config = Some((d, b));
                        self.state = S::Active;
                        vec![self.seq.stamp(MessageBody::Accept { d, b })]
                    }
                    Err((reason, detail)) => self.reject(reason, detail),
                }
            }
            (S::Active, MessageBody::ReportBer { ber }) => {
                self.last_ber = Some(ber);
                match self.select(store) {
                    Ok(cfg) if Some(cfg) == self.config => vec![],
                    Ok((d, b)) => {
                        self.config = Some((d, b));
                        vec![self.seq.stamp(MessageBody::Reconfig { d, b })]
                    }
                    Err((reason, detail)) => self.reject(reason, detail),
                }
            }
            (_, MessageBody::Reject { reason }) => {
                self.state = S::Failed;
                self.failure = Some(format!("peer rejected: {reason}"));
                vec![]
            }
            (_, MessageBody::Close) => {
                self.state = S::Closed;
                vec![]
            }
            (state, body) => self.reject(
                RejectReason::ProtocolViolation,
                format!("unexpected {} in {state}", body.type_name()),
            ),
        }
    }
}

/// Functional form of [`ApplicationSession::step`].
pub fn step_application(
    mut state: ApplicationSession,
    event: AppEvent,
) -> (ApplicationSession, Vec<ControlMessage>) {
    let out = state.step(event);
    (state, out)
}

/// Functional form of [`NetworkSession::step`].
pub fn step_network(
    mut state: NetworkSession,
    event: ControlMessage,
    store: &TableStore,
) -> (NetworkSession, Vec<ControlMessage>) {
    let out = state.step(event, store);
    (state, out)
}
