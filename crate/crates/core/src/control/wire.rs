//! Newline-delimited text frames:
//!
//! ```text
//! CTRL v1 seq=<n> type=<T> [<key>=<value> ...]\n
//! ```
//!
//! | type         | keys, in order                       |
//! |--------------|--------------------------------------|
//! | HELLO        | `level`                              |
//! | CATALOG      | `benchmarks` (`id:nominal,...`)      |
//! | SELECT       | `benchmark`                          |
//! | PROPOSE_SSLA | `floor_ratio`                        |
//! | ACCEPT       | `d`, `b`                             |
//! | REJECT       | `reason`                             |
//! | REPORT_BER   | `ber`                                |
//! | RECONFIG     | `d`, `b`                             |
//! | CLOSE        |                                      |
//!
//! Floats use the shortest decimal that round-trips.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::format::fmt_float;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("bad value for {key}: {value:?}")]
    BadFieldValue { key: String, value: String },
}

/// How much semantic information the application shares with the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegrationLevel(u8);

impl IntegrationLevel {
    /// Level at which the network offers benchmark-catalog service.
    pub const BENCHMARK_CATALOG: IntegrationLevel = IntegrationLevel(3);

    pub fn new(level: u8) -> Option<Self> {
        (level <= 4).then_some(IntegrationLevel(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NoFeasibleConfig,
    UnknownBenchmark,
    UnsupportedLevel,
    BerOutOfRange,
    ProtocolViolation,
}

impl RejectReason {
    fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoFeasibleConfig => "NoFeasibleConfig",
            RejectReason::UnknownBenchmark => "UnknownBenchmark",
            RejectReason::UnsupportedLevel => "UnsupportedLevel",
            RejectReason::BerOutOfRange => "BerOutOfRange",
            RejectReason::ProtocolViolation => "ProtocolViolation",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RejectReason {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "NoFeasibleConfig" => RejectReason::NoFeasibleConfig,
            "UnknownBenchmark" => RejectReason::UnknownBenchmark,
            "UnsupportedLevel" => RejectReason::UnsupportedLevel,
            "BerOutOfRange" => RejectReason::BerOutOfRange,
            "ProtocolViolation" => RejectReason::ProtocolViolation,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub benchmark_id: String,
    pub nominal_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageBody {
    Hello { level: IntegrationLevel },
    Catalog { entries: Vec<CatalogEntry> },
    Select { benchmark_id: String },
    ProposeSsla { floor_ratio: f64 },
    Accept { d: usize, b: u32 },
    Reject { reason: RejectReason },
    ReportBer { ber: f64 },
    Reconfig { d: usize, b: u32 },
    Close,
}

impl MessageBody {
    pub fn type_name(&self) -> &'static str {
        match self {
            MessageBody::Hello { .. } => "HELLO",
            MessageBody::Catalog { .. } => "CATALOG",
            MessageBody::Select { .. } => "SELECT",
            MessageBody::ProposeSsla { .. } => "PROPOSE_SSLA",
            MessageBody::Accept { .. } => "ACCEPT",
            MessageBody::Reject { .. } => "REJECT",
            MessageBody::ReportBer { .. } => "REPORT_BER",
            MessageBody::Reconfig { .. } => "RECONFIG",
            MessageBody::Close => "CLOSE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMessage {
    pub seq: u64,
    pub body: MessageBody,
}

/// Identifiers travel unquoted, so they exclude separators.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(|c| c.is_whitespace() || matches!(c, '=' | ',' | ':'))
}

pub fn encode_message(msg: &ControlMessage) -> Vec<u8> {
    let mut line = format!("CTRL v1 seq={} type={}", msg.seq, msg.body.type_name());
    match &msg.body {
        MessageBody::Hello { level } => line += &format!(" level={}", level.get()),
        MessageBody::Catalog { entries } => {
            let list: Vec<String> = entries
                .iter()
                .map(|e| format!("{}:{}", e.benchmark_id, fmt_float(e.nominal_accuracy)))
                .collect();
            line += &format!(" benchmarks={}", list.join(","));
        }
        MessageBody::Select { benchmark_id } => line += &format!(" benchmark={benchmark_id}"),
        MessageBody::ProposeSsla { floor_ratio } => {
            line += &format!(" floor_ratio={}", fmt_float(*floor_ratio))
        }
        MessageBody::Accept { d, b } | MessageBody::Reconfig { d, b } => {
            line += &format!(" d={d} b={b}")
        }
        MessageBody::Reject { reason } => line += &format!(" reason={reason}"),
        MessageBody::ReportBer { ber } => line += &format!(" ber={}", fmt_float(*ber)),
        MessageBody::Close => {}
    }
    line.push('\n');
    line.into_bytes()
}

struct Fields<'a> {
    tokens: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str, WireError> {
        let token = self
            .tokens
            .next()
            .ok_or_else(|| WireError::MalformedFrame(format!("missing {key}=")))?;
        token
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| WireError::MalformedFrame(format!("expected {key}=, found {token:?}")))
    }

    fn parse<T: FromStr>(&mut self, key: &str, ok: impl Fn(&T) -> bool) -> Result<T, WireError> {
        let raw = self.take(key)?;
        raw.parse::<T>()
            .ok()
            .filter(|v| ok(v))
            .ok_or_else(|| WireError::BadFieldValue {
                key: key.into(),
                value: raw.into(),
            })
    }

    fn finish(mut self) -> Result<(), WireError> {
        match self.tokens.next() {
            Some(extra) => Err(WireError::MalformedFrame(format!("unexpected field {extra:?}"))),
            None => Ok(()),
        }
    }
}

fn bad(key: &str, value: &str) -> WireError {
    WireError::BadFieldValue {
        key: key.into(),
        value: value.into(),
    }
}

pub fn decode_message(frame: &[u8]) -> Result<ControlMessage, WireError> {
    let text = std::str::from_utf8(frame)
        .map_err(|_| WireError::MalformedFrame("frame is not UTF-8".into()))?;
    let text = text.strip_suffix('\n').unwrap_or(text);
    if text.contains('\n') {
        return Err(WireError::MalformedFrame("embedded newline".into()));
    }
    let mut tokens = text.split_ascii_whitespace();
    if tokens.next() != Some("CTRL") {
        return Err(WireError::MalformedFrame("missing CTRL prefix".into()));
    }
    match tokens.next() {
        Some("v1") => {}
        other => return Err(WireError::MalformedFrame(format!("unsupported version {other:?}"))),
    }
    let mut f = Fields { tokens };
    let seq: u64 = f.parse("seq", |_| true)?;
    let kind = f.take("type")?;
    let finite = |v: &f64| v.is_finite();
    let body = match kind {
        "HELLO" => {
            let raw = f.take("level")?;
            let level = raw
                .parse::<u8>()
                .ok()
                .and_then(IntegrationLevel::new)
                .ok_or_else(|| bad("level", raw))?;
            MessageBody::Hello { level }
        }
        "CATALOG" => {
            let raw = f.take("benchmarks")?;
            let mut entries = Vec::new();
            for item in raw.split(',').filter(|s| !s.is_empty()) {
                let (id, acc) = item.split_once(':').ok_or_else(|| bad("benchmarks", raw))?;
                let nominal_accuracy = acc
                    .parse::<f64>()
                    .ok()
                    .filter(|a| (0.0..=1.0).contains(a))
                    .ok_or_else(|| bad("benchmarks", raw))?;
                if !valid_id(id) {
                    return Err(bad("benchmarks", raw));
                }
                entries.push(CatalogEntry {
                    benchmark_id: id.into(),
                    nominal_accuracy,
                });
            }
            MessageBody::Catalog { entries }
        }
        "SELECT" => {
            let id = f.take("benchmark")?;
            if !valid_id(id) {
                return Err(bad("benchmark", id));
            }
            MessageBody::Select {
                benchmark_id: id.into(),
            }
        }
        "PROPOSE_SSLA" => MessageBody::ProposeSsla {
            floor_ratio: f.parse("floor_ratio", |r: &f64| finite(r) && *r > 0.0 && *r <= 1.0)?,
        },
        "ACCEPT" | "RECONFIG" => {
            let d = f.parse("d", |d: &usize| *d > 0)?;
            let b = f.parse("b", |b: &u32| (1..=crate::MAX_BITS).contains(b))?;
            if kind == "ACCEPT" {
                MessageBody::Accept { d, b }
            } else {
                MessageBody::Reconfig { d, b }
            }
        }
        "REJECT" => MessageBody::Reject {
            reason: f.parse("reason", |_| true)?,
        },
        "REPORT_BER" => MessageBody::ReportBer {
            ber: f.parse("ber", |b: &f64| (0.0..=1.0).contains(b))?,
        },
        "CLOSE" => MessageBody::Close,
        other => return Err(WireError::UnknownType(other.into())),
    };
    f.finish()?;
    Ok(ControlMessage { seq, body })
}

impl FromStr for IntegrationLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        s.parse::<u8>().ok().and_then(IntegrationLevel::new).ok_or(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msg(seq: u64, body: MessageBody) -> ControlMessage {
        ControlMessage { seq, body }
    }

    #[test]
    fn hello_frame_is_exact() {
        let m = msg(1, MessageBody::Hello { level: IntegrationLevel::BENCHMARK_CATALOG });
        assert_eq!(encode_message(&m), b"CTRL v1 seq=1 type=HELLO level=3\n");
        assert_eq!(decode_message(b"CTRL v1 seq=1 type=HELLO level=3\n").unwrap(), m);
    }

    #[test]
    fn other_frames() {
        let cases = [
            (
                MessageBody::Catalog {
                    entries: vec![
                        CatalogEntry { benchmark_id: "banking77".into(), nominal_accuracy: 0.866 },
                        CatalogEntry { benchmark_id: "toy".into(), nominal_accuracy: 1.0 },
                    ],
                },
                "CTRL v1 seq=2 type=CATALOG benchmarks=banking77:0.866,toy:1\n",
            ),
            (MessageBody::Catalog { entries: vec![] }, "CTRL v1 seq=2 type=CATALOG benchmarks=\n"),
            (MessageBody::ProposeSsla { floor_ratio: 0.95 }, "CTRL v1 seq=2 type=PROPOSE_SSLA floor_ratio=0.95\n"),
            (MessageBody::Accept { d: 2, b: 1 }, "CTRL v1 seq=2 type=ACCEPT d=2 b=1\n"),
            (
                MessageBody::Reject { reason: RejectReason::NoFeasibleConfig },
                "CTRL v1 seq=2 type=REJECT reason=NoFeasibleConfig\n",
            ),
            (MessageBody::ReportBer { ber: 0.15 }, "CTRL v1 seq=2 type=REPORT_BER ber=0.15\n"),
            (MessageBody::Close, "CTRL v1 seq=2 type=CLOSE\n"),
        ];
        for (body, text) in cases {
            let m = msg(2, body);
            assert_eq!(String::from_utf8(encode_message(&m)).unwrap(), text);
            assert_eq!(decode_message(text.as_bytes()).unwrap(), m);
        }
    }

    #[test]
    fn malformed_frames() {
        let err = |s: &str| decode_message(s.as_bytes()).unwrap_err();
        assert!(matches!(err("CTRL v1 type=HELLO level=3\n"), WireError::MalformedFrame(_)));
        assert!(matches!(err("CTRL v2 seq=1 type=CLOSE\n"), WireError::MalformedFrame(_)));
        assert!(matches!(err("XTRL v1 seq=1 type=CLOSE\n"), WireError::MalformedFrame(_)));
        assert!(matches!(err("CTRL v1 seq=1 type=CLOSE extra=1\n"), WireError::MalformedFrame(_)));
        assert!(matches!(err("CTRL v1 seq=1 type=ACCEPT b=1 d=2\n"), WireError::MalformedFrame(_)));
        assert_eq!(err("CTRL v1 seq=1 type=PING\n"), WireError::UnknownType("PING".into()));
        assert!(matches!(err("CTRL v1 seq=1 type=HELLO level=7\n"), WireError::BadFieldValue { .. }));
        assert!(matches!(err("CTRL v1 seq=x type=CLOSE\n"), WireError::BadFieldValue { .. }));
        assert!(matches!(err("CTRL v1 seq=1 type=REPORT_BER ber=1.5\n"), WireError::BadFieldValue { .. }));
        assert!(matches!(err("CTRL v1 seq=1 type=REJECT reason=Nope\n"), WireError::BadFieldValue { .. }));
        assert!(matches!(err("CTRL v1 seq=1 type=PROPOSE_SSLA floor_ratio=0\n"), WireError::BadFieldValue { .. }));
    }

    fn id() -> impl Strategy<Value = String> {
        "[a-z0-9_.-]{1,12}"
    }

    fn body() -> impl Strategy<Value = MessageBody> {
        prop_oneof![
            (0u8..=4).prop_map(|l| MessageBody::Hello { level: IntegrationLevel::new(l).unwrap() }),
            prop::collection::vec((id(), 0.0f64..=1.0), 0..4).prop_map(|v| MessageBody::Catalog {
                entries: v
                    .into_iter()
                    .map(|(benchmark_id, nominal_accuracy)| CatalogEntry { benchmark_id, nominal_accuracy })
                    .collect()
            }),
            id().prop_map(|benchmark_id| MessageBody::Select { benchmark_id }),
            (1e-6f64..=1.0).prop_map(|floor_ratio| MessageBody::ProposeSsla { floor_ratio }),
            (1usize..5000, 1u32..=16).prop_map(|(d, b)| MessageBody::Accept { d, b }),
            (1usize..5000, 1u32..=16).prop_map(|(d, b)| MessageBody::Reconfig { d, b }),
            prop_oneof![
                Just(RejectReason::NoFeasibleConfig),
                Just(RejectReason::UnknownBenchmark),
                Just(RejectReason::UnsupportedLevel),
                Just(RejectReason::BerOutOfRange),
                Just(RejectReason::ProtocolViolation),
            ]
            .prop_map(|reason| MessageBody::Reject { reason }),
            (0.0f64..=1.0).prop_map(|ber| MessageBody::ReportBer { ber }),
            Just(MessageBody::Close),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(seq in any::<u64>(), body in body()) {
            let m = ControlMessage { seq, body };
            prop_assert_eq!(decode_message(&encode_message(&m)).unwrap(), m);
        }
    }
}
