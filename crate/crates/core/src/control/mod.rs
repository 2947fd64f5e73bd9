//! Control-plane negotiation between an application and the network.
//!
//! The application connects at integration level 3, receives the catalog of
//! benchmarks, reports the BER it observes and proposes an SSLA. The network
//! answers with the cheapest configuration meeting it, and re-selects when
//! later BER reports change the answer.

mod duct;
mod endpoint;
mod wire;

pub use duct::{
    run_lockstep, standard_script, Duct, DuctError, InProcessDuct, NegotiationOutcome, TraceEntry,
    TraceKind,
};
#[cfg(unix)]
pub use duct::SocketDuct;
pub use endpoint::{
    step_application, step_network, AppCommand, AppEvent, ApplicationSession, NegotiationState,
    NetworkSession, NetworkState, TableStore,
};
pub use wire::{
    decode_message, encode_message, valid_id, CatalogEntry, ControlMessage, IntegrationLevel,
    MessageBody, RejectReason, WireError,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{BenchmarkCell, BenchmarkTable};
    use crate::sla::{select_config, Ssla};

    const N: usize = 64;

    fn table() -> BenchmarkTable {
        let acc = |d: usize, b: u32, ber: f64| match (d, b, ber == 0.01) {
            (2, 1, true) => 0.88,
            (2, 1, false) => 0.50,
            (1, 1, _) => 0.86,
            (2, 2, _) => 0.87,
            _ => 0.89,
        };
        let mut cells = Vec::new();
        for d in [1, 2] {
            for b in [1, 2] {
                for ber in [0.01, 0.25] {
                    cells.push(BenchmarkCell {
                        d,
                        b,
                        ber,
                        runs: 3,
                        mean_accuracy: acc(d, b, ber),
                        std_accuracy: 0.0,
                    });
                }
            }
        }
        BenchmarkTable::new("toy".into(), 0.9, 3, cells, None).unwrap()
    }

    fn store() -> TableStore {
        TableStore::new(N).with(table())
    }

    fn msg(seq: u64, body: MessageBody) -> ControlMessage {
        ControlMessage { seq, body }
    }

    #[test]
    fn connect_emits_hello() {
        let (s, out) = step_application(
            ApplicationSession::new(),
            AppEvent::Command(AppCommand::Connect {
                level: IntegrationLevel::BENCHMARK_CATALOG,
            }),
        );
        assert_eq!(s.state(), NegotiationState::HelloSent);
        assert_eq!(
            encode_message(&out[0]),
            b"CTRL v1 seq=1 type=HELLO level=3\n".to_vec()
        );
    }

    #[test]
    fn require_emits_select_and_proposal() {
        let mut app = ApplicationSession::new();
        app.step(AppEvent::Command(AppCommand::Connect {
            level: IntegrationLevel::BENCHMARK_CATALOG,
        }));
        app.step(AppEvent::Message(msg(1, MessageBody::Catalog { entries: vec![] })));
        assert_eq!(app.state(), NegotiationState::CatalogReceived);
        let out = app.step(AppEvent::Command(AppCommand::Require {
            benchmark_id: "toy".into(),
            floor_ratio: 0.95,
        }));
        assert_eq!(app.state(), NegotiationState::SslaProposed);
        let bodies: Vec<_> = out.into_iter().map(|m| (m.seq, m.body)).collect();
        assert_eq!(
            bodies,
            vec![
                (2, MessageBody::Select { benchmark_id: "toy".into() }),
                (3, MessageBody::ProposeSsla { floor_ratio: 0.95 }),
            ]
        );
        let out = app.step(AppEvent::Message(msg(
            2,
            MessageBody::Reject {
                reason: RejectReason::NoFeasibleConfig,
            },
        )));
        assert!(out.is_empty());
        assert_eq!(app.state(), NegotiationState::Failed);
        assert!(app.failure().is_some());
    }

    #[test]
    fn illegal_events_fail_loudly() {
        let mut app = ApplicationSession::new();
        app.step(AppEvent::Command(AppCommand::Connect {
            level: IntegrationLevel::BENCHMARK_CATALOG,
        }));
        let out = app.step(AppEvent::Message(msg(1, MessageBody::Accept { d: 1, b: 1 })));
        assert_eq!(app.state(), NegotiationState::Failed);
        assert_eq!(
            out[0].body,
            MessageBody::Reject {
                reason: RejectReason::ProtocolViolation
            }
        );
        // terminal: later events are counted, not acted on
        assert!(app.step(AppEvent::Command(AppCommand::Close)).is_empty());
        assert_eq!(app.ignored_events(), 1);
    }

    #[test]
    fn sequence_regression_is_a_violation() {
        let st = store();
        let mut net = NetworkSession::new();
        net.step(
            msg(
                5,
                MessageBody::Hello {
                    level: IntegrationLevel::BENCHMARK_CATALOG,
                },
            ),
            &st,
        );
        assert_eq!(net.state(), NetworkState::CatalogSent);
        let out = net.step(msg(5, MessageBody::Select { benchmark_id: "toy".into() }), &st);
        assert_eq!(net.state(), NetworkState::Failed);
        assert_eq!(
            out[0].body,
            MessageBody::Reject {
                reason: RejectReason::ProtocolViolation
            }
        );
    }

    #[test]
    fn network_rejects_other_levels_and_unknown_benchmarks() {
        let st = store();
        for level in [0, 1, 2, 4] {
            let (net, out) = step_network(
                NetworkSession::new(),
                msg(1, MessageBody::Hello { level: IntegrationLevel::new(level).unwrap() }),
                &st,
            );
            assert_eq!(net.state(), NetworkState::Failed);
            assert_eq!(
                out[0].body,
                MessageBody::Reject {
                    reason: RejectReason::UnsupportedLevel
                }
            );
        }
        let mut net = NetworkSession::new();
        net.step(msg(1, MessageBody::Hello { level: IntegrationLevel::BENCHMARK_CATALOG }), &st);
        let out = net.step(msg(2, MessageBody::Select { benchmark_id: "other".into() }), &st);
        assert_eq!(
            out[0].body,
            MessageBody::Reject {
                reason: RejectReason::UnknownBenchmark
            }
        );
    }

    #[test]
    fn feasible_flow_takes_six_messages() {
        let st = store();
        let out = run_lockstep(&standard_script("toy", 0.95, 0.01), &st, &mut InProcessDuct::new())
            .unwrap();
        assert_eq!(out.message_count(), 6);
        assert_eq!(out.application.state(), NegotiationState::Active);
        assert_eq!(out.network.state(), NetworkState::Active);
        let ssla = Ssla::new("toy", 0.95).unwrap();
        let cfg = select_config(&table(), &ssla, 0.01, N).unwrap();
        assert_eq!(out.application.config(), Some((cfg.fragment_dim(), cfg.bits())));
        assert_eq!(out.application.config(), Some((2, 1)));
        let types: Vec<_> = out
            .messages()
            .map(|e| decode_message(format!("{}\n", e.text).as_bytes()).unwrap().body.type_name())
            .collect();
        assert_eq!(
            types,
            ["HELLO", "CATALOG", "REPORT_BER", "SELECT", "PROPOSE_SSLA", "ACCEPT"]
        );
    }

    #[test]
    fn infeasible_flow_fails() {
        let st = store();
        let out = run_lockstep(&standard_script("toy", 1.0, 0.01), &st, &mut InProcessDuct::new())
            .unwrap();
        assert_eq!(out.application.state(), NegotiationState::Failed);
        assert_eq!(out.network.state(), NetworkState::Failed);
        assert!(out.trace.last().unwrap().text.ends_with("reason=NoFeasibleConfig"));
    }

    #[test]
    fn reconfig_only_on_change() {
        let st = store();
        let mut script = standard_script("toy", 0.95, 0.01);
        script.push(AppCommand::ReportBer { ber: 0.005 });
        let out = run_lockstep(&script, &st, &mut InProcessDuct::new()).unwrap();
        assert_eq!(out.message_count(), 7);
        script.push(AppCommand::ReportBer { ber: 0.2 });
        let out = run_lockstep(&script, &st, &mut InProcessDuct::new()).unwrap();
        assert_eq!(out.message_count(), 9);
        assert!(out.trace.last().unwrap().text.ends_with("type=RECONFIG d=2 b=2"));
        assert_eq!(out.application.config(), Some((2, 2)));
        assert_eq!(out.application.last_ber(), Some(0.2));
    }

    #[cfg(unix)]
    #[test]
    fn socket_trace_matches_in_process() {
        let st = store();
        for ratio in [0.95, 1.0] {
            let script = standard_script("toy", ratio, 0.01);
            let a = run_lockstep(&script, &st, &mut InProcessDuct::new()).unwrap();
            let b = run_lockstep(&script, &st, &mut SocketDuct::new().unwrap()).unwrap();
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.render(), b.render());
        }
    }
}
