//! Human-readable and JSON-lines verdict output.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::checkers::{IsolationLevel, Verdict, Violation};
use crate::consistency::ReadViolation;
use crate::graph::CycleWitness;
use crate::model::{History, TxnRef};

const GREEN: &str = "\x1b[32m";
const RED: &str = "\x1b[31m";
const RESET: &str = "\x1b[0m";

fn paint(s: &str, color: &str, enabled: bool) -> String {
    if enabled {
        format!("{color}{s}{RESET}")
    } else {
        s.to_owned()
    }
}

fn tid(h: &History, t: TxnRef) -> u64 {
    h.txn(t).id.0
}

pub fn consistent_line(level: IsolationLevel, color: bool) -> String {
    format!("{} {level}\n", paint("CONSISTENT", GREEN, color))
}

pub fn violation_line(level: IsolationLevel, kind: &str, color: bool) -> String {
    format!("{} {level} {kind}\n", paint("VIOLATION", RED, color))
}

pub fn read_violation_line(h: &History, v: &ReadViolation) -> String {
    let op = h.op(v.read);
    format!(
        "READ-CONSISTENCY {} read={} txn={} key={} value={}\n",
        v.kind,
        v.read,
        tid(h, h.txn_of(v.read)),
        h.key_name(op.key),
        op.value
    )
}

pub fn cycle_lines(h: &History, c: &CycleWitness) -> String {
    let mut out = String::new();
    for e in &c.edges {
        let _ = writeln!(out, "{} -[{}]-> {}", tid(h, e.from), e.label, tid(h, e.to));
    }
    out
}

pub fn human(h: &History, level: IsolationLevel, verdict: &Verdict, color: bool) -> String {
    let violations = match verdict {
        Verdict::Consistent(_) => return consistent_line(level, color),
        Verdict::Violation(v) => v,
    };
    let mut out = String::new();
    for v in violations {
        out += &violation_line(level, v.kind_name(), color);
        match v {
            Violation::ReadConsistency(reads) => {
                for r in reads {
                    out += &read_violation_line(h, r);
                }
            }
            Violation::NonRepeatableRead {
                txn,
                key,
                first_writer,
                second_writer,
            } => {
                let _ = writeln!(
                    out,
                    "txn={} key={} writers={},{}",
                    tid(h, *txn),
                    h.key_name(*key),
                    tid(h, *first_writer),
                    tid(h, *second_writer)
                );
            }
            Violation::CoCycle(cycles) => {
                for (i, c) in cycles.iter().enumerate() {
                    let _ = writeln!(out, "cycle {} length={} inferred={}", i + 1, c.len(), c.non_sowr_edge_count);
                    out += &cycle_lines(h, c);
                }
            }
        }
    }
    out
}

fn cycle_json(h: &History, c: &CycleWitness) -> Value {
    c.edges
        .iter()
        .map(|e| json!({"from": tid(h, e.from), "to": tid(h, e.to), "label": e.label.as_str()}))
        .collect()
}

/// One JSON object, newline-terminated.
pub fn json_line(h: &History, level: IsolationLevel, verdict: &Verdict) -> String {
    let mut obj = json!({
        "level": level.as_str(),
        "outcome": if verdict.is_consistent() { "consistent" } else { "violation" },
        "kinds": verdict.violations().iter().map(Violation::kind_name).collect::<Vec<_>>(),
        "witness": verdict.cycles().next().map(|c| cycle_json(h, c)).unwrap_or(json!([])),
        "cycles": verdict.cycles().map(|c| cycle_json(h, c)).collect::<Vec<_>>(),
        "read_violations": [],
    });
    if let Some(order) = verdict.commit_order() {
        obj["commit_order"] = order.iter().map(|&t| tid(h, t)).collect();
    }
    for v in verdict.violations() {
        match v {
            Violation::ReadConsistency(reads) => {
                obj["read_violations"] = reads
                    .iter()
                    .map(|r| {
                        let op = h.op(r.read);
                        json!({
                            "kind": r.kind.to_string(),
                            "read": r.read.0,
                            "txn": tid(h, h.txn_of(r.read)),
                            "key": h.key_name(op.key),
                            "value": op.value,
                            "culprit": r.culprit.map(|c| c.0),
                        })
                    })
                    .collect();
            }
            Violation::NonRepeatableRead {
                txn,
                key,
                first_writer,
                second_writer,
            } => {
                obj["non_repeatable_read"] = json!({
                    "txn": tid(h, *txn),
                    "key": h.key_name(*key),
                    "writers": [tid(h, *first_writer), tid(h, *second_writer)],
                });
            }
            Violation::CoCycle(_) => {}
        }
    }
    let mut s = obj.to_string();
    s.push('\n');
    s
}
