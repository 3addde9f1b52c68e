#![allow(dead_code)]

use std::collections::VecDeque;

use isocheck::checkers::{saturated_graph, IsolationLevel, Verdict};
use isocheck::graph::{CommitGraph, EdgeLabel};
use isocheck::io::parse_history;
use isocheck::model::{History, TxnRef};
use isocheck::oracle::axiom_holds;

pub fn fixture_text(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}.hist", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn fixture(name: &str) -> History {
    parse_history(&fixture_text(name)).unwrap()
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/tests/fixtures/{name}.hist", env!("CARGO_MANIFEST_DIR"))
}

/// Consistent verdicts must carry an order satisfying the axiom; cyclic ones
/// must carry closed simple cycles made of graph edges.
pub fn certificate_ok(h: &History, level: IsolationLevel, v: &Verdict) -> Result<(), String> {
    if let Some(co) = v.commit_order() {
        return axiom_holds(h, level, co).map_err(|f| format!("commit order rejected: {f:?}"));
    }
    let g = match saturated_graph(h, level) {
        Ok(g) => g,
        // so ∪ wr is already cyclic.
        Err(_) => CommitGraph::new(h),
    };
    for c in v.cycles() {
        if !c.is_valid_in(&g) {
            return Err(format!("witness not a cycle of the graph: {c:?}"));
        }
    }
    Ok(())
}

pub fn sowr_reachable(g: &CommitGraph, from: TxnRef, to: TxnRef) -> bool {
    let (src, dst) = (g.node(from), g.node(to));
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::from([src]);
    seen[src as usize] = true;
    while let Some(u) = queue.pop_front() {
        if u == dst {
            return true;
        }
        for e in g.edges(u) {
            if e.label != EdgeLabel::CoInferred && !seen[e.target as usize] {
                seen[e.target as usize] = true;
                queue.push_back(e.target);
            }
        }
    }
    false
}

/// Every inferred `u -> v` is justified by an axiom instance with `t2 = u`
/// and `t1 = v`, or is already implied by `so ∪ wr`.
pub fn inferred_edges_justified(h: &History, level: IsolationLevel, g: &CommitGraph) -> Result<(), String> {
    let base = CommitGraph::new(h);
    let writes = |t: TxnRef, key| h.txn(t).writes().any(|w| w.key == key);
    let ext_writer = |t: TxnRef, r| {
        let w = h.txn_of(h.wr_source(r)?);
        (w != t).then_some(w)
    };
    for (u, v) in g.inferred_edges() {
        if sowr_reachable(&base, u, v) {
            continue;
        }
        let justified = h.committed_txns().any(|t3| {
            let ops = &h.txn(t3).ops;
            ops.iter().enumerate().any(|(px, rx)| {
                if !rx.is_read() || ext_writer(t3, rx.id) != Some(v) || !writes(u, rx.key) {
                    return false;
                }
                match level {
                    IsolationLevel::RC => ops[..px]
                        .iter()
                        .any(|r| r.is_read() && ext_writer(t3, r.id) == Some(u)),
                    IsolationLevel::RA => {
                        u.so_before(t3) == Some(true)
                            || ops.iter().any(|r| r.is_read() && ext_writer(t3, r.id) == Some(u))
                    }
                    IsolationLevel::CC => sowr_reachable(&base, u, t3),
                }
            })
        });
        if !justified {
            return Err(format!("unjustified inferred edge {u:?} -> {v:?}"));
        }
    }
    Ok(())
}
