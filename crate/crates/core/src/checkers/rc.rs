use super::{CheckOptions, Prepared, StampMap, StampSet, Verdict};
use crate::graph::{CommitGraph, NodeId};
use crate::model::History;

pub fn check_rc_with(h: &History, opts: CheckOptions) -> Verdict {
    match Prepared::new(h, opts) {
        Err(v) => Verdict::Violation(v),
        Ok(pre) => {
            let g = saturate(&pre);
            pre.finish(Ok(g))
        }
    }
}

const NONE: NodeId = NodeId::MAX;

/// For every reader t3 and every first read of t3 from some t2, orders t2
/// before the writer of each later read of a key t2 also writes.
pub(crate) fn saturate(pre: &Prepared) -> CommitGraph {
    let h = pre.h;
    let facts = &pre.facts;
    let mut g = pre.base_graph();

    // Two po-earliest distinct writers among the reads after the cursor,
    // per key: (older, newer).
    let mut earliest: StampMap<(NodeId, NodeId)> = StampMap::new(h.key_count());
    let mut read_keys = StampSet::new(h.key_count());
    let mut first_read: StampMap<u32> = StampMap::new(g.node_count());

    for t3 in h.committed_txns() {
        let n3 = g.node(t3);
        let reads = facts.ext_reads(n3);
        if reads.is_empty() {
            continue;
        }
        earliest.clear();
        read_keys.clear();
        first_read.clear();
        for (i, &(t2, _)) in reads.iter().enumerate() {
            if first_read.get(t2).is_none() {
                first_read.insert(t2, i as u32);
            }
        }

        for (i, &(t2, y)) in reads.iter().enumerate().rev() {
            if first_read.get(t2) == Some(i as u32) {
                let written = facts.keys_written(t2);
                let mut infer = |x: u32| {
                    let Some((older, newer)) = earliest.get(x) else {
                        return;
                    };
                    let t1 = if newer == t2 { older } else { newer };
                    if t1 != NONE {
                        g.add_inferred_nodes(t2, t1);
                    }
                };
                if read_keys.len() < written.len() {
                    for &x in read_keys.items() {
                        if facts.writes_key(t2, crate::model::Key(x)) {
                            infer(x);
                        }
                    }
                } else {
                    for x in written {
                        if read_keys.contains(x.0) {
                            infer(x.0);
                        }
                    }
                }
            }
            let (_, newer) = earliest.get(y.0).unwrap_or((NONE, NONE));
            if newer != t2 {
                earliest.insert(y.0, (newer, t2));
                read_keys.insert(y.0);
            }
        }
    }
    g
}
