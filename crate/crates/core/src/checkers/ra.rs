use rustc_hash::FxHashSet;

use super::{CheckOptions, Facts, Prepared, StampMap, StampSet, Verdict, Violation};
use crate::graph::{CommitGraph, CycleWitness, EdgeLabel, NodeId, WitnessEdge};
use crate::model::{History, Key, TxnRef};

pub fn check_ra_with(h: &History, opts: CheckOptions) -> Verdict {
    match Prepared::new(h, opts) {
        Err(v) => Verdict::Violation(v),
        Ok(pre) => {
            let g = saturate(&pre);
            pre.finish(g)
        }
    }
}

/// First committed transaction that reads some key from two different
/// transactions, in history order.
pub fn check_repeatable_reads(h: &History) -> Result<(), Violation> {
    let facts = Facts::new(h, &FxHashSet::default(), &crate::consistency::write_info(h));
    repeatable_reads(h, &facts)
}

fn repeatable_reads(h: &History, facts: &Facts) -> Result<(), Violation> {
    let mut source: StampMap<NodeId> = StampMap::new(h.key_count());
    for t in h.committed_txns() {
        source.clear();
        for &(w, x) in facts.ext_reads(facts.node(t)) {
            match source.get(x.0) {
                None => source.insert(x.0, w),
                Some(prev) if prev != w => {
                    return Err(Violation::NonRepeatableRead {
                        txn: t,
                        key: x,
                        first_writer: facts.txn_ref(prev),
                        second_writer: facts.txn_ref(w),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

pub(crate) fn saturate(pre: &Prepared) -> Result<CommitGraph, Violation> {
    let h = pre.h;
    let facts = &pre.facts;
    repeatable_reads(h, facts)?;
    let mut g = pre.base_graph();

    let mut last_write: StampMap<NodeId> = StampMap::new(h.key_count());
    // Unique external writer of each key read by the current transaction.
    let mut read_from: StampMap<NodeId> = StampMap::new(h.key_count());
    let mut read_keys = StampSet::new(h.key_count());
    let mut sources = StampSet::new(g.node_count());

    for s in 0..h.session_count() {
        last_write.clear();
        for (p, txn) in h.sessions()[s].iter().enumerate() {
            if !txn.is_committed() {
                continue;
            }
            let n3 = g.node(TxnRef::new(s as u32, p as u32));
            let reads = facts.ext_reads(n3);
            read_from.clear();
            read_keys.clear();
            sources.clear();

            for &(t1, x) in reads {
                read_from.insert(x.0, t1);
                read_keys.insert(x.0);
                sources.insert(t1);
                if let Some(t2) = last_write.get(x.0) {
                    if t2 != t1 {
                        g.add_inferred_nodes(t2, t1);
                    }
                }
            }

            for &t2 in sources.items() {
                let written = facts.keys_written(t2);
                let mut infer = |x: u32| {
                    let t1 = read_from.get(x).expect("read key has a source");
                    if t1 != t2 {
                        g.add_inferred_nodes(t2, t1);
                    }
                };
                if read_keys.len() < written.len() {
                    for &x in read_keys.items() {
                        if facts.writes_key(t2, Key(x)) {
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

            for x in facts.keys_written(n3) {
                last_write.insert(x.0, n3);
            }
        }
    }
    Ok(g)
}

/// Linear-time check for histories with a single session, where the commit
/// order must coincide with the session order.
pub fn check_ra_one_session(h: &History, opts: CheckOptions) -> Verdict {
    assert!(h.session_count() <= 1, "one-session checker given {} sessions", h.session_count());
    let pre = match Prepared::new(h, opts) {
        Err(v) => return Verdict::Violation(v),
        Ok(pre) => pre,
    };
    let outcome = one_session(&pre);
    let mut violations = Vec::new();
    if !pre.read_violations.is_empty() {
        violations.push(Violation::ReadConsistency(pre.read_violations));
    }
    match outcome {
        Err(v) => violations.push(v),
        Ok(order) if violations.is_empty() => return Verdict::Consistent(order),
        Ok(_) => {}
    }
    Verdict::Violation(violations)
}

fn one_session(pre: &Prepared) -> Result<Vec<TxnRef>, Violation> {
    let h = pre.h;
    let facts = &pre.facts;
    repeatable_reads(h, facts)?;
    let committed: Vec<TxnRef> = h.committed_txns().collect();
    // Index of each node within `committed`.
    let mut rank = vec![u32::MAX; h.txn_count()];
    for (i, &t) in committed.iter().enumerate() {
        rank[facts.node(t) as usize] = i as u32;
    }

    let mut latest: StampMap<NodeId> = StampMap::new(h.key_count());
    for (i3, &t3) in committed.iter().enumerate() {
        let n3 = facts.node(t3);
        for &(t1, x) in facts.ext_reads(n3) {
            let i1 = rank[t1 as usize] as usize;
            if i1 > i3 {
                // t3 -so-> ... -so-> t1 -wr-> t3
                let mut edges = so_chain(&committed, i3, i1);
                edges.push(WitnessEdge {
                    from: committed[i1],
                    to: t3,
                    label: EdgeLabel::Wr,
                });
                return Err(Violation::CoCycle(vec![CycleWitness::new(edges)]));
            }
            let t2 = latest.get(x.0).expect("writer precedes reader");
            if t2 != t1 {
                // t1 -so-> ... -so-> t2 -co-> t1
                let i2 = rank[t2 as usize] as usize;
                let mut edges = so_chain(&committed, i1, i2);
                edges.push(WitnessEdge {
                    from: committed[i2],
                    to: committed[i1],
                    label: EdgeLabel::CoInferred,
                });
                return Err(Violation::CoCycle(vec![CycleWitness::new(edges)]));
            }
        }
        for x in facts.keys_written(n3) {
            latest.insert(x.0, n3);
        }
    }
    Ok(committed)
}

fn so_chain(committed: &[TxnRef], from: usize, to: usize) -> Vec<WitnessEdge> {
    (from..to)
        .map(|i| WitnessEdge {
            from: committed[i],
            to: committed[i + 1],
            label: EdgeLabel::So,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{r, w, HistoryBuilder, TxnStatus};

    const C: TxnStatus = TxnStatus::Committed;

    #[test]
    fn non_repeatable_read_detected() {
        let mut b = HistoryBuilder::new();
        let s0 = b.add_session();
        let s1 = b.add_session();
        let t1 = b.txn(s0, 1, C, [w("x", 1)]);
        let t2 = b.txn(s0, 2, C, [w("x", 2)]);
        let t3 = b.txn(s1, 3, C, [r("x", 2), r("x", 1)]);
        let h = b.build().unwrap();
        assert_eq!(
            check_repeatable_reads(&h),
            Err(Violation::NonRepeatableRead {
                txn: t3,
                key: h.lookup_key("x").unwrap(),
                first_writer: t2,
                second_writer: t1,
            })
        );
    }

    #[test]
    fn same_writer_twice_is_repeatable() {
        let mut b = HistoryBuilder::new();
        let s0 = b.add_session();
        let s1 = b.add_session();
        b.txn(s0, 1, C, [w("x", 1)]);
        b.txn(s1, 2, C, [r("x", 1), r("x", 1)]);
        assert_eq!(check_repeatable_reads(&b.build().unwrap()), Ok(()));
    }

    #[test]
    fn one_session_intervening_write() {
        let mut b = HistoryBuilder::new();
        let s = b.add_session();
        b.txn(s, 1, C, [w("x", 1)]);
        b.txn(s, 2, C, [w("x", 2)]);
        b.txn(s, 3, C, [r("x", 1)]);
        let h = b.build().unwrap();
        let v = check_ra_one_session(&h, CheckOptions::default());
        let cycle = v.cycles().next().unwrap();
        assert_eq!(cycle.len(), 2);
        assert_eq!(cycle.non_sowr_edge_count, 1);
        assert!(!check_ra_with(&h, CheckOptions::default()).is_consistent());
    }

    #[test]
    fn one_session_consistent() {
        let mut b = HistoryBuilder::new();
        let s = b.add_session();
        let t1 = b.txn(s, 1, C, [w("x", 1)]);
        let t2 = b.txn(s, 2, C, [r("x", 1)]);
        let h = b.build().unwrap();
        assert_eq!(
            check_ra_one_session(&h, CheckOptions::default()),
            Verdict::Consistent(vec![t1, t2])
        );
    }

    #[test]
    fn one_session_reading_from_the_future() {
        let mut b = HistoryBuilder::new();
        let s = b.add_session();
        b.txn(s, 1, C, [r("x", 1)]);
        b.txn(s, 2, C, [w("x", 1)]);
        let h = b.build().unwrap();
        let v = check_ra_one_session(&h, CheckOptions::default());
        let c = v.cycles().next().unwrap();
        assert_eq!(c.non_sowr_edge_count, 0);
        assert!(c.is_valid_in(&CommitGraph::new(&h)));
    }
}
