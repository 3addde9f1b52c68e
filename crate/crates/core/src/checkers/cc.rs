use super::{CheckOptions, Prepared, Verdict, Violation};
use crate::graph::{compute_hb_graph, CommitGraph, NodeId};
use crate::model::{History, TxnRef};

pub fn check_cc_with(h: &History, opts: CheckOptions) -> Verdict {
    match Prepared::new(h, opts) {
        Err(v) => Verdict::Violation(v),
        Ok(pre) => {
            let g = saturate(&pre);
            pre.finish(g)
        }
    }
}

/// Committed writers of one key within one session, by position.
struct WriterRun {
    session: u32,
    positions: Vec<u32>,
}

/// For every read `t1 -wr_x-> t3` and every session, orders the so-latest
/// writer of `x` that happens before `t3` ahead of `t1`.
pub(crate) fn saturate(pre: &Prepared) -> Result<CommitGraph, Violation> {
    let h = pre.h;
    let facts = &pre.facts;
    let mut g = pre.base_graph();
    let hb = compute_hb_graph(&g).map_err(|c| Violation::CoCycle(vec![c]))?;

    let mut writers: Vec<Vec<WriterRun>> = (0..h.key_count()).map(|_| Vec::new()).collect();
    for t in h.committed_txns() {
        for x in facts.keys_written(facts.node(t)) {
            let runs = &mut writers[x.index()];
            match runs.last_mut() {
                Some(run) if run.session == t.session.0 => run.positions.push(t.position),
                _ => runs.push(WriterRun {
                    session: t.session.0,
                    positions: vec![t.position],
                }),
            }
        }
    }

    // One cursor per run; entries from an earlier session are stale and read as 0.
    let mut cursor_base = Vec::with_capacity(writers.len());
    let mut total = 0usize;
    for runs in &writers {
        cursor_base.push(total);
        total += runs.len();
    }
    let mut cursors: Vec<(u32, u32)> = vec![(u32::MAX, 0); total];

    // latest[t1 * k + s'] = position + 1 of the so-latest writer in s' that must
    // precede t1. Earlier writers of s' reach t1 through so, so one edge per
    // (t1, s') carries the whole inference.
    let k = h.session_count();
    let mut latest = vec![0u32; g.node_count() * k];

    for s in 0..k as u32 {
        for (p, txn) in h.sessions()[s as usize].iter().enumerate() {
            if !txn.is_committed() {
                continue;
            }
            let t3 = TxnRef::new(s, p as u32);
            let clock = hb.clock(t3);
            for &(t1, x) in facts.ext_reads(facts.node(t3)) {
                let row = t1 as usize * k;
                for (i, run) in writers[x.index()].iter().enumerate() {
                    let s2 = run.session as usize;
                    let bound = clock[s2];
                    if bound == 0 {
                        continue;
                    }
                    let slot = &mut cursors[cursor_base[x.index()] + i];
                    if slot.0 != s {
                        *slot = (s, 0);
                    }
                    let mut c = slot.1 as usize;
                    while c < run.positions.len() && run.positions[c] < bound {
                        c += 1;
                    }
                    slot.1 = c as u32;
                    if c == 0 {
                        continue;
                    }
                    let p2 = run.positions[c - 1] + 1;
                    let cell = &mut latest[row + s2];
                    *cell = (*cell).max(p2);
                }
            }
        }
    }
    // Edges from t1 itself or from a writer that already happens before t1
    // add nothing.
    for (t1, row) in latest.chunks_exact(k.max(1)).enumerate() {
        let t1_ref = facts.txn_ref(t1 as NodeId);
        let t1_clock = hb.clock(t1_ref);
        for (s2, &p2) in row.iter().enumerate() {
            if p2 > t1_clock[s2] && !(s2 as u32 == t1_ref.session.0 && p2 - 1 == t1_ref.position) {
                let t2 = facts.node(TxnRef::new(s2 as u32, p2 - 1));
                g.add_inferred_unique(t2, t1 as NodeId);
            }
        }
    }
    Ok(g)
}
