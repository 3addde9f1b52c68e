//! Histories whose consistency is equivalent to triangle-freeness of a graph.
//!
//! Node `a` contributes a write transaction `W_a` and a read transaction
//! `R_a`. Every write of `W_a` carries value `a`, so `R_b` reading `(x, a)`
//! observes `W_a`. Read transactions of isolated nodes would be empty and are
//! left out.

use super::UndirectedGraph;
use crate::model::{History, HistoryBuilder, OpKind, TxnStatus};

/// Key `x_a`.
pub fn node_key(a: u32) -> u64 {
    a as u64
}

/// Key `x_a^b`, disjoint from every `x_c`.
pub fn inner_key(n: u32, a: u32, b: u32) -> u64 {
    n as u64 + a as u64 * n as u64 + b as u64
}

type Ops = Vec<(OpKind, u64, u64)>;

struct Layout {
    writers: Vec<Ops>,
    readers: Vec<Ops>,
}

fn layout(g: &UndirectedGraph, with_inner: bool) -> Layout {
    let n = g.node_count();
    let adj = g.adjacency();
    let mut writers = Vec::with_capacity(n as usize);
    let mut readers = Vec::with_capacity(n as usize);
    for a in 0..n {
        let nbrs = &adj[a as usize];
        let mut w: Ops = Vec::new();
        for &b in nbrs {
            w.push((OpKind::Write, node_key(b), a as u64));
            if with_inner {
                w.push((OpKind::Write, inner_key(n, a, b), a as u64));
            }
        }
        w.push((OpKind::Write, node_key(a), a as u64));
        writers.push(w);

        let mut r: Ops = Vec::new();
        if with_inner {
            r.extend(nbrs.iter().map(|&b| (OpKind::Read, inner_key(n, b, a), b as u64)));
        }
        r.extend(nbrs.iter().map(|&b| (OpKind::Read, node_key(b), b as u64)));
        readers.push(r);
    }
    Layout { writers, readers }
}

fn writer_id(a: u32) -> u64 {
    2 * a as u64
}

fn reader_id(a: u32) -> u64 {
    2 * a as u64 + 1
}

/// Every transaction in its own session.
pub fn gen_range_reduction(g: &UndirectedGraph) -> History {
    let l = layout(g, true);
    let mut b = HistoryBuilder::new();
    for (a, ops) in l.writers.into_iter().enumerate() {
        let s = b.add_session();
        b.txn(s, writer_id(a as u32), TxnStatus::Committed, ops);
    }
    for (a, ops) in l.readers.into_iter().enumerate() {
        if ops.is_empty() {
            continue;
        }
        let s = b.add_session();
        b.txn(s, reader_id(a as u32), TxnStatus::Committed, ops);
    }
    b.build().expect("reduction histories are well-formed")
}

/// Writers on one session and readers on another, without the `x_a^b` keys.
pub fn gen_ra_reduction(g: &UndirectedGraph) -> History {
    let l = layout(g, false);
    two_part(l, true)
}

/// The range-reduction transactions on a single session: writers, then readers.
pub fn gen_rc_reduction(g: &UndirectedGraph) -> History {
    let l = layout(g, true);
    two_part(l, false)
}

fn two_part(l: Layout, split: bool) -> History {
    let mut b = HistoryBuilder::new();
    let sw = b.add_session();
    for (a, ops) in l.writers.into_iter().enumerate() {
        b.txn(sw, writer_id(a as u32), TxnStatus::Committed, ops);
    }
    let readers: Vec<_> = l
        .readers
        .into_iter()
        .enumerate()
        .filter(|(_, ops)| !ops.is_empty())
        .collect();
    if readers.is_empty() {
        return b.build().expect("reduction histories are well-formed");
    }
    let sr = if split { b.add_session() } else { sw };
    for (a, ops) in readers {
        b.txn(sr, reader_id(a as u32), TxnStatus::Committed, ops);
    }
    b.build().expect("reduction histories are well-formed")
}
