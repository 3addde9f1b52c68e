//! Per-read well-formedness axioms shared by every isolation level.

use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::model::{History, Key, OpId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReadViolationKind {
    /// No write with the read's key and value exists.
    ThinAir,
    /// The observed write belongs to an aborted transaction.
    AbortedRead,
    /// The observed write comes later in the reader's own transaction.
    FutureRead,
    /// The reader already wrote the key but observes another transaction.
    NotOwnWrite,
    /// The observed write was overwritten before the read could see it.
    NotLatestWrite,
}

impl fmt::Display for ReadViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReadViolationKind::ThinAir => "ThinAir",
            ReadViolationKind::AbortedRead => "AbortedRead",
            ReadViolationKind::FutureRead => "FutureRead",
            ReadViolationKind::NotOwnWrite => "NotOwnWrite",
            ReadViolationKind::NotLatestWrite => "NotLatestWrite",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReadViolation {
    pub read: OpId,
    pub kind: ReadViolationKind,
    /// The observed write, when there is one.
    pub culprit: Option<OpId>,
}

/// Every violating read of a committed transaction, in history order. A read
/// failing several axioms is reported once, under the first kind in
/// declaration order of [`ReadViolationKind`].
pub fn check_read_consistency(h: &History) -> Vec<ReadViolation> {
    check_with_info(h, &write_info(h))
}

pub(crate) fn check_with_info(h: &History, info: &[u32]) -> Vec<ReadViolation> {
    let mut out = Vec::new();
    let mut own: FxHashMap<Key, OpId> = FxHashMap::default();

    let mut txn_index = 0u32;
    for txns in h.sessions() {
        for txn in txns {
            let me = txn_index;
            txn_index += 1;
            if !txn.is_committed() {
                continue;
            }
            own.clear();
            for op in &txn.ops {
                if op.is_write() {
                    own.insert(op.key, op.id);
                    continue;
                }
                let mut report = |kind, culprit| {
                    out.push(ReadViolation {
                        read: op.id,
                        kind,
                        culprit,
                    })
                };
                let Some(src) = h.wr_source(op.id) else {
                    report(ReadViolationKind::ThinAir, None);
                    continue;
                };
                let w = info[src.index()];
                if w & COMMITTED == 0 {
                    report(ReadViolationKind::AbortedRead, Some(src));
                } else if w & TXN_MASK == me {
                    if src > op.id {
                        report(ReadViolationKind::FutureRead, Some(src));
                    } else if own.get(&op.key) != Some(&src) {
                        report(ReadViolationKind::NotLatestWrite, Some(src));
                    }
                } else if own.contains_key(&op.key) {
                    report(ReadViolationKind::NotOwnWrite, Some(src));
                } else if w & FINAL == 0 {
                    report(ReadViolationKind::NotLatestWrite, Some(src));
                }
            }
        }
    }
    out
}

const FINAL: u32 = 1 << 31;
const COMMITTED: u32 = 1 << 30;
pub(crate) const TXN_MASK: u32 = COMMITTED - 1;

pub(crate) fn info_committed(w: u32) -> bool {
    w & COMMITTED != 0
}

/// Indexed by OpId: the transaction's index in history order, whether it
/// committed, and whether the op is the last write to its key in it.
pub(crate) fn write_info(h: &History) -> Vec<u32> {
    assert!(h.txn_count() <= TXN_MASK as usize, "too many transactions");
    let mut info = vec![0u32; h.op_count()];
    let mut seen: FxHashSet<Key> = FxHashSet::default();
    let mut txn_index = 0u32;
    for txns in h.sessions() {
        for txn in txns {
            let base = txn_index | if txn.is_committed() { COMMITTED } else { 0 };
            txn_index += 1;
            seen.clear();
            for op in txn.ops.iter().rev() {
                let last = op.is_write() && seen.insert(op.key);
                info[op.id.index()] = base | if last { FINAL } else { 0 };
            }
        }
    }
    info
}
