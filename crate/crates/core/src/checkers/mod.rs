//! Saturation checkers for Read Committed, Read Atomic and Causal Consistency.
//!
//! Each checker starts from `co' = so ∪ wr`, adds the commit-order edges the
//! level's axiom forces, and accepts iff the result is acyclic, in which case
//! any linearization is a valid commit order.

mod cc;
mod ra;
mod rc;

use std::fmt;
use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::consistency::{check_with_info, info_committed, write_info, ReadViolation, TXN_MASK};
use crate::graph::{cycle_witnesses, linearize, CommitGraph, CycleWitness, NodeId};
use crate::model::{History, Key, OpId, TxnRef};

pub use cc::check_cc_with;
pub use ra::{check_ra_one_session, check_ra_with, check_repeatable_reads};
pub use rc::check_rc_with;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IsolationLevel {
    RC,
    RA,
    CC,
}

impl IsolationLevel {
    pub const ALL: [IsolationLevel; 3] = [IsolationLevel::RC, IsolationLevel::RA, IsolationLevel::CC];

    pub fn as_str(self) -> &'static str {
        match self {
            IsolationLevel::RC => "rc",
            IsolationLevel::RA => "ra",
            IsolationLevel::CC => "cc",
        }
    }

    /// True if every history satisfying `self` also satisfies `other`.
    pub fn implies(self, other: IsolationLevel) -> bool {
        self >= other
    }
}

impl fmt::Display for IsolationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IsolationLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rc" => Ok(IsolationLevel::RC),
            "ra" => Ok(IsolationLevel::RA),
            "cc" => Ok(IsolationLevel::CC),
            _ => Err(format!("unknown isolation level `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ReadConsistency(Vec<ReadViolation>),
    NonRepeatableRead {
        txn: TxnRef,
        key: Key,
        first_writer: TxnRef,
        second_writer: TxnRef,
    },
    CoCycle(Vec<CycleWitness>),
}

impl Violation {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Violation::ReadConsistency(_) => "read-consistency",
            Violation::NonRepeatableRead { .. } => "non-repeatable-read",
            Violation::CoCycle(_) => "co-cycle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A total order over the committed transactions witnessing consistency.
    Consistent(Vec<TxnRef>),
    /// Never empty. Holds more than one entry only when checking continued
    /// past read-consistency violations.
    Violation(Vec<Violation>),
}

impl Verdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Verdict::Consistent(_))
    }

    pub fn commit_order(&self) -> Option<&[TxnRef]> {
        match self {
            Verdict::Consistent(co) => Some(co),
            Verdict::Violation(_) => None,
        }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Consistent(_) => &[],
            Verdict::Violation(v) => v,
        }
    }

    pub fn cycles(&self) -> impl Iterator<Item = &CycleWitness> {
        self.violations().iter().flat_map(|v| match v {
            Violation::CoCycle(c) => c.as_slice(),
            _ => &[],
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Drop reads violating read consistency and keep checking the rest.
    pub continue_after_read_errors: bool,
}

pub fn check(h: &History, level: IsolationLevel) -> Verdict {
    check_with(h, level, CheckOptions::default())
}

pub fn check_with(h: &History, level: IsolationLevel, opts: CheckOptions) -> Verdict {
    match level {
        IsolationLevel::RC => check_rc_with(h, opts),
        IsolationLevel::RA if h.session_count() == 1 => check_ra_one_session(h, opts),
        IsolationLevel::RA => check_ra_with(h, opts),
        IsolationLevel::CC => check_cc_with(h, opts),
    }
}

pub fn check_rc(h: &History) -> Verdict {
    check_rc_with(h, CheckOptions::default())
}

pub fn check_ra(h: &History) -> Verdict {
    check_ra_with(h, CheckOptions::default())
}

pub fn check_cc(h: &History) -> Verdict {
    check_cc_with(h, CheckOptions::default())
}

/// The saturated graph `co'` a checker builds before its cycle check, or the
/// violations that stopped it earlier.
pub fn saturated_graph(h: &History, level: IsolationLevel) -> Result<CommitGraph, Vec<Violation>> {
    let opts = CheckOptions::default();
    let pre = Prepared::new(h, opts)?;
    match level {
        IsolationLevel::RC => Ok(rc::saturate(&pre)),
        IsolationLevel::RA => ra::saturate(&pre),
        IsolationLevel::CC => cc::saturate(&pre),
    }
    .map_err(|v| vec![v])
}

/// Read-consistency outcome plus the per-transaction data every checker uses.
pub(crate) struct Prepared<'h> {
    pub h: &'h History,
    pub facts: Facts,
    pub read_violations: Vec<ReadViolation>,
}

impl<'h> Prepared<'h> {
    pub fn new(h: &'h History, opts: CheckOptions) -> Result<Self, Vec<Violation>> {
        let info = write_info(h);
        let read_violations = check_with_info(h, &info);
        if !read_violations.is_empty() && !opts.continue_after_read_errors {
            return Err(vec![Violation::ReadConsistency(read_violations)]);
        }
        let dropped: FxHashSet<OpId> = read_violations.iter().map(|v| v.read).collect();
        Ok(Prepared {
            h,
            facts: Facts::new(h, &dropped, &info),
            read_violations,
        })
    }

    /// `so ∪ wr` restricted to the retained reads.
    pub fn base_graph(&self) -> CommitGraph {
        let mut g = CommitGraph::empty(self.h);
        g.add_so_edges(self.h);
        for t in self.h.committed_txns() {
            let n = g.node(t);
            let writers: Vec<TxnRef> = self
                .facts
                .ext_reads(n)
                .iter()
                .map(|&(w, _)| g.txn_ref(w))
                .collect();
            g.add_wr_edges(t, writers);
        }
        g
    }

    /// Combines earlier violations with the outcome of the graph phase.
    pub fn finish(self, outcome: Result<CommitGraph, Violation>) -> Verdict {
        let mut violations = Vec::new();
        if !self.read_violations.is_empty() {
            violations.push(Violation::ReadConsistency(self.read_violations));
        }
        match outcome {
            Err(v) => violations.push(v),
            Ok(g) => match linearize(&g) {
                Some(order) if violations.is_empty() => return Verdict::Consistent(order),
                Some(_) => {}
                None => violations.push(Violation::CoCycle(cycle_witnesses(&g))),
            },
        }
        Verdict::Violation(violations)
    }
}

// Sets at or below this size are probed by linear scan.
const SMALL_SET: usize = 16;

/// Per-transaction data indexed by graph node. Only committed transactions
/// have entries.
pub(crate) struct Facts {
    offsets: Vec<NodeId>,
    ext_start: Vec<u32>,
    // External reads in program order: (writer node, key).
    ext: Vec<(NodeId, Key)>,
    kw_start: Vec<u32>,
    // Keys written, sorted and deduplicated.
    kw: Vec<Key>,
    big_kw: FxHashMap<NodeId, FxHashSet<Key>>,
}

impl Facts {
    /// `info` comes from [`write_info`].
    fn new(h: &History, dropped: &FxHashSet<OpId>, info: &[u32]) -> Self {
        let n = h.txn_count();
        let mut f = Facts {
            offsets: Vec::with_capacity(h.session_count() + 1),
            ext_start: Vec::with_capacity(n + 1),
            ext: Vec::new(),
            kw_start: Vec::with_capacity(n + 1),
            kw: Vec::new(),
            big_kw: FxHashMap::default(),
        };
        let mut total = 0u32;
        for txns in h.sessions() {
            f.offsets.push(total);
            total += txns.len() as u32;
        }
        f.offsets.push(total);

        for (id, txn) in h.sessions().iter().flatten().enumerate() {
            let id = id as NodeId;
            f.ext_start.push(f.ext.len() as u32);
            f.kw_start.push(f.kw.len() as u32);
            if !txn.is_committed() {
                continue;
            }
            for op in &txn.ops {
                if op.is_write() {
                    f.kw.push(op.key);
                    continue;
                }
                if !dropped.is_empty() && dropped.contains(&op.id) {
                    continue;
                }
                let Some(src) = h.wr_source(op.id) else {
                    continue;
                };
                let w = info[src.index()];
                let writer = w & TXN_MASK;
                if writer != id && info_committed(w) {
                    f.ext.push((writer, op.key));
                }
            }
            let start = *f.kw_start.last().unwrap() as usize;
            let keys = &mut f.kw[start..];
            keys.sort_unstable();
            let mut len = 0;
            for i in 0..keys.len() {
                if i == 0 || keys[i] != keys[len - 1] {
                    keys[len] = keys[i];
                    len += 1;
                }
            }
            f.kw.truncate(start + len);
            if len > SMALL_SET {
                f.big_kw.insert(id, f.kw[start..].iter().copied().collect());
            }
        }
        f.ext_start.push(f.ext.len() as u32);
        f.kw_start.push(f.kw.len() as u32);
        f
    }

    pub fn node(&self, t: TxnRef) -> NodeId {
        self.offsets[t.session.index()] + t.position
    }

    pub fn txn_ref(&self, n: NodeId) -> TxnRef {
        let s = self.offsets.partition_point(|&o| o <= n) - 1;
        TxnRef::new(s as u32, n - self.offsets[s])
    }

    pub fn ext_reads(&self, n: NodeId) -> &[(NodeId, Key)] {
        let n = n as usize;
        &self.ext[self.ext_start[n] as usize..self.ext_start[n + 1] as usize]
    }

    pub fn keys_written(&self, n: NodeId) -> &[Key] {
        let n = n as usize;
        &self.kw[self.kw_start[n] as usize..self.kw_start[n + 1] as usize]
    }

    pub fn writes_key(&self, n: NodeId, key: Key) -> bool {
        match self.big_kw.get(&n) {
            Some(set) => set.contains(&key),
            None => self.keys_written(n).contains(&key),
        }
    }
}

/// Membership set over dense ids that clears in O(1) by bumping an epoch.
pub(crate) struct StampSet {
    stamp: Vec<u32>,
    epoch: u32,
    items: Vec<u32>,
}

impl StampSet {
    pub fn new(universe: usize) -> Self {
        StampSet {
            stamp: vec![0; universe],
            epoch: 1,
            items: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.epoch += 1;
        self.items.clear();
    }

    pub fn insert(&mut self, x: u32) -> bool {
        let s = &mut self.stamp[x as usize];
        if *s == self.epoch {
            return false;
        }
        *s = self.epoch;
        self.items.push(x);
        true
    }

    pub fn contains(&self, x: u32) -> bool {
        self.stamp[x as usize] == self.epoch
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}

/// Dense map whose entries from previous epochs read as absent.
pub(crate) struct StampMap<V: Copy> {
    slots: Vec<(u32, V)>,
    epoch: u32,
}

impl<V: Copy + Default> StampMap<V> {
    pub fn new(universe: usize) -> Self {
        StampMap {
            slots: vec![(0, V::default()); universe],
            epoch: 1,
        }
    }

    pub fn clear(&mut self) {
        self.epoch += 1;
    }

    pub fn get(&self, x: u32) -> Option<V> {
        let (e, v) = self.slots[x as usize];
        (e == self.epoch).then_some(v)
    }

    pub fn insert(&mut self, x: u32, v: V) {
        self.slots[x as usize] = (self.epoch, v);
    }
}
