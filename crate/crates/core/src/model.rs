//! History data model: sessions of transactions, operations, and the
//! write-read relation inferred from unique written values.

use std::collections::BTreeSet;
use std::fmt;

use rustc_hash::FxHashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpId(pub u32);

impl OpId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Interned key. Ids are dense and assigned in order of first appearance in
/// the history; the original spelling is kept in the history's key table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key(pub u32);

impl Key {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub type Value = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub id: OpId,
    pub kind: OpKind,
    pub key: Key,
    pub value: Value,
}

impl Operation {
    pub fn is_read(&self) -> bool {
        self.kind == OpKind::Read
    }

    pub fn is_write(&self) -> bool {
        self.kind == OpKind::Write
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TxnStatus {
    Committed,
    Aborted,
}

/// Transaction identifier as it appears in the input file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxnId(pub u64);

impl fmt::Display for TxnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub id: TxnId,
    /// Operations in program order.
    pub ops: Vec<Operation>,
    pub status: TxnStatus,
}

impl Transaction {
    pub fn is_committed(&self) -> bool {
        self.status == TxnStatus::Committed
    }

    pub fn reads(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|o| o.is_read())
    }

    pub fn writes(&self) -> impl Iterator<Item = &Operation> {
        self.ops.iter().filter(|o| o.is_write())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u32);

impl SessionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Canonical transaction handle. Two refs in the same session compare by
/// session order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxnRef {
    pub session: SessionId,
    pub position: u32,
}

impl TxnRef {
    pub fn new(session: u32, position: u32) -> Self {
        TxnRef {
            session: SessionId(session),
            position,
        }
    }

    /// `Some(true)` if `self` is session-ordered before `other`, `None` when
    /// the two belong to different sessions.
    pub fn so_before(self, other: TxnRef) -> Option<bool> {
        (self.session == other.session).then_some(self.position < other.position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OpLocation {
    pub txn: TxnRef,
    /// Index in the transaction's program order.
    pub po: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct History {
    sessions: Vec<Vec<Transaction>>,
    key_names: Vec<String>,
    locations: Vec<OpLocation>,
    // Indexed by OpId; set only for reads that have a matching write.
    wr: Vec<Option<OpId>>,
}

impl History {
    pub fn empty() -> Self {
        History::default()
    }

    pub fn sessions(&self) -> &[Vec<Transaction>] {
        &self.sessions
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn session(&self, s: SessionId) -> &[Transaction] {
        &self.sessions[s.index()]
    }

    pub fn txn(&self, t: TxnRef) -> &Transaction {
        &self.sessions[t.session.index()][t.position as usize]
    }

    pub fn txn_count(&self) -> usize {
        self.sessions.iter().map(Vec::len).sum()
    }

    pub fn op_count(&self) -> usize {
        self.locations.len()
    }

    pub fn key_count(&self) -> usize {
        self.key_names.len()
    }

    pub fn key_name(&self, key: Key) -> &str {
        &self.key_names[key.index()]
    }

    pub fn key_names(&self) -> &[String] {
        &self.key_names
    }

    pub fn lookup_key(&self, name: &str) -> Option<Key> {
        self.key_names
            .iter()
            .position(|k| k == name)
            .map(|i| Key(i as u32))
    }

    pub fn location(&self, op: OpId) -> OpLocation {
        self.locations[op.index()]
    }

    pub fn op(&self, op: OpId) -> &Operation {
        let loc = self.location(op);
        &self.txn(loc.txn).ops[loc.po as usize]
    }

    pub fn txn_of(&self, op: OpId) -> TxnRef {
        self.location(op).txn
    }

    /// The write a read observes, if any write carries the read's key and value.
    pub fn wr_source(&self, read: OpId) -> Option<OpId> {
        self.wr.get(read.index()).copied().flatten()
    }

    pub fn all_txns(&self) -> impl Iterator<Item = TxnRef> + '_ {
        self.sessions.iter().enumerate().flat_map(|(s, txns)| {
            (0..txns.len()).map(move |p| TxnRef::new(s as u32, p as u32))
        })
    }

    /// Committed transactions, session by session in session order.
    pub fn committed_txns(&self) -> impl Iterator<Item = TxnRef> + '_ {
        self.all_txns().filter(|&t| self.txn(t).is_committed())
    }

    pub fn find_txn(&self, id: TxnId) -> Option<TxnRef> {
        self.all_txns().find(|&t| self.txn(t).id == id)
    }

    /// Reads of `t` observing a write of a different transaction, in program
    /// order, paired with the writing transaction.
    pub fn txn_wr_edges(&self, t: TxnRef) -> Vec<(TxnRef, Key)> {
        self.txn(t)
            .reads()
            .filter_map(|r| {
                let writer = self.txn_of(self.wr_source(r.id)?);
                (writer != t).then_some((writer, r.key))
            })
            .collect()
    }

    pub fn keys_written(&self, t: TxnRef) -> BTreeSet<Key> {
        self.txn(t).writes().map(|w| w.key).collect()
    }

    pub fn keys_read(&self, t: TxnRef) -> BTreeSet<Key> {
        self.txn(t).reads().map(|r| r.key).collect()
    }

    pub fn stats(&self) -> HistoryStats {
        let sizes: Vec<usize> = self.all_txns().map(|t| self.txn(t).ops.len()).collect();
        let committed = self.committed_txns().count();
        HistoryStats {
            ops: self.op_count(),
            sessions: self.session_count(),
            committed,
            aborted: self.txn_count() - committed,
            keys: self.key_count(),
            ops_per_txn: OpsDistribution::from_sizes(sizes),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStats {
    pub ops: usize,
    pub sessions: usize,
    pub committed: usize,
    pub aborted: usize,
    pub keys: usize,
    pub ops_per_txn: OpsDistribution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpsDistribution {
    pub min: usize,
    pub median: usize,
    pub max: usize,
    pub mean: f64,
}

impl OpsDistribution {
    fn from_sizes(mut sizes: Vec<usize>) -> Self {
        if sizes.is_empty() {
            return OpsDistribution {
                min: 0,
                median: 0,
                max: 0,
                mean: 0.0,
            };
        }
        sizes.sort_unstable();
        let total: usize = sizes.iter().sum();
        OpsDistribution {
            min: sizes[0],
            median: sizes[sizes.len() / 2],
            max: sizes[sizes.len() - 1],
            mean: total as f64 / sizes.len() as f64,
        }
    }
}

impl fmt::Display for HistoryStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ops {}", self.ops)?;
        writeln!(f, "sessions {}", self.sessions)?;
        writeln!(f, "committed {}", self.committed)?;
        writeln!(f, "aborted {}", self.aborted)?;
        writeln!(f, "keys {}", self.keys)?;
        let d = &self.ops_per_txn;
        writeln!(
            f,
            "ops_per_txn min={} median={} max={} mean={:.2}",
            d.min, d.median, d.max, d.mean
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildErrorKind {
    DuplicateWrite,
    DuplicateTxnId,
    EmptyTransaction,
}

/// Structural problem found while assembling a history. `line` is the source
/// line attached to the offending item, or 0 for programmatic construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildError {
    pub kind: BuildErrorKind,
    pub line: u32,
}

#[derive(Clone, Copy, Debug)]
struct DraftOp {
    kind: OpKind,
    // Provisional key id; remapped to first-appearance order on build.
    key: u32,
    value: Value,
    line: u32,
}

#[derive(Clone, Debug)]
struct DraftTxn {
    id: u64,
    status: TxnStatus,
    ops: Vec<DraftOp>,
    line: u32,
}

/// Incremental history construction. Transactions may be appended to any
/// session in any order; keys are re-interned in file order on `build`.
#[derive(Clone, Debug, Default)]
pub struct HistoryBuilder {
    sessions: Vec<Vec<DraftTxn>>,
    key_ids: FxHashMap<String, u32>,
    key_names: Vec<String>,
}

impl HistoryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_session(&mut self) -> SessionId {
        self.sessions.push(Vec::new());
        SessionId(self.sessions.len() as u32 - 1)
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Appends an empty transaction to `session` and returns its handle.
    pub fn begin_txn(&mut self, session: SessionId, id: u64, status: TxnStatus) -> TxnRef {
        self.begin_txn_at(session, id, status, 0)
    }

    pub(crate) fn begin_txn_at(
        &mut self,
        session: SessionId,
        id: u64,
        status: TxnStatus,
        line: u32,
    ) -> TxnRef {
        let txns = &mut self.sessions[session.index()];
        txns.push(DraftTxn {
            id,
            status,
            ops: Vec::new(),
            line,
        });
        TxnRef {
            session,
            position: txns.len() as u32 - 1,
        }
    }

    pub fn read(&mut self, t: TxnRef, key: impl fmt::Display, value: Value) -> &mut Self {
        self.push_op(t, OpKind::Read, &key.to_string(), value, 0);
        self
    }

    pub fn write(&mut self, t: TxnRef, key: impl fmt::Display, value: Value) -> &mut Self {
        self.push_op(t, OpKind::Write, &key.to_string(), value, 0);
        self
    }

    pub(crate) fn push_op(&mut self, t: TxnRef, kind: OpKind, key: &str, value: Value, line: u32) {
        let key = match self.key_ids.get(key) {
            Some(&k) => k,
            None => {
                let k = self.key_names.len() as u32;
                self.key_ids.insert(key.to_owned(), k);
                self.key_names.push(key.to_owned());
                k
            }
        };
        self.sessions[t.session.index()][t.position as usize]
            .ops
            .push(DraftOp {
                kind,
                key,
                value,
                line,
            });
    }

    /// Convenience for tests and fixtures: appends a whole transaction.
    pub fn txn<K: fmt::Display>(
        &mut self,
        session: SessionId,
        id: u64,
        status: TxnStatus,
        ops: impl IntoIterator<Item = (OpKind, K, Value)>,
    ) -> TxnRef {
        let t = self.begin_txn(session, id, status);
        for (kind, key, value) in ops {
            self.push_op(t, kind, &key.to_string(), value, 0);
        }
        t
    }

    pub fn build(self) -> Result<History, BuildError> {
        let mut seen_ids = FxHashMap::default();
        let mut remap = vec![u32::MAX; self.key_names.len()];
        let mut key_names = Vec::with_capacity(self.key_names.len());
        let mut sessions = Vec::with_capacity(self.sessions.len());
        let mut locations = Vec::new();
        let mut writes: FxHashMap<(Key, Value), OpId> = FxHashMap::default();

        for (s, drafts) in self.sessions.into_iter().enumerate() {
            let mut txns = Vec::with_capacity(drafts.len());
            for (p, draft) in drafts.into_iter().enumerate() {
                if seen_ids.insert(draft.id, ()).is_some() {
                    return Err(BuildError {
                        kind: BuildErrorKind::DuplicateTxnId,
                        line: draft.line,
                    });
                }
                if draft.ops.is_empty() {
                    return Err(BuildError {
                        kind: BuildErrorKind::EmptyTransaction,
                        line: draft.line,
                    });
                }
                let txn_ref = TxnRef::new(s as u32, p as u32);
                let mut ops = Vec::with_capacity(draft.ops.len());
                for (po, op) in draft.ops.into_iter().enumerate() {
                    let slot = &mut remap[op.key as usize];
                    if *slot == u32::MAX {
                        *slot = key_names.len() as u32;
                        key_names.push(self.key_names[op.key as usize].clone());
                    }
                    let id = OpId(locations.len() as u32);
                    let key = Key(*slot);
                    if op.kind == OpKind::Write && writes.insert((key, op.value), id).is_some() {
                        return Err(BuildError {
                            kind: BuildErrorKind::DuplicateWrite,
                            line: op.line,
                        });
                    }
                    locations.push(OpLocation {
                        txn: txn_ref,
                        po: po as u32,
                    });
                    ops.push(Operation {
                        id,
                        kind: op.kind,
                        key,
                        value: op.value,
                    });
                }
                txns.push(Transaction {
                    id: TxnId(draft.id),
                    ops,
                    status: draft.status,
                });
            }
            sessions.push(txns);
        }

        let mut wr = vec![None; locations.len()];
        for txn in sessions.iter().flatten() {
            for r in txn.reads() {
                wr[r.id.index()] = writes.get(&(r.key, r.value)).copied();
            }
        }

        Ok(History {
            sessions,
            key_names,
            locations,
            wr,
        })
    }
}

/// Shorthand for fixture construction: `(OpKind::Read, key, value)`.
pub fn r<K>(key: K, value: Value) -> (OpKind, K, Value) {
    (OpKind::Read, key, value)
}

/// Shorthand for fixture construction: `(OpKind::Write, key, value)`.
pub fn w<K>(key: K, value: Value) -> (OpKind, K, Value) {
    (OpKind::Write, key, value)
}
