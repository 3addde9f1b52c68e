//! Brute-force reference checker: searches every commit order compatible with
//! `so ∪ wr` and tests the level's axiom literally. Shares nothing with the
//! saturation checkers beyond read consistency.

use crate::checkers::IsolationLevel;
use crate::consistency::check_read_consistency;
use crate::model::{History, Key, OpId, TxnRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_committed_txns: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_committed_txns: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleOutcome {
    /// The first passing order in lexicographic search order.
    Consistent(Vec<TxnRef>),
    Violation,
}

impl OracleOutcome {
    pub fn is_consistent(&self) -> bool {
        matches!(self, OracleOutcome::Consistent(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{committed} committed transactions exceed the oracle budget of {budget}")]
pub struct BudgetExceeded {
    pub committed: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AxiomFailure {
    /// The order is not a permutation of the committed transactions.
    NotTotal,
    /// `earlier` must precede `later` by session order or write-read.
    Order {
        earlier: TxnRef,
        later: TxnRef,
        relation: &'static str,
    },
    /// `t2` writes `key` and is visible to `t3`, which reads `key` from `t1`
    /// via `read_x`, yet `t1` is not ordered after `t2`. For read committed,
    /// `read` is the earlier read of `t3` that observed `t2`.
    Instance {
        key: Key,
        t1: TxnRef,
        t2: TxnRef,
        t3: TxnRef,
        read: Option<OpId>,
        read_x: OpId,
    },
}

pub fn oracle_check(
    h: &History,
    level: IsolationLevel,
    budget: OracleBudget,
) -> Result<OracleOutcome, BudgetExceeded> {
    let committed: Vec<TxnRef> = h.committed_txns().collect();
    if committed.len() > budget.max_committed_txns {
        return Err(BudgetExceeded {
            committed: committed.len(),
            budget: budget.max_committed_txns,
        });
    }
    if !check_read_consistency(h).is_empty() {
        return Ok(OracleOutcome::Violation);
    }

    let m = committed.len();
    let idx = |t: TxnRef| committed.iter().position(|&c| c == t);
    // preds[i]: bitmask of transactions that must come before i.
    let mut preds = vec![0u32; m];
    for (i, &t) in committed.iter().enumerate() {
        for (j, &u) in committed.iter().enumerate() {
            if u.session == t.session && u.position < t.position {
                preds[i] |= 1 << j;
            }
        }
        for r in h.txn(t).reads() {
            let Some(w) = h.wr_source(r.id) else { continue };
            if let Some(j) = idx(h.txn_of(w)).filter(|&j| j != i) {
                preds[i] |= 1 << j;
            }
        }
    }

    let mut order = Vec::with_capacity(m);
    let found = search(h, level, &committed, &preds, 0, &mut order);
    Ok(match found {
        Some(co) => OracleOutcome::Consistent(co),
        None => OracleOutcome::Violation,
    })
}

fn search(
    h: &History,
    level: IsolationLevel,
    committed: &[TxnRef],
    preds: &[u32],
    placed: u32,
    order: &mut Vec<TxnRef>,
) -> Option<Vec<TxnRef>> {
    if order.len() == committed.len() {
        return axiom_holds(h, level, order).is_ok().then(|| order.clone());
    }
    for i in 0..committed.len() {
        if placed & (1 << i) != 0 || preds[i] & !placed != 0 {
            continue;
        }
        order.push(committed[i]);
        let found = search(h, level, committed, preds, placed | (1 << i), order);
        order.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Checks `co` against the level's axiom, quantifying over every instance.
pub fn axiom_holds(h: &History, level: IsolationLevel, co: &[TxnRef]) -> Result<(), AxiomFailure> {
    let committed: Vec<TxnRef> = h.committed_txns().collect();
    let mut sorted = co.to_vec();
    sorted.sort();
    if sorted != committed {
        return Err(AxiomFailure::NotTotal);
    }
    let pos = |t: TxnRef| co.iter().position(|&c| c == t).expect("committed");
    let is_committed = |t: TxnRef| h.txn(t).is_committed();
    let writes = |t: TxnRef, x: Key| h.txn(t).ops.iter().any(|o| o.is_write() && o.key == x);
    // Writer transaction of a read, when it is another committed transaction.
    let wr_txn = |t: TxnRef, r: OpId| {
        let w = h.txn_of(h.wr_source(r)?);
        (w != t && is_committed(w)).then_some(w)
    };

    for &a in &committed {
        for &b in &committed {
            if a.session == b.session && a.position < b.position && pos(a) > pos(b) {
                return Err(AxiomFailure::Order {
                    earlier: a,
                    later: b,
                    relation: "so",
                });
            }
        }
    }
    for &t in &committed {
        for r in h.txn(t).reads() {
            if let Some(w) = wr_txn(t, r.id) {
                if pos(w) > pos(t) {
                    return Err(AxiomFailure::Order {
                        earlier: w,
                        later: t,
                        relation: "wr",
                    });
                }
            }
        }
    }

    // visible[i][j]: committed[j] is related to committed[i] by the level's
    // premise relation (so ∪ wr, or its transitive closure).
    let m = committed.len();
    let ix = |t: TxnRef| committed.iter().position(|&c| c == t).expect("committed");
    let mut visible = vec![vec![false; m]; m];
    if level != IsolationLevel::RC {
        for (i, &t) in committed.iter().enumerate() {
            for (j, &u) in committed.iter().enumerate() {
                if u.session == t.session && u.position < t.position {
                    visible[i][j] = true;
                }
            }
            for r in h.txn(t).reads() {
                if let Some(w) = wr_txn(t, r.id) {
                    visible[i][ix(w)] = true;
                }
            }
        }
        if level == IsolationLevel::CC {
            for k in 0..m {
                for i in 0..m {
                    if !visible[i][k] {
                        continue;
                    }
                    for j in 0..m {
                        if visible[k][j] {
                            visible[i][j] = true;
                        }
                    }
                }
            }
        }
    }

    for &t3 in &committed {
        let ops = &h.txn(t3).ops;
        for (px, rx) in ops.iter().enumerate() {
            if !rx.is_read() {
                continue;
            }
            let Some(t1) = wr_txn(t3, rx.id) else { continue };
            let x = rx.key;
            if level == IsolationLevel::RC {
                for r in ops[..px].iter().filter(|o| o.is_read()) {
                    let Some(t2) = wr_txn(t3, r.id) else { continue };
                    if t2 != t1 && writes(t2, x) && pos(t2) > pos(t1) {
                        return Err(AxiomFailure::Instance {
                            key: x,
                            t1,
                            t2,
                            t3,
                            read: Some(r.id),
                            read_x: rx.id,
                        });
                    }
                }
            } else {
                let i3 = ix(t3);
                for &t2 in &committed {
                    if t2 != t1 && visible[i3][ix(t2)] && writes(t2, x) && pos(t2) > pos(t1) {
                        return Err(AxiomFailure::Instance {
                            key: x,
                            t1,
                            t2,
                            t3,
                            read: None,
                            read_x: rx.id,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
