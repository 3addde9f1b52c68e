//! Seeded random histories.
//!
//! [`gen_random`] simulates a causally consistent store: every session keeps a
//! vector clock of what it has seen, transactions occasionally merge the clock
//! of a transaction from another session, and every read returns the most
//! recently generated visible write. Committing in generation order therefore
//! witnesses causal consistency. Anomalies are appended afterwards.
//!
//! [`gen_unconstrained`] draws reads from arbitrary writers and is meant to
//! produce a mix of consistent and inconsistent small histories.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{History, HistoryBuilder, OpKind, SessionId, TxnStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anomaly {
    ThinAir,
    AbortedRead,
    FutureRead,
    FracturedRead,
    CausalityViolation,
}

impl Anomaly {
    pub const ALL: [Anomaly; 5] = [
        Anomaly::ThinAir,
        Anomaly::AbortedRead,
        Anomaly::FutureRead,
        Anomaly::FracturedRead,
        Anomaly::CausalityViolation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Anomaly::ThinAir => "thin-air",
            Anomaly::AbortedRead => "aborted-read",
            Anomaly::FutureRead => "future-read",
            Anomaly::FracturedRead => "fractured-read",
            Anomaly::CausalityViolation => "causality-violation",
        }
    }
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Anomaly {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Anomaly::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown anomaly `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub sessions: u32,
    /// Base transaction count, including the initial transaction that writes
    /// every key. Injected anomalies add transactions on top.
    pub txns: u32,
    pub ops_min: u32,
    pub ops_max: u32,
    pub keys: u32,
    pub read_fraction: f64,
    /// Probability that a transaction first merges the view of a transaction
    /// from another session.
    pub sync_probability: f64,
    pub inject: BTreeSet<Anomaly>,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            seed: 0,
            sessions: 4,
            txns: 32,
            ops_min: 1,
            ops_max: 6,
            keys: 8,
            read_fraction: 0.5,
            sync_probability: 0.5,
            inject: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("need at least one session and one key")]
    Empty,
    #[error("operation range {0}..={1} is empty or admits empty transactions")]
    OpsRange(u32, u32),
    #[error("probability {0} outside [0, 1]")]
    Probability(String),
    #[error("anomaly {0} needs at least {1} base transactions")]
    TooSmall(Anomaly, u32),
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub history: History,
    /// One line per injected anomaly.
    pub planted: Vec<String>,
}

#[derive(Clone, Debug)]
struct DraftTxn {
    id: u64,
    status: TxnStatus,
    ops: Vec<(OpKind, u32, u64)>,
}

struct Sink {
    sessions: Vec<Vec<DraftTxn>>,
    next_value: u64,
    next_id: u64,
}

impl Sink {
    fn new(sessions: u32) -> Self {
        Sink {
            sessions: vec![Vec::new(); sessions as usize],
            next_value: 1,
            next_id: 1,
        }
    }

    fn value(&mut self) -> u64 {
        self.next_value += 1;
        self.next_value - 1
    }

    fn push(&mut self, s: usize, status: TxnStatus, ops: Vec<(OpKind, u32, u64)>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.sessions[s].push(DraftTxn { id, status, ops });
        id
    }

    fn finish(self) -> History {
        let mut b = HistoryBuilder::new();
        let ids: Vec<SessionId> = self.sessions.iter().map(|_| b.add_session()).collect();
        for (s, txns) in self.sessions.into_iter().enumerate() {
            for t in txns {
                b.txn(ids[s], t.id, t.status, t.ops);
            }
        }
        b.build().expect("generated values are unique")
    }
}

fn check_probability(p: f64) -> Result<(), GenError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GenError::Probability(p.to_string()))
    }
}

pub fn gen_random(spec: &RandomSpec) -> Result<Generated, GenError> {
    if spec.sessions == 0 || spec.keys == 0 {
        return Err(GenError::Empty);
    }
    if spec.ops_min == 0 || spec.ops_min > spec.ops_max {
        return Err(GenError::OpsRange(spec.ops_min, spec.ops_max));
    }
    check_probability(spec.read_fraction)?;
    check_probability(spec.sync_probability)?;
    for &a in &spec.inject {
        if spec.txns == 0 {
            return Err(GenError::TooSmall(a, 1));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.sessions as usize;
    let keys = spec.keys as usize;
    let mut sink = Sink::new(spec.sessions);

    // Clock of each generated transaction per session: entry s' counts the
    // visible transactions of s'. Includes the transaction itself.
    let mut clocks: Vec<Vec<Vec<u32>>> = vec![Vec::new(); k];
    // Per key, per session: (position, generation index, final value) of writers.
    let mut writers: Vec<Vec<Vec<(u32, u64, u64)>>> = vec![vec![Vec::new(); k]; keys];
    let mut generation = 0u64;

    for i in 0..spec.txns {
        let s = if i == 0 { 0 } else { rng.gen_range(0..k) };
        let pos = sink.sessions[s].len() as u32;
        // Every session starts out having seen the initial transaction.
        let mut view = clocks[s]
            .last()
            .or(clocks[0].first())
            .cloned()
            .unwrap_or_else(|| vec![0; k]);
        if k > 1 && rng.gen_bool(spec.sync_probability) {
            let other = (s + rng.gen_range(1..k)) % k;
            let len = clocks[other].len();
            if len > 0 {
                // Bias towards recent transactions of the other session.
                let back = rng.gen_range(0..len.min(4));
                let c = &clocks[other][len - 1 - back];
                for (v, &o) in view.iter_mut().zip(c) {
                    *v = (*v).max(o);
                }
            }
        }

        let mut ops = Vec::new();
        let mut own: Vec<Option<u64>> = vec![None; keys];
        if i == 0 {
            for x in 0..keys {
                let v = sink.value();
                ops.push((OpKind::Write, x as u32, v));
                own[x] = Some(v);
            }
        } else {
            let n_ops = rng.gen_range(spec.ops_min..=spec.ops_max);
            for _ in 0..n_ops {
                let x = rng.gen_range(0..keys);
                if rng.gen_bool(spec.read_fraction) {
                    let v = match own[x] {
                        Some(v) => v,
                        None => latest_visible(&writers[x], &view).expect("initial transaction is visible"),
                    };
                    ops.push((OpKind::Read, x as u32, v));
                } else {
                    let v = sink.value();
                    ops.push((OpKind::Write, x as u32, v));
                    own[x] = Some(v);
                }
            }
        }

        for (x, v) in own.iter().enumerate() {
            if let Some(v) = *v {
                writers[x][s].push((pos, generation, v));
            }
        }
        generation += 1;
        view[s] = pos + 1;
        clocks[s].push(view);
        sink.push(s, TxnStatus::Committed, ops);
    }

    let mut planted = Vec::new();
    for &a in &spec.inject {
        planted.push(inject(a, &mut sink, &mut rng, spec));
    }
    Ok(Generated {
        history: sink.finish(),
        planted,
    })
}

fn latest_visible(per_session: &[Vec<(u32, u64, u64)>], view: &[u32]) -> Option<u64> {
    per_session
        .iter()
        .zip(view)
        .filter_map(|(ws, &bound)| {
            let visible = ws.partition_point(|w| w.0 < bound);
            visible.checked_sub(1).map(|i| ws[i])
        })
        .max_by_key(|w| w.1)
        .map(|w| w.2)
}

fn distinct_sessions(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..k).collect();
    all.shuffle(rng);
    (0..n).map(|i| all[i % k]).collect()
}

fn inject(a: Anomaly, sink: &mut Sink, rng: &mut ChaCha8Rng, spec: &RandomSpec) -> String {
    use OpKind::{Read, Write};
    let k = spec.sessions as usize;
    let x = rng.gen_range(0..spec.keys);
    let y = (x + 1) % spec.keys;
    let line = match a {
        Anomaly::ThinAir => {
            let s = rng.gen_range(0..k);
            let v = sink.value();
            let t = sink.push(s, TxnStatus::Committed, vec![(Read, x, v)]);
            format!("txn={t} key={x} value={v}")
        }
        Anomaly::AbortedRead => {
            let ss = distinct_sessions(rng, k, 2);
            let v = sink.value();
            let w = sink.push(ss[0], TxnStatus::Aborted, vec![(Write, x, v)]);
            let t = sink.push(ss[1], TxnStatus::Committed, vec![(Read, x, v)]);
            format!("txn={t} writer={w} key={x} value={v}")
        }
        Anomaly::FutureRead => {
            let s = rng.gen_range(0..k);
            let v = sink.value();
            let t = sink.push(s, TxnStatus::Committed, vec![(Read, x, v), (Write, x, v)]);
            format!("txn={t} key={x} value={v}")
        }
        Anomaly::FracturedRead => {
            // p writes x; q writes x and y; r reads x from p and y from q.
            let ss = distinct_sessions(rng, k, 2);
            let (v1, v2, v3) = (sink.value(), sink.value(), sink.value());
            let p = sink.push(ss[0], TxnStatus::Committed, vec![(Write, x, v1)]);
            let q = sink.push(ss[0], TxnStatus::Committed, vec![(Write, x, v2), (Write, y, v3)]);
            let r = sink.push(ss[1], TxnStatus::Committed, vec![(Read, x, v1), (Read, y, v3)]);
            format!("txn={r} observes y from {q} and x from {p}")
        }
        Anomaly::CausalityViolation => {
            // p, q write x; m reads q and writes y; r reads m and then p.
            let ss = distinct_sessions(rng, k, 3);
            let (v1, v2, v3) = (sink.value(), sink.value(), sink.value());
            let p = sink.push(ss[0], TxnStatus::Committed, vec![(Write, x, v1)]);
            let q = sink.push(ss[0], TxnStatus::Committed, vec![(Write, x, v2)]);
            let m = sink.push(ss[1], TxnStatus::Committed, vec![(Read, x, v2), (Write, y, v3)]);
            let r = sink.push(ss[2], TxnStatus::Committed, vec![(Read, y, v3), (Read, x, v1)]);
            format!("txn={r} observes {m} after {q} but reads x from {p}")
        }
    };
    format!("planted {a} {line}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedSpec {
    pub seed: u64,
    pub sessions: u32,
    pub txns: u32,
    pub ops_min: u32,
    pub ops_max: u32,
    pub keys: u32,
    pub read_fraction: f64,
    /// Probability that a transaction is aborted.
    pub abort_probability: f64,
    /// Probability that a read observes something no well-behaved store
    /// would return (a fresh value or an overwritten one).
    pub glitch_probability: f64,
}

impl Default for UnconstrainedSpec {
    fn default() -> Self {
        UnconstrainedSpec {
            seed: 0,
            sessions: 3,
            txns: 6,
            ops_min: 1,
            ops_max: 4,
            keys: 3,
            read_fraction: 0.5,
            abort_probability: 0.05,
            glitch_probability: 0.03,
        }
    }
}

/// Reads observe writes of arbitrary transactions, earlier or later in any
/// session, so every verdict is reachable.
pub fn gen_unconstrained(spec: &UnconstrainedSpec) -> Result<History, GenError> {
    if spec.sessions == 0 || spec.keys == 0 {
        return Err(GenError::Empty);
    }
    if spec.ops_min == 0 || spec.ops_min > spec.ops_max {
        return Err(GenError::OpsRange(spec.ops_min, spec.ops_max));
    }
    for p in [spec.read_fraction, spec.abort_probability, spec.glitch_probability] {
        check_probability(p)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sink = Sink::new(spec.sessions);

    // Skeleton first: writes get values, reads get a key only.
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for _ in 0..spec.txns {
        let s = rng.gen_range(0..spec.sessions as usize);
        let n_ops = rng.gen_range(spec.ops_min..=spec.ops_max);
        let mut ops = Vec::with_capacity(n_ops as usize);
        for _ in 0..n_ops {
            let x = rng.gen_range(0..spec.keys);
            if rng.gen_bool(spec.read_fraction) {
                ops.push((OpKind::Read, x, 0));
            } else {
                ops.push((OpKind::Write, x, sink.value()));
            }
        }
        let status = if rng.gen_bool(spec.abort_probability) {
            TxnStatus::Aborted
        } else {
            TxnStatus::Committed
        };
        sink.push(s, status, ops);
        slots.push((s, sink.sessions[s].len() - 1));
    }

    // Final write of every (transaction, key), and all writes per key.
    let mut finals: Vec<Vec<(usize, u64)>> = vec![Vec::new(); spec.keys as usize];
    let mut all: Vec<Vec<u64>> = vec![Vec::new(); spec.keys as usize];
    for (ti, &(s, p)) in slots.iter().enumerate() {
        let ops = &sink.sessions[s][p].ops;
        for (i, &(kind, x, v)) in ops.iter().enumerate() {
            if kind != OpKind::Write {
                continue;
            }
            all[x as usize].push(v);
            if !ops[i + 1..].iter().any(|o| o.0 == OpKind::Write && o.1 == x) {
                finals[x as usize].push((ti, v));
            }
        }
    }

    for (ti, &(s, p)) in slots.iter().enumerate() {
        let mut own: Vec<Option<u64>> = vec![None; spec.keys as usize];
        let n_ops = sink.sessions[s][p].ops.len();
        for i in 0..n_ops {
            let (kind, x, v) = sink.sessions[s][p].ops[i];
            if kind == OpKind::Write {
                own[x as usize] = Some(v);
                continue;
            }
            let others: Vec<u64> = finals[x as usize]
                .iter()
                .filter(|&&(t, _)| t != ti)
                .map(|&(_, v)| v)
                .collect();
            let glitch = rng.gen_bool(spec.glitch_probability);
            let value = if glitch && rng.gen_bool(0.5) {
                sink.value()
            } else if glitch && !all[x as usize].is_empty() {
                *all[x as usize].choose(&mut rng).unwrap()
            } else if let Some(v) = own[x as usize] {
                v
            } else if let Some(&v) = others.choose(&mut rng) {
                v
            } else {
                sink.value()
            };
            sink.sessions[s][p].ops[i].2 = value;
        }
    }
    Ok(sink.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::check_cc;
    use crate::consistency::{check_read_consistency, ReadViolationKind};
    use crate::io::serialize_history;

    #[test]
    fn clean_generation_is_causal() {
        for seed in 0..20 {
            let spec = RandomSpec {
                seed,
                ..RandomSpec::default()
            };
            let g = gen_random(&spec).unwrap();
            assert!(g.planted.is_empty());
            assert_eq!(g.history.txn_count(), spec.txns as usize);
            assert!(check_cc(&g.history).is_consistent(), "seed {seed}");
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = RandomSpec {
            seed: 7,
            inject: Anomaly::ALL.into_iter().collect(),
            ..RandomSpec::default()
        };
        let a = serialize_history(&gen_random(&spec).unwrap().history);
        let b = serialize_history(&gen_random(&spec).unwrap().history);
        assert_eq!(a, b);
    }

    #[test]
    fn future_read_planted() {
        let spec = RandomSpec {
            seed: 1,
            inject: [Anomaly::FutureRead].into(),
            ..RandomSpec::default()
        };
        let g = gen_random(&spec).unwrap();
        assert_eq!(g.planted.len(), 1);
        assert!(g.planted[0].starts_with("planted future-read"));
        let v = check_read_consistency(&g.history);
        assert!(v.iter().any(|v| v.kind == ReadViolationKind::FutureRead));
    }

    #[test]
    fn infeasible_specs_rejected() {
        let bad = [
            RandomSpec {
                keys: 0,
                ..RandomSpec::default()
            },
            RandomSpec {
                ops_min: 3,
                ops_max: 2,
                ..RandomSpec::default()
            },
            RandomSpec {
                read_fraction: 1.5,
                ..RandomSpec::default()
            },
            RandomSpec {
                txns: 0,
                inject: [Anomaly::ThinAir].into(),
                ..RandomSpec::default()
            },
        ];
        for spec in bad {
            assert!(gen_random(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn all_reads_from_initial_state() {
        let spec = RandomSpec {
            read_fraction: 1.0,
            sessions: 1,
            ..RandomSpec::default()
        };
        let g = gen_random(&spec).unwrap();
        assert!(check_cc(&g.history).is_consistent());
    }

    #[test]
    fn unconstrained_is_well_formed() {
        for seed in 0..50 {
            let h = gen_unconstrained(&UnconstrainedSpec {
                seed,
                ..UnconstrainedSpec::default()
            })
            .unwrap();
            assert_eq!(h.txn_count(), 6);
        }
    }
}
