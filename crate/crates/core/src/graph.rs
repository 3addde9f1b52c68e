//! Commit-order graph over committed transactions: topological sorting,
//! strongly connected components, cycle witnesses and happens-before clocks.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rustc_hash::FxHashSet;

use crate::model::{History, SessionId, TxnRef};

pub type NodeId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    So,
    Wr,
    CoInferred,
}

impl EdgeLabel {
    pub fn is_sowr(self) -> bool {
        self != EdgeLabel::CoInferred
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::So => "so",
            EdgeLabel::Wr => "wr",
            EdgeLabel::CoInferred => "co",
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub target: NodeId,
    pub label: EdgeLabel,
}

/// Nodes are every transaction of the history, numbered session by session;
/// aborted transactions are present but never carry edges.
#[derive(Clone, Debug)]
pub struct CommitGraph {
    offsets: Vec<NodeId>,
    committed: Vec<bool>,
    adj: Vec<Vec<Edge>>,
    seen_inferred: FxHashSet<(NodeId, NodeId)>,
    inferred_count: usize,
}

impl CommitGraph {
    /// Graph with nodes only.
    pub fn empty(h: &History) -> Self {
        let mut offsets = Vec::with_capacity(h.session_count() + 1);
        let mut total = 0;
        for txns in h.sessions() {
            offsets.push(total);
            total += txns.len() as NodeId;
        }
        offsets.push(total);
        let committed = h.all_txns().map(|t| h.txn(t).is_committed()).collect();
        CommitGraph {
            offsets,
            committed,
            adj: vec![Vec::new(); total as usize],
            seen_inferred: FxHashSet::default(),
            inferred_count: 0,
        }
    }

    /// `so ∪ wr` over the committed transactions of `h`.
    pub fn new(h: &History) -> Self {
        let mut g = Self::empty(h);
        g.add_so_edges(h);
        for t in h.committed_txns() {
            g.add_wr_edges(t, h.txn_wr_edges(t).into_iter().map(|(w, _)| w));
        }
        g
    }

    /// One edge between each pair of consecutive committed transactions of a session.
    pub fn add_so_edges(&mut self, h: &History) {
        for (s, txns) in h.sessions().iter().enumerate() {
            let mut prev: Option<NodeId> = None;
            for (p, t) in txns.iter().enumerate() {
                if !t.is_committed() {
                    continue;
                }
                let n = self.offsets[s] + p as NodeId;
                if let Some(q) = prev {
                    self.adj[q as usize].push(Edge {
                        target: n,
                        label: EdgeLabel::So,
                    });
                }
                prev = Some(n);
            }
        }
    }

    /// Adds `w -wr-> reader` for every distinct committed writer other than the reader.
    pub fn add_wr_edges(&mut self, reader: TxnRef, writers: impl IntoIterator<Item = TxnRef>) {
        let r = self.node(reader);
        let mut ws: Vec<NodeId> = writers
            .into_iter()
            .map(|w| self.node(w))
            .filter(|&w| w != r && self.committed[w as usize])
            .collect();
        ws.sort_unstable();
        ws.dedup();
        for w in ws {
            self.adj[w as usize].push(Edge {
                target: r,
                label: EdgeLabel::Wr,
            });
        }
    }

    /// Adds an inferred commit-order edge unless the same pair was already added.
    pub fn add_inferred(&mut self, from: TxnRef, to: TxnRef) -> bool {
        self.add_inferred_nodes(self.node(from), self.node(to))
    }

    pub fn add_inferred_nodes(&mut self, from: NodeId, to: NodeId) -> bool {
        if !self.seen_inferred.insert((from, to)) {
            return false;
        }
        self.add_inferred_unique(from, to);
        true
    }

    /// Adds an inferred edge the caller knows is not present yet.
    pub(crate) fn add_inferred_unique(&mut self, from: NodeId, to: NodeId) {
        self.adj[from as usize].push(Edge {
            target: to,
            label: EdgeLabel::CoInferred,
        });
        self.inferred_count += 1;
    }

    /// Adds an edge verbatim; no deduplication.
    pub fn add_edge(&mut self, from: TxnRef, to: TxnRef, label: EdgeLabel) {
        if label == EdgeLabel::CoInferred {
            self.add_inferred(from, to);
            return;
        }
        let (f, t) = (self.node(from), self.node(to));
        self.adj[f as usize].push(Edge { target: t, label });
    }

    pub fn node(&self, t: TxnRef) -> NodeId {
        self.offsets[t.session.index()] + t.position
    }

    pub fn txn_ref(&self, n: NodeId) -> TxnRef {
        let s = self.offsets.partition_point(|&o| o <= n) - 1;
        TxnRef::new(s as u32, n - self.offsets[s])
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn session_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_committed(&self, n: NodeId) -> bool {
        self.committed[n as usize]
    }

    pub fn committed_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.adj.len() as NodeId).filter(|&n| self.committed[n as usize])
    }

    pub fn edges(&self, n: NodeId) -> &[Edge] {
        &self.adj[n as usize]
    }

    pub fn out_edges(&self, t: TxnRef) -> impl Iterator<Item = (TxnRef, EdgeLabel)> + '_ {
        self.edges(self.node(t))
            .iter()
            .map(|e| (self.txn_ref(e.target), e.label))
    }

    pub fn has_edge(&self, from: TxnRef, to: TxnRef, label: EdgeLabel) -> bool {
        let t = self.node(to);
        self.edges(self.node(from))
            .iter()
            .any(|e| e.target == t && e.label == label)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn inferred_count(&self) -> usize {
        self.inferred_count
    }

    pub fn inferred_edges(&self) -> impl Iterator<Item = (TxnRef, TxnRef)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(f, edges)| {
            edges
                .iter()
                .filter(|e| e.label == EdgeLabel::CoInferred)
                .map(move |e| (self.txn_ref(f as NodeId), self.txn_ref(e.target)))
        })
    }

    /// Kahn's algorithm, smallest ready node first. `None` on a cycle.
    fn kahn(&self, sowr_only: bool) -> Option<Vec<NodeId>> {
        let mut indeg = vec![0u32; self.adj.len()];
        for edges in &self.adj {
            for e in edges {
                if !sowr_only || e.label.is_sowr() {
                    indeg[e.target as usize] += 1;
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> = self
            .committed_nodes()
            .filter(|&n| indeg[n as usize] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::with_capacity(self.adj.len());
        while let Some(Reverse(n)) = ready.pop() {
            order.push(n);
            for e in &self.adj[n as usize] {
                if sowr_only && !e.label.is_sowr() {
                    continue;
                }
                let d = &mut indeg[e.target as usize];
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(e.target));
                }
            }
        }
        let committed = self.committed.iter().filter(|&&c| c).count();
        (order.len() == committed).then_some(order)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WitnessEdge {
    pub from: TxnRef,
    pub to: TxnRef,
    pub label: EdgeLabel,
}

/// A simple cycle of the commit graph. `edges[i].to == edges[i + 1].from` and
/// the last edge returns to the first node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleWitness {
    pub edges: Vec<WitnessEdge>,
    pub non_sowr_edge_count: usize,
}

impl CycleWitness {
    /// Normalizes the rotation so the cycle starts at its smallest transaction.
    pub fn new(mut edges: Vec<WitnessEdge>) -> Self {
        if let Some(i) = (0..edges.len()).min_by_key(|&i| edges[i].from) {
            edges.rotate_left(i);
        }
        let non_sowr_edge_count = edges.iter().filter(|e| !e.label.is_sowr()).count();
        CycleWitness {
            edges,
            non_sowr_edge_count,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn nodes(&self) -> Vec<TxnRef> {
        self.edges.iter().map(|e| e.from).collect()
    }

    /// Structural validity against `g`: closed, simple, every edge present.
    pub fn is_valid_in(&self, g: &CommitGraph) -> bool {
        let n = self.edges.len();
        if n == 0 {
            return false;
        }
        let closed = (0..n).all(|i| self.edges[i].to == self.edges[(i + 1) % n].from);
        let mut nodes = self.nodes();
        nodes.sort();
        nodes.dedup();
        closed
            && nodes.len() == n
            && self.edges.iter().all(|e| g.has_edge(e.from, e.to, e.label))
    }
}

/// Topological order of the committed transactions along `so ∪ wr` edges.
pub fn topo_sort(g: &CommitGraph) -> Result<Vec<TxnRef>, CycleWitness> {
    match g.kahn(true) {
        Some(order) => Ok(order.into_iter().map(|n| g.txn_ref(n)).collect()),
        None => Err(first_cycle(g, true)),
    }
}

/// A total order of the committed transactions extending every edge, or
/// `None` if the graph is cyclic. Ties break towards the smaller `(session, position)`.
pub fn linearize(g: &CommitGraph) -> Option<Vec<TxnRef>> {
    g.kahn(false)
        .map(|order| order.into_iter().map(|n| g.txn_ref(n)).collect())
}

/// Strongly connected components over committed nodes, sinks first.
pub fn find_sccs(g: &CommitGraph) -> Vec<Vec<TxnRef>> {
    tarjan(g, false)
        .into_iter()
        .map(|c| c.into_iter().map(|n| g.txn_ref(n)).collect())
        .collect()
}

fn tarjan(g: &CommitGraph, sowr_only: bool) -> Vec<Vec<NodeId>> {
    const UNSEEN: u32 = u32::MAX;
    let n = g.node_count();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<NodeId> = Vec::new();
    let mut calls: Vec<(NodeId, usize)> = Vec::new();
    let mut next = 0u32;
    let mut out = Vec::new();

    for root in g.committed_nodes() {
        if index[root as usize] != UNSEEN {
            continue;
        }
        calls.push((root, 0));
        index[root as usize] = next;
        low[root as usize] = next;
        next += 1;
        stack.push(root);
        on_stack[root as usize] = true;

        while let Some(&mut (v, ref mut ei)) = calls.last_mut() {
            let edges = g.edges(v);
            if let Some(e) = edges.get(*ei) {
                *ei += 1;
                if sowr_only && !e.label.is_sowr() {
                    continue;
                }
                let w = e.target as usize;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(e.target);
                    on_stack[w] = true;
                    calls.push((e.target, 0));
                } else if on_stack[w] {
                    low[v as usize] = low[v as usize].min(index[w]);
                }
                continue;
            }
            calls.pop();
            if let Some(&(parent, _)) = calls.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let mut comp = Vec::new();
                loop {
                    let x = stack.pop().expect("tarjan stack underflow");
                    on_stack[x as usize] = false;
                    comp.push(x);
                    if x == v {
                        break;
                    }
                }
                comp.reverse();
                out.push(comp);
            }
        }
    }
    out
}

fn is_nontrivial(g: &CommitGraph, comp: &[NodeId], sowr_only: bool) -> bool {
    comp.len() > 1
        || g.edges(comp[0])
            .iter()
            .any(|e| e.target == comp[0] && (!sowr_only || e.label.is_sowr()))
}

fn first_cycle(g: &CommitGraph, sowr_only: bool) -> CycleWitness {
    let comps = tarjan(g, sowr_only);
    let comp = comps
        .iter()
        .find(|c| is_nontrivial(g, c, sowr_only))
        .expect("cyclic graph has a nontrivial component");
    CycleExtractor::new(g).extract(comp, sowr_only)
}

/// One cycle per nontrivial SCC, in reverse topological order of the SCCs.
pub fn cycle_witnesses(g: &CommitGraph) -> Vec<CycleWitness> {
    let mut ex = CycleExtractor::new(g);
    tarjan(g, false)
        .into_iter()
        .filter(|c| is_nontrivial(g, c, false))
        .map(|c| ex.extract(&c, false))
        .collect()
}

/// A simple cycle inside `scc`, preferring fewer inferred edges and then
/// fewer edges overall among the searches the budget allows.
pub fn extract_cycle(g: &CommitGraph, scc: &[TxnRef]) -> CycleWitness {
    let nodes: Vec<NodeId> = scc.iter().map(|&t| g.node(t)).collect();
    CycleExtractor::new(g).extract(&nodes, false)
}

const EXHAUSTIVE_STARTS: usize = 256;
const MIN_WORK_BUDGET: usize = 1 << 22;

struct CycleExtractor<'g> {
    g: &'g CommitGraph,
    // Position of each node in the current SCC, or u32::MAX.
    local: Vec<u32>,
}

impl<'g> CycleExtractor<'g> {
    fn new(g: &'g CommitGraph) -> Self {
        CycleExtractor {
            g,
            local: vec![u32::MAX; g.node_count()],
        }
    }

    fn extract(&mut self, scc: &[NodeId], sowr_only: bool) -> CycleWitness {
        for (i, &n) in scc.iter().enumerate() {
            self.local[n as usize] = i as u32;
        }
        let edges_in_scc: usize = scc.iter().map(|&n| self.g.edges(n).len()).sum();
        let budget = MIN_WORK_BUDGET.max(4 * (edges_in_scc + scc.len()));

        let starts: Vec<usize> = if scc.len() <= EXHAUSTIVE_STARTS {
            (0..scc.len()).collect()
        } else {
            let step = scc.len() / EXHAUSTIVE_STARTS;
            (0..EXHAUSTIVE_STARTS).map(|i| i * step).collect()
        };

        let mut best: Option<((usize, usize), Vec<WitnessEdge>)> = None;
        let mut work = 0usize;
        for (i, &s) in starts.iter().enumerate() {
            if i > 0 && work >= budget {
                break;
            }
            if best.as_ref().is_some_and(|(k, _)| k.0 == 0 && k.1 <= 2) {
                break;
            }
            if let Some(found) = self.search(scc, s, sowr_only, &mut work) {
                if best.as_ref().is_none_or(|(k, _)| found.0 < *k) {
                    best = Some(found);
                }
            }
        }

        for &n in scc {
            self.local[n as usize] = u32::MAX;
        }
        let (_, edges) = best.expect("nontrivial component contains a cycle");
        CycleWitness::new(edges)
    }

    // Lexicographic (inferred edges, hops) shortest cycle through scc[start].
    fn search(
        &self,
        scc: &[NodeId],
        start: usize,
        sowr_only: bool,
        work: &mut usize,
    ) -> Option<((usize, usize), Vec<WitnessEdge>)> {
        const INF: (usize, usize) = (usize::MAX, usize::MAX);
        let mut dist = vec![INF; scc.len()];
        let mut parent: Vec<(u32, EdgeLabel)> = vec![(u32::MAX, EdgeLabel::So); scc.len()];
        let mut heap = BinaryHeap::new();
        let mut close: Option<((usize, usize), u32, EdgeLabel)> = None;

        dist[start] = (0, 0);
        heap.push(Reverse(((0usize, 0usize), start as u32)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            if close.is_some_and(|(c, _, _)| d >= c) {
                break;
            }
            for e in self.g.edges(scc[u as usize]) {
                *work += 1;
                if sowr_only && !e.label.is_sowr() {
                    continue;
                }
                let v = self.local[e.target as usize];
                if v == u32::MAX {
                    continue;
                }
                let nd = (d.0 + usize::from(!e.label.is_sowr()), d.1 + 1);
                if v as usize == start {
                    if close.is_none_or(|(c, _, _)| nd < c) {
                        close = Some((nd, u, e.label));
                    }
                    continue;
                }
                if nd < dist[v as usize] {
                    dist[v as usize] = nd;
                    parent[v as usize] = (u, e.label);
                    heap.push(Reverse((nd, v)));
                }
            }
        }

        let (cost, last, label) = close?;
        let mut edges = vec![WitnessEdge {
            from: self.g.txn_ref(scc[last as usize]),
            to: self.g.txn_ref(scc[start]),
            label,
        }];
        let mut v = last;
        while v as usize != start {
            let (p, l) = parent[v as usize];
            edges.push(WitnessEdge {
                from: self.g.txn_ref(scc[p as usize]),
                to: self.g.txn_ref(scc[v as usize]),
                label: l,
            });
            v = p;
        }
        edges.reverse();
        Some((cost, edges))
    }
}

/// Per-session clock. Entry `s` is `position + 1` of the so-latest
/// transaction of session `s` known to precede the owner, 0 for none.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorClock(pub Vec<u32>);

impl VectorClock {
    pub fn bottom(sessions: usize) -> Self {
        VectorClock(vec![0; sessions])
    }

    pub fn get(&self, s: SessionId) -> Option<u32> {
        self.0[s.index()].checked_sub(1)
    }

    pub fn set(&mut self, t: TxnRef) {
        self.0[t.session.index()] = t.position + 1;
    }

    pub fn join(&self, other: &VectorClock) -> VectorClock {
        let mut out = self.clone();
        out.join_assign(&other.0);
        out
    }

    pub fn join_assign(&mut self, other: &[u32]) {
        assert_eq!(self.0.len(), other.len(), "vector clock length mismatch");
        join_into(&mut self.0, other);
    }
}

fn join_into(dst: &mut [u32], src: &[u32]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (*d).max(s);
    }
}

/// Happens-before clocks of every transaction, with the owner itself excluded.
#[derive(Clone, Debug)]
pub struct HappensBefore {
    sessions: usize,
    offsets: Vec<NodeId>,
    table: Vec<u32>,
}

impl HappensBefore {
    pub fn clock(&self, t: TxnRef) -> &[u32] {
        let n = (self.offsets[t.session.index()] + t.position) as usize;
        &self.table[n * self.sessions..(n + 1) * self.sessions]
    }

    /// Position of the so-latest transaction of `s` that happens before `t`.
    pub fn get(&self, t: TxnRef, s: SessionId) -> Option<u32> {
        self.clock(t)[s.index()].checked_sub(1)
    }

    pub fn vector(&self, t: TxnRef) -> VectorClock {
        VectorClock(self.clock(t).to_vec())
    }
}

pub fn compute_hb(h: &History) -> Result<HappensBefore, CycleWitness> {
    compute_hb_graph(&CommitGraph::new(h))
}

/// Clocks over the `so ∪ wr` edges of `g`; inferred edges are ignored.
pub fn compute_hb_graph(g: &CommitGraph) -> Result<HappensBefore, CycleWitness> {
    let order = g.kahn(true).ok_or_else(|| first_cycle(g, true))?;
    let k = g.session_count();
    let mut table = vec![0u32; g.node_count() * k];
    let mut own = vec![0u32; k];
    for u in order {
        let me = g.txn_ref(u);
        own.copy_from_slice(&table[u as usize * k..(u as usize + 1) * k]);
        own[me.session.index()] = me.position + 1;
        for e in g.edges(u) {
            if !e.label.is_sowr() {
                continue;
            }
            let v = e.target as usize;
            join_into(&mut table[v * k..(v + 1) * k], &own);
        }
    }
    Ok(HappensBefore {
        sessions: k,
        offsets: g.offsets.clone(),
        table,
    })
}
