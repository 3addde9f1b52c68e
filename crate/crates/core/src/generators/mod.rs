//! History generators: seeded random workloads and the triangle-detection
//! reductions, plus the undirected graphs those reductions consume.

mod random;
mod reductions;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use random::{gen_random, gen_unconstrained, Anomaly, GenError, Generated, RandomSpec, UnconstrainedSpec};
pub use reductions::{gen_ra_reduction, gen_range_reduction, gen_rc_reduction, inner_key, node_key};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UndirectedGraph {
    node_count: u32,
    // Canonical (small, large) pairs.
    edges: BTreeSet<(u32, u32)>,
}

impl UndirectedGraph {
    pub fn new(node_count: u32) -> Self {
        UndirectedGraph {
            node_count,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_edges(node_count: u32, edges: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut g = Self::new(node_count);
        for (a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn complete(n: u32) -> Self {
        Self::from_edges(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn path(n: u32) -> Self {
        Self::from_edges(n, (1..n).map(|a| (a - 1, a)))
    }

    pub fn star(n: u32) -> Self {
        Self::from_edges(n, (1..n).map(|a| (0, a)))
    }

    /// Each of the `n(n-1)/2` possible edges present independently with probability `p`.
    pub fn erdos_renyi(n: u32, p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Self::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    g.add_edge(a, b);
                }
            }
        }
        g
    }

    /// Returns false for duplicates. Panics on self-loops or out-of-range nodes.
    pub fn add_edge(&mut self, a: u32, b: u32) -> bool {
        assert!(a != b, "self-loop at {a}");
        assert!(a.max(b) < self.node_count, "edge ({a}, {b}) out of range");
        self.edges.insert((a.min(b), a.max(b)))
    }

    pub fn node_count(&self) -> u32 {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.node_count as usize];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }
}

/// Brute force over all node triples.
pub fn has_triangle(g: &UndirectedGraph) -> bool {
    let n = g.node_count();
    (0..n).any(|a| {
        (a + 1..n).any(|b| g.has_edge(a, b) && (b + 1..n).any(|c| g.has_edge(a, c) && g.has_edge(b, c)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent method: a triangle exists iff (A^2 ∘ A) has a nonzero entry.
    fn has_triangle_by_squaring(g: &UndirectedGraph) -> bool {
        let n = g.node_count() as usize;
        let mut a = vec![vec![0u32; n]; n];
        for (x, y) in g.edges() {
            a[x as usize][y as usize] = 1;
            a[y as usize][x as usize] = 1;
        }
        (0..n).any(|i| {
            (0..n).any(|j| a[i][j] == 1 && (0..n).map(|k| a[i][k] * a[k][j]).sum::<u32>() > 0)
        })
    }

    #[test]
    fn triangles_in_small_families() {
        assert!(has_triangle(&UndirectedGraph::complete(3)));
        assert!(!has_triangle(&UndirectedGraph::path(6)));
        assert!(!has_triangle(&UndirectedGraph::star(6)));
        assert!(!has_triangle(&UndirectedGraph::new(0)));
    }

    #[test]
    fn triangle_methods_agree_on_random_graphs() {
        for seed in 0..300 {
            let n = (seed % 12 + 1) as u32;
            let p = [0.1, 0.3, 0.5][seed as usize % 3];
            let g = UndirectedGraph::erdos_renyi(n, p, seed);
            assert_eq!(has_triangle(&g), has_triangle_by_squaring(&g), "seed {seed}");
        }
    }

    #[test]
    fn edges_are_canonical() {
        let mut g = UndirectedGraph::new(3);
        assert!(g.add_edge(2, 0));
        assert!(!g.add_edge(0, 2));
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2)]);
        assert_eq!(g.adjacency(), vec![vec![2], vec![], vec![0]]);
    }

    #[test]
    #[should_panic(expected = "self-loop")]
    fn self_loops_rejected() {
        UndirectedGraph::new(2).add_edge(1, 1);
    }
}
