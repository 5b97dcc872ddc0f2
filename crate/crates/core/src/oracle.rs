//! Sequential ground truth and result checking.
//!
//! The spanning forest is unique once ties are broken by the edge order
//! `(w, min endpoint, max endpoint, input index)`, so results are compared
//! as exact sets of input indices.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::graph::Graph;

/// Union-find with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; false if they were already one.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Position of edge `i` in the total edge order.
pub fn edge_key(g: &Graph, i: usize) -> (u64, usize, usize, usize) {
    let e = g.edges[i];
    (e.w, e.u.min(e.v), e.u.max(e.v), i)
}

/// Kruskal's algorithm under the total edge order.
pub fn kruskal_msf(g: &Graph) -> BTreeSet<usize> {
    let mut order: Vec<usize> = (0..g.edges.len()).filter(|&i| g.edges[i].u != g.edges[i].v).collect();
    order.sort_unstable_by_key(|&i| edge_key(g, i));
    let mut uf = UnionFind::new(g.n_vertices);
    order.into_iter().filter(|&i| uf.union(g.edges[i].u, g.edges[i].v)).collect()
}

/// Component label of every vertex: the smallest vertex of its component.
pub fn cc_labels(g: &Graph) -> Vec<u64> {
    let mut uf = UnionFind::new(g.n_vertices);
    for e in &g.edges {
        uf.union(e.u, e.v);
    }
    let mut least = vec![usize::MAX; g.n_vertices];
    for v in 0..g.n_vertices {
        let r = uf.find(v);
        least[r] = least[r].min(v);
    }
    (0..g.n_vertices).map(|v| least[uf.find(v)] as u64).collect()
}

pub fn total_weight(g: &Graph, edges: &BTreeSet<usize>) -> u128 {
    edges.iter().map(|&i| u128::from(g.edges[i].w)).sum()
}

/// Outcome of checking a result against the oracle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub msf_ok: bool,
    pub components_ok: bool,
    /// Oracle edges the result lacks, at most ten.
    pub missing: Vec<usize>,
    /// Result edges the oracle does not have, at most ten.
    pub extra: Vec<usize>,
    /// First vertex with a wrong component label.
    pub first_bad_vertex: Option<usize>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.msf_ok && self.components_ok
    }
}

/// Compares a spanning forest and component labeling with the oracle.
pub fn verify(g: &Graph, msf: &BTreeSet<usize>, component_of: &[u64]) -> Verdict {
    let want = kruskal_msf(g);
    let missing: Vec<usize> = want.difference(msf).take(10).copied().collect();
    let extra: Vec<usize> = msf.difference(&want).take(10).copied().collect();
    let labels = cc_labels(g);
    let first_bad_vertex = if component_of.len() != labels.len() {
        Some(component_of.len().min(labels.len()))
    } else {
        labels.iter().zip(component_of).position(|(a, b)| a != b)
    };
    Verdict {
        msf_ok: missing.is_empty() && extra.is_empty(),
        components_ok: first_bad_vertex.is_none(),
        missing,
        extra,
        first_bad_vertex,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;

    /// Prim's algorithm from every unvisited vertex, O(V·E).
    fn prim(g: &Graph) -> BTreeSet<usize> {
        let mut seen = vec![false; g.n_vertices];
        let mut out = BTreeSet::new();
        for s in 0..g.n_vertices {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            loop {
                let best = (0..g.edges.len())
                    .filter(|&i| seen[g.edges[i].u] != seen[g.edges[i].v])
                    .min_by_key(|&i| edge_key(g, i));
                let Some(i) = best else { break };
                out.insert(i);
                seen[g.edges[i].u] = true;
                seen[g.edges[i].v] = true;
            }
        }
        out
    }

    fn bfs_labels(g: &Graph) -> Vec<u64> {
        let mut adj = vec![Vec::new(); g.n_vertices];
        for e in &g.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut label = vec![u64::MAX; g.n_vertices];
        for s in 0..g.n_vertices {
            if label[s] != u64::MAX {
                continue;
            }
            label[s] = s as u64;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if label[y] == u64::MAX {
                        label[y] = s as u64;
                        queue.push_back(y);
                    }
                }
            }
        }
        label
    }

    #[test]
    fn kruskal_agrees_with_prim() {
        for seed in 0..40 {
            let mut rng = gen::rng(seed);
            let g = gen::random_gnm(30, 60, 8, &mut rng);
            assert_eq!(kruskal_msf(&g), prim(&g), "seed {seed}");
            assert_eq!(cc_labels(&g), bfs_labels(&g));
        }
    }

    #[test]
    fn triangle_with_ties() {
        let g = Graph::from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        // (0,2) precedes (1,2): same weight, smaller first endpoint
        assert_eq!(kruskal_msf(&g), BTreeSet::from([0, 2]));
        let g = Graph::from_edges(4, [(0, 1, 3), (2, 3, 1), (1, 1, 0)]);
        assert_eq!(kruskal_msf(&g), BTreeSet::from([0, 1]));
        assert_eq!(cc_labels(&g), vec![0, 0, 2, 2]);
    }

    #[test]
    fn verify_reports_differences() {
        let g = Graph::from_edges(3, [(0, 1, 1), (1, 2, 2), (0, 2, 3)]);
        let v = verify(&g, &BTreeSet::from([0, 2]), &[0, 0, 0]);
        assert!(!v.msf_ok && v.components_ok);
        assert_eq!((v.missing, v.extra), (vec![1], vec![2]));
        let v = verify(&g, &BTreeSet::from([0, 1]), &[0, 0, 1]);
        assert_eq!(v.first_bad_vertex, Some(2));
    }
}
