//! Weighted undirected graphs, their text format and seeded generators.
//!
//! The text format is a header line `V M` followed by `M` lines `u v w`.
//! Vertices are numbered from 0, weights are non-negative integers, and
//! anything after a `#` is ignored.
//!
//! ```
//! use meshmsf::graph::Graph;
//!
//! let g: Graph = "3 2\n0 1 5\n1 2 7 # heavier\n".parse().unwrap();
//! assert_eq!(g.n_vertices, 3);
//! assert_eq!(g.edges[1].w, 7);
//! assert_eq!(g.to_string().parse::<Graph>().unwrap(), g);
//! ```

use std::fmt;
use std::str::FromStr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};

/// An undirected edge; its position in [`Graph::edges`] is its identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub n_vertices: usize,
    pub edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n_vertices: usize) -> Self {
        Graph { n_vertices, edges: Vec::new() }
    }

    pub fn from_edges(n_vertices: usize, edges: impl IntoIterator<Item = (usize, usize, u64)>) -> Self {
        Graph { n_vertices, edges: edges.into_iter().map(|(u, v, w)| Edge { u, v, w }).collect() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: u64) {
        self.edges.push(Edge { u, v, w });
    }

    /// Checks that every endpoint names a vertex.
    pub fn validate(&self) -> Result<()> {
        for e in &self.edges {
            let bad = e.u.max(e.v);
            if bad >= self.n_vertices {
                return Err(MeshError::OutOfRange { what: "vertex", value: bad, limit: self.n_vertices });
            }
        }
        Ok(())
    }

    /// Number of edges that are not self-loops.
    pub fn proper_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.u != e.v).count()
    }

    /// Places `other` after `self`, renumbering its vertices.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.n_vertices;
        let mut g = self.clone();
        g.n_vertices += other.n_vertices;
        g.edges.extend(other.edges.iter().map(|e| Edge { u: e.u + off, v: e.v + off, w: e.w }));
        g
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n_vertices, self.edges.len())?;
        for e in &self.edges {
            writeln!(f, "{} {} {}", e.u, e.v, e.w)?;
        }
        Ok(())
    }
}

impl FromStr for Graph {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Graph> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(MeshError::Parse { line: 0, msg: "missing `V M` header".into() })?;
        let head = numbers::<usize>(hl, header, 2)?;
        let mut g = Graph::new(head[0]);
        for (i, line) in lines {
            let f = numbers::<u64>(i, line, 3)?;
            g.add_edge(f[0] as usize, f[1] as usize, f[2]);
        }
        if g.edges.len() != head[1] {
            return Err(MeshError::Parse {
                line: hl,
                msg: format!("header announces {} edges, found {}", head[1], g.edges.len()),
            });
        }
        g.validate()?;
        Ok(g)
    }
}

fn numbers<T: FromStr>(line: usize, text: &str, n: usize) -> Result<Vec<T>> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != n {
        return Err(MeshError::Parse { line, msg: format!("expected {n} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| f.parse().map_err(|_| MeshError::Parse { line, msg: format!("`{f}` is not a non-negative integer") }))
        .collect()
}

/// Seeded generators. Equal seeds give equal graphs.
pub mod gen {
    use super::*;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// `m` edges with uniformly random endpoints (self-loops and parallel
    /// edges allowed) and weights below `max_w`.
    pub fn random_gnm(n: usize, m: usize, max_w: u64, rng: &mut impl Rng) -> Graph {
        let mut g = Graph::new(n);
        if n == 0 {
            return g;
        }
        for _ in 0..m {
            g.add_edge(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..max_w.max(1)));
        }
        g
    }

    /// A `rows × cols` grid graph with random weights.
    pub fn grid(rows: usize, cols: usize, max_w: u64, rng: &mut impl Rng) -> Graph {
        let mut g = Graph::new(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    g.add_edge(v, v + 1, rng.gen_range(0..max_w.max(1)));
                }
                if r + 1 < rows {
                    g.add_edge(v, v + cols, rng.gen_range(0..max_w.max(1)));
                }
            }
        }
        g
    }

    /// A uniformly attached random tree on `n` vertices, vertex labels shuffled.
    pub fn tree(n: usize, max_w: u64, rng: &mut impl Rng) -> Graph {
        let mut labels: Vec<usize> = (0..n).collect();
        labels.shuffle(rng);
        let mut g = Graph::new(n);
        for i in 1..n {
            let p = rng.gen_range(0..i);
            g.add_edge(labels[i], labels[p], rng.gen_range(0..max_w.max(1)));
        }
        g
    }

    pub fn path(n: usize, w: u64) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i, w)))
    }

    pub fn star(n: usize, w: u64) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (0, i, w)))
    }

    /// Shuffles the edge list and swaps endpoints at random.
    pub fn shuffle_edges(g: &mut Graph, rng: &mut impl Rng) {
        g.edges.shuffle(rng);
        for e in &mut g.edges {
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut e.u, &mut e.v);
            }
        }
    }

    /// Renames vertices by a random permutation.
    pub fn relabel(g: &mut Graph, rng: &mut impl Rng) {
        let mut p: Vec<usize> = (0..g.n_vertices).collect();
        p.shuffle(rng);
        for e in &mut g.edges {
            e.u = p[e.u];
            e.v = p[e.v];
        }
    }

    /// Appends `k` vertices without edges.
    pub fn with_isolated(g: &Graph, k: usize) -> Graph {
        g.disjoint_union(&Graph::new(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!("".parse::<Graph>(), Err(MeshError::Parse { .. })));
        assert!(matches!("2 1\n0 1\n".parse::<Graph>(), Err(MeshError::Parse { line: 2, .. })));
        assert!(matches!("2 2\n0 1 3\n".parse::<Graph>(), Err(MeshError::Parse { line: 1, .. })));
        assert!(matches!("2 1\n0 2 3\n".parse::<Graph>(), Err(MeshError::OutOfRange { .. })));
        assert!(matches!("2 1\n0 1 -3\n".parse::<Graph>(), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn comments_and_blank_lines() {
        let g: Graph = "# a triangle\n\n3 3\n0 1 1\n1 2 2 # second\n\n2 0 3\n".parse().unwrap();
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.edges[2], Edge { u: 2, v: 0, w: 3 });
    }

    #[test]
    fn generators_are_seeded() {
        let a = gen::random_gnm(50, 80, 100, &mut gen::rng(4));
        let b = gen::random_gnm(50, 80, 100, &mut gen::rng(4));
        assert_eq!(a, b);
        assert_eq!(gen::grid(3, 4, 10, &mut gen::rng(1)).edges.len(), 17);
        let t = gen::tree(30, 10, &mut gen::rng(2));
        assert_eq!(t.edges.len(), 29);
        t.validate().unwrap();
    }
}
