//! Labeled graphs on up to [`N_GRAPH_MAX`] vertices stored as edge bitmasks.
//!
//! Bit `k` of the mask is the `k`-th pair `(i, j)`, `i < j`, in lexicographic order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_GRAPH_MAX: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledGraph {
    n: usize,
    edges: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    All,
    Connected,
    Biconnected,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Predicate::All => "all",
            Predicate::Connected => "connected",
            Predicate::Biconnected => "biconnected",
        };
        f.write_str(s)
    }
}

impl Predicate {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Self::All),
            "connected" => Some(Self::Connected),
            "biconnected" => Some(Self::Biconnected),
            _ => None,
        }
    }
}

/// Number of vertex pairs on `n` vertices.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Bit position of the pair `(i, j)` with `i < j`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// All pairs in bit order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

impl LabeledGraph {
    pub fn new(n: usize, edges: u32) -> Self {
        assert!(
            (1..=N_GRAPH_MAX + 1).contains(&n),
            "vertex count out of range"
        );
        let pc = pair_count(n);
        let mask = if pc >= 32 { u32::MAX } else { (1u32 << pc) - 1 };
        Self {
            n,
            edges: edges & mask,
        }
    }

    /// Build from an edge list of `(i, j)` pairs (0-based).
    pub fn from_edges(n: usize, list: &[(usize, usize)]) -> Self {
        let mut mask = 0u32;
        for &(a, b) in list {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            mask |= 1 << pair_index(n, i, j);
        }
        Self::new(n, mask)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> u32 {
        self.edges
    }

    pub fn edge_count(&self) -> u32 {
        self.edges.count_ones()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.edges & (1 << pair_index(self.n, i, j)) != 0
    }

    /// Edges as `(i, j)` pairs in bit order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.n)
            .into_iter()
            .enumerate()
            .filter(|(k, _)| self.edges & (1 << k) != 0)
            .map(|(_, p)| p)
            .collect()
    }

    fn adjacency(&self) -> [u16; 16] {
        let mut adj = [0u16; 16];
        let mut k = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.edges & (1 << k) != 0 {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
                k += 1;
            }
        }
        adj
    }

    /// True iff the vertices outside `removed` form one component.
    fn connected_without(&self, adj: &[u16; 16], removed: u16) -> bool {
        let all: u16 = ((1u32 << self.n) - 1) as u16 & !removed;
        if all == 0 {
            return true;
        }
        let start = all.trailing_zeros();
        let mut seen: u16 = 1 << start;
        let mut frontier = seen;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let next = adj[v] & all & !seen;
            seen |= next;
            frontier |= next;
        }
        seen == all
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        self.connected_without(&adj, 0)
    }

    /// Connected with no articulation vertex; on two vertices, the single edge.
    pub fn is_biconnected(&self) -> bool {
        if self.n < 2 {
            return false;
        }
        if self.n == 2 {
            return self.edges & 1 == 1;
        }
        let adj = self.adjacency();
        if !self.connected_without(&adj, 0) {
            return false;
        }
        (0..self.n).all(|v| self.connected_without(&adj, 1 << v))
    }

    pub fn satisfies(&self, p: Predicate) -> bool {
        match p {
            Predicate::All => true,
            Predicate::Connected => self.is_connected(),
            Predicate::Biconnected => self.is_biconnected(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraphFamily {
    pub n: usize,
    pub predicate: Predicate,
    pub graphs: Vec<LabeledGraph>,
}

impl GraphFamily {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}

/// Every labeled graph on `n` vertices satisfying `predicate`, in mask order.
pub fn enumerate(n: usize, predicate: Predicate) -> Result<GraphFamily> {
    if n == 0 {
        return Err(Error::Argument("graphs need at least one vertex".into()));
    }
    if n > N_GRAPH_MAX {
        return Err(Error::Capacity(format!(
            "graph enumeration limited to n <= {N_GRAPH_MAX}, requested {n}"
        )));
    }
    if predicate == Predicate::Biconnected && n < 2 {
        return Ok(GraphFamily {
            n,
            predicate,
            graphs: Vec::new(),
        });
    }
    let total: u64 = 1u64 << pair_count(n);
    let min_edges = match predicate {
        Predicate::All => 0,
        Predicate::Connected => n as u32 - 1,
        Predicate::Biconnected => {
            if n == 2 {
                1
            } else {
                n as u32
            }
        }
    };
    let graphs = (0..total)
        .map(|m| LabeledGraph::new(n, m as u32))
        .filter(|g| g.edge_count() >= min_edges && g.satisfies(predicate))
        .collect();
    Ok(GraphFamily {
        n,
        predicate,
        graphs,
    })
}

/// Reads a cache of `n predicate count` lines.
pub fn read_count_cache(path: &Path) -> Result<BTreeMap<(usize, Predicate), usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Config {
            line: idx + 1,
            msg: format!("malformed count line '{line}'"),
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: usize = parts[0].parse().map_err(|_| bad())?;
        let p = Predicate::parse(parts[1]).ok_or_else(bad)?;
        let c: usize = parts[2].parse().map_err(|_| bad())?;
        out.insert((n, p), c);
    }
    Ok(out)
}

/// Writes counts for `n = 1..=max_n` of the connected and biconnected families.
pub fn write_count_cache(path: &Path, max_n: usize) -> Result<()> {
    let mut s = String::from("# n predicate count\n");
    for n in 1..=max_n {
        for p in [Predicate::Connected, Predicate::Biconnected] {
            let c = enumerate(n, p)?.len();
            s.push_str(&format!("{n} {p} {c}\n"));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connectivity_examples() {
        assert!(LabeledGraph::new(1, 0).is_connected());
        let path = LabeledGraph::from_edges(3, &[(0, 1), (1, 2)]);
        assert!(path.is_connected());
        assert!(!path.is_biconnected());
        assert!(!LabeledGraph::from_edges(3, &[(0, 1)]).is_connected());
        assert!(LabeledGraph::from_edges(2, &[(0, 1)]).is_biconnected());
        assert!(!LabeledGraph::new(2, 0).is_biconnected());
        assert!(LabeledGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).is_biconnected());
    }

    #[test]
    fn bit_order_is_lexicographic() {
        assert_eq!(
            pairs(4),
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        );
        for (k, (i, j)) in pairs(5).into_iter().enumerate() {
            assert_eq!(pair_index(5, i, j), k);
        }
    }

    #[test]
    fn family_counts() {
        assert_eq!(enumerate(3, Predicate::Connected).unwrap().len(), 4);
        assert_eq!(enumerate(4, Predicate::Connected).unwrap().len(), 38);
        assert_eq!(enumerate(4, Predicate::Biconnected).unwrap().len(), 10);
        assert_eq!(enumerate(2, Predicate::Biconnected).unwrap().len(), 1);
        assert!(matches!(
            enumerate(8, Predicate::Connected),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let a = enumerate(5, Predicate::Biconnected).unwrap();
        let b = enumerate(5, Predicate::Biconnected).unwrap();
        assert_eq!(a.graphs, b.graphs);
    }
}
