//! Undirected communication graphs for the decentralized protocol.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Simple undirected graph over client ids `0..p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyGraph {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl TopologyGraph {
    /// Builds a graph from an explicit edge list. Self-loops, out-of-range
    /// endpoints and duplicate edges are rejected.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidEdge(a, b));
            }
            for node in [a, b] {
                if node >= p {
                    return Err(Error::NodeOutOfRange { node, p });
                }
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidEdge(a, b));
            }
        }
        let mut adjacency = vec![Vec::new(); p];
        for &(a, b) in &set {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        adjacency.iter_mut().for_each(|n| n.sort_unstable());
        Ok(Self {
            p,
            edges: set,
            adjacency,
        })
    }

    pub fn edgeless(p: usize) -> Result<Self> {
        Self::from_edges(p, &[])
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::NodeOutOfRange { node: i, p: self.p })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        Ok(self.neighbors(i)?.len())
    }

    /// Scalars exchanged per round: every client sends its length-`n`
    /// eigenvector plus one eigenvalue to each neighbour, `Σᵢ deg(i)·(n+1)`.
    pub fn round_message_count(&self, n: usize) -> u64 {
        let degree_sum: usize = self.adjacency.iter().map(Vec::len).sum();
        degree_sum as u64 * (n as u64 + 1)
    }
}

pub fn complete_graph(p: usize) -> Result<TopologyGraph> {
    let edges: Vec<_> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    TopologyGraph::from_edges(p, &edges)
}

/// Cycle `0 - 1 - … - (p-1) - 0`. For `p = 1` the graph is edgeless and for
/// `p = 2` it is a single edge.
pub fn ring_graph(p: usize) -> Result<TopologyGraph> {
    let edges: Vec<_> = match p {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..p).map(|i| (i, (i + 1) % p)).collect(),
    };
    TopologyGraph::from_edges(p, &edges)
}

pub fn star_graph(p: usize, hub: usize) -> Result<TopologyGraph> {
    if p == 0 {
        return Err(Error::EmptyGraph);
    }
    if hub >= p {
        return Err(Error::NodeOutOfRange { node: hub, p });
    }
    if p < 2 {
        return Err(Error::InvalidArgument(
            "a star needs at least 2 nodes".into(),
        ));
    }
    let edges: Vec<_> = (0..p).filter(|&i| i != hub).map(|i| (hub, i)).collect();
    TopologyGraph::from_edges(p, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_list(g: &TopologyGraph) -> Vec<(usize, usize)> {
        g.edges().collect()
    }

    #[test]
    fn complete_graph_examples() {
        assert_eq!(complete_graph(1).unwrap().edge_count(), 0);
        assert_eq!(
            edge_list(&complete_graph(3).unwrap()),
            vec![(0, 1), (0, 2), (1, 2)]
        );
        assert_eq!(complete_graph(5).unwrap().edge_count(), 10);
        assert!(matches!(complete_graph(0), Err(Error::EmptyGraph)));
    }

    #[test]
    fn ring_graph_examples() {
        assert_eq!(ring_graph(3).unwrap(), complete_graph(3).unwrap());
        let r4 = ring_graph(4).unwrap();
        assert_eq!(r4.edge_count(), 4);
        assert!((0..4).all(|i| r4.degree(i).unwrap() == 2));
        assert_eq!(edge_list(&ring_graph(2).unwrap()), vec![(0, 1)]);
        assert_eq!(ring_graph(1).unwrap().edge_count(), 0);
    }

    #[test]
    fn star_graph_examples() {
        let s = star_graph(4, 0).unwrap();
        assert_eq!(edge_list(&s), vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(s.degree(0).unwrap(), 3);
        assert!((1..4).all(|i| s.degree(i).unwrap() == 1));
        assert_eq!(edge_list(&star_graph(2, 1).unwrap()), vec![(0, 1)]);
        assert!(matches!(
            star_graph(4, 4),
            Err(Error::NodeOutOfRange { node: 4, p: 4 })
        ));
    }

    #[test]
    fn neighbor_queries() {
        assert_eq!(ring_graph(4).unwrap().neighbors(0).unwrap(), &[1, 3]);
        assert_eq!(star_graph(4, 0).unwrap().neighbors(2).unwrap(), &[0]);
        assert_eq!(complete_graph(3).unwrap().neighbors(1).unwrap(), &[0, 2]);
        assert!(complete_graph(3).unwrap().neighbors(3).is_err());
    }

    #[test]
    fn message_counts() {
        assert_eq!(
            TopologyGraph::edgeless(4).unwrap().round_message_count(7),
            0
        );
        let single = TopologyGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(single.round_message_count(4), 10);
        assert_eq!(complete_graph(3).unwrap().round_message_count(2), 18);
    }

    #[test]
    fn from_edges_validation() {
        assert!(matches!(
            TopologyGraph::from_edges(3, &[(1, 1)]),
            Err(Error::InvalidEdge(1, 1))
        ));
        assert!(TopologyGraph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(matches!(
            TopologyGraph::from_edges(3, &[(0, 3)]),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    fn any_graph() -> impl Strategy<Value = TopologyGraph> {
        (1usize..12, 0usize..12, 0usize..3).prop_map(|(p, hub, kind)| match kind {
            0 => complete_graph(p).unwrap(),
            1 => ring_graph(p).unwrap(),
            _ => star_graph(p.max(2), hub % p.max(2)).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn handshake_and_symmetry(g in any_graph()) {
            let degree_sum: usize = (0..g.node_count()).map(|i| g.degree(i).unwrap()).sum();
            prop_assert_eq!(degree_sum, 2 * g.edge_count());
            for i in 0..g.node_count() {
                let ns = g.neighbors(i).unwrap();
                prop_assert!(ns.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(!ns.contains(&i));
                for &j in ns {
                    prop_assert!(g.neighbors(j).unwrap().contains(&i));
                }
            }
        }

        #[test]
        fn ring_edges_are_within_complete(p in 3usize..15) {
            let complete = complete_graph(p).unwrap();
            for (a, b) in ring_graph(p).unwrap().edges() {
                prop_assert!(complete.contains_edge(a, b));
            }
        }
    }
}
