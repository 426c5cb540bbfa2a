//! Facility spatial graph and the shortest-path metric over locations.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LocationId;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("spatial graph parse error: {0}")]
    Parse(String),
    #[error("locations {0} and {1} are not connected")]
    Disconnected(LocationId, LocationId),
    #[error("distance matrix violates metric invariant: {0}")]
    NotMetric(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// On-disk shape of a spatial graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String, f64)>,
    pub location_map: BTreeMap<LocationId, String>,
}

impl SpatialGraph {
    pub fn from_json(text: &str) -> Result<Self, SpatialError> {
        let g: SpatialGraph =
            serde_json::from_str(text).map_err(|e| SpatialError::Parse(e.to_string()))?;
        g.check()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spatial graph serialises")
    }

    /// Checks structural invariants: known endpoints, positive lengths, and
    /// connectivity among mapped locations.
    pub fn check(&self) -> Result<(), SpatialError> {
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if index.len() != self.nodes.len() {
            return Err(SpatialError::Parse("duplicate node id".into()));
        }
        for (u, v, len) in &self.edges {
            if !index.contains_key(u.as_str()) || !index.contains_key(v.as_str()) {
                return Err(SpatialError::Parse(format!("edge ({u},{v}) references unknown node")));
            }
            if !(len.is_finite() && *len > 0.0) {
                return Err(SpatialError::Parse(format!(
                    "edge ({u},{v}) has non-positive length {len}"
                )));
            }
        }
        for (loc, node) in &self.location_map {
            if !index.contains_key(node.as_str()) {
                return Err(SpatialError::Parse(format!(
                    "location {loc} maps to unknown node {node}"
                )));
            }
        }
        // Connectivity is checked by the metric computation.
        self.distances_from_locations().map(|_| ())
    }

    fn distances_from_locations(&self) -> Result<Vec<Vec<f64>>, SpatialError> {
        let mut graph: UnGraph<(), f64> = UnGraph::new_undirected();
        let idx: HashMap<&str, NodeIndex> = self
            .nodes
            .iter()
            .map(|n| (n.as_str(), graph.add_node(())))
            .collect();
        for (u, v, len) in &self.edges {
            graph.add_edge(idx[u.as_str()], idx[v.as_str()], *len);
        }
        let locs: Vec<(&LocationId, NodeIndex)> = self
            .location_map
            .iter()
            .map(|(l, n)| (l, idx[n.as_str()]))
            .collect();
        let mut rows = Vec::with_capacity(locs.len());
        for (a, (la, na)) in locs.iter().enumerate() {
            let dist = dijkstra(&graph, *na, None, |e| *e.weight());
            let mut row = Vec::with_capacity(locs.len());
            for (b, (lb, nb)) in locs.iter().enumerate() {
                if a == b {
                    row.push(0.0);
                    continue;
                }
                match dist.get(nb) {
                    Some(d) => row.push(*d),
                    None => return Err(SpatialError::Disconnected((*la).clone(), (*lb).clone())),
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

pub fn load_spatial_graph(path: &Path) -> Result<SpatialGraph, SpatialError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpatialError::Io {
        path: path.display().to_string(),
        source,
    })?;
    SpatialGraph::from_json(&text)
}

/// Symmetric metric over locations, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<LocationId>,
    index: HashMap<LocationId, usize>,
    dist: Vec<f64>,
}

const METRIC_TOL: f64 = 1e-9;

impl DistanceMatrix {
    /// Builds a matrix from explicit rows and checks the metric invariants.
    pub fn from_rows(ids: Vec<LocationId>, rows: Vec<Vec<f64>>) -> Result<Self, SpatialError> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(SpatialError::NotMetric("matrix shape mismatch".into()));
        }
        let index = ids.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect::<HashMap<_, _>>();
        if index.len() != n {
            return Err(SpatialError::NotMetric("duplicate location id".into()));
        }
        let m = Self {
            ids,
            index,
            dist: rows.into_iter().flatten().collect(),
        };
        m.check_metric()?;
        Ok(m)
    }

    /// Builds a matrix from a pairwise distance function over `ids`.
    pub fn from_fn(
        ids: Vec<LocationId>,
        f: impl Fn(&LocationId, &LocationId) -> f64,
    ) -> Result<Self, SpatialError> {
        let rows = ids
            .iter()
            .map(|a| ids.iter().map(|b| if a == b { 0.0 } else { f(a, b) }).collect())
            .collect();
        Self::from_rows(ids, rows)
    }

    fn check_metric(&self) -> Result<(), SpatialError> {
        let n = self.ids.len();
        for a in 0..n {
            if self.at(a, a) != 0.0 {
                return Err(SpatialError::NotMetric(format!("d({0},{0}) != 0", self.ids[a])));
            }
            for b in 0..n {
                let d = self.at(a, b);
                if !d.is_finite() || d < 0.0 {
                    return Err(SpatialError::NotMetric(format!(
                        "d({},{}) = {d}",
                        self.ids[a], self.ids[b]
                    )));
                }
                if (d - self.at(b, a)).abs() > METRIC_TOL {
                    return Err(SpatialError::NotMetric(format!(
                        "asymmetric at ({},{})",
                        self.ids[a], self.ids[b]
                    )));
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.at(a, c) > self.at(a, b) + self.at(b, c) + METRIC_TOL * (1.0 + self.at(a, c)) {
                        return Err(SpatialError::NotMetric(format!(
                            "triangle inequality fails on ({},{},{})",
                            self.ids[a], self.ids[b], self.ids[c]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.ids.len() + b]
    }

    pub fn ids(&self) -> &[LocationId] {
        &self.ids
    }

    pub fn contains(&self, l: &LocationId) -> bool {
        self.index.contains_key(l)
    }

    /// Distance between two locations, or `None` if either is unknown.
    pub fn get(&self, a: &LocationId, b: &LocationId) -> Option<f64> {
        Some(self.at(*self.index.get(a)?, *self.index.get(b)?))
    }

    /// Distance between two locations; panics on unknown ids.
    pub fn dist(&self, a: &LocationId, b: &LocationId) -> f64 {
        self.get(a, b)
            .unwrap_or_else(|| panic!("distance requested for unknown location pair ({a},{b})"))
    }

    /// Largest pairwise distance within `set`.
    pub fn diameter<'a>(&self, set: impl IntoIterator<Item = &'a LocationId>) -> f64 {
        let members: Vec<usize> = set.into_iter().filter_map(|l| self.index.get(l).copied()).collect();
        let mut best = 0.0f64;
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                best = best.max(self.at(a, b));
            }
        }
        best
    }
}

pub fn shortest_path_metric(g: &SpatialGraph) -> Result<DistanceMatrix, SpatialError> {
    let rows = g.distances_from_locations()?;
    DistanceMatrix::from_rows(g.location_map.keys().cloned().collect(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(nodes: &[&str], edges: &[(&str, &str, f64)], map: &[(&str, &str)]) -> SpatialGraph {
        SpatialGraph {
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(a, b, l)| (a.to_string(), b.to_string(), *l)).collect(),
            location_map: map.iter().map(|(l, n)| (LocationId::new(*l), n.to_string())).collect(),
        }
    }

    #[test]
    fn two_nodes_one_edge() {
        let g = graph(&["a", "b"], &[("a", "b", 5.0)], &[("la", "a"), ("lb", "b")]);
        g.check().unwrap();
        let d = shortest_path_metric(&g).unwrap();
        assert_eq!(d.dist(&"la".into(), &"lb".into()), 5.0);
    }

    #[test]
    fn disconnected_location_is_named() {
        let g = graph(&["a", "b", "c"], &[("a", "b", 5.0)], &[("la", "a"), ("lc", "c")]);
        match g.check() {
            Err(SpatialError::Disconnected(a, b)) => {
                assert!(a.as_str() == "lc" || b.as_str() == "lc");
            }
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_edge_rejected() {
        let text = r#"{"nodes":["a","b"],"edges":[["a","b",0]],"location_map":{"la":"a"}}"#;
        assert!(matches!(SpatialGraph::from_json(text), Err(SpatialError::Parse(_))));
    }

    #[test]
    fn path_and_triangle_distances() {
        let g = graph(
            &["a", "b", "c"],
            &[("a", "b", 5.0), ("b", "c", 7.0)],
            &[("a", "a"), ("b", "b"), ("c", "c")],
        );
        let d = shortest_path_metric(&g).unwrap();
        assert_eq!(d.dist(&"a".into(), &"c".into()), 12.0);

        let g = graph(
            &["a", "b", "c"],
            &[("a", "b", 3.0), ("b", "c", 4.0), ("a", "c", 10.0)],
            &[("a", "a"), ("b", "b"), ("c", "c")],
        );
        let d = shortest_path_metric(&g).unwrap();
        assert_eq!(d.dist(&"a".into(), &"c".into()), 7.0);
        for l in d.ids() {
            assert_eq!(d.dist(l, l), 0.0);
        }
    }

    #[test]
    fn hallway_nodes_need_no_mapping() {
        let g = graph(
            &["h1", "h2", "r1", "r2"],
            &[("h1", "h2", 4.0), ("r1", "h1", 1.0), ("r2", "h2", 1.5)],
            &[("room1", "r1"), ("room2", "r2")],
        );
        let d = shortest_path_metric(&g).unwrap();
        assert_eq!(d.ids().len(), 2);
        assert_eq!(d.dist(&"room1".into(), &"room2".into()), 6.5);
    }

    #[test]
    fn explicit_matrix_must_be_metric() {
        let ids = vec![LocationId::new("a"), LocationId::new("b"), LocationId::new("c")];
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(DistanceMatrix::from_rows(ids.clone(), bad).is_err());
        let asym = vec![vec![0.0, 1.0, 1.0], vec![2.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        assert!(DistanceMatrix::from_rows(ids, asym).is_err());
    }

    proptest::proptest! {
        #[test]
        fn metric_is_invariant_under_node_relabeling(
            lens in proptest::collection::vec(1.0f64..20.0, 5),
            chords in proptest::collection::vec((0usize..6, 0usize..6, 1.0f64..30.0), 0..6),
        ) {
            // A path 0-1-...-5 plus random chords, with nodes renamed by a fixed permutation.
            let perm = [3usize, 5, 0, 4, 1, 2];
            let mut edges: Vec<(usize, usize, f64)> = lens.iter().enumerate().map(|(i, &l)| (i, i + 1, l)).collect();
            edges.extend(chords.into_iter().filter(|(a, b, _)| a != b));
            let build = |name: &dyn Fn(usize) -> String| SpatialGraph {
                nodes: (0..6).map(name).collect(),
                edges: edges.iter().map(|&(a, b, l)| (name(a), name(b), l)).collect(),
                location_map: (0..6).map(|i| (LocationId::new(format!("l{i}")), name(i))).collect(),
            };
            let plain = shortest_path_metric(&build(&|i| format!("n{i}"))).unwrap();
            let renamed = shortest_path_metric(&build(&|i| format!("m{}", perm[i]))).unwrap();
            for a in plain.ids() {
                for b in plain.ids() {
                    proptest::prop_assert_eq!(plain.dist(a, b), renamed.dist(a, b));
                    for c in plain.ids() {
                        proptest::prop_assert!(plain.dist(a, c) <= plain.dist(a, b) + plain.dist(b, c) + 1e-9);
                    }
                }
            }
        }
    }
}
