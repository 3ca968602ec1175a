//! Complete graph over the start, end and must-pass nodes. Pairs closer than
//! `delta` in space are weighted by their normalized graph distance, farther
//! pairs by normalized Euclidean distance, so every nearby hop costs at most
//! one and every far hop costs more.

use std::collections::HashMap;

use rayon::prelude::*;

use super::dijkstra::dijkstra;
use crate::error::{Error, Result};
use crate::graph::Rag;
use crate::polyline::{dist, Point};

#[derive(Debug, Clone)]
pub struct SimplifiedGraph {
    /// RAG node per simplified vertex: `[start, end, must-pass...]`.
    pub nodes: Vec<usize>,
    pub positions: Vec<Point>,
    /// Row-major `n x n` edge weights.
    pub cost: Vec<f64>,
    /// Largest finite graph distance among pairs within `delta` (`M`).
    pub normalizer: f64,
    pub delta: f64,
    /// Shortest RAG walk and its cost for pairs within `delta`, keyed `(i, j)`
    /// with `i < j`, stored from `i` to `j`.
    paths: HashMap<(usize, usize), (f64, Vec<usize>)>,
}

pub const START: usize = 0;
pub const END: usize = 1;

impl SimplifiedGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.len() + j]
    }

    /// Cached RAG walk from simplified vertex `i` to `j`, oriented.
    pub fn cached_path(&self, i: usize, j: usize) -> Option<(f64, Vec<usize>)> {
        if i < j {
            self.paths.get(&(i, j)).cloned()
        } else {
            self.paths.get(&(j, i)).map(|(c, p)| (*c, p.iter().rev().copied().collect()))
        }
    }

    pub fn cached_pairs(&self) -> usize {
        self.paths.len()
    }
}

/// Edge weights from pairwise Euclidean distances and graph distances
/// (`None` where unreachable). Returns the matrix and the normalizer `M`.
pub fn simplified_costs(euclid: &[f64], graph: &[Option<f64>], n: usize, delta: f64) -> (Vec<f64>, f64) {
    let near = |k: usize| euclid[k] <= delta;
    let normalizer = (0..n * n)
        .filter(|&k| k / n != k % n && near(k))
        .filter_map(|k| graph[k])
        .fold(0.0, f64::max);
    let cost = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                0.0
            } else if !near(k) {
                euclid[k] / delta
            } else {
                match graph[k] {
                    Some(_) if normalizer == 0.0 => 0.0,
                    Some(g) => g / normalizer,
                    None => euclid[k] / delta + 1.0,
                }
            }
        })
        .collect();
    (cost, normalizer)
}

/// Builds the simplified graph. `must_pass` must not contain `start` or `end`.
pub fn build_simplified_graph(
    rag: &Rag,
    start: usize,
    end: usize,
    must_pass: &[usize],
    delta: f64,
) -> Result<SimplifiedGraph> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    if start == end {
        return Err(Error::InvalidInput(format!("start and end are the same node {start}")));
    }
    let mut nodes = vec![start, end];
    nodes.extend_from_slice(must_pass);
    for &v in &nodes {
        if v >= rag.node_count() {
            return Err(Error::InvalidNode(v));
        }
    }
    let mut seen = nodes.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != nodes.len() {
        return Err(Error::InvalidInput("simplified graph vertices must be distinct".into()));
    }

    let n = nodes.len();
    let positions: Vec<Point> = nodes.iter().map(|&v| rag.centroid(v)).collect();
    let euclid: Vec<f64> = (0..n * n).map(|k| dist(positions[k / n], positions[k % n])).collect();
    let trees = nodes
        .par_iter()
        .map(|&v| dijkstra(rag, v))
        .collect::<Result<Vec<_>>>()?;
    let graph: Vec<Option<f64>> = (0..n * n)
        .map(|k| {
            let c = trees[k / n].cost[nodes[k % n]];
            c.is_finite().then_some(c)
        })
        .collect();
    let (cost, normalizer) = simplified_costs(&euclid, &graph, n, delta);

    let mut paths = HashMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if euclid[i * n + j] <= delta {
                if let Some(p) = trees[i].path_to(nodes[j]) {
                    paths.insert((i, j), (trees[i].cost[nodes[j]], p));
                }
            }
        }
    }
    Ok(SimplifiedGraph {
        nodes,
        positions,
        cost,
        normalizer,
        delta,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Rag {
        Rag::from_edges(3, &[(0, 1, 5.0), (0, 2, 10.0), (1, 2, 10.0)])
            .unwrap()
            .with_centroids(&[[0.0; 3], [30.0, 0.0, 0.0], [0.0, 40.0, 0.0]])
    }

    #[test]
    fn near_pairs_use_normalized_graph_distance() {
        let sg = build_simplified_graph(&triangle(), 0, 1, &[2], 50.0).unwrap();
        assert_eq!(sg.normalizer, 10.0);
        assert!((sg.cost(START, END) - 0.5).abs() < 1e-12);
        assert!((sg.cost(START, 2) - 1.0).abs() < 1e-12);
        assert_eq!(sg.cost(1, 1), 0.0);
        assert_eq!(sg.cached_path(2, 0).unwrap().1, vec![2, 0]);
        assert_eq!(sg.cached_pairs(), 3);
    }

    #[test]
    fn far_pairs_use_normalized_euclidean_distance() {
        let rag = Rag::from_edges(2, &[(0, 1, 1.0)])
            .unwrap()
            .with_centroids(&[[0.0; 3], [75.0, 0.0, 0.0]]);
        let sg = build_simplified_graph(&rag, 0, 1, &[], 50.0).unwrap();
        assert!((sg.cost(0, 1) - 1.5).abs() < 1e-12);
        assert!(sg.cached_path(0, 1).is_none());
    }

    #[test]
    fn unreachable_near_pair_costs_more_than_one() {
        let (c, m) = simplified_costs(&[0.0, 20.0, 20.0, 0.0], &[Some(0.0), None, None, Some(0.0)], 2, 50.0);
        assert_eq!(m, 0.0);
        assert!((c[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn zero_normalizer_gives_zero_costs() {
        let (c, _) = simplified_costs(&[0.0, 1.0, 1.0, 0.0], &[Some(0.0); 4], 2, 5.0);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let rag = triangle();
        assert!(build_simplified_graph(&rag, 0, 0, &[], 50.0).is_err());
        assert!(build_simplified_graph(&rag, 0, 1, &[1], 50.0).is_err());
        assert!(build_simplified_graph(&rag, 0, 1, &[], 0.0).is_err());
        assert!(matches!(build_simplified_graph(&rag, 0, 9, &[], 5.0), Err(Error::InvalidNode(9))));
    }
}
