//! Region adjacency graph over supervoxels.
//!
//! Two supervoxels are adjacent when they share at least one voxel face. The
//! edge cost is the mean wall-map value over the shared faces, each face
//! valued by the average of its two voxels.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::supervoxel::LabelVolume;
use crate::volume::{write_atomic, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct RagNode {
    /// Label of the supervoxel this node stands for.
    pub supervoxel: u32,
    pub centroid: [f64; 3],
    pub voxels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagEdge {
    /// Endpoints with `a < b`.
    pub a: usize,
    pub b: usize,
    pub cost: f64,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rag {
    nodes: Vec<RagNode>,
    edges: Vec<RagEdge>,
    offsets: Vec<usize>,
    adjacent: Vec<(usize, f64)>,
}

impl Rag {
    /// Builds a graph from explicit nodes and edges. Edges are normalised to
    /// `a < b`; self-edges, duplicates and invalid costs are rejected.
    pub fn new(nodes: Vec<RagNode>, mut edges: Vec<RagEdge>) -> Result<Self> {
        for e in &mut edges {
            if e.a == e.b {
                return Err(Error::InvalidInput(format!("self-edge on node {}", e.a)));
            }
            if e.a.max(e.b) >= nodes.len() {
                return Err(Error::InvalidNode(e.a.max(e.b)));
            }
            if !(e.cost >= 0.0 && e.cost.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "edge {}-{} has cost {}",
                    e.a, e.b, e.cost
                )));
            }
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        if let Some(w) = edges.windows(2).find(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b)) {
            return Err(Error::InvalidInput(format!(
                "duplicate edge {}-{}",
                w[0].a, w[0].b
            )));
        }

        let n = nodes.len();
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut adjacent = vec![(0usize, 0.0f64); offsets[n]];
        for e in &edges {
            adjacent[fill[e.a]] = (e.b, e.cost);
            fill[e.a] += 1;
            adjacent[fill[e.b]] = (e.a, e.cost);
            fill[e.b] += 1;
        }
        for i in 0..n {
            adjacent[offsets[i]..offsets[i + 1]].sort_by_key(|&(v, _)| v);
        }
        Ok(Rag {
            nodes,
            edges,
            offsets,
            adjacent,
        })
    }

    /// Convenience constructor for hand-written graphs: unit-less nodes at
    /// the origin unless positions are supplied later.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let nodes = (0..n)
            .map(|i| RagNode {
                supervoxel: i as u32,
                centroid: [0.0; 3],
                voxels: 1,
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(a, b, cost)| RagEdge {
                a,
                b,
                cost,
                faces: 1,
            })
            .collect();
        Rag::new(nodes, edges)
    }

    pub fn nodes(&self) -> &[RagNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RagEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacent[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn edge_cost(&self, a: usize, b: usize) -> Option<f64> {
        self.neighbors(a)
            .binary_search_by_key(&b, |&(v, _)| v)
            .ok()
            .map(|i| self.neighbors(a)[i].1)
    }

    pub fn centroid(&self, u: usize) -> [f64; 3] {
        self.nodes[u].centroid
    }

    /// Node index per supervoxel label (`None` when pruned).
    pub fn label_map(&self, label_count: usize) -> Vec<Option<usize>> {
        let mut map = vec![None; label_count];
        for (i, n) in self.nodes.iter().enumerate() {
            if (n.supervoxel as usize) < label_count {
                map[n.supervoxel as usize] = Some(i);
            }
        }
        map
    }

    /// Total cost of a node walk; `None` if two consecutive nodes are not adjacent.
    pub fn walk_cost(&self, walk: &[usize]) -> Option<f64> {
        walk.windows(2)
            .map(|w| self.edge_cost(w[0], w[1]))
            .sum::<Option<f64>>()
    }

    pub fn with_centroids(mut self, centroids: &[[f64; 3]]) -> Self {
        for (n, c) in self.nodes.iter_mut().zip(centroids) {
            n.centroid = *c;
        }
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(
                s,
                "node {i} {} {} {} {}",
                n.centroid[0], n.centroid[1], n.centroid[2], n.voxels
            )
            .unwrap();
        }
        for e in &self.edges {
            writeln!(s, "edge {} {} {} {}", e.a, e.b, e.cost, e.faces).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::InvalidInput(format!("rag line {}: {line:?}", n + 1));
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
            match t.as_slice() {
                [] => {}
                ["node", id, x, y, z, count] => {
                    if u(id)? != nodes.len() {
                        return Err(bad());
                    }
                    nodes.push(RagNode {
                        supervoxel: u(id)? as u32,
                        centroid: [f(x)?, f(y)?, f(z)?],
                        voxels: u(count)?,
                    });
                }
                ["edge", a, b, cost, faces] => edges.push(RagEdge {
                    a: u(a)?,
                    b: u(b)?,
                    cost: f(cost)?,
                    faces: u(faces)?,
                }),
                _ => return Err(bad()),
            }
        }
        Rag::new(nodes, edges)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

pub fn build_rag(labels: &LabelVolume, wall_map: &Volume) -> Result<Rag> {
    let grid = labels.grid();
    if !grid.same_geometry(wall_map.grid()) {
        return Err(Error::GridMismatch(format!(
            "labels {:?} vs wall map {:?}",
            grid.dims,
            wall_map.dims()
        )));
    }
    let n = labels.label_count();
    let lab = labels.labels();
    let wall = wall_map.data();

    let mut pos_sum = vec![[0.0f64; 3]; n];
    let mut count = vec![0usize; n];
    for idx in 0..grid.len() {
        let l = lab[idx] as usize;
        let p = grid.position(idx);
        for a in 0..3 {
            pos_sum[l][a] += p[a];
        }
        count[l] += 1;
    }

    let strides = [1, grid.dims[0], grid.dims[0] * grid.dims[1]];
    let mut faces: HashMap<(u32, u32), (f64, usize)> = HashMap::new();
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        for a in 0..3 {
            if c[a] + 1 >= grid.dims[a] {
                continue;
            }
            let nb = idx + strides[a];
            let (la, lb) = (lab[idx], lab[nb]);
            if la == lb {
                continue;
            }
            let key = (la.min(lb), la.max(lb));
            let value = 0.5 * (wall[idx] as f64 + wall[nb] as f64);
            let e = faces.entry(key).or_insert((0.0, 0));
            e.0 += value;
            e.1 += 1;
        }
    }

    let nodes = (0..n)
        .map(|l| RagNode {
            supervoxel: l as u32,
            centroid: [
                pos_sum[l][0] / count[l] as f64,
                pos_sum[l][1] / count[l] as f64,
                pos_sum[l][2] / count[l] as f64,
            ],
            voxels: count[l],
        })
        .collect();
    let mut keys: Vec<_> = faces.into_iter().collect();
    keys.sort_by_key(|(k, _)| *k);
    let edges = keys
        .into_iter()
        .map(|((a, b), (sum, cnt))| RagEdge {
            a: a as usize,
            b: b as usize,
            cost: sum / cnt as f64,
            faces: cnt,
        })
        .collect();
    Rag::new(nodes, edges)
}

/// Drops nodes whose fraction of voxels inside `segmentation` is below
/// `min_inside_fraction`, re-indexing the survivors in their original order.
pub fn mask_nodes(
    rag: &Rag,
    segmentation: &Volume,
    labels: &LabelVolume,
    min_inside_fraction: f64,
) -> Result<Rag> {
    if !labels.grid().same_geometry(segmentation.grid()) {
        return Err(Error::GridMismatch(format!(
            "labels {:?} vs segmentation {:?}",
            labels.grid().dims,
            segmentation.dims()
        )));
    }
    if let Some(v) = segmentation.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!(
            "segmentation must be binary, found value {v}"
        )));
    }
    let mut inside = vec![0usize; labels.label_count()];
    for (l, &m) in labels.labels().iter().zip(segmentation.data()) {
        if m == 1.0 {
            inside[*l as usize] += 1;
        }
    }
    let mut remap = vec![None; rag.node_count()];
    let mut nodes = Vec::new();
    for (i, node) in rag.nodes().iter().enumerate() {
        let frac = inside
            .get(node.supervoxel as usize)
            .map_or(0.0, |&c| c as f64 / node.voxels as f64);
        if frac >= min_inside_fraction {
            remap[i] = Some(nodes.len());
            nodes.push(node.clone());
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyGraph(format!(
            "no supervoxel has at least {:.0}% of its voxels inside the segmentation; \
             check that the mask and the labels describe the same volume",
            min_inside_fraction * 100.0
        )));
    }
    let edges = rag
        .edges()
        .iter()
        .filter_map(|e| match (remap[e.a], remap[e.b]) {
            (Some(a), Some(b)) => Some(RagEdge {
                a,
                b,
                cost: e.cost,
                faces: e.faces,
            }),
            _ => None,
        })
        .collect();
    Rag::new(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Grid;

    fn split() -> (LabelVolume, Grid) {
        let g = Grid::isotropic([4, 3, 2], 1.0).unwrap();
        let labels: Vec<u32> = (0..g.len()).map(|i| (g.coords(i)[0] >= 2) as u32).collect();
        (LabelVolume::new(g.clone(), labels).unwrap(), g)
    }

    #[test]
    fn plane_split_zero_and_constant_maps() {
        let (l, g) = split();
        let rag = build_rag(&l, &Volume::filled(g.clone(), 0.0)).unwrap();
        assert_eq!(rag.edges().len(), 1);
        assert_eq!(rag.edges()[0].cost, 0.0);
        assert_eq!(rag.edges()[0].faces, 6);
        let rag = build_rag(&l, &Volume::filled(g, 0.8)).unwrap();
        assert!((rag.edges()[0].cost - 0.8).abs() < 1e-7);
        assert_eq!(rag.nodes()[0].centroid, [1.0, 1.5, 1.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let (l, _) = split();
        let other = Volume::filled(Grid::isotropic([4, 3, 3], 1.0).unwrap(), 0.0);
        assert!(matches!(build_rag(&l, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn masking() {
        let (l, g) = split();
        let rag = build_rag(&l, &Volume::filled(g.clone(), 0.3)).unwrap();
        let full = mask_nodes(&rag, &Volume::filled(g.clone(), 1.0), &l, 0.5).unwrap();
        assert_eq!(full, rag);
        assert!(matches!(
            mask_nodes(&rag, &Volume::filled(g.clone(), 0.0), &l, 0.5),
            Err(Error::EmptyGraph(_))
        ));
        let half = Volume::from_fn(g, |[i, _, _]| (i < 2) as u8 as f32);
        let m = mask_nodes(&rag, &half, &l, 0.5).unwrap();
        assert_eq!(m.node_count(), 1);
        assert_eq!(m.nodes()[0].supervoxel, 0);
        assert!(m.edges().is_empty());
        assert_eq!(m.label_map(2), vec![Some(0), None]);
    }

    #[test]
    fn text_round_trip() {
        let rag = Rag::from_edges(3, &[(0, 1, 0.25), (2, 1, 1.5)]).unwrap();
        let back = Rag::from_text(&rag.to_text()).unwrap();
        assert_eq!(back, rag);
        assert_eq!(rag.edge_cost(1, 2), Some(1.5));
        assert_eq!(rag.edge_cost(0, 2), None);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Rag::from_edges(2, &[(0, 0, 1.0)]).is_err());
        assert!(Rag::from_edges(2, &[(0, 1, -1.0)]).is_err());
        assert!(Rag::from_edges(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(Rag::from_edges(2, &[(0, 2, 1.0)]).is_err());
    }
}
