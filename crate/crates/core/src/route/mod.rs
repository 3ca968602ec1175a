//! Path search on the adjacency graph: plain shortest path, the exact
//! must-pass solver for small sets, and the simplified-graph tour that scales
//! to many must-pass nodes.

mod dijkstra;
mod exact;
mod simplified;
mod tsp;

use std::fmt::Write as _;

pub use dijkstra::{dijkstra, ShortestPaths};
pub use exact::{constrained_dijkstra_exact, EXACT_MUST_PASS_LIMIT};
pub use simplified::{build_simplified_graph, simplified_costs, SimplifiedGraph, END, START};
pub use tsp::{fixed_endpoint_path, path_cost, solve_tsp, two_opt};

use crate::error::{Error, Result};
use crate::graph::Rag;
use crate::polyline::{dist, Polyline};

/// How a leg of a route was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegSource {
    /// One search over the whole route.
    Direct,
    /// Walk cached while building the simplified graph.
    Cached,
    /// Walk found by a fresh search during expansion.
    Recomputed,
    /// No graph walk exists; joined by a straight segment.
    StraightLine,
}

impl LegSource {
    pub fn name(self) -> &'static str {
        match self {
            LegSource::Direct => "direct",
            LegSource::Cached => "cached",
            LegSource::Recomputed => "recomputed",
            LegSource::StraightLine => "straight",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub from: usize,
    pub to: usize,
    pub source: LegSource,
    /// Graph cost, `None` for straight legs.
    pub cost: Option<f64>,
    pub walk_length: f64,
    pub straight_length: f64,
}

impl Leg {
    pub(crate) fn graph(from: usize, to: usize, source: LegSource, cost: f64, rag: &Rag, walk: &[usize]) -> Leg {
        Leg {
            from,
            to,
            source,
            cost: Some(cost),
            walk_length: walk.windows(2).map(|w| dist(rag.centroid(w[0]), rag.centroid(w[1]))).sum(),
            straight_length: dist(rag.centroid(from), rag.centroid(to)),
        }
    }

    fn straight(from: usize, to: usize, rag: &Rag) -> Leg {
        let d = dist(rag.centroid(from), rag.centroid(to));
        Leg {
            from,
            to,
            source: LegSource::StraightLine,
            cost: None,
            walk_length: d,
            straight_length: d,
        }
    }
}

/// A node walk through the graph and its centroid polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub polyline: Polyline,
    /// Sum of graph costs over all non-straight legs.
    pub cost: f64,
    pub legs: Vec<Leg>,
}

impl Route {
    pub(crate) fn from_walk(rag: &Rag, nodes: Vec<usize>, cost: f64, legs: Vec<Leg>) -> Result<Route> {
        let points = nodes.iter().map(|&v| rag.centroid(v)).collect();
        let polyline = Polyline::from_points_dedup(points)
            .map_err(|_| Error::InvalidInput("route collapses to a single point".into()))?;
        Ok(Route {
            nodes,
            polyline,
            cost,
            legs,
        })
    }

    pub fn straight_legs(&self) -> usize {
        self.legs.iter().filter(|l| l.source == LegSource::StraightLine).count()
    }

    /// Whether every leg follows graph edges.
    pub fn is_connected(&self) -> bool {
        self.straight_legs() == 0
    }

    /// Per-leg report, one `key: value` header then one line per leg.
    pub fn diagnostics(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes: {}", self.nodes.len());
        let _ = writeln!(s, "legs: {}", self.legs.len());
        let _ = writeln!(s, "straight_legs: {}", self.straight_legs());
        let _ = writeln!(s, "cost: {}", self.cost);
        let _ = writeln!(s, "length_mm: {:.3}", self.polyline.length());
        let _ = writeln!(s, "# leg from to source cost walk_mm straight_mm");
        for (k, l) in self.legs.iter().enumerate() {
            let cost = l.cost.map_or("-".to_string(), |c| format!("{c:.6}"));
            let _ = writeln!(
                s,
                "leg {k} {} {} {} {cost} {:.3} {:.3}",
                l.from,
                l.to,
                l.source.name(),
                l.walk_length,
                l.straight_length
            );
        }
        s
    }
}

/// Cheapest walk from `start` to `end`, ignoring must-pass nodes.
pub fn shortest_path_baseline(rag: &Rag, start: usize, end: usize) -> Result<Route> {
    if end >= rag.node_count() {
        return Err(Error::InvalidNode(end));
    }
    let sp = dijkstra(rag, start)?;
    let walk = sp.path_to(end).ok_or(Error::Unreachable { from: start, to: end })?;
    let cost = sp.cost[end];
    let leg = Leg::graph(start, end, LegSource::Direct, cost, rag, &walk);
    Route::from_walk(rag, walk, cost, vec![leg])
}

/// Turns a visiting order over simplified vertices into a RAG walk. Each leg
/// uses the cached walk when available, otherwise a fresh search, otherwise a
/// straight jump that is recorded in the leg list.
pub fn expand_tour(rag: &Rag, sg: &SimplifiedGraph, order: &[usize]) -> Result<Route> {
    if order.len() < 2 {
        return Err(Error::InvalidInput("tour needs at least two vertices".into()));
    }
    if let Some(&bad) = order.iter().find(|&&v| v >= sg.len()) {
        return Err(Error::InvalidInput(format!("tour vertex {bad} is not in the simplified graph")));
    }
    let mut nodes = vec![sg.nodes[order[0]]];
    let mut legs = Vec::with_capacity(order.len() - 1);
    let mut cost = 0.0;
    for w in order.windows(2) {
        let (a, b) = (sg.nodes[w[0]], sg.nodes[w[1]]);
        let found = match sg.cached_path(w[0], w[1]) {
            Some((c, walk)) => Some((c, walk, LegSource::Cached)),
            None => {
                let sp = dijkstra(rag, a)?;
                sp.path_to(b).map(|walk| (sp.cost[b], walk, LegSource::Recomputed))
            }
        };
        match found {
            Some((c, walk, source)) => {
                legs.push(Leg::graph(a, b, source, c, rag, &walk));
                cost += c;
                nodes.extend_from_slice(&walk[1..]);
            }
            None => {
                log::warn!("no graph walk between nodes {a} and {b}; joining them with a straight segment");
                legs.push(Leg::straight(a, b, rag));
                nodes.push(b);
            }
        }
    }
    Route::from_walk(rag, nodes, cost, legs)
}
