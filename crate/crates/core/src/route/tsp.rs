//! Fixed-endpoint Hamiltonian path heuristic. A dummy vertex joined to the
//! start and end at zero cost turns the path problem into a cycle, which is
//! built by greedy edge insertion (nearest fragment) and then optionally
//! refined with 2-opt moves that keep both endpoints in place.

use super::simplified::{SimplifiedGraph, END, START};
use crate::polyline::dist;

const IMPROVEMENT_EPS: f64 = 1e-12;

/// Visiting order over simplified vertices, from `START` to `END`. Equal
/// weights are broken by Euclidean distance between the vertices.
pub fn solve_tsp(sg: &SimplifiedGraph, refine: bool) -> Vec<usize> {
    let n = sg.len();
    let euclid: Vec<f64> = (0..n * n).map(|k| dist(sg.positions[k / n], sg.positions[k % n])).collect();
    let order = nearest_fragment(&sg.cost, Some(&euclid), n, START, END);
    if refine {
        two_opt(&sg.cost, n, order)
    } else {
        order
    }
}

/// Sum of consecutive weights along `order` in an `n x n` matrix.
pub fn path_cost(cost: &[f64], n: usize, order: &[usize]) -> f64 {
    order.windows(2).map(|w| cost[w[0] * n + w[1]]).sum()
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Hamiltonian path from `start` to `end` over a symmetric `n x n` matrix.
pub fn fixed_endpoint_path(cost: &[f64], n: usize, start: usize, end: usize, refine: bool) -> Vec<usize> {
    assert!(start < n && end < n && start != end, "endpoints must be distinct vertices");
    assert_eq!(cost.len(), n * n);
    let order = nearest_fragment(cost, None, n, start, end);
    if refine {
        two_opt(cost, n, order)
    } else {
        order
    }
}

fn nearest_fragment(cost: &[f64], tie: Option<&[f64]>, n: usize, start: usize, end: usize) -> Vec<usize> {
    // Vertex 0 is the dummy; simplified vertex v becomes v + 1.
    let m = n + 1;
    let max = cost.iter().copied().fold(0.0, f64::max);
    let sentinel = m as f64 * (max + 1.0);
    let weight = |i: usize, j: usize| -> f64 {
        if i == 0 {
            if j - 1 == start || j - 1 == end {
                0.0
            } else {
                sentinel
            }
        } else {
            cost[(i - 1) * n + (j - 1)]
        }
    };
    let secondary = |i: usize, j: usize| match tie {
        Some(t) if i > 0 => t[(i - 1) * n + (j - 1)],
        _ => 0.0,
    };
    let mut edges: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            edges.push((weight(i, j), secondary(i, j), i, j));
        }
    }
    edges.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });

    let mut degree = vec![0u8; m];
    let mut parent: Vec<usize> = (0..m).collect();
    let mut adj = vec![Vec::with_capacity(2); m];
    let mut added = 0;
    for &(_, _, i, j) in &edges {
        if added == m - 1 {
            break;
        }
        if degree[i] >= 2 || degree[j] >= 2 {
            continue;
        }
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri == rj {
            continue;
        }
        parent[ri] = rj;
        degree[i] += 1;
        degree[j] += 1;
        adj[i].push(j);
        adj[j].push(i);
        added += 1;
    }
    // Close the Hamiltonian path into a tour. The dummy holds both
    // zero-cost edges, so cutting it out leaves a start-to-end path.
    let ends: Vec<usize> = (0..m).filter(|&v| degree[v] < 2).collect();
    if let [p, q] = ends[..] {
        adj[p].push(q);
        adj[q].push(p);
    }
    let mut order = Vec::with_capacity(n);
    let mut prev = 0;
    let mut cur = start + 1;
    while cur != 0 {
        order.push(cur - 1);
        let next = adj[cur].iter().copied().find(|&x| x != prev).unwrap_or(0);
        prev = cur;
        cur = next;
    }
    debug_assert_eq!(order.len(), n);
    debug_assert_eq!(order.first(), Some(&start));
    debug_assert_eq!(order.last(), Some(&end));
    order
}

/// First-improvement 2-opt on interior segments; endpoints stay put.
pub fn two_opt(cost: &[f64], n: usize, mut order: Vec<usize>) -> Vec<usize> {
    let len = order.len();
    if len < 4 {
        return order;
    }
    let c = |a: usize, b: usize| cost[a * n + b];
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..len - 2 {
            for j in i + 2..len - 1 {
                let (a, b, x, y) = (order[i], order[i + 1], order[j], order[j + 1]);
                let delta = c(a, x) + c(b, y) - c(a, b) - c(x, y);
                if delta < -IMPROVEMENT_EPS {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    order
}
