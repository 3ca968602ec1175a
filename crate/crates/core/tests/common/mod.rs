//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbtrack::graph::Rag;
use sbtrack::phantom::{generate_phantom, Phantom, PhantomSpec};
use sbtrack::supervoxel::LabelVolume;
use sbtrack::volume::{Grid, Volume};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph with `n` nodes, random centroids in a 100 mm cube and each
/// pair joined with probability `p` at an integer-valued cost in 1..=9.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Rag {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(1..=9) as f64));
            }
        }
    }
    let centroids: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect();
    Rag::from_edges(n, &edges).unwrap().with_centroids(&centroids)
}

/// Minimum cost over all simple paths from `s` to `t` (infinite when none).
pub fn brute_shortest(rag: &Rag, s: usize, t: usize) -> f64 {
    fn go(rag: &Rag, u: usize, t: usize, seen: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if u == t {
            *best = best.min(acc);
            return;
        }
        for &(v, c) in rag.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                go(rag, v, t, seen, acc + c, best);
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; rag.node_count()];
    seen[s] = true;
    let mut best = f64::INFINITY;
    go(rag, s, t, &mut seen, 0.0, &mut best);
    best
}

/// Floyd-Warshall all-pairs distances.
pub fn all_pairs(rag: &Rag) -> Vec<Vec<f64>> {
    let n = rag.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0.0;
        for &(v, c) in rag.neighbors(u) {
            row[v] = row[v].min(c);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Cheapest walk from `s` to `t` through every node of `must`, as the minimum
/// over visiting orders of summed pairwise shortest-path costs.
pub fn brute_constrained(rag: &Rag, s: usize, t: usize, must: &[usize]) -> f64 {
    let d = all_pairs(rag);
    permutations(must)
        .into_iter()
        .map(|order| {
            let mut walk = vec![s];
            walk.extend(order);
            walk.push(t);
            walk.windows(2).map(|w| d[w[0]][w[1]]).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Optimal fixed-endpoint Hamiltonian path cost by permutation enumeration.
pub fn brute_tsp(cost: &[f64], n: usize, start: usize, end: usize) -> f64 {
    let inner: Vec<usize> = (0..n).filter(|&v| v != start && v != end).collect();
    permutations(&inner)
        .into_iter()
        .map(|p| {
            let mut order = vec![start];
            order.extend(p);
            order.push(end);
            order.windows(2).map(|w| cost[w[0] * n + w[1]]).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Squared distance in voxel units from each voxel to the nearest background
/// voxel, by scanning every background voxel. Voxels beyond the grid count
/// as background, so the nearest of those lies straight across a face.
pub fn brute_sq_edt(mask: &Volume) -> Vec<f64> {
    let g = mask.grid();
    let bg: Vec<[usize; 3]> = (0..g.len()).filter(|&i| mask.data()[i] == 0.0).map(|i| g.coords(i)).collect();
    (0..g.len())
        .map(|i| {
            if mask.data()[i] == 0.0 {
                return 0.0;
            }
            let c = g.coords(i);
            let border = (0..3)
                .map(|a| ((c[a] + 1).min(g.dims[a] - c[a]) as f64).powi(2))
                .fold(f64::INFINITY, f64::min);
            bg.iter()
                .map(|b| (0..3).map(|a| (c[a] as f64 - b[a] as f64).powi(2)).sum::<f64>())
                .fold(border, f64::min)
        })
        .collect()
}

pub fn random_mask(rng: &mut ChaCha8Rng, n: usize, fill: f64) -> Volume {
    let grid = Grid::isotropic([n, n, n], 1.0).unwrap();
    Volume::from_fn(grid, |_| if rng.random_bool(fill) { 1.0 } else { 0.0 })
}

pub fn straight_tube() -> Phantom {
    generate_phantom(&PhantomSpec {
        dims: [96, 48, 48],
        ..PhantomSpec::default()
    })
    .unwrap()
}

/// Serpentine with touching loops and a faint shared wall.
pub fn folded_spec(seed: u64) -> PhantomSpec {
    PhantomSpec {
        dims: [96, 96, 96],
        bends: 3,
        touch_pairs: 3,
        wall_intensity: 250.0,
        noise_sigma: 30.0,
        seed,
        ..PhantomSpec::default()
    }
}

/// Default tracking config for an in-memory phantom, endpoints at the ends
/// of the reference path.
pub fn phantom_tracking(p: &Phantom) -> (sbtrack::pipeline::Inputs, sbtrack::TrackingConfig) {
    let cfg = sbtrack::pipeline::phantom_config(p, std::path::Path::new("."));
    (sbtrack::pipeline::Inputs::from_phantom(p), cfg)
}

/// Number of 26-connected pieces per label.
pub fn pieces_per_label(labels: &LabelVolume) -> Vec<usize> {
    let g = labels.grid();
    let [nx, ny, nz] = g.dims;
    let mut seen = vec![false; g.len()];
    let mut pieces = vec![0usize; labels.label_count()];
    for s in 0..g.len() {
        if seen[s] {
            continue;
        }
        let l = labels.label_at(s);
        pieces[l as usize] += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let [i, j, k] = g.coords(u).map(|c| c as isize);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (x, y, z) = (i + dx, j + dy, k + dz);
                        if x < 0 || y < 0 || z < 0 || x >= nx as isize || y >= ny as isize || z >= nz as isize {
                            continue;
                        }
                        let v = g.index(x as usize, y as usize, z as usize);
                        if !seen[v] && labels.label_at(v) == l {
                            seen[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
            }
        }
    }
    pieces
}

/// Per label pair: summed face values and face count, by scanning every
/// 6-adjacent voxel pair.
pub fn brute_boundaries(labels: &LabelVolume, wall: &Volume) -> BTreeMap<(u32, u32), (f64, usize)> {
    let g = labels.grid();
    let [nx, ny, nz] = g.dims;
    let mut out = BTreeMap::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let a = g.index(i, j, k);
                for (di, dj, dk) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    let (x, y, z) = (i + di, j + dj, k + dk);
                    if x >= nx || y >= ny || z >= nz {
                        continue;
                    }
                    let b = g.index(x, y, z);
                    let (la, lb) = (labels.label_at(a), labels.label_at(b));
                    if la == lb {
                        continue;
                    }
                    let face = (wall.data()[a] as f64 + wall.data()[b] as f64) / 2.0;
                    let e = out.entry((la.min(lb), la.max(lb))).or_insert((0.0, 0));
                    e.0 += face;
                    e.1 += 1;
                }
            }
        }
    }
    out
}
