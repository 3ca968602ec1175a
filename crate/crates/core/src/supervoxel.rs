//! Adaptive-compactness SLIC supervoxels.
//!
//! Seeds sit on a regular grid of step `S = cbrt(target_volume)` mm and are
//! moved to the lowest-gradient voxel of their 3x3x3 neighbourhood. Each of
//! the fixed 10 iterations assigns every voxel inside a cluster's `±S` window
//! to the cluster minimising
//!
//! ```text
//! D = (d_spatial / S)^2 + (d_feature / m_k)^2
//! ```
//!
//! where `m_k` starts at `compactness` and is then reset every iteration to the
//! largest feature distance observed inside cluster `k`. Afterwards every
//! label keeps only its largest 26-connected piece; the remaining fragments
//! are merged into the largest adjacent supervoxel.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{encode_raw, read_raw, write_atomic, Dtype, Grid, Volume};

pub const SLIC_ITERATIONS: usize = 10;

/// Floor for the adaptive feature normaliser.
const MIN_FEATURE_SCALE: f64 = 1e-6;

const UNASSIGNED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    grid: Grid,
    labels: Vec<u32>,
    count: usize,
}

impl LabelVolume {
    /// Validates that labels are exactly `0..count` for the largest label.
    pub fn new(grid: Grid, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::DataLength {
                expected: grid.len(),
                found: labels.len(),
            });
        }
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut seen = vec![false; count];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidInput(format!(
                "labels are not contiguous: {missing} is never used"
            )));
        }
        Ok(LabelVolume { grid, labels, count })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn label_at(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    /// Voxel count per label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.count];
        for &l in &self.labels {
            s[l as usize] += 1;
        }
        s
    }

    pub fn to_volume(&self) -> Volume {
        Volume::new(
            self.grid.clone(),
            self.labels.iter().map(|&l| l as f32).collect(),
        )
        .expect("label grid matches")
    }

    fn dtype(&self) -> Dtype {
        if self.count <= u16::MAX as usize + 1 {
            Dtype::U16
        } else {
            Dtype::U32
        }
    }
}

pub fn save_labels(labels: &LabelVolume, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_raw(
        &labels.grid,
        labels.dtype(),
        labels.labels.iter().map(|&l| l as f64),
    );
    write_atomic(path.as_ref(), &bytes)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let raw = read_raw(path)?;
    let labels = raw.samples_u32().ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: "label volumes need an integer dtype".into(),
    })?;
    LabelVolume::new(raw.grid, labels)
}

#[derive(Debug, Clone)]
struct Cluster {
    center: [f64; 3],
    feature: f64,
    scale: f64,
}

fn squared_gradient(feature: &[f32], grid: &Grid, c: [usize; 3]) -> f64 {
    let mut g = 0.0;
    for a in 0..3 {
        let mut lo = c;
        let mut hi = c;
        lo[a] = c[a].saturating_sub(1);
        hi[a] = (c[a] + 1).min(grid.dims[a] - 1);
        let d = feature[grid.index(hi[0], hi[1], hi[2])] as f64
            - feature[grid.index(lo[0], lo[1], lo[2])] as f64;
        g += d * d;
    }
    g
}

fn initial_clusters(feature: &Volume, step: f64) -> Vec<Cluster> {
    let grid = feature.grid();
    let data = feature.data();
    let extent = grid.extent();
    let counts: Vec<usize> = (0..3)
        .map(|a| ((extent[a] / step).round() as usize).max(1))
        .collect();
    let seed_coord = |a: usize, s: usize| -> usize {
        let t = (s as f64 + 0.5) * grid.dims[a] as f64 / counts[a] as f64 - 0.5;
        (t.round().max(0.0) as usize).min(grid.dims[a] - 1)
    };
    let mut clusters = Vec::with_capacity(counts.iter().product());
    for sz in 0..counts[2] {
        for sy in 0..counts[1] {
            for sx in 0..counts[0] {
                let c = [seed_coord(0, sx), seed_coord(1, sy), seed_coord(2, sz)];
                let mut best = c;
                let mut best_g = squared_gradient(data, grid, c);
                for dz in -1isize..=1 {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let n = [
                                c[0] as isize + dx,
                                c[1] as isize + dy,
                                c[2] as isize + dz,
                            ];
                            if (0..3).any(|a| n[a] < 0 || n[a] >= grid.dims[a] as isize) {
                                continue;
                            }
                            let n = [n[0] as usize, n[1] as usize, n[2] as usize];
                            let g = squared_gradient(data, grid, n);
                            if g < best_g {
                                best_g = g;
                                best = n;
                            }
                        }
                    }
                }
                clusters.push(Cluster {
                    center: grid.position_of(best),
                    feature: data[grid.index(best[0], best[1], best[2])] as f64,
                    scale: 0.0,
                });
            }
        }
    }
    clusters
}

pub fn slic_supervoxels(feature: &Volume, target_volume: f64, compactness: f64) -> Result<LabelVolume> {
    let grid = feature.grid().clone();
    if !(target_volume >= 8.0 * grid.voxel_volume()) {
        return Err(Error::param(
            "target_volume",
            format!(
                "{target_volume} mm^3 is below 8 voxels ({} mm^3)",
                8.0 * grid.voxel_volume()
            ),
        ));
    }
    if !(compactness > 0.0 && compactness.is_finite()) {
        return Err(Error::param("compactness", "must be positive"));
    }
    let step = target_volume.cbrt();
    let extent = grid.extent();
    if let Some(a) = (0..3).find(|&a| extent[a] < step) {
        return Err(Error::InvalidInput(format!(
            "degenerate grid: axis {a} spans {} mm, less than one supervoxel step of {step:.2} mm",
            extent[a]
        )));
    }

    let data = feature.data();
    let mut clusters = initial_clusters(feature, step);
    for c in &mut clusters {
        c.scale = compactness;
    }
    let reach: Vec<isize> = (0..3)
        .map(|a| (step / grid.spacing[a]).ceil() as isize)
        .collect();
    let inv_step2 = 1.0 / (step * step);

    let mut label = vec![UNASSIGNED; grid.len()];
    let mut best = vec![f64::INFINITY; grid.len()];
    let mut feat_dist = vec![0.0f64; grid.len()];
    for _ in 0..SLIC_ITERATIONS {
        label.fill(UNASSIGNED);
        best.fill(f64::INFINITY);
        for (k, c) in clusters.iter().enumerate() {
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..3 {
                let ci = ((c.center[a] - grid.origin[a]) / grid.spacing[a] - 0.5).round() as isize;
                lo[a] = (ci - reach[a]).max(0) as usize;
                hi[a] = ((ci + reach[a]).max(0) as usize).min(grid.dims[a] - 1);
            }
            let inv_scale2 = 1.0 / (c.scale * c.scale);
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        let idx = grid.index(x, y, z);
                        let p = grid.position_of([x, y, z]);
                        let ds2 = (p[0] - c.center[0]).powi(2)
                            + (p[1] - c.center[1]).powi(2)
                            + (p[2] - c.center[2]).powi(2);
                        let df = (data[idx] as f64 - c.feature).abs();
                        let d = ds2 * inv_step2 + df * df * inv_scale2;
                        if d < best[idx] {
                            best[idx] = d;
                            label[idx] = k as u32;
                            feat_dist[idx] = df;
                        }
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 5]; clusters.len()];
        let mut max_df = vec![0.0f64; clusters.len()];
        for idx in 0..grid.len() {
            let l = label[idx];
            if l == UNASSIGNED {
                continue;
            }
            let p = grid.position(idx);
            let s = &mut sums[l as usize];
            s[0] += p[0];
            s[1] += p[1];
            s[2] += p[2];
            s[3] += data[idx] as f64;
            s[4] += 1.0;
            let m = &mut max_df[l as usize];
            *m = m.max(feat_dist[idx]);
        }
        for ((c, s), m) in clusters.iter_mut().zip(&sums).zip(&max_df) {
            if s[4] > 0.0 {
                c.center = [s[0] / s[4], s[1] / s[4], s[2] / s[4]];
                c.feature = s[3] / s[4];
                c.scale = m.max(MIN_FEATURE_SCALE);
            }
        }
    }

    let labels = enforce_connectivity(&grid, &label);
    LabelVolume::new(grid, labels)
}

/// Offsets of the 26-neighbourhood.
fn neighbours26() -> Vec<[isize; 3]> {
    let mut v = Vec::with_capacity(26);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}

#[inline]
fn offset(grid: &Grid, c: [usize; 3], d: [isize; 3]) -> Option<usize> {
    let x = c[0] as isize + d[0];
    let y = c[1] as isize + d[1];
    let z = c[2] as isize + d[2];
    if x < 0 || y < 0 || z < 0 {
        return None;
    }
    let (x, y, z) = (x as usize, y as usize, z as usize);
    if x >= grid.dims[0] || y >= grid.dims[1] || z >= grid.dims[2] {
        return None;
    }
    Some(grid.index(x, y, z))
}

/// 26-connected components of equal raw label; returns component id per
/// voxel (numbered in scan order) and the raw label of each component.
fn components(grid: &Grid, raw: &[u32]) -> (Vec<u32>, Vec<u32>, Vec<usize>) {
    let nbrs = neighbours26();
    let mut comp = vec![u32::MAX; grid.len()];
    let mut comp_label = Vec::new();
    let mut comp_size = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        let id = comp_label.len() as u32;
        let l = raw[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(v) = queue.pop_front() {
            size += 1;
            let c = grid.coords(v);
            for d in &nbrs {
                if let Some(n) = offset(grid, c, *d) {
                    if comp[n] == u32::MAX && raw[n] == l {
                        comp[n] = id;
                        queue.push_back(n);
                    }
                }
            }
        }
        comp_label.push(l);
        comp_size.push(size);
    }
    (comp, comp_label, comp_size)
}

fn enforce_connectivity(grid: &Grid, raw: &[u32]) -> Vec<u32> {
    let (comp, comp_label, comp_size) = components(grid, raw);
    let ncomp = comp_label.len();

    // Largest piece per raw label survives; ties go to the earlier piece.
    let mut keeper: HashMap<u32, usize> = HashMap::new();
    for c in 0..ncomp {
        let l = comp_label[c];
        if l == UNASSIGNED {
            continue;
        }
        keeper
            .entry(l)
            .and_modify(|k| {
                if comp_size[c] > comp_size[*k] {
                    *k = c;
                }
            })
            .or_insert(c);
    }
    let mut root: Vec<Option<usize>> = vec![None; ncomp];
    for &k in keeper.values() {
        root[k] = Some(k);
    }

    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    let half: Vec<[isize; 3]> = neighbours26()
        .into_iter()
        .filter(|d| (d[2], d[1], d[0]) > (0, 0, 0))
        .collect();
    for v in 0..grid.len() {
        let a = comp[v] as usize;
        let c = grid.coords(v);
        for d in &half {
            if let Some(n) = offset(grid, c, *d) {
                let b = comp[n] as usize;
                if a != b && (root[a].is_none() || root[b].is_none()) {
                    adjacency.entry(a).or_default().push(b);
                    adjacency.entry(b).or_default().push(a);
                }
            }
        }
    }
    for list in adjacency.values_mut() {
        list.sort_unstable();
        list.dedup();
    }

    let mut size: Vec<usize> = comp_size.clone();
    let mut orphans: Vec<usize> = (0..ncomp).filter(|&c| root[c].is_none()).collect();
    while !orphans.is_empty() {
        let mut pending = Vec::new();
        for &o in &orphans {
            let target = adjacency
                .get(&o)
                .into_iter()
                .flatten()
                .filter_map(|&n| root[n])
                .max_by(|&a, &b| size[a].cmp(&size[b]).then(b.cmp(&a)));
            match target {
                Some(t) => {
                    root[o] = Some(t);
                    size[t] += comp_size[o];
                }
                None => pending.push(o),
            }
        }
        if pending.len() == orphans.len() {
            // Nothing kept is reachable: the fragments become supervoxels.
            for &o in &pending {
                root[o] = Some(o);
            }
            break;
        }
        orphans = pending;
    }

    let mut relabel = vec![u32::MAX; ncomp];
    let mut next = 0u32;
    let mut out = vec![0u32; grid.len()];
    for v in 0..grid.len() {
        let r = root[comp[v] as usize].expect("all components resolved");
        if relabel[r] == u32::MAX {
            relabel[r] = next;
            next += 1;
        }
        out[v] = relabel[r];
    }
    out
}
