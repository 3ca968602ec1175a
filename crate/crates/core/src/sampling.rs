//! Must-pass node sampling: exact Euclidean distance transform of the lumen
//! interior, greedy local-peak extraction and peak-to-node mapping.

use std::collections::HashMap;

use log::warn;

use crate::error::{Error, Result};
use crate::polyline::{dist2, Point};
use crate::supervoxel::LabelVolume;
use crate::volume::{Grid, Volume};

/// Voxels inside the segmentation whose wall response is below `wall_threshold`.
pub fn interior_mask(segmentation: &Volume, wall_map: &Volume, wall_threshold: f64) -> Result<Volume> {
    if !segmentation.grid().same_geometry(wall_map.grid()) {
        return Err(Error::GridMismatch(format!(
            "segmentation {:?} vs wall map {:?}",
            segmentation.dims(),
            wall_map.dims()
        )));
    }
    let data = segmentation
        .data()
        .iter()
        .zip(wall_map.data())
        .map(|(&s, &w)| ((s == 1.0) && (w as f64) < wall_threshold) as u8 as f32)
        .collect();
    Volume::new(segmentation.grid().clone(), data)
}

/// Lower envelope of parabolas `w (q - p)^2 + f(p)` over one line. The line is
/// framed by background points (f = 0) at positions -1 and n.
fn envelope_line(f: &[f64], w: f64, out: &mut [f64], v: &mut Vec<f64>, z: &mut Vec<f64>, fv: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    fv.clear();
    let push_point = |p: f64, fp: f64, v: &mut Vec<f64>, z: &mut Vec<f64>, fv: &mut Vec<f64>| {
        if !fp.is_finite() {
            return;
        }
        loop {
            match v.last() {
                None => {
                    v.push(p);
                    fv.push(fp);
                    z.push(f64::NEG_INFINITY);
                    return;
                }
                Some(&q) => {
                    let fq = *fv.last().unwrap();
                    let s = ((fp + w * p * p) - (fq + w * q * q)) / (2.0 * w * (p - q));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        fv.pop();
                        z.pop();
                    } else {
                        v.push(p);
                        fv.push(fp);
                        z.push(s);
                        return;
                    }
                }
            }
        }
    };
    push_point(-1.0, 0.0, v, z, fv);
    for (p, &fp) in f.iter().enumerate() {
        push_point(p as f64, fp, v, z, fv);
    }
    push_point(n as f64, 0.0, v, z, fv);

    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k];
        *o = w * d * d + fv[k];
    }
}

/// Squared distance (mm^2) from every voxel to the nearest background voxel;
/// everything outside the grid counts as background.
pub fn squared_distance_transform(interior: &Volume) -> Vec<f64> {
    let grid = interior.grid();
    let [nx, ny, nz] = grid.dims;
    let mut cur: Vec<f64> = interior
        .data()
        .iter()
        .map(|&m| if m > 0.0 { f64::INFINITY } else { 0.0 })
        .collect();

    let strides = [1, nx, nx * ny];
    let mut line = Vec::new();
    let mut out = Vec::new();
    let (mut v, mut z, mut fv) = (Vec::new(), Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = grid.dims[axis];
        let w = grid.spacing[axis] * grid.spacing[axis];
        let stride = strides[axis];
        line.resize(n, 0.0);
        out.resize(n, 0.0);
        let starts: Vec<usize> = (0..grid.len())
            .filter(|&idx| grid.coords(idx)[axis] == 0)
            .collect();
        for s in starts {
            for t in 0..n {
                line[t] = cur[s + t * stride];
            }
            envelope_line(&line, w, &mut out, &mut v, &mut z, &mut fv);
            for t in 0..n {
                cur[s + t * stride] = out[t];
            }
        }
    }
    debug_assert_eq!(cur.len(), nx * ny * nz);
    cur
}

/// Euclidean distance (mm) to the nearest non-interior voxel; 0 on background.
pub fn distance_transform(interior: &Volume) -> Volume {
    let sq = squared_distance_transform(interior);
    Volume::new(
        interior.grid().clone(),
        sq.into_iter().map(|d| d.sqrt() as f32).collect(),
    )
    .expect("same grid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub voxel: usize,
    pub position: Point,
    pub value: f64,
}

fn ball_offsets(grid: &Grid, radius: f64) -> Vec<[isize; 3]> {
    let reach: Vec<isize> = (0..3)
        .map(|a| (radius / grid.spacing[a]).floor() as isize)
        .collect();
    let mut out = Vec::new();
    for dz in -reach[2]..=reach[2] {
        for dy in -reach[1]..=reach[1] {
            for dx in -reach[0]..=reach[0] {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                let d2 = (dx as f64 * grid.spacing[0]).powi(2)
                    + (dy as f64 * grid.spacing[1]).powi(2)
                    + (dz as f64 * grid.spacing[2]).powi(2);
                if d2 <= radius * radius {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Local maxima of `dist` (non-strict, over a ball of radius `theta_d` mm)
/// with value at least `theta_v`, thinned greedily in descending value order
/// (ties by voxel index) so that accepted peaks are at least `theta_d` apart.
pub fn find_peaks(dist: &Volume, theta_v: f64, theta_d: f64) -> Result<Vec<Peak>> {
    if !(theta_v > 0.0) {
        return Err(Error::param("theta_v", "must be positive"));
    }
    if !(theta_d > 0.0) {
        return Err(Error::param("theta_d", "must be positive"));
    }
    let grid = dist.grid();
    let data = dist.data();
    let ball = ball_offsets(grid, theta_d);

    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for idx in 0..grid.len() {
        let val = data[idx];
        if (val as f64) < theta_v {
            continue;
        }
        let c = grid.coords(idx);
        let is_max = ball.iter().all(|d| {
            let x = c[0] as isize + d[0];
            let y = c[1] as isize + d[1];
            let z = c[2] as isize + d[2];
            if x < 0 || y < 0 || z < 0 {
                return true;
            }
            let (x, y, z) = (x as usize, y as usize, z as usize);
            if x >= grid.dims[0] || y >= grid.dims[1] || z >= grid.dims[2] {
                return true;
            }
            data[grid.index(x, y, z)] <= val
        });
        if is_max {
            candidates.push((idx, val as f64));
        }
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    // Accepted peaks bucketed on a theta_d lattice.
    let cell = |p: Point| -> [i64; 3] {
        [
            (p[0] / theta_d).floor() as i64,
            (p[1] / theta_d).floor() as i64,
            (p[2] / theta_d).floor() as i64,
        ]
    };
    let mut buckets: HashMap<[i64; 3], Vec<Point>> = HashMap::new();
    let mut peaks = Vec::new();
    let min2 = theta_d * theta_d;
    for (idx, val) in candidates {
        let p = grid.position(idx);
        let c = cell(p);
        let clear = (-1..=1).all(|dz| {
            (-1..=1).all(|dy| {
                (-1..=1).all(|dx| {
                    buckets
                        .get(&[c[0] + dx, c[1] + dy, c[2] + dz])
                        .is_none_or(|b| b.iter().all(|&q| dist2(p, q) >= min2))
                })
            })
        });
        if clear {
            buckets.entry(c).or_default().push(p);
            peaks.push(Peak {
                voxel: idx,
                position: p,
                value: val,
            });
        }
    }
    Ok(peaks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MustPassSet {
    /// Node indices into the masked graph, in descending peak value.
    pub nodes: Vec<usize>,
    pub positions: Vec<Point>,
    pub values: Vec<f64>,
    /// Peaks whose supervoxel was pruned by masking.
    pub dropped: usize,
}

impl MustPassSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn empty() -> Self {
        MustPassSet {
            nodes: Vec::new(),
            positions: Vec::new(),
            values: Vec::new(),
            dropped: 0,
        }
    }

    pub fn from_nodes(nodes: Vec<usize>) -> Self {
        let n = nodes.len();
        MustPassSet {
            nodes,
            positions: vec![[0.0; 3]; n],
            values: vec![0.0; n],
            dropped: 0,
        }
    }

    /// Removes the listed nodes (e.g. route endpoints) from the set.
    pub fn without(&self, exclude: &[usize]) -> MustPassSet {
        let mut out = MustPassSet::empty();
        out.dropped = self.dropped;
        for i in 0..self.nodes.len() {
            if !exclude.contains(&self.nodes[i]) {
                out.nodes.push(self.nodes[i]);
                out.positions.push(self.positions[i]);
                out.values.push(self.values[i]);
            }
        }
        out
    }
}

/// Samples peaks and maps each to the masked-graph node of its supervoxel.
/// Several peaks in one supervoxel collapse onto the highest one.
pub fn sample_must_pass(
    dist: &Volume,
    labels: &LabelVolume,
    node_of_label: &[Option<usize>],
    theta_v: f64,
    theta_d: f64,
) -> Result<MustPassSet> {
    if !dist.grid().same_geometry(labels.grid()) {
        return Err(Error::GridMismatch(format!(
            "distance map {:?} vs labels {:?}",
            dist.dims(),
            labels.grid().dims
        )));
    }
    let peaks = find_peaks(dist, theta_v, theta_d)?;
    if peaks.is_empty() {
        return Err(Error::NoPeaks(format!(
            "no distance-map peak reaches theta_v = {theta_v} mm; lower theta_v or the wall threshold"
        )));
    }
    let mut out = MustPassSet::empty();
    for p in &peaks {
        let label = labels.label_at(p.voxel) as usize;
        match node_of_label.get(label).copied().flatten() {
            None => out.dropped += 1,
            Some(node) if out.nodes.contains(&node) => {}
            Some(node) => {
                out.nodes.push(node);
                out.positions.push(p.position);
                out.values.push(p.value);
            }
        }
    }
    if out.dropped > 0 {
        warn!("{} peaks fell in pruned supervoxels and were dropped", out.dropped);
    }
    if out.nodes.is_empty() {
        return Err(Error::NoPeaks(format!(
            "all {} peaks fall in pruned supervoxels",
            peaks.len()
        )));
    }
    Ok(out)
}
