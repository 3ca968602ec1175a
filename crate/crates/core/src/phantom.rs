//! Synthetic convoluted-tube volumes with known centerlines.
//!
//! The centerline is a planar serpentine: straight rows along x joined by
//! semicircular U-turns, lifted out of plane by a smooth seeded wiggle
//! `z = z0 + A sin(2πx/λ + φ)`. Every row shares the same `z(x)`, so rows
//! keep their exact y pitch. A gap between two rows is a touch pair when the
//! pitch is `2r + t`: the two lumens are then separated by exactly one wall
//! thickness.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::polyline::{dist, point_segment, Point, Polyline};
use crate::volume::{Grid, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    /// Isotropic voxel size (mm).
    pub spacing: f64,
    pub inner_radius: f64,
    pub wall_thickness: f64,
    pub lumen_intensity: f32,
    pub wall_intensity: f32,
    pub background_intensity: f32,
    pub seed: u64,
    /// Number of U-turns; the curve has `bends + 1` rows.
    pub bends: usize,
    /// Number of row gaps (counted from the first row) that touch.
    pub touch_pairs: usize,
    pub noise_sigma: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [96, 96, 96],
            spacing: 2.0,
            inner_radius: 6.0,
            wall_thickness: 4.0,
            lumen_intensity: 300.0,
            wall_intensity: 80.0,
            background_intensity: 0.0,
            seed: 0,
            bends: 0,
            touch_pairs: 0,
            noise_sigma: 0.0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::param("dims", "must be positive"));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::param("spacing", "must be positive"));
        }
        if !(self.lumen_intensity > self.wall_intensity) {
            return Err(Error::param(
                "lumen_intensity",
                "lumen must be brighter than the wall",
            ));
        }
        if !(self.inner_radius >= 2.0 * self.spacing) {
            return Err(Error::param(
                "inner_radius",
                format!("must be at least 2 voxels ({} mm)", 2.0 * self.spacing),
            ));
        }
        if !(self.wall_thickness > 0.0) {
            return Err(Error::param("wall_thickness", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::param("noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut s = PhantomSpec::default();
        if let Some(d) = kv.take_list::<usize>("dims")? {
            if d.len() != 3 {
                return Err(Error::Config("`dims`: expected 3 values".into()));
            }
            s.dims = [d[0], d[1], d[2]];
        }
        macro_rules! field {
            ($key:literal, $f:ident) => {
                if let Some(v) = kv.take_parsed($key)? {
                    s.$f = v;
                }
            };
        }
        field!("spacing", spacing);
        field!("inner_radius", inner_radius);
        field!("wall_thickness", wall_thickness);
        field!("lumen_intensity", lumen_intensity);
        field!("wall_intensity", wall_intensity);
        field!("background_intensity", background_intensity);
        field!("seed", seed);
        field!("bends", bends);
        field!("touch_pairs", touch_pairs);
        field!("noise_sigma", noise_sigma);
        kv.finish()?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhantomSpec::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "dims: {} {} {}\nspacing: {}\ninner_radius: {}\nwall_thickness: {}\n\
             lumen_intensity: {}\nwall_intensity: {}\nbackground_intensity: {}\n\
             seed: {}\nbends: {}\ntouch_pairs: {}\nnoise_sigma: {}\n",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.spacing,
            self.inner_radius,
            self.wall_thickness,
            self.lumen_intensity,
            self.wall_intensity,
            self.background_intensity,
            self.seed,
            self.bends,
            self.touch_pairs,
            self.noise_sigma
        )
    }

    fn touch_pitch(&self) -> f64 {
        2.0 * self.inner_radius + self.wall_thickness
    }

    fn loose_pitch(&self) -> f64 {
        2.0 * (self.inner_radius + self.wall_thickness) + 2.0 * self.wall_thickness
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub intensity: Volume,
    /// 1 within `r + t` of the centerline, else 0.
    pub segmentation: Volume,
    pub gt_path: Polyline,
}

/// Dense centerline samples plus the per-sample row index (None on U-turns).
struct Centerline {
    points: Vec<Point>,
    arc: Vec<f64>,
    row: Vec<Option<usize>>,
}

fn sample_centerline(spec: &PhantomSpec) -> Result<Centerline> {
    let extent = [
        spec.dims[0] as f64 * spec.spacing,
        spec.dims[1] as f64 * spec.spacing,
        spec.dims[2] as f64 * spec.spacing,
    ];
    let outer = spec.inner_radius + spec.wall_thickness;
    let margin = outer + 2.0 * spec.spacing;
    let ds = (spec.spacing / 4.0).min(0.5);

    if spec.touch_pairs > spec.bends {
        return Err(Error::PhantomInfeasible(format!(
            "touch_pairs ({}) exceeds bends ({}): each touch pair needs its own U-turn",
            spec.touch_pairs, spec.bends
        )));
    }
    let z0 = extent[2] / 2.0;
    if z0 < margin {
        return Err(Error::PhantomInfeasible(format!(
            "z extent {} mm cannot hold a tube of outer radius {outer} mm",
            extent[2]
        )));
    }

    let pitches: Vec<f64> = (0..spec.bends)
        .map(|g| {
            if g < spec.touch_pairs {
                spec.touch_pitch()
            } else {
                spec.loose_pitch()
            }
        })
        .collect();
    let total: f64 = pitches.iter().sum();
    let y_first = (extent[1] - total) / 2.0;
    if y_first < margin {
        return Err(Error::PhantomInfeasible(format!(
            "{} bends need {:.1} mm in y, grid has {:.1} mm",
            spec.bends,
            total + 2.0 * margin,
            extent[1]
        )));
    }
    let r_max = pitches.iter().fold(0.0f64, |m, &p| m.max(p / 2.0));
    let (x_lo, x_hi) = if spec.bends == 0 {
        (margin, extent[0] - margin)
    } else {
        (margin + r_max, extent[0] - margin - r_max)
    };
    let row_len = x_hi - x_lo;
    if row_len < 2.0 * spec.inner_radius {
        return Err(Error::PhantomInfeasible(format!(
            "rows would be {row_len:.1} mm long; the grid is too small in x for the U-turns"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (amp, wavelength, phase) = if spec.bends == 0 {
        (0.0, 1.0, 0.0)
    } else {
        let a = rng.random_range(0.5..1.0) * spec.inner_radius.min(z0 - margin);
        (
            a.max(0.0),
            row_len * rng.random_range(0.8..1.6),
            rng.random_range(0.0..2.0 * PI),
        )
    };
    let lift = |x: f64| z0 + amp * (2.0 * PI * (x - x_lo) / wavelength + phase).sin();

    let mut planar: Vec<([f64; 2], Option<usize>)> = Vec::new();
    let push_line = |out: &mut Vec<([f64; 2], Option<usize>)>, a: [f64; 2], b: [f64; 2], row: usize| {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let n = (len / ds).ceil().max(1.0) as usize;
        for s in 0..=n {
            let t = s as f64 / n as f64;
            out.push(([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], Some(row)));
        }
    };
    let mut y = y_first;
    for g in 0..=spec.bends {
        let forward = g % 2 == 0;
        let (xa, xb) = if forward { (x_lo, x_hi) } else { (x_hi, x_lo) };
        push_line(&mut planar, [xa, y], [xb, y], g);
        if g < spec.bends {
            let rad = pitches[g] / 2.0;
            let cy = y + rad;
            let n = (PI * rad / ds).ceil() as usize;
            for s in 1..n {
                let th = -PI / 2.0 + PI * s as f64 / n as f64;
                let x = if forward {
                    x_hi + rad * th.cos()
                } else {
                    x_lo - rad * th.cos()
                };
                planar.push(([x, cy + rad * th.sin()], None));
            }
            y += pitches[g];
        }
    }

    let mut points = Vec::with_capacity(planar.len());
    let mut row = Vec::with_capacity(planar.len());
    for (p, r) in planar {
        let q = [p[0], p[1], lift(p[0])];
        if points.last() == Some(&q) {
            continue;
        }
        points.push(q);
        row.push(r);
    }
    let mut arc = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    arc.push(0.0);
    for w in points.windows(2) {
        acc += dist(w[0], w[1]);
        arc.push(acc);
    }

    let line = Centerline { points, arc, row };
    check_separation(spec, &line, r_max)?;
    check_touches(spec, &line)?;
    Ok(line)
}

/// Distinct parts of the curve never come closer than `2r + t`.
fn check_separation(spec: &PhantomSpec, line: &Centerline, r_max: f64) -> Result<()> {
    let min_sep = spec.touch_pitch() - 1e-6;
    let arc_gap = (PI * r_max * 1.01).max(spec.touch_pitch()) + spec.spacing;
    // 1 mm stride is plenty for a brute-force check.
    let stride = ((1.0 / (line.arc.get(1).copied().unwrap_or(1.0))).round() as usize).max(1);
    let idx: Vec<usize> = (0..line.points.len()).step_by(stride).collect();
    for (n, &a) in idx.iter().enumerate() {
        for &b in &idx[n + 1..] {
            if line.arc[b] - line.arc[a] > arc_gap && dist(line.points[a], line.points[b]) < min_sep {
                return Err(Error::PhantomInfeasible(format!(
                    "curve comes within {:.2} mm of itself at arc {:.1} / {:.1} mm",
                    dist(line.points[a], line.points[b]),
                    line.arc[a],
                    line.arc[b]
                )));
            }
        }
    }
    Ok(())
}

/// Each touching gap has a location where the two rows are within
/// `2(r + t)` while being more than `10r` apart along the curve.
fn check_touches(spec: &PhantomSpec, line: &Centerline) -> Result<()> {
    let outer = spec.inner_radius + spec.wall_thickness;
    for g in 0..spec.touch_pairs {
        let members: Vec<usize> = (0..line.points.len())
            .filter(|&i| line.row[i] == Some(g))
            .collect();
        let probe = members[members.len() / 2];
        let found = (0..line.points.len()).any(|j| {
            line.row[j] == Some(g + 1)
                && (line.arc[j] - line.arc[probe]).abs() > 10.0 * spec.inner_radius
                && dist(line.points[j], line.points[probe]) <= 2.0 * outer
        });
        if !found {
            return Err(Error::PhantomInfeasible(format!(
                "touch pair {g}: rows are too short for an arc separation above {} mm",
                10.0 * spec.inner_radius
            )));
        }
    }
    Ok(())
}

/// Distance (mm) from every voxel center to the curve, exact within
/// `reach` and infinite beyond.
fn distance_field(grid: &Grid, pts: &[Point], reach: f64) -> Vec<f64> {
    let mut field = vec![f64::INFINITY; grid.len()];
    let h = grid.spacing;
    for w in pts.windows(2) {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let mn = w[0][a].min(w[1][a]) - reach - grid.origin[a];
            let mx = w[0][a].max(w[1][a]) + reach - grid.origin[a];
            lo[a] = ((mn / h[a] - 0.5).floor().max(0.0)) as usize;
            hi[a] = ((mx / h[a] - 0.5).ceil().max(0.0) as usize).min(grid.dims[a] - 1);
        }
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let p = grid.position_of([i, j, k]);
                    let d = point_segment(p, w[0], w[1]).0;
                    let idx = grid.index(i, j, k);
                    if d < field[idx] {
                        field[idx] = d;
                    }
                }
            }
        }
    }
    field
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let line = sample_centerline(spec)?;
    let grid = Grid::isotropic(spec.dims, spec.spacing)?;
    let r = spec.inner_radius;
    let outer = r + spec.wall_thickness;
    let field = distance_field(&grid, &line.points, outer + spec.spacing);

    let lo = spec
        .background_intensity
        .min(spec.wall_intensity)
        .min(spec.lumen_intensity);
    let hi = spec
        .background_intensity
        .max(spec.wall_intensity)
        .max(spec.lumen_intensity);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).unwrap());

    let mut intensity = Vec::with_capacity(grid.len());
    let mut mask = Vec::with_capacity(grid.len());
    for &d in &field {
        let base = if d <= r {
            spec.lumen_intensity
        } else if d <= outer {
            spec.wall_intensity
        } else {
            spec.background_intensity
        };
        let v = match &noise {
            Some(n) => ((base as f64 + n.sample(&mut rng)) as f32).clamp(lo, hi),
            None => base,
        };
        intensity.push(v);
        mask.push(if d <= outer { 1.0 } else { 0.0 });
    }

    Ok(Phantom {
        intensity: Volume::new(grid.clone(), intensity)?,
        segmentation: Volume::new(grid, mask)?,
        gt_path: Polyline::new(line.points)?,
    })
}
