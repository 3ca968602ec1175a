//! Dense 3D grids and their on-disk format.
//!
//! A volume file is a short text header followed by a blank line and a raw
//! little-endian sample block in x-fastest order:
//!
//! ```text
//! dims: 64 64 48
//! spacing: 2 2 2
//! origin: 0 0 0
//! dtype: f32
//!
//! <raw bytes>
//! ```
//!
//! Voxel `(i, j, k)` has its center at `origin + (index + 0.5) * spacing`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Geometry shared by every grid in the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param("dims", format!("{dims:?} has a zero extent")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::param("spacing", format!("{spacing:?} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::param("origin", format!("{origin:?} must be finite")));
        }
        Ok(Grid {
            dims,
            spacing,
            origin,
        })
    }

    pub fn isotropic(dims: [usize; 3], spacing: f64) -> Result<Self> {
        Grid::new(dims, [spacing; 3], [0.0; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Physical position (mm) of a voxel center.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        self.position_of(c)
    }

    #[inline]
    pub fn position_of(&self, c: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + (c[0] as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (c[1] as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (c[2] as f64 + 0.5) * self.spacing[2],
        ]
    }

    /// Voxel containing a physical point, if it lies inside the grid.
    pub fn voxel_at(&self, p: [f64; 3]) -> Option<[usize; 3]> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - self.origin[a]) / self.spacing[a]).floor();
            if !(t >= 0.0 && t < self.dims[a] as f64) {
                return None;
            }
            c[a] = t as usize;
        }
        Some(c)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing[0],
            self.dims[1] as f64 * self.spacing[1],
            self.dims[2] as f64 * self.spacing[2],
        ]
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Scalar volume (intensities, filter responses, masks, distance maps).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::DataLength {
                expected: grid.len(),
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at voxel {pos}"
            )));
        }
        Ok(Volume { grid, data })
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        let n = grid.len();
        Volume {
            grid,
            data: vec![value; n],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let data = (0..grid.len()).map(|idx| f(grid.coords(idx))).collect();
        Volume { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `f` voxelwise, keeping the geometry.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Volume {
        Volume {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Sample encodings supported by the volume file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U8,
    U16,
    U32,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
            Dtype::U32 => "u32",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "f32" => Some(Dtype::F32),
            "u8" => Some(Dtype::U8),
            "u16" => Some(Dtype::U16),
            "u32" => Some(Dtype::U32),
            _ => None,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
            Dtype::F32 | Dtype::U32 => 4,
        }
    }

    fn max_integer(self) -> Option<f64> {
        match self {
            Dtype::F32 => None,
            Dtype::U8 => Some(u8::MAX as f64),
            Dtype::U16 => Some(u16::MAX as f64),
            Dtype::U32 => Some(u32::MAX as f64),
        }
    }
}

/// Raw decoded file contents before conversion to a typed grid.
pub(crate) struct RawVolume {
    pub grid: Grid,
    pub dtype: Dtype,
    pub bytes: Vec<u8>,
}

impl RawVolume {
    pub fn samples_f32(&self) -> Vec<f32> {
        let b = &self.bytes;
        match self.dtype {
            Dtype::F32 => b
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
            Dtype::U8 => b.iter().map(|&v| v as f32).collect(),
            Dtype::U16 => b
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as f32)
                .collect(),
            Dtype::U32 => b
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f32)
                .collect(),
        }
    }

    pub fn samples_u32(&self) -> Option<Vec<u32>> {
        let b = &self.bytes;
        Some(match self.dtype {
            Dtype::F32 => return None,
            Dtype::U8 => b.iter().map(|&v| v as u32).collect(),
            Dtype::U16 => b
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
                .collect(),
            Dtype::U32 => b
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        })
    }
}

fn parse_triple<T: std::str::FromStr>(value: &str) -> Option<[T; 3]> {
    let mut it = value.split_whitespace().map(|t| t.parse::<T>());
    let a = it.next()?.ok()?;
    let b = it.next()?.ok()?;
    let c = it.next()?.ok()?;
    if it.next().is_some() {
        return None;
    }
    Some([a, b, c])
}

pub(crate) fn read_raw(path: &Path) -> Result<RawVolume> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    let split = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| malformed("missing blank line after header".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| malformed("header is not valid UTF-8".into()))?;

    let mut dims = None;
    let mut spacing = None;
    let mut origin = None;
    let mut dtype = None;
    for line in header.lines() {
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| malformed(format!("expected `key: value`, got {line:?}")))?;
        let value = value.trim();
        match key.trim() {
            "dims" => dims = Some(parse_triple::<usize>(value).ok_or_else(|| malformed(format!("bad dims {value:?}")))?),
            "spacing" => spacing = Some(parse_triple::<f64>(value).ok_or_else(|| malformed(format!("bad spacing {value:?}")))?),
            "origin" => origin = Some(parse_triple::<f64>(value).ok_or_else(|| malformed(format!("bad origin {value:?}")))?),
            "dtype" => dtype = Some(Dtype::parse(value).ok_or_else(|| malformed(format!("unknown dtype {value:?}")))?),
            other => return Err(malformed(format!("unknown key {other:?}"))),
        }
    }
    let dims = dims.ok_or_else(|| malformed("missing dims".into()))?;
    let spacing = spacing.ok_or_else(|| malformed("missing spacing".into()))?;
    let origin = origin.ok_or_else(|| malformed("missing origin".into()))?;
    let dtype = dtype.ok_or_else(|| malformed("missing dtype".into()))?;
    let grid = Grid::new(dims, spacing, origin).map_err(|e| malformed(e.to_string()))?;

    let payload = &bytes[split + 2..];
    let width = dtype.width();
    if payload.len() % width != 0 || payload.len() / width != grid.len() {
        return Err(Error::DataLength {
            expected: grid.len(),
            found: payload.len() / width,
        });
    }
    Ok(RawVolume {
        grid,
        dtype,
        bytes: payload.to_vec(),
    })
}

pub(crate) fn encode_raw(grid: &Grid, dtype: Dtype, samples: impl Iterator<Item = f64>) -> Vec<u8> {
    let mut out = format!(
        "dims: {} {} {}\nspacing: {} {} {}\norigin: {} {} {}\ndtype: {}\n\n",
        grid.dims[0],
        grid.dims[1],
        grid.dims[2],
        grid.spacing[0],
        grid.spacing[1],
        grid.spacing[2],
        grid.origin[0],
        grid.origin[1],
        grid.origin[2],
        dtype.name()
    )
    .into_bytes();
    out.reserve(grid.len() * dtype.width());
    for v in samples {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::U8 => out.push(v as u8),
            Dtype::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            Dtype::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
        }
    }
    out
}

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let raw = read_raw(path.as_ref())?;
    let data = raw.samples_f32();
    Volume::new(raw.grid, data)
}

pub fn save_volume(vol: &Volume, path: impl AsRef<Path>) -> Result<()> {
    save_volume_as(vol, path, Dtype::F32)
}

/// Saves with an explicit sample encoding. Integer encodings require every
/// value to be a representable non-negative integer.
pub fn save_volume_as(vol: &Volume, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    if vol.grid.is_empty() {
        return Err(Error::param("dims", "cannot save a zero-voxel volume"));
    }
    if let Some(max) = dtype.max_integer() {
        if let Some(v) = vol
            .data
            .iter()
            .find(|&&v| v < 0.0 || v.fract() != 0.0 || v as f64 > max)
        {
            return Err(Error::InvalidInput(format!(
                "value {v} is not representable as {}",
                dtype.name()
            )));
        }
    }
    let bytes = encode_raw(&vol.grid, dtype, vol.data.iter().map(|&v| v as f64));
    write_atomic(path.as_ref(), &bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Trilinear,
    /// For label and mask volumes.
    Nearest,
}

/// Resamples onto an isotropic grid sharing the input origin. Output dims are
/// `ceil(dims * spacing / target)` per axis; sample positions outside the
/// input's voxel-center hull are clamped to the border.
pub fn resample_isotropic(vol: &Volume, target: f64, interp: Interpolation) -> Result<Volume> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::param("target_spacing", format!("{target} must be positive")));
    }
    let g = &vol.grid;
    if g.spacing.iter().all(|&s| s == target) {
        return Ok(vol.clone());
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((g.dims[a] as f64 * g.spacing[a] / target).ceil() as usize).max(1);
    }
    let out_grid = Grid::new(dims, [target; 3], g.origin)?;

    // Continuous input index of an output voxel center along one axis.
    let axis_coord = |a: usize, j: usize| -> f64 {
        let p = (j as f64 + 0.5) * target;
        (p / g.spacing[a] - 0.5).clamp(0.0, (g.dims[a] - 1) as f64)
    };
    let taps: Vec<Vec<(usize, usize, f64)>> = (0..3)
        .map(|a| {
            (0..dims[a])
                .map(|j| {
                    let t = axis_coord(a, j);
                    match interp {
                        Interpolation::Nearest => {
                            let n = (t + 0.5).floor().min((g.dims[a] - 1) as f64) as usize;
                            (n, n, 0.0)
                        }
                        Interpolation::Trilinear => {
                            let lo = t.floor() as usize;
                            let hi = (lo + 1).min(g.dims[a] - 1);
                            (lo, hi, t - lo as f64)
                        }
                    }
                })
                .collect()
        })
        .collect();

    let src = &vol.data;
    let mut data = Vec::with_capacity(out_grid.len());
    for &(z0, z1, fz) in &taps[2] {
        for &(y0, y1, fy) in &taps[1] {
            for &(x0, x1, fx) in &taps[0] {
                let s = |i: usize, j: usize, k: usize| src[g.index(i, j, k)] as f64;
                let v = match interp {
                    Interpolation::Nearest => s(x0, y0, z0),
                    Interpolation::Trilinear => {
                        let c00 = s(x0, y0, z0) * (1.0 - fx) + s(x1, y0, z0) * fx;
                        let c10 = s(x0, y1, z0) * (1.0 - fx) + s(x1, y1, z0) * fx;
                        let c01 = s(x0, y0, z1) * (1.0 - fx) + s(x1, y0, z1) * fx;
                        let c11 = s(x0, y1, z1) * (1.0 - fx) + s(x1, y1, z1) * fx;
                        let c0 = c00 * (1.0 - fy) + c10 * fy;
                        let c1 = c01 * (1.0 - fy) + c11 * fy;
                        c0 * (1.0 - fz) + c1 * fz
                    }
                };
                data.push(v as f32);
            }
        }
    }
    // Rounding of a convex combination can step one ulp past the hull.
    let (lo, hi) = vol.min_max();
    for v in &mut data {
        *v = v.clamp(lo, hi);
    }
    Volume::new(out_grid, data)
}
