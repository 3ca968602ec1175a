//! Tracking configuration: a `key: value` text file whose relative paths
//! resolve against the file's own directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::polyline::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    pub intensity: PathBuf,
    pub segmentation: PathBuf,
    pub ground_truth: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Physical coordinates (mm).
    pub start: Point,
    pub end: Point,
    /// Isotropic voxel size the inputs are resampled to (mm).
    pub spacing: f64,
    pub scales: Vec<f64>,
    pub black_ridges: bool,
    /// mm³.
    pub target_volume: f64,
    pub compactness: f64,
    pub theta_v: f64,
    pub theta_d: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub wall_threshold: f64,
    pub min_inside_fraction: f64,
    pub refine: bool,
    /// Reuse cached wall map and labels found in the output directory.
    pub resume: bool,
    pub seed: u64,
    /// 0 lets the thread pool decide.
    pub threads: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            intensity: PathBuf::from("intensity.vol"),
            segmentation: PathBuf::from("segmentation.vol"),
            ground_truth: None,
            output_dir: PathBuf::from("out"),
            start: [0.0; 3],
            end: [0.0; 3],
            spacing: 2.0,
            scales: vec![2.0, 3.0],
            black_ridges: true,
            target_volume: 216.0,
            compactness: 0.01,
            theta_v: 3.0,
            theta_d: 6.0,
            delta: 50.0,
            tolerance: 10.0,
            wall_threshold: 0.2,
            min_inside_fraction: 0.5,
            refine: true,
            resume: false,
            seed: 0,
            threads: 0,
        }
    }
}

/// One documented config key.
pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    /// Whether the default is a local choice rather than a published value.
    pub decision: bool,
    pub help: &'static str,
}

pub const KEYS: &[KeyDoc] = &[
    KeyDoc { key: "intensity", default: "intensity.vol", decision: true, help: "intensity volume" },
    KeyDoc { key: "segmentation", default: "segmentation.vol", decision: true, help: "binary segmentation mask" },
    KeyDoc { key: "ground_truth", default: "none", decision: true, help: "reference polyline for evaluation" },
    KeyDoc { key: "output_dir", default: "out", decision: true, help: "directory for all artifacts" },
    KeyDoc { key: "start", default: "required", decision: false, help: "start coordinate x y z (mm)" },
    KeyDoc { key: "end", default: "required", decision: false, help: "end coordinate x y z (mm)" },
    KeyDoc { key: "spacing", default: "2", decision: false, help: "isotropic resampling spacing (mm)" },
    KeyDoc { key: "scales", default: "2 3", decision: true, help: "ridge filter Gaussian scales (mm)" },
    KeyDoc { key: "black_ridges", default: "true", decision: true, help: "detect dark walls between bright lumen" },
    KeyDoc { key: "target_volume", default: "216", decision: false, help: "desired supervoxel volume (mm^3)" },
    KeyDoc { key: "compactness", default: "0.01", decision: false, help: "SLIC compactness" },
    KeyDoc { key: "theta_v", default: "3", decision: false, help: "minimum peak distance value (mm)" },
    KeyDoc { key: "theta_d", default: "6", decision: false, help: "minimum peak separation (mm)" },
    KeyDoc { key: "delta", default: "50", decision: false, help: "graph-distance cutoff of the simplified graph (mm)" },
    KeyDoc { key: "tolerance", default: "10", decision: false, help: "evaluation distance tolerance (mm)" },
    KeyDoc { key: "wall_threshold", default: "0.2", decision: true, help: "wall map level treated as wall" },
    KeyDoc { key: "min_inside_fraction", default: "0.5", decision: true, help: "supervoxel share inside the mask to keep its node" },
    KeyDoc { key: "refine", default: "true", decision: true, help: "2-opt refinement of the tour" },
    KeyDoc { key: "resume", default: "false", decision: true, help: "reuse cached stage outputs" },
    KeyDoc { key: "seed", default: "0", decision: true, help: "seed recorded with the outputs" },
    KeyDoc { key: "threads", default: "0", decision: true, help: "worker threads, 0 = all cores" },
];

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got {v:?}"))),
    }
}

impl TrackingConfig {
    /// Parses config text; relative paths are joined onto `base`.
    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let mut kv = KeyValues::parse(text)?;
        let mut c = TrackingConfig::default();
        let path = |p: String| -> PathBuf {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p.strip_prefix(".").unwrap_or(&p))
            }
        };
        c.intensity = path(kv.take("intensity").unwrap_or_else(|| "intensity.vol".into()));
        c.segmentation = path(kv.take("segmentation").unwrap_or_else(|| "segmentation.vol".into()));
        c.ground_truth = kv.take("ground_truth").map(path);
        c.output_dir = path(kv.take("output_dir").unwrap_or_else(|| "out".into()));
        c.start = kv
            .take_triple("start")?
            .ok_or_else(|| Error::Config("missing key `start`".into()))?;
        c.end = kv
            .take_triple("end")?
            .ok_or_else(|| Error::Config("missing key `end`".into()))?;
        if let Some(v) = kv.take_list("scales")? {
            c.scales = v;
        }
        for (key, slot) in [("black_ridges", &mut c.black_ridges), ("refine", &mut c.refine), ("resume", &mut c.resume)] {
            if let Some(v) = kv.take(key) {
                *slot = parse_bool(key, &v)?;
            }
        }
        macro_rules! field {
            ($key:literal, $f:ident) => {
                if let Some(v) = kv.take_parsed($key)? {
                    c.$f = v;
                }
            };
        }
        field!("spacing", spacing);
        field!("target_volume", target_volume);
        field!("compactness", compactness);
        field!("theta_v", theta_v);
        field!("theta_d", theta_d);
        field!("delta", delta);
        field!("tolerance", tolerance);
        field!("wall_threshold", wall_threshold);
        field!("min_inside_fraction", min_inside_fraction);
        field!("seed", seed);
        field!("threads", threads);
        kv.finish()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        TrackingConfig::from_text(&text, base)
    }

    /// Parameter checks; file existence is checked separately.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("target_volume", self.target_volume),
            ("compactness", self.compactness),
            ("theta_v", self.theta_v),
            ("theta_d", self.theta_d),
            ("delta", self.delta),
            ("tolerance", self.tolerance),
            ("wall_threshold", self.wall_threshold),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.delta <= self.theta_d {
            return Err(Error::param(
                "delta",
                format!("must exceed theta_d ({} <= {})", self.delta, self.theta_d),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_inside_fraction) {
            return Err(Error::param("min_inside_fraction", "must lie in [0, 1]"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::param("scales", "need at least one positive scale"));
        }
        if self.start.iter().chain(&self.end).any(|v| !v.is_finite()) {
            return Err(Error::param("start", "coordinates must be finite"));
        }
        Ok(())
    }

    /// Fails with `MissingFile` for any input that does not exist.
    pub fn check_inputs(&self) -> Result<()> {
        for p in [Some(&self.intensity), Some(&self.segmentation), self.ground_truth.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "intensity: {}", self.intensity.display());
        let _ = writeln!(s, "segmentation: {}", self.segmentation.display());
        if let Some(g) = &self.ground_truth {
            let _ = writeln!(s, "ground_truth: {}", g.display());
        }
        let _ = writeln!(s, "output_dir: {}", self.output_dir.display());
        let _ = writeln!(s, "start: {}", list(&self.start));
        let _ = writeln!(s, "end: {}", list(&self.end));
        let _ = writeln!(s, "spacing: {}", self.spacing);
        let _ = writeln!(s, "scales: {}", list(&self.scales));
        let _ = writeln!(s, "black_ridges: {}", self.black_ridges);
        let _ = writeln!(s, "target_volume: {}", self.target_volume);
        let _ = writeln!(s, "compactness: {}", self.compactness);
        let _ = writeln!(s, "theta_v: {}", self.theta_v);
        let _ = writeln!(s, "theta_d: {}", self.theta_d);
        let _ = writeln!(s, "delta: {}", self.delta);
        let _ = writeln!(s, "tolerance: {}", self.tolerance);
        let _ = writeln!(s, "wall_threshold: {}", self.wall_threshold);
        let _ = writeln!(s, "min_inside_fraction: {}", self.min_inside_fraction);
        let _ = writeln!(s, "refine: {}", self.refine);
        let _ = writeln!(s, "resume: {}", self.resume);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "threads: {}", self.threads);
        s
    }
}
