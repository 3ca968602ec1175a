//! Ordered 3D point sequences in physical (mm) coordinates.
//!
//! File format: one `x y z` triple per line. Blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::write_atomic;

pub type Point = [f64; 3];

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Closest point on segment `ab` to `p`: returns (distance, parameter in [0,1]).
#[inline]
pub fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    // Offsets from `a` only, so the result is exact under common translation.
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1], ap[2] - t * ab[2]];
    ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(), t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
}

/// Nearest location on a polyline.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub distance: f64,
    /// Arc length from the first point to the projected location.
    pub arc: f64,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "polyline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "points {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Polyline { points })
    }

    /// Builds a polyline after dropping consecutive duplicate points.
    pub fn from_points_dedup(mut points: Vec<Point>) -> Result<Self> {
        points.dedup();
        Polyline::new(points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(w[0], w[1])).sum()
    }

    /// Cumulative arc length at each vertex.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.points.len());
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += dist(w[0], w[1]);
            out.push(acc);
        }
        out
    }

    /// Exact point-to-curve projection against every segment.
    pub fn project(&self, p: Point) -> Projection {
        self.project_with(p, &self.cumulative())
    }

    pub(crate) fn project_with(&self, p: Point, cum: &[f64]) -> Projection {
        let mut best = Projection {
            distance: f64::INFINITY,
            arc: 0.0,
        };
        for (s, w) in self.points.windows(2).enumerate() {
            let (d, t) = point_segment(p, w[0], w[1]);
            if d < best.distance {
                best = Projection {
                    distance: d,
                    arc: cum[s] + t * (cum[s + 1] - cum[s]),
                };
            }
        }
        best
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        self.points
            .windows(2)
            .map(|w| point_segment(p, w[0], w[1]).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, by: Point) -> Polyline {
        Polyline {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + by[0], p[1] + by[1], p[2] + by[2]])
                .collect(),
        }
    }

    pub fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }

    pub fn to_text(&self) -> String {
        points_to_text(&self.points)
    }
}

/// Point list in polyline text format. Also used for point sets that are not
/// curves (must-pass overlays).
pub fn points_to_text(points: &[Point]) -> String {
    let mut s = String::with_capacity(points.len() * 40);
    for p in points {
        writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    s
}

pub fn parse_polyline(text: &str) -> Result<Polyline> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| Error::MalformedPolyline {
            line: lineno + 1,
            reason,
        };
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| bad(format!("non-numeric token {t:?}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(bad(format!("expected 3 coordinates, got {}", vals.len())));
        }
        points.push([vals[0], vals[1], vals[2]]);
    }
    if points.len() < 2 {
        return Err(Error::MalformedPolyline {
            line: text.lines().count(),
            reason: format!("need at least 2 points, found {}", points.len()),
        });
    }
    Polyline::new(points).map_err(|e| Error::MalformedPolyline {
        line: 0,
        reason: e.to_string(),
    })
}

pub fn load_polyline(path: impl AsRef<Path>) -> Result<Polyline> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_polyline(&text)
}

pub fn save_polyline(line: &Polyline, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), line.to_text().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        let p = Polyline::new(vec![[0.0, 0.0, 0.0], [1.25, -3.5, 1e-7]]).unwrap();
        save_polyline(&p, &path).unwrap();
        assert_eq!(load_polyline(&path).unwrap(), p);
    }

    #[test]
    fn single_point_rejected() {
        assert!(parse_polyline("1 2 3\n").is_err());
        assert!(Polyline::new(vec![[0.0; 3]]).is_err());
    }

    #[test]
    fn non_numeric_token_rejected() {
        let err = parse_polyline("1 2 3\n4 five 6\n").unwrap_err();
        assert!(matches!(err, Error::MalformedPolyline { line: 2, .. }));
    }

    #[test]
    fn repeated_points_rejected() {
        assert!(Polyline::new(vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]).is_err());
        let p = Polyline::from_points_dedup(vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn projection_uses_segments() {
        let p = Polyline::new(vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0]]).unwrap();
        let pr = p.project([4.0, 3.0, 0.0]);
        assert!((pr.distance - 3.0).abs() < 1e-12);
        assert!((pr.arc - 4.0).abs() < 1e-12);
        assert!((p.distance_to([-3.0, 4.0, 0.0]) - 5.0).abs() < 1e-12);
    }
}
