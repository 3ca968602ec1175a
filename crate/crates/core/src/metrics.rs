//! Path-versus-reference evaluation. Both curves are resampled at a fixed arc
//! step; every point-to-curve distance is measured against the segments of
//! the other curve, not its samples.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::polyline::{Point, Polyline};
use crate::volume::write_atomic;

pub const DEFAULT_TOLERANCE: f64 = 10.0;
pub const DEFAULT_STEP: f64 = 1.0;
/// Backward motion along the prediction tolerated inside an error-free run.
pub const REVERSAL_SLACK: f64 = 2.0;

/// Points at arc positions `0, step, 2 step, ...` plus the final endpoint.
pub fn resample_polyline(p: &Polyline, step: f64) -> Result<Polyline> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    let cum = p.cumulative();
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return Err(Error::InvalidInput("polyline has zero length".into()));
    }
    let pts = p.points();
    let mut out = Vec::with_capacity((total / step) as usize + 2);
    let mut seg = 0;
    let mut k = 0usize;
    loop {
        let s = k as f64 * step;
        if s >= total - 1e-9 * total.max(1.0) {
            break;
        }
        while cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let (a, b) = (pts[seg], pts[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
        k += 1;
    }
    out.push(p.last());
    Polyline::from_points_dedup(out)
}

fn distances_to(samples: &[Point], curve: &Polyline) -> Vec<f64> {
    samples.par_iter().map(|&p| curve.distance_to(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMatch {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Percent.
    pub precision: f64,
    /// Percent.
    pub recall: f64,
}

/// Tolerance matching. Samples are the vertices of the given polylines.
pub fn match_paths(pred: &Polyline, gt: &Polyline, tol: f64) -> PathMatch {
    let dp = distances_to(pred.points(), gt);
    let dg = distances_to(gt.points(), pred);
    let tp = dp.iter().filter(|&&d| d <= tol).count();
    let fp = dp.len() - tp;
    let fn_ = dg.iter().filter(|&&d| d > tol).count();
    PathMatch {
        tp,
        fp,
        fn_,
        precision: 100.0 * tp as f64 / dp.len() as f64,
        recall: 100.0 * (dg.len() - fn_) as f64 / dg.len() as f64,
    }
}

/// Mean of the two directed mean sample-to-curve distances.
pub fn curve_to_curve_distance(pred: &Polyline, gt: &Polyline) -> f64 {
    let mean = |d: Vec<f64>| d.iter().sum::<f64>() / d.len() as f64;
    0.5 * (mean(distances_to(pred.points(), gt)) + mean(distances_to(gt.points(), pred)))
}

/// Longest reference stretch tracked without error. Each reference sample
/// is assigned its nearest arc position on the prediction. A run continues
/// while samples stay within `tol` and those positions move monotonically in
/// one direction, allowing back-steps of up to `REVERSAL_SLACK`. A broken
/// run restarts at the offending sample.
pub fn max_error_free_length(pred: &Polyline, gt: &Polyline, tol: f64) -> f64 {
    let pcum = pred.cumulative();
    let gcum = gt.cumulative();
    let proj: Vec<_> = gt.points().par_iter().map(|&p| pred.project_with(p, &pcum)).collect();

    let mut best = 0.0f64;
    let mut run: Option<Run> = None;
    for (i, pr) in proj.iter().enumerate() {
        if pr.distance > tol {
            run = None;
            continue;
        }
        let a = pr.arc;
        run = match run {
            Some(mut r) => Some(if r.extend(a) { r } else { Run::new(i, a) }),
            None => Some(Run::new(i, a)),
        };
        let r = run.as_ref().unwrap();
        best = best.max(gcum[i] - gcum[r.start]);
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start: usize,
    lo: f64,
    hi: f64,
    increasing: bool,
    decreasing: bool,
}

impl Run {
    fn new(start: usize, a: f64) -> Run {
        Run {
            start,
            lo: a,
            hi: a,
            increasing: true,
            decreasing: true,
        }
    }

    fn extend(&mut self, a: f64) -> bool {
        self.increasing &= a >= self.hi - REVERSAL_SLACK;
        self.decreasing &= a <= self.lo + REVERSAL_SLACK;
        self.lo = self.lo.min(a);
        self.hi = self.hi.max(a);
        self.increasing || self.decreasing
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub curve_to_curve: f64,
    pub max_len_no_error: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tolerance: f64,
    pub step: f64,
    pub pred_length: f64,
    pub gt_length: f64,
}

/// Resamples both curves at `step` and computes every metric.
pub fn evaluate(pred: &Polyline, gt: &Polyline, tol: f64, step: f64) -> Result<MetricsReport> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::param("tolerance", format!("must be non-negative, got {tol}")));
    }
    let p = resample_polyline(pred, step)?;
    let g = resample_polyline(gt, step)?;
    let m = match_paths(&p, &g, tol);
    Ok(MetricsReport {
        precision: m.precision,
        recall: m.recall,
        curve_to_curve: curve_to_curve_distance(&p, &g),
        max_len_no_error: max_error_free_length(&p, &g, tol),
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        tolerance: tol,
        step,
        pred_length: pred.length(),
        gt_length: gt.length(),
    })
}

const FIELDS: [&str; 11] = [
    "precision_pct",
    "recall_pct",
    "curve_to_curve_mm",
    "max_len_no_error_mm",
    "tp",
    "fp",
    "fn",
    "tolerance_mm",
    "resample_step_mm",
    "pred_length_mm",
    "gt_length_mm",
];

impl MetricsReport {
    fn values(&self) -> [String; 11] {
        [
            self.precision.to_string(),
            self.recall.to_string(),
            self.curve_to_curve.to_string(),
            self.max_len_no_error.to_string(),
            self.tp.to_string(),
            self.fp.to_string(),
            self.fn_.to_string(),
            self.tolerance.to_string(),
            self.step.to_string(),
            self.pred_length.to_string(),
            self.gt_length.to_string(),
        ]
    }

    /// Flat `key: value` file, with the matching conventions spelled out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# tp: predicted samples within tolerance of the reference curve\n");
        s.push_str("# fn: reference samples farther than tolerance from the predicted curve\n");
        let _ = writeln!(
            s,
            "# error-free runs: within tolerance, monotone along the prediction, reversal slack {REVERSAL_SLACK} mm"
        );
        for (k, v) in FIELDS.iter().zip(self.values()) {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<MetricsReport> {
        let mut kv = KeyValues::parse(text)?;
        let mut f = |k: &str| -> Result<f64> { kv.take_parsed::<f64>(k)?.ok_or_else(|| Error::Config(format!("missing key `{k}`"))) };
        let report = MetricsReport {
            precision: f("precision_pct")?,
            recall: f("recall_pct")?,
            curve_to_curve: f("curve_to_curve_mm")?,
            max_len_no_error: f("max_len_no_error_mm")?,
            tp: f("tp")? as usize,
            fp: f("fp")? as usize,
            fn_: f("fn")? as usize,
            tolerance: f("tolerance_mm")?,
            step: f("resample_step_mm")?,
            pred_length: f("pred_length_mm")?,
            gt_length: f("gt_length_mm")?,
        };
        kv.finish()?;
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    /// Single-line `metrics key=value ...` record for machine consumption.
    pub fn line_protocol(&self) -> String {
        let fields: Vec<String> = FIELDS.iter().zip(self.values()).map(|(k, v)| format!("{k}={v}")).collect();
        format!("metrics {}", fields.join(" "))
    }

    pub fn table_header() -> &'static str {
        "Precision (%) | Recall (%) | Curve-to-curve (mm) | Max. len. w/o error (mm)"
    }

    pub fn table_row(&self) -> String {
        format!(
            "{:.1} | {:.1} | {:.2} | {:.1}",
            self.precision, self.recall, self.curve_to_curve, self.max_len_no_error
        )
    }
}
