//! End-to-end orchestration: load, ridge filter, supervoxels, graph,
//! must-pass sampling, routing and evaluation. Every stage error is wrapped
//! with the stage name and a hint, and every artifact is written atomically.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::config::TrackingConfig;
use crate::error::{Error, Result};
use crate::graph::{build_rag, mask_nodes, Rag};
use crate::metrics::{evaluate, MetricsReport, DEFAULT_STEP};
use crate::phantom::{generate_phantom, Phantom, PhantomSpec};
use crate::polyline::{load_polyline, points_to_text, save_polyline, Point, Polyline};
use crate::ridge::{meijering_response, RidgeParams};
use crate::route::{build_simplified_graph, expand_tour, shortest_path_baseline, solve_tsp, Route};
use crate::sampling::{distance_transform, interior_mask, sample_must_pass, MustPassSet};
use crate::supervoxel::{load_labels, save_labels, slic_supervoxels, LabelVolume};
use crate::volume::{load_volume, resample_isotropic, save_volume, save_volume_as, write_atomic, Dtype, Interpolation, Volume};

pub const WALL_MAP_FILE: &str = "wall_map.vol";
pub const LABELS_FILE: &str = "labels.vol";
pub const RAG_FILE: &str = "rag.txt";
pub const MUST_PASS_FILE: &str = "must_pass.txt";
pub const ROUTE_FILE: &str = "route.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";
pub const METRICS_FILE: &str = "metrics.txt";
pub const BASELINE_ROUTE_FILE: &str = "baseline_route.txt";
pub const BASELINE_DIAGNOSTICS_FILE: &str = "baseline_diagnostics.txt";
pub const BASELINE_METRICS_FILE: &str = "baseline_metrics.txt";

fn stage<T>(name: &'static str, hint: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let out = f().map_err(|e| Error::Stage {
        stage: name,
        hint: hint.to_string(),
        source: Box::new(e),
    });
    info!("stage {name}: {:.3} s", t0.elapsed().as_secs_f64());
    out
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub intensity: Volume,
    pub segmentation: Volume,
    pub ground_truth: Option<Polyline>,
}

impl Inputs {
    /// Loads the configured inputs and resamples them to the working spacing.
    pub fn load(cfg: &TrackingConfig) -> Result<Inputs> {
        stage("load", "check the input paths and file headers", || {
            cfg.check_inputs()?;
            let intensity = load_volume(&cfg.intensity)?;
            let segmentation = load_volume(&cfg.segmentation)?;
            let ground_truth = cfg.ground_truth.as_ref().map(load_polyline).transpose()?;
            Inputs::prepare(intensity, segmentation, ground_truth, cfg.spacing)
        })
    }

    pub fn prepare(
        intensity: Volume,
        segmentation: Volume,
        ground_truth: Option<Polyline>,
        spacing: f64,
    ) -> Result<Inputs> {
        if !intensity.grid().same_geometry(segmentation.grid()) {
            return Err(Error::GridMismatch(format!(
                "intensity {:?} vs segmentation {:?}",
                intensity.dims(),
                segmentation.dims()
            )));
        }
        Ok(Inputs {
            intensity: resample_isotropic(&intensity, spacing, Interpolation::Trilinear)?,
            segmentation: resample_isotropic(&segmentation, spacing, Interpolation::Nearest)?,
            ground_truth,
        })
    }

    pub fn from_phantom(p: &Phantom) -> Inputs {
        Inputs {
            intensity: p.intensity.clone(),
            segmentation: p.segmentation.clone(),
            ground_truth: Some(p.gt_path.clone()),
        }
    }
}

/// Stage outputs up to the masked adjacency graph.
#[derive(Debug, Clone)]
pub struct GraphStage {
    pub wall_map: Volume,
    pub labels: LabelVolume,
    pub rag: Rag,
    pub node_of_label: Vec<Option<usize>>,
}

fn cached<T>(cache: Option<&Path>, file: &str, load: impl FnOnce(&Path) -> Result<T>) -> Option<T> {
    let path = cache?.join(file);
    if !path.is_file() {
        return None;
    }
    match load(&path) {
        Ok(v) => {
            info!("reusing cached {}", path.display());
            Some(v)
        }
        Err(e) => {
            warn!("ignoring unusable cache {}: {e}", path.display());
            None
        }
    }
}

pub fn wall_map_stage(inputs: &Inputs, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<Volume> {
    stage("ridge", "check `scales` against the voxel spacing", || {
        let grid = inputs.intensity.grid();
        let reuse = cache.filter(|_| cfg.resume);
        if let Some(w) = cached(reuse, WALL_MAP_FILE, |p| load_volume(p)).filter(|w| w.grid().same_geometry(grid)) {
            return Ok(w);
        }
        let params = RidgeParams {
            scales: cfg.scales.clone(),
            black_ridges: cfg.black_ridges,
        };
        let wall = meijering_response(&inputs.intensity, &params)?;
        if let Some(dir) = cache {
            save_volume(&wall, dir.join(WALL_MAP_FILE))?;
        }
        Ok(wall)
    })
}

pub fn supervoxel_stage(wall: &Volume, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<LabelVolume> {
    stage("slic", "check `target_volume` and `compactness`", || {
        let reuse = cache.filter(|_| cfg.resume);
        if let Some(l) = cached(reuse, LABELS_FILE, |p| load_labels(p)).filter(|l| l.grid().same_geometry(wall.grid())) {
            return Ok(l);
        }
        let labels = slic_supervoxels(wall, cfg.target_volume, cfg.compactness)?;
        if let Some(dir) = cache {
            save_labels(&labels, dir.join(LABELS_FILE))?;
        }
        Ok(labels)
    })
}

pub fn graph_stage(inputs: &Inputs, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<GraphStage> {
    let wall_map = wall_map_stage(inputs, cfg, cache)?;
    let labels = supervoxel_stage(&wall_map, cfg, cache)?;
    let rag = stage(
        "rag",
        "check that the segmentation overlaps the volume or lower `min_inside_fraction`",
        || {
            let full = build_rag(&labels, &wall_map)?;
            let rag = mask_nodes(&full, &inputs.segmentation, &labels, cfg.min_inside_fraction)?;
            info!("graph: {} of {} nodes kept, {} edges", rag.node_count(), full.node_count(), rag.edges().len());
            if let Some(dir) = cache {
                rag.save(dir.join(RAG_FILE))?;
            }
            Ok(rag)
        },
    )?;
    let node_of_label = rag.label_map(labels.label_count());
    Ok(GraphStage {
        wall_map,
        labels,
        rag,
        node_of_label,
    })
}

pub fn sampling_stage(inputs: &Inputs, graph: &GraphStage, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<MustPassSet> {
    stage("sample", "lower `theta_v` or `wall_threshold`", || {
        let interior = interior_mask(&inputs.segmentation, &graph.wall_map, cfg.wall_threshold)?;
        let dist = distance_transform(&interior);
        let mp = sample_must_pass(&dist, &graph.labels, &graph.node_of_label, cfg.theta_v, cfg.theta_d)?;
        info!("must-pass: {} nodes, {} peaks dropped", mp.len(), mp.dropped);
        if let Some(dir) = cache {
            write_atomic(&dir.join(MUST_PASS_FILE), points_to_text(&mp.positions).as_bytes())?;
        }
        Ok(mp)
    })
}

/// Masked-graph node of the supervoxel containing `p`.
pub fn node_at(graph: &GraphStage, p: Point, which: &str) -> Result<usize> {
    let grid = graph.labels.grid();
    let c = grid
        .voxel_at(p)
        .ok_or_else(|| Error::InvalidInput(format!("{which} coordinate {p:?} lies outside the volume")))?;
    let label = graph.labels.label_at(grid.index(c[0], c[1], c[2]));
    graph.node_of_label[label as usize].ok_or_else(|| {
        Error::Pruned(format!(
            "{which} node pruned: supervoxel {label} at {p:?} lies outside the segmentation"
        ))
    })
}

fn endpoints(graph: &GraphStage, cfg: &TrackingConfig) -> Result<(usize, usize)> {
    let st = node_at(graph, cfg.start, "start")?;
    let ed = node_at(graph, cfg.end, "end")?;
    if st == ed {
        return Err(Error::InvalidInput(format!(
            "start and end fall in the same supervoxel (node {st}); move them apart"
        )));
    }
    Ok((st, ed))
}

#[derive(Debug, Clone)]
pub struct TrackResult {
    pub route: Route,
    pub start_node: usize,
    pub end_node: usize,
    /// Empty for the baseline.
    pub must_pass: MustPassSet,
    pub metrics: Option<MetricsReport>,
}

const ROUTE_HINT: &str = "move the start/end coordinates inside the segmentation";

fn score(route: &Route, inputs: &Inputs, cfg: &TrackingConfig) -> Result<Option<MetricsReport>> {
    inputs
        .ground_truth
        .as_ref()
        .map(|gt| stage("eval", "check the reference polyline", || evaluate(&route.polyline, gt, cfg.tolerance, DEFAULT_STEP)))
        .transpose()
}

/// Must-pass tour through the simplified graph, expanded onto the graph.
pub fn track(inputs: &Inputs, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<(GraphStage, TrackResult)> {
    cfg.validate()?;
    let graph = graph_stage(inputs, cfg, cache)?;
    let must_pass = sampling_stage(inputs, &graph, cfg, cache)?;
    let (route, st, ed) = stage("route", ROUTE_HINT, || {
        let (st, ed) = endpoints(&graph, cfg)?;
        let mp = must_pass.without(&[st, ed]);
        let sg = build_simplified_graph(&graph.rag, st, ed, &mp.nodes, cfg.delta)?;
        let order = solve_tsp(&sg, cfg.refine);
        let route = expand_tour(&graph.rag, &sg, &order)?;
        if !route.is_connected() {
            warn!("{} route legs had no graph walk and were joined straight", route.straight_legs());
        }
        Ok((route, st, ed))
    })?;
    let metrics = score(&route, inputs, cfg)?;
    Ok((
        graph,
        TrackResult {
            route,
            start_node: st,
            end_node: ed,
            must_pass,
            metrics,
        },
    ))
}

/// Plain shortest path between the endpoints.
pub fn baseline(inputs: &Inputs, cfg: &TrackingConfig, cache: Option<&Path>) -> Result<(GraphStage, TrackResult)> {
    cfg.validate()?;
    let graph = graph_stage(inputs, cfg, cache)?;
    let (route, st, ed) = stage("route", ROUTE_HINT, || {
        let (st, ed) = endpoints(&graph, cfg)?;
        Ok((shortest_path_baseline(&graph.rag, st, ed)?, st, ed))
    })?;
    let metrics = score(&route, inputs, cfg)?;
    Ok((
        graph,
        TrackResult {
            route,
            start_node: st,
            end_node: ed,
            must_pass: MustPassSet::empty(),
            metrics,
        },
    ))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_route(result: &TrackResult, dir: &Path, files: [&str; 3]) -> Result<()> {
    stage("write", "check that the output directory is writable", || {
        save_polyline(&result.route.polyline, dir.join(files[0]))?;
        write_atomic(&dir.join(files[1]), result.route.diagnostics().as_bytes())?;
        if let Some(m) = &result.metrics {
            m.save(dir.join(files[2]))?;
        }
        Ok(())
    })
}

/// Loads inputs, runs [`track`] and writes every artifact to the output directory.
pub fn run_track(cfg: &TrackingConfig) -> Result<TrackResult> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let inputs = Inputs::load(cfg)?;
    let (_, result) = track(&inputs, cfg, Some(&cfg.output_dir))?;
    write_route(&result, &cfg.output_dir, [ROUTE_FILE, DIAGNOSTICS_FILE, METRICS_FILE])?;
    Ok(result)
}

pub fn run_baseline(cfg: &TrackingConfig) -> Result<TrackResult> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let inputs = Inputs::load(cfg)?;
    let (_, result) = baseline(&inputs, cfg, Some(&cfg.output_dir))?;
    write_route(
        &result,
        &cfg.output_dir,
        [BASELINE_ROUTE_FILE, BASELINE_DIAGNOSTICS_FILE, BASELINE_METRICS_FILE],
    )?;
    Ok(result)
}

/// Pipeline prefix for debugging, stopping after the named stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAfter {
    Ridge,
    Slic,
    Rag,
    Sample,
}

pub fn run_until(cfg: &TrackingConfig, stop: StopAfter) -> Result<()> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let dir = Some(cfg.output_dir.as_path());
    let inputs = Inputs::load(cfg)?;
    let wall = wall_map_stage(&inputs, cfg, dir)?;
    if stop == StopAfter::Ridge {
        return Ok(());
    }
    supervoxel_stage(&wall, cfg, dir)?;
    if stop == StopAfter::Slic {
        return Ok(());
    }
    // Later stages reuse what was just written.
    let resumed = TrackingConfig {
        resume: true,
        ..cfg.clone()
    };
    let graph = graph_stage(&inputs, &resumed, dir)?;
    if stop == StopAfter::Sample {
        sampling_stage(&inputs, &graph, cfg, dir)?;
    }
    Ok(())
}

pub fn run_eval(pred: &Path, gt: &Path, tol: f64, out: Option<&Path>) -> Result<MetricsReport> {
    stage("eval", "check the polyline files", || {
        let report = evaluate(&load_polyline(pred)?, &load_polyline(gt)?, tol, DEFAULT_STEP)?;
        if let Some(out) = out {
            report.save(out)?;
        }
        Ok(report)
    })
}

pub const PHANTOM_INTENSITY_FILE: &str = "intensity.vol";
pub const PHANTOM_SEGMENTATION_FILE: &str = "segmentation.vol";
pub const PHANTOM_GT_FILE: &str = "gt_path.txt";
pub const PHANTOM_CONFIG_FILE: &str = "track.cfg";

/// Tracking config for a phantom written to `dir`, endpoints at the
/// reference path ends.
pub fn phantom_config(p: &Phantom, dir: &Path) -> TrackingConfig {
    TrackingConfig {
        intensity: dir.join(PHANTOM_INTENSITY_FILE),
        segmentation: dir.join(PHANTOM_SEGMENTATION_FILE),
        ground_truth: Some(dir.join(PHANTOM_GT_FILE)),
        output_dir: dir.join("out"),
        start: p.gt_path.first(),
        end: p.gt_path.last(),
        spacing: p.intensity.grid().spacing[0],
        ..TrackingConfig::default()
    }
}

/// Writes intensity, segmentation, reference path and a ready-to-run
/// tracking config into `dir`.
pub fn run_phantom(spec: &PhantomSpec, dir: &Path) -> Result<Phantom> {
    stage("phantom", "increase dims or reduce bends/touch_pairs", || {
        let p = generate_phantom(spec)?;
        create_dir(dir)?;
        save_volume(&p.intensity, dir.join(PHANTOM_INTENSITY_FILE))?;
        save_volume_as(&p.segmentation, dir.join(PHANTOM_SEGMENTATION_FILE), Dtype::U8)?;
        save_polyline(&p.gt_path, dir.join(PHANTOM_GT_FILE))?;
        let cfg = phantom_config(&p, Path::new("."));
        write_atomic(&dir.join(PHANTOM_CONFIG_FILE), cfg.to_text().as_bytes())?;
        Ok(p)
    })
}

/// Path of an artifact inside the configured output directory.
pub fn artifact(cfg: &TrackingConfig, file: &str) -> PathBuf {
    cfg.output_dir.join(file)
}
