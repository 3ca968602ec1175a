use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use sbtrack::config::KEYS;
use sbtrack::metrics::MetricsReport;
use sbtrack::phantom::PhantomSpec;
use sbtrack::pipeline::{self, StopAfter};
use sbtrack::{Error, ErrorClass, TrackingConfig};

/// Track tubular structures through wall-aware supervoxel graphs.
#[derive(Parser, Debug)]
#[command(name = "sbtrack", version)]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full pipeline with must-pass nodes and the tour solver.
    Track(PipelineArgs),
    /// Plain shortest path between the endpoints.
    Baseline(PipelineArgs),
    /// Score a predicted polyline against a reference.
    Eval(EvalArgs),
    /// Generate a synthetic tube phantom.
    Phantom(PhantomArgs),
    /// Stop after the ridge filter (writes the wall map).
    Ridge(PipelineArgs),
    /// Stop after supervoxels (writes wall map and labels).
    Slic(PipelineArgs),
    /// Stop after the adjacency graph.
    Rag(PipelineArgs),
    /// Stop after must-pass sampling.
    Sample(PipelineArgs),
}

#[derive(Args, Debug, Default)]
struct PipelineArgs {
    /// Config file (`key: value` lines); flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    intensity: Option<PathBuf>,
    #[arg(long)]
    segmentation: Option<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Start coordinate in mm, `x,y,z`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    start: Option<[f64; 3]>,
    /// End coordinate in mm, `x,y,z`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    end: Option<[f64; 3]>,
    /// Isotropic working spacing in mm [default: 2].
    #[arg(long)]
    spacing: Option<f64>,
    /// Ridge filter scales in mm, comma separated [default: 2,3; decision].
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Desired supervoxel volume in mm^3 [default: 216].
    #[arg(long)]
    target_volume: Option<f64>,
    /// SLIC compactness [default: 0.01].
    #[arg(long)]
    compactness: Option<f64>,
    /// Minimum distance-map value of a peak in mm [default: 3].
    #[arg(long)]
    theta_v: Option<f64>,
    /// Minimum separation between peaks in mm [default: 6].
    #[arg(long)]
    theta_d: Option<f64>,
    /// Cutoff between graph and Euclidean tour costs in mm [default: 50].
    #[arg(long)]
    delta: Option<f64>,
    /// Evaluation tolerance in mm [default: 10].
    #[arg(long)]
    tolerance: Option<f64>,
    /// Wall map level treated as wall [default: 0.2; decision].
    #[arg(long)]
    wall_threshold: Option<f64>,
    /// Share of a supervoxel inside the mask needed to keep it [default: 0.5; decision].
    #[arg(long)]
    min_inside_fraction: Option<f64>,
    /// Refine the tour with 2-opt [default: on; decision].
    #[arg(long, overrides_with = "no_refine")]
    refine: bool,
    /// Use the plain nearest-fragment tour.
    #[arg(long)]
    no_refine: bool,
    /// Reuse wall map and labels cached in the output directory [decision].
    #[arg(long)]
    resume: bool,
    /// Seed recorded with the run [default: 0; decision].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predicted polyline.
    #[arg(long)]
    pred: PathBuf,
    /// Reference polyline.
    #[arg(long)]
    gt: PathBuf,
    /// Distance tolerance in mm [default: 10].
    #[arg(long, default_value_t = 10.0)]
    tolerance: f64,
    /// Write the report to this file.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Phantom spec file; built-in defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok([x, y, z]),
        _ => Err(format!("expected x,y,z, got {} values", v.len())),
    }
}

fn build_config(a: &PipelineArgs) -> Result<TrackingConfig, Error> {
    let mut c = match &a.config {
        Some(p) => TrackingConfig::load(p)?,
        None => {
            if a.start.is_none() || a.end.is_none() {
                return Err(Error::Config("without --config both --start and --end are required".into()));
            }
            TrackingConfig::default()
        }
    };
    macro_rules! set {
        ($($f:ident),*) => {
            $(if let Some(v) = a.$f.clone() {
                c.$f = v;
            })*
        };
    }
    set!(intensity, segmentation, output_dir, spacing, scales, target_volume, compactness);
    set!(theta_v, theta_d, delta, tolerance, wall_threshold, min_inside_fraction, seed);
    if let Some(g) = a.ground_truth.clone() {
        c.ground_truth = Some(g);
    }
    if let Some(v) = a.start {
        c.start = v;
    }
    if let Some(v) = a.end {
        c.end = v;
    }
    if a.refine {
        c.refine = true;
    }
    if a.no_refine {
        c.refine = false;
    }
    if a.resume {
        c.resume = true;
    }
    c.validate()?;
    Ok(c)
}

fn print_route(kind: &str, r: &pipeline::TrackResult, cfg: &TrackingConfig) {
    println!(
        "{kind}: {} nodes, {} must-pass, {} straight legs, length {:.1} mm",
        r.route.nodes.len(),
        r.must_pass.len(),
        r.route.straight_legs(),
        r.route.polyline.length()
    );
    println!("outputs: {}", cfg.output_dir.display());
    if let Some(m) = &r.metrics {
        println!("{}", MetricsReport::table_header());
        println!("{}", m.table_row());
        println!("{}", m.line_protocol());
    }
}

fn init_pool(threads: usize) -> Result<(), Error> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Invariant(format!("cannot configure thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = cli.threads;
    init_pool(threads.unwrap_or(0))?;
    let build_config = |a: &PipelineArgs| -> Result<TrackingConfig, Error> {
        let mut c = build_config(a)?;
        match threads {
            Some(n) => c.threads = n,
            None => init_pool(c.threads)?,
        }
        Ok(c)
    };
    match cli.command {
        Command::Track(a) => {
            let cfg = build_config(&a)?;
            let r = pipeline::run_track(&cfg)?;
            print_route("track", &r, &cfg);
        }
        Command::Baseline(a) => {
            let cfg = build_config(&a)?;
            let r = pipeline::run_baseline(&cfg)?;
            print_route("baseline", &r, &cfg);
        }
        Command::Eval(a) => {
            let m = pipeline::run_eval(&a.pred, &a.gt, a.tolerance, a.out.as_deref())?;
            println!("{}", MetricsReport::table_header());
            println!("{}", m.table_row());
            println!("{}", m.line_protocol());
        }
        Command::Phantom(a) => {
            let mut spec = match &a.spec {
                Some(p) => PhantomSpec::load(p)?,
                None => PhantomSpec::default(),
            };
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            let p = pipeline::run_phantom(&spec, &a.out)?;
            println!(
                "phantom: {:?} voxels, reference length {:.1} mm, written to {}",
                p.intensity.dims(),
                p.gt_path.length(),
                a.out.display()
            );
        }
        Command::Ridge(a) => pipeline::run_until(&build_config(&a)?, StopAfter::Ridge)?,
        Command::Slic(a) => pipeline::run_until(&build_config(&a)?, StopAfter::Slic)?,
        Command::Rag(a) => pipeline::run_until(&build_config(&a)?, StopAfter::Rag)?,
        Command::Sample(a) => pipeline::run_until(&build_config(&a)?, StopAfter::Sample)?,
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Io => 3,
        ErrorClass::Infeasible => 4,
        ErrorClass::Invariant => 5,
    }
}

fn config_keys_help() -> String {
    let mut s = String::from("Config keys (defaults marked `decision` are local choices):\n");
    for k in KEYS {
        let tag = if k.decision { ", decision" } else { "" };
        s.push_str(&format!("  {:<20} {} [default: {}{tag}]\n", k.key, k.help, k.default));
    }
    s
}

fn main() -> ExitCode {
    let matches = Cli::command().after_long_help(config_keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
