//! Command-line entry point.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::codec::{fit_size_model, DctCodec, SegmentCodec, DEFAULT_Q};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::innovation::segment_innovation;
use crate::partition::{lloyd_optimize, select_num_segments, CostParams, LloydOptions, Partition, Segment};
use crate::server::ServerState;
use crate::sim::{self, MultiUserConfig, Representation, StreamingCosts, WalkPolicy, DEFAULT_FPS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_RANGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "navseg", version, about = "Navigation-domain partitioning and segment streaming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Render every view of a scene and write a visibility summary.
    BuildScene(BuildSceneArgs),
    /// Normalized similarity of one view with every other view.
    SimilarityCurve(SimilarityArgs),
    /// Innovation and coded size of a fixed segment for every reference.
    SweepReference(SweepArgs),
    /// Optimize a partition with a given number of segments.
    Partition(PartitionArgs),
    /// Choose the number of segments for a rate weight.
    SelectNv(SelectNvArgs),
    /// Coded innovation size against innovation size over many segments.
    AuxSweep(AuxSweepArgs),
    /// Reconstruct every member of a partition and report quality.
    Reconstruct(ReconstructArgs),
    /// Seeded random-walk sessions against a partition.
    Simulate(SimulateArgs),
    /// Multi-user server load for one representation or a sweep of T.
    Multiuser(MultiuserArgs),
    /// Serve a partition over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SceneArg {
    /// Scene JSON with a domain section.
    #[arg(long)]
    pub scene: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildSceneArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimilarityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    /// Reference view, 1-based.
    #[arg(long = "ref", default_value_t = 1)]
    pub reference: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    /// Inclusive 0-based view range, `FIRST..LAST` or `FIRST-LAST`.
    #[arg(long)]
    pub segment: String,
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PartitionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub nv: usize,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: u32,
    /// Navigation period bounding the number of segments.
    #[arg(long, default_value_t = 1)]
    pub nt: usize,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectNvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub nt: usize,
    #[arg(long, default_value_t = DEFAULT_Q)]
    pub q: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AuxSweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    /// Quantizer steps, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 16, 32])]
    pub q: Vec<u32>,
    #[arg(long, default_value_t = 24)]
    pub segments: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReconstructArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub walks: usize,
    /// Navigation periods, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5])]
    pub nt: Vec<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Horizon in seconds.
    #[arg(long, default_value_t = 100)]
    pub horizon: usize,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MultiuserArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub nnu: usize,
    /// Mean navigation time in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub t: f64,
    /// Mean navigation times to sweep instead of a single run.
    #[arg(long, value_delimiter = ',')]
    pub t_sweep: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub duration: usize,
    #[arg(long, value_enum, default_value_t = Representation::Partitioned)]
    pub repr: Representation,
    #[arg(long, default_value_t = 5)]
    pub nt: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    pub fps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArg,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 5)]
    pub nt: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    created: String,
    seed: Option<u64>,
    output: String,
    config: &'a Command,
}

/// Path of the manifest written next to `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_manifest(command: &Command, out: &Path, seed: Option<u64>) -> Result<()> {
    let manifest = Manifest {
        tool: "navseg",
        version: env!("CARGO_PKG_VERSION"),
        created: chrono::Utc::now().to_rfc3339(),
        seed,
        output: out.display().to_string(),
        config: command,
    };
    std::fs::write(manifest_path(out), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn ensure_parent(out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn range_check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(what.to_string()))
    }
}

fn check_q(q: u32) -> Result<()> {
    range_check((1..=u16::MAX as u32).contains(&q), "--q must be in 1..=65535")
}

/// Parses `A..B` or `A-B` into the inclusive range `A..=B`.
pub fn parse_segment(spec: &str) -> Result<Vec<usize>> {
    let (a, b) = spec
        .split_once("..")
        .or_else(|| spec.split_once('-'))
        .ok_or_else(|| Error::InvalidParameter(format!("segment `{spec}` is not FIRST..LAST")))?;
    let parse = |s: &str| {
        s.trim().parse::<usize>().map_err(|_| Error::InvalidParameter(format!("bad view index `{s}`")))
    };
    let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
    range_check(a <= b, "segment range is empty")?;
    Ok((a..=b).collect())
}

fn csv_writer(out: &Path) -> Result<csv::Writer<std::fs::File>> {
    ensure_parent(out)?;
    Ok(csv::Writer::from_path(out)?)
}

/// Sizes needed by the multi-user baselines: every view intra coded and
/// the whole domain as one optimized segment.
pub fn streaming_costs(dataset: &Dataset, partition: &Partition) -> Result<StreamingCosts> {
    let codec = DctCodec::new(dataset, partition.q);
    let intra_bits = (0..dataset.len()).map(|v| codec.reference_bits(v)).collect::<Result<Vec<_>>>()?;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let (_, joint) = crate::partition::refine_reference(&dataset.sets, &all, &codec)?;
    Ok(StreamingCosts { partition: partition.clone(), intra_bits, joint_bits: joint.size_bits() })
}

fn load_partition_for(dataset: &Dataset, path: &Path) -> Result<Partition> {
    let partition = Partition::load(path)?;
    if partition.n_views != dataset.len() {
        return Err(Error::InvalidParameter("partition does not match the scene's domain".into()));
    }
    Ok(partition)
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::BuildScene(a) => {
            let ds = Dataset::load(&a.scene.scene)?;
            #[derive(Serialize)]
            struct Summary<'a> {
                name: Option<&'a str>,
                voxels: usize,
                views: usize,
                visible: Vec<usize>,
            }
            let summary = Summary {
                name: ds.scene.config.name.as_deref(),
                voxels: ds.scene.voxel_count(),
                views: ds.len(),
                visible: ds.sets.iter().map(|s| s.len()).collect(),
            };
            ensure_parent(&a.out)?;
            std::fs::write(&a.out, serde_json::to_string_pretty(&summary)? + "\n")?;
            println!("{} voxels, {} views", summary.voxels, summary.views);
            write_manifest(command, &a.out, None)
        }
        Command::SimilarityCurve(a) => {
            let ds = Dataset::load(&a.scene.scene)?;
            range_check(a.reference >= 1 && a.reference <= ds.len(), "--ref must be a 1-based view index")?;
            let from = a.reference - 1;
            let curve = ds.similarity_curve(from)?;
            let mut w = csv_writer(&a.out)?;
            w.write_record(["view", "similarity", "normalized"])?;
            for (k, g) in curve.iter().enumerate() {
                w.write_record([(k + 1).to_string(), ds.similarity(from, k).to_string(), g.to_string()])?;
            }
            w.flush()?;
            write_manifest(command, &a.out, None)
        }
        Command::SweepReference(a) => {
            check_q(a.q)?;
            let ds = Dataset::load(&a.scene.scene)?;
            let members = parse_segment(&a.segment)?;
            for &m in &members {
                ds.domain.check_index(m)?;
            }
            let codec = DctCodec::new(&ds, a.q);
            let mut w = csv_writer(&a.out)?;
            w.write_record(["reference", "phi_size", "ref_bits", "aux_bits", "total_bits"])?;
            for &r in &members {
                let seg = Segment::build(&ds.sets, r, &members, &codec)?;
                w.write_record([r, seg.phi_size, seg.ref_bits as usize, seg.aux_bits as usize, seg.size_bits() as usize]
                    .map(|x| x.to_string()))?;
            }
            w.flush()?;
            write_manifest(command, &a.out, None)
        }
        Command::Partition(a) => {
            check_q(a.q)?;
            range_check(a.nv >= 1, "--nv must be at least 1")?;
            range_check(a.nt >= 1, "--nt must be at least 1")?;
            range_check(a.epsilon >= 0.0, "--epsilon must be nonnegative")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let params = CostParams::new(&ds.domain, a.lambda, 0.0, a.q)?;
            let codec = DctCodec::new(&ds, a.q);
            let options = LloydOptions { max_iters: a.max_iters, epsilon: a.epsilon, nt: a.nt };
            let p = lloyd_optimize(&ds.domain, &ds.sets, a.nv, &params, &codec, &options)?;
            ensure_parent(&a.out)?;
            p.save(&a.out)?;
            println!(
                "objective {:.1} (storage {:.0}, rate {:.1}), {} iterations, refs {:?}",
                p.costs.objective,
                p.costs.storage,
                p.costs.rate,
                p.iterations,
                p.refs()
            );
            write_manifest(command, &a.out, None)
        }
        Command::SelectNv(a) => {
            check_q(a.q)?;
            range_check(a.nt >= 1, "--nt must be at least 1")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let params = CostParams::new(&ds.domain, 0.0, a.mu, a.q)?;
            let codec = DctCodec::new(&ds, a.q);
            let sel = select_num_segments(&ds.domain, &ds.sets, &params, &codec, a.nt)?;
            let mut w = csv_writer(&a.out)?;
            w.write_record(["nv", "mean_ref_bits", "mean_aux_bits", "objective"])?;
            for r in &sel.records {
                w.write_record([r.nv.to_string(), r.mean_ref_bits.to_string(), r.mean_aux_bits.to_string(), r.objective.to_string()])?;
            }
            w.flush()?;
            println!("N_V* = {} (M = {})", sel.best_nv, sel.max_segments);
            write_manifest(command, &a.out, None)
        }
        Command::AuxSweep(a) => {
            for &q in &a.q {
                check_q(q)?;
            }
            range_check(a.segments >= 2, "--segments must be at least 2")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let segments = sweep_segments(ds.len(), a.segments);
            let mut w = csv_writer(&a.out)?;
            w.write_record(["q", "first", "last", "reference", "phi_size", "aux_bits"])?;
            for &q in &a.q {
                let codec = DctCodec::new(&ds, q);
                let mut points = Vec::new();
                for (first, last) in &segments {
                    let members: Vec<usize> = (*first..=*last).collect();
                    let reference = (first + last) / 2;
                    let phi = segment_innovation(&ds.sets, reference, &members)?;
                    let bits = codec.aux_bits(&phi)?;
                    points.push((phi.size() as f64, bits as f64));
                    w.write_record([q as usize, *first, *last, reference, phi.size(), bits as usize].map(|x| x.to_string()))?;
                }
                let fit = fit_size_model(&points)?;
                println!("q={q}: slope {:.3} bits/voxel, intercept {:.1}, r {:.4}", fit.slope, fit.intercept, fit.r);
            }
            w.flush()?;
            write_manifest(command, &a.out, None)
        }
        Command::Reconstruct(a) => {
            let ds = Dataset::load(&a.scene.scene)?;
            let p = load_partition_for(&ds, &a.partition)?;
            let rows = crate::codec::reconstruct::evaluate_partition(&ds, &p, &Default::default())?;
            let mut w = csv_writer(&a.out)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
            write_manifest(command, &a.out, None)
        }
        Command::Simulate(a) => {
            range_check(a.walks >= 1, "--walks must be at least 1")?;
            range_check(a.nt.iter().all(|&t| t >= 1), "--nt values must be at least 1")?;
            range_check(a.fps >= 1 && a.horizon >= 1, "--fps and --horizon must be positive")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let p = load_partition_for(&ds, &a.partition)?;
            let rows = sim::average_cumulative(&p, &ds.domain, a.walks, a.horizon, &a.nt, &WalkPolicy::default(), a.seed, a.fps)?;
            let mut w = csv_writer(&a.out)?;
            w.write_record(["nt", "walks", "horizon_s", "seed", "mean_cumulative_bits"])?;
            for r in rows {
                w.write_record([r.nt.to_string(), a.walks.to_string(), a.horizon.to_string(), a.seed.to_string(), r.mean_bits.to_string()])?;
            }
            w.flush()?;
            write_manifest(command, &a.out, Some(a.seed))
        }
        Command::Multiuser(a) => {
            range_check(a.t > 0.0 && a.t_sweep.iter().all(|&t| t > 0.0), "--t values must be positive")?;
            range_check(a.nt >= 1 && a.fps >= 1, "--nt and --fps must be positive")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let p = load_partition_for(&ds, &a.partition)?;
            let costs = streaming_costs(&ds, &p)?;
            let config = MultiUserConfig {
                nnu: a.nnu,
                t_mean: a.t,
                duration_s: a.duration,
                nt: a.nt,
                fps: a.fps,
                policy: WalkPolicy::default(),
            };
            let mut w = csv_writer(&a.out)?;
            if a.t_sweep.is_empty() {
                let report = sim::simulate_multiuser(&costs, &ds.domain, &config, a.repr, a.seed)?;
                w.write_record(["second", "bits"])?;
                for (s, b) in report.per_second.iter().enumerate() {
                    w.write_record([s.to_string(), b.to_string()])?;
                }
                println!("{} sessions, {} bits", report.sessions, report.total_bits);
            } else {
                let rows = sim::crossover_sweep(&costs, &ds.domain, &config, &a.t_sweep, a.seed)?;
                w.write_record(["t", "partitioned", "all_intra", "joint_all"])?;
                for r in &rows {
                    w.write_record([r.t_mean.to_string(), r.partitioned.to_string(), r.all_intra.to_string(), r.joint_all.to_string()])?;
                }
                match sim::joint_crossover(&rows) {
                    Some(t) => println!("partitioned reaches joint_all at T = {t} s"),
                    None => println!("partitioned stays below joint_all over the sweep"),
                }
            }
            w.flush()?;
            write_manifest(command, &a.out, Some(a.seed))
        }
        Command::Serve(a) => {
            range_check(a.nt >= 1, "--nt must be at least 1")?;
            let ds = Dataset::load(&a.scene.scene)?;
            let p = load_partition_for(&ds, &a.partition)?;
            let state = Arc::new(ServerState::new(&ds, p, a.nt)?);
            let addr = std::net::SocketAddr::from(([127, 0, 0, 1], a.port));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::server::serve(state, addr))?;
            Ok(())
        }
    }
}

/// `count` inclusive view ranges of growing length, centered in the domain.
pub fn sweep_segments(n: usize, count: usize) -> Vec<(usize, usize)> {
    let center = n / 2;
    let max_half = (n - 1) / 2;
    (0..count)
        .map(|k| {
            let half = (k * max_half) / (count - 1).max(1);
            (center - half.min(center), (center + half).min(n - 1))
        })
        .collect()
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::InvalidParameter(_)
        | Error::IndexOutOfRange { .. }
        | Error::TooManySegments { .. }
        | Error::InvalidDomain(_)
        | Error::InvalidScene(_) => EXIT_RANGE,
        _ => EXIT_FAILURE,
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
