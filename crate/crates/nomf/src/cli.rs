//! Command-line pipeline: scene generation, framing, denoising, cost
//! reporting, Monte-Carlo sweeps, and tracker evaluation.
//!
//! Every run writes a manifest next to its outputs recording the resolved
//! configuration and seed; re-running with the same manifest reproduces the
//! outputs bit for bit.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cost_model::{self, CostParams, EnergyLatencyEntry};
use crate::event_io::{self, ObjectSpec, SyntheticSceneConfig};
use crate::filters::{self, NnFiltConfig};
use crate::framer::{self, EbbiFrame, DEFAULT_WINDOW_LEN_US};
use crate::geom::{BoundingBox, SensorGeometry};
use crate::imc_sim::{self, ArrayConfig, MismatchModel};
use crate::pbm::{self, PbmFormat};
use crate::tracker_eval::{self, FrameBoxes};

#[derive(Parser, Debug)]
#[command(name = "nomf", version, about = "Event-camera binary image denoising and IMC simulation")]
pub struct Cli {
    /// Seed for every stochastic component; a random seed is drawn and
    /// recorded in the manifest when absent.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (0 = all cores). Results are thread-count independent.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// JSON file overriding model defaults (array, mismatch, energy table,
    /// cost parameters).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic event stream with ground-truth boxes.
    Gen(GenArgs),
    /// Accumulate events into binary PBM frames.
    Frame(FrameArgs),
    /// Denoise events or frames with one of the four methods.
    Denoise(DenoiseArgs),
    /// Resource/energy/latency/throughput report.
    Cost(CostArgs),
    /// Monte-Carlo flip-rate sweeps of the kernel discharge race.
    Mc(McArgs),
    /// IoU-thresholded precision/recall evaluation.
    Eval(EvalArgs),
}

/// Optional overrides loaded from `--config`.
#[derive(Debug, Default, Deserialize)]
pub struct FileConfig {
    pub array: Option<ArrayConfig>,
    pub mismatch: Option<MismatchModel>,
    pub energy_table: Option<Vec<EnergyLatencyEntry>>,
    pub cost_params: Option<CostParams>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn write_manifest(
    dir_or_file: &Path,
    subcommand: &str,
    seed: u64,
    config: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<()> {
    let manifest = RunManifest {
        tool: "nomf",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed,
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let path = if dir_or_file.is_dir() {
        dir_or_file.join("manifest.json")
    } else {
        dir_or_file.with_extension("manifest.json")
    };
    let file = File::create(&path).with_context(|| format!("create {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    }
    let file_config: FileConfig = match &cli.config {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
            serde_json::from_reader(BufReader::new(file))
                .with_context(|| format!("parse {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let seed = cli.seed.unwrap_or_else(rand::random);
    match cli.command {
        Command::Gen(args) => cmd_gen(args, seed),
        Command::Frame(args) => cmd_frame(args, seed),
        Command::Denoise(args) => cmd_denoise(args, seed, &file_config),
        Command::Cost(args) => cmd_cost(args, seed, &file_config),
        Command::Mc(args) => cmd_mc(args, seed, &file_config),
        Command::Eval(args) => cmd_eval(args, seed, &file_config),
    }
}

// ---------------------------------------------------------------- gen

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    /// Event output; `.csv` selects the text format, anything else binary.
    #[arg(long)]
    pub out_events: PathBuf,
    /// Ground-truth CSV (`frame,x_min,y_min,x_max,y_max`).
    #[arg(long)]
    pub out_gt: PathBuf,
    #[arg(long, default_value_t = 320)]
    pub width: u16,
    #[arg(long, default_value_t = 240)]
    pub height: u16,
    /// Scene duration, seconds.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    /// Background events per pixel per second.
    #[arg(long, default_value_t = 1.0)]
    pub noise_rate: f64,
    /// Number of moving objects, laid out deterministically.
    #[arg(long, default_value_t = 2)]
    pub objects: u32,
    /// Events per object boundary pixel per second.
    #[arg(long, default_value_t = 60.0)]
    pub object_rate: f64,
    /// Object speed, pixels per second.
    #[arg(long, default_value_t = 60.0)]
    pub speed: f64,
    /// Frame window for ground-truth alignment, microseconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN_US)]
    pub window_us: u32,
}

/// Deterministic layout for `count` boxes: spread over the sensor, moving
/// along alternating diagonals so they stay in view for a while.
pub fn default_objects(count: u32, geometry: SensorGeometry, rate: f64, speed: f64) -> Vec<ObjectSpec> {
    (0..count)
        .map(|i| {
            let fx = (i as f64 + 0.5) / count as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            ObjectSpec {
                x0: (f64::from(geometry.width) * fx * 0.6).floor(),
                y0: (f64::from(geometry.height) * (0.2 + 0.5 * fx)).floor(),
                width: 30,
                height: 20,
                vx: speed * sign,
                vy: speed * 0.25 * sign,
                event_rate: rate,
            }
        })
        .collect()
}

fn write_box_csv(path: &Path, frames: &FrameBoxes) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "frame,x_min,y_min,x_max,y_max")?;
    for (frame, boxes) in frames {
        for b in boxes {
            writeln!(out, "{frame},{},{},{},{}", b.x_min, b.y_min, b.x_max, b.y_max)?;
        }
    }
    Ok(())
}

fn read_box_csv(path: &Path) -> Result<FrameBoxes> {
    let content = fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    let mut map: std::collections::BTreeMap<u32, Vec<BoundingBox>> = Default::default();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("frame")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            bail!("{}: line {} has {} fields, expected 5", path.display(), idx + 1, fields.len());
        }
        let num = |s: &str| -> Result<u32> {
            s.trim().parse().map_err(|_| anyhow!("{}: bad number `{s}` on line {}", path.display(), idx + 1))
        };
        let frame = num(fields[0])?;
        map.entry(frame).or_default().push(BoundingBox::new(
            num(fields[1])? as u16,
            num(fields[2])? as u16,
            num(fields[3])? as u16,
            num(fields[4])? as u16,
        ));
    }
    Ok(map.into_iter().collect())
}

fn cmd_gen(args: GenArgs, seed: u64) -> Result<()> {
    let geometry = SensorGeometry::new(args.width, args.height);
    let cfg = SyntheticSceneConfig {
        geometry,
        objects: default_objects(args.objects, geometry, args.object_rate, args.speed),
        noise_rate: args.noise_rate,
        duration_s: args.duration,
        window_len_us: args.window_us,
        seed,
    };
    let (events, ground_truth) = event_io::generate_synthetic(&cfg)?;
    write_events(&args.out_events, &events)?;
    write_box_csv(&args.out_gt, &ground_truth)?;
    write_manifest(
        &args.out_events,
        "gen",
        seed,
        serde_json::to_value(&cfg)?,
        &[],
        &[&args.out_events, &args.out_gt],
    )?;
    eprintln!("wrote {} events, {} ground-truth frames", events.len(), ground_truth.len());
    Ok(())
}

// ---------------------------------------------------------------- event/frame I/O helpers

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn write_events(path: &Path, events: &[event_io::Event]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if is_csv(path) {
        event_io::write_csv(&mut out, events)?;
    } else {
        event_io::write_binary(&mut out, events)?;
    }
    Ok(())
}

fn read_events(path: &Path, geometry: SensorGeometry, strict: bool) -> Result<Vec<event_io::Event>> {
    let file = File::open(path).with_context(|| format!("open {}", path.display()))?;
    let reader = BufReader::new(file);
    let events = if is_csv(path) {
        event_io::parse_csv(reader, geometry, strict)?
    } else {
        event_io::parse_binary(reader, geometry, strict)?
    };
    Ok(events)
}

fn write_frames(dir: &Path, frames: &[EbbiFrame], format: PbmFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for frame in frames {
        let path = dir.join(format!("frame_{:06}.pbm", frame.frame_index()));
        let mut out = BufWriter::new(File::create(&path)?);
        pbm::write_pbm(&mut out, frame, format)?;
        paths.push(path);
    }
    Ok(paths)
}

fn read_frames(dir: &Path) -> Result<Vec<EbbiFrame>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pbm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pbm frames in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let mut reader = BufReader::new(File::open(p)?);
            pbm::read_pbm(&mut reader).with_context(|| p.display().to_string())
        })
        .collect()
}

// ---------------------------------------------------------------- frame

#[derive(Args, Debug, Serialize)]
pub struct FrameArgs {
    /// Event file (.csv or binary).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 320)]
    pub width: u16,
    #[arg(long, default_value_t = 240)]
    pub height: u16,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN_US)]
    pub window_us: u32,
    #[arg(long, value_enum, default_value_t = PbmFlag::P4)]
    pub pbm_format: PbmFlag,
    /// Reject event streams with decreasing timestamps.
    #[arg(long)]
    pub strict_time: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
pub enum PbmFlag {
    P1,
    P4,
}

impl From<PbmFlag> for PbmFormat {
    fn from(f: PbmFlag) -> Self {
        match f {
            PbmFlag::P1 => PbmFormat::Plain,
            PbmFlag::P4 => PbmFormat::Raw,
        }
    }
}

fn cmd_frame(args: FrameArgs, seed: u64) -> Result<()> {
    let geometry = SensorGeometry::new(args.width, args.height);
    let events = read_events(&args.input, geometry, args.strict_time)?;
    let frames = framer::accumulate(&events, geometry, args.window_us)?;
    let only_frames: Vec<EbbiFrame> = frames.iter().map(|(f, _)| f.clone()).collect();
    write_frames(&args.out_dir, &only_frames, args.pbm_format.into())?;
    let stats: Vec<_> = frames
        .iter()
        .map(|(f, s)| serde_json::json!({ "frame": f.frame_index(), "stats": s }))
        .collect();
    let stats_path = args.out_dir.join("frame_stats.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&stats_path)?), &stats)?;
    write_manifest(
        &args.out_dir,
        "frame",
        seed,
        serde_json::to_value(&args)?,
        &[&args.input],
        &[&args.out_dir],
    )?;
    eprintln!("wrote {} frames to {}", frames.len(), args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------- denoise

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiseMethod {
    Median,
    Nomf,
    Imc,
    Nn,
}

#[derive(Args, Debug, Serialize)]
pub struct DenoiseArgs {
    /// Event file or a directory of PBM frames.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum)]
    pub method: DenoiseMethod,
    /// Kernel side (3 or 5).
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Supply voltage for the in-memory filter, volts.
    #[arg(long, default_value_t = 1.2)]
    pub vdd: f64,
    /// NN-filt correlation window; defaults to the frame window.
    #[arg(long)]
    pub tau_us: Option<u32>,
    #[arg(long, default_value_t = 320)]
    pub width: u16,
    #[arg(long, default_value_t = 240)]
    pub height: u16,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN_US)]
    pub window_us: u32,
    #[arg(long, value_enum, default_value_t = PbmFlag::P4)]
    pub pbm_format: PbmFlag,
}

fn load_input_frames(args: &DenoiseArgs) -> Result<Vec<EbbiFrame>> {
    if args.input.is_dir() {
        read_frames(&args.input)
    } else {
        let geometry = SensorGeometry::new(args.width, args.height);
        let events = read_events(&args.input, geometry, false)?;
        Ok(framer::accumulate(&events, geometry, args.window_us)?
            .into_iter()
            .map(|(f, _)| f)
            .collect())
    }
}

/// Apply the selected filter; shared by `denoise` and the `eval` pipeline.
pub fn run_denoise(
    method: DenoiseMethod,
    frames: Vec<EbbiFrame>,
    n: usize,
    vdd: f64,
    seed: u64,
    mismatch: Option<MismatchModel>,
    array: Option<ArrayConfig>,
) -> Result<(Vec<EbbiFrame>, Vec<serde_json::Value>)> {
    let mut out_frames = Vec::with_capacity(frames.len());
    let mut stats = Vec::with_capacity(frames.len());
    match method {
        DenoiseMethod::Median | DenoiseMethod::Nomf => {
            for frame in &frames {
                let filtered = if method == DenoiseMethod::Median {
                    filters::median_overlap(frame, n)?
                } else {
                    filters::nomf(frame, n)?
                };
                let alpha = filters::flipped_fraction(frame, &filtered)?;
                stats.push(serde_json::json!({
                    "frame": frame.frame_index(),
                    "alpha": alpha,
                }));
                out_frames.push(filtered);
            }
        }
        DenoiseMethod::Imc => {
            let base = array.unwrap_or_default();
            let cfg = ArrayConfig { n, vdd, ..base };
            let mm = mismatch.unwrap_or_else(|| imc_sim::calibrated_model(seed));
            let mm = MismatchModel { seed, ..mm };
            for frame in &frames {
                let (filtered, flip) = imc_sim::filter_frame_imc(frame, &cfg, &mm)?;
                stats.push(serde_json::json!({
                    "frame": frame.frame_index(),
                    "alpha": flip.alpha_measured,
                    "flip_stats": flip,
                }));
                out_frames.push(filtered);
            }
        }
        DenoiseMethod::Nn => bail!("NN-filt consumes events, not frames"),
    }
    Ok((out_frames, stats))
}

fn cmd_denoise(args: DenoiseArgs, seed: u64, config: &FileConfig) -> Result<()> {
    let (out_frames, stats) = if args.method == DenoiseMethod::Nn {
        // event-domain filter: denoise the stream, then frame it
        if args.input.is_dir() {
            bail!("--method nn needs an event file input");
        }
        let geometry = SensorGeometry::new(args.width, args.height);
        let events = read_events(&args.input, geometry, false)?;
        let tau = args.tau_us.unwrap_or(args.window_us);
        let cfg = NnFiltConfig::new(tau);
        let kept = filters::nn_filt(&events, cfg, geometry)?;
        let frames: Vec<EbbiFrame> = framer::accumulate(&kept, geometry, args.window_us)?
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        let stats = vec![serde_json::json!({
            "events_in": events.len(),
            "events_kept": kept.len(),
            "tau_us": tau,
        })];
        (frames, stats)
    } else {
        let frames = load_input_frames(&args)?;
        run_denoise(
            args.method,
            frames,
            args.n,
            args.vdd,
            seed,
            config.mismatch,
            config.array,
        )?
    };
    write_frames(&args.out_dir, &out_frames, args.pbm_format.into())?;
    let stats_path = args.out_dir.join("denoise_stats.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&stats_path)?), &stats)?;
    write_manifest(
        &args.out_dir,
        "denoise",
        seed,
        serde_json::to_value(&args)?,
        &[&args.input],
        &[&args.out_dir],
    )?;
    eprintln!("wrote {} filtered frames to {}", out_frames.len(), args.out_dir.display());
    Ok(())
}

// ---------------------------------------------------------------- cost

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
pub enum AlphaSource {
    /// The published dataset average (0.036).
    Paper,
    /// Measured on the input frames via the flipped-pixel fraction of NOMF.
    Measured,
}

#[derive(Args, Debug, Serialize)]
pub struct CostArgs {
    #[arg(long, default_value_t = 3)]
    pub n: u32,
    #[arg(long, value_enum, default_value_t = AlphaSource::Paper)]
    pub alpha: AlphaSource,
    /// PBM frame directory, required with `--alpha measured`.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    #[arg(long, default_value_t = 320)]
    pub width: u32,
    #[arg(long, default_value_t = 240)]
    pub height: u32,
    #[arg(long, default_value_t = 16)]
    pub beta_t: u32,
    #[arg(long, default_value_t = 0.15)]
    pub gamma: f64,
    /// JSON report output (text table always goes to stdout).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn cmd_cost(args: CostArgs, seed: u64, config: &FileConfig) -> Result<()> {
    if !filters::SUPPORTED_KERNELS.contains(&(args.n as usize)) {
        bail!("unsupported kernel side {} (expected 3 or 5)", args.n);
    }
    let base = config.cost_params.unwrap_or_default();
    let mut params = CostParams {
        width: args.width,
        height: args.height,
        n: args.n,
        beta_t: args.beta_t,
        gamma: args.gamma,
        ..base
    };
    if let AlphaSource::Measured = args.alpha {
        let dir = args
            .frames
            .as_ref()
            .ok_or_else(|| anyhow!("--alpha measured requires --frames <dir>"))?;
        let frames = read_frames(dir)?;
        let mut sum = 0.0;
        for frame in &frames {
            let filtered = filters::nomf(frame, args.n as usize)?;
            sum += filters::flipped_fraction(frame, &filtered)?;
        }
        params.alpha = sum / frames.len() as f64;
        eprintln!("measured alpha = {:.4} over {} frames", params.alpha, frames.len());
    }
    let table = config.energy_table.clone().unwrap_or_else(cost_model::default_energy_table);
    let array = ArrayConfig {
        n: args.n as usize,
        rows: args.height as u16,
        cols: args.width as u16,
        ..config.array.unwrap_or_default()
    };
    let frame_rate = 1.0 / array.frame_latency_s();
    let report = cost_model::cost_report(&params, &table, frame_rate)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.json {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &report)?;
        write_manifest(path, "cost", seed, serde_json::to_value(&args)?, &[], &[path])?;
    }
    Ok(())
}

// ---------------------------------------------------------------- mc

#[derive(Args, Debug, Serialize)]
pub struct McArgs {
    /// Explicit kernel composition; overrides --margin-sweep.
    #[arg(long)]
    pub ones: Option<u32>,
    #[arg(long)]
    pub zeros: Option<u32>,
    /// Supply voltages to sweep, volts.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub vdd: Vec<f64>,
    /// Margins to sweep for a 3x3 kernel (odd values 1..9).
    #[arg(long, value_delimiter = ',')]
    pub margin_sweep: Option<Vec<u32>>,
    #[arg(long)]
    pub trials: u64,
    /// Flip-rate CSV (`vdd,margin,trials,flip_rate`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV of sampled aggregate BL/BLB currents for the first
    /// sweep point.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
}

fn cmd_mc(args: McArgs, seed: u64, config: &FileConfig) -> Result<()> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let cfg = config.array.unwrap_or_default();
    let mm = config.mismatch.unwrap_or_else(|| imc_sim::calibrated_model(seed));
    let mm = MismatchModel { seed, ..mm };
    let compositions: Vec<(u32, u32)> = match (args.ones, args.zeros) {
        (Some(o), Some(z)) => vec![(o, z)],
        (None, None) => {
            let margins = args.margin_sweep.clone().unwrap_or_else(|| vec![1]);
            margins
                .iter()
                .map(|&m| {
                    if m > 9 || m % 2 == 0 {
                        bail!("margin {m} not representable in a 3x3 kernel");
                    }
                    Ok(((9 - m) / 2, (9 + m) / 2))
                })
                .collect::<Result<_>>()?
        }
        _ => bail!("--ones and --zeros must be given together"),
    };

    let mut rows = String::from("vdd,margin,trials,flip_rate\n");
    let mut first_hist: Option<imc_sim::McResult> = None;
    for &vdd in &args.vdd {
        for &(ones, zeros) in &compositions {
            let res = imc_sim::monte_carlo_flip_rate(ones, zeros, vdd, args.trials, &mm, &cfg)?;
            rows.push_str(&format!(
                "{vdd},{},{},{}\n",
                ones.abs_diff(zeros),
                res.trials,
                res.flip_rate
            ));
            if first_hist.is_none() {
                first_hist = Some(res);
            }
        }
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &rows)?;
            write_manifest(path, "mc", seed, serde_json::to_value(&args)?, &[], &[path])?;
        }
        None => print!("{rows}"),
    }
    if let (Some(path), Some(res)) = (&args.hist_out, &first_hist) {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "trial,bl_current_a,blb_current_a")?;
        for (i, (bl, blb)) in res.bl_currents.iter().zip(&res.blb_currents).enumerate() {
            writeln!(out, "{i},{bl},{blb}")?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Ground-truth box CSV.
    #[arg(long)]
    pub gt: PathBuf,
    /// Proposal box CSV; mutually exclusive with --events.
    #[arg(long)]
    pub proposals: Option<PathBuf>,
    /// Event file: runs the frame -> denoise -> region-proposal pipeline.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DenoiseMethod::Nomf)]
    pub method: DenoiseMethod,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1.2)]
    pub vdd: f64,
    #[arg(long, default_value_t = 320)]
    pub width: u16,
    #[arg(long, default_value_t = 240)]
    pub height: u16,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN_US)]
    pub window_us: u32,
    /// IoU grid `start:end:step` or a comma list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub iou_grid: String,
    /// Minimum proposal box area, pixels.
    #[arg(long, default_value_t = 5)]
    pub min_area: u64,
    #[arg(long, value_enum, default_value_t = Connectivity::C8)]
    pub connectivity: Connectivity,
    /// Output curve CSV (`iou,precision,recall`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
pub enum Connectivity {
    C4,
    C8,
}

pub fn parse_iou_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid: Vec<f64> = if parts.len() == 3 {
        let start: f64 = parts[0].parse()?;
        let end: f64 = parts[1].parse()?;
        let step: f64 = parts[2].parse()?;
        if step <= 0.0 || end < start {
            bail!("bad IoU grid `{spec}`");
        }
        let count = ((end - start) / step).round() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse::<f64>().map_err(Into::into)).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        bail!("IoU thresholds must lie in [0, 1]");
    }
    Ok(grid)
}

/// Region proposals from denoised frames: connected components' bounding
/// boxes per frame index.
pub fn propose_regions(frames: &[EbbiFrame], connectivity: u8) -> FrameBoxes {
    frames
        .iter()
        .map(|f| {
            let boxes = tracker_eval::connected_components(f, connectivity)
                .into_iter()
                .map(|r| r.bbox)
                .collect();
            (f.frame_index(), boxes)
        })
        .collect()
}

fn cmd_eval(args: EvalArgs, seed: u64, config: &FileConfig) -> Result<()> {
    let ground_truth = read_box_csv(&args.gt)?;
    if ground_truth.iter().all(|(_, b)| b.is_empty()) {
        bail!("empty ground truth in {}", args.gt.display());
    }
    let connectivity = match args.connectivity {
        Connectivity::C4 => 4,
        Connectivity::C8 => 8,
    };
    let proposals: FrameBoxes = match (&args.proposals, &args.events) {
        (Some(path), None) => read_box_csv(path)?,
        (None, Some(path)) => {
            let geometry = SensorGeometry::new(args.width, args.height);
            let events = read_events(path, geometry, false)?;
            let frames: Vec<EbbiFrame> = framer::accumulate(&events, geometry, args.window_us)?
                .into_iter()
                .map(|(f, _)| f)
                .collect();
            let (filtered, _) = run_denoise(
                args.method,
                frames,
                args.n,
                args.vdd,
                seed,
                config.mismatch,
                config.array,
            )?;
            propose_regions(&filtered, connectivity)
        }
        _ => bail!("exactly one of --proposals or --events is required"),
    };
    let thresholds = parse_iou_grid(&args.iou_grid)?;
    let curve = tracker_eval::evaluate(&proposals, &ground_truth, &thresholds, args.min_area)?;
    let mut rows = String::from("iou,precision,recall\n");
    for ((t, p), r) in curve.thresholds.iter().zip(&curve.precision).zip(&curve.recall) {
        rows.push_str(&format!("{t},{p},{r}\n"));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, &rows)?;
            write_manifest(path, "eval", seed, serde_json::to_value(&args)?, &[&args.gt], &[path])?;
        }
        None => print!("{rows}"),
    }
    Ok(())
}
