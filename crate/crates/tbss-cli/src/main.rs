//! Command-line pipeline around the `tbss` library: phantom generation,
//! reconstruction, baseline thresholding, evaluation and slice rendering.
//!
//! Exit codes: 0 on success, 2 for usage or parameter validation problems,
//! 3 for data problems (unreadable or inconsistent inputs).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use tbss::baseline::{baseline_reconstruct, ThresholdMode};
use tbss::metrics::evaluate;
use tbss::morphology::{extract_contours, skeletonize, trace_borders, Contour, SliceContours};
use tbss::phantom::{generate, PhantomSpec};
use tbss::search::{reconstruct_artery, SearchParams};
use tbss::volume::{
    load_label_volume, load_probability_volume, load_slice_meta, save_label_volume,
    save_probability_volume, save_slice_meta, LabelVolume, PayloadKind, ProbabilityVolume,
    INNER, OUTER,
};

#[derive(Parser)]
#[command(
    name = "tbss",
    version,
    about = "Tube beam stack search: reconstruct tubular boundaries from probability volumes"
)]
struct Cli {
    /// Worker threads for parallel stages (0 keeps the library default).
    /// Thread count never changes output bytes, only wall time.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom from a JSON spec into a directory.
    Gen {
        /// Phantom spec JSON file.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for inner.tbv, outer.tbv, gt.tbv and meta.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Reconstruct boundary labels from two probability volumes.
    Reconstruct {
        /// Inner-boundary probability volume (.tbv).
        #[arg(long)]
        inner: PathBuf,
        /// Outer-boundary probability volume (.tbv).
        #[arg(long)]
        outer: PathBuf,
        /// Output label volume (.tbv).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
        /// Skip the thinning step when extracting contours.
        #[arg(long)]
        no_skeleton: bool,
        /// Also write per-slice contours as JSON.
        #[arg(long)]
        contours: Option<PathBuf>,
        /// Export every traced contour per slice and channel instead of the
        /// single inside contour (different JSON shape).
        #[arg(long, requires = "contours")]
        all_contours: bool,
    },
    /// Threshold both channels globally (Otsu, or a fixed value) and merge.
    Baseline {
        /// Inner-boundary probability volume (.tbv).
        #[arg(long)]
        inner: PathBuf,
        /// Outer-boundary probability volume (.tbv).
        #[arg(long)]
        outer: PathBuf,
        /// Output label volume (.tbv).
        #[arg(long)]
        out: PathBuf,
        /// Use this threshold for both channels instead of Otsu.
        #[arg(long)]
        fixed_threshold: Option<f64>,
    },
    /// Score contours against ground-truth labels; writes JSON and CSV.
    Eval {
        /// Per-slice contour JSON (from `reconstruct --contours`).
        #[arg(long)]
        contours: PathBuf,
        /// Ground-truth label volume (.tbv).
        #[arg(long)]
        gt: PathBuf,
        /// Slice metadata JSON with per-slice healthy flags.
        #[arg(long)]
        meta: PathBuf,
        /// Report base path; writes <report>.json and <report>.csv.
        #[arg(long)]
        report: PathBuf,
    },
    /// Render one slice of a volume as a binary PGM image.
    Render {
        /// Volume file (.tbv); probability, label and mask payloads render as
        /// 0-255 grey, {0,128,255} and {0,255} respectively.
        #[arg(long)]
        volume: PathBuf,
        /// Slice index to render.
        #[arg(long)]
        slice: usize,
        /// Output PGM file.
        #[arg(long)]
        out: PathBuf,
        /// Overlay these contours (JSON) at maximum intensity.
        #[arg(long)]
        contours: Option<PathBuf>,
    },
}

/// Search hyperparameters, named after the conventional symbols.
#[derive(Args)]
struct ParamFlags {
    /// Slices per section.
    #[arg(long = "M", default_value_t = SearchParams::default().section_len)]
    section_len: usize,
    /// Cumulative log-probability threshold for the inner boundary.
    #[arg(long = "T-inner", allow_hyphen_values = true,
          default_value_t = SearchParams::default().threshold_inner)]
    threshold_inner: f64,
    /// Cumulative log-probability threshold for the outer boundary.
    #[arg(long = "T-outer", allow_hyphen_values = true,
          default_value_t = SearchParams::default().threshold_outer)]
    threshold_outer: f64,
    /// Maximum children expanded per path per slice.
    #[arg(long = "S", default_value_t = SearchParams::default().stack_cap)]
    stack_cap: usize,
    /// Side of the square step neighbourhood; must be odd.
    #[arg(long = "beam", default_value_t = SearchParams::default().beam_side)]
    beam_side: usize,
    /// Probability floor applied before taking logs.
    #[arg(long, default_value_t = SearchParams::default().log_floor)]
    log_floor: f64,
    /// Scale thresholds proportionally on the final short section.
    #[arg(long)]
    scale_threshold: bool,
}

impl ParamFlags {
    fn to_params(&self) -> SearchParams {
        SearchParams {
            section_len: self.section_len,
            threshold_inner: self.threshold_inner,
            threshold_outer: self.threshold_outer,
            stack_cap: self.stack_cap,
            beam_side: self.beam_side,
            log_floor: self.log_floor,
            scale_threshold: self.scale_threshold,
        }
    }
}

/// Failures carry the exit code class: usage/validation (2) or data (3).
enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

fn usage(context: &str, err: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{context}: {err}"))
}

fn data(context: &str, err: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{context}: {err}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Ignore the error from configuring twice (only possible in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { spec, out_dir } => cmd_gen(&spec, &out_dir),
        Command::Reconstruct { inner, outer, out, params, no_skeleton, contours, all_contours } => {
            cmd_reconstruct(&inner, &outer, &out, &params, no_skeleton, contours.as_deref(), all_contours)
        }
        Command::Baseline { inner, outer, out, fixed_threshold } => {
            cmd_baseline(&inner, &outer, &out, fixed_threshold)
        }
        Command::Eval { contours, gt, meta, report } => cmd_eval(&contours, &gt, &meta, &report),
        Command::Render { volume, slice, out, contours } => {
            cmd_render(&volume, slice, &out, contours.as_deref())
        }
    }
}

fn cmd_gen(spec_path: &Path, out_dir: &Path) -> Result<(), Failure> {
    let file = File::open(spec_path)
        .map_err(|e| usage(&format!("cannot open spec {}", spec_path.display()), e))?;
    let spec: PhantomSpec = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| usage(&format!("cannot parse spec {}", spec_path.display()), e))?;
    let phantom = generate(&spec).map_err(|e| usage("invalid phantom spec", e))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| data(&format!("cannot create {}", out_dir.display()), e))?;
    let write = |name: &str, f: &dyn Fn(&Path) -> Result<(), tbss::volume::VolumeError>| {
        let path = out_dir.join(name);
        f(&path).map_err(|e| data(&format!("cannot write {}", path.display()), e))
    };
    write("inner.tbv", &|p| save_probability_volume(&phantom.inner, p))?;
    write("outer.tbv", &|p| save_probability_volume(&phantom.outer, p))?;
    write("gt.tbv", &|p| save_label_volume(&phantom.gt, p))?;
    write("meta.json", &|p| save_slice_meta(&phantom.meta, p))?;
    Ok(())
}

fn load_channels(
    inner_path: &Path,
    outer_path: &Path,
) -> Result<(ProbabilityVolume, ProbabilityVolume), Failure> {
    let inner = load_probability_volume(inner_path)
        .map_err(|e| data(&format!("cannot load {}", inner_path.display()), e))?;
    let outer = load_probability_volume(outer_path)
        .map_err(|e| data(&format!("cannot load {}", outer_path.display()), e))?;
    Ok((inner, outer))
}

fn cmd_reconstruct(
    inner_path: &Path,
    outer_path: &Path,
    out_path: &Path,
    flags: &ParamFlags,
    no_skeleton: bool,
    contours_path: Option<&Path>,
    all_contours: bool,
) -> Result<(), Failure> {
    let params = flags.to_params();
    params.validate().map_err(|e| usage("invalid search parameters", e))?;
    let (inner, outer) = load_channels(inner_path, outer_path)?;
    let labels =
        reconstruct_artery(&inner, &outer, &params).map_err(|e| data("reconstruction failed", e))?;
    save_label_volume(&labels, out_path)
        .map_err(|e| data(&format!("cannot write {}", out_path.display()), e))?;

    if let Some(path) = contours_path {
        if all_contours {
            write_all_contours(&labels, !no_skeleton, path)?;
        } else {
            let contours = extract_contours(&labels, !no_skeleton);
            write_contours(&contours, path)?;
        }
    }
    Ok(())
}

fn cmd_baseline(
    inner_path: &Path,
    outer_path: &Path,
    out_path: &Path,
    fixed_threshold: Option<f64>,
) -> Result<(), Failure> {
    let (inner, outer) = load_channels(inner_path, outer_path)?;
    let mode = match fixed_threshold {
        Some(t) => ThresholdMode::Fixed(t),
        None => ThresholdMode::Otsu,
    };
    let result =
        baseline_reconstruct(&inner, &outer, mode).map_err(|e| data("baseline failed", e))?;
    save_label_volume(&result.labels, out_path)
        .map_err(|e| data(&format!("cannot write {}", out_path.display()), e))
}

fn cmd_eval(
    contours_path: &Path,
    gt_path: &Path,
    meta_path: &Path,
    report_path: &Path,
) -> Result<(), Failure> {
    let contours = read_contours(contours_path)?;
    let gt = load_label_volume(gt_path)
        .map_err(|e| data(&format!("cannot load {}", gt_path.display()), e))?;
    let meta = load_slice_meta(meta_path)
        .map_err(|e| data(&format!("cannot load {}", meta_path.display()), e))?;
    let report = evaluate(&contours, &gt, &meta, None).map_err(|e| data("evaluation failed", e))?;

    let json_path = report_path.with_extension("json");
    let file = File::create(&json_path)
        .map_err(|e| data(&format!("cannot write {}", json_path.display()), e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &report)
        .map_err(|e| data(&format!("cannot write {}", json_path.display()), e))?;

    let csv_path = report_path.with_extension("csv");
    std::fs::write(&csv_path, report.to_csv())
        .map_err(|e| data(&format!("cannot write {}", csv_path.display()), e))?;
    Ok(())
}

fn cmd_render(
    volume_path: &Path,
    slice: usize,
    out_path: &Path,
    contours_path: Option<&Path>,
) -> Result<(), Failure> {
    let (dims, mut pixels) = render_slice(volume_path, slice)?;
    if let Some(path) = contours_path {
        let contours = read_contours(path)?;
        let pair = contours
            .get(slice)
            .ok_or_else(|| Failure::Data(format!("contours cover {} slices", contours.len())))?;
        for &(r, c) in pair.inner.points.iter().chain(&pair.outer.points) {
            if r < dims.0 && c < dims.1 {
                pixels[r * dims.1 + c] = 255;
            }
        }
    }
    write_pgm(out_path, dims.1, dims.0, &pixels)
}

/// Loads whichever payload the file holds and flattens the slice to grey.
fn render_slice(path: &Path, slice: usize) -> Result<((usize, usize), Vec<u8>), Failure> {
    let kind = peek_kind(path)?;
    let bad_slice = |slices: usize| {
        Failure::Data(format!("slice {slice} out of range for {slices}-slice volume"))
    };
    let empty = || Failure::Data("volume has no voxels".into());
    match kind {
        PayloadKind::Probability => {
            let vol = load_probability_volume(path)
                .map_err(|e| data(&format!("cannot load {}", path.display()), e))?;
            let dims = vol.dims();
            if dims.voxels() == 0 {
                return Err(empty());
            }
            if slice >= dims.slices {
                return Err(bad_slice(dims.slices));
            }
            let grey = vol
                .slice(slice)
                .iter()
                .map(|&p| (f64::from(p).clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            Ok(((dims.rows, dims.cols), grey))
        }
        PayloadKind::Label => {
            let vol = load_label_volume(path)
                .map_err(|e| data(&format!("cannot load {}", path.display()), e))?;
            let dims = vol.dims();
            if dims.voxels() == 0 {
                return Err(empty());
            }
            if slice >= dims.slices {
                return Err(bad_slice(dims.slices));
            }
            let grey = vol
                .slice(slice)
                .iter()
                .map(|&l| match l {
                    INNER => 128,
                    OUTER => 255,
                    _ => 0,
                })
                .collect();
            Ok(((dims.rows, dims.cols), grey))
        }
        PayloadKind::Mask => {
            let vol = tbss::volume::load_binary_mask(path)
                .map_err(|e| data(&format!("cannot load {}", path.display()), e))?;
            let dims = vol.dims();
            if dims.voxels() == 0 {
                return Err(empty());
            }
            if slice >= dims.slices {
                return Err(bad_slice(dims.slices));
            }
            let grey = vol.slice(slice).iter().map(|&b| if b == 0 { 0 } else { 255 }).collect();
            Ok(((dims.rows, dims.cols), grey))
        }
    }
}

fn peek_kind(path: &Path) -> Result<PayloadKind, Failure> {
    tbss::volume::peek_kind(path)
        .map_err(|e| data(&format!("{} is not a readable volume file", path.display()), e))
}

fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), Failure> {
    let err = |e: std::io::Error| data(&format!("cannot write {}", path.display()), e);
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    write!(w, "P5\n{width} {height}\n255\n").map_err(err)?;
    w.write_all(pixels).map_err(err)?;
    w.flush().map_err(err)
}

/// Interchange form of one slice's contours: per channel, a list of
/// `[row, col]` points.
#[derive(Serialize, Deserialize)]
struct SliceContoursJson {
    inner: Vec<[usize; 2]>,
    outer: Vec<[usize; 2]>,
}

fn write_contours(contours: &[SliceContours], path: &Path) -> Result<(), Failure> {
    let shaped: Vec<SliceContoursJson> = contours
        .iter()
        .map(|pair| SliceContoursJson {
            inner: pair.inner.points.iter().map(|&(r, c)| [r, c]).collect(),
            outer: pair.outer.points.iter().map(|&(r, c)| [r, c]).collect(),
        })
        .collect();
    let file = File::create(path)
        .map_err(|e| data(&format!("cannot write {}", path.display()), e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &shaped)
        .map_err(|e| data(&format!("cannot write {}", path.display()), e))?;
    Ok(())
}

fn read_contours(path: &Path) -> Result<Vec<SliceContours>, Failure> {
    let file =
        File::open(path).map_err(|e| data(&format!("cannot open {}", path.display()), e))?;
    let shaped: Vec<SliceContoursJson> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| data(&format!("cannot parse {}", path.display()), e))?;
    Ok(shaped
        .into_iter()
        .map(|pair| SliceContours {
            inner: contour_from(pair.inner),
            outer: contour_from(pair.outer),
        })
        .collect())
}

fn contour_from(points: Vec<[usize; 2]>) -> Contour {
    let points: Vec<(usize, usize)> = points.into_iter().map(|[r, c]| (r, c)).collect();
    let closed = points.len() > 2;
    Contour { points, closed }
}

/// Every traced border of every channel, slice by slice: per channel, a list
/// of contours, each a list of `[row, col]` points.
#[derive(Serialize)]
struct SliceAllContoursJson {
    inner: Vec<Vec<[usize; 2]>>,
    outer: Vec<Vec<[usize; 2]>>,
}

fn write_all_contours(labels: &LabelVolume, thin: bool, path: &Path) -> Result<(), Failure> {
    let dims = labels.dims();
    let channel = |slice: usize, label: u8| -> Vec<Vec<[usize; 2]>> {
        let mask = labels.channel_slice(slice, label);
        let mask = if thin { skeletonize(&mask) } else { mask };
        let borders = trace_borders(&mask);
        borders
            .holes
            .iter()
            .chain(&borders.outer)
            .map(|c| c.points.iter().map(|&(r, c)| [r, c]).collect())
            .collect()
    };
    let shaped: Vec<SliceAllContoursJson> = (0..dims.slices)
        .map(|s| SliceAllContoursJson { inner: channel(s, INNER), outer: channel(s, OUTER) })
        .collect();
    let file = File::create(path)
        .map_err(|e| data(&format!("cannot write {}", path.display()), e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &shaped)
        .map_err(|e| data(&format!("cannot write {}", path.display()), e))?;
    Ok(())
}
