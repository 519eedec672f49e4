//! Batch drivers behind the `odvqa` binary.
//!
//! Every subcommand is a plain function taking its parsed arguments and the
//! optional key=value configuration, so the drivers can be called from code
//! as well as from the command line. Any long flag may also be given in the
//! configuration file as `flag-name = value`; flags on the command line win.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media_io::{
    read_weight_map, write_frame, write_weight_map, FramePlane, FrameSource, RawVideo, VideoMeta,
    WeightMap,
};
use crate::metrics::{self, write_metric_csv, CppPsnr, Metric, MetricRow, SPsnr};
use crate::percmodel::{downsample_to_width, resize_weight_map};
use crate::projection::{uniform_samples, ProjectionKind, ResampleMap, DEFAULT_SPSNR_POINTS};
use crate::sphere::Fov;
use crate::subjective::{
    correlate, logistic_fit, quality_scores, read_score_table, read_sequence_info, reject_subjects,
    CorrelationReport, QualityScores,
};
use crate::traces::{align_to_frames, parse_trace, FrameSamples, TimestampMode};
use crate::weights::{
    i_em_map, i_hm_map, o_hm_map, random_halves, split_half_consistency, viewport_coverage,
    Aggregation, GazeParams, PixelGrid,
};

#[derive(Parser, Debug)]
#[command(
    name = "odvqa",
    version,
    about = "Quality assessment for omnidirectional video"
)]
pub struct Cli {
    /// key=value file giving defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-frame and pooled objective scores of an impaired sequence.
    Metrics(MetricsArgs),
    /// Head/eye movement weight maps from traces, written as OVWM files.
    Weights(WeightsArgs),
    /// Resample a raw video into another projection.
    Convert(ConvertArgs),
    /// Logistic fit and correlation of objective scores against DMOS.
    Eval(EvalArgs),
    /// MOS and DMOS from raw opinion scores.
    Scores(ScoresArgs),
    /// Split-half consistency and viewport coverage of traces.
    Consistency(ConsistencyArgs),
}

/// Raw video geometry.
#[derive(Args, Debug, Clone, Default)]
pub struct GeometryArgs {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Frame rate [default: 30].
    #[arg(long)]
    pub fps: Option<f64>,
    /// erp, rcmp, tsp or cpp [default: erp].
    #[arg(long)]
    pub proj: Option<ProjectionKind>,
    /// Frame count; derived from the file length when omitted.
    #[arg(long)]
    pub frames: Option<usize>,
}

/// Viewport and gaze model.
#[derive(Args, Debug, Clone, Default)]
pub struct ViewArgs {
    /// Horizontal field of view in degrees [default: 110].
    #[arg(long)]
    pub fov_h: Option<f64>,
    /// Vertical field of view in degrees [default: 110].
    #[arg(long)]
    pub fov_v: Option<f64>,
    /// Gaze spread in normalized viewport units [default: 0.1].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Trace timestamps are absolute milliseconds rather than intervals.
    #[arg(long)]
    pub absolute_timestamps: bool,
}

#[derive(Args, Debug, Clone)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub imp: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub view: ViewArgs,
    /// Metric to compute; repeatable or comma separated [default: psnr].
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    /// Directory of per-subject trace files.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Directory of i-hm/o-hm OVWM maps.
    #[arg(long)]
    pub hm_maps: Option<PathBuf>,
    /// Directory of i-em OVWM maps.
    #[arg(long)]
    pub em_maps: Option<PathBuf>,
    /// Sample count for S-PSNR [default: 655362].
    #[arg(long)]
    pub spsnr_points: Option<usize>,
    /// Resize frames to this width before scoring.
    #[arg(long)]
    pub downsample_width: Option<usize>,
    /// Score every n-th frame [default: 1].
    #[arg(long)]
    pub frame_interval: Option<usize>,
    /// Sequence name in the output [default: impaired file stem].
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightMode {
    #[value(name = "i-hm")]
    IHm,
    #[value(name = "o-hm")]
    OHm,
    #[value(name = "i-em")]
    IEm,
}

impl WeightMode {
    fn prefix(&self) -> &'static str {
        match self {
            WeightMode::IHm => "i-hm",
            WeightMode::OHm => "o-hm",
            WeightMode::IEm => "i-em",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct WeightsArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub view: ViewArgs,
    #[arg(long, value_enum)]
    pub mode: WeightMode,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long)]
    pub to_proj: ProjectionKind,
    /// [default: input width]
    #[arg(long)]
    pub out_width: Option<usize>,
    /// [default: from the target aspect ratio]
    #[arg(long)]
    pub out_height: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// CSV with sequence, metric and value columns (a metrics output works).
    #[arg(long)]
    pub objective: PathBuf,
    /// CSV with sequence and dmos columns, optionally group and reference.
    #[arg(long)]
    pub dmos: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ScoresArgs {
    /// CSV of subject, sequence, score.
    #[arg(long)]
    pub scores: PathBuf,
    /// CSV of sequence, reference[, group].
    #[arg(long)]
    pub sequences: PathBuf,
    /// Screen out inconsistent subjects first.
    #[arg(long)]
    pub reject: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorKind {
    Hm,
    Em,
}

#[derive(Args, Debug, Clone)]
pub struct ConsistencyArgs {
    #[arg(long)]
    pub traces: PathBuf,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub view: ViewArgs,
    #[arg(long, value_enum, default_value = "hm")]
    pub mode: BehaviorKind,
    /// Seed of the random subject split [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit status for an error: 2 for bad input, 3 for numeric failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numeric(_) | Error::Degenerate(_) => 3,
        _ => 2,
    }
}

/// Flag defaults read from a key=value file.
#[derive(Debug, Clone, Default)]
pub struct KeyValues(HashMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                message: format!("expected key = value, got `{line}`"),
            })?;
            map.insert(normalize_key(k), v.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(&normalize_key(key)).map(String::as_str)
    }
}

fn normalize_key(k: &str) -> String {
    k.trim()
        .trim_start_matches("--")
        .to_ascii_lowercase()
        .replace('_', "-")
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &KeyValues, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    cfg.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| Error::invalid(format!("config {key}: {e}")))
        })
        .transpose()
}

fn pick_flag(flag: bool, cfg: &KeyValues, key: &str) -> Result<bool> {
    Ok(flag || pick::<bool>(None, cfg, key)?.unwrap_or(false))
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("--{key} is required")))
}

impl GeometryArgs {
    /// Video geometry; `frame_count` may be 0 when the file decides.
    fn resolve(&self, cfg: &KeyValues) -> Result<VideoMeta> {
        let meta = VideoMeta {
            width: required(pick(self.width, cfg, "width")?, "width")?,
            height: required(pick(self.height, cfg, "height")?, "height")?,
            frame_rate: pick(self.fps, cfg, "fps")?.unwrap_or(30.0),
            frame_count: pick(self.frames, cfg, "frames")?.unwrap_or(0),
            projection: pick(self.proj, cfg, "proj")?.unwrap_or(ProjectionKind::Erp),
        };
        let probe = VideoMeta {
            frame_count: meta.frame_count.max(1),
            ..meta
        };
        probe.validate()?;
        Ok(meta)
    }
}

struct View {
    fov: Fov,
    gaze: GazeParams,
    mode: TimestampMode,
}

impl ViewArgs {
    fn resolve(&self, cfg: &KeyValues) -> Result<View> {
        let d = Fov::default();
        let fov = Fov::new(
            pick(self.fov_h, cfg, "fov-h")?.unwrap_or(d.horizontal()),
            pick(self.fov_v, cfg, "fov-v")?.unwrap_or(d.vertical()),
        )?;
        let gaze = match pick(self.sigma, cfg, "sigma")? {
            Some(s) => GazeParams::new(s)?,
            None => GazeParams::default(),
        };
        let mode = if pick_flag(self.absolute_timestamps, cfg, "absolute-timestamps")? {
            TimestampMode::Absolute
        } else {
            TimestampMode::Interval
        };
        Ok(View { fov, gaze, mode })
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn open_video(path: &Path, meta: VideoMeta) -> Result<RawVideo<io::BufReader<File>>> {
    RawVideo::open(path, meta)
}

/// Reads every regular, non-hidden file of `dir` as one subject's trace,
/// named after the file stem, in name order.
pub fn load_traces(dir: &Path, mode: TimestampMode) -> Result<Vec<crate::traces::SubjectTrace>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| {
            !p.file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with('.'))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no trace files in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let subject = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let text = fs::read_to_string(p)?;
            parse_trace(&subject, &text, mode).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })
        })
        .collect()
}

fn aligned_traces(dir: &Path, view: &View, meta: &VideoMeta) -> Result<Vec<FrameSamples>> {
    load_traces(dir, view.mode)?
        .iter()
        .map(|t| align_to_frames(t, meta))
        .collect()
}

/// File name of a weight map: `<mode>_<subject>_f<frame>.ovwm`, or
/// `o-hm_f<frame>.ovwm` for overall maps.
pub fn weight_map_file_name(mode: WeightMode, subject: Option<&str>, frame: usize) -> String {
    match subject {
        Some(s) => format!("{}_{s}_f{frame:06}.ovwm", mode.prefix()),
        None => format!("{}_f{frame:06}.ovwm", mode.prefix()),
    }
}

fn parse_map_name(name: &str) -> Option<(WeightMode, Option<String>, usize)> {
    let stem = name.strip_suffix(".ovwm")?;
    let (head, frame) = stem.rsplit_once("_f")?;
    let frame = frame.parse().ok()?;
    if head == "o-hm" {
        return Some((WeightMode::OHm, None, frame));
    }
    let (mode, subject) = head.split_once('_')?;
    let mode = match mode {
        "i-hm" => WeightMode::IHm,
        "i-em" => WeightMode::IEm,
        _ => return None,
    };
    Some((mode, Some(subject.to_string()), frame))
}

/// OVWM files of one directory, by frame.
#[derive(Debug, Default)]
struct MapIndex {
    subject_maps: HashMap<(WeightMode, usize), Vec<PathBuf>>,
    overall: HashMap<usize, PathBuf>,
}

impl MapIndex {
    fn scan(dir: &Path) -> Result<Self> {
        let mut index = MapIndex::default();
        let mut names: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        names.sort();
        for p in names {
            let Some(name) = p.file_name().map(|n| n.to_string_lossy().into_owned()) else {
                continue;
            };
            match parse_map_name(&name) {
                Some((WeightMode::OHm, _, f)) => {
                    index.overall.insert(f, p);
                }
                Some((mode, Some(_), f)) => {
                    index.subject_maps.entry((mode, f)).or_default().push(p)
                }
                _ => {}
            }
        }
        Ok(index)
    }

    fn subject(
        &self,
        mode: WeightMode,
        frame: usize,
        w: usize,
        h: usize,
    ) -> Result<Vec<WeightMap>> {
        self.subject_maps
            .get(&(mode, frame))
            .map(|ps| ps.iter().map(|p| load_map(p, w, h, false)).collect())
            .unwrap_or_else(|| Ok(Vec::new()))
    }
}

fn load_map(path: &Path, w: usize, h: usize, renormalize: bool) -> Result<WeightMap> {
    let m = read_weight_map(&mut io::BufReader::new(File::open(path)?))?;
    if (m.width(), m.height()) == (w, h) {
        return Ok(m);
    }
    let r = resize_weight_map(&m, w, h)?;
    if !renormalize || r.sum() <= 0.0 {
        return Ok(r);
    }
    let s = r.sum();
    let idx = r.frame_index();
    Ok(
        WeightMap::new(w, h, r.into_values().into_iter().map(|v| v / s).collect())?
            .with_frame_index(idx),
    )
}

/// Behavior weights of one frame at the scoring raster.
#[derive(Default)]
struct FrameWeights {
    i_hm: Vec<WeightMap>,
    o_hm: Option<WeightMap>,
    i_em: Vec<WeightMap>,
}

struct Behavior {
    traces: Vec<FrameSamples>,
    grid: Option<PixelGrid>,
    view: View,
    hm_dir: Option<MapIndex>,
    em_dir: Option<MapIndex>,
    need_hm: bool,
    need_em: bool,
}

impl Behavior {
    fn frame(&self, f: usize, w: usize, h: usize) -> Result<FrameWeights> {
        let mut out = FrameWeights::default();
        if self.need_hm {
            if let Some(dir) = &self.hm_dir {
                out.i_hm = dir.subject(WeightMode::IHm, f, w, h)?;
                out.o_hm = match dir.overall.get(&f) {
                    Some(p) => Some(load_map(p, w, h, true)?),
                    None => o_hm_map(&out.i_hm).ok(),
                };
            } else if let Some(grid) = &self.grid {
                out.i_hm = self
                    .traces
                    .iter()
                    .filter_map(|s| s.frames[f].first_pose())
                    .map(|p| i_hm_map(&p, &self.view.fov, grid))
                    .collect();
                out.o_hm = o_hm_map(&out.i_hm).ok();
            }
        }
        if self.need_em {
            if let Some(dir) = &self.em_dir {
                out.i_em = dir.subject(WeightMode::IEm, f, w, h)?;
            } else if let Some(grid) = &self.grid {
                out.i_em = self
                    .traces
                    .iter()
                    .filter_map(|s| s.frames[f].first_gaze())
                    .map(|(p, g)| i_em_map(&p, g, &self.view.gaze, &self.view.fov, grid))
                    .collect::<Result<_>>()?;
            }
        }
        Ok(out)
    }
}

struct Scorers {
    kind: ProjectionKind,
    spsnr: Option<SPsnr>,
    cpp: Option<CppPsnr>,
}

fn score_frame(
    m: Metric,
    r: &FramePlane,
    i: &FramePlane,
    s: &Scorers,
    fw: &FrameWeights,
) -> Result<f64> {
    match m {
        Metric::Psnr => metrics::psnr(r, i),
        Metric::Ssim => metrics::ssim(r, i),
        Metric::WsPsnr => metrics::ws_psnr(r, i, s.kind),
        Metric::SPsnr => s.spsnr.as_ref().expect("prepared").score(r, i),
        Metric::CppPsnr => s.cpp.as_ref().expect("prepared").score(r, i),
        Metric::PsnrIHm => metrics::psnr_i_hm(r, i, &fw.i_hm),
        Metric::PsnrOHm => match &fw.o_hm {
            Some(o) => metrics::psnr_o_hm(r, i, o),
            None => Err(Error::Degenerate(
                "no head-movement mass in this frame".into(),
            )),
        },
        Metric::PsnrIEm => metrics::psnr_i_em(r, i, &fw.i_em),
    }
}

/// Scores an impaired sequence against its reference. Frames where a
/// behavior metric is undefined (no subject looked, no valid gaze) are left
/// out of that metric's rows and pooling.
pub fn cmd_metrics(args: &MetricsArgs, cfg: &KeyValues) -> Result<Vec<MetricRow>> {
    let meta = args.geometry.resolve(cfg)?;
    let view = args.view.resolve(cfg)?;
    let mut refv = open_video(&args.reference, meta)?;
    let mut impv = open_video(&args.imp, meta)?;
    if refv.frame_count() != impv.frame_count() {
        return Err(Error::dims(
            format!("{} impaired frames", refv.frame_count()),
            impv.frame_count().to_string(),
        ));
    }
    let meta = *refv.meta();
    let mut metric_list = args.metric.clone();
    if metric_list.is_empty() {
        metric_list = match cfg.get("metric") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_>>()?,
            None => vec![Metric::Psnr],
        };
    }
    metric_list.dedup();
    let interval = pick(args.frame_interval, cfg, "frame-interval")?.unwrap_or(1);
    if interval == 0 {
        return Err(Error::invalid("--frame-interval must be positive"));
    }
    let (w, h) = match pick(args.downsample_width, cfg, "downsample-width")? {
        Some(dw) if dw != meta.width => {
            let dh = ((meta.height as f64 * dw as f64 / meta.width as f64).round() as usize).max(1);
            meta.projection.check_dims(dw, dh)?;
            (dw, dh)
        }
        _ => (meta.width, meta.height),
    };
    let kind = meta.projection;
    if metric_list.contains(&Metric::WsPsnr) && kind != ProjectionKind::Erp {
        return Err(Error::invalid(format!(
            "ws-psnr needs erp input, got {kind}"
        )));
    }

    let need_hm = metric_list.iter().any(|m| m.needs_hm());
    let need_em = metric_list.iter().any(|m| m.needs_em());
    let traces_dir = pick(args.traces.clone(), cfg, "traces")?;
    let hm_dir = pick(args.hm_maps.clone(), cfg, "hm-maps")?;
    let em_dir = pick(args.em_maps.clone(), cfg, "em-maps")?;
    if need_hm && traces_dir.is_none() && hm_dir.is_none() {
        return Err(Error::invalid(
            "head-movement metrics need --traces or --hm-maps",
        ));
    }
    if need_em && traces_dir.is_none() && em_dir.is_none() {
        return Err(Error::invalid(
            "eye-movement metrics need --traces or --em-maps",
        ));
    }
    let use_traces = (need_hm && hm_dir.is_none()) || (need_em && em_dir.is_none());
    let behavior = Behavior {
        traces: match (&traces_dir, use_traces) {
            (Some(d), true) => aligned_traces(d, &view, &meta)?,
            _ => Vec::new(),
        },
        grid: if use_traces {
            Some(PixelGrid::new(w, h, kind)?)
        } else {
            None
        },
        view,
        hm_dir: if need_hm {
            hm_dir.as_deref().map(MapIndex::scan).transpose()?
        } else {
            None
        },
        em_dir: if need_em {
            em_dir.as_deref().map(MapIndex::scan).transpose()?
        } else {
            None
        },
        need_hm,
        need_em,
    };
    let scorers = Scorers {
        kind,
        spsnr: if metric_list.contains(&Metric::SPsnr) {
            let n = pick(args.spsnr_points, cfg, "spsnr-points")?.unwrap_or(DEFAULT_SPSNR_POINTS);
            Some(SPsnr::new(&uniform_samples(n)?, w, h, kind)?)
        } else {
            None
        },
        cpp: if metric_list.contains(&Metric::CppPsnr) {
            Some(CppPsnr::new((w, h), kind, (w, h), kind)?)
        } else {
            None
        },
    };

    let frames: Vec<usize> = (0..meta.frame_count).step_by(interval).collect();
    let chunk = 2 * rayon::current_num_threads().max(1);
    let mut per_frame: Vec<(usize, Vec<Option<f64>>)> = Vec::with_capacity(frames.len());
    for group in frames.chunks(chunk) {
        let mut pairs = Vec::with_capacity(group.len());
        for &f in group {
            let (mut r, mut i) = (refv.frame(f)?, impv.frame(f)?);
            if w != meta.width {
                r = downsample_to_width(&r, w)?;
                i = downsample_to_width(&i, w)?;
            }
            pairs.push((f, r, i));
        }
        let scored: Vec<Result<(usize, Vec<Option<f64>>)>> = pairs
            .par_iter()
            .map(|(f, r, i)| {
                let fw = behavior.frame(*f, w, h)?;
                let values = metric_list
                    .iter()
                    .map(|&m| match score_frame(m, r, i, &scorers, &fw) {
                        Ok(v) => Ok(Some(v)),
                        Err(Error::Degenerate(why)) => {
                            log::warn!("frame {f}: {m} undefined ({why})");
                            Ok(None)
                        }
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((*f, values))
            })
            .collect();
        for s in scored {
            per_frame.push(s?);
        }
    }

    let name = args.name.clone().unwrap_or_else(|| {
        args.imp
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into())
    });
    let mut rows = Vec::new();
    for (k, &m) in metric_list.iter().enumerate() {
        let mut defined = Vec::new();
        for (f, values) in &per_frame {
            if let Some(v) = values[k] {
                defined.push(v);
                rows.push(MetricRow {
                    sequence: name.clone(),
                    frame: Some(*f),
                    metric: m,
                    value: v,
                });
            }
        }
        if defined.is_empty() {
            return Err(Error::Degenerate(format!(
                "{m} is undefined on every frame"
            )));
        }
        rows.push(MetricRow {
            sequence: name.clone(),
            frame: None,
            metric: m,
            value: metrics::pool_sequence(&defined)?,
        });
    }
    write_metric_csv(&rows, sink(&args.out)?)?;
    Ok(rows)
}

/// Writes weight maps for every subject and frame (or every frame for
/// overall maps) and returns the written paths in name order.
pub fn cmd_weights(args: &WeightsArgs, cfg: &KeyValues) -> Result<Vec<PathBuf>> {
    let meta = args.geometry.resolve(cfg)?;
    if meta.frame_count == 0 {
        return Err(Error::invalid("--frames is required to align traces"));
    }
    let view = args.view.resolve(cfg)?;
    let subjects = aligned_traces(&args.traces, &view, &meta)?;
    let grid = PixelGrid::for_video(&meta)?;
    fs::create_dir_all(&args.out)?;
    let write = |map: &WeightMap, name: String| -> Result<PathBuf> {
        let path = args.out.join(name);
        let mut f = BufWriter::new(File::create(&path)?);
        write_weight_map(map, &mut f)?;
        f.flush()?;
        Ok(path)
    };
    let per_frame: Vec<Result<Vec<PathBuf>>> = (0..meta.frame_count)
        .into_par_iter()
        .map(|f| {
            let mut paths = Vec::new();
            match args.mode {
                WeightMode::IHm => {
                    for s in &subjects {
                        if let Some(p) = s.frames[f].first_pose() {
                            let m = i_hm_map(&p, &view.fov, &grid).with_frame_index(f as u32);
                            paths.push(write(
                                &m,
                                weight_map_file_name(args.mode, Some(&s.subject), f),
                            )?);
                        }
                    }
                }
                WeightMode::OHm => {
                    let maps: Vec<WeightMap> = subjects
                        .iter()
                        .filter_map(|s| s.frames[f].first_pose())
                        .map(|p| i_hm_map(&p, &view.fov, &grid))
                        .collect();
                    if let Ok(m) = o_hm_map(&maps) {
                        paths.push(write(
                            &m.with_frame_index(f as u32),
                            weight_map_file_name(args.mode, None, f),
                        )?);
                    }
                }
                WeightMode::IEm => {
                    for s in &subjects {
                        if let Some((p, g)) = s.frames[f].first_gaze() {
                            let m = i_em_map(&p, g, &view.gaze, &view.fov, &grid)?
                                .with_frame_index(f as u32);
                            paths.push(write(
                                &m,
                                weight_map_file_name(args.mode, Some(&s.subject), f),
                            )?);
                        }
                    }
                }
            }
            Ok(paths)
        })
        .collect();
    let mut all = Vec::new();
    for p in per_frame {
        all.extend(p?);
    }
    if all.is_empty() {
        log::warn!(
            "no {} maps written: the traces hold no usable samples",
            args.mode.prefix()
        );
    }
    all.sort();
    Ok(all)
}

/// Resamples every frame of a raw video into another projection and returns
/// the output geometry.
pub fn cmd_convert(args: &ConvertArgs, cfg: &KeyValues) -> Result<VideoMeta> {
    let meta = args.geometry.resolve(cfg)?;
    let mut src = open_video(&args.input, meta)?;
    let meta = *src.meta();
    let ow = pick(args.out_width, cfg, "out-width")?.unwrap_or(meta.width);
    let oh = match pick(args.out_height, cfg, "out-height")? {
        Some(h) => h,
        None => args.to_proj.height_for_width(ow)?,
    };
    let out_meta = VideoMeta::new(ow, oh, meta.frame_rate, meta.frame_count, args.to_proj)?;
    let map = ResampleMap::new(
        meta.width,
        meta.height,
        meta.projection,
        ow,
        oh,
        args.to_proj,
    )?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    let chunk = 2 * rayon::current_num_threads().max(1);
    let indices: Vec<usize> = (0..meta.frame_count).collect();
    for group in indices.chunks(chunk) {
        let frames = group
            .iter()
            .map(|&f| src.frame(f))
            .collect::<Result<Vec<_>>>()?;
        let converted: Vec<Result<FramePlane>> = frames
            .par_iter()
            .map(|fr| {
                let v = map.apply(fr.samples(), 0.0);
                FramePlane::new(
                    ow,
                    oh,
                    v.iter()
                        .map(|x| x.round().clamp(0.0, 255.0) as u8)
                        .collect(),
                )
            })
            .collect();
        for c in converted {
            write_frame(&mut out, &c?)?;
        }
    }
    out.flush()?;
    Ok(out_meta)
}

/// One output row of [`cmd_eval`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub metric: String,
    /// A group name, or `all`.
    pub group: String,
    pub report: CorrelationReport,
    /// Logistic parameters `b1..b4` of the metric's fit.
    pub fit: [f64; 4],
}

struct DmosEntry {
    dmos: f64,
    group: Option<String>,
}

fn column(headers: &csv::StringRecord, name: &str, what: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Format(format!("{what} lacks a '{name}' column")))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_value(v: &str, what: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Format(format!("{what}: '{v}' is not a finite number")))
}

/// Fits each metric's scores to DMOS with the logistic mapping over all
/// sequences, then reports correlations over all data and per group.
pub fn cmd_eval(args: &EvalArgs, _cfg: &KeyValues) -> Result<Vec<EvalRow>> {
    let mut rd = csv_reader(&args.dmos)?;
    let hd = rd.headers()?.clone();
    let (cs, cd) = (
        column(&hd, "sequence", "DMOS table")?,
        column(&hd, "dmos", "DMOS table")?,
    );
    let cg = column(&hd, "group", "").ok();
    let cr = column(&hd, "reference", "").ok();
    let mut dmos: Vec<(String, DmosEntry)> = Vec::new();
    let mut references = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let name = rec[cs].to_string();
        if cr.is_some_and(|c| matches!(rec[c].to_ascii_lowercase().as_str(), "1" | "true" | "yes"))
        {
            references.push(name);
            continue;
        }
        let entry = DmosEntry {
            dmos: parse_value(&rec[cd], &name)?,
            group: cg.map(|c| rec[c].to_string()).filter(|g| !g.is_empty()),
        };
        if dmos.iter().any(|(n, _)| *n == name) {
            return Err(Error::Format(format!(
                "sequence '{name}' appears twice in the DMOS table"
            )));
        }
        dmos.push((name, entry));
    }

    let mut rd = csv_reader(&args.objective)?;
    let ho = rd.headers()?.clone();
    let (os, om, ov) = (
        column(&ho, "sequence", "objective table")?,
        column(&ho, "metric", "objective table")?,
        column(&ho, "value", "objective table")?,
    );
    let of = column(&ho, "frame", "").ok();
    let mut metrics_order: Vec<String> = Vec::new();
    let mut scores: HashMap<(String, String), f64> = HashMap::new();
    for rec in rd.records() {
        let rec = rec?;
        if of.is_some_and(|c| !rec[c].is_empty() && &rec[c] != "pooled") {
            continue;
        }
        let (seq, metric) = (rec[os].to_string(), rec[om].to_string());
        if references.contains(&seq) {
            continue;
        }
        if !dmos.iter().any(|(n, _)| *n == seq) {
            return Err(Error::invalid(format!("sequence '{seq}' has no DMOS")));
        }
        let v = parse_value(&rec[ov], &seq)?;
        if scores.insert((metric.clone(), seq.clone()), v).is_some() {
            return Err(Error::Format(format!(
                "duplicate {metric} score for '{seq}'"
            )));
        }
        if !metrics_order.contains(&metric) {
            metrics_order.push(metric);
        }
    }

    let mut groups: Vec<String> = dmos.iter().filter_map(|(_, e)| e.group.clone()).collect();
    groups.sort();
    groups.dedup();
    let mut rows = Vec::new();
    for metric in &metrics_order {
        let x = dmos
            .iter()
            .map(|(n, _)| {
                scores
                    .get(&(metric.clone(), n.clone()))
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("sequence '{n}' has no {metric} score")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let y: Vec<f64> = dmos.iter().map(|(_, e)| e.dmos).collect();
        let fit = logistic_fit(&x, &y)?;
        let params = [fit.beta1(), fit.beta2(), fit.beta3(), fit.beta4()];
        rows.push(EvalRow {
            metric: metric.clone(),
            group: "all".into(),
            report: correlate(&fit.fitted, &y)?,
            fit: params,
        });
        for g in &groups {
            let idx: Vec<usize> = (0..dmos.len())
                .filter(|&i| dmos[i].1.group.as_ref() == Some(g))
                .collect();
            if idx.len() < 2 {
                log::warn!("group '{g}' has fewer than two sequences, skipped");
                continue;
            }
            let fx: Vec<f64> = idx.iter().map(|&i| fit.fitted[i]).collect();
            let fy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            rows.push(EvalRow {
                metric: metric.clone(),
                group: g.clone(),
                report: correlate(&fx, &fy)?,
                fit: params,
            });
        }
    }

    let mut out = csv::Writer::from_writer(sink(&args.out)?);
    out.write_record([
        "metric", "group", "n", "pcc", "srcc", "rmse", "mae", "beta1", "beta2", "beta3", "beta4",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        let mut rec = vec![
            r.metric.clone(),
            r.group.clone(),
            r.report.n.to_string(),
            opt(r.report.pcc),
            opt(r.report.srcc),
            r.report.rmse.to_string(),
            r.report.mae.to_string(),
        ];
        rec.extend(r.fit.iter().map(|b| b.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(rows)
}

/// MOS and DMOS per sequence, optionally after subject screening.
pub fn cmd_scores(args: &ScoresArgs, cfg: &KeyValues) -> Result<QualityScores> {
    let mut table = read_score_table(File::open(&args.scores)?)?;
    let infos = read_sequence_info(File::open(&args.sequences)?)?;
    if pick_flag(args.reject, cfg, "reject")? {
        let (kept, rejected) = reject_subjects(&table)?;
        if !rejected.is_empty() {
            log::info!("rejected subjects: {}", rejected.join(", "));
        }
        table = kept;
    }
    let q = quality_scores(&table, &infos)?;
    if !q.excluded_subjects.is_empty() {
        log::warn!(
            "subjects without score spread left out of DMOS: {}",
            q.excluded_subjects.join(", ")
        );
    }
    q.write_csv(sink(&args.out)?)?;
    Ok(q)
}

/// Per-frame consistency between two random halves of the subjects, and the
/// fraction of the sphere covered by all viewports.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub consistency: Vec<Option<f64>>,
    /// Empty for projections without a coverage measure.
    pub coverage: Vec<f64>,
    pub mean_consistency: Option<f64>,
}

pub fn cmd_consistency(args: &ConsistencyArgs, cfg: &KeyValues) -> Result<ConsistencyReport> {
    let meta = args.geometry.resolve(cfg)?;
    if meta.frame_count == 0 {
        return Err(Error::invalid("--frames is required to align traces"));
    }
    let view = args.view.resolve(cfg)?;
    let subjects = aligned_traces(&args.traces, &view, &meta)?;
    if subjects.len() < 2 {
        return Err(Error::invalid(
            "split-half consistency needs at least two subjects",
        ));
    }
    let seed = pick(args.seed, cfg, "seed")?.unwrap_or(0);
    let (ha, hb) = random_halves(subjects.len(), seed);
    let grid = PixelGrid::for_video(&meta)?;
    let covered = matches!(meta.projection, ProjectionKind::Erp | ProjectionKind::Cpp);
    let how = match args.mode {
        BehaviorKind::Hm => Aggregation::OverallHm,
        BehaviorKind::Em => Aggregation::Mean,
    };
    let maps_of = |idx: &[usize], f: usize| -> Result<Vec<WeightMap>> {
        match args.mode {
            BehaviorKind::Hm => Ok(idx
                .iter()
                .filter_map(|&s| subjects[s].frames[f].first_pose())
                .map(|p| i_hm_map(&p, &view.fov, &grid))
                .collect()),
            BehaviorKind::Em => idx
                .iter()
                .filter_map(|&s| subjects[s].frames[f].first_gaze())
                .map(|(p, g)| i_em_map(&p, g, &view.gaze, &view.fov, &grid))
                .collect(),
        }
    };
    let all: Vec<usize> = (0..subjects.len()).collect();
    let per_frame: Vec<Result<(Option<f64>, Option<f64>)>> = (0..meta.frame_count)
        .into_par_iter()
        .map(|f| {
            let (a, b) = (maps_of(&ha, f)?, maps_of(&hb, f)?);
            let cc = if a.is_empty() || b.is_empty() {
                None
            } else {
                split_half_consistency(&[a], &[b], how)?[0]
            };
            let cov = if covered {
                let hm: Vec<WeightMap> = all
                    .iter()
                    .filter_map(|&s| subjects[s].frames[f].first_pose())
                    .map(|p| i_hm_map(&p, &view.fov, &grid))
                    .collect();
                if hm.is_empty() {
                    Some(0.0)
                } else {
                    Some(viewport_coverage(&hm, meta.projection)?)
                }
            } else {
                None
            };
            Ok((cc, cov))
        })
        .collect();
    let mut consistency = Vec::with_capacity(meta.frame_count);
    let mut coverage = Vec::new();
    for r in per_frame {
        let (cc, cov) = r?;
        consistency.push(cc);
        coverage.extend(cov);
    }
    let report = ConsistencyReport {
        mean_consistency: crate::weights::mean_defined(&consistency),
        consistency,
        coverage,
    };
    let mut out = csv::Writer::from_writer(sink(&args.out)?);
    out.write_record(["frame", "consistency", "coverage"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (f, cc) in report.consistency.iter().enumerate() {
        out.write_record([
            f.to_string(),
            opt(*cc),
            opt(report.coverage.get(f).copied()),
        ])?;
    }
    let mean_cov = (!report.coverage.is_empty())
        .then(|| report.coverage.iter().sum::<f64>() / report.coverage.len() as f64);
    out.write_record([
        "pooled".to_string(),
        opt(report.mean_consistency),
        opt(mean_cov),
    ])?;
    out.flush()?;
    Ok(report)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    let workers = pick(cli.workers, &cfg, "workers")?.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Metrics(a) => cmd_metrics(a, &cfg).map(drop),
        Command::Weights(a) => {
            let paths = cmd_weights(a, &cfg)?;
            log::info!("wrote {} maps to {}", paths.len(), a.out.display());
            Ok(())
        }
        Command::Convert(a) => cmd_convert(a, &cfg).map(drop),
        Command::Eval(a) => cmd_eval(a, &cfg).map(drop),
        Command::Scores(a) => cmd_scores(a, &cfg).map(drop),
        Command::Consistency(a) => cmd_consistency(a, &cfg).map(drop),
    })
}
