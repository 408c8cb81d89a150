//! Subcommands of the `vgnms` binary.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use vgnms::analysis::{analyze_group, format_analysis, histogram_svg, CategoryGroup, HistogramConfig, NeighborScope};
use vgnms::bench::{crowded_workload, run_bench, BenchConfig, BenchVariant};
use vgnms::evaluation::{evaluate, format_table, ApIntegration, EvalConfig, EvalError};
use vgnms::ingestion::{
    merge_pixel_amodal, read_detections, read_ground_truth, read_kitti_labels, read_native, write_detections,
    write_ground_truth, KittiMapping, NativeCorpus,
};
use vgnms::model::{has_errors, BoxKind, DetectionSet, Severity};
use vgnms::suppression::{soft_nms, standard_nms, vg_nms, vg_soft_nms, NmsConfig, SoftMode, SoftNmsConfig};
use vgnms::synthgen::{generate_corpus, simulate_detector, SynthConfig, SynthError};

/// Marks an error as a usage or configuration problem (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(UsageError(e.to_string()))
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<UsageError>()) {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(name = "vgnms", version, about = "Visibility-guided NMS, evaluation and overlap analysis")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic occluded corpus and, optionally, simulated detections.
    Synth(SynthArgs),
    /// Suppress duplicate detections.
    Nms(NmsArgs),
    /// AP/mAP of detections against ground truth.
    Eval(EvalArgs),
    /// Overlap histograms and recall bounds of a ground-truth corpus.
    Analyze(AnalyzeArgs),
    /// Time the suppression variants.
    Bench(BenchArgs),
    /// Check a native ground-truth or detection file.
    Validate(ValidateArgs),
    /// Join KITTI-format amodal and pixel-based label directories into a native ground-truth file.
    ImportKitti(ImportKittiArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML file with `[scene]` and `[detector]` tables; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth output file.
    #[arg(long)]
    out: PathBuf,
    /// Also write simulated joint detections here.
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detector seed; defaults to the scene seed.
    #[arg(long)]
    detector_seed: Option<u64>,
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    image_width: Option<f64>,
    #[arg(long)]
    image_height: Option<f64>,
    #[arg(long)]
    mean_objects: Option<f64>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    occlusion: Option<f64>,
    #[arg(long)]
    max_retries: Option<usize>,
    #[arg(long)]
    jitter_std: Option<f64>,
    #[arg(long)]
    miss_rate: Option<f64>,
    #[arg(long)]
    fp_rate: Option<f64>,
    #[arg(long)]
    score_noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Variant {
    Standard,
    Soft,
    Vg,
    VgSoft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Pixel,
    Amodal,
}

impl From<KindArg> for BoxKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pixel => BoxKind::Pixel,
            KindArg::Amodal => BoxKind::Amodal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SoftModeArg {
    Linear,
    Gaussian,
}

#[derive(Debug, Args)]
struct SoftArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    soft_mode: SoftModeArg,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.001)]
    score_floor: f64,
}

impl SoftArgs {
    fn config(&self, iou: f64, class_aware: bool) -> SoftNmsConfig {
        SoftNmsConfig {
            mode: match self.soft_mode {
                SoftModeArg::Linear => SoftMode::Linear,
                SoftModeArg::Gaussian => SoftMode::Gaussian,
            },
            sigma: self.sigma,
            iou_threshold: iou,
            score_floor: self.score_floor,
            class_aware,
        }
    }
}

#[derive(Debug, Args)]
struct NmsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    variant: Variant,
    #[arg(long, default_value_t = 0.45)]
    iou: f64,
    /// Box kind suppressed by `standard` and `soft`; defaults to amodal when present.
    #[arg(long, value_enum)]
    box_kind: Option<KindArg>,
    #[command(flatten)]
    soft: SoftArgs,
    /// Let boxes of different classes suppress each other.
    #[arg(long)]
    class_agnostic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ApArg {
    AllPoints,
    #[value(name = "11-point")]
    ElevenPoint,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    dets: PathBuf,
    #[arg(long, value_enum, default_value = "amodal")]
    box_kind: KindArg,
    #[arg(long, default_value_t = 0.5)]
    tp_iou: f64,
    #[arg(long, default_value_t = 20.0)]
    min_side: f64,
    #[arg(long, value_enum, default_value = "on")]
    filter_detections: OnOff,
    #[arg(long, value_enum, default_value = "all-points")]
    ap: ApArg,
    /// JSON report; the text table goes next to it with a `.txt` suffix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupArg {
    Vehicles,
    Pedestrians,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScopeArg {
    Group,
    Class,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    group: GroupArg,
    #[arg(long, default_value_t = 0.45)]
    threshold: f64,
    #[arg(long, default_value_t = 0.01)]
    bin_width: f64,
    #[arg(long, value_enum, default_value = "group")]
    neighbors: ScopeArg,
    #[arg(long, default_value_t = 20.0)]
    min_side: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Joint detection file; without it a crowded synthetic workload is built.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Size of the synthetic workload.
    #[arg(long, default_value_t = 50_000)]
    boxes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 5)]
    warmup: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "standard,soft,vg,vg-soft")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 0.45)]
    iou: f64,
    #[command(flatten)]
    soft: SoftArgs,
    /// JSON report; the text version goes next to it with a `.txt` suffix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    file: PathBuf,
}

#[derive(Debug, Args)]
struct ImportKittiArgs {
    /// Label directory with amodal boxes.
    #[arg(long)]
    amodal: PathBuf,
    /// Label directory with pixel-based boxes for the same frames.
    #[arg(long)]
    pixel: PathBuf,
    /// Pair leftovers by box IoU of at least this value.
    #[arg(long)]
    fallback_iou: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Provenance record written beside every output.
#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seeds: Vec<u64>,
    threads: Option<usize>,
    timestamp_unix: u64,
}

impl RunManifest {
    fn new(subcommand: &'static str, config: Value, threads: Option<usize>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            threads,
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    /// Writes `<path>.manifest.json`.
    fn write_beside(&self, path: &Path) -> Result<()> {
        let mut name = path.as_os_str().to_owned();
        name.push(".manifest.json");
        write_text(Path::new(&name), &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn extra(key: &str, value: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(key.into(), value);
    m
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("`--threads` must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting the thread pool")?;
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a, cli.threads),
        Command::Nms(a) => cmd_nms(a, cli.threads),
        Command::Eval(a) => cmd_eval(a, cli.threads),
        Command::Analyze(a) => cmd_analyze(a, cli.threads),
        Command::Bench(a) => cmd_bench(a, cli.threads),
        Command::Validate(a) => cmd_validate(a),
        Command::ImportKitti(a) => cmd_import_kitti(a, cli.threads),
    }
}

fn synth_err(e: SynthError) -> anyhow::Error {
    usage(e)
}

fn cmd_synth(a: SynthArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SynthConfig::from_toml(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    let s = &mut cfg.scene;
    s.seed = a.seed.or(s.seed);
    macro_rules! set {
        ($dst:expr, $flag:expr) => {
            if let Some(v) = $flag {
                $dst = v;
            }
        };
    }
    set!(s.images, a.images);
    set!(s.image_width, a.image_width);
    set!(s.image_height, a.image_height);
    set!(s.mean_objects, a.mean_objects);
    set!(s.max_objects, a.max_objects);
    set!(s.occlusion, a.occlusion);
    set!(s.max_retries, a.max_retries);
    let d = &mut cfg.detector;
    set!(d.jitter_std, a.jitter_std);
    set!(d.miss_rate, a.miss_rate);
    set!(d.fp_rate, a.fp_rate);
    set!(d.score_noise, a.score_noise);

    let seed = cfg.scene.check().map_err(synth_err)?;
    let detector_seed = a.detector_seed.unwrap_or(seed);
    if a.detections.is_some() {
        cfg.detector.check().map_err(synth_err)?;
    }
    let gt = generate_corpus(&cfg.scene).map_err(synth_err)?;
    let config = serde_json::to_value(&cfg)?;
    write_ground_truth(&a.out, &gt, &extra("generator", json!({ "scene": config["scene"] })))?;
    let mut manifest = RunManifest::new("synth", config.clone(), threads);
    manifest.seeds.push(seed);
    manifest.outputs.push(a.out.clone());
    manifest.write_beside(&a.out)?;
    println!("wrote {} objects in {} images to {}", gt.len(), gt.images.len(), a.out.display());

    if let Some(path) = &a.detections {
        let joints = simulate_detector(&gt, &cfg.detector, detector_seed).map_err(synth_err)?;
        let set = DetectionSet::from_joints(gt.classes.clone(), gt.images.clone(), &joints);
        let meta = json!({ "detector": config["detector"], "seed": detector_seed });
        write_detections(path, &set, &extra("generator", meta))?;
        let mut manifest = RunManifest::new("synth", config, threads);
        manifest.seeds.extend([seed, detector_seed]);
        manifest.outputs.push(path.clone());
        manifest.write_beside(path)?;
        println!("wrote {} joint detections to {}", joints.len(), path.display());
    }
    Ok(())
}

fn load_detections(path: &Path) -> Result<DetectionSet> {
    let loaded = read_detections(path)?;
    if has_errors(&loaded.violations) {
        let msgs = loaded.describe_violations();
        anyhow::bail!("{} is invalid:\n  {}", path.display(), msgs.join("\n  "));
    }
    Ok(loaded.data)
}

fn load_ground_truth(path: &Path) -> Result<vgnms::model::GroundTruthSet> {
    let loaded = read_ground_truth(path)?;
    if has_errors(&loaded.violations) {
        let msgs = loaded.describe_violations();
        anyhow::bail!("{} is invalid:\n  {}", path.display(), msgs.join("\n  "));
    }
    Ok(loaded.data)
}

fn cmd_nms(a: NmsArgs, threads: Option<usize>) -> Result<()> {
    let set = load_detections(&a.input)?;
    let class_aware = !a.class_agnostic;
    let nms = NmsConfig { iou_threshold: a.iou, class_aware };
    let soft = a.soft.config(a.iou, class_aware);
    let config = match a.variant {
        Variant::Standard | Variant::Vg => {
            nms.check().map_err(usage)?;
            serde_json::to_value(nms)?
        }
        Variant::Soft | Variant::VgSoft => {
            soft.check().map_err(usage)?;
            serde_json::to_value(soft)?
        }
    };

    let (kept, scores): (Vec<usize>, Option<Vec<f64>>) = match a.variant {
        Variant::Vg | Variant::VgSoft => {
            let joints = set.joints().map_err(|i| {
                usage(format!(
                    "variant `{}` needs joint detections carrying both box_pix and box_amodal; record {i} of {} has only one",
                    a.variant.to_possible_value().expect("no skipped variants").get_name(),
                    a.input.display()
                ))
            })?;
            let out = if a.variant == Variant::Vg { vg_nms(&joints, &nms) } else { vg_soft_nms(&joints, &soft) };
            let scores = (a.variant == Variant::VgSoft).then(|| out.amodal.iter().map(|d| d.score).collect());
            (out.kept_indices, scores)
        }
        Variant::Standard | Variant::Soft => {
            let kind = match a.box_kind {
                Some(k) => k.into(),
                None if set.records.iter().all(|r| r.box_amodal.is_some()) => BoxKind::Amodal,
                None => BoxKind::Pixel,
            };
            let dets = set.view(kind).map_err(|i| usage(format!("record {i} has no {kind} box; pick another --box-kind")))?;
            let r = if a.variant == Variant::Standard { standard_nms(&dets, &nms) } else { soft_nms(&dets, &soft) };
            let scores = r.rescored.map(|v| v.into_iter().map(|(_, s)| s).collect());
            (r.kept_indices, scores)
        }
    };
    let mut records: Vec<_> = kept.iter().map(|&i| set.records[i].clone()).collect();
    if let Some(scores) = scores {
        for (r, s) in records.iter_mut().zip(scores) {
            r.score = s;
        }
    }
    let out = DetectionSet { classes: set.classes.clone(), images: set.images.clone(), records };
    let meta = json!({ "variant": a.variant, "config": config });
    write_detections(&a.out, &out, &extra("nms", meta.clone()))?;
    let mut manifest = RunManifest::new("nms", meta, threads);
    manifest.inputs.push(a.input.clone());
    manifest.outputs.push(a.out.clone());
    manifest.write_beside(&a.out)?;
    let n = set.records.len();
    println!(
        "{}: kept {} of {} detections, suppressed {}",
        a.variant.to_possible_value().expect("no skipped variants").get_name(),
        out.records.len(),
        n,
        n - out.records.len()
    );
    Ok(())
}

fn eval_err(e: EvalError) -> anyhow::Error {
    match e {
        EvalError::Config(_) | EvalError::ClassMismatch(..) | EvalError::MissingBox { .. } => usage(e),
    }
}

fn cmd_eval(a: EvalArgs, threads: Option<usize>) -> Result<()> {
    let cfg = EvalConfig {
        tp_iou: a.tp_iou,
        min_box_side: a.min_side,
        box_kind: a.box_kind.into(),
        ap_integration: match a.ap {
            ApArg::AllPoints => ApIntegration::AllPoints,
            ApArg::ElevenPoint => ApIntegration::ElevenPoint,
        },
        filter_detections: a.filter_detections == OnOff::On,
    };
    cfg.check().map_err(eval_err)?;
    let gt = load_ground_truth(&a.gt)?;
    let dets = load_detections(&a.dets)?;
    let report = evaluate(&gt, &dets, &cfg).map_err(eval_err)?;
    let name = a.dets.file_stem().map_or("detections".into(), |s| s.to_string_lossy().into_owned());
    let table = format_table(&[(name.as_str(), &report)], &gt.classes);
    print!("{table}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        let txt = with_suffix(out, ".txt");
        write_text(&txt, &table)?;
        let mut manifest = RunManifest::new("eval", serde_json::to_value(cfg)?, threads);
        manifest.inputs.extend([a.gt.clone(), a.dets.clone()]);
        manifest.outputs.extend([out.clone(), txt]);
        manifest.write_beside(out)?;
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs, threads: Option<usize>) -> Result<()> {
    let gt = load_ground_truth(&a.gt)?;
    let groups = match a.group {
        GroupArg::Vehicles => vec![CategoryGroup::Vehicles],
        GroupArg::Pedestrians => vec![CategoryGroup::Pedestrians],
        GroupArg::All => vec![CategoryGroup::Vehicles, CategoryGroup::Pedestrians],
    };
    let scope = match a.neighbors {
        ScopeArg::Group => NeighborScope::Group,
        ScopeArg::Class => NeighborScope::Class,
    };
    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    for group in groups {
        let cfg = HistogramConfig {
            min_box_side: a.min_side,
            bin_width: a.bin_width,
            scope,
            ..HistogramConfig::new(BoxKind::Amodal, group)
        };
        let row = analyze_group(&gt, &cfg, a.threshold).map_err(usage)?;
        let stem = a.out_dir.join(&row.group);
        for (kind, h) in [("amodal", &row.amodal), ("pixel", &row.pixel)] {
            let p = with_suffix(&stem, &format!("_{kind}.csv"));
            write_text(&p, &h.to_csv())?;
            outputs.push(p);
        }
        let svg = with_suffix(&stem, ".svg");
        write_text(&svg, &histogram_svg(&row.amodal, &row.pixel, a.threshold))?;
        outputs.push(svg);
        rows.push(row);
    }
    let text = format_analysis(&rows);
    print!("{text}");
    let bounds: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "group": r.group,
                "bounds": r.bounds,
                "empirical_recall_amodal": r.empirical_recall_amodal,
                "empirical_recall_pixel": r.empirical_recall_pixel,
                "objects": r.amodal.object_count,
                "objects_per_image": r.objects_per_image,
                "images": r.image_count,
            })
        })
        .collect();
    let json_path = a.out_dir.join("bounds.json");
    write_text(&json_path, &(serde_json::to_string_pretty(&bounds)? + "\n"))?;
    let txt_path = a.out_dir.join("bounds.txt");
    write_text(&txt_path, &text)?;
    outputs.extend([json_path, txt_path]);
    let config = json!({
        "group": format!("{:?}", a.group).to_lowercase(),
        "threshold": a.threshold,
        "bin_width": a.bin_width,
        "neighbors": format!("{:?}", a.neighbors).to_lowercase(),
        "min_side": a.min_side,
    });
    let mut manifest = RunManifest::new("analyze", config, threads);
    manifest.inputs.push(a.gt.clone());
    manifest.outputs = outputs;
    manifest.write_beside(&a.out_dir.join("analyze"))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs, threads: Option<usize>) -> Result<()> {
    let cfg = BenchConfig {
        reps: a.reps,
        warmup: a.warmup,
        variants: a
            .variants
            .iter()
            .map(|v| match v {
                Variant::Standard => BenchVariant::Standard,
                Variant::Soft => BenchVariant::Soft,
                Variant::Vg => BenchVariant::Vg,
                Variant::VgSoft => BenchVariant::VgSoft,
            })
            .collect(),
        threads: threads.unwrap_or(1),
        nms: NmsConfig { iou_threshold: a.iou, class_aware: true },
        soft: a.soft.config(a.iou, true),
    };
    cfg.check().map_err(usage)?;
    let (joints, seed) = match &a.input {
        Some(p) => {
            let set = load_detections(p)?;
            let joints = set.joints().map_err(|i| usage(format!("bench needs joint detections; record {i} has one box")))?;
            (joints, None)
        }
        None => (crowded_workload(a.boxes, a.seed)?, Some(a.seed)),
    };
    if joints.is_empty() {
        return Err(usage("the workload is empty"));
    }
    let mut report = run_bench(&joints, &cfg)?;
    report.seed = seed;
    let text = report.to_text();
    print!("{text}");
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        let txt = with_suffix(out, ".txt");
        write_text(&txt, &text)?;
        let mut manifest = RunManifest::new("bench", serde_json::to_value(&cfg)?, threads);
        manifest.inputs.extend(a.input.clone());
        manifest.outputs.extend([out.clone(), txt]);
        manifest.seeds.extend(seed);
        manifest.write_beside(out)?;
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Result<()> {
    let (kind, header, violations, described) = match read_native(&a.file)? {
        NativeCorpus::GroundTruth(l) => {
            let d = l.describe_violations();
            let n = l.data.len();
            (format!("ground truth, {n} objects"), l.header, l.violations, d)
        }
        NativeCorpus::Detections(l) => {
            let d = l.describe_violations();
            let joint = if l.data.is_joint() { "joint " } else { "" };
            let n = l.data.records.len();
            (format!("{joint}detections, {n} records"), l.header, l.violations, d)
        }
    };
    println!("{}: {kind}, {}", a.file.display(), header.summary());
    for d in &described {
        println!("  {d}");
    }
    let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
    let warnings = violations.len() - errors;
    println!("{errors} error(s), {warnings} warning(s)");
    if errors > 0 {
        anyhow::bail!("{} failed validation", a.file.display());
    }
    Ok(())
}

fn cmd_import_kitti(a: ImportKittiArgs, threads: Option<usize>) -> Result<()> {
    let mapping = KittiMapping::default();
    let amodal = read_kitti_labels(&a.amodal, &mapping)?;
    let pixel = read_kitti_labels(&a.pixel, &mapping)?;
    let merged = merge_pixel_amodal(&amodal.set, &pixel.set, a.fallback_iou)?;
    for (side, l) in [("amodal", &amodal), ("pixel", &pixel)] {
        println!(
            "{side}: {} frames, {} objects, skipped {} DontCare, unmapped {:?}",
            l.frames.len(),
            l.set.objects.len(),
            l.skipped_dont_care,
            l.skipped_unmapped
        );
    }
    println!(
        "joined {} objects ({} by IoU fallback); unmatched amodal {}, unmatched pixel {}, class conflicts {}",
        merged.set.len(),
        merged.fallback_joins,
        merged.unmatched_amodal.len(),
        merged.unmatched_pixel.len(),
        merged.class_conflicts
    );
    write_ground_truth(&a.out, &merged.set, &Map::new())?;
    let config = json!({ "fallback_iou": a.fallback_iou, "mapping": mapping.0 });
    let mut manifest = RunManifest::new("import-kitti", config, threads);
    manifest.inputs.extend([a.amodal.clone(), a.pixel.clone()]);
    manifest.outputs.push(a.out.clone());
    manifest.write_beside(&a.out)?;
    Ok(())
}
