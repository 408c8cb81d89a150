//! Runtime comparison of the suppression variants on joint detections.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoxKind, Detection, JointDetection};
use crate::suppression::{joint_views, soft_nms, standard_nms, vg_nms, vg_soft_nms, NmsConfig, SoftNmsConfig};
use crate::synthgen::{generate_corpus, simulate_detector, DetectorNoiseConfig, SceneConfig, SynthError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("variant {variant} produced a different output on repetition {rep}")]
    Mismatch { variant: BenchVariant, rep: usize },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchVariant {
    /// Greedy NMS on the amodal boxes.
    Standard,
    Soft,
    Vg,
    VgSoft,
}

impl std::fmt::Display for BenchVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Soft => "soft",
            Self::Vg => "vg",
            Self::VgSoft => "vg-soft",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
    pub variants: Vec<BenchVariant>,
    /// Worker threads; 1 gives single-threaded timings.
    pub threads: usize,
    pub nms: NmsConfig,
    pub soft: SoftNmsConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            reps: 30,
            warmup: 5,
            variants: vec![BenchVariant::Standard, BenchVariant::Soft, BenchVariant::Vg, BenchVariant::VgSoft],
            threads: 1,
            nms: NmsConfig::default(),
            soft: SoftNmsConfig::default(),
        }
    }
}

impl BenchConfig {
    pub const MIN_REPS: usize = 30;
    pub const MIN_WARMUP: usize = 5;

    pub fn check(&self) -> Result<(), BenchError> {
        if self.reps < Self::MIN_REPS {
            return Err(BenchError::Config(format!("`reps` must be at least {}, got {}", Self::MIN_REPS, self.reps)));
        }
        if self.warmup < Self::MIN_WARMUP {
            return Err(BenchError::Config(format!("`warmup` must be at least {}, got {}", Self::MIN_WARMUP, self.warmup)));
        }
        if self.threads == 0 {
            return Err(BenchError::Config("`threads` must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(BenchError::Config("`variants` is empty".into()));
        }
        self.nms.check().map_err(|e| BenchError::Config(e.to_string()))?;
        self.soft.check().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantTiming {
    pub variant: BenchVariant,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub kept: usize,
}

/// Pairs of same-image, same-class detections whose IoU exceeds the
/// threshold, counted on each box kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapPairs {
    pub threshold: f64,
    pub amodal: usize,
    pub pixel: usize,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub threads: usize,
    pub debug_build: bool,
}

impl HostInfo {
    pub fn current(threads: usize) -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            threads,
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    /// "single-threaded" or "parallel"; the two are not comparable.
    pub mode: String,
    /// Seed of the synthetic workload, when there is one.
    pub seed: Option<u64>,
    pub boxes: usize,
    pub images: usize,
    pub config: BenchConfig,
    pub host: HostInfo,
    pub timings: Vec<VariantTiming>,
    pub high_overlap: OverlapPairs,
    /// Median vg time over median standard time.
    pub vg_overhead: Option<f64>,
}

impl BenchReport {
    pub fn timing(&self, v: BenchVariant) -> Option<&VariantTiming> {
        self.timings.iter().find(|t| t.variant == v)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} boxes in {} images, {} reps after {} warmup, {} ({} thread(s)) on {} {} ({} cpus)\n",
            self.boxes, self.images, self.config.reps, self.config.warmup, self.mode, self.host.threads, self.host.os, self.host.arch, self.host.cpus
        );
        s.push_str(&format!("{:<10}{:>12}{:>12}{:>12}{:>10}\n", "variant", "median ms", "p95 ms", "mean ms", "kept"));
        for t in &self.timings {
            s.push_str(&format!(
                "{:<10}{:>12.3}{:>12.3}{:>12.3}{:>10}\n",
                t.variant.to_string(),
                t.median_ms,
                t.p95_ms,
                t.mean_ms,
                t.kept
            ));
        }
        let o = &self.high_overlap;
        s.push_str(&format!(
            "pairs with IoU > {}: amodal {}, pixel {}, ratio {}\n",
            o.threshold,
            o.amodal,
            o.pixel,
            o.ratio.map_or("n/a".into(), |r| format!("{r:.2}"))
        ));
        if let Some(r) = self.vg_overhead {
            s.push_str(&format!("vg / standard median: {r:.3}\n"));
        }
        s
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// One run of a variant; returns kept indices and the emitted amodal
/// detections so that timed runs include building the output.
fn run_variant(v: BenchVariant, joints: &[JointDetection], cfg: &BenchConfig) -> (Vec<usize>, Vec<Detection>) {
    let amodal_out = |kept: &[usize], scores: Option<&Vec<(usize, f64)>>| -> Vec<Detection> {
        kept.iter()
            .enumerate()
            .map(|(pos, &i)| {
                let mut d = joints[i].split_views().1;
                if let Some(s) = scores {
                    d.score = s[pos].1;
                }
                d
            })
            .collect()
    };
    match v {
        BenchVariant::Standard => {
            let r = standard_nms(&joint_views(joints, BoxKind::Amodal), &cfg.nms);
            let out = amodal_out(&r.kept_indices, None);
            (r.kept_indices, out)
        }
        BenchVariant::Soft => {
            let r = soft_nms(&joint_views(joints, BoxKind::Amodal), &cfg.soft);
            let out = amodal_out(&r.kept_indices, r.rescored.as_ref());
            (r.kept_indices, out)
        }
        BenchVariant::Vg => {
            let o = vg_nms(joints, &cfg.nms);
            (o.kept_indices, o.amodal)
        }
        BenchVariant::VgSoft => {
            let o = vg_soft_nms(joints, &cfg.soft);
            (o.kept_indices, o.amodal)
        }
    }
}

/// Counts same-image, same-class pairs with IoU above `threshold`.
pub fn high_overlap_pairs(joints: &[JointDetection], kind: BoxKind, threshold: f64) -> usize {
    use rayon::prelude::*;
    let mut groups: std::collections::HashMap<(&str, u16), Vec<usize>> = std::collections::HashMap::new();
    for (i, j) in joints.iter().enumerate() {
        groups.entry((j.image_id.as_str(), j.class.0)).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups
        .par_iter()
        .map(|g| {
            let mut n = 0;
            for (a, &i) in g.iter().enumerate() {
                for &k in &g[a + 1..] {
                    if joints[i].bbox(kind).iou(joints[k].bbox(kind)) > threshold {
                        n += 1;
                    }
                }
            }
            n
        })
        .sum()
}

/// Times every configured variant and checks each timed output against an
/// untimed reference run.
pub fn run_bench(joints: &[JointDetection], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    pool.install(|| {
        let references: Vec<_> = cfg.variants.iter().map(|&v| run_variant(v, joints, cfg)).collect();
        for _ in 0..cfg.warmup {
            for &v in &cfg.variants {
                std::hint::black_box(run_variant(v, joints, cfg));
            }
        }
        // round-robin so that drift in machine state hits every variant alike
        let mut samples = vec![Vec::with_capacity(cfg.reps); cfg.variants.len()];
        for rep in 0..cfg.reps {
            for (k, &v) in cfg.variants.iter().enumerate() {
                let start = Instant::now();
                let out = std::hint::black_box(run_variant(v, joints, cfg));
                samples[k].push(start.elapsed().as_secs_f64() * 1e3);
                if out != references[k] {
                    return Err(BenchError::Mismatch { variant: v, rep });
                }
            }
        }
        let mut timings = Vec::with_capacity(cfg.variants.len());
        for ((&v, mut ms), reference) in cfg.variants.iter().zip(samples).zip(&references) {
            ms.sort_by(f64::total_cmp);
            timings.push(VariantTiming {
                variant: v,
                median_ms: median(&ms),
                p95_ms: percentile(&ms, 0.95),
                mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
                min_ms: ms[0],
                kept: reference.0.len(),
            });
        }
        let threshold = cfg.nms.iou_threshold;
        let amodal = high_overlap_pairs(joints, BoxKind::Amodal, threshold);
        let pixel = high_overlap_pairs(joints, BoxKind::Pixel, threshold);
        let images = joints.iter().map(|j| j.image_id.as_str()).collect::<std::collections::HashSet<_>>().len();
        let med = |v| timings.iter().find(|t: &&VariantTiming| t.variant == v).map(|t| t.median_ms);
        let vg_overhead = match (med(BenchVariant::Vg), med(BenchVariant::Standard)) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        Ok(BenchReport {
            mode: if cfg.threads == 1 { "single-threaded" } else { "parallel" }.into(),
            seed: None,
            boxes: joints.len(),
            images,
            config: cfg.clone(),
            host: HostInfo::current(cfg.threads),
            high_overlap: OverlapPairs {
                threshold,
                amodal,
                pixel,
                ratio: (pixel > 0).then(|| amodal as f64 / pixel as f64),
            },
            timings,
            vg_overhead,
        })
    })
}

/// Crowded high-occlusion scenes with several detections per object,
/// truncated to exactly `n_boxes` joint detections.
pub fn crowded_workload(n_boxes: usize, seed: u64) -> Result<Vec<JointDetection>, BenchError> {
    let detector = DetectorNoiseConfig { duplicates: [3, 8], ..DetectorNoiseConfig::default() };
    let per_image = 20.0 * 5.5;
    let scene = SceneConfig {
        images: ((n_boxes as f64 / per_image).ceil() as usize).max(1) + 1,
        mean_objects: 20.0,
        max_objects: 40,
        occlusion: 0.8,
        ..SceneConfig::with_seed(seed)
    };
    let mut joints = Vec::with_capacity(n_boxes);
    let mut round = 0u64;
    while joints.len() < n_boxes {
        let gt = generate_corpus(&SceneConfig { seed: Some(seed.wrapping_add(round)), ..scene.clone() })?;
        let mut more = simulate_detector(&gt, &detector, seed.wrapping_add(round))?;
        for d in &mut more {
            d.image_id = format!("{round}_{}", d.image_id);
        }
        joints.extend(more);
        round += 1;
    }
    joints.truncate(n_boxes);
    Ok(joints)
}
