//! Standard NMS, Soft NMS, visibility-guided NMS and its Soft variant.
//!
//! Every kernel groups candidates by image (and by class unless the
//! config is class-agnostic); groups never interact. Within a group the
//! order is score descending with ties going to the lower input index.
//! Groups are processed with rayon and results are canonicalized, so the
//! output does not depend on the thread count.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou_with_areas, BoundingBox};
use crate::model::{BoxKind, ClassId, Detection, JointDetection};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("iou_threshold must lie in (0, 1), got {0}")]
    IouThreshold(f64),
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("score_floor must lie in [0, 1), got {0}")]
    ScoreFloor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmsConfig {
    pub iou_threshold: f64,
    /// When false, detections of different classes suppress each other.
    pub class_aware: bool,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self { iou_threshold: DEFAULT_IOU_THRESHOLD, class_aware: true }
    }
}

impl NmsConfig {
    pub fn new(iou_threshold: f64) -> Result<Self, ConfigError> {
        let cfg = Self { iou_threshold, ..Self::default() };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(ConfigError::IouThreshold(self.iou_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftMode {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftNmsConfig {
    pub mode: SoftMode,
    pub sigma: f64,
    /// Overlap above which the linear decay applies. Unused in gaussian mode.
    pub iou_threshold: f64,
    pub score_floor: f64,
    pub class_aware: bool,
}

impl Default for SoftNmsConfig {
    fn default() -> Self {
        Self {
            mode: SoftMode::Gaussian,
            sigma: 0.5,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            score_floor: 0.001,
            class_aware: true,
        }
    }
}

impl SoftNmsConfig {
    pub fn linear() -> Self {
        Self { mode: SoftMode::Linear, ..Self::default() }
    }

    pub fn gaussian() -> Self {
        Self::default()
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ConfigError::Sigma(self.sigma));
        }
        if !(0.0..1.0).contains(&self.score_floor) {
            return Err(ConfigError::ScoreFloor(self.score_floor));
        }
        if self.mode == SoftMode::Linear && !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(ConfigError::IouThreshold(self.iou_threshold));
        }
        Ok(())
    }

    #[inline]
    fn decay(&self, iou: f64) -> f64 {
        match self.mode {
            SoftMode::Linear => {
                if iou > self.iou_threshold {
                    1.0 - iou
                } else {
                    1.0
                }
            }
            SoftMode::Gaussian => (-(iou * iou) / self.sigma).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SuppressionResult {
    /// Surviving input indices, strictly increasing.
    pub kept_indices: Vec<usize>,
    /// `(index, new_score)` for every survivor of a soft variant, sorted by index.
    pub rescored: Option<Vec<(usize, f64)>>,
}

impl SuppressionResult {
    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

/// Anything that can enter a suppression kernel.
pub trait Candidate: Sync {
    fn bbox(&self) -> &BoundingBox;
    fn score(&self) -> f64;
    fn class(&self) -> ClassId;
    fn image_id(&self) -> &str;
}

impl Candidate for Detection {
    fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }
    fn score(&self) -> f64 {
        self.score
    }
    fn class(&self) -> ClassId {
        self.class
    }
    fn image_id(&self) -> &str {
        &self.image_id
    }
}

/// Borrowed single-box view of a joint detection.
#[derive(Debug, Clone, Copy)]
pub struct JointView<'a> {
    pub joint: &'a JointDetection,
    pub kind: BoxKind,
}

impl Candidate for JointView<'_> {
    fn bbox(&self) -> &BoundingBox {
        self.joint.bbox(self.kind)
    }
    fn score(&self) -> f64 {
        self.joint.score
    }
    fn class(&self) -> ClassId {
        self.joint.class
    }
    fn image_id(&self) -> &str {
        &self.joint.image_id
    }
}

pub fn joint_views(joints: &[JointDetection], kind: BoxKind) -> Vec<JointView<'_>> {
    joints.iter().map(|joint| JointView { joint, kind }).collect()
}

/// Score descending, then input index ascending.
#[inline]
pub(crate) fn rank_order(sa: f64, ia: usize, sb: f64, ib: usize) -> Ordering {
    sb.total_cmp(&sa).then(ia.cmp(&ib))
}

fn groups<C: Candidate>(dets: &[C], class_aware: bool) -> Vec<Vec<usize>> {
    let mut slot: HashMap<(&str, Option<ClassId>), usize> = HashMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, d) in dets.iter().enumerate() {
        let key = (d.image_id(), class_aware.then(|| d.class()));
        let g = *slot.entry(key).or_insert_with(|| {
            out.push(Vec::new());
            out.len() - 1
        });
        out[g].push(i);
    }
    out
}

/// Greedy hard suppression of one group; returns kept input indices.
fn greedy_group<C: Candidate>(dets: &[C], mut members: Vec<usize>, threshold: f64) -> Vec<usize> {
    members.sort_by(|&a, &b| rank_order(dets[a].score(), a, dets[b].score(), b));
    let mut remaining: Vec<(usize, BoundingBox, f64)> = members
        .into_iter()
        .map(|i| {
            let b = *dets[i].bbox();
            (i, b, b.area())
        })
        .collect();
    let mut kept = Vec::new();
    let mut head = 0;
    while head < remaining.len() {
        let (idx, top, top_area) = remaining[head];
        kept.push(idx);
        head += 1;
        // compact the tail, preserving rank order
        let mut write = head;
        for read in head..remaining.len() {
            let (_, b, a) = remaining[read];
            if iou_with_areas(&top, top_area, &b, a) <= threshold {
                remaining[write] = remaining[read];
                write += 1;
            }
        }
        remaining.truncate(write);
    }
    kept
}

/// Iterative soft rescoring of one group; returns `(index, final score)`.
fn soft_group<C: Candidate>(dets: &[C], members: Vec<usize>, cfg: &SoftNmsConfig) -> Vec<(usize, f64)> {
    let mut live: Vec<(usize, BoundingBox, f64, f64)> = members
        .into_iter()
        .map(|i| {
            let b = *dets[i].bbox();
            (i, b, b.area(), dets[i].score())
        })
        .collect();
    let mut out = Vec::with_capacity(live.len());
    while !live.is_empty() {
        let mut best = 0;
        for k in 1..live.len() {
            if rank_order(live[k].3, live[k].0, live[best].3, live[best].0) == Ordering::Less {
                best = k;
            }
        }
        let (idx, top, top_area, top_score) = live.swap_remove(best);
        out.push((idx, top_score));
        live.retain_mut(|(_, b, a, s)| {
            *s *= cfg.decay(iou_with_areas(&top, top_area, b, *a));
            *s >= cfg.score_floor
        });
    }
    out
}

/// Greedy NMS: accept the best remaining candidate and discard every
/// other candidate whose IoU with it exceeds the threshold.
pub fn standard_nms<C: Candidate>(dets: &[C], cfg: &NmsConfig) -> SuppressionResult {
    let mut kept: Vec<usize> = groups(dets, cfg.class_aware)
        .into_par_iter()
        .flat_map_iter(|g| greedy_group(dets, g, cfg.iou_threshold))
        .collect();
    kept.sort_unstable();
    SuppressionResult { kept_indices: kept, rescored: None }
}

pub fn soft_nms<C: Candidate>(dets: &[C], cfg: &SoftNmsConfig) -> SuppressionResult {
    let mut rescored: Vec<(usize, f64)> = groups(dets, cfg.class_aware)
        .into_par_iter()
        .flat_map_iter(|g| soft_group(dets, g, cfg))
        .collect();
    rescored.sort_unstable_by_key(|&(i, _)| i);
    SuppressionResult {
        kept_indices: rescored.iter().map(|&(i, _)| i).collect(),
        rescored: Some(rescored),
    }
}

/// Output of the visibility-guided variants: index-aligned pixel and
/// amodal detections selected by the same surviving indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VgOutput {
    pub pix: Vec<Detection>,
    pub amodal: Vec<Detection>,
    pub kept_indices: Vec<usize>,
}

impl VgOutput {
    fn select(joints: &[JointDetection], kept: &SuppressionResult) -> Self {
        let score_of = |pos: usize, i: usize| match &kept.rescored {
            Some(r) => r[pos].1,
            None => joints[i].score,
        };
        let (mut pix, mut amodal) = (Vec::with_capacity(kept.len()), Vec::with_capacity(kept.len()));
        for (pos, &i) in kept.kept_indices.iter().enumerate() {
            let (mut p, mut a) = joints[i].split_views();
            p.score = score_of(pos, i);
            a.score = p.score;
            pix.push(p);
            amodal.push(a);
        }
        Self { pix, amodal, kept_indices: kept.kept_indices.clone() }
    }

    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

/// Suppress on the pixel-based boxes, then select the amodal boxes with
/// the pixel-based survivor indices.
pub fn vg_nms(joints: &[JointDetection], cfg: &NmsConfig) -> VgOutput {
    let kept = standard_nms(&joint_views(joints, BoxKind::Pixel), cfg);
    VgOutput::select(joints, &kept)
}

/// Soft NMS on the pixel-based boxes; survivors and their new scores
/// select and rescore both outputs.
pub fn vg_soft_nms(joints: &[JointDetection], cfg: &SoftNmsConfig) -> VgOutput {
    let kept = soft_nms(&joint_views(joints, BoxKind::Pixel), cfg);
    VgOutput::select(joints, &kept)
}

/// Applies a standard or soft result to plain detections.
pub fn select(dets: &[Detection], result: &SuppressionResult) -> Vec<Detection> {
    result
        .kept_indices
        .iter()
        .enumerate()
        .map(|(pos, &i)| {
            let mut d = dets[i].clone();
            if let Some(r) = &result.rescored {
                d.score = r[pos].1;
            }
            d
        })
        .collect()
}
