//! Max-IoU overlap histograms over annotation corpora and the recall
//! bounds they imply for standard and visibility-guided NMS.
//!
//! For every size-qualified object we take the largest IoU between its box
//! and any other object of the same group in the same image. Objects whose
//! maximum exceeds the NMS threshold cannot all survive greedy suppression
//! even with perfect predictions. With `tail(h, t)` the histogram mass
//! strictly above `t`:
//!
//! ```text
//! r_max = 1 - tail(h_amodal, t)
//! r_vg  = r_max + tail(h_pix, t)
//! ```
//!
//! The formula counts both members of an overlapping pair as lost while
//! greedy NMS loses only one of them, so it is a lower bound on what
//! [`empirical_gt_nms_recall`] measures.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoxKind, ClassId, ClassTable, Detection, GroundTruthSet, CAR_VAN, PEDESTRIAN, TRUCK_BUS};
use crate::suppression::{standard_nms, NmsConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("IoU threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("bin width must lie in (0, 1], got {0}")]
    BinWidth(f64),
    #[error("histograms are not comparable: {0}")]
    Mismatch(String),
}

/// A pool of classes whose objects count as neighbors of each other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryGroup {
    /// Cars, vans, trucks and buses.
    Vehicles,
    Pedestrians,
    Custom { name: String, labels: Vec<String> },
}

impl CategoryGroup {
    pub fn name(&self) -> &str {
        match self {
            CategoryGroup::Vehicles => "vehicles",
            CategoryGroup::Pedestrians => "pedestrians",
            CategoryGroup::Custom { name, .. } => name,
        }
    }

    pub fn includes(&self, label: &str) -> bool {
        match self {
            CategoryGroup::Vehicles => matches!(label, CAR_VAN | TRUCK_BUS | "car" | "van" | "truck" | "bus"),
            CategoryGroup::Pedestrians => label == PEDESTRIAN,
            CategoryGroup::Custom { labels, .. } => labels.iter().any(|l| l == label),
        }
    }

    /// Class ids of `table` that belong to this group.
    pub fn members(&self, table: &ClassTable) -> Vec<ClassId> {
        table.ids().filter(|&c| table.label(c).is_some_and(|l| self.includes(l))).collect()
    }
}

/// Which objects count as neighbors when taking the maximum IoU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborScope {
    /// Any object of the same group.
    Group,
    /// Only objects of the same class.
    Class,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramConfig {
    pub box_kind: BoxKind,
    pub group: CategoryGroup,
    pub min_box_side: f64,
    /// Box kind the size exclusion looks at. Amodal by default, so that the
    /// pixel and amodal histograms describe the same objects.
    pub filter_box: BoxKind,
    pub bin_width: f64,
    pub scope: NeighborScope,
}

impl HistogramConfig {
    pub fn new(box_kind: BoxKind, group: CategoryGroup) -> Self {
        Self { box_kind, group, min_box_side: 20.0, filter_box: BoxKind::Amodal, bin_width: 0.01, scope: NeighborScope::Group }
    }
}

/// Indices of the objects that enter the analysis, grouped by image.
fn qualified_by_image(gt: &GroundTruthSet, cfg: &HistogramConfig) -> Vec<Vec<usize>> {
    let members = cfg.group.members(&gt.classes);
    gt.by_image()
        .into_iter()
        .map(|(_, objs)| {
            objs.into_iter()
                .filter(|&i| {
                    let o = &gt.objects[i];
                    members.contains(&o.class) && o.bbox(cfg.filter_box).min_side() >= cfg.min_box_side
                })
                .collect()
        })
        .collect()
}

/// Per-object maximum IoU against the other qualified objects of its
/// image; 0 for objects without neighbors.
pub fn max_iou_values(gt: &GroundTruthSet, cfg: &HistogramConfig) -> Vec<f64> {
    qualified_by_image(gt, cfg)
        .par_iter()
        .flat_map_iter(|objs| {
            objs.iter().map(move |&i| {
                let a = &gt.objects[i];
                objs.iter()
                    .filter(|&&j| j != i && (cfg.scope == NeighborScope::Group || gt.objects[j].class == a.class))
                    .map(|&j| a.bbox(cfg.box_kind).iou(gt.objects[j].bbox(cfg.box_kind)))
                    .fold(0.0, f64::max)
            })
        })
        .collect()
}

/// Normalized histogram on `[0, 1]`. Bin 0 is `[0, w]`, bin `i > 0` is
/// `(i*w, (i+1)*w]`, so every value in a bin strictly exceeds its lower
/// edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapHistogram {
    pub bin_width: f64,
    pub bins: Vec<f64>,
    pub object_count: usize,
    pub group: String,
    pub box_kind: BoxKind,
}

impl OverlapHistogram {
    pub fn from_values(
        values: &[f64],
        bin_width: f64,
        group: impl Into<String>,
        box_kind: BoxKind,
    ) -> Result<Self, AnalysisError> {
        if !(bin_width > 0.0 && bin_width <= 1.0) {
            return Err(AnalysisError::BinWidth(bin_width));
        }
        let n = (1.0 / bin_width - 1e-9).ceil().max(1.0) as usize;
        let mut counts = vec![0usize; n];
        for &v in values {
            counts[bin_index(v, bin_width, n)] += 1;
        }
        let total = values.len();
        let bins = counts
            .into_iter()
            .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        Ok(Self { bin_width, bins, object_count: total, group: group.into(), box_kind })
    }

    #[inline]
    pub fn lower_edge(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }

    /// Mass of the bins lying entirely above `t`.
    pub fn tail_mass(&self, t: f64) -> f64 {
        self.bins
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.lower_edge(i) >= t - 1e-9)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// `bin_lower,density` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lower,density\n");
        for (i, p) in self.bins.iter().enumerate() {
            let _ = writeln!(s, "{:.6},{}", self.lower_edge(i), p);
        }
        s
    }

    fn compatible(&self, other: &Self) -> Result<(), AnalysisError> {
        if self.bin_width != other.bin_width || self.bins.len() != other.bins.len() {
            return Err(AnalysisError::Mismatch(format!(
                "bin width {} vs {}",
                self.bin_width, other.bin_width
            )));
        }
        if self.group != other.group {
            return Err(AnalysisError::Mismatch(format!("group {} vs {}", self.group, other.group)));
        }
        Ok(())
    }
}

fn bin_index(v: f64, w: f64, n: usize) -> usize {
    let edge = |i: usize| i as f64 * w;
    let mut i = ((v / w).ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
    while i > 0 && v <= edge(i) {
        i -= 1;
    }
    while i + 1 < n && v > edge(i + 1) {
        i += 1;
    }
    i
}

pub fn max_iou_histogram(gt: &GroundTruthSet, cfg: &HistogramConfig) -> Result<OverlapHistogram, AnalysisError> {
    OverlapHistogram::from_values(&max_iou_values(gt, cfg), cfg.bin_width, cfg.group.name(), cfg.box_kind)
}

fn check_threshold(t: f64) -> Result<(), AnalysisError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(AnalysisError::Threshold(t))
    }
}

/// Highest recall standard NMS can reach on amodal boxes.
pub fn recall_bound_standard(h_amodal: &OverlapHistogram, t_iou: f64) -> Result<f64, AnalysisError> {
    check_threshold(t_iou)?;
    Ok(1.0 - h_amodal.tail_mass(t_iou))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallBounds {
    pub t_iou: f64,
    pub r_max: f64,
    pub r_vg: f64,
    /// Relative gain of `r_vg` over `r_max`, percent.
    pub delta_percent: Option<f64>,
    /// Sum over the tail of the amodal minus pixel densities.
    pub kappa_tail: f64,
    pub pix_tail: f64,
}

pub fn recall_bound_vg(
    h_amodal: &OverlapHistogram,
    h_pix: &OverlapHistogram,
    t_iou: f64,
) -> Result<RecallBounds, AnalysisError> {
    h_amodal.compatible(h_pix)?;
    let r_max = recall_bound_standard(h_amodal, t_iou)?;
    let pix_tail = h_pix.tail_mass(t_iou);
    let r_vg = r_max + pix_tail;
    Ok(RecallBounds {
        t_iou,
        r_max,
        r_vg,
        delta_percent: (r_max > 0.0).then(|| 100.0 * (r_vg - r_max) / r_max),
        kappa_tail: h_amodal.tail_mass(t_iou) - pix_tail,
        pix_tail,
    })
}

/// Recall obtained by feeding the ground truth itself (score 1, input
/// order) through standard NMS, per image and neighbor pool.
pub fn empirical_gt_nms_recall(gt: &GroundTruthSet, cfg: &HistogramConfig, t_iou: f64) -> Result<f64, AnalysisError> {
    check_threshold(t_iou)?;
    let dets: Vec<Detection> = qualified_by_image(gt, cfg)
        .into_iter()
        .flatten()
        .map(|i| {
            let o = &gt.objects[i];
            Detection {
                bbox: *o.bbox(cfg.box_kind),
                class: match cfg.scope {
                    NeighborScope::Group => ClassId(0),
                    NeighborScope::Class => o.class,
                },
                score: 1.0,
                image_id: o.image_id.clone(),
            }
        })
        .collect();
    if dets.is_empty() {
        return Ok(1.0);
    }
    let kept = standard_nms(&dets, &NmsConfig { iou_threshold: t_iou, class_aware: true });
    Ok(kept.len() as f64 / dets.len() as f64)
}

/// Everything reported for one group of one corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAnalysis {
    pub group: String,
    pub amodal: OverlapHistogram,
    pub pixel: OverlapHistogram,
    pub bounds: RecallBounds,
    pub empirical_recall_amodal: f64,
    pub empirical_recall_pixel: f64,
    pub objects_per_image: f64,
    pub image_count: usize,
}

pub fn analyze_group(gt: &GroundTruthSet, cfg: &HistogramConfig, t_iou: f64) -> Result<GroupAnalysis, AnalysisError> {
    check_threshold(t_iou)?;
    let amodal_cfg = HistogramConfig { box_kind: BoxKind::Amodal, ..cfg.clone() };
    let pixel_cfg = HistogramConfig { box_kind: BoxKind::Pixel, ..cfg.clone() };
    let amodal = max_iou_histogram(gt, &amodal_cfg)?;
    let pixel = max_iou_histogram(gt, &pixel_cfg)?;
    let bounds = recall_bound_vg(&amodal, &pixel, t_iou)?;
    let images = gt.image_count();
    Ok(GroupAnalysis {
        group: cfg.group.name().to_string(),
        objects_per_image: if images == 0 { 0.0 } else { amodal.object_count as f64 / images as f64 },
        empirical_recall_amodal: empirical_gt_nms_recall(gt, &amodal_cfg, t_iou)?,
        empirical_recall_pixel: empirical_gt_nms_recall(gt, &pixel_cfg, t_iou)?,
        amodal,
        pixel,
        bounds,
        image_count: images,
    })
}

pub fn format_analysis(rows: &[GroupAnalysis]) -> String {
    let mut s = format!(
        "{:<12} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8} {:>10} {:>10}\n",
        "group", "R_max", "R_vg", "delta%", "kappa", "#/image", "objects", "nms_amod", "nms_pix"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>8.3} {:>8.3} {:>8} {:>9.4} {:>9.1} {:>8} {:>10.3} {:>10.3}",
            r.group,
            r.bounds.r_max,
            r.bounds.r_vg,
            r.bounds.delta_percent.map_or("-".into(), |d| format!("{d:+.2}")),
            r.bounds.kappa_tail,
            r.objects_per_image,
            r.amodal.object_count,
            r.empirical_recall_amodal,
            r.empirical_recall_pixel
        );
    }
    s.push_str(
        "note: R_max/R_vg count both members of an overlapping pair as lost; greedy NMS on the \
         ground truth (nms_amod/nms_pix) loses one, so the formula bounds it from below.\n",
    );
    s
}

/// Overlaid amodal and pixel histograms with a threshold marker.
pub fn histogram_svg(amodal: &OverlapHistogram, pixel: &OverlapHistogram, t_iou: f64) -> String {
    let (w, h, pad) = (640.0, 320.0, 40.0);
    let plot_w = w - 2.0 * pad;
    let plot_h = h - 2.0 * pad;
    // zoom past the no-overlap bin, which dominates otherwise
    let y_max = amodal
        .bins
        .iter()
        .chain(&pixel.bins)
        .enumerate()
        .filter(|(i, _)| i % amodal.bins.len() != 0)
        .map(|(_, &p)| p)
        .fold(1e-6, f64::max);
    let n = amodal.bins.len().max(1);
    let bar_w = plot_w / n as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    for (hist, color) in [(amodal, "#1f77b4"), (pixel, "#ff7f0e")] {
        for (i, &p) in hist.bins.iter().enumerate().skip(1) {
            if p <= 0.0 {
                continue;
            }
            let bh = (p / y_max).min(1.0) * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.5"/>"#,
                pad + i as f64 * bar_w,
                pad + plot_h - bh,
                bar_w,
                bh
            );
        }
    }
    let tx = pad + t_iou * plot_w;
    let _ = writeln!(
        s,
        r#"<line x1="{tx:.2}" y1="{pad}" x2="{tx:.2}" y2="{:.2}" stroke="red" stroke-dasharray="4 3"/>"#,
        pad + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        pad + plot_h,
        pad + plot_w,
        pad + plot_h
    );
    for k in 0..=10 {
        let x = pad + k as f64 / 10.0 * plot_w;
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.1}</text>"#,
            pad + plot_h + 14.0,
            k as f64 / 10.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{pad}" y="{:.2}" font-size="12">{} max-IoU: amodal (blue) vs pixel (orange), t = {t_iou}</text>"#,
        pad - 12.0,
        amodal.group
    );
    s.push_str("</svg>\n");
    s
}
