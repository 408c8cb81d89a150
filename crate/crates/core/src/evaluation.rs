//! Detection scoring: size exclusion, greedy one-to-one matching, per-class
//! AP and mAP.
//!
//! Occluded and truncated ground truth is evaluated like every other
//! object; there are no difficulty tiers.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BoxKind, ClassId, ClassTable, Detection, DetectionSet, GroundTruthObject, GroundTruthSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("detection class `{0}` does not exist in the ground-truth class table")]
    ClassMismatch(String),
    #[error("detection record {record} has no {kind} box")]
    MissingBox { record: usize, kind: BoxKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApIntegration {
    /// Area under the monotone precision envelope over every recall step.
    AllPoints,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub tp_iou: f64,
    pub min_box_side: f64,
    pub box_kind: BoxKind,
    pub ap_integration: ApIntegration,
    /// Apply the size exclusion to detections as well as ground truth.
    pub filter_detections: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tp_iou: 0.5,
            min_box_side: 20.0,
            box_kind: BoxKind::Amodal,
            ap_integration: ApIntegration::AllPoints,
            filter_detections: true,
        }
    }
}

impl EvalConfig {
    pub fn check(&self) -> Result<(), EvalError> {
        if !(self.tp_iou > 0.0 && self.tp_iou < 1.0) {
            return Err(EvalError::Config(format!("tp_iou must lie in (0, 1), got {}", self.tp_iou)));
        }
        if !(self.min_box_side >= 0.0 && self.min_box_side.is_finite()) {
            return Err(EvalError::Config(format!("min_box_side must be >= 0, got {}", self.min_box_side)));
        }
        Ok(())
    }
}

/// Indices of the ground truth and detections that survive the size
/// exclusion. A box qualifies when both sides are at least `min_box_side`.
pub fn apply_size_filter(gt: &[GroundTruthObject], dets: &[Detection], cfg: &EvalConfig) -> (Vec<usize>, Vec<usize>) {
    let keep = |side: f64| side >= cfg.min_box_side;
    let gt_idx = (0..gt.len()).filter(|&i| keep(gt[i].bbox(cfg.box_kind).min_side())).collect();
    let det_idx = (0..dets.len())
        .filter(|&i| !cfg.filter_detections || keep(dets[i].bbox.min_side()))
        .collect();
    (gt_idx, det_idx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionMatch {
    pub det_index: usize,
    pub class: ClassId,
    pub score: f64,
    /// Index into the ground-truth object list.
    pub gt_index: Option<usize>,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// One entry per evaluated detection, in input order.
    pub detections: Vec<DetectionMatch>,
    /// Evaluated ground truth left unmatched.
    pub unmatched_gt: Vec<usize>,
    /// Evaluated ground-truth count per class.
    pub gt_per_class: HashMap<ClassId, usize>,
}

impl MatchResult {
    pub fn tp(&self, class: ClassId) -> usize {
        self.detections.iter().filter(|d| d.class == class && d.true_positive).count()
    }

    pub fn fp(&self, class: ClassId) -> usize {
        self.detections.iter().filter(|d| d.class == class && !d.true_positive).count()
    }

    pub fn fn_count(&self, class: ClassId, gt: &[GroundTruthObject]) -> usize {
        self.unmatched_gt.iter().filter(|&&g| gt[g].class == class).count()
    }
}

/// Matches one (image, class) group. Detections go in score order (ties
/// by input order); each claims the still-unmatched ground truth with the
/// highest IoU, provided it reaches `tp_iou`.
fn match_group(
    gt: &[GroundTruthObject],
    gt_idx: &[usize],
    dets: &[Detection],
    mut det_idx: Vec<usize>,
    kind: BoxKind,
    tp_iou: f64,
) -> (Vec<DetectionMatch>, Vec<usize>) {
    det_idx.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; gt_idx.len()];
    let mut out = Vec::with_capacity(det_idx.len());
    for d in det_idx {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &g) in gt_idx.iter().enumerate() {
            if taken[slot] {
                continue;
            }
            let ov = dets[d].bbox.iou(gt[g].bbox(kind));
            if ov >= tp_iou && best.is_none_or(|(_, b)| ov > b) {
                best = Some((slot, ov));
            }
        }
        if let Some((slot, _)) = best {
            taken[slot] = true;
        }
        out.push(DetectionMatch {
            det_index: d,
            class: dets[d].class,
            score: dets[d].score,
            gt_index: best.map(|(slot, _)| gt_idx[slot]),
            true_positive: best.is_some(),
        });
    }
    let unmatched = gt_idx.iter().zip(&taken).filter(|(_, &t)| !t).map(|(&g, _)| g).collect();
    (out, unmatched)
}

/// Greedy matching over already size-filtered index sets.
pub fn match_greedy(
    gt: &[GroundTruthObject],
    gt_idx: &[usize],
    dets: &[Detection],
    det_idx: &[usize],
    kind: BoxKind,
    tp_iou: f64,
) -> MatchResult {
    let mut slot: HashMap<(&str, ClassId), usize> = HashMap::new();
    let mut groups: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut group_of = |key| {
        *slot.entry(key).or_insert_with(|| {
            groups.push((Vec::new(), Vec::new()));
            groups.len() - 1
        })
    };
    let gt_slots: Vec<usize> = gt_idx.iter().map(|&g| group_of((gt[g].image_id.as_str(), gt[g].class))).collect();
    let det_slots: Vec<usize> =
        det_idx.iter().map(|&d| group_of((dets[d].image_id.as_str(), dets[d].class))).collect();
    for (&g, &s) in gt_idx.iter().zip(&gt_slots) {
        groups[s].0.push(g);
    }
    for (&d, &s) in det_idx.iter().zip(&det_slots) {
        groups[s].1.push(d);
    }
    let per_group: Vec<_> = groups
        .into_par_iter()
        .map(|(g, d)| match_group(gt, &g, dets, d, kind, tp_iou))
        .collect();

    let mut result = MatchResult::default();
    for &g in gt_idx {
        *result.gt_per_class.entry(gt[g].class).or_default() += 1;
    }
    for (m, u) in per_group {
        result.detections.extend(m);
        result.unmatched_gt.extend(u);
    }
    result.detections.sort_by_key(|m| m.det_index);
    result.unmatched_gt.sort_unstable();
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall after each detection in score order.
pub fn pr_curve(scored: &[(f64, bool)], n_gt: usize) -> Vec<PrPoint> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0).then(a.cmp(&b)));
    let (mut tp, mut fp) = (0usize, 0usize);
    order
        .into_iter()
        .map(|i| {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            PrPoint { recall: tp as f64 / n_gt as f64, precision: tp as f64 / (tp + fp) as f64 }
        })
        .collect()
}

/// AP of one class from `(score, is_tp)` pairs. `None` when the class has
/// no ground truth.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize, method: ApIntegration) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let curve = pr_curve(scored, n_gt);
    // envelope: best precision at this or any higher recall
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let ap = match method {
        ApIntegration::AllPoints => {
            let mut prev = 0.0;
            let mut sum = 0.0;
            for (p, env) in curve.iter().zip(&envelope) {
                sum += (p.recall - prev) * env;
                prev = p.recall;
            }
            sum
        }
        ApIntegration::ElevenPoint => {
            (0..=10)
                .map(|t| {
                    let r = t as f64 / 10.0;
                    curve
                        .iter()
                        .zip(&envelope)
                        .find(|(p, _)| p.recall >= r - 1e-12)
                        .map_or(0.0, |(_, &e)| e)
                })
                .sum::<f64>()
                / 11.0
        }
    };
    Some(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub label: String,
    /// Percent; absent when the class has no evaluated ground truth.
    pub ap: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt: usize,
    pub recall: Option<f64>,
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub classes: Vec<ClassReport>,
    /// Percent; mean AP over classes present in the evaluated ground truth.
    pub map: Option<f64>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

const MAX_CURVE_SAMPLES: usize = 200;

fn sample_curve(curve: Vec<PrPoint>) -> Vec<PrPoint> {
    if curve.len() <= MAX_CURVE_SAMPLES {
        return curve;
    }
    let last = curve.len() - 1;
    (0..MAX_CURVE_SAMPLES).map(|k| curve[k * last / (MAX_CURVE_SAMPLES - 1)]).collect()
}

/// Full pipeline over already-extracted detections whose class ids refer
/// to the ground-truth class table.
pub fn evaluate_detections(
    gt: &GroundTruthSet,
    dets: &[Detection],
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.check()?;
    let (gt_idx, det_idx) = apply_size_filter(&gt.objects, dets, cfg);
    let matches = match_greedy(&gt.objects, &gt_idx, dets, &det_idx, cfg.box_kind, cfg.tp_iou);

    let mut notes = vec![format!(
        "matching and size exclusion use {} boxes; detections are {}filtered by size",
        cfg.box_kind,
        if cfg.filter_detections { "" } else { "not " }
    )];
    notes.push(format!(
        "{} of {} ground-truth objects and {} of {} detections pass the {} px minimum side",
        gt_idx.len(),
        gt.objects.len(),
        det_idx.len(),
        dets.len(),
        cfg.min_box_side
    ));
    let mut warnings = Vec::new();
    let mut classes = Vec::with_capacity(gt.classes.len());
    for class in gt.classes.ids() {
        let label = gt.classes.label(class).unwrap_or_default().to_string();
        let n_gt = matches.gt_per_class.get(&class).copied().unwrap_or(0);
        let scored: Vec<(f64, bool)> = matches
            .detections
            .iter()
            .filter(|m| m.class == class)
            .map(|m| (m.score, m.true_positive))
            .collect();
        let ap = average_precision(&scored, n_gt, cfg.ap_integration).map(|a| 100.0 * a);
        if ap.is_none() {
            warnings.push(format!("class `{label}` has no evaluated ground truth; excluded from mAP"));
        }
        let tp = scored.iter().filter(|s| s.1).count();
        classes.push(ClassReport {
            label,
            ap,
            tp,
            fp: scored.len() - tp,
            fn_: matches.fn_count(class, &gt.objects),
            gt: n_gt,
            recall: (n_gt > 0).then(|| tp as f64 / n_gt as f64),
            pr_curve: if n_gt > 0 { sample_curve(pr_curve(&scored, n_gt)) } else { Vec::new() },
        });
    }
    let present: Vec<f64> = classes.iter().filter_map(|c| c.ap).collect();
    let map = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok(EvalReport { config: *cfg, classes, map, notes, warnings })
}

/// Remaps detection classes onto the ground-truth table by label, takes
/// the configured box kind and runs the pipeline.
pub fn evaluate(gt: &GroundTruthSet, dets: &DetectionSet, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let remap: Vec<ClassId> = dets
        .classes
        .labels()
        .iter()
        .map(|l| gt.classes.id(l).ok_or_else(|| EvalError::ClassMismatch(l.clone())))
        .collect::<Result<_, _>>()?;
    let mut view = dets
        .view(cfg.box_kind)
        .map_err(|record| EvalError::MissingBox { record, kind: cfg.box_kind })?;
    for d in &mut view {
        d.class = *remap
            .get(d.class.0 as usize)
            .ok_or_else(|| EvalError::ClassMismatch(format!("#{}", d.class.0)))?;
    }
    evaluate_detections(gt, &view, cfg)
}

pub fn display_label(label: &str) -> String {
    match label {
        crate::model::CAR_VAN => "Car/Van".into(),
        crate::model::TRUCK_BUS => "Truck/Bus".into(),
        crate::model::PEDESTRIAN => "Pedestrian".into(),
        other => other.into(),
    }
}

/// Aligned table with one row per named report: one AP column per class
/// and a trailing mAP column, values in percent.
pub fn format_table(rows: &[(&str, &EvalReport)], classes: &ClassTable) -> String {
    let mut header: Vec<String> = vec!["Method".into()];
    header.extend(classes.labels().iter().map(|l| display_label(l)));
    header.push("mAP".into());
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, rep)| {
            let mut r = vec![name.to_string()];
            for label in classes.labels() {
                r.push(fmt(rep.classes.iter().find(|c| &c.label == label).and_then(|c| c.ap)));
            }
            r.push(fmt(rep.map));
            r
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c == 0 {
                let _ = write!(s, "{:<w$}", cell, w = widths[c]);
            } else {
                let _ = write!(s, "  {:>w$}", cell, w = widths[c]);
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(&header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

impl EvalReport {
    pub fn to_text(&self, name: &str, classes: &ClassTable) -> String {
        let mut s = format_table(&[(name, self)], classes);
        s.push('\n');
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<12} gt {:>6}  tp {:>6}  fp {:>6}  fn {:>6}  recall {}",
                display_label(&c.label),
                c.gt,
                c.tp,
                c.fp,
                c.fn_,
                c.recall.map_or("-".into(), |r| format!("{r:.4}"))
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}
