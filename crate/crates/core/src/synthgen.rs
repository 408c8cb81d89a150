//! Deterministic crowded-scene generator and a simulated noisy detector.
//!
//! Objects are opaque axis-aligned rectangles drawn back to front: a later
//! object occludes every earlier one it overlaps. The amodal box is the
//! full rectangle; the pixel-based box is the bounding box of the part no
//! later rectangle covers. Every image draws from its own ChaCha stream
//! `(seed, image_index)`, so the output does not depend on how images are
//! scheduled across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::model::{ClassTable, GroundTruthObject, GroundTruthSet, ImageInfo, JointDetection};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid config: `{parameter}` {reason}")]
    Config { parameter: &'static str, reason: String },
    #[error("`occlusion` target {occlusion} unreachable: image {image} could not place object {object} after {retries} attempts")]
    Unreachable { occlusion: f64, image: usize, object: usize, retries: usize },
}

fn bad(parameter: &'static str, reason: impl Into<String>) -> SynthError {
    SynthError::Config { parameter, reason: reason.into() }
}

/// Size model of one class: width range in px and height/width ratio range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub label: String,
    pub weight: f64,
    pub width: [f64; 2],
    pub aspect: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Required; there is no ambient randomness.
    pub seed: Option<u64>,
    pub images: usize,
    pub image_width: f64,
    pub image_height: f64,
    /// Poisson mean of the number of objects per image.
    pub mean_objects: f64,
    pub max_objects: usize,
    /// Probability that a new object is placed overlapping an existing
    /// one; otherwise it is placed clear of all others.
    pub occlusion: f64,
    pub max_retries: usize,
    pub classes: Vec<ClassSpec>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: None,
            images: 50,
            image_width: 1280.0,
            image_height: 720.0,
            mean_objects: 7.1,
            max_objects: 24,
            occlusion: 0.5,
            max_retries: 200,
            classes: vec![
                ClassSpec { label: crate::model::CAR_VAN.into(), weight: 0.7, width: [40.0, 200.0], aspect: [0.55, 0.9] },
                ClassSpec { label: crate::model::TRUCK_BUS.into(), weight: 0.1, width: [80.0, 280.0], aspect: [0.6, 1.1] },
                ClassSpec { label: crate::model::PEDESTRIAN.into(), weight: 0.2, width: [20.0, 50.0], aspect: [1.8, 3.0] },
            ],
        }
    }
}

impl SceneConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed: Some(seed), ..Self::default() }
    }

    /// Crowded streets: about 7 objects per image, most of them overlapping.
    pub fn high_occlusion(seed: u64) -> Self {
        Self { seed: Some(seed), images: 40, mean_objects: 7.0, occlusion: 0.8, ..Self::default() }
    }

    pub fn class_table(&self) -> ClassTable {
        ClassTable::from_labels(self.classes.iter().map(|c| c.label.clone())).unwrap_or_default()
    }

    pub fn check(&self) -> Result<u64, SynthError> {
        let seed = self.seed.ok_or_else(|| bad("seed", "is required"))?;
        if !(0.0..=1.0).contains(&self.occlusion) {
            return Err(bad("occlusion", format!("must lie in [0, 1], got {}", self.occlusion)));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(bad("image_width", "image size must be positive"));
        }
        if !(self.mean_objects > 0.0 && self.mean_objects.is_finite()) {
            return Err(bad("mean_objects", format!("must be positive, got {}", self.mean_objects)));
        }
        if self.max_objects == 0 {
            return Err(bad("max_objects", "must be positive"));
        }
        if self.max_retries == 0 {
            return Err(bad("max_retries", "must be positive"));
        }
        if self.classes.is_empty() || self.classes.iter().all(|c| c.weight <= 0.0) {
            return Err(bad("classes", "need at least one class with positive weight"));
        }
        if ClassTable::from_labels(self.classes.iter().map(|c| c.label.clone())).is_err() {
            return Err(bad("classes", "labels must be unique"));
        }
        for c in &self.classes {
            let ok = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite();
            if c.weight < 0.0 || !ok(c.width) || !ok(c.aspect) {
                return Err(bad("classes", format!("class `{}` needs weight >= 0 and positive ranges", c.label)));
            }
            if c.width[1] > self.image_width || c.width[1] * c.aspect[1] > self.image_height {
                return Err(bad("classes", format!("class `{}` can be larger than the image", c.label)));
            }
        }
        Ok(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorNoiseConfig {
    /// Std of the gaussian noise added to every coordinate of both boxes, px.
    pub jitter_std: f64,
    pub base_score: f64,
    /// Score lost per unit of occluded fraction.
    pub occlusion_penalty: f64,
    pub score_noise: f64,
    /// Detections per found object, drawn uniformly from this range.
    pub duplicates: [usize; 2],
    pub miss_rate: f64,
    /// Probability per slot of a background false positive.
    pub fp_rate: f64,
    pub fp_slots: usize,
}

impl Default for DetectorNoiseConfig {
    fn default() -> Self {
        Self {
            jitter_std: 3.0,
            base_score: 0.9,
            occlusion_penalty: 0.3,
            score_noise: 0.05,
            duplicates: [1, 4],
            miss_rate: 0.05,
            fp_rate: 0.3,
            fp_slots: 2,
        }
    }
}

impl DetectorNoiseConfig {
    /// No jitter, one detection per object, no misses, no false positives.
    pub fn noiseless() -> Self {
        Self { jitter_std: 0.0, score_noise: 0.0, duplicates: [1, 1], miss_rate: 0.0, fp_rate: 0.0, ..Self::default() }
    }

    pub fn check(&self) -> Result<(), SynthError> {
        for (name, v) in [("miss_rate", self.miss_rate), ("fp_rate", self.fp_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.jitter_std >= 0.0 && self.jitter_std.is_finite()) {
            return Err(bad("jitter_std", "must be >= 0"));
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return Err(bad("score_noise", "must be >= 0"));
        }
        if self.duplicates[0] == 0 || self.duplicates[0] > self.duplicates[1] {
            return Err(bad("duplicates", "needs 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Scene plus detector settings, as read from a synth config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub scene: SceneConfig,
    pub detector: DetectorNoiseConfig,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Parts of `target` not covered by any of `occluders`.
pub fn visible_region(target: &BoundingBox, occluders: &[BoundingBox]) -> Vec<BoundingBox> {
    let mut pieces = if target.area() > 0.0 { vec![*target] } else { Vec::new() };
    for o in occluders {
        if pieces.is_empty() {
            break;
        }
        pieces = pieces.iter().flat_map(|p| p.subtract(o)).collect();
    }
    pieces
}

/// Bounding box of the visible part, or `None` when fully hidden.
pub fn visible_box(target: &BoundingBox, occluders: &[BoundingBox]) -> Option<BoundingBox> {
    visible_region(target, occluders).into_iter().reduce(|a, b| a.union_hull(&b))
}

/// Share of each object's amodal area covered by objects listed after it
/// in the same image (later means nearer).
pub fn occluded_fractions(gt: &GroundTruthSet) -> Vec<f64> {
    let mut out = vec![0.0; gt.objects.len()];
    for (_, objs) in gt.by_image() {
        for (k, &i) in objs.iter().enumerate() {
            let a = gt.objects[i].box_amodal;
            let front: Vec<BoundingBox> = objs[k + 1..].iter().map(|&j| gt.objects[j].box_amodal).collect();
            let visible: f64 = visible_region(&a, &front).iter().map(BoundingBox::area).sum();
            out[i] = if a.area() > 0.0 { (1.0 - visible / a.area()).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
    out
}

fn image_rng(seed: u64, image: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(image as u64);
    rng
}

fn pick_class(rng: &mut ChaCha8Rng, classes: &[ClassSpec]) -> usize {
    let total: f64 = classes.iter().map(|c| c.weight.max(0.0)).sum();
    let mut u = rng.random_range(0.0..total);
    for (i, c) in classes.iter().enumerate() {
        u -= c.weight.max(0.0);
        if u < 0.0 {
            return i;
        }
    }
    classes.len() - 1
}

fn sample_size(rng: &mut ChaCha8Rng, spec: &ClassSpec) -> (f64, f64) {
    let w = if spec.width[0] < spec.width[1] { rng.random_range(spec.width[0]..spec.width[1]) } else { spec.width[0] };
    let a = if spec.aspect[0] < spec.aspect[1] { rng.random_range(spec.aspect[0]..spec.aspect[1]) } else { spec.aspect[0] };
    (w, w * a)
}

fn clamp_into(b: BoundingBox, w: f64, h: f64) -> BoundingBox {
    let dx = (-b.x_min).max(0.0) - (b.x_max - w).max(0.0);
    let dy = (-b.y_min).max(0.0) - (b.y_max - h).max(0.0);
    b.translate(dx, dy)
}

fn generate_image(cfg: &SceneConfig, seed: u64, index: usize) -> Result<Vec<(usize, BoundingBox)>, SynthError> {
    let mut rng = image_rng(seed, index);
    let n = (Poisson::new(cfg.mean_objects).expect("checked positive").sample(&mut rng) as usize).min(cfg.max_objects);
    let (iw, ih) = (cfg.image_width, cfg.image_height);
    let mut placed: Vec<(usize, BoundingBox)> = Vec::with_capacity(n);
    for object in 0..n {
        let overlap = !placed.is_empty() && rng.random_bool(cfg.occlusion);
        let mut accepted = None;
        for _ in 0..cfg.max_retries {
            let class = pick_class(&mut rng, &cfg.classes);
            let (w, h) = sample_size(&mut rng, &cfg.classes[class]);
            let candidate = if overlap {
                let anchor = placed[rng.random_range(0..placed.len())].1;
                let (acx, acy) = ((anchor.x_min + anchor.x_max) / 2.0, (anchor.y_min + anchor.y_max) / 2.0);
                let cx = acx + rng.random_range(-0.8..0.8) * (anchor.width() + w) / 2.0;
                let cy = acy + rng.random_range(-0.5..0.5) * (anchor.height() + h) / 2.0;
                clamp_into(BoundingBox { x_min: cx - w / 2.0, y_min: cy - h / 2.0, x_max: cx + w / 2.0, y_max: cy + h / 2.0 }, iw, ih)
            } else {
                let x = rng.random_range(0.0..=(iw - w));
                let y = rng.random_range(0.0..=(ih - h));
                BoundingBox { x_min: x, y_min: y, x_max: x + w, y_max: y + h }
            };
            if !overlap && placed.iter().any(|(_, b)| b.intersection_area(&candidate) > 0.0) {
                continue;
            }
            // the newcomer must not hide any earlier object completely
            let mut front: Vec<BoundingBox> = Vec::with_capacity(placed.len());
            let hides = (0..placed.len()).rev().any(|k| {
                let hidden = visible_box(&placed[k].1, &front_with(&front, &candidate)).is_none();
                front.push(placed[k].1);
                hidden
            });
            if !hides {
                accepted = Some((class, candidate));
                break;
            }
        }
        match accepted {
            Some(a) => placed.push(a),
            None => {
                return Err(SynthError::Unreachable { occlusion: cfg.occlusion, image: index, object, retries: cfg.max_retries })
            }
        }
    }
    Ok(placed)
}

fn front_with(front: &[BoundingBox], extra: &BoundingBox) -> Vec<BoundingBox> {
    let mut v = Vec::with_capacity(front.len() + 1);
    v.extend_from_slice(front);
    v.push(*extra);
    v
}

/// Generates `cfg.images` images. Objects are listed back to front within
/// each image, with object ids `0..n` in that order.
pub fn generate_corpus(cfg: &SceneConfig) -> Result<GroundTruthSet, SynthError> {
    let seed = cfg.check()?;
    let classes = cfg.class_table();
    let per_image: Vec<Vec<(usize, BoundingBox)>> =
        (0..cfg.images).into_par_iter().map(|i| generate_image(cfg, seed, i)).collect::<Result<_, _>>()?;
    let mut set = GroundTruthSet { classes, images: Vec::with_capacity(cfg.images), objects: Vec::new() };
    for (index, objs) in per_image.into_iter().enumerate() {
        let image_id = format!("{index:06}");
        set.images.push(ImageInfo { id: image_id.clone(), width: cfg.image_width, height: cfg.image_height });
        let boxes: Vec<BoundingBox> = objs.iter().map(|o| o.1).collect();
        for (k, (class, amodal)) in objs.into_iter().enumerate() {
            let pix = visible_box(&amodal, &boxes[k + 1..]).expect("placement keeps every object visible");
            set.objects.push(GroundTruthObject {
                box_pix: pix,
                box_amodal: amodal,
                class: crate::model::ClassId(class as u16),
                image_id: image_id.clone(),
                object_id: k.to_string(),
            });
        }
    }
    Ok(set)
}

const DETECTOR_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, noise: Option<&Normal<f64>>) -> BoundingBox {
    let Some(n) = noise else { return *b };
    let mut c = [b.x_min, b.y_min, b.x_max, b.y_max].map(|v| v + n.sample(rng));
    if c[0] > c[2] {
        c.swap(0, 2);
    }
    if c[1] > c[3] {
        c.swap(1, 3);
    }
    BoundingBox::from(c)
}

/// Emits jittered joint detections for every found object plus background
/// false positives. Scores follow
/// `clamp(base - penalty * occluded_fraction + noise, 0, 1)`.
pub fn simulate_detector(
    gt: &GroundTruthSet,
    cfg: &DetectorNoiseConfig,
    seed: u64,
) -> Result<Vec<JointDetection>, SynthError> {
    cfg.check()?;
    let occluded = occluded_fractions(gt);
    let noise = (cfg.jitter_std > 0.0).then(|| Normal::new(0.0, cfg.jitter_std).expect("checked"));
    let score_noise = (cfg.score_noise > 0.0).then(|| Normal::new(0.0, cfg.score_noise).expect("checked"));
    let n_classes = gt.classes.len().max(1);
    let by_image = gt.by_image();
    let sizes: std::collections::HashMap<&str, (f64, f64)> = gt
        .images
        .iter()
        .map(|i| (i.id.as_str(), (i.width, i.height)))
        .collect();
    let per_image: Vec<Vec<JointDetection>> = by_image
        .par_iter()
        .enumerate()
        .map(|(index, (image_id, objs))| {
            let mut rng = image_rng(seed ^ DETECTOR_STREAM_SALT, index);
            let mut out = Vec::new();
            for &i in objs {
                let o = &gt.objects[i];
                if rng.random_bool(cfg.miss_rate) {
                    continue;
                }
                let k = rng.random_range(cfg.duplicates[0]..=cfg.duplicates[1]);
                for _ in 0..k {
                    let noise_term = score_noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
                    let score = (cfg.base_score - cfg.occlusion_penalty * occluded[i] + noise_term).clamp(0.0, 1.0);
                    out.push(JointDetection {
                        box_pix: jitter(&mut rng, &o.box_pix, noise.as_ref()),
                        box_amodal: jitter(&mut rng, &o.box_amodal, noise.as_ref()),
                        class: o.class,
                        score,
                        image_id: o.image_id.clone(),
                    });
                }
            }
            let (w, h) = sizes.get(image_id).copied().unwrap_or((1280.0, 720.0));
            for _ in 0..cfg.fp_slots {
                if !rng.random_bool(cfg.fp_rate) {
                    continue;
                }
                let bw = rng.random_range(20.0..(w / 4.0).max(21.0));
                let bh = rng.random_range(20.0..(h / 4.0).max(21.0));
                let x = rng.random_range(0.0..(w - bw).max(1.0));
                let y = rng.random_range(0.0..(h - bh).max(1.0));
                let b = BoundingBox { x_min: x, y_min: y, x_max: x + bw, y_max: y + bh };
                out.push(JointDetection {
                    box_pix: b,
                    box_amodal: b,
                    class: crate::model::ClassId(rng.random_range(0..n_classes) as u16),
                    score: rng.random_range(0.05..0.5),
                    image_id: image_id.to_string(),
                });
            }
            out
        })
        .collect();
    Ok(per_image.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{max_iou_histogram, CategoryGroup, HistogramConfig};
    use crate::model::{BoxKind, Validate};

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    /// Bounding box of the uncovered cells of a 0.25 px raster.
    fn raster_visible(target: &BoundingBox, occluders: &[BoundingBox]) -> Option<BoundingBox> {
        let res = 4.0;
        let mut hull: Option<BoundingBox> = None;
        let nx = (target.width() * res).round() as i64;
        let ny = (target.height() * res).round() as i64;
        for ix in 0..nx {
            for iy in 0..ny {
                let (x0, y0) = (target.x_min + ix as f64 / res, target.y_min + iy as f64 / res);
                let (cx, cy) = (x0 + 0.5 / res, y0 + 0.5 / res);
                let covered = occluders.iter().any(|o| cx > o.x_min && cx < o.x_max && cy > o.y_min && cy < o.y_max);
                if !covered {
                    let cell = bb(x0, y0, x0 + 1.0 / res, y0 + 1.0 / res);
                    hull = Some(hull.map_or(cell, |h| h.union_hull(&cell)));
                }
            }
        }
        hull
    }

    #[test]
    fn two_rectangle_hand_case() {
        let back = bb(5.0, 0.0, 15.0, 10.0);
        let front = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(raster_visible(&back, &[front]), Some(bb(10.0, 0.0, 15.0, 10.0)));
        assert_eq!(visible_box(&back, &[front]), Some(bb(10.0, 0.0, 15.0, 10.0)));
        assert_eq!(visible_box(&front, &[]), Some(front));
        assert_eq!(visible_box(&back, &[bb(0.0, -1.0, 20.0, 11.0)]), None);
    }

    #[test]
    fn visible_box_matches_raster_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut q = |lo: f64, hi: f64| (rng.random_range(lo..hi) * 4.0f64).round() / 4.0;
        for _ in 0..200 {
            let target = bb(0.0, 0.0, 20.0, 12.0);
            let occluders: Vec<_> = (0..3)
                .map(|_| {
                    let (x, y) = (q(-10.0, 20.0), q(-8.0, 12.0));
                    bb(x, y, x + q(1.0, 14.0), y + q(1.0, 10.0))
                })
                .collect();
            assert_eq!(visible_box(&target, &occluders), raster_visible(&target, &occluders), "{occluders:?}");
        }
    }

    #[test]
    fn zero_occlusion_means_identical_boxes() {
        let cfg = SceneConfig { occlusion: 0.0, images: 30, ..SceneConfig::with_seed(5) };
        let gt = generate_corpus(&cfg).unwrap();
        assert!(!gt.is_empty());
        assert!(gt.objects.iter().all(|o| o.box_pix == o.box_amodal));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let cfg = SceneConfig::with_seed(9);
        let a = generate_corpus(&cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| generate_corpus(&cfg).unwrap());
        assert_eq!(a, b);
        let d1 = simulate_detector(&a, &DetectorNoiseConfig::default(), 4).unwrap();
        let d2 = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| simulate_detector(&a, &DetectorNoiseConfig::default(), 4).unwrap());
        assert_eq!(d1, d2);
        assert_ne!(generate_corpus(&SceneConfig::with_seed(10)).unwrap(), a);
    }

    #[test]
    fn generated_corpus_is_valid_and_nested() {
        for occlusion in [0.0, 0.4, 0.8, 1.0] {
            let gt = generate_corpus(&SceneConfig { occlusion, ..SceneConfig::with_seed(2) }).unwrap();
            assert!(gt.validate().is_empty(), "occlusion {occlusion}");
            assert!(gt.objects.iter().all(|o| o.box_amodal.contains(&o.box_pix) && o.box_pix.area() > 0.0));
        }
    }

    #[test]
    fn amodal_tail_dominates_pixel_tail() {
        // dominance is statistical: a front object can trim two neighbors
        // toward their overlap and raise their pixel IoU, so single
        // corpora and the far tail may deviate by a few objects
        let mut pooled = GroundTruthSet::default();
        for seed in 0..50 {
            let gt = generate_corpus(&SceneConfig::high_occlusion(seed)).unwrap();
            pooled.classes = gt.classes;
            pooled.objects.extend(gt.objects.into_iter().map(|mut o| {
                o.image_id = format!("{seed}/{}", o.image_id);
                o
            }));
        }
        for group in [CategoryGroup::Vehicles, CategoryGroup::Pedestrians] {
            let h = |kind| max_iou_histogram(&pooled, &HistogramConfig::new(kind, group.clone())).unwrap();
            let (a, p) = (h(BoxKind::Amodal), h(BoxKind::Pixel));
            for k in 1..=80 {
                let t = k as f64 / 100.0;
                assert!(a.tail_mass(t) >= p.tail_mass(t) - 1e-12, "{} t = {t}", group.name());
            }
            assert!(a.tail_mass(0.45) > p.tail_mass(0.45));
        }
    }

    #[test]
    fn config_errors_name_the_parameter() {
        let e = generate_corpus(&SceneConfig { occlusion: 1.5, ..SceneConfig::with_seed(1) }).unwrap_err();
        assert!(matches!(e, SynthError::Config { parameter: "occlusion", .. }));
        assert!(e.to_string().contains("occlusion"));
        let e = generate_corpus(&SceneConfig::default()).unwrap_err();
        assert!(matches!(e, SynthError::Config { parameter: "seed", .. }));
        let crowded = SceneConfig {
            occlusion: 0.0,
            mean_objects: 60.0,
            max_objects: 60,
            max_retries: 20,
            ..SceneConfig::with_seed(1)
        };
        assert!(matches!(generate_corpus(&crowded), Err(SynthError::Unreachable { .. })));
        let bad_rate = DetectorNoiseConfig { miss_rate: 2.0, ..DetectorNoiseConfig::default() };
        assert!(simulate_detector(&GroundTruthSet::default(), &bad_rate, 0).is_err());
    }

    #[test]
    fn noiseless_detector_reproduces_ground_truth() {
        let gt = generate_corpus(&SceneConfig::with_seed(4)).unwrap();
        let dets = simulate_detector(&gt, &DetectorNoiseConfig::noiseless(), 1).unwrap();
        let occ = occluded_fractions(&gt);
        assert_eq!(dets.len(), gt.len());
        for ((d, o), f) in dets.iter().zip(&gt.objects).zip(occ) {
            assert_eq!((d.box_pix, d.box_amodal, d.class), (o.box_pix, o.box_amodal, o.class));
            assert!((d.score - (0.9 - 0.3 * f)).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicates_overlap_heavily() {
        let b = bb(100.0, 100.0, 220.0, 180.0);
        let gt = GroundTruthSet {
            classes: ClassTable::canonical(),
            images: vec![ImageInfo { id: "0".into(), width: 1280.0, height: 720.0 }],
            objects: vec![GroundTruthObject {
                box_pix: b,
                box_amodal: b,
                class: crate::model::ClassId(0),
                image_id: "0".into(),
                object_id: "0".into(),
            }],
        };
        let cfg = DetectorNoiseConfig { duplicates: [5, 5], miss_rate: 0.0, fp_rate: 0.0, ..DetectorNoiseConfig::default() };
        let dets = simulate_detector(&gt, &cfg, 8).unwrap();
        assert_eq!(dets.len(), 5);
        for (i, a) in dets.iter().enumerate() {
            for c in &dets[i + 1..] {
                assert!(a.box_pix.iou(&c.box_pix) > 0.8);
            }
        }
    }

    #[test]
    fn occluded_fraction_of_hand_case() {
        let back = bb(5.0, 0.0, 15.0, 10.0);
        let front = bb(0.0, 0.0, 10.0, 10.0);
        let objs = [back, front]
            .iter()
            .enumerate()
            .map(|(k, b)| GroundTruthObject {
                box_pix: *b,
                box_amodal: *b,
                class: crate::model::ClassId(0),
                image_id: "0".into(),
                object_id: k.to_string(),
            })
            .collect();
        let gt = GroundTruthSet { classes: ClassTable::canonical(), images: vec![], objects: objs };
        assert_eq!(occluded_fractions(&gt), vec![0.5, 0.0]);
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = SynthConfig { scene: SceneConfig::high_occlusion(7), detector: DetectorNoiseConfig::default() };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(SynthConfig::from_toml(&text).unwrap(), cfg);
        assert!(SynthConfig::from_toml("[scene]\nbogus = 1\n").is_err());
        let partial = SynthConfig::from_toml("[scene]\nseed = 3\nocclusion = 0.2\n").unwrap();
        assert_eq!(partial.scene.seed, Some(3));
        assert_eq!(partial.scene.images, SceneConfig::default().images);
    }
}
