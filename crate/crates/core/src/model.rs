//! Classes, detections, joint pixel/amodal detections and ground truth.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::BoundingBox;

pub const CAR_VAN: &str = "car_van";
pub const TRUCK_BUS: &str = "truck_bus";
pub const PEDESTRIAN: &str = "pedestrian";

/// Index into a [`ClassTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u16);

/// Which of the two boxes of a joint prediction or annotation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxKind {
    Pixel,
    Amodal,
}

impl fmt::Display for BoxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxKind::Pixel => "pixel",
            BoxKind::Amodal => "amodal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassTable {
    labels: Vec<String>,
}

impl ClassTable {
    /// The three shared classes: car/van, truck/bus, pedestrian.
    pub fn canonical() -> Self {
        Self { labels: vec![CAR_VAN.into(), TRUCK_BUS.into(), PEDESTRIAN.into()] }
    }

    /// Fails on the first duplicate label.
    pub fn from_labels<I, S>(labels: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::default();
        for l in labels {
            let l = l.into();
            if table.id(&l).is_some() {
                return Err(l);
            }
            table.labels.push(l);
        }
        Ok(table)
    }

    pub fn id(&self, label: &str) -> Option<ClassId> {
        self.labels.iter().position(|l| l == label).map(|i| ClassId(i as u16))
    }

    pub fn label(&self, id: ClassId) -> Option<&str> {
        self.labels.get(id.0 as usize).map(String::as_str)
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id.0 as usize) < self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.labels.len()).map(|i| ClassId(i as u16))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: String,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class: ClassId,
    pub score: f64,
    pub image_id: String,
}

/// A pixel-based and an amodal box predicted by the same prior. The
/// two boxes share one class and one score.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDetection {
    pub box_pix: BoundingBox,
    pub box_amodal: BoundingBox,
    pub class: ClassId,
    pub score: f64,
    pub image_id: String,
}

impl JointDetection {
    pub fn bbox(&self, kind: BoxKind) -> &BoundingBox {
        match kind {
            BoxKind::Pixel => &self.box_pix,
            BoxKind::Amodal => &self.box_amodal,
        }
    }

    pub fn view(&self, kind: BoxKind) -> Detection {
        Detection {
            bbox: *self.bbox(kind),
            class: self.class,
            score: self.score,
            image_id: self.image_id.clone(),
        }
    }

    pub fn split_views(&self) -> (Detection, Detection) {
        (self.view(BoxKind::Pixel), self.view(BoxKind::Amodal))
    }
}

/// Splits a sequence of joints into index-aligned pixel and amodal views.
pub fn split_views(joints: &[JointDetection]) -> (Vec<Detection>, Vec<Detection>) {
    joints.iter().map(JointDetection::split_views).unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub box_pix: BoundingBox,
    pub box_amodal: BoundingBox,
    pub class: ClassId,
    pub image_id: String,
    pub object_id: String,
}

impl GroundTruthObject {
    pub fn bbox(&self, kind: BoxKind) -> &BoundingBox {
        match kind {
            BoxKind::Pixel => &self.box_pix,
            BoxKind::Amodal => &self.box_amodal,
        }
    }
}

/// A detection record as stored on disk: either box kind may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub object_id: Option<String>,
    pub class: ClassId,
    pub score: f64,
    pub box_pix: Option<BoundingBox>,
    pub box_amodal: Option<BoundingBox>,
}

impl DetectionRecord {
    pub fn bbox(&self, kind: BoxKind) -> Option<&BoundingBox> {
        match kind {
            BoxKind::Pixel => self.box_pix.as_ref(),
            BoxKind::Amodal => self.box_amodal.as_ref(),
        }
    }

    pub fn is_joint(&self) -> bool {
        self.box_pix.is_some() && self.box_amodal.is_some()
    }
}

impl From<&JointDetection> for DetectionRecord {
    fn from(j: &JointDetection) -> Self {
        Self {
            image_id: j.image_id.clone(),
            object_id: None,
            class: j.class,
            score: j.score,
            box_pix: Some(j.box_pix),
            box_amodal: Some(j.box_amodal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub classes: ClassTable,
    pub images: Vec<ImageInfo>,
    pub records: Vec<DetectionRecord>,
}

impl DetectionSet {
    pub fn from_joints(classes: ClassTable, images: Vec<ImageInfo>, joints: &[JointDetection]) -> Self {
        Self { classes, images, records: joints.iter().map(DetectionRecord::from).collect() }
    }

    pub fn from_view(classes: ClassTable, images: Vec<ImageInfo>, kind: BoxKind, dets: &[Detection]) -> Self {
        let records = dets
            .iter()
            .map(|d| DetectionRecord {
                image_id: d.image_id.clone(),
                object_id: None,
                class: d.class,
                score: d.score,
                box_pix: (kind == BoxKind::Pixel).then_some(d.bbox),
                box_amodal: (kind == BoxKind::Amodal).then_some(d.bbox),
            })
            .collect();
        Self { classes, images, records }
    }

    pub fn is_joint(&self) -> bool {
        self.records.iter().all(DetectionRecord::is_joint)
    }

    /// All records as joints; `Err(i)` names the first record lacking a box.
    pub fn joints(&self) -> Result<Vec<JointDetection>, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| match (r.box_pix, r.box_amodal) {
                (Some(box_pix), Some(box_amodal)) => Ok(JointDetection {
                    box_pix,
                    box_amodal,
                    class: r.class,
                    score: r.score,
                    image_id: r.image_id.clone(),
                }),
                _ => Err(i),
            })
            .collect()
    }

    /// Single-box view; `Err(i)` names the first record lacking that kind.
    pub fn view(&self, kind: BoxKind) -> Result<Vec<Detection>, usize> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.bbox(kind)
                    .map(|b| Detection {
                        bbox: *b,
                        class: r.class,
                        score: r.score,
                        image_id: r.image_id.clone(),
                    })
                    .ok_or(i)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    pub classes: ClassTable,
    pub images: Vec<ImageInfo>,
    pub objects: Vec<GroundTruthObject>,
}

impl GroundTruthSet {
    /// Object indices grouped by image, in first-appearance order of the
    /// manifest followed by any image ids only seen on objects.
    pub fn by_image(&self) -> Vec<(&str, Vec<usize>)> {
        group_by_image(self.objects.iter().map(|o| o.image_id.as_str()), &self.images)
    }

    /// Number of images: the manifest size, or distinct ids when the
    /// manifest is empty.
    pub fn image_count(&self) -> usize {
        if self.images.is_empty() {
            self.objects.iter().map(|o| o.image_id.as_str()).collect::<HashSet<_>>().len()
        } else {
            self.images.len()
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }
}

pub(crate) fn group_by_image<'a>(
    ids: impl Iterator<Item = &'a str>,
    images: &'a [ImageInfo],
) -> Vec<(&'a str, Vec<usize>)> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for img in images {
        slot.entry(img.id.as_str()).or_insert_with(|| {
            groups.push((img.id.as_str(), Vec::new()));
            groups.len() - 1
        });
    }
    for (i, id) in ids.enumerate() {
        let g = *slot.entry(id).or_insert_with(|| {
            groups.push((id, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// One broken rule on one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub item: usize,
    pub field: &'static str,
    pub rule: String,
    pub severity: Severity,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: record {} field `{}`: {}", self.item, self.field, self.rule)
    }
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}

struct Checker<'a> {
    images: HashMap<&'a str, &'a ImageInfo>,
    classes: &'a ClassTable,
    out: Vec<Violation>,
}

impl<'a> Checker<'a> {
    fn new(classes: &'a ClassTable, images: &'a [ImageInfo]) -> Self {
        let mut out = Vec::new();
        let mut seen = HashMap::new();
        for (i, img) in images.iter().enumerate() {
            if seen.insert(img.id.as_str(), img).is_some() {
                out.push(Violation {
                    item: i,
                    field: "images",
                    rule: format!("duplicate image id `{}` in manifest", img.id),
                    severity: Severity::Error,
                });
            }
            if !(img.width.is_finite() && img.width > 0.0 && img.height.is_finite() && img.height > 0.0) {
                out.push(Violation {
                    item: i,
                    field: "images",
                    rule: format!("image `{}` must have positive finite size", img.id),
                    severity: Severity::Error,
                });
            }
        }
        Self { images: seen, classes, out }
    }

    fn error(&mut self, item: usize, field: &'static str, rule: String) {
        self.out.push(Violation { item, field, rule, severity: Severity::Error });
    }

    fn warn(&mut self, item: usize, field: &'static str, rule: String) {
        self.out.push(Violation { item, field, rule, severity: Severity::Warning });
    }

    fn class(&mut self, item: usize, class: ClassId) {
        if !self.classes.contains(class) {
            self.error(item, "class", format!("class id {} not in class table", class.0));
        }
    }

    fn image(&mut self, item: usize, image_id: &str) -> Option<&'a ImageInfo> {
        if self.images.is_empty() {
            return None;
        }
        let found = self.images.get(image_id).copied();
        if found.is_none() {
            self.error(item, "image_id", format!("image `{image_id}` not listed in manifest"));
        }
        found
    }

    fn bbox(&mut self, item: usize, field: &'static str, b: &BoundingBox, image: Option<&ImageInfo>) {
        if let Err(e) = b.check() {
            self.error(item, field, format!("invalid box: {e}"));
            return;
        }
        if b.area() == 0.0 {
            self.warn(item, field, "zero-area box".into());
        }
        if let Some(img) = image {
            let (w, h) = (img.width, img.height);
            if b.x_min < -0.5 * w || b.x_max > 1.5 * w || b.y_min < -0.5 * h || b.y_max > 1.5 * h {
                self.error(item, field, format!("box outside the allowed frame of image `{}`", img.id));
            }
        }
    }

    fn containment(&mut self, item: usize, pix: &BoundingBox, amodal: &BoundingBox) {
        if pix.is_valid() && amodal.is_valid() && !amodal.contains(pix) {
            self.warn(item, "box_pix", "pixel box not contained in amodal box".into());
        }
    }
}

/// Reports every broken invariant as data. Containment of the pixel box in
/// the amodal box and zero-area boxes are warnings; all else is an error.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;
}

impl Validate for DetectionSet {
    fn validate(&self) -> Vec<Violation> {
        let mut c = Checker::new(&self.classes, &self.images);
        for (i, r) in self.records.iter().enumerate() {
            c.class(i, r.class);
            let img = c.image(i, &r.image_id);
            if !(r.score.is_finite() && (0.0..=1.0).contains(&r.score)) {
                c.error(i, "score", format!("score {} outside [0, 1]", r.score));
            }
            match (&r.box_pix, &r.box_amodal) {
                (None, None) => c.error(i, "box_pix", "record carries neither box".into()),
                (p, a) => {
                    if let Some(p) = p {
                        c.bbox(i, "box_pix", p, img);
                    }
                    if let Some(a) = a {
                        c.bbox(i, "box_amodal", a, img);
                    }
                    if let (Some(p), Some(a)) = (p, a) {
                        c.containment(i, p, a);
                    }
                }
            }
        }
        c.out
    }
}

impl Validate for GroundTruthSet {
    fn validate(&self) -> Vec<Violation> {
        let mut c = Checker::new(&self.classes, &self.images);
        let mut ids: HashSet<(&str, &str)> = HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            c.class(i, o.class);
            let img = c.image(i, &o.image_id);
            c.bbox(i, "box_pix", &o.box_pix, img);
            c.bbox(i, "box_amodal", &o.box_amodal, img);
            c.containment(i, &o.box_pix, &o.box_amodal);
            if !ids.insert((&o.image_id, &o.object_id)) {
                c.error(i, "object_id", format!("object id `{}` repeated in image `{}`", o.object_id, o.image_id));
            }
        }
        c.out
    }
}

/// Per-class object counts keyed by label, for summaries.
pub fn class_histogram(classes: &ClassTable, ids: impl Iterator<Item = ClassId>) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for id in ids {
        *out.entry(classes.label(id).unwrap_or("<unknown>")).or_default() += 1;
    }
    out
}
