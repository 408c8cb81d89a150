//! Corpus files: the native line-delimited JSON schema, KITTI object
//! label directories, and the join of amodal and pixel-based annotations.
//!
//! A native file is one header object on the first line followed by one
//! record per line:
//!
//! ```text
//! {"schema_version":"1","classes":["car_van",...],"images":[{"id":"0","width":1242,"height":375}]}
//! {"image_id":"0","object_id":"3","class":"car_van","box_pix":[x0,y0,x1,y1],"box_amodal":[x0,y0,x1,y1]}
//! ```
//!
//! Detection records add `"score"` and may omit one of the boxes. Extra
//! header keys are preserved on read and written back verbatim.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::model::{
    BoxKind, ClassId, ClassTable, DetectionRecord, DetectionSet, GroundTruthObject, GroundTruthSet, ImageInfo,
    Validate, Violation, CAR_VAN, PEDESTRIAN, TRUCK_BUS,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: file is empty, expected a header line")]
    MissingHeader { path: PathBuf },
    #[error("{path}:{line}: malformed JSON: {source}")]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}: unknown schema_version `{found}` (expected `{SCHEMA_VERSION}`)")]
    UnknownSchemaVersion { path: PathBuf, found: String },
    #[error("{path}:{line}: record {record} is missing required field `{field}`")]
    MissingField { path: PathBuf, line: usize, record: String, field: &'static str },
    #[error("{path}:{line}: record {record} uses class `{label}` not declared in the header")]
    UnknownClass { path: PathBuf, line: usize, record: String, label: String },
    #[error("{path}: class `{label}` declared twice in the header")]
    DuplicateClass { path: PathBuf, label: String },
    #[error("{path}:{line}: {reason}")]
    Kitti { path: PathBuf, line: usize, reason: String },
    #[error("duplicate join key (image `{image_id}`, object `{object_id}`) in the {side} set")]
    DuplicateKey { side: &'static str, image_id: String, object_id: String },
}

type Result<T, E = IngestError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: String,
    pub classes: Vec<String>,
    pub images: Vec<ImageInfo>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Header {
    pub fn new(classes: &ClassTable, images: &[ImageInfo]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            classes: classes.labels().to_vec(),
            images: images.to_vec(),
            extra: Map::new(),
        }
    }

    /// Class and image counts, as echoed by readers and the CLI.
    pub fn summary(&self) -> String {
        format!("{} classes, {} images", self.classes.len(), self.images.len())
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    image_id: Option<String>,
    object_id: Option<String>,
    class: Option<String>,
    score: Option<f64>,
    box_pix: Option<BoundingBox>,
    box_amodal: Option<BoundingBox>,
}

impl RawRecord {
    fn locus(&self) -> String {
        match (&self.image_id, &self.object_id) {
            (Some(i), Some(o)) => format!("(image `{i}`, object `{o}`)"),
            (Some(i), None) => format!("(image `{i}`)"),
            _ => "(unidentified)".into(),
        }
    }
}

/// A parsed set plus everything `validate` found, with the file line of
/// every record.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub data: T,
    pub header: Header,
    pub violations: Vec<Violation>,
    pub record_lines: Vec<usize>,
}

impl<T> Loaded<T> {
    pub fn line_of(&self, v: &Violation) -> Option<usize> {
        self.record_lines.get(v.item).copied()
    }

    /// Violations rendered with their file line.
    pub fn describe_violations(&self) -> Vec<String> {
        self.violations
            .iter()
            .map(|v| match self.line_of(v) {
                Some(l) if v.field != "images" => format!("line {l}: {v}"),
                _ => v.to_string(),
            })
            .collect()
    }
}

struct Records {
    path: PathBuf,
    header: Header,
    classes: ClassTable,
    rows: Vec<(usize, RawRecord)>,
}

fn read_records(path: &Path) -> Result<Records> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header_line = loop {
        match lines.next() {
            None => return Err(IngestError::MissingHeader { path: path.into() }),
            Some((_, l)) => {
                let l = l.map_err(io_err(path))?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
        }
    };
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|source| IngestError::Json { path: path.into(), line: 1, source })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(IngestError::UnknownSchemaVersion { path: path.into(), found: header.schema_version });
    }
    let classes = ClassTable::from_labels(header.classes.iter().cloned())
        .map_err(|label| IngestError::DuplicateClass { path: path.into(), label })?;
    let mut rows = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(io_err(path))?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&l)
            .map_err(|source| IngestError::Json { path: path.into(), line: i + 1, source })?;
        rows.push((i + 1, rec));
    }
    Ok(Records { path: path.into(), header, classes, rows })
}

impl Records {
    fn missing(&self, line: usize, r: &RawRecord, field: &'static str) -> IngestError {
        IngestError::MissingField { path: self.path.clone(), line, record: r.locus(), field }
    }

    fn class_of(&self, line: usize, r: &RawRecord) -> Result<ClassId> {
        let label = r.class.as_deref().ok_or_else(|| self.missing(line, r, "class"))?;
        self.classes.id(label).ok_or_else(|| IngestError::UnknownClass {
            path: self.path.clone(),
            line,
            record: r.locus(),
            label: label.into(),
        })
    }
}

/// A ground-truth file. Every record needs both boxes.
pub fn read_ground_truth(path: &Path) -> Result<Loaded<GroundTruthSet>> {
    let recs = read_records(path)?;
    let mut objects = Vec::with_capacity(recs.rows.len());
    for (line, r) in &recs.rows {
        let line = *line;
        let image_id = r.image_id.clone().ok_or_else(|| recs.missing(line, r, "image_id"))?;
        let object_id = r.object_id.clone().ok_or_else(|| recs.missing(line, r, "object_id"))?;
        let class = recs.class_of(line, r)?;
        let box_pix = r.box_pix.ok_or_else(|| recs.missing(line, r, "box_pix"))?;
        let box_amodal = r.box_amodal.ok_or_else(|| recs.missing(line, r, "box_amodal"))?;
        objects.push(GroundTruthObject { box_pix, box_amodal, class, image_id, object_id });
    }
    let data = GroundTruthSet { classes: recs.classes, images: recs.header.images.clone(), objects };
    let violations = data.validate();
    Ok(Loaded { data, header: recs.header, violations, record_lines: recs.rows.iter().map(|r| r.0).collect() })
}

/// A detection file. Every record needs a score and at least one box.
pub fn read_detections(path: &Path) -> Result<Loaded<DetectionSet>> {
    let recs = read_records(path)?;
    let mut records = Vec::with_capacity(recs.rows.len());
    for (line, r) in &recs.rows {
        let line = *line;
        let image_id = r.image_id.clone().ok_or_else(|| recs.missing(line, r, "image_id"))?;
        let class = recs.class_of(line, r)?;
        let score = r.score.ok_or_else(|| recs.missing(line, r, "score"))?;
        if r.box_pix.is_none() && r.box_amodal.is_none() {
            return Err(recs.missing(line, r, "box_pix|box_amodal"));
        }
        records.push(DetectionRecord {
            image_id,
            object_id: r.object_id.clone(),
            class,
            score,
            box_pix: r.box_pix,
            box_amodal: r.box_amodal,
        });
    }
    let data = DetectionSet { classes: recs.classes, images: recs.header.images.clone(), records };
    let violations = data.validate();
    Ok(Loaded { data, header: recs.header, violations, record_lines: recs.rows.iter().map(|r| r.0).collect() })
}

#[derive(Debug, Clone, PartialEq)]
pub enum NativeCorpus {
    GroundTruth(Loaded<GroundTruthSet>),
    Detections(Loaded<DetectionSet>),
}

/// Reads either kind of native file; records carrying `score` make it a
/// detection file.
pub fn read_native(path: &Path) -> Result<NativeCorpus> {
    let is_detections = {
        let file = File::open(path).map_err(io_err(path))?;
        let mut found = false;
        for (i, l) in BufReader::new(file).lines().enumerate().skip(1) {
            let l = l.map_err(io_err(path))?;
            if l.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&l)
                .map_err(|source| IngestError::Json { path: path.into(), line: i + 1, source })?;
            found = v.get("score").is_some();
            break;
        }
        found
    };
    if is_detections {
        read_detections(path).map(NativeCorpus::Detections)
    } else {
        read_ground_truth(path).map(NativeCorpus::GroundTruth)
    }
}

#[derive(Serialize)]
struct GtOut<'a> {
    image_id: &'a str,
    object_id: &'a str,
    class: &'a str,
    box_pix: BoundingBox,
    box_amodal: BoundingBox,
}

#[derive(Serialize)]
struct DetOut<'a> {
    image_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    object_id: Option<&'a str>,
    class: &'a str,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    box_pix: Option<BoundingBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    box_amodal: Option<BoundingBox>,
}

fn label(classes: &ClassTable, id: ClassId) -> &str {
    classes.label(id).unwrap_or("<unknown>")
}

fn write_line<W: Write, T: Serialize>(w: &mut W, v: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    w.write_all(b"\n")
}

pub fn write_ground_truth_to<W: Write>(w: &mut W, set: &GroundTruthSet, extra: &Map<String, Value>) -> std::io::Result<()> {
    let mut header = Header::new(&set.classes, &set.images);
    header.extra = extra.clone();
    write_line(w, &header)?;
    for o in &set.objects {
        write_line(
            w,
            &GtOut {
                image_id: &o.image_id,
                object_id: &o.object_id,
                class: label(&set.classes, o.class),
                box_pix: o.box_pix,
                box_amodal: o.box_amodal,
            },
        )?;
    }
    w.flush()
}

pub fn write_detections_to<W: Write>(w: &mut W, set: &DetectionSet, extra: &Map<String, Value>) -> std::io::Result<()> {
    let mut header = Header::new(&set.classes, &set.images);
    header.extra = extra.clone();
    write_line(w, &header)?;
    for r in &set.records {
        write_line(
            w,
            &DetOut {
                image_id: &r.image_id,
                object_id: r.object_id.as_deref(),
                class: label(&set.classes, r.class),
                score: r.score,
                box_pix: r.box_pix,
                box_amodal: r.box_amodal,
            },
        )?;
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn write_ground_truth(path: &Path, set: &GroundTruthSet, extra: &Map<String, Value>) -> Result<()> {
    write_ground_truth_to(&mut create(path)?, set, extra).map_err(io_err(path))
}

pub fn write_detections(path: &Path, set: &DetectionSet, extra: &Map<String, Value>) -> Result<()> {
    write_detections_to(&mut create(path)?, set, extra).map_err(io_err(path))
}

/// One annotation carrying a single box kind, keyed by image and object.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialObject {
    pub image_id: String,
    pub object_id: String,
    pub class: ClassId,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialSet {
    pub classes: ClassTable,
    pub images: Vec<ImageInfo>,
    pub objects: Vec<PartialObject>,
}

/// A native ground-truth file that carries only `kind` boxes, e.g. pixel
/// boxes derived from instance masks.
pub fn read_partial(path: &Path, kind: BoxKind) -> Result<PartialSet> {
    let recs = read_records(path)?;
    let field = match kind {
        BoxKind::Pixel => "box_pix",
        BoxKind::Amodal => "box_amodal",
    };
    let mut objects = Vec::with_capacity(recs.rows.len());
    for (line, r) in &recs.rows {
        let line = *line;
        let bbox = match kind {
            BoxKind::Pixel => r.box_pix,
            BoxKind::Amodal => r.box_amodal,
        };
        objects.push(PartialObject {
            image_id: r.image_id.clone().ok_or_else(|| recs.missing(line, r, "image_id"))?,
            object_id: r.object_id.clone().ok_or_else(|| recs.missing(line, r, "object_id"))?,
            class: recs.class_of(line, r)?,
            bbox: bbox.ok_or_else(|| recs.missing(line, r, field))?,
        });
    }
    Ok(PartialSet { classes: recs.classes, images: recs.header.images.clone(), objects })
}

/// KITTI object type to class label. Types not listed are skipped and
/// counted.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiMapping(pub BTreeMap<String, String>);

impl Default for KittiMapping {
    fn default() -> Self {
        let pairs = [("Car", CAR_VAN), ("Van", CAR_VAN), ("Truck", TRUCK_BUS), ("Pedestrian", PEDESTRIAN)];
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }
}

impl KittiMapping {
    /// Canonical classes first, then any other target labels in name order.
    pub fn class_table(&self) -> ClassTable {
        let mut labels: Vec<String> = ClassTable::canonical().labels().to_vec();
        for v in self.0.values() {
            if !labels.contains(v) {
                labels.push(v.clone());
            }
        }
        ClassTable::from_labels(labels).expect("labels deduplicated above")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KittiLabels {
    pub set: PartialSet,
    pub frames: Vec<String>,
    pub skipped_dont_care: usize,
    pub skipped_unmapped: BTreeMap<String, usize>,
}

impl KittiLabels {
    pub fn skipped_total(&self) -> usize {
        self.skipped_dont_care + self.skipped_unmapped.values().sum::<usize>()
    }
}

struct KittiFrame {
    frame: String,
    objects: Vec<PartialObject>,
    dont_care: usize,
    unmapped: BTreeMap<String, usize>,
}

/// Parses one label file. The object id is the row index in the file, so
/// skipped rows never shift the ids of later objects.
fn parse_kitti_file(path: &Path, mapping: &KittiMapping, classes: &ClassTable) -> Result<KittiFrame> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let frame = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut out = KittiFrame { frame: frame.clone(), objects: Vec::new(), dont_care: 0, unmapped: BTreeMap::new() };
    let mut row = 0usize;
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            continue;
        }
        let err = |reason: String| IngestError::Kitti { path: path.into(), line: i + 1, reason };
        if cols.len() < 15 {
            return Err(err(format!("expected at least 15 columns, found {}", cols.len())));
        }
        let object_id = row.to_string();
        row += 1;
        let kind = cols[0];
        if kind == "DontCare" {
            out.dont_care += 1;
            continue;
        }
        let Some(label) = mapping.0.get(kind) else {
            *out.unmapped.entry(kind.to_string()).or_default() += 1;
            continue;
        };
        let mut c = [0.0; 4];
        for (k, v) in c.iter_mut().enumerate() {
            *v = cols[4 + k]
                .parse()
                .map_err(|_| err(format!("bbox column {} is not a number: `{}`", 5 + k, cols[4 + k])))?;
        }
        let bbox = BoundingBox::new(c[0], c[1], c[2], c[3]).map_err(|e| err(format!("invalid bbox: {e}")))?;
        out.objects.push(PartialObject {
            image_id: frame.clone(),
            object_id,
            class: classes.id(label).expect("mapping targets are in the class table"),
            bbox,
        });
    }
    Ok(out)
}

/// Reads every `*.txt` label file of a directory, in file-name order, as
/// amodal boxes.
pub fn read_kitti_labels(dir: &Path, mapping: &KittiMapping) -> Result<KittiLabels> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    let classes = mapping.class_table();
    let frames: Vec<KittiFrame> = files
        .par_iter()
        .map(|p| parse_kitti_file(p, mapping, &classes))
        .collect::<Result<_>>()?;
    let mut out = KittiLabels { set: PartialSet { classes, ..PartialSet::default() }, ..KittiLabels::default() };
    for f in frames {
        out.frames.push(f.frame);
        out.set.objects.extend(f.objects);
        out.skipped_dont_care += f.dont_care;
        for (k, n) in f.unmapped {
            *out.skipped_unmapped.entry(k).or_default() += n;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeOutcome {
    pub set: GroundTruthSet,
    /// `(image_id, object_id)` of amodal records without a pixel partner.
    pub unmatched_amodal: Vec<(String, String)>,
    pub unmatched_pixel: Vec<(String, String)>,
    /// Pairs joined by the IoU fallback rather than by object id.
    pub fallback_joins: usize,
    /// Joined pairs whose two sides disagree on the class label; the amodal
    /// label wins.
    pub class_conflicts: usize,
}

fn key_index<'a>(side: &'static str, objs: &'a [PartialObject]) -> Result<HashMap<(&'a str, &'a str), usize>> {
    let mut map = HashMap::with_capacity(objs.len());
    for (i, o) in objs.iter().enumerate() {
        if map.insert((o.image_id.as_str(), o.object_id.as_str()), i).is_some() {
            return Err(IngestError::DuplicateKey {
                side,
                image_id: o.image_id.clone(),
                object_id: o.object_id.clone(),
            });
        }
    }
    Ok(map)
}

/// Inner join of amodal and pixel annotations on `(image_id, object_id)`.
/// With `fallback_min_iou`, records left over are paired per image by
/// descending box IoU, if at least that value.
pub fn merge_pixel_amodal(
    amodal: &PartialSet,
    pixel: &PartialSet,
    fallback_min_iou: Option<f64>,
) -> Result<MergeOutcome> {
    key_index("amodal", &amodal.objects)?;
    let pixel_keys = key_index("pixel", &pixel.objects)?;
    let mut partner: Vec<Option<usize>> = vec![None; amodal.objects.len()];
    let mut used = vec![false; pixel.objects.len()];
    for (i, a) in amodal.objects.iter().enumerate() {
        if let Some(&j) = pixel_keys.get(&(a.image_id.as_str(), a.object_id.as_str())) {
            partner[i] = Some(j);
            used[j] = true;
        }
    }

    let mut fallback_joins = 0;
    if let Some(min_iou) = fallback_min_iou {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
        for (j, p) in pixel.objects.iter().enumerate().filter(|(j, _)| !used[*j]) {
            by_image.entry(p.image_id.as_str()).or_default().push(j);
        }
        for (i, a) in amodal.objects.iter().enumerate().filter(|(i, _)| partner[*i].is_none()) {
            for &j in by_image.get(a.image_id.as_str()).into_iter().flatten() {
                let ov = a.bbox.iou(&pixel.objects[j].bbox);
                if ov >= min_iou && ov > 0.0 {
                    pairs.push((ov, i, j));
                }
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, i, j) in pairs {
            if partner[i].is_none() && !used[j] {
                partner[i] = Some(j);
                used[j] = true;
                fallback_joins += 1;
            }
        }
    }

    let mut out = MergeOutcome {
        set: GroundTruthSet { classes: amodal.classes.clone(), images: amodal.images.clone(), objects: Vec::new() },
        fallback_joins,
        ..MergeOutcome::default()
    };
    if out.set.images.is_empty() {
        out.set.images = pixel.images.clone();
    }
    for (i, a) in amodal.objects.iter().enumerate() {
        match partner[i] {
            Some(j) => {
                let p = &pixel.objects[j];
                if amodal.classes.label(a.class) != pixel.classes.label(p.class) {
                    out.class_conflicts += 1;
                }
                out.set.objects.push(GroundTruthObject {
                    box_pix: p.bbox,
                    box_amodal: a.bbox,
                    class: a.class,
                    image_id: a.image_id.clone(),
                    object_id: a.object_id.clone(),
                });
            }
            None => out.unmatched_amodal.push((a.image_id.clone(), a.object_id.clone())),
        }
    }
    let seen: HashSet<usize> = partner.iter().flatten().copied().collect();
    out.unmatched_pixel = pixel
        .objects
        .iter()
        .enumerate()
        .filter(|(j, _)| !seen.contains(j))
        .map(|(_, p)| (p.image_id.clone(), p.object_id.clone()))
        .collect();
    Ok(out)
}
