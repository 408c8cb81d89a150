//! Visibility-guided non-maximum suppression for joint pixel-based and
//! amodal object detections, with standard and Soft NMS baselines, a
//! detection evaluation harness, overlap-based recall bounds, a synthetic
//! occluded-scene generator and a runtime benchmark.

pub mod analysis;
pub mod bench;
pub mod evaluation;
pub mod geometry;
pub mod ingestion;
pub mod model;
pub mod suppression;
pub mod synthgen;

pub use geometry::BoundingBox;
pub use model::{
    BoxKind, ClassId, ClassTable, Detection, DetectionSet, GroundTruthObject, GroundTruthSet, JointDetection,
};
pub use suppression::{soft_nms, standard_nms, vg_nms, vg_soft_nms, NmsConfig, SoftMode, SoftNmsConfig};
