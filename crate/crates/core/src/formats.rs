//! Prediction files, challenge submission files and pseudo-label merging.
//!
//! Prediction file, one detection per line:
//!
//! ```text
//! # model: yolov5x-tta
//! Czech_000001 D20 0.87 10 20 110 220
//! Czech_000002
//! ```
//!
//! A line holding only an image id marks an image with no detections.
//! Lines are sorted by image id, then descending score. Scores are written
//! in shortest round-trip form so parsing and re-writing is lossless.

use std::path::Path;

use crate::dataset::{Annotation, DamageClass, Dataset, ImageRecord, Warning, WarningCode};
use crate::error::{Error, Result};
use crate::evaluator::{canonical_cmp, nms_per_class, Detection, PredictionSet};
use crate::geometry::BoundingBox;

pub fn format_predictions(preds: &PredictionSet) -> String {
    let mut out = String::new();
    if let Some(model) = &preds.provenance.model {
        out.push_str(&format!("# model: {}\n", single_line(model)));
    }
    if let Some(note) = &preds.provenance.note {
        out.push_str(&format!("# note: {}\n", single_line(note)));
    }
    for (image_id, dets) in preds.groups() {
        if dets.is_empty() {
            out.push_str(image_id);
            out.push('\n');
            continue;
        }
        let mut sorted: Vec<&Detection> = dets.iter().collect();
        sorted.sort_by(|a, b| canonical_cmp(a, b));
        for d in sorted {
            let b = d.bbox;
            out.push_str(&format!(
                "{} {} {} {} {} {} {}\n",
                image_id,
                d.cls,
                d.score,
                b.xmin(),
                b.ymin(),
                b.xmax(),
                b.ymax()
            ));
        }
    }
    out
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses a prediction file; `origin` names the source in error messages.
pub fn parse_predictions(text: &str, origin: &str) -> Result<PredictionSet> {
    let mut set = PredictionSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let line = raw.trim_end_matches('\r');
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(model) = comment.strip_prefix("model:") {
                set.provenance.model = Some(model.trim().to_string());
            } else if let Some(note) = comment.strip_prefix("note:") {
                set.provenance.note = Some(note.trim().to_string());
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.len() {
            0 => {}
            1 => set.register_image(fields[0]),
            7 => {
                let cls: DamageClass = fields[1].parse().map_err(|e: Error| err(e.to_string()))?;
                let score: f64 = fields[2]
                    .parse()
                    .map_err(|_| err(format!("bad score '{}'", fields[2])))?;
                if !(score > 0.0 && score < 1.0) {
                    return Err(err(format!(
                        "score {score} outside the exclusive range (0, 1)"
                    )));
                }
                let mut coords = [0u32; 4];
                for (c, f) in coords.iter_mut().zip(&fields[3..]) {
                    *c = f
                        .parse()
                        .map_err(|_| err(format!("bad coordinate '{f}'")))?;
                }
                let bbox = BoundingBox::new(coords[0], coords[1], coords[2], coords[3])
                    .map_err(|e| err(e.to_string()))?;
                set.push(Detection::new(fields[0], cls, bbox, score).map_err(|e| err(e.to_string()))?);
            }
            n => return Err(err(format!("expected 1 or 7 fields, found {n}"))),
        }
    }
    Ok(set)
}

pub fn write_predictions(preds: &PredictionSet, path: &Path) -> Result<()> {
    std::fs::write(path, format_predictions(preds)).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<PredictionSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmissionConfig {
    pub score_threshold: f64,
    pub max_dets_per_image: usize,
    pub nms_iou_threshold: f64,
    /// Integer label written for D00, D10, D20, D40.
    pub class_ids: [u8; 4],
}

impl Default for SubmissionConfig {
    fn default() -> Self {
        Self {
            score_threshold: 0.5,
            max_dets_per_image: 5,
            nms_iou_threshold: 0.5,
            class_ids: [1, 2, 3, 4],
        }
    }
}

impl SubmissionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config(format!(
                "score threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        let mut ids = self.class_ids;
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("class ids must be distinct".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmissionEntry {
    pub image_id: String,
    /// `(class id, box)` in emission order.
    pub boxes: Vec<(u8, BoundingBox)>,
}

/// A submission file: `#` header lines plus one entry per image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub header: Vec<String>,
    pub entries: Vec<SubmissionEntry>,
}

impl Submission {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for h in &self.header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        for e in &self.entries {
            out.push_str(&e.image_id);
            out.push(',');
            let parts: Vec<String> = e
                .boxes
                .iter()
                .map(|(c, b)| format!("{c} {} {} {} {}", b.xmin(), b.ymin(), b.xmax(), b.ymax()))
                .collect();
            out.push_str(&parts.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut header = Vec::new();
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            if let Some(h) = line.strip_prefix('#') {
                header.push(h.strip_prefix(' ').unwrap_or(h).to_string());
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (image_id, rest) = line
                .split_once(',')
                .ok_or_else(|| err("missing ',' after image id".into()))?;
            let nums: Vec<u32> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err(format!("bad integer '{t}'"))))
                .collect::<Result<_>>()?;
            if nums.len() % 5 != 0 {
                return Err(err(format!("{} values is not a multiple of 5", nums.len())));
            }
            let boxes = nums
                .chunks(5)
                .map(|c| {
                    let cls = u8::try_from(c[0]).map_err(|_| err(format!("bad class id {}", c[0])))?;
                    let b = BoundingBox::new(c[1], c[2], c[3], c[4]).map_err(|e| err(e.to_string()))?;
                    Ok((cls, b))
                })
                .collect::<Result<_>>()?;
            entries.push(SubmissionEntry {
                image_id: image_id.to_string(),
                boxes,
            });
        }
        Ok(Self { header, entries })
    }
}

/// Threshold, per-class NMS, then the top `max_dets_per_image` by score.
///
/// Every image known to `preds` gets a line, as does every id in `extra_images`.
pub fn build_submission(
    preds: &PredictionSet,
    extra_images: &[String],
    config: &SubmissionConfig,
) -> Result<Submission> {
    config.validate()?;
    let mut ids: Vec<&str> = preds
        .image_ids()
        .chain(extra_images.iter().map(String::as_str))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    let entries = ids
        .into_iter()
        .map(|id| {
            let kept: Vec<Detection> = preds
                .detections_for(id)
                .iter()
                .filter(|d| d.score >= config.score_threshold)
                .cloned()
                .collect();
            let mut kept = nms_per_class(&kept, config.nms_iou_threshold);
            kept.truncate(config.max_dets_per_image);
            SubmissionEntry {
                image_id: id.to_string(),
                boxes: kept
                    .iter()
                    .map(|d| (config.class_ids[d.cls.index()], d.bbox))
                    .collect(),
            }
        })
        .collect();
    let map = DamageClass::ALL
        .iter()
        .map(|c| format!("{c}={}", config.class_ids[c.index()]))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Submission {
        header: vec![format!(
            "classes {map}; max {} detections per image; score threshold {}",
            config.max_dets_per_image, config.score_threshold
        )],
        entries,
    })
}

pub fn write_submission(
    preds: &PredictionSet,
    extra_images: &[String],
    config: &SubmissionConfig,
    path: &Path,
) -> Result<()> {
    let text = build_submission(preds, extra_images, config)?.render();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// IoU at or above which a pseudo-label duplicates an existing box.
pub const PSEUDO_DEDUP_IOU: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub dataset: Dataset,
    pub added: usize,
    pub warnings: Vec<Warning>,
}

/// Appends confident detections to their images as pseudo-labels.
///
/// Per image, detections with `score >= confidence` are visited by
/// descending score, clamped to the image, and dropped when they overlap an
/// existing or already-added box of the same class at IoU >= 0.5.
/// Detections for images absent from `ds` are an error when `strict`,
/// otherwise skipped with a warning.
pub fn merge_pseudo_labels(
    ds: &Dataset,
    preds: &PredictionSet,
    confidence: f64,
    strict: bool,
) -> Result<MergeOutcome> {
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::Config(format!("confidence {confidence} outside [0, 1]")));
    }
    let mut warnings = Vec::new();
    for (id, dets) in preds.groups() {
        if !ds.contains(id) && !dets.is_empty() {
            if strict {
                return Err(Error::UnknownImage(id.to_string()));
            }
            warnings.push(Warning::new(
                id,
                WarningCode::UnknownImage,
                format!("{} pseudo-label candidates ignored", dets.len()),
            ));
        }
    }
    let mut added = 0;
    let records: Vec<ImageRecord> = ds
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let mut dets: Vec<&Detection> = preds
                .detections_for(&r.image_id)
                .iter()
                .filter(|d| d.score >= confidence)
                .collect();
            dets.sort_by(|a, b| canonical_cmp(a, b));
            for d in dets {
                let Some(bbox) = d.bbox.clamped(r.width, r.height) else {
                    continue;
                };
                let duplicate = r
                    .annotations
                    .iter()
                    .any(|a| a.cls == d.cls && a.bbox.iou(&bbox) >= PSEUDO_DEDUP_IOU);
                if !duplicate {
                    r.annotations.push(Annotation::pseudo(d.cls, bbox));
                    added += 1;
                }
            }
            r
        })
        .collect();
    Ok(MergeOutcome {
        dataset: ds.replace_records(records)?,
        added,
        warnings,
    })
}
