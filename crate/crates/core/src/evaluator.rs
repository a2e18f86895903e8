//! Challenge scoring: score thresholding, class-wise NMS, one-to-one greedy
//! matching at IoU >= 0.5 with label agreement, and precision/recall/F1.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Annotation, Country, DamageClass, Dataset, Warning, WarningCode};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub image_id: String,
    pub cls: DamageClass,
    pub bbox: BoundingBox,
    /// Confidence in the open interval (0, 1).
    pub score: f64,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        cls: DamageClass,
        bbox: BoundingBox,
        score: f64,
    ) -> Result<Self> {
        if !(score > 0.0 && score < 1.0) {
            return Err(Error::Data(format!(
                "detection score {score} outside the exclusive range (0, 1)"
            )));
        }
        Ok(Self {
            image_id: image_id.into(),
            cls,
            bbox,
            score,
        })
    }
}

/// Score descending, then smaller xmin, then smaller ymin.
fn rank_cmp(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.xmin().cmp(&b.bbox.xmin()))
        .then(a.bbox.ymin().cmp(&b.bbox.ymin()))
}

/// [`rank_cmp`] extended to a total order over distinct detections.
pub(crate) fn canonical_cmp(a: &Detection, b: &Detection) -> Ordering {
    rank_cmp(a, b)
        .then(a.bbox.xmax().cmp(&b.bbox.xmax()))
        .then(a.bbox.ymax().cmp(&b.bbox.ymax()))
        .then(a.cls.cmp(&b.cls))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub model: Option<String>,
    pub note: Option<String>,
}

/// Detections grouped by image id.
///
/// Equality ignores the order of detections within an image.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    by_image: BTreeMap<String, Vec<Detection>>,
    pub provenance: Provenance,
}

impl PartialEq for PredictionSet {
    fn eq(&self, other: &Self) -> bool {
        self.provenance == other.provenance
            && self.by_image.len() == other.by_image.len()
            && self.by_image.iter().zip(&other.by_image).all(|((ia, da), (ib, db))| {
                ia == ib && da.len() == db.len() && {
                    let mut a: Vec<&Detection> = da.iter().collect();
                    let mut b: Vec<&Detection> = db.iter().collect();
                    a.sort_by(|x, y| canonical_cmp(x, y));
                    b.sort_by(|x, y| canonical_cmp(x, y));
                    a == b
                }
            })
    }
}

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_detections(dets: impl IntoIterator<Item = Detection>) -> Self {
        let mut set = Self::new();
        for d in dets {
            set.push(d);
        }
        set
    }

    pub fn push(&mut self, det: Detection) {
        self.by_image.entry(det.image_id.clone()).or_default().push(det);
    }

    /// Makes an image known to the set even when it has no detections.
    pub fn register_image(&mut self, image_id: impl Into<String>) {
        self.by_image.entry(image_id.into()).or_default();
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.by_image.keys().map(String::as_str)
    }

    pub fn detections_for(&self, image_id: &str) -> &[Detection] {
        self.by_image.get(image_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection> + '_ {
        self.by_image.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_image.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Groups in image-id order.
    pub fn groups(&self) -> impl Iterator<Item = (&str, &[Detection])> + '_ {
        self.by_image.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Class-wise greedy NMS over one image's detections.
///
/// Detections are visited by descending score (ties: xmin, ymin, xmax, ymax,
/// class); one is kept iff its IoU with every kept detection of the same
/// class is below `iou_thresh`. The survivors come back in that visiting
/// order, which makes the result independent of the input order.
pub fn nms_per_class(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| canonical_cmp(a, b));
    let mut kept: Vec<Detection> = Vec::with_capacity(order.len());
    for d in order {
        let suppressed = kept
            .iter()
            .any(|k| k.cls == d.cls && k.bbox.iou(&d.bbox) >= iou_thresh);
        if !suppressed {
            kept.push(d.clone());
        }
    }
    kept
}

/// One-to-one greedy matching for a single image.
///
/// Predictions are taken by descending score (ties: smaller xmin, smaller
/// ymin, input order). Each takes the unmatched ground truth of the same
/// class with the highest IoU (lowest index on ties) provided that IoU is at
/// least `iou_thresh`. Returns `(pred_index, gt_index)` pairs in visiting
/// order.
pub fn match_detections(
    preds: &[Detection],
    gts: &[Annotation],
    iou_thresh: f64,
) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| rank_cmp(&preds[a], &preds[b]));
    let mut gt_taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for pi in order {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if gt_taken[gi] || g.cls != p.cls {
                continue;
            }
            let iou = p.bbox.iou(&g.bbox);
            if iou >= iou_thresh && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            gt_taken[gi] = true;
            pairs.push((pi, gi));
        }
    }
    pairs
}

/// Correct / predicted / ground-truth damage counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub cd: u64,
    pub pd: u64,
    pub ad: u64,
}

impl Counts {
    pub fn add(self, o: Counts) -> Counts {
        Counts {
            cd: self.cd + o.cd,
            pd: self.pd + o.pd,
            ad: self.ad + o.ad,
        }
    }

    /// `Cd/Pd`, 0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.cd, self.pd)
    }

    /// `Cd/Ad`, 0 when there is no ground truth.
    pub fn recall(&self) -> f64 {
        ratio(self.cd, self.ad)
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    ///
    /// Evaluated as `2·Cd/(Pd+Ad)`, which equals `2pr/(p+r)` whenever the
    /// latter is defined and avoids compounding rounding.
    pub fn f1(&self) -> f64 {
        if self.cd == 0 {
            0.0
        } else {
            ratio(2 * self.cd, self.pd + self.ad)
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            cd: self.cd,
            pd: self.pd,
            ad: self.ad,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub cd: u64,
    pub pd: u64,
    pub ad: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub score_threshold: f64,
    pub iou_threshold: f64,
    pub apply_nms: bool,
    pub nms_iou_threshold: f64,
    /// Reject predictions for images missing from the ground truth.
    pub strict: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            score_threshold: 0.5,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            apply_nms: true,
            nms_iou_threshold: DEFAULT_IOU_THRESHOLD,
            strict: true,
        }
    }
}

impl EvalConfig {
    pub fn with_threshold(self, score_threshold: f64) -> Self {
        Self {
            score_threshold,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("score threshold", self.score_threshold),
            ("IoU threshold", self.iou_threshold),
            ("NMS IoU threshold", self.nms_iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub iou_threshold: f64,
    pub apply_nms: bool,
    #[serde(flatten)]
    pub overall: Metrics,
    pub per_class: BTreeMap<DamageClass, Metrics>,
    pub per_country: BTreeMap<Country, Metrics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

pub const TSV_HEADER: &str = "threshold\tCd\tPd\tAd\tp\tr\tF1";

impl EvalReport {
    pub fn cd(&self) -> u64 {
        self.overall.cd
    }

    pub fn pd(&self) -> u64 {
        self.overall.pd
    }

    pub fn ad(&self) -> u64 {
        self.overall.ad
    }

    pub fn precision(&self) -> f64 {
        self.overall.precision
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1
    }

    /// `threshold  Cd  Pd  Ad  p  r  F1`, tab separated, no trailing newline.
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            self.threshold,
            self.overall.cd,
            self.overall.pd,
            self.overall.ad,
            self.overall.precision,
            self.overall.recall,
            self.overall.f1
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Per-image partial counts, broken down by class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImageCounts {
    pub per_class: [Counts; 4],
}

impl ImageCounts {
    pub fn total(&self) -> Counts {
        self.per_class.iter().fold(Counts::default(), |acc, c| acc.add(*c))
    }
}

/// Scores one image: threshold, optional NMS, then matching.
pub fn score_image(dets: &[Detection], gts: &[Annotation], config: &EvalConfig) -> ImageCounts {
    let surviving: Vec<Detection> = dets
        .iter()
        .filter(|d| d.score >= config.score_threshold)
        .cloned()
        .collect();
    let surviving = if config.apply_nms {
        nms_per_class(&surviving, config.nms_iou_threshold)
    } else {
        surviving
    };
    let mut counts = ImageCounts::default();
    for d in &surviving {
        counts.per_class[d.cls.index()].pd += 1;
    }
    for g in gts {
        counts.per_class[g.cls.index()].ad += 1;
    }
    for (pi, _) in match_detections(&surviving, gts, config.iou_threshold) {
        counts.per_class[surviving[pi].cls.index()].cd += 1;
    }
    counts
}

/// Scores a prediction set against the ground-truth dataset.
pub fn evaluate(preds: &PredictionSet, gt: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    let mut warnings = Vec::new();
    for id in preds.image_ids() {
        if !gt.contains(id) {
            if config.strict {
                return Err(Error::UnknownImage(id.to_string()));
            }
            warnings.push(Warning::new(
                id,
                WarningCode::UnknownImage,
                format!(
                    "{} prediction(s) for an image outside the ground truth ignored",
                    preds.detections_for(id).len()
                ),
            ));
        }
    }

    let partials: Vec<(Country, ImageCounts)> = gt
        .records()
        .par_iter()
        .map(|r| {
            (
                r.country,
                score_image(preds.detections_for(&r.image_id), &r.annotations, config),
            )
        })
        .collect();

    let mut per_class = [Counts::default(); 4];
    let mut per_country = [Counts::default(); 3];
    for (country, counts) in &partials {
        for (acc, c) in per_class.iter_mut().zip(counts.per_class) {
            *acc = acc.add(c);
        }
        per_country[country.index()] = per_country[country.index()].add(counts.total());
    }
    let overall = per_class.iter().fold(Counts::default(), |a, c| a.add(*c));

    Ok(EvalReport {
        threshold: config.score_threshold,
        iou_threshold: config.iou_threshold,
        apply_nms: config.apply_nms,
        overall: overall.metrics(),
        per_class: DamageClass::ALL
            .iter()
            .map(|&c| (c, per_class[c.index()].metrics()))
            .collect(),
        per_country: Country::ALL
            .iter()
            .map(|&c| (c, per_country[c.index()].metrics()))
            .collect(),
        warnings,
    })
}

/// `0.01, 0.02, …, 0.99`.
pub fn default_grid() -> Vec<f64> {
    (1..=99).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub best_threshold: f64,
    pub points: Vec<EvalReport>,
}

impl Sweep {
    pub fn best(&self) -> &EvalReport {
        self.points
            .iter()
            .find(|p| p.threshold == self.best_threshold)
            .expect("best threshold is a grid point")
    }
}

/// Evaluates every grid threshold; the best is the F1 argmax, ties going to
/// the larger threshold.
pub fn sweep_thresholds(
    preds: &PredictionSet,
    gt: &Dataset,
    grid: &[f64],
    base: &EvalConfig,
) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let points = grid
        .iter()
        .map(|&t| evaluate(preds, gt, &base.with_threshold(t)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &points[0];
    for p in &points[1..] {
        if p.f1() > best.f1() || (p.f1() == best.f1() && p.threshold > best.threshold) {
            best = p;
        }
    }
    Ok(Sweep {
        best_threshold: best.threshold,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ImageRecord;

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(cls: DamageClass, b: BoundingBox, score: f64) -> Detection {
        Detection::new("Japan_000001", cls, b, score).unwrap()
    }

    fn gt(cls: DamageClass, b: BoundingBox) -> Annotation {
        Annotation::new(cls, b)
    }

    #[test]
    fn detection_score_is_exclusive() {
        assert!(Detection::new("Japan_000001", DamageClass::D00, bb(0, 0, 1, 1), 1.0).is_err());
        assert!(Detection::new("Japan_000001", DamageClass::D00, bb(0, 0, 1, 1), 0.0).is_err());
        assert!(Detection::new("Japan_000001", DamageClass::D00, bb(0, 0, 1, 1), f64::NAN).is_err());
    }

    #[test]
    fn nms_drops_lower_scored_overlap() {
        let keep = det(DamageClass::D20, bb(0, 0, 100, 100), 0.99);
        let drop = det(DamageClass::D20, bb(5, 5, 100, 100), 0.60);
        assert!(keep.bbox.iou(&drop.bbox) >= 0.5);
        assert_eq!(nms_per_class(&[drop, keep.clone()], 0.5), vec![keep]);
    }

    #[test]
    fn nms_is_class_wise() {
        let a = det(DamageClass::D00, bb(0, 0, 50, 50), 0.9);
        let b = det(DamageClass::D10, bb(0, 0, 50, 50), 0.8);
        assert_eq!(nms_per_class(&[a.clone(), b.clone()], 0.5).len(), 2);
        assert_eq!(nms_per_class(&[a.clone()], 0.5), vec![a]);
    }

    #[test]
    fn match_above_threshold() {
        // IoU = 60/100
        let p = det(DamageClass::D00, bb(0, 0, 10, 6), 0.9);
        let pairs = match_detections(&[p], &[gt(DamageClass::D00, bb(0, 0, 10, 10))], 0.5);
        assert_eq!(pairs, vec![(0, 0)]);
    }

    #[test]
    fn match_boundary() {
        let g = [gt(DamageClass::D00, bb(0, 0, 100, 1))];
        // IoU 49/100
        let below = det(DamageClass::D00, bb(0, 0, 49, 1), 0.9);
        assert!(match_detections(&[below], &g, 0.5).is_empty());
        // IoU 50/100 exactly
        let at = det(DamageClass::D00, bb(0, 0, 50, 1), 0.9);
        assert_eq!(match_detections(&[at], &g, 0.5), vec![(0, 0)]);
    }

    #[test]
    fn higher_score_claims_shared_ground_truth() {
        let g = [gt(DamageClass::D10, bb(0, 0, 10, 10))];
        let low = det(DamageClass::D10, bb(0, 0, 10, 10), 0.8);
        let high = det(DamageClass::D10, bb(0, 0, 10, 9), 0.9);
        assert_eq!(match_detections(&[low, high], &g, 0.5), vec![(1, 0)]);
    }

    #[test]
    fn wrong_label_never_matches() {
        let g = [gt(DamageClass::D10, bb(0, 0, 10, 10))];
        let p = det(DamageClass::D20, bb(0, 0, 10, 10), 0.9);
        assert!(match_detections(&[p], &g, 0.5).is_empty());
    }

    #[test]
    fn prefers_highest_iou_ground_truth() {
        let g = [gt(DamageClass::D00, bb(0, 0, 10, 14)), gt(DamageClass::D00, bb(0, 0, 10, 11))];
        let p = det(DamageClass::D00, bb(0, 0, 10, 10), 0.7);
        assert_eq!(match_detections(&[p], &g, 0.5), vec![(0, 1)]);
    }

    #[test]
    fn score_ties_break_on_xmin() {
        let g = [gt(DamageClass::D00, bb(10, 0, 20, 10))];
        let right = det(DamageClass::D00, bb(11, 0, 20, 10), 0.5);
        let left = det(DamageClass::D00, bb(10, 0, 19, 10), 0.5);
        assert_eq!(match_detections(&[right, left], &g, 0.5), vec![(1, 0)]);
    }

    fn one_image_dataset(anns: Vec<Annotation>) -> Dataset {
        Dataset::from_records(vec![ImageRecord::new("Japan_000001", 600, 600, anns).unwrap()]).unwrap()
    }

    #[test]
    fn counts_zero_conventions() {
        let c = Counts::default();
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
        let c = Counts { cd: 0, pd: 3, ad: 0 };
        assert_eq!((c.precision(), c.recall(), c.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_fixture_half_and_third() {
        let ds = one_image_dataset(vec![
            gt(DamageClass::D00, bb(0, 0, 10, 10)),
            gt(DamageClass::D10, bb(100, 100, 150, 150)),
            gt(DamageClass::D20, bb(300, 300, 400, 400)),
        ]);
        let preds = PredictionSet::from_detections([
            det(DamageClass::D00, bb(0, 0, 10, 10), 0.9),
            det(DamageClass::D40, bb(500, 500, 520, 520), 0.8),
        ]);
        let r = evaluate(&preds, &ds, &EvalConfig::default()).unwrap();
        assert_eq!((r.cd(), r.pd(), r.ad()), (1, 2, 3));
        assert_eq!(r.precision(), 0.5);
        assert_eq!(r.recall(), 1.0 / 3.0);
        assert_eq!(r.f1(), 0.4);
        let p = r.precision();
        let rc = r.recall();
        assert!((2.0 * p * rc / (p + rc) - 0.4).abs() < 1e-15);
        assert_eq!(r.per_class[&DamageClass::D40].pd, 1);
        assert_eq!(r.per_country[&Country::Japan].cd, 1);
        assert_eq!(r.per_country[&Country::Czech].ad, 0);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let anns = vec![gt(DamageClass::D00, bb(0, 0, 10, 10)), gt(DamageClass::D40, bb(50, 50, 90, 90))];
        let ds = one_image_dataset(anns.clone());
        let preds = PredictionSet::from_detections(anns.iter().map(|a| det(a.cls, a.bbox, 0.9)));
        let r = evaluate(&preds, &ds, &EvalConfig::default().with_threshold(0.5)).unwrap();
        assert_eq!((r.precision(), r.recall(), r.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_predictions_score_zero() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let r = evaluate(&PredictionSet::new(), &ds, &EvalConfig::default()).unwrap();
        assert_eq!((r.cd(), r.pd(), r.ad()), (0, 0, 1));
        assert_eq!((r.precision(), r.recall(), r.f1()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_image_strict_vs_lenient() {
        let ds = one_image_dataset(vec![]);
        let preds = PredictionSet::from_detections([
            Detection::new("India_000009", DamageClass::D00, bb(0, 0, 5, 5), 0.7).unwrap(),
        ]);
        assert!(matches!(
            evaluate(&preds, &ds, &EvalConfig::default()),
            Err(Error::UnknownImage(_))
        ));
        let lenient = EvalConfig {
            strict: false,
            ..Default::default()
        };
        let r = evaluate(&preds, &ds, &lenient).unwrap();
        assert_eq!(r.pd(), 0);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn threshold_drops_low_scores() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let preds = PredictionSet::from_detections([det(DamageClass::D00, bb(0, 0, 10, 10), 0.4)]);
        let r = evaluate(&preds, &ds, &EvalConfig::default().with_threshold(0.5)).unwrap();
        assert_eq!(r.pd(), 0);
        let r = evaluate(&preds, &ds, &EvalConfig::default().with_threshold(0.4)).unwrap();
        assert_eq!(r.cd(), 1);
    }

    #[test]
    fn nms_toggle_changes_pd() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let preds = PredictionSet::from_detections([
            det(DamageClass::D00, bb(0, 0, 10, 10), 0.9),
            det(DamageClass::D00, bb(0, 0, 10, 9), 0.8),
        ]);
        let on = evaluate(&preds, &ds, &EvalConfig::default()).unwrap();
        let off = evaluate(&preds, &ds, &EvalConfig { apply_nms: false, ..Default::default() }).unwrap();
        assert_eq!((on.cd(), on.pd()), (1, 1));
        assert_eq!((off.cd(), off.pd()), (1, 2));
    }

    #[test]
    fn tsv_line_format() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let preds = PredictionSet::from_detections([det(DamageClass::D00, bb(0, 0, 10, 10), 0.9)]);
        let r = evaluate(&preds, &ds, &EvalConfig::default()).unwrap();
        assert_eq!(r.tsv_line(), "0.5\t1\t1\t1\t1.000000\t1.000000\t1.000000");
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["cd"], 1);
        assert_eq!(json["per_class"]["D00"]["f1"], 1.0);
    }

    #[test]
    fn sweep_all_correct_picks_largest_admissible() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let preds = PredictionSet::from_detections([det(DamageClass::D00, bb(0, 0, 10, 10), 0.9)]);
        let s = sweep_thresholds(&preds, &ds, &default_grid(), &EvalConfig::default()).unwrap();
        assert_eq!(s.best_threshold, 0.9);
        assert_eq!(s.best().f1(), 1.0);
        assert!(s.points.iter().filter(|p| p.threshold <= 0.9).all(|p| p.f1() == 1.0));
    }

    #[test]
    fn sweep_separates_correct_from_wrong() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let preds = PredictionSet::from_detections([
            det(DamageClass::D00, bb(0, 0, 10, 10), 0.9),
            det(DamageClass::D10, bb(200, 200, 220, 220), 0.3),
        ]);
        let s = sweep_thresholds(&preds, &ds, &default_grid(), &EvalConfig::default()).unwrap();
        // below 0.3: F1 = 2/3; in (0.3, 0.9]: F1 = 1
        assert!(s.best_threshold > 0.3 && s.best_threshold <= 0.9);
        assert_eq!(s.best().f1(), 1.0);
    }

    #[test]
    fn sweep_of_empty_predictions_takes_last_point() {
        let ds = one_image_dataset(vec![gt(DamageClass::D00, bb(0, 0, 10, 10))]);
        let s = sweep_thresholds(&PredictionSet::new(), &ds, &default_grid(), &EvalConfig::default()).unwrap();
        assert_eq!(s.best_threshold, 0.99);
        assert!(s.points.iter().all(|p| p.f1() == 0.0));
        assert!(sweep_thresholds(&PredictionSet::new(), &ds, &[], &EvalConfig::default()).is_err());
    }
}
