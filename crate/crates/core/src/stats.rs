//! Data exploration: class distributions, box area and aspect-ratio
//! histograms, channel pixel means and anchor recommendations.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Country, DamageClass, Dataset, ImageRecord, ImageSource};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Label counts per (country, class).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassDistribution {
    counts: [[u64; 4]; 3],
}

impl ClassDistribution {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a ImageRecord>) -> Self {
        let mut counts = [[0u64; 4]; 3];
        for r in records {
            for a in &r.annotations {
                counts[r.country.index()][a.cls.index()] += 1;
            }
        }
        Self { counts }
    }

    pub fn get(&self, country: Country, cls: DamageClass) -> u64 {
        self.counts[country.index()][cls.index()]
    }

    pub fn country_total(&self, country: Country) -> u64 {
        self.counts[country.index()].iter().sum()
    }

    pub fn class_total(&self, cls: DamageClass) -> u64 {
        self.counts.iter().map(|row| row[cls.index()]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn matrix(&self) -> &[[u64; 4]; 3] {
        &self.counts
    }
}

pub fn class_distribution(ds: &Dataset) -> ClassDistribution {
    ClassDistribution::from_records(ds.records())
}

/// Equal-width histogram. Bins are left-closed and right-open except the
/// last, which also holds the maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bins `samples` into `n_bins` equal-width bins over `[min, max]`.
    ///
    /// When every sample is equal the edges become `v, v+1, …, v+n_bins`, so
    /// the first bin holds everything.
    pub fn from_samples(samples: &[f64], n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if samples.is_empty() {
            return Err(Error::Data("histogram of an empty sample".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Data("histogram sample is not finite".into()));
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, width) = if max > min {
            (min, (max - min) / n_bins as f64)
        } else {
            (min, 1.0)
        };
        let mut bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
        if max > min {
            bin_edges[n_bins] = max;
        }
        let mut counts = vec![0u64; n_bins];
        for &s in samples {
            counts[bin_index(&bin_edges, s)] += 1;
        }
        Ok(Self { bin_edges, counts })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the most populated bin (first one on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    /// `bin_lo,bin_hi,count` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.bin_edges[i], self.bin_edges[i + 1], c));
        }
        out
    }
}

fn bin_index(edges: &[f64], x: f64) -> usize {
    let n = edges.len() - 1;
    // partition_point over the interior edges gives the number of edges <= x
    let k = edges[1..n].partition_point(|&e| e <= x);
    k.min(n - 1)
}

/// Whether box sizes are histogrammed as raw areas or as side lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AreaScale {
    #[default]
    Area,
    SqrtArea,
}

pub fn box_area_histogram(ds: &Dataset, n_bins: usize, scale: AreaScale) -> Result<Histogram> {
    let samples: Vec<f64> = ds
        .annotations()
        .map(|(_, a)| {
            let area = a.bbox.area() as f64;
            match scale {
                AreaScale::Area => area,
                AreaScale::SqrtArea => area.sqrt(),
            }
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::Data("dataset has no annotations".into()));
    }
    Histogram::from_samples(&samples, n_bins)
}

pub fn aspect_ratio_histogram(ds: &Dataset, n_bins: usize) -> Result<Histogram> {
    let samples: Vec<f64> = ds.annotations().map(|(_, a)| a.bbox.aspect_ratio()).collect();
    if samples.is_empty() {
        return Err(Error::Data("dataset has no annotations".into()));
    }
    Histogram::from_samples(&samples, n_bins)
}

/// Exact per-channel pixel sums, mergeable in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PixelSums {
    /// R, G, B.
    pub sums: [u64; 3],
    pub pixels: u64,
}

impl PixelSums {
    pub fn of_image(img: &image::RgbImage) -> Self {
        let mut sums = [0u64; 3];
        for p in img.pixels() {
            for (s, &v) in sums.iter_mut().zip(p.0.iter()) {
                *s += u64::from(v);
            }
        }
        Self {
            sums,
            pixels: u64::from(img.width()) * u64::from(img.height()),
        }
    }

    pub fn merge(self, other: PixelSums) -> PixelSums {
        PixelSums {
            sums: [
                self.sums[0] + other.sums[0],
                self.sums[1] + other.sums[1],
                self.sums[2] + other.sums[2],
            ],
            pixels: self.pixels + other.pixels,
        }
    }

    /// Means in B, G, R order.
    pub fn bgr_means(&self) -> Option<[f64; 3]> {
        if self.pixels == 0 {
            return None;
        }
        let n = self.pixels as f64;
        Some([
            self.sums[2] as f64 / n,
            self.sums[1] as f64 / n,
            self.sums[0] as f64 / n,
        ])
    }
}

/// Mean of each channel over every pixel of every image, in B, G, R order.
///
/// Channel sums are accumulated as integers, so the result does not depend
/// on the order images are visited.
pub fn channel_pixel_means(ds: &Dataset, source: &dyn ImageSource) -> Result<[f64; 3]> {
    let total = ds
        .records()
        .par_iter()
        .map(|r| source.load_rgb(r).map(|img| PixelSums::of_image(&img)))
        .try_reduce(PixelSums::default, |a, b| Ok(a.merge(b)))?;
    total
        .bgr_means()
        .ok_or_else(|| Error::Data("no pixels to average".into()))
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnchorRecommendation {
    pub sizes: Vec<u32>,
    /// Height over width.
    pub ratios: Vec<f64>,
}

pub const ANCHOR_SIZE_CANDIDATES: [u32; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];

pub fn recommend_anchors(ds: &Dataset, low_q: f64, high_q: f64) -> Result<AnchorRecommendation> {
    let boxes: Vec<BoundingBox> = ds.annotations().map(|(_, a)| a.bbox).collect();
    recommend_anchors_for_boxes(&boxes, low_q, high_q)
}

/// Anchor sizes and ratios covering the bulk of the box population.
///
/// A power-of-two size `s` covers side lengths in `[s/√2, s·√2]`; every
/// candidate whose range meets `[q_low(√area), q_high(√area)]` is kept (the
/// nearest end candidate when none does). Ratios are the `low_q`, 25%, 50%
/// and 75% quantiles of height/width, rounded to one decimal (at least 0.1)
/// and deduplicated.
pub fn recommend_anchors_for_boxes(
    boxes: &[BoundingBox],
    low_q: f64,
    high_q: f64,
) -> Result<AnchorRecommendation> {
    if boxes.is_empty() {
        return Err(Error::Data("no boxes to derive anchors from".into()));
    }
    if !(0.0..=1.0).contains(&low_q) || !(0.0..=1.0).contains(&high_q) || low_q > high_q {
        return Err(Error::Config(format!(
            "anchor quantiles must satisfy 0 <= low ({low_q}) <= high ({high_q}) <= 1"
        )));
    }
    let mut sides: Vec<f64> = boxes.iter().map(|b| (b.area() as f64).sqrt()).collect();
    sides.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sides, low_q);
    let hi = quantile_sorted(&sides, high_q);

    let sqrt2 = std::f64::consts::SQRT_2;
    let mut sizes: Vec<u32> = ANCHOR_SIZE_CANDIDATES
        .iter()
        .copied()
        .filter(|&s| lo <= f64::from(s) * sqrt2 && f64::from(s) / sqrt2 <= hi)
        .collect();
    if sizes.is_empty() {
        let smallest = ANCHOR_SIZE_CANDIDATES[0];
        let largest = ANCHOR_SIZE_CANDIDATES[ANCHOR_SIZE_CANDIDATES.len() - 1];
        sizes.push(if hi < f64::from(smallest) / sqrt2 { smallest } else { largest });
    }

    let mut ratios: Vec<f64> = boxes.iter().map(BoundingBox::aspect_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let mut tenths: Vec<i64> = [low_q, 0.25, 0.5, 0.75]
        .iter()
        .map(|&q| ((quantile_sorted(&ratios, q) * 10.0).round() as i64).max(1))
        .collect();
    tenths.sort_unstable();
    tenths.dedup();
    Ok(AnchorRecommendation {
        sizes,
        ratios: tenths.into_iter().map(|t| t as f64 / 10.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, MemoryImages};
    use image::{Rgb, RgbImage};

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn ds_with(boxes: &[(DamageClass, BoundingBox)]) -> Dataset {
        let anns = boxes.iter().map(|&(c, b)| Annotation::new(c, b)).collect();
        Dataset::from_records(vec![ImageRecord::new("Japan_000001", 2000, 2000, anns).unwrap()]).unwrap()
    }

    #[test]
    fn czech_row_counts() {
        let r1 = ImageRecord::new(
            "Czech_000001",
            600,
            600,
            vec![
                Annotation::new(DamageClass::D00, bb(0, 0, 5, 5)),
                Annotation::new(DamageClass::D40, bb(0, 0, 5, 5)),
            ],
        )
        .unwrap();
        let r2 = ImageRecord::new("Czech_000002", 600, 600, vec![Annotation::new(DamageClass::D00, bb(1, 1, 9, 9))]).unwrap();
        let d = class_distribution(&Dataset::from_records(vec![r1, r2]).unwrap());
        let row: Vec<u64> = DamageClass::ALL.iter().map(|&c| d.get(Country::Czech, c)).collect();
        assert_eq!(row, [2, 0, 0, 1]);
        assert_eq!(d.country_total(Country::Czech), 3);
        assert_eq!(d.total(), 3);
        assert_eq!(d.class_total(DamageClass::D00), 2);
    }

    #[test]
    fn empty_dataset_distribution_is_zero() {
        let d = class_distribution(&Dataset::default());
        assert_eq!(d.total(), 0);
    }

    #[test]
    fn area_histogram_hand_binned() {
        // areas 100, 100, 300
        let ds = ds_with(&[
            (DamageClass::D00, bb(0, 0, 10, 10)),
            (DamageClass::D00, bb(5, 5, 15, 15)),
            (DamageClass::D10, bb(0, 0, 30, 10)),
        ]);
        let h = box_area_histogram(&ds, 2, AreaScale::Area).unwrap();
        assert_eq!(h.bin_edges, vec![100.0, 200.0, 300.0]);
        assert_eq!(h.counts, vec![2, 1]);
    }

    #[test]
    fn single_box_fills_first_bin() {
        let ds = ds_with(&[(DamageClass::D00, bb(0, 0, 10, 10))]);
        let h = box_area_histogram(&ds, 20, AreaScale::Area).unwrap();
        assert_eq!(h.n_bins(), 20);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.total(), 1);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn equal_areas_collapse_into_one_bin() {
        let ds = ds_with(&[(DamageClass::D00, bb(0, 0, 10, 10)), (DamageClass::D20, bb(50, 50, 60, 60))]);
        let h = box_area_histogram(&ds, 5, AreaScale::Area).unwrap();
        assert_eq!(h.counts, vec![2, 0, 0, 0, 0]);
        let h = box_area_histogram(&ds, 1, AreaScale::SqrtArea).unwrap();
        assert_eq!(h.bin_edges, vec![10.0, 11.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(box_area_histogram(&Dataset::default(), 20, AreaScale::Area).is_err());
        assert!(Histogram::from_samples(&[1.0], 0).is_err());
    }

    #[test]
    fn ratio_histogram_hand_binned() {
        // ratios 0.5, 1.0, 1.5
        let ds = ds_with(&[
            (DamageClass::D00, bb(0, 0, 20, 10)),
            (DamageClass::D00, bb(0, 0, 10, 10)),
            (DamageClass::D00, bb(0, 0, 20, 30)),
        ]);
        let h = aspect_ratio_histogram(&ds, 2).unwrap();
        assert_eq!(h.bin_edges, vec![0.5, 1.0, 1.5]);
        // 1.0 sits on the interior edge and belongs to the right-hand bin
        assert_eq!(h.counts, vec![1, 2]);
    }

    #[test]
    fn square_boxes_land_in_bin_holding_one() {
        let ds = ds_with(&[(DamageClass::D00, bb(0, 0, 10, 10)), (DamageClass::D00, bb(0, 0, 40, 40))]);
        let h = aspect_ratio_histogram(&ds, 30).unwrap();
        assert_eq!(h.counts[0], 2);
        assert!(h.bin_edges[0] <= 1.0 && 1.0 < h.bin_edges[1]);
    }

    #[test]
    fn skewed_ratios_peak_low() {
        let mut boxes = Vec::new();
        for i in 0..40 {
            boxes.push((DamageClass::D00, bb(0, 0, 100, 5 + (i % 10))));
        }
        boxes.push((DamageClass::D00, bb(0, 0, 10, 30)));
        let h = aspect_ratio_histogram(&ds_with(&boxes), 30).unwrap();
        assert!(h.mode_bin() < 3, "mode bin {}", h.mode_bin());
    }

    #[test]
    fn histogram_csv() {
        let h = Histogram::from_samples(&[100.0, 100.0, 300.0], 2).unwrap();
        assert_eq!(h.to_csv(), "bin_lo,bin_hi,count\n100,200,2\n200,300,1\n");
    }

    #[test]
    fn pixel_means_two_images() {
        let a = ImageRecord::new("Czech_000001", 1, 1, vec![]).unwrap();
        let b = ImageRecord::new("Czech_000002", 1, 1, vec![]).unwrap();
        let mut src = MemoryImages::default();
        src.insert("Czech_000001", RgbImage::from_pixel(1, 1, Rgb([0, 0, 0])));
        src.insert("Czech_000002", RgbImage::from_pixel(1, 1, Rgb([10, 20, 30])));
        let ds = Dataset::from_records(vec![a, b]).unwrap();
        // B, G, R
        assert_eq!(channel_pixel_means(&ds, &src).unwrap(), [15.0, 10.0, 5.0]);
    }

    #[test]
    fn pixel_means_uniform() {
        let r = ImageRecord::new("India_000001", 4, 3, vec![]).unwrap();
        let mut src = MemoryImages::default();
        src.insert("India_000001", RgbImage::from_pixel(4, 3, Rgb([100, 100, 100])));
        let ds = Dataset::from_records(vec![r]).unwrap();
        assert_eq!(channel_pixel_means(&ds, &src).unwrap(), [100.0, 100.0, 100.0]);
    }

    #[test]
    fn pixel_means_missing_image_is_error() {
        let ds = Dataset::from_records(vec![ImageRecord::new("India_000001", 4, 3, vec![]).unwrap()]).unwrap();
        assert!(channel_pixel_means(&ds, &MemoryImages::default()).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert_eq!(quantile_sorted(&s, 0.1), 1.4);
    }

    /// Applies the covering rule the slow way: a size is kept when its
    /// [s/√2, s√2] interval overlaps the quantile interval.
    fn covering_sizes(lo: f64, hi: f64) -> Vec<u32> {
        let mut out = Vec::new();
        let mut s = 8u32;
        while s <= 1024 {
            let (a, b) = (s as f64 / 2f64.sqrt(), s as f64 * 2f64.sqrt());
            if a.max(lo) <= b.min(hi) {
                out.push(s);
            }
            s *= 2;
        }
        out
    }

    #[test]
    fn anchors_for_uniform_40px_boxes() {
        let boxes = vec![bb(0, 0, 40, 40); 10];
        let rec = recommend_anchors_for_boxes(&boxes, 0.05, 0.95).unwrap();
        // 32·√2 ≈ 45.25 ≥ 40 and 32/√2 ≈ 22.6 ≤ 40; 64/√2 ≈ 45.25 > 40
        assert_eq!(rec.sizes, covering_sizes(40.0, 40.0));
        assert_eq!(rec.sizes, vec![32]);
        assert_eq!(rec.ratios, vec![1.0]);
    }

    #[test]
    fn anchors_for_spread_20_to_150() {
        let boxes: Vec<_> = (20..=150).map(|s| bb(0, 0, s, s)).collect();
        // q05 = 20 + 0.05·130 = 26.5, q95 = 143.5
        assert_eq!(covering_sizes(26.5, 143.5), vec![32, 64, 128]);
        let rec = recommend_anchors_for_boxes(&boxes, 0.05, 0.95).unwrap();
        assert_eq!(rec.sizes, vec![32, 64, 128]);
    }

    #[test]
    fn anchors_fall_back_to_end_candidates() {
        let rec = recommend_anchors_for_boxes(&[bb(0, 0, 2, 2)], 0.05, 0.95).unwrap();
        assert_eq!(rec.sizes, vec![8]);
        let rec = recommend_anchors_for_boxes(&[bb(0, 0, 3000, 3000)], 0.05, 0.95).unwrap();
        assert_eq!(rec.sizes, vec![1024]);
    }

    #[test]
    fn anchor_ratios_snap_and_dedupe() {
        // ratios: 0.02 (x5), 0.5, 1.0 (x3), 1.5 (x3)
        let mut boxes = vec![bb(0, 0, 100, 2); 5];
        boxes.push(bb(0, 0, 20, 10));
        boxes.extend(vec![bb(0, 0, 10, 10); 3]);
        boxes.extend(vec![bb(0, 0, 10, 15); 3]);
        let rec = recommend_anchors_for_boxes(&boxes, 0.05, 0.95).unwrap();
        // q05 = q25 = 0.02 → clamped to 0.1; q50 = 0.75 → 0.8; q75 = 1.125 → 1.1
        assert_eq!(rec.ratios, vec![0.1, 0.8, 1.1]);
    }

    #[test]
    fn anchors_reject_empty_and_bad_quantiles() {
        assert!(recommend_anchors(&Dataset::default(), 0.05, 0.95).is_err());
        assert!(recommend_anchors_for_boxes(&[bb(0, 0, 2, 2)], 0.9, 0.1).is_err());
    }
}
