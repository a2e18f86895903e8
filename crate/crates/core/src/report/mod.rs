//! Overlays, brightness probes and charts.

pub mod charts;
pub mod font;

use image::{imageops, Rgb, RgbImage};

use crate::dataset::Annotation;
use crate::error::{Error, Result};
use crate::evaluator::Detection;
use crate::geometry::BoundingBox;

pub use charts::{emit_charts, ChartInputs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlaySpec {
    pub gt_color: Rgb<u8>,
    pub pred_color: Rgb<u8>,
    pub text_color: Rgb<u8>,
    /// Stroke width in pixels, drawn inside the box.
    pub thickness: u32,
    pub label_gt: bool,
    pub label_preds: bool,
}

impl Default for OverlaySpec {
    fn default() -> Self {
        Self {
            gt_color: Rgb([255, 0, 0]),
            pred_color: Rgb([0, 0, 255]),
            text_color: Rgb([255, 255, 255]),
            thickness: 2,
            label_gt: false,
            label_preds: true,
        }
    }
}

impl OverlaySpec {
    pub fn validate(&self) -> Result<()> {
        if self.gt_color == self.pred_color {
            return Err(Error::Config("ground-truth and prediction colors must differ".into()));
        }
        if self.thickness == 0 {
            return Err(Error::Config("stroke thickness must be positive".into()));
        }
        Ok(())
    }
}

/// Label text for a detection, e.g. `D20 0.99`.
pub fn detection_label(det: &Detection) -> String {
    format!("{} {:.2}", det.cls, det.score)
}

/// Draws ground truth, then predictions, then labels on top.
pub fn render_overlay(
    pixels: &RgbImage,
    gts: &[Annotation],
    preds: &[Detection],
    spec: &OverlaySpec,
) -> Result<RgbImage> {
    spec.validate()?;
    let mut out = pixels.clone();
    for a in gts {
        stroke_box(&mut out, &a.bbox, spec.thickness, spec.gt_color);
    }
    for d in preds {
        stroke_box(&mut out, &d.bbox, spec.thickness, spec.pred_color);
    }
    if spec.label_gt {
        for a in gts {
            draw_label(&mut out, &a.bbox, a.cls.as_str(), spec.gt_color, spec.text_color);
        }
    }
    if spec.label_preds {
        for d in preds {
            draw_label(&mut out, &d.bbox, &detection_label(d), spec.pred_color, spec.text_color);
        }
    }
    Ok(out)
}

fn fill(img: &mut RgbImage, x0: u32, y0: u32, x1: u32, y1: u32, color: Rgb<u8>) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            img.put_pixel(x, y, color);
        }
    }
}

fn stroke_box(img: &mut RgbImage, b: &BoundingBox, thickness: u32, color: Rgb<u8>) {
    let (x0, y0, x1, y1) = (b.xmin(), b.ymin(), b.xmax(), b.ymax());
    let tx = thickness.min(b.width());
    let ty = thickness.min(b.height());
    fill(img, x0, y0, x1, y0 + ty, color);
    fill(img, x0, y1 - ty, x1, y1, color);
    fill(img, x0, y0, x0 + tx, y1, color);
    fill(img, x1 - tx, y0, x1, y1, color);
}

/// Label rectangle size: text plus a one-pixel margin.
pub fn label_size(text: &str) -> (u32, u32) {
    (font::text_width(text) + 2, font::GLYPH_HEIGHT + 2)
}

/// Top-left corner of the label for `b`: above the box when there is room,
/// otherwise just inside its top edge; shifted left to stay in the image.
pub fn label_origin(b: &BoundingBox, text: &str, image_width: u32) -> (u32, u32) {
    let (lw, lh) = label_size(text);
    let x = b.xmin().min(image_width.saturating_sub(lw));
    let y = if b.ymin() >= lh { b.ymin() - lh } else { b.ymin() };
    (x, y)
}

fn draw_label(img: &mut RgbImage, b: &BoundingBox, text: &str, bg: Rgb<u8>, fg: Rgb<u8>) {
    let (lw, lh) = label_size(text);
    let (x, y) = label_origin(b, text, img.width());
    fill(img, x, y, x + lw, y + lh, bg);
    let (w, h) = img.dimensions();
    font::rasterize(text, |dx, dy| {
        let (px, py) = (x + 1 + dx, y + 1 + dy);
        if px < w && py < h {
            img.put_pixel(px, py, fg);
        }
    });
}

/// Crops `bbox`, scales every channel by `brightness`, then enlarges by
/// `zoom` with nearest-neighbour sampling.
pub fn render_brightness_probe(
    pixels: &RgbImage,
    bbox: &BoundingBox,
    brightness: f64,
    zoom: f64,
) -> Result<RgbImage> {
    if !bbox.fits_within(pixels.width(), pixels.height()) {
        return Err(Error::Data(format!(
            "probe box {bbox} outside the {}x{} image",
            pixels.width(),
            pixels.height()
        )));
    }
    if !(brightness >= 0.0 && brightness.is_finite()) {
        return Err(Error::Config(format!("brightness factor {brightness} must be non-negative")));
    }
    if !(zoom > 0.0 && zoom.is_finite()) {
        return Err(Error::Config(format!("zoom {zoom} must be positive")));
    }
    let mut crop = imageops::crop_imm(pixels, bbox.xmin(), bbox.ymin(), bbox.width(), bbox.height()).to_image();
    for v in crop.iter_mut() {
        *v = (f64::from(*v) * brightness).round().clamp(0.0, 255.0) as u8;
    }
    let ow = (f64::from(bbox.width()) * zoom).round() as u32;
    let oh = (f64::from(bbox.height()) * zoom).round() as u32;
    if ow == 0 || oh == 0 {
        return Err(Error::Config(format!("zoom {zoom} collapses the {bbox} crop")));
    }
    if (ow, oh) == crop.dimensions() {
        return Ok(crop);
    }
    Ok(imageops::resize(&crop, ow, oh, imageops::FilterType::Nearest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DamageClass;

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn gray(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([90, 90, 90]))
    }

    #[test]
    fn no_boxes_is_identity() {
        let img = gray(40, 30);
        assert_eq!(render_overlay(&img, &[], &[], &OverlaySpec::default()).unwrap(), img);
    }

    #[test]
    fn gt_box_changes_only_its_strokes() {
        let img = gray(64, 48);
        let b = bb(10, 8, 40, 30);
        let out = render_overlay(&img, &[Annotation::new(DamageClass::D00, b)], &[], &OverlaySpec::default()).unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            let in_box = (10..40).contains(&x) && (8..30).contains(&y);
            let on_stroke = in_box && (x < 12 || x >= 38 || y < 10 || y >= 28);
            if on_stroke {
                assert_eq!(p.0, [255, 0, 0], "({x},{y})");
            } else {
                assert_eq!(p, img.get_pixel(x, y), "({x},{y})");
            }
        }
    }

    #[test]
    fn prediction_label_is_drawn_above_box() {
        let img = gray(120, 80);
        let det = Detection::new("India_000001", DamageClass::D20, bb(20, 30, 100, 70), 0.99).unwrap();
        assert_eq!(detection_label(&det), "D20 0.99");
        let out = render_overlay(&img, &[], &[det], &OverlaySpec::default()).unwrap();
        // label background spans 49x9 starting at (20, 21)
        assert_eq!(out.get_pixel(20, 21).0, [0, 0, 255]);
        assert_eq!(out.get_pixel(68, 29).0, [0, 0, 255]);
        assert_eq!(*out.get_pixel(69, 21), *img.get_pixel(69, 21));
        // first glyph 'D', top row "###..", at (21, 22)
        let white = [255, 255, 255];
        let row: Vec<bool> = (21..26).map(|x| out.get_pixel(x, 22).0 == white).collect();
        assert_eq!(row, [true, true, true, false, false]);
        // middle row of 'D' is "#...#"
        let row: Vec<bool> = (21..26).map(|x| out.get_pixel(x, 25).0 == white).collect();
        assert_eq!(row, [true, false, false, false, true]);
    }

    #[test]
    fn label_moves_inside_near_top_edge() {
        let b = bb(110, 2, 119, 20);
        assert_eq!(label_origin(&b, "D20 0.99", 120), (71, 2));
    }

    #[test]
    fn overlay_rejects_equal_colors() {
        let spec = OverlaySpec {
            pred_color: Rgb([255, 0, 0]),
            ..OverlaySpec::default()
        };
        assert!(render_overlay(&gray(4, 4), &[], &[], &spec).is_err());
    }

    #[test]
    fn probe_identity_brightness_and_zoom() {
        let img = RgbImage::from_fn(80, 60, |x, y| Rgb([x as u8, y as u8, 7]));
        let b = bb(10, 5, 60, 45);
        let same = render_brightness_probe(&img, &b, 1.0, 1.0).unwrap();
        assert_eq!(same, imageops::crop_imm(&img, 10, 5, 50, 40).to_image());
        assert_eq!(render_brightness_probe(&img, &b, 1.0, 2.0).unwrap().dimensions(), (100, 80));

        let flat = RgbImage::from_pixel(20, 20, Rgb([100; 3]));
        let lit = render_brightness_probe(&flat, &bb(0, 0, 20, 20), 1.5, 1.0).unwrap();
        assert!(lit.pixels().all(|p| p.0 == [150; 3]));
        let hot = render_brightness_probe(&flat, &bb(0, 0, 20, 20), 3.0, 1.0).unwrap();
        assert!(hot.pixels().all(|p| p.0 == [255; 3]));
    }

    #[test]
    fn probe_errors() {
        let img = gray(20, 20);
        assert!(render_brightness_probe(&img, &bb(0, 0, 30, 10), 1.0, 1.0).is_err());
        assert!(render_brightness_probe(&img, &bb(0, 0, 10, 10), 1.0, 0.0).is_err());
        assert!(render_brightness_probe(&img, &bb(0, 0, 1, 1), 1.0, 0.1).is_err());
    }
}
