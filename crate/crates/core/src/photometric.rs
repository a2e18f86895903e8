//! Random crop, brightness/contrast and cutout.
//!
//! Steps run in a fixed order (crop, brightness/contrast, cutout) so a cutout
//! hole always ends up exactly at its fill value.

use image::{imageops, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Annotation, Warning, WarningCode};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotometricConfig {
    pub crop_prob: f64,
    /// Inclusive bounds on the square crop side.
    pub crop_side: (u32, u32),
    pub brightness_contrast_prob: f64,
    pub brightness_limit: f64,
    pub contrast_limit: f64,
    pub cutout_holes: u32,
    pub cutout_hole_prob: f64,
    pub cutout_max_size: u32,
    pub cutout_fill: u8,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        Self {
            crop_prob: 0.1,
            crop_side: (512, 540),
            brightness_contrast_prob: 0.5,
            brightness_limit: 0.3,
            contrast_limit: 0.3,
            cutout_holes: 8,
            cutout_hole_prob: 0.5,
            cutout_max_size: 32,
            cutout_fill: 0,
        }
    }
}

impl PhotometricConfig {
    /// Every step disabled.
    pub fn none() -> Self {
        Self {
            crop_prob: 0.0,
            brightness_contrast_prob: 0.0,
            cutout_hole_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("crop_prob", self.crop_prob),
            ("brightness_contrast_prob", self.brightness_contrast_prob),
            ("cutout_hole_prob", self.cutout_hole_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        let (lo, hi) = self.crop_side;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid crop side range ({lo}, {hi})")));
        }
        for (name, v) in [("brightness_limit", self.brightness_limit), ("contrast_limit", self.contrast_limit)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.cutout_max_size == 0 {
            return Err(Error::Config("cutout_max_size must be positive".into()));
        }
        Ok(())
    }
}

/// A step that fired, with its sampled parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppliedOp {
    Crop { x: u32, y: u32, side: u32 },
    BrightnessContrast { brightness: f64, contrast: f64 },
    Cutout { x: u32, y: u32, width: u32, height: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotometricOutput {
    pub image: RgbImage,
    pub applied: Vec<AppliedOp>,
    pub warnings: Vec<Warning>,
}

/// Applies the configured photometric steps. Deterministic in `seed`.
pub fn photometric_augment(
    pixels: &RgbImage,
    image_id: &str,
    seed: u64,
    config: &PhotometricConfig,
) -> Result<PhotometricOutput> {
    config.validate()?;
    if pixels.width() == 0 || pixels.height() == 0 {
        return Err(Error::Data(format!("'{image_id}' has no pixels")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut image = pixels.clone();
    let mut applied = Vec::new();
    let mut warnings = Vec::new();
    let (w, h) = image.dimensions();

    if rng.random_bool(config.crop_prob) {
        let (lo, hi) = config.crop_side;
        if w.min(h) < lo {
            warnings.push(Warning::new(
                image_id,
                WarningCode::CropSkipped,
                format!("{w}x{h} image is smaller than the {lo}px minimum crop"),
            ));
        } else {
            let side = rng.random_range(lo..=hi.min(w.min(h)));
            let x = rng.random_range(0..=w - side);
            let y = rng.random_range(0..=h - side);
            let crop = imageops::crop_imm(&image, x, y, side, side).to_image();
            image = imageops::resize(&crop, w, h, imageops::FilterType::Triangle);
            applied.push(AppliedOp::Crop { x, y, side });
        }
    }

    if rng.random_bool(config.brightness_contrast_prob) {
        let brightness = symmetric(&mut rng, config.brightness_limit);
        let contrast = symmetric(&mut rng, config.contrast_limit);
        adjust_brightness_contrast(&mut image, brightness, contrast);
        applied.push(AppliedOp::BrightnessContrast { brightness, contrast });
    }

    for _ in 0..config.cutout_holes {
        if !rng.random_bool(config.cutout_hole_prob) {
            continue;
        }
        let width = rng.random_range(1..=config.cutout_max_size.min(w));
        let height = rng.random_range(1..=config.cutout_max_size.min(h));
        let x = rng.random_range(0..=w - width);
        let y = rng.random_range(0..=h - height);
        fill_rect(&mut image, x, y, width, height, config.cutout_fill);
        applied.push(AppliedOp::Cutout { x, y, width, height });
    }

    Ok(PhotometricOutput {
        image,
        applied,
        warnings,
    })
}

/// Maps annotations through the geometric steps in `applied`.
///
/// Only a crop moves boxes: each is clipped to the crop window and scaled
/// back to `width x height`; boxes left empty are dropped.
pub fn remap_annotations(
    annotations: &[Annotation],
    applied: &[AppliedOp],
    width: u32,
    height: u32,
) -> Vec<Annotation> {
    let Some((cx, cy, side)) = applied.iter().find_map(|op| match *op {
        AppliedOp::Crop { x, y, side } => Some((x, y, side)),
        _ => None,
    }) else {
        return annotations.to_vec();
    };
    let sx = f64::from(width) / f64::from(side);
    let sy = f64::from(height) / f64::from(side);
    let map = |v: u32, origin: u32, scale: f64, extent: u32| -> u32 {
        let local = v.saturating_sub(origin).min(side);
        ((f64::from(local) * scale).round() as u32).min(extent)
    };
    annotations
        .iter()
        .filter_map(|a| {
            let b = a.bbox;
            let bbox = BoundingBox::new(
                map(b.xmin(), cx, sx, width),
                map(b.ymin(), cy, sy, height),
                map(b.xmax(), cx, sx, width),
                map(b.ymax(), cy, sy, height),
            )
            .ok()?;
            Some(Annotation { bbox, ..*a })
        })
        .collect()
}

fn symmetric(rng: &mut impl Rng, limit: f64) -> f64 {
    if limit > 0.0 {
        rng.random_range(-limit..=limit)
    } else {
        0.0
    }
}

/// `out = ((x - mean)·(1 + contrast) + mean)·(1 + brightness)`, clipped,
/// where `mean` is the mean over all channels.
pub fn adjust_brightness_contrast(image: &mut RgbImage, brightness: f64, contrast: f64) {
    let n = image.as_raw().len();
    if n == 0 {
        return;
    }
    let sum: u64 = image.as_raw().iter().map(|&v| u64::from(v)).sum();
    let mean = sum as f64 / n as f64;
    for v in image.iter_mut() {
        let x = f64::from(*v);
        let out = ((x - mean) * (1.0 + contrast) + mean) * (1.0 + brightness);
        *v = out.round().clamp(0.0, 255.0) as u8;
    }
}

fn fill_rect(image: &mut RgbImage, x: u32, y: u32, width: u32, height: u32, value: u8) {
    for yy in y..y + height {
        for xx in x..x + width {
            image.put_pixel(xx, yy, Rgb([value; 3]));
        }
    }
}
