//! Copy-paste damage augmentation.
//!
//! Real damage crops are taken from ground-truth boxes, lightly jittered,
//! dropped at a position sampled from existing damages of the same country
//! and class, and recolored to match the destination region.

use std::collections::BTreeMap;

use image::{imageops, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::color::color_transfer;
use crate::dataset::{
    Annotation, Country, DamageClass, Dataset, ImageRecord, ImageSource, Warning, WarningCode,
};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub type BankKey = (Country, DamageClass);

/// A ground-truth crop.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub source_id: String,
    pub source_box: BoundingBox,
    pub pixels: RgbImage,
}

#[derive(Debug, Clone, Default)]
pub struct PatchBank {
    entries: BTreeMap<BankKey, Vec<Patch>>,
}

impl PatchBank {
    pub fn get(&self, country: Country, cls: DamageClass) -> &[Patch] {
        self.entries.get(&(country, cls)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One patch per annotation, cropped exactly to its box.
pub fn build_patch_bank(ds: &Dataset, source: &dyn ImageSource) -> Result<PatchBank> {
    let per_image: Vec<Vec<(BankKey, Patch)>> = ds
        .records()
        .par_iter()
        .filter(|r| !r.annotations.is_empty())
        .map(|r| {
            let img = source.load_rgb(r)?;
            r.annotations
                .iter()
                .map(|a| {
                    let b = a.bbox;
                    if b.xmax() > img.width() || b.ymax() > img.height() {
                        return Err(Error::Data(format!(
                            "box {b} of '{}' exceeds the {}x{} image",
                            r.image_id,
                            img.width(),
                            img.height()
                        )));
                    }
                    let pixels = imageops::crop_imm(&img, b.xmin(), b.ymin(), b.width(), b.height()).to_image();
                    Ok((
                        (r.country, a.cls),
                        Patch {
                            source_id: r.image_id.clone(),
                            source_box: b,
                            pixels,
                        },
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut entries: BTreeMap<BankKey, Vec<Patch>> = BTreeMap::new();
    for (key, patch) in per_image.into_iter().flatten() {
        entries.entry(key).or_default().push(patch);
    }
    Ok(PatchBank { entries })
}

/// Where a damage sat: center as a fraction of the image, size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Location {
    pub center_x: f64,
    pub center_y: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Default)]
pub struct LocationBank {
    entries: BTreeMap<BankKey, Vec<Location>>,
}

impl LocationBank {
    pub fn get(&self, country: Country, cls: DamageClass) -> &[Location] {
        self.entries.get(&(country, cls)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_location_bank(ds: &Dataset) -> LocationBank {
    let mut entries: BTreeMap<BankKey, Vec<Location>> = BTreeMap::new();
    for (r, a) in ds.annotations() {
        let b = a.bbox;
        entries.entry((r.country, a.cls)).or_default().push(Location {
            center_x: (f64::from(b.xmin()) + f64::from(b.xmax())) / 2.0 / f64::from(r.width),
            center_y: (f64::from(b.ymin()) + f64::from(b.ymax())) / 2.0 / f64::from(r.height),
            width: b.width(),
            height: b.height(),
        });
    }
    LocationBank { entries }
}

/// Paste probability per (country, class).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationSchedule {
    probs: [[f64; 4]; 3],
}

impl Default for AugmentationSchedule {
    fn default() -> Self {
        Self::balancing()
    }
}

impl AugmentationSchedule {
    /// Probabilities chosen to even out the per-country class imbalance.
    pub fn balancing() -> Self {
        Self {
            probs: [
                [0.2, 0.2, 0.0, 0.4], // Czech
                [0.3, 0.5, 0.2, 0.0], // India
                [0.0, 0.6, 0.3, 0.5], // Japan
            ],
        }
    }

    pub fn zeros() -> Self {
        Self { probs: [[0.0; 4]; 3] }
    }

    pub fn new(probs: [[f64; 4]; 3]) -> Result<Self> {
        for c in Country::ALL {
            for k in DamageClass::ALL {
                let p = probs[c.index()][k.index()];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!(
                        "schedule probability for {c}/{k} must lie in [0, 1], got {p}"
                    )));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn get(&self, country: Country, cls: DamageClass) -> f64 {
        self.probs[country.index()][cls.index()]
    }

    pub fn set(&mut self, country: Country, cls: DamageClass, p: f64) -> Result<()> {
        let mut probs = self.probs;
        probs[country.index()][cls.index()] = p;
        *self = Self::new(probs)?;
        Ok(())
    }

    /// `{"Czech": {"D00": 0.2, …}, "India": {…}, "Japan": {…}}` with all twelve entries.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, BTreeMap<String, f64>> = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("schedule JSON: {e}")))?;
        let mut probs = [[f64::NAN; 4]; 3];
        let mut seen = 0;
        for (country, row) in &raw {
            let c: Country = country.parse()?;
            for (cls, &p) in row {
                let k: DamageClass = cls.parse()?;
                probs[c.index()][k.index()] = p;
                seen += 1;
            }
        }
        if seen != 12 || probs.iter().flatten().any(|p| p.is_nan()) {
            return Err(Error::Config(
                "schedule must list exactly 3 countries x 4 classes".into(),
            ));
        }
        Self::new(probs)
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, BTreeMap<&str, f64>> = Country::ALL
            .iter()
            .map(|&c| {
                (
                    c.as_str(),
                    DamageClass::ALL.iter().map(|&k| (k.as_str(), self.get(c, k))).collect(),
                )
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("schedule serializes")
    }

    /// Header `country,D00,D10,D20,D40` followed by one row per country.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Config("empty schedule CSV".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.len() != 5 {
            return Err(Error::Config("schedule CSV header must have 5 columns".into()));
        }
        let classes = header[1..]
            .iter()
            .map(|h| h.parse::<DamageClass>())
            .collect::<Result<Vec<_>>>()?;
        let mut probs = [[f64::NAN; 4]; 3];
        let mut rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 5 {
                return Err(Error::Config(format!("schedule CSV row '{line}' needs 5 cells")));
            }
            let c: Country = cells[0].parse()?;
            for (k, cell) in classes.iter().zip(&cells[1..]) {
                probs[c.index()][k.index()] = cell
                    .parse()
                    .map_err(|_| Error::Config(format!("bad probability '{cell}'")))?;
            }
            rows += 1;
        }
        if rows != 3 || probs.iter().flatten().any(|p| p.is_nan()) {
            return Err(Error::Config(
                "schedule must list exactly 3 countries x 4 classes".into(),
            ));
        }
        Self::new(probs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterConfig {
    pub hflip_prob: f64,
    /// Rotation is drawn uniformly from `[-max_rotation_deg, max_rotation_deg]`.
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            hflip_prob: 0.5,
            max_rotation_deg: 10.0,
            scale_range: (0.9, 1.1),
        }
    }
}

impl JitterConfig {
    /// No flip, rotation or scaling.
    pub fn none() -> Self {
        Self {
            hflip_prob: 0.0,
            max_rotation_deg: 0.0,
            scale_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::Config("hflip probability must lie in [0, 1]".into()));
        }
        if !(0.0..=45.0).contains(&self.max_rotation_deg) {
            return Err(Error::Config("rotation range must lie in [0, 45] degrees".into()));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid scale range ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// A concrete draw from a [`JitterConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub flip: bool,
    pub rotation_deg: f64,
    pub scale: f64,
}

impl Jitter {
    pub fn sample(config: &JitterConfig, rng: &mut impl Rng) -> Self {
        let flip = rng.random_bool(config.hflip_prob);
        let rotation_deg = if config.max_rotation_deg > 0.0 {
            rng.random_range(-config.max_rotation_deg..=config.max_rotation_deg)
        } else {
            0.0
        };
        let (lo, hi) = config.scale_range;
        let scale = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        Self {
            flip,
            rotation_deg,
            scale,
        }
    }

    pub fn output_size(&self, width: u32, height: u32) -> (u32, u32) {
        let s = |v: u32| ((f64::from(v) * self.scale).round() as u32).max(1);
        (s(width), s(height))
    }

    /// Scales, rotates about the center and optionally mirrors `patch`.
    ///
    /// The output canvas is the scaled patch size; samples falling outside
    /// the source repeat its border so the corners are never blank.
    pub fn apply(&self, patch: &RgbImage) -> RgbImage {
        let (w, h) = (patch.width(), patch.height());
        let (ow, oh) = self.output_size(w, h);
        if !self.flip && self.rotation_deg == 0.0 && (ow, oh) == (w, h) {
            return patch.clone();
        }
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        let (half_w, half_h) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
        let (sx_scale, sy_scale) = (f64::from(ow) / f64::from(w), f64::from(oh) / f64::from(h));
        RgbImage::from_fn(ow, oh, |x, y| {
            let dx = f64::from(x) + 0.5 - f64::from(ow) / 2.0;
            let dy = f64::from(y) + 0.5 - f64::from(oh) / 2.0;
            let rx = cos * dx + sin * dy;
            let ry = -sin * dx + cos * dy;
            let mut sx = rx / sx_scale + half_w;
            let sy = ry / sy_scale + half_h;
            if self.flip {
                sx = f64::from(w) - sx;
            }
            bilinear(patch, sx - 0.5, sy - 0.5)
        })
    }
}

fn bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let max_x = f64::from(img.width() - 1);
    let max_y = f64::from(img.height() - 1);
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as u32, y0 as u32);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p = |xx, yy| img.get_pixel(xx, yy).0.map(f64::from);
    let (a, b, c, d) = (p(x0, y0), p(x1, y0), p(x0, y1), p(x1, y1));
    let mut out = [0u8; 3];
    for k in 0..3 {
        let top = a[k] + (b[k] - a[k]) * fx;
        let bottom = c[k] + (d[k] - c[k]) * fx;
        out[k] = (top + (bottom - top) * fy).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Placements overlapping an existing box by more than this IoU are redrawn.
pub const MAX_PLACEMENT_IOU: f64 = 0.3;
/// Placement draws per scheduled class before giving up.
pub const PLACEMENT_ATTEMPTS: usize = 10;

/// Stable 64-bit FNV-1a hash of an image id.
pub fn fnv1a64(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-image seed, independent of processing order.
pub fn image_seed(seed: u64, image_id: &str) -> u64 {
    seed ^ fnv1a64(image_id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub image: RgbImage,
    pub record: ImageRecord,
    pub warnings: Vec<Warning>,
}

impl Synthesis {
    /// Annotations appended to the input record.
    pub fn synthetic<'a>(&'a self, original: &ImageRecord) -> &'a [Annotation] {
        &self.record.annotations[original.annotations.len()..]
    }
}

/// Validated banks, schedule and jitter.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    patches: PatchBank,
    locations: LocationBank,
    schedule: AugmentationSchedule,
    jitter: JitterConfig,
}

impl Synthesizer {
    /// Fails if any (country, class) with positive probability has an empty bank.
    pub fn new(
        patches: PatchBank,
        locations: LocationBank,
        schedule: AugmentationSchedule,
        jitter: JitterConfig,
    ) -> Result<Self> {
        jitter.validate()?;
        for c in Country::ALL {
            for k in DamageClass::ALL {
                if schedule.get(c, k) > 0.0
                    && (patches.get(c, k).is_empty() || locations.get(c, k).is_empty())
                {
                    return Err(Error::Config(format!(
                        "schedule gives {c}/{k} probability {} but its patch or location bank is empty",
                        schedule.get(c, k)
                    )));
                }
            }
        }
        Ok(Self {
            patches,
            locations,
            schedule,
            jitter,
        })
    }

    pub fn schedule(&self) -> &AugmentationSchedule {
        &self.schedule
    }

    /// Pastes scheduled damages into one image. Deterministic in `seed`.
    pub fn synthesize(&self, record: &ImageRecord, pixels: &RgbImage, seed: u64) -> Result<Synthesis> {
        if (pixels.width(), pixels.height()) != (record.width, record.height) {
            return Err(Error::Data(format!(
                "pixels of '{}' are {}x{}, record says {}x{}",
                record.image_id,
                pixels.width(),
                pixels.height(),
                record.width,
                record.height
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut image = pixels.clone();
        let mut annotations = record.annotations.clone();
        let mut warnings = Vec::new();
        let country = record.country;

        for cls in DamageClass::ALL {
            let p = self.schedule.get(country, cls);
            if p <= 0.0 || !rng.random_bool(p) {
                continue;
            }
            let bank = self.patches.get(country, cls);
            let patch = &bank[rng.random_range(0..bank.len())];
            let jitter = Jitter::sample(&self.jitter, &mut rng);
            let jittered = jitter.apply(&patch.pixels);
            let (pw, ph) = (jittered.width(), jittered.height());
            if pw > record.width || ph > record.height {
                warnings.push(Warning::new(
                    &record.image_id,
                    WarningCode::PlacementSkipped,
                    format!("{cls} patch {pw}x{ph} larger than the image"),
                ));
                continue;
            }

            let locations = self.locations.get(country, cls);
            let mut placed = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let loc = locations[rng.random_range(0..locations.len())];
                let candidate = place(loc, pw, ph, record.width, record.height);
                if annotations
                    .iter()
                    .all(|a| a.bbox.iou(&candidate) <= MAX_PLACEMENT_IOU)
                {
                    placed = Some(candidate);
                    break;
                }
            }
            let Some(bbox) = placed else {
                warnings.push(Warning::new(
                    &record.image_id,
                    WarningCode::PlacementSkipped,
                    format!("{cls}: no placement free of overlap after {PLACEMENT_ATTEMPTS} draws"),
                ));
                continue;
            };

            let region = imageops::crop_imm(&image, bbox.xmin(), bbox.ymin(), pw, ph).to_image();
            let blended = color_transfer(&jittered, &region).image.to_rgb8();
            imageops::replace(&mut image, &blended, i64::from(bbox.xmin()), i64::from(bbox.ymin()));
            annotations.push(Annotation::new(cls, bbox));
        }

        let out_record = ImageRecord {
            annotations,
            ..record.clone()
        };
        Ok(Synthesis {
            image,
            record: out_record,
            warnings,
        })
    }
}

/// Centers a `pw x ph` box on the location, shifted to lie inside the image.
fn place(loc: Location, pw: u32, ph: u32, width: u32, height: u32) -> BoundingBox {
    let axis = |frac: f64, size: u32, extent: u32| -> u32 {
        let start = (frac * f64::from(extent) - f64::from(size) / 2.0).round();
        start.clamp(0.0, f64::from(extent - size)) as u32
    };
    let x = axis(loc.center_x, pw, width);
    let y = axis(loc.center_y, ph, height);
    BoundingBox::from_origin_size(x, y, pw, ph).expect("patch dimensions are positive")
}
