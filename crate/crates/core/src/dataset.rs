//! Domain types for the three-country road-damage dataset and the
//! directory loader that builds a [`Dataset`] from images and VOC XML files.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::RgbImage;
use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::voc::{self, ParseOptions};

/// The four scored damage types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DamageClass {
    /// Longitudinal crack.
    D00,
    /// Transverse crack.
    D10,
    /// Alligator crack.
    D20,
    /// Pothole.
    D40,
}

impl DamageClass {
    pub const ALL: [DamageClass; 4] = [
        DamageClass::D00,
        DamageClass::D10,
        DamageClass::D20,
        DamageClass::D40,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DamageClass::D00 => "D00",
            DamageClass::D10 => "D10",
            DamageClass::D20 => "D20",
            DamageClass::D40 => "D40",
        }
    }

    /// Position in [`DamageClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DamageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DamageClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D00" => Ok(DamageClass::D00),
            "D10" => Ok(DamageClass::D10),
            "D20" => Ok(DamageClass::D20),
            "D40" => Ok(DamageClass::D40),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Country {
    Czech,
    India,
    Japan,
}

impl Country {
    pub const ALL: [Country; 3] = [Country::Czech, Country::India, Country::Japan];

    pub fn as_str(self) -> &'static str {
        match self {
            Country::Czech => "Czech",
            Country::India => "India",
            Country::Japan => "Japan",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Derives the country from an identifier such as `Japan_012722`.
    pub fn from_image_id(image_id: &str) -> Result<Self> {
        let prefix = image_id.split('_').next().unwrap_or_default();
        prefix
            .parse()
            .map_err(|_| Error::UnknownCountry(image_id.to_string()))
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Country {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Czech" => Ok(Country::Czech),
            "India" => Ok(Country::India),
            "Japan" => Ok(Country::Japan),
            other => Err(Error::UnknownCountry(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub cls: DamageClass,
    pub bbox: BoundingBox,
    /// Set for labels promoted from model predictions.
    pub pseudo: bool,
}

impl Annotation {
    pub fn new(cls: DamageClass, bbox: BoundingBox) -> Self {
        Self {
            cls,
            bbox,
            pseudo: false,
        }
    }

    pub fn pseudo(cls: DamageClass, bbox: BoundingBox) -> Self {
        Self {
            cls,
            bbox,
            pseudo: true,
        }
    }
}

/// One image with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub file_name: String,
    pub country: Country,
    pub width: u32,
    pub height: u32,
    pub annotations: Vec<Annotation>,
}

impl ImageRecord {
    /// Validates dimensions, country prefix, and that every box fits the image.
    pub fn new(
        image_id: impl Into<String>,
        width: u32,
        height: u32,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        let country = Country::from_image_id(&image_id)?;
        if width == 0 || height == 0 {
            return Err(Error::Data(format!(
                "image '{image_id}' has zero dimension {width}x{height}"
            )));
        }
        if let Some(a) = annotations.iter().find(|a| !a.bbox.fits_within(width, height)) {
            return Err(Error::Data(format!(
                "annotation {} of '{image_id}' exceeds image bounds {width}x{height}",
                a.bbox
            )));
        }
        Ok(Self {
            file_name: format!("{image_id}.jpg"),
            image_id,
            country,
            width,
            height,
            annotations,
        })
    }

    pub fn with_file_name(mut self, file_name: impl Into<String>) -> Self {
        self.file_name = file_name.into();
        self
    }
}

/// Non-fatal data issue found while loading or transforming data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub image_id: String,
    pub code: WarningCode,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningCode {
    UnknownClass,
    DegenerateBox,
    BoxClamped,
    BoxOutsideImage,
    NonIntegerCoordinate,
    SizeMismatch,
    UnknownImage,
    CropSkipped,
    PlacementSkipped,
}

impl WarningCode {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningCode::UnknownClass => "unknown_class",
            WarningCode::DegenerateBox => "degenerate_box",
            WarningCode::BoxClamped => "box_clamped",
            WarningCode::BoxOutsideImage => "box_outside_image",
            WarningCode::NonIntegerCoordinate => "non_integer_coordinate",
            WarningCode::SizeMismatch => "size_mismatch",
            WarningCode::UnknownImage => "unknown_image",
            WarningCode::CropSkipped => "crop_skipped",
            WarningCode::PlacementSkipped => "placement_skipped",
        }
    }
}

impl Warning {
    pub fn new(image_id: impl Into<String>, code: WarningCode, detail: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            code,
            detail: detail.into(),
        }
    }

    /// `<image_id>\t<code>\t<detail>` with tabs and newlines in the detail flattened.
    pub fn to_log_line(&self) -> String {
        let detail: String = self
            .detail
            .chars()
            .map(|c| if c == '\t' || c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        format!("{}\t{}\t{}", self.image_id, self.code.as_str(), detail)
    }
}

/// Renders warnings as a newline-terminated log.
pub fn format_warning_log(warnings: &[Warning]) -> String {
    let mut out = String::new();
    for w in warnings {
        out.push_str(&w.to_log_line());
        out.push('\n');
    }
    out
}

/// Records sorted by image id, with lookup by id and by country.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    by_id: HashMap<String, usize>,
    by_country: [Vec<usize>; 3],
    image_paths: BTreeMap<String, PathBuf>,
    warnings: Vec<Warning>,
}

impl Dataset {
    /// Sorts records by id; fails on duplicate ids.
    pub fn from_records(mut records: Vec<ImageRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let mut by_id = HashMap::with_capacity(records.len());
        let mut by_country: [Vec<usize>; 3] = Default::default();
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.image_id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate image id '{}'", r.image_id)));
            }
            by_country[r.country.index()].push(i);
        }
        Ok(Self {
            records,
            by_id,
            by_country,
            image_paths: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn with_image_paths(mut self, paths: BTreeMap<String, PathBuf>) -> Self {
        self.image_paths = paths;
        self
    }

    pub fn with_warnings(mut self, warnings: Vec<Warning>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageRecord> {
        self.by_id.get(image_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.by_id.contains_key(image_id)
    }

    pub fn by_country(&self, country: Country) -> impl Iterator<Item = &ImageRecord> + '_ {
        self.by_country[country.index()]
            .iter()
            .map(move |&i| &self.records[i])
    }

    pub fn country_count(&self, country: Country) -> usize {
        self.by_country[country.index()].len()
    }

    pub fn annotation_count(&self) -> usize {
        self.records.iter().map(|r| r.annotations.len()).sum()
    }

    pub fn annotations(&self) -> impl Iterator<Item = (&ImageRecord, &Annotation)> + '_ {
        self.records
            .iter()
            .flat_map(|r| r.annotations.iter().map(move |a| (r, a)))
    }

    pub fn image_path(&self, image_id: &str) -> Option<&Path> {
        self.image_paths.get(image_id).map(PathBuf::as_path)
    }

    pub fn image_paths(&self) -> &BTreeMap<String, PathBuf> {
        &self.image_paths
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Consumes the dataset, returning its records in id order.
    pub fn into_records(self) -> Vec<ImageRecord> {
        self.records
    }

    /// Returns a copy with the records replaced; paths and warnings carry over.
    pub fn replace_records(&self, records: Vec<ImageRecord>) -> Result<Self> {
        Ok(Dataset::from_records(records)?
            .with_image_paths(self.image_paths.clone())
            .with_warnings(self.warnings.clone()))
    }
}

/// Access to RGB pixels of dataset images.
pub trait ImageSource: Sync {
    fn load_rgb(&self, record: &ImageRecord) -> Result<RgbImage>;
}

impl ImageSource for Dataset {
    fn load_rgb(&self, record: &ImageRecord) -> Result<RgbImage> {
        let path = self.image_path(&record.image_id).ok_or_else(|| {
            Error::Data(format!("no image file registered for '{}'", record.image_id))
        })?;
        read_rgb(path)
    }
}

/// In-memory images keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct MemoryImages(pub HashMap<String, RgbImage>);

impl MemoryImages {
    pub fn insert(&mut self, image_id: impl Into<String>, image: RgbImage) {
        self.0.insert(image_id.into(), image);
    }
}

impl ImageSource for MemoryImages {
    fn load_rgb(&self, record: &ImageRecord) -> Result<RgbImage> {
        self.0
            .get(&record.image_id)
            .cloned()
            .ok_or_else(|| Error::Data(format!("no pixels for '{}'", record.image_id)))
    }
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| image_error(path, source))
}

fn image_error(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Every image has a sibling or nearby VOC XML file with the same stem.
    TrainWithXml,
    /// Images only; records carry no annotations.
    TestImagesOnly,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub parse: ParseOptions,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

/// Loads every image under `root` (recursively).
///
/// For [`Layout::TrainWithXml`] each image must have an `.xml` file with the
/// same stem somewhere under `root` (GRDDC ships them in `annotations/xmls/`).
/// Files are parsed in parallel; the result is sorted by image id and does not
/// depend on directory enumeration order.
pub fn load_dataset(root: &Path, layout: Layout, options: &LoadOptions) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
        ));
    }
    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut xmls: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let (Some(stem), Some(ext)) = (
            path.file_stem().and_then(|s| s.to_str()),
            path.extension().and_then(|s| s.to_str()),
        ) else {
            continue;
        };
        let ext = ext.to_ascii_lowercase();
        let target = if IMAGE_EXTENSIONS.contains(&ext.as_str()) {
            &mut images
        } else if ext == "xml" {
            &mut xmls
        } else {
            continue;
        };
        if let Some(prev) = target.insert(stem.to_string(), path.to_path_buf()) {
            return Err(Error::Data(format!(
                "duplicate image id '{stem}': '{}' and '{}'",
                prev.display(),
                path.display()
            )));
        }
    }

    let loaded: Vec<Result<(ImageRecord, Vec<Warning>)>> = images
        .par_iter()
        .map(|(id, path)| load_one(id, path, xmls.get(id), layout, options))
        .collect();

    let mut records = Vec::with_capacity(loaded.len());
    let mut warnings = Vec::new();
    for item in loaded {
        let (record, w) = item?;
        records.push(record);
        warnings.extend(w);
    }
    Ok(Dataset::from_records(records)?
        .with_image_paths(images)
        .with_warnings(warnings))
}

fn load_one(
    image_id: &str,
    image_path: &Path,
    xml_path: Option<&PathBuf>,
    layout: Layout,
    options: &LoadOptions,
) -> Result<(ImageRecord, Vec<Warning>)> {
    let (width, height) =
        image::image_dimensions(image_path).map_err(|e| image_error(image_path, e))?;
    let file_name = image_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(image_id)
        .to_string();
    match layout {
        Layout::TestImagesOnly => {
            let record = ImageRecord::new(image_id, width, height, Vec::new())?.with_file_name(file_name);
            Ok((record, Vec::new()))
        }
        Layout::TrainWithXml => {
            let xml_path = xml_path.ok_or_else(|| {
                Error::Data(format!(
                    "missing XML annotation for image '{}'",
                    image_path.display()
                ))
            })?;
            let bytes = std::fs::read(xml_path).map_err(|e| Error::io(xml_path, e))?;
            let opts = ParseOptions {
                image_size: Some((width, height)),
                ..options.parse
            };
            let parsed = voc::parse_voc_annotation_with(&bytes, image_id, &opts)?;
            let record = parsed.record.with_file_name(file_name);
            Ok((record, parsed.warnings))
        }
    }
}
