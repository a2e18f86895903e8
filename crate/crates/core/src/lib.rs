//! Dataset toolkit and scoring harness for three-country road-damage
//! detection: VOC loading, data exploration statistics, stratified splits,
//! F1/IoU evaluation, copy-paste augmentation, file formats and figures.

pub mod augment;
pub mod color;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod formats;
pub mod geometry;
pub mod photometric;
pub mod report;
pub mod splitter;
pub mod stats;
pub mod voc;

pub use dataset::{
    load_dataset, Annotation, Country, DamageClass, Dataset, ImageRecord, ImageSource, Layout,
    LoadOptions, MemoryImages, Warning, WarningCode,
};
pub use error::{Error, Result};
pub use geometry::{iou, BoundingBox};
pub use image::{Rgb, RgbImage};
