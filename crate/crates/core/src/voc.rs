//! PASCAL VOC-style annotation reader and writer.

use quick_xml::escape::escape;
use serde::Deserialize;

use crate::dataset::{Annotation, DamageClass, ImageRecord, Warning, WarningCode};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// What to do with objects whose class is not one of the four scored types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum UnknownClassPolicy {
    /// Drop the object and record a warning.
    #[default]
    SkipObject,
    /// Fail the whole file.
    RejectFile,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub unknown_class: UnknownClassPolicy,
    /// Dimensions read from the image itself; they take precedence over the
    /// `<size>` element and fill in for a missing one.
    pub image_size: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedAnnotation {
    pub record: ImageRecord,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    filename: Option<String>,
    size: Option<RawSize>,
    #[serde(rename = "object", default)]
    objects: Vec<RawObject>,
}

#[derive(Debug, Deserialize)]
struct RawSize {
    width: Option<String>,
    height: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawObject {
    name: Option<String>,
    bndbox: Option<RawBndBox>,
    pseudo: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawBndBox {
    xmin: String,
    ymin: String,
    xmax: String,
    ymax: String,
}

/// Parses with the default options (skip unknown classes, size from XML).
pub fn parse_voc_annotation(xml: &[u8], image_id: &str) -> Result<ParsedAnnotation> {
    parse_voc_annotation_with(xml, image_id, &ParseOptions::default())
}

pub fn parse_voc_annotation_with(
    xml: &[u8],
    image_id: &str,
    options: &ParseOptions,
) -> Result<ParsedAnnotation> {
    let malformed = |message: String| Error::Xml {
        image_id: image_id.to_string(),
        message,
    };
    let text = std::str::from_utf8(xml).map_err(|e| malformed(format!("not UTF-8: {e}")))?;
    let raw: RawAnnotation =
        quick_xml::de::from_str(text).map_err(|e| malformed(e.to_string()))?;

    let mut warnings = Vec::new();
    let xml_size = match &raw.size {
        Some(RawSize {
            width: Some(w),
            height: Some(h),
        }) => {
            let w = parse_dimension(w).ok_or_else(|| malformed(format!("bad width '{w}'")))?;
            let h = parse_dimension(h).ok_or_else(|| malformed(format!("bad height '{h}'")))?;
            Some((w, h)).filter(|&(w, h)| w > 0 && h > 0)
        }
        _ => None,
    };
    let (width, height) = match (options.image_size, xml_size) {
        (Some(actual), Some(declared)) => {
            if actual != declared {
                warnings.push(Warning::new(
                    image_id,
                    WarningCode::SizeMismatch,
                    format!(
                        "XML declares {}x{}, image is {}x{}",
                        declared.0, declared.1, actual.0, actual.1
                    ),
                ));
            }
            actual
        }
        (Some(actual), None) => actual,
        (None, Some(declared)) => declared,
        (None, None) => return Err(malformed("missing or zero <size> width/height".into())),
    };

    let mut annotations = Vec::with_capacity(raw.objects.len());
    for (n, obj) in raw.objects.iter().enumerate() {
        let name = obj
            .name
            .as_deref()
            .map(str::trim)
            .ok_or_else(|| malformed(format!("object {n} has no <name>")))?;
        let bndbox = obj
            .bndbox
            .as_ref()
            .ok_or_else(|| malformed(format!("object {n} has no <bndbox>")))?;
        let cls = match name.parse::<DamageClass>() {
            Ok(cls) => cls,
            Err(e) => match options.unknown_class {
                UnknownClassPolicy::RejectFile => return Err(e),
                UnknownClassPolicy::SkipObject => {
                    warnings.push(Warning::new(
                        image_id,
                        WarningCode::UnknownClass,
                        format!("object {n}: class '{name}' skipped"),
                    ));
                    continue;
                }
            },
        };

        let mut coords = [0i64; 4];
        for (slot, raw_value) in coords.iter_mut().zip([
            &bndbox.xmin,
            &bndbox.ymin,
            &bndbox.xmax,
            &bndbox.ymax,
        ]) {
            let value: f64 = raw_value
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| malformed(format!("object {n}: bad coordinate '{raw_value}'")))?;
            let rounded = value.round();
            if rounded != value {
                warnings.push(Warning::new(
                    image_id,
                    WarningCode::NonIntegerCoordinate,
                    format!("object {n}: coordinate {value} rounded to {rounded}"),
                ));
            }
            *slot = rounded as i64;
        }
        let [xmin, ymin, xmax, ymax] = coords;
        if xmin >= xmax || ymin >= ymax {
            warnings.push(Warning::new(
                image_id,
                WarningCode::DegenerateBox,
                format!("object {n}: box ({xmin}, {ymin}, {xmax}, {ymax}) has zero area"),
            ));
            continue;
        }
        let clamp = |v: i64, hi: u32| v.clamp(0, i64::from(hi)) as u32;
        let (cx0, cy0, cx1, cy1) = (
            clamp(xmin, width),
            clamp(ymin, height),
            clamp(xmax, width),
            clamp(ymax, height),
        );
        let Ok(bbox) = BoundingBox::new(cx0, cy0, cx1, cy1) else {
            warnings.push(Warning::new(
                image_id,
                WarningCode::BoxOutsideImage,
                format!("object {n}: box ({xmin}, {ymin}, {xmax}, {ymax}) lies outside {width}x{height}"),
            ));
            continue;
        };
        if [cx0, cy0, cx1, cy1].map(i64::from) != coords {
            warnings.push(Warning::new(
                image_id,
                WarningCode::BoxClamped,
                format!("object {n}: box ({xmin}, {ymin}, {xmax}, {ymax}) clamped to {bbox}"),
            ));
        }
        let pseudo = obj.pseudo.as_deref().map(str::trim) == Some("1");
        annotations.push(Annotation { cls, bbox, pseudo });
    }

    let record = ImageRecord::new(image_id, width, height, annotations)?;
    let record = match raw.filename.as_deref().map(str::trim).filter(|f| !f.is_empty()) {
        Some(f) => record.with_file_name(f),
        None => record,
    };
    Ok(ParsedAnnotation { record, warnings })
}

fn parse_dimension(s: &str) -> Option<u32> {
    let v: f64 = s.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX)).then_some(v as u32)
}

/// Serializes a record in the same VOC layout the GRDDC files use. Pseudo
/// labels carry an extra `<pseudo>1</pseudo>` element that other VOC tools
/// ignore.
pub fn write_voc_annotation(record: &ImageRecord) -> String {
    let mut out = String::new();
    out.push_str("<annotation>\n");
    out.push_str(&format!("\t<filename>{}</filename>\n", escape(record.file_name.as_str())));
    out.push_str("\t<size>\n");
    out.push_str(&format!("\t\t<width>{}</width>\n", record.width));
    out.push_str(&format!("\t\t<height>{}</height>\n", record.height));
    out.push_str("\t\t<depth>3</depth>\n");
    out.push_str("\t</size>\n");
    for a in &record.annotations {
        out.push_str("\t<object>\n");
        out.push_str(&format!("\t\t<name>{}</name>\n", a.cls));
        out.push_str("\t\t<pose>Unspecified</pose>\n");
        out.push_str("\t\t<truncated>0</truncated>\n");
        out.push_str("\t\t<difficult>0</difficult>\n");
        if a.pseudo {
            out.push_str("\t\t<pseudo>1</pseudo>\n");
        }
        out.push_str("\t\t<bndbox>\n");
        out.push_str(&format!("\t\t\t<xmin>{}</xmin>\n", a.bbox.xmin()));
        out.push_str(&format!("\t\t\t<ymin>{}</ymin>\n", a.bbox.ymin()));
        out.push_str(&format!("\t\t\t<xmax>{}</xmax>\n", a.bbox.xmax()));
        out.push_str(&format!("\t\t\t<ymax>{}</ymax>\n", a.bbox.ymax()));
        out.push_str("\t\t</bndbox>\n");
        out.push_str("\t</object>\n");
    }
    out.push_str("</annotation>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Country;

    fn xml(objects: &[(&str, [&str; 4])]) -> String {
        let mut s = String::from(
            "<annotation>\n<folder>images</folder>\n<filename>Czech_000001.jpg</filename>\n\
             <size><width>600</width><height>600</height><depth>3</depth></size>\n",
        );
        for (name, [x0, y0, x1, y1]) in objects {
            s.push_str(&format!(
                "<object><name>{name}</name><pose>Unspecified</pose><truncated>0</truncated>\
                 <difficult>0</difficult><bndbox><xmin>{x0}</xmin><ymin>{y0}</ymin>\
                 <xmax>{x1}</xmax><ymax>{y1}</ymax></bndbox></object>\n"
            ));
        }
        s.push_str("</annotation>\n");
        s
    }

    #[test]
    fn single_object() {
        let doc = xml(&[("D20", ["10", "20", "110", "220"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        let r = parsed.record;
        assert_eq!(r.country, Country::Czech);
        assert_eq!((r.width, r.height), (600, 600));
        assert_eq!(
            r.annotations,
            vec![Annotation::new(DamageClass::D20, BoundingBox::new(10, 20, 110, 220).unwrap())]
        );
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn zero_objects() {
        let parsed = parse_voc_annotation(xml(&[]).as_bytes(), "Czech_000001").unwrap();
        assert!(parsed.record.annotations.is_empty());
    }

    #[test]
    fn unknown_class_skipped_with_warning() {
        let doc = xml(&[("D20", ["10", "20", "110", "220"]), ("D44", ["1", "1", "5", "5"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        assert_eq!(parsed.record.annotations.len(), 1);
        assert_eq!(parsed.record.annotations[0].cls, DamageClass::D20);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].code, WarningCode::UnknownClass);
        assert!(parsed.warnings[0].detail.contains("D44"));
    }

    #[test]
    fn unknown_class_rejected_in_strict_mode() {
        let doc = xml(&[("D44", ["1", "1", "5", "5"])]);
        let opts = ParseOptions {
            unknown_class: UnknownClassPolicy::RejectFile,
            ..Default::default()
        };
        assert!(matches!(
            parse_voc_annotation_with(doc.as_bytes(), "Czech_000001", &opts),
            Err(Error::UnknownClass(_))
        ));
    }

    #[test]
    fn degenerate_box_dropped() {
        let doc = xml(&[("D00", ["10", "20", "10", "220"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        assert!(parsed.record.annotations.is_empty());
        assert_eq!(parsed.warnings[0].code, WarningCode::DegenerateBox);
    }

    #[test]
    fn overshooting_box_clamped() {
        let doc = xml(&[("D00", ["590", "-2", "603", "40"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        assert_eq!(parsed.record.annotations[0].bbox, BoundingBox::new(590, 0, 600, 40).unwrap());
        assert_eq!(parsed.warnings[0].code, WarningCode::BoxClamped);
    }

    #[test]
    fn box_entirely_outside_dropped() {
        let doc = xml(&[("D00", ["600", "10", "640", "40"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        assert!(parsed.record.annotations.is_empty());
        assert_eq!(parsed.warnings[0].code, WarningCode::BoxOutsideImage);
    }

    #[test]
    fn fractional_coordinates_rounded() {
        let doc = xml(&[("D10", ["10.0", "20.4", "110", "220"])]);
        let parsed = parse_voc_annotation(doc.as_bytes(), "Czech_000001").unwrap();
        assert_eq!(parsed.record.annotations[0].bbox, BoundingBox::new(10, 20, 110, 220).unwrap());
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].code, WarningCode::NonIntegerCoordinate);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            parse_voc_annotation(b"<annotation><size>", "Czech_000001"),
            Err(Error::Xml { .. })
        ));
        let no_size = "<annotation><object><name>D00</name></object></annotation>";
        assert!(parse_voc_annotation(no_size.as_bytes(), "Czech_000001").is_err());
        let doc = xml(&[("D00", ["a", "1", "5", "5"])]);
        assert!(parse_voc_annotation(doc.as_bytes(), "Czech_000001").is_err());
        assert!(matches!(
            parse_voc_annotation(xml(&[]).as_bytes(), "Mars_000001"),
            Err(Error::UnknownCountry(_))
        ));
    }

    #[test]
    fn image_size_overrides_declared_size() {
        let opts = ParseOptions {
            image_size: Some((720, 720)),
            ..Default::default()
        };
        let parsed = parse_voc_annotation_with(xml(&[]).as_bytes(), "India_000001", &opts).unwrap();
        assert_eq!((parsed.record.width, parsed.record.height), (720, 720));
        assert_eq!(parsed.warnings[0].code, WarningCode::SizeMismatch);
    }

    #[test]
    fn writer_output_reparses() {
        let record = ImageRecord::new(
            "Japan_000042",
            600,
            600,
            vec![
                Annotation::new(DamageClass::D40, BoundingBox::new(1, 2, 3, 4).unwrap()),
                Annotation::pseudo(DamageClass::D00, BoundingBox::new(0, 0, 600, 600).unwrap()),
            ],
        )
        .unwrap()
        .with_file_name("Japan_000042.png");
        let text = write_voc_annotation(&record);
        let back = parse_voc_annotation(text.as_bytes(), "Japan_000042").unwrap();
        assert_eq!(back.record, record);
        assert!(back.warnings.is_empty());
    }
}
