use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use rdd_core::augment::{
    build_location_bank, build_patch_bank, image_seed, AugmentationSchedule, JitterConfig,
    Synthesizer,
};
use rdd_core::dataset::{format_warning_log, read_rgb};
use rdd_core::evaluator::{
    default_grid, evaluate, sweep_thresholds, EvalConfig, PredictionSet, TSV_HEADER,
};
use rdd_core::formats::{merge_pseudo_labels, read_predictions, write_submission, SubmissionConfig};
use rdd_core::photometric::{photometric_augment, remap_annotations, PhotometricConfig};
use rdd_core::report::{self, ChartInputs, OverlaySpec};
use rdd_core::splitter::{stratified_split, SplitResult};
use rdd_core::stats::{
    aspect_ratio_histogram, box_area_histogram, channel_pixel_means, class_distribution,
    recommend_anchors, AreaScale,
};
use rdd_core::voc::{parse_voc_annotation_with, write_voc_annotation, ParseOptions};
use rdd_core::{
    load_dataset, BoundingBox, Country, DamageClass, Dataset, ImageRecord, Layout, LoadOptions,
    RgbImage, Warning,
};

use crate::args::*;
use crate::config::{require, FileConfig};
use crate::CliError;

const DEFAULT_BINS: usize = 20;

fn emit_warnings(warnings: &[Warning]) {
    if !warnings.is_empty() {
        eprint!("{}", format_warning_log(warnings));
    }
}

fn load(root: &Path, layout: Layout) -> Result<Dataset, CliError> {
    let ds = load_dataset(root, layout, &LoadOptions::default())?;
    emit_warnings(ds.warnings());
    Ok(ds)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn save_png(img: &RgbImage, path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    img.save(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn print_json(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON value serializes"));
}

fn per_country_json(f: impl Fn(Country) -> Value) -> Value {
    Value::Object(Country::ALL.iter().map(|&c| (c.to_string(), f(c))).collect())
}

pub fn stats(args: &StatsArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let layout = match args.layout {
        LayoutArg::Train => Layout::TrainWithXml,
        LayoutArg::Test => Layout::TestImagesOnly,
    };
    let ds = load(&root, layout)?;
    let dist = class_distribution(&ds);
    let mut out = json!({
        "images": per_country_json(|c| json!(ds.country_count(c))),
        "total_images": ds.len(),
        "annotations": ds.annotation_count(),
        "class_distribution": per_country_json(|c| {
            Value::Object(DamageClass::ALL.iter().map(|&k| (k.to_string(), json!(dist.get(c, k)))).collect())
        }),
        "warnings": ds.warnings().len(),
    });
    if args.pixel_means {
        let bgr = channel_pixel_means(&ds, &ds)?;
        out["pixel_means_bgr"] = json!(bgr);
    }
    if args.anchors {
        out["anchors"] = serde_json::to_value(recommend_anchors(&ds, 0.05, 0.95)?).expect("serializes");
    }
    if let Some(dir) = args.out.clone().or_else(|| cfg.out.clone()) {
        let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_BINS);
        let scale = match args.area_scale {
            AreaScaleArg::Area => AreaScale::Area,
            AreaScaleArg::Sqrt => AreaScale::SqrtArea,
        };
        write_file(&dir.join("area_histogram.csv"), box_area_histogram(&ds, bins, scale)?.to_csv())?;
        write_file(&dir.join("aspect_ratio_histogram.csv"), aspect_ratio_histogram(&ds, bins)?.to_csv())?;
    }
    print_json(&out);
    Ok(())
}

pub fn split(args: &SplitArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let fraction = require(args.fraction, &cfg.fraction, "fraction")?;
    let seed = require(args.seed, &cfg.seed, "seed")?;
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let ds = load(&root, Layout::TrainWithXml)?;
    let result = stratified_split(&ds, fraction, seed)?;
    result.write_to(&out)?;
    print!("{}", result.sidecar_json());
    Ok(())
}

struct Scoring {
    gt: Dataset,
    preds: PredictionSet,
    config: EvalConfig,
}

fn scoring_inputs(args: &ScoringArgs, cfg: &FileConfig) -> Result<Scoring, CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let preds_path = require(args.preds.clone(), &cfg.preds, "preds")?;
    let mut gt = load(&root, Layout::TrainWithXml)?;
    let mut preds = read_predictions(&preds_path)?;
    if let Some(subset) = &args.subset {
        let text = std::fs::read_to_string(subset)
            .map_err(|e| CliError::Io(format!("{}: {e}", subset.display())))?;
        let ids: HashSet<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if let Some(missing) = ids.iter().find(|id| !gt.contains(id)) {
            return Err(CliError::Data(format!("subset id '{missing}' is not in the dataset")));
        }
        // predictions for images outside the dataset stay, so unknown ids are still reported
        let mut filtered = PredictionSet::from_detections(
            preds
                .iter()
                .filter(|d| ids.contains(d.image_id.as_str()) || !gt.contains(&d.image_id))
                .cloned(),
        );
        filtered.provenance = preds.provenance.clone();
        preds = filtered;
        let kept: Vec<ImageRecord> = gt
            .records()
            .iter()
            .filter(|r| ids.contains(r.image_id.as_str()))
            .cloned()
            .collect();
        gt = gt.replace_records(kept)?;
    }
    let mut config = EvalConfig {
        strict: !args.lenient,
        apply_nms: !args.no_nms && cfg.nms.unwrap_or(true),
        ..EvalConfig::default()
    };
    if let Some(iou) = args.iou.or(cfg.iou) {
        config.iou_threshold = iou;
    }
    config.validate()?;
    Ok(Scoring { gt, preds, config })
}

pub fn eval(args: &EvalArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let s = scoring_inputs(&args.scoring, cfg)?;
    let threshold = args.threshold.or(cfg.threshold).unwrap_or(0.5);
    let report = evaluate(&s.preds, &s.gt, &s.config.with_threshold(threshold))?;
    emit_warnings(&report.warnings);
    if args.json {
        print!("{}", report.to_json());
        println!();
    } else {
        if args.header {
            println!("{TSV_HEADER}");
        }
        println!("{}", report.tsv_line());
    }
    Ok(())
}

pub fn sweep(args: &SweepArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let s = scoring_inputs(&args.scoring, cfg)?;
    let grid = args.grid.clone().unwrap_or_else(default_grid);
    let result = sweep_thresholds(&s.preds, &s.gt, &grid, &s.config)?;
    if let Some(first) = result.points.first() {
        emit_warnings(&first.warnings);
    }
    println!("{TSV_HEADER}");
    for p in &result.points {
        println!("{}", p.tsv_line());
    }
    let best = result.best();
    println!("# best threshold {} F1 {:.6}", best.threshold, best.f1());
    Ok(())
}

fn load_schedule(path: &Path) -> Result<AugmentationSchedule, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        AugmentationSchedule::from_csv(&text)?
    } else {
        AugmentationSchedule::from_json(&text)?
    })
}

/// Keeps photometric draws independent of the copy-paste draws for the same image.
const PHOTOMETRIC_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn augment(args: &AugmentArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let seed = require(args.seed, &cfg.seed, "seed")?;
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let schedule = match args.schedule.clone().or_else(|| cfg.schedule.clone()) {
        Some(path) => load_schedule(&path)?,
        None => AugmentationSchedule::balancing(),
    };
    let ds = load(&root, Layout::TrainWithXml)?;
    let synth = Synthesizer::new(
        build_patch_bank(&ds, &ds)?,
        build_location_bank(&ds),
        schedule,
        JitterConfig::default(),
    )?;
    let photometric = args.photometric.then(PhotometricConfig::default);
    create_dir(&out)?;

    let results: Vec<(usize, [u64; 4], Vec<Warning>)> = ds
        .records()
        .par_iter()
        .map(|r| -> Result<_, CliError> {
            let pixels = read_rgb(ds.image_path(&r.image_id).expect("loaded images have paths"))?;
            let s = synth.synthesize(r, &pixels, image_seed(seed, &r.image_id))?;
            let mut added = [0u64; 4];
            for a in s.synthetic(r) {
                added[a.cls.index()] += 1;
            }
            let mut warnings = s.warnings;
            let (mut image, mut record) = (s.image, s.record);
            if let Some(pcfg) = &photometric {
                let p = photometric_augment(&image, &r.image_id, image_seed(seed ^ PHOTOMETRIC_SEED_SALT, &r.image_id), pcfg)?;
                record.annotations = remap_annotations(&record.annotations, &p.applied, r.width, r.height);
                image = p.image;
                warnings.extend(p.warnings);
            }
            let record = record.with_file_name(format!("{}.png", r.image_id));
            save_png(&image, &out.join(&record.file_name))?;
            write_file(&out.join(format!("{}.xml", r.image_id)), write_voc_annotation(&record))?;
            Ok((record.annotations.len(), added, warnings))
        })
        .collect::<Result<_, _>>()?;

    let mut added = [0u64; 4];
    let mut annotations = 0;
    let mut warnings = Vec::new();
    for (n, a, w) in results {
        annotations += n;
        for k in 0..4 {
            added[k] += a[k];
        }
        warnings.extend(w);
    }
    emit_warnings(&warnings);
    print_json(&json!({
        "images": ds.len(),
        "annotations": annotations,
        "synthetic": Value::Object(DamageClass::ALL.iter().map(|k| (k.to_string(), json!(added[k.index()]))).collect()),
        "warnings": warnings.len(),
        "seed": seed,
    }));
    Ok(())
}

pub fn submit(args: &SubmitArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let preds_path = require(args.preds.clone(), &cfg.preds, "preds")?;
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let preds = read_predictions(&preds_path)?;
    let extra: Vec<String> = match &args.test_images {
        Some(dir) => load(dir, Layout::TestImagesOnly)?.records().iter().map(|r| r.image_id.clone()).collect(),
        None => Vec::new(),
    };
    let config = SubmissionConfig {
        score_threshold: args.threshold.or(cfg.threshold).unwrap_or(0.5),
        max_dets_per_image: args.max_dets,
        ..SubmissionConfig::default()
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_submission(&preds, &extra, &config, &out)?;
    Ok(())
}

pub fn merge_labels(args: &MergeArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let preds_path = require(args.preds.clone(), &cfg.preds, "preds")?;
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let confidence = args.confidence.or(cfg.confidence).unwrap_or(0.9);
    let mut ds = load(&root, Layout::TrainWithXml)?;
    if let Some(dir) = &args.unlabeled {
        let extra = load(dir, Layout::TestImagesOnly)?;
        let mut records = ds.records().to_vec();
        records.extend(extra.records().iter().cloned());
        ds = ds.replace_records(records)?;
    }
    let preds = read_predictions(&preds_path)?;
    let merged = merge_pseudo_labels(&ds, &preds, confidence, !args.lenient)?;
    emit_warnings(&merged.warnings);
    create_dir(&out)?;
    for r in merged.dataset.records() {
        write_file(&out.join(format!("{}.xml", r.image_id)), write_voc_annotation(r))?;
    }
    print_json(&json!({
        "images": merged.dataset.len(),
        "annotations": merged.dataset.annotation_count(),
        "added": merged.added,
    }));
    Ok(())
}

fn image_id_of(path: &Path) -> Result<String, CliError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(String::from)
        .ok_or_else(|| CliError::Usage(format!("cannot derive an image id from {}", path.display())))
}

pub fn report(cmd: &ReportCommand, cfg: &FileConfig) -> Result<(), CliError> {
    match cmd {
        ReportCommand::Overlay(a) => overlay(a, cfg),
        ReportCommand::Charts(a) => charts(a, cfg),
        ReportCommand::Probe(a) => probe(a, cfg),
    }
}

fn overlay(args: &OverlayArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let id = image_id_of(&args.image)?;
    let pixels = read_rgb(&args.image)?;
    let gts = match &args.xml {
        Some(path) => {
            let xml = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let opts = ParseOptions {
                image_size: Some(pixels.dimensions()),
                ..ParseOptions::default()
            };
            let parsed = parse_voc_annotation_with(&xml, &id, &opts)?;
            emit_warnings(&parsed.warnings);
            parsed.record.annotations
        }
        None => Vec::new(),
    };
    let threshold = args.threshold.or(cfg.threshold).unwrap_or(0.0);
    let preds = match args.preds.clone().or_else(|| cfg.preds.clone()) {
        Some(path) => read_predictions(&path)?
            .detections_for(&id)
            .iter()
            .filter(|d| d.score >= threshold)
            .cloned()
            .collect(),
        None => Vec::new(),
    };
    let spec = OverlaySpec {
        thickness: args.thickness,
        label_gt: args.label_gt,
        ..OverlaySpec::default()
    };
    save_png(&report::render_overlay(&pixels, &gts, &preds, &spec)?, &out)
}

fn charts(args: &ChartsArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let root = require(args.gt.clone(), &cfg.gt, "gt")?;
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let bins = args.bins.or(cfg.bins).unwrap_or(DEFAULT_BINS);
    let ds = load(&root, Layout::TrainWithXml)?;
    let dist = class_distribution(&ds);
    let split = args.split_dir.as_deref().map(SplitResult::read_from).transpose()?;
    let area = box_area_histogram(&ds, bins, AreaScale::Area)?;
    let sqrt_area = box_area_histogram(&ds, bins, AreaScale::SqrtArea)?;
    let ratio = aspect_ratio_histogram(&ds, bins)?;
    let inputs = ChartInputs {
        class_distribution: Some(&dist),
        split: split.as_ref(),
        histograms: vec![
            ("area_histogram", "Box area", "area (px^2)", &area),
            ("sqrt_area_histogram", "Box size", "sqrt(area) (px)", &sqrt_area),
            ("aspect_ratio_histogram", "Box aspect ratio", "height / width", &ratio),
        ],
    };
    for path in report::emit_charts(&inputs, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn probe(args: &ProbeArgs, cfg: &FileConfig) -> Result<(), CliError> {
    let out = require(args.out.clone(), &cfg.out, "out")?;
    let [x0, y0, x1, y1] = args.bbox[..] else {
        return Err(CliError::Usage("--box needs xmin,ymin,xmax,ymax".into()));
    };
    let bbox = BoundingBox::new(x0, y0, x1, y1)?;
    let pixels = read_rgb(&args.image)?;
    save_png(&report::render_brightness_probe(&pixels, &bbox, args.brightness, args.zoom)?, &out)
}
