//! CSV tables and hand-written SVG bar charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{Country, DamageClass};
use crate::error::{Error, Result};
use crate::splitter::SplitResult;
use crate::stats::{ClassDistribution, Histogram};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 64.0;
const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2"];

pub fn class_distribution_csv(dist: &ClassDistribution) -> String {
    let mut out = String::from("country,class,count\n");
    for c in Country::ALL {
        for k in DamageClass::ALL {
            let _ = writeln!(out, "{c},{k},{}", dist.get(c, k));
        }
    }
    out
}

/// Grouped bars: one group per country, one bar per class.
pub fn class_distribution_svg(dist: &ClassDistribution) -> String {
    let groups: Vec<String> = Country::ALL.iter().map(|c| c.to_string()).collect();
    let series: Vec<(String, Vec<f64>)> = DamageClass::ALL
        .iter()
        .map(|&k| {
            (
                k.to_string(),
                Country::ALL.iter().map(|&c| dist.get(c, k) as f64).collect(),
            )
        })
        .collect();
    bar_chart_svg("Damage instances per country and class", "country", &groups, &series)
}

pub fn split_distribution_csv(split: &SplitResult) -> String {
    let mut out = String::from("country,total,train,eval\n");
    for (c, s) in &split.strata {
        let _ = writeln!(out, "{c},{},{},{}", s.total, s.train, s.eval);
    }
    out
}

pub fn split_distribution_svg(split: &SplitResult) -> String {
    let groups: Vec<String> = split.strata.keys().map(|c| c.to_string()).collect();
    let series = vec![
        ("train".to_string(), split.strata.values().map(|s| s.train as f64).collect()),
        ("eval".to_string(), split.strata.values().map(|s| s.eval as f64).collect()),
    ];
    bar_chart_svg("Images per split and country", "country", &groups, &series)
}

/// One bar per bin, labelled with the bin's lower edge.
pub fn histogram_svg(hist: &Histogram, title: &str, x_label: &str) -> String {
    let groups: Vec<String> = hist.bin_edges[..hist.n_bins()]
        .iter()
        .map(|e| format!("{e:.2}"))
        .collect();
    let series = vec![("count".to_string(), hist.counts.iter().map(|&c| c as f64).collect())];
    bar_chart_svg(title, x_label, &groups, &series)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bar_chart_svg(title: &str, x_label: &str, groups: &[String], series: &[(String, Vec<f64>)]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let base_y = MARGIN_TOP + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{base_y:.2}" x2="{:.2}" y2="{base_y:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base_y:.2}" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let v = max * f64::from(tick) / 4.0;
        let y = base_y - plot_h * f64::from(tick) / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.0}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    for (gi, group) in groups.iter().enumerate() {
        let gx = MARGIN_LEFT + group_w * gi as f64 + group_w * 0.1;
        for (si, (name, values)) in series.iter().enumerate() {
            let v = values.get(gi).copied().unwrap_or(0.0);
            let h = plot_h * v / max;
            let _ = writeln!(
                s,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{}"><title>{} {}: {v}</title></rect>"#,
                gx + bar_w * si as f64,
                base_y - h,
                bar_w,
                PALETTE[si % PALETTE.len()],
                escape(group),
                escape(name)
            );
        }
        if groups.len() <= 24 {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                gx + group_w * 0.4,
                base_y + 16.0,
                escape(group)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    if series.len() > 1 {
        for (si, (name, _)) in series.iter().enumerate() {
            let x = WIDTH - MARGIN_RIGHT - 70.0;
            let y = MARGIN_TOP + 14.0 * si as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                PALETTE[si % PALETTE.len()],
                x + 14.0,
                y + 9.0,
                escape(name)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Everything [`emit_charts`] can draw; absent inputs are skipped.
#[derive(Debug, Default)]
pub struct ChartInputs<'a> {
    pub class_distribution: Option<&'a ClassDistribution>,
    pub split: Option<&'a SplitResult>,
    /// `(file stem, title, x-axis label, histogram)`.
    pub histograms: Vec<(&'a str, &'a str, &'a str, &'a Histogram)>,
}

/// Writes one CSV and one SVG per chart and returns the paths written.
pub fn emit_charts(inputs: &ChartInputs<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    if let Some(dist) = inputs.class_distribution {
        files.push(("class_distribution.csv".into(), class_distribution_csv(dist)));
        files.push(("class_distribution.svg".into(), class_distribution_svg(dist)));
    }
    if let Some(split) = inputs.split {
        files.push(("split_distribution.csv".into(), split_distribution_csv(split)));
        files.push(("split_distribution.svg".into(), split_distribution_svg(split)));
    }
    for (stem, title, x_label, hist) in &inputs.histograms {
        files.push((format!("{stem}.csv"), hist.to_csv()));
        files.push((format!("{stem}.svg"), histogram_svg(hist, title, x_label)));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
