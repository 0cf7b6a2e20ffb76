//! Run manifests, CSV emission, and a minimal SVG plot writer.
//!
//! Every output file begins with the run manifest as comment lines, so any
//! artifact can be traced back to the exact invocation that produced it.
//! Manifests contain no timestamps: identical invocations produce
//! byte-identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    /// Flag overrides as (name, value) pairs, in command-line order.
    pub overrides: Vec<(String, String)>,
    pub out_dir: String,
    /// Seed for any randomized checks (fixed default keeps runs reproducible).
    pub seed: u64,
    pub version: String,
}

impl RunManifest {
    /// Manifest rendered as comment lines with the given prefix.
    pub fn comment_lines(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix} tool: fcl {}", self.version);
        let _ = writeln!(s, "{prefix} command: {}", self.command);
        let _ = writeln!(s, "{prefix} config: {}", self.config_path);
        let ov = if self.overrides.is_empty() {
            "(none)".to_string()
        } else {
            self.overrides
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, "{prefix} overrides: {ov}");
        let _ = writeln!(s, "{prefix} out: {}", self.out_dir);
        let _ = writeln!(s, "{prefix} seed: {}", self.seed);
        s
    }
}

/// Writes a CSV file: manifest comments, one header row, then data rows.
pub fn write_csv(
    dir: &Path,
    name: &str,
    manifest: &RunManifest,
    header: &str,
    rows: &[String],
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(manifest.comment_lines("#").as_bytes())?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(path)
}

/// One plotted series: a label and its (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const ML: f64 = 70.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 50.0;
const MB: f64 = 55.0;
const COLORS: [&str; 4] = ["#1f6fb2", "#c44e52", "#2a9d52", "#8a5fbf"];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Writes a standalone SVG line plot: axes, 5 tick labels per axis, one
/// polyline per series, and a caption naming the checked claim.
pub fn write_svg(
    dir: &Path,
    name: &str,
    manifest: &RunManifest,
    caption: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series<'_>],
) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    for line in manifest.comment_lines("").lines() {
        let _ = writeln!(s, "<!--{} -->", line.replace("--", "- -"));
    }
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" font-family="monospace" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        xml_escape(caption)
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<line x1="{ML}" y1="{MT}" x2="{ML}" y2="{}" stroke="black"/>"#,
        H - MB
    );
    let _ = writeln!(
        s,
        r#"<line x1="{ML}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MB,
        W - MR,
        H - MB
    );
    // Ticks and labels.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = px(xv);
        let yp = py(yv);
        let _ = writeln!(
            s,
            r#"<line x1="{xp}" y1="{}" x2="{xp}" y2="{}" stroke="black"/>"#,
            H - MB,
            H - MB + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{xp}" y="{}" font-family="monospace" font-size="11" text-anchor="middle">{}</text>"#,
            H - MB + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{yp}" x2="{ML}" y2="{yp}" stroke="black"/>"#,
            ML - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="11" text-anchor="end">{}</text>"#,
            ML - 8.0,
            yp + 4.0,
            fmt_tick(yv)
        );
    }
    // Axis labels.
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="monospace" font-size="12" text-anchor="middle">{}</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0,
        xml_escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="monospace" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        xml_escape(ylabel)
    );
    // Series.
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        for &(x, y) in ser.points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="12" fill="{color}">{}</text>"#,
            W - MR - 180.0,
            MT + 16.0 * (k as f64 + 1.0),
            xml_escape(ser.label)
        );
    }
    let _ = writeln!(s, "</svg>");
    std::fs::write(&path, s)?;
    Ok(path)
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
