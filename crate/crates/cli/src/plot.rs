//! Static PNG figures for a run directory, plus a markdown summary holding
//! the numbers the figures show. Figures carry no text; the summary is the
//! legend.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use image::{Rgb, RgbImage};

use fgvl_core::evaluator::EvalReport;
use fgvl_core::model::LogRecord;

use crate::commands::SimilarityExamples;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([60, 60, 60]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const BLUE: Rgb<u8> = Rgb([49, 104, 172]);
const ORANGE: Rgb<u8> = Rgb([230, 136, 40]);
const GREY: Rgb<u8> = Rgb([160, 160, 160]);

struct Canvas {
    img: RgbImage,
    // plot area in pixels
    left: u32,
    top: u32,
    right: u32,
    bottom: u32,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Self {
        let mut img = RgbImage::from_pixel(width, height, WHITE);
        let (left, top, right, bottom) = (40, 20, width - 20, height - 30);
        for k in 0..=4 {
            let y = bottom - (bottom - top) * k / 4;
            for x in left..=right {
                img.put_pixel(x, y, GRID);
            }
        }
        for x in left..=right {
            img.put_pixel(x, bottom, AXIS);
        }
        for y in top..=bottom {
            img.put_pixel(left, y, AXIS);
        }
        Self {
            img,
            left,
            top,
            right,
            bottom,
        }
    }

    fn width(&self) -> f64 {
        (self.right - self.left) as f64
    }

    fn height(&self) -> f64 {
        (self.bottom - self.top) as f64
    }

    /// Map `(fx, fy)` in `[0, 1]²` to pixels, origin at the bottom left.
    fn at(&self, fx: f64, fy: f64) -> (i64, i64) {
        let x = self.left as f64 + fx.clamp(0.0, 1.0) * self.width();
        let y = self.bottom as f64 - fy.clamp(0.0, 1.0) * self.height();
        (x.round() as i64, y.round() as i64)
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, c);
        }
    }

    fn line(&mut self, a: (i64, i64), b: (i64, i64), c: Rgb<u8>) {
        let (mut x, mut y) = a;
        let dx = (b.0 - x).abs();
        let dy = -(b.1 - y).abs();
        let sx = if x < b.0 { 1 } else { -1 };
        let sy = if y < b.1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x, y, c);
            self.put(x, y + 1, c);
            if (x, y) == b {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Bar spanning `[x0, x1]` horizontally and `[0, v]` vertically, all in unit coordinates.
    fn bar(&mut self, x0: f64, x1: f64, v: f64, c: Rgb<u8>) {
        let (px0, py) = self.at(x0, v);
        let (px1, py0) = self.at(x1, 0.0);
        for x in px0..px1.max(px0 + 1) {
            for y in py..py0 {
                self.put(x, y, c);
            }
        }
    }

    fn save(&self, path: &Path) -> anyhow::Result<()> {
        self.img.save(path).with_context(|| format!("writing {}", path.display()))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `name` in `dir` or one level below, in sorted order.
fn find(dir: &Path, name: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let direct = dir.join(name);
    if direct.is_file() {
        out.push(direct);
    }
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subdirs: Vec<PathBuf> = entries.flatten().map(|e| e.path()).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        out.extend(subdirs.into_iter().map(|d| d.join(name)).filter(|p| p.is_file()));
    }
    out
}

fn label_of(run_dir: &Path, file: &Path) -> String {
    let parent = file.parent().unwrap_or(run_dir);
    match parent.strip_prefix(run_dir) {
        Ok(rel) if !rel.as_os_str().is_empty() => rel.to_string_lossy().replace(['/', '\\'], "_"),
        _ => "run".to_string(),
    }
}

fn loss_figure(records: &[LogRecord], path: &Path) -> anyhow::Result<()> {
    let mut c = Canvas::new(640, 360);
    let losses: Vec<f64> = records.iter().map(|r| r.loss).filter(|l| l.is_finite()).collect();
    if losses.len() >= 2 {
        let hi = losses.iter().cloned().fold(f64::MIN, f64::max);
        let lo = losses.iter().cloned().fold(f64::MAX, f64::min).min(0.0);
        let span = (hi - lo).max(1e-12);
        let n = (losses.len() - 1) as f64;
        let pts: Vec<(i64, i64)> = losses
            .iter()
            .enumerate()
            .map(|(i, l)| c.at(i as f64 / n, (l - lo) / span))
            .collect();
        for w in pts.windows(2) {
            c.line(w[0], w[1], BLUE);
        }
    }
    c.save(path)
}

fn class_figure(report: &EvalReport, path: &Path) -> anyhow::Result<()> {
    let mut c = Canvas::new(120 + 60 * report.per_class.len() as u32, 360);
    let n = report.per_class.len().max(1) as f64;
    for (i, m) in report.per_class.iter().enumerate() {
        let x = i as f64 / n;
        let w = 1.0 / n;
        c.bar(x + 0.15 * w, x + 0.5 * w, m.f1, BLUE);
        c.bar(x + 0.5 * w, x + 0.85 * w, m.accuracy, ORANGE);
    }
    c.save(path)
}

fn similarity_figure(ex: &SimilarityExamples, path: &Path) -> anyhow::Result<()> {
    let k = ex.classes.len().max(1);
    let rows = ex.rows.len().max(1);
    let panel_w = (24 * k as u32).max(160);
    let mut img = RgbImage::from_pixel(panel_w * 2 + 60, 170 * rows.div_ceil(2) as u32 + 20, WHITE);
    for (r, row) in ex.rows.iter().enumerate() {
        let mut c = Canvas::new(panel_w + 30, 170);
        for (j, (class, s)) in ex.classes.iter().zip(&row.scores).enumerate() {
            let colour = if row.gold.iter().any(|g| g == class) { ORANGE } else { GREY };
            let x = j as f64 / k as f64;
            // cosine in [-1, 1] drawn on [0, 1]
            c.bar(x + 0.1 / k as f64, x + 0.9 / k as f64, (s + 1.0) / 2.0, colour);
        }
        let (ox, oy) = ((r % 2) as u32 * (panel_w + 30), (r / 2) as u32 * 170 + 10);
        image::imageops::overlay(&mut img, &c.img, ox as i64, oy as i64);
    }
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

fn report_table(title: &str, report: &EvalReport, md: &mut String) {
    let _ = writeln!(md, "## {title}\n");
    let _ = writeln!(
        md,
        "macro F1 {:.4}, macro accuracy {:.4}, {} samples\n",
        report.macro_f1, report.macro_accuracy, report.n_samples
    );
    let _ = writeln!(md, "| class | F1 | accuracy | positives |\n|---|---|---|---|");
    for m in &report.per_class {
        let _ = writeln!(md, "| {} | {:.4} | {:.4} | {} |", m.class, m.f1, m.accuracy, m.positives);
    }
    for (k, v) in &report.extras {
        let _ = writeln!(md, "\n`{k}` = {v:.4}");
    }
    md.push('\n');
}

/// Write every figure the run directory has data for; returns written paths.
pub fn render_run(run_dir: &Path, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut md = format!("# Run report: {}\n\n", run_dir.display());

    for log in find(run_dir, "train_log.jsonl") {
        let text = fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<LogRecord>, _>>()
            .with_context(|| format!("parsing {}", log.display()))?;
        let path = out.join(format!("loss_{}.png", label_of(run_dir, &log)));
        loss_figure(&records, &path)?;
        let _ = writeln!(
            md,
            "## Training loss (`{}`)\n\n{} steps, first {:.4}, last {:.4}. Figure: blue line, loss against step, scaled to its range.\n",
            path.file_name().unwrap().to_string_lossy(),
            records.len(),
            records.first().map_or(f64::NAN, |r| r.loss),
            records.last().map_or(f64::NAN, |r| r.loss),
        );
        written.push(path);
    }

    for file in ["eval_report.json", "unseen_explanation.json", "unseen_category.json", "probe_report.json"] {
        for src in find(run_dir, file) {
            let report: EvalReport = read_json(&src)?;
            let stem = file.trim_end_matches(".json");
            let path = out.join(format!("{stem}_{}.png", label_of(run_dir, &src)));
            class_figure(&report, &path)?;
            report_table(
                &format!("{stem} (`{}`; blue F1, orange accuracy, classes in table order)", path.file_name().unwrap().to_string_lossy()),
                &report,
                &mut md,
            );
            written.push(path);
        }
    }

    for src in find(run_dir, "similarity_examples.json") {
        let ex: SimilarityExamples = read_json(&src)?;
        let path = out.join(format!("similarity_{}.png", label_of(run_dir, &src)));
        similarity_figure(&ex, &path)?;
        let _ = writeln!(
            md,
            "## Image-class similarity (`{}`)\n\nOne panel per image, one bar per class in order {:?}; orange bars are gold classes.\n",
            path.file_name().unwrap().to_string_lossy(),
            ex.classes
        );
        for row in &ex.rows {
            let scores: Vec<String> = row.scores.iter().map(|s| format!("{s:.3}")).collect();
            let _ = writeln!(md, "- {} (gold {:?}): {}", row.id, row.gold, scores.join(", "));
        }
        md.push('\n');
        written.push(path);
    }

    if !written.is_empty() {
        let path = out.join("summary.md");
        fs::write(&path, md).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
