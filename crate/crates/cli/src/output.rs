//! File writers: CSV tables, JSON metadata and bare SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// 17 significant digits: round-trips every `f64`.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// A column of a CSV table.
pub enum Column<'a> {
    Real(&'a [f64]),
    Int(&'a [usize]),
    Text(&'a [String]),
}

impl Column<'_> {
    fn len(&self) -> usize {
        match self {
            Column::Real(v) => v.len(),
            Column::Int(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Real(v) => fmt_real(v[i]),
            Column::Int(v) => v[i].to_string(),
            Column::Text(v) => v[i].clone(),
        }
    }
}

/// Header row then one row per index; comma separated, LF line endings.
pub fn write_csv(path: &Path, columns: &[(&str, Column<'_>)]) -> io::Result<()> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    assert!(columns.iter().all(|c| c.1.len() == rows), "ragged CSV columns");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(columns.iter().map(|c| c.0))?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c.1.cell(i)))?;
    }
    w.flush()
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Single-series line chart with min/max axis labels.
pub fn write_svg_line(path: &Path, title: &str, x_label: &str, xs: &[f64], ys: &[f64]) -> io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 60.0;
    let finite = |v: &[f64]| {
        v.iter().filter(|x| x.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (x0, x1) = finite(xs);
    let (y0, y1) = finite(ys);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let px = |x: f64| PAD + (x - x0) / span(x0, x1) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / span(y0, y1) * (H - 2.0 * PAD);

    let mut points = String::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(points, "{:.2},{:.2} ", px(x), py(y));
        }
    }
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, points.trim_end());
    let text = |svg: &mut String, x: f64, y: f64, anchor: &str, s: &str| {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{s}</text>"#);
    };
    text(&mut svg, W / 2.0, PAD / 2.0, "middle", &escape(title));
    text(&mut svg, W / 2.0, H - 15.0, "middle", &escape(x_label));
    text(&mut svg, PAD, H - PAD + 16.0, "start", &format!("{x0:.4}"));
    text(&mut svg, W - PAD, H - PAD + 16.0, "end", &format!("{x1:.4}"));
    text(&mut svg, PAD - 4.0, H - PAD, "end", &format!("{y0:.4}"));
    text(&mut svg, PAD - 4.0, PAD + 4.0, "end", &format!("{y1:.4}"));
    svg.push_str("</svg>\n");
    fs::write(path, svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Output directory that remembers which files were written.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_owned(), written: Vec::new() })
    }

    /// Path for `name`, recorded in the file list.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_owned());
        self.root.join(name)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}
