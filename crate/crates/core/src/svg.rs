//! Self-contained SVG figures: combined-correlation line charts and
//! quality/citation scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::engine::{ArticleSet, PointStatus};
use crate::error::{Error, Result};
use crate::results::{format_sig6, ResultRow};
use crate::seed::Seed;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

pub const JITTER: f64 = 0.3;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from a data range onto a pixel range.
#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

struct Canvas {
    out: String,
    x: Scale,
    y: Scale,
}

impl Canvas {
    fn new(title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="25" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            escape(title)
        )
        .unwrap();
        Self {
            out,
            x: Scale {
                d0: x.0,
                d1: x.1,
                p0: LEFT,
                p1: WIDTH - RIGHT,
            },
            y: Scale {
                d0: y.0,
                d1: y.1,
                p0: HEIGHT - BOTTOM,
                p1: TOP,
            },
        }
    }

    fn frame(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = (self.x.p0, self.x.p1);
        let (y0, y1) = (self.y.p0, self.y.p1);
        writeln!(
            self.out,
            r#"<rect x="{x0:.1}" y="{y1:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
            x1 - x0,
            y0 - y1,
            (x0 + x1) / 2.0,
            HEIGHT - 18.0,
            escape(x_label),
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        )
        .unwrap();
    }

    fn x_tick(&mut self, v: f64, label: &str) {
        let px = self.x.at(v);
        let y0 = self.y.p0;
        writeln!(
            self.out,
            r#"<line x1="{px:.1}" y1="{y0:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 20.0,
            escape(label)
        )
        .unwrap();
    }

    fn y_gridline(&mut self, v: f64, label: &str) {
        let py = self.y.at(v);
        writeln!(
            self.out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            self.x.p0,
            self.x.p1,
            self.x.p0 - 6.0,
            py + 4.0,
            escape(label)
        )
        .unwrap();
    }

    fn legend_entry(&mut self, index: usize, color: &str, marker: Marker, label: &str) {
        let x = WIDTH - RIGHT + 20.0;
        let y = TOP + 10.0 + 20.0 * index as f64;
        marker.draw(&mut self.out, x + 8.0, y, color);
        writeln!(
            self.out,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 22.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

#[derive(Clone, Copy)]
enum Marker {
    Circle,
    Square,
}

impl Marker {
    fn draw(self, out: &mut String, x: f64, y: f64, color: &str) {
        match self {
            Marker::Circle => writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}" fill-opacity="0.6"/>"#
            ),
            Marker::Square => writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="5" height="5" fill="{color}" fill-opacity="0.6"/>"#,
                x - 2.5,
                y - 2.5
            ),
        }
        .unwrap();
    }
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Check that rows form one configuration and a full set-2 rho × mean rectangle.
fn check_slice(rows: &[ResultRow]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = rows
        .first()
        .ok_or_else(|| Error::NonRectangular("no rows".into()))?;
    for r in rows {
        if r.distribution != first.distribution
            || r.relationship != first.relationship
            || r.set1_mean != first.set1_mean
            || r.set1_rho != first.set1_rho
        {
            return Err(Error::NonRectangular(
                "rows mix configurations or set-1 parameters".into(),
            ));
        }
    }
    let mut rhos: Vec<f64> = rows.iter().map(|r| r.set2_rho).collect();
    let mut means: Vec<f64> = rows.iter().map(|r| r.set2_mean).collect();
    for v in [&mut rhos, &mut means] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let mut seen = BTreeMap::new();
    for r in rows {
        if seen
            .insert((r.set2_rho.to_bits(), r.set2_mean.to_bits()), ())
            .is_some()
        {
            return Err(Error::NonRectangular(format!(
                "duplicate cell set2_rho {} set2_mean {}",
                r.set2_rho, r.set2_mean
            )));
        }
    }
    if seen.len() != rhos.len() * means.len() {
        return Err(Error::NonRectangular(format!(
            "{} cells present, {} × {} expected",
            seen.len(),
            rhos.len(),
            means.len()
        )));
    }
    Ok((rhos, means))
}

/// Line chart of combined rho against set-2 mean, one series per set-2 rho.
///
/// Skipped cells break a series; isolated points are drawn as markers.
pub fn render_line_figure(rows: &[ResultRow]) -> Result<String> {
    let (rhos, means) = check_slice(rows)?;
    let first = &rows[0];
    let x_max = means.last().copied().unwrap_or(40.0).max(40.0);
    let y_min = rows
        .iter()
        .filter_map(|r| r.combined_rho_mean)
        .fold(0.0f64, f64::min);
    let y_min = (y_min * 10.0).floor() / 10.0;
    let title = format!(
        "{} quality, {} relationship: set 1 mean {}, rho {}",
        first.distribution,
        first.relationship,
        format_sig6(first.set1_mean),
        format_sig6(first.set1_rho)
    );
    let mut c = Canvas::new(&title, (0.0, x_max), (y_min, 1.0));

    let mut tick = (y_min * 10.0).round() as i64;
    while tick <= 10 {
        let v = tick as f64 / 10.0;
        c.y_gridline(v, &format!("{v:.1}"));
        tick += 1;
    }
    let step = if x_max <= 40.0 {
        5.0
    } else {
        (x_max / 8.0).ceil()
    };
    let mut v = 0.0;
    while v <= x_max + 1e-9 {
        c.x_tick(v, &format_sig6(v));
        v += step;
    }
    c.frame("Set 2 mean citations", "Combined Spearman correlation");

    for (i, &rho) in rhos.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut series: Vec<&ResultRow> = rows.iter().filter(|r| r.set2_rho == rho).collect();
        series.sort_by(|a, b| a.set2_mean.total_cmp(&b.set2_mean));
        writeln!(
            c.out,
            r#"<g class="series" data-set2-rho="{}">"#,
            format_sig6(rho)
        )
        .unwrap();
        let runs = series.split(|r| r.status != PointStatus::Ok || r.combined_rho_mean.is_none());
        for run in runs.filter(|r| !r.is_empty()) {
            let pts: Vec<(f64, f64)> = run
                .iter()
                .map(|r| {
                    (
                        c.x.at(r.set2_mean),
                        c.y.at(r.combined_rho_mean.unwrap_or(0.0)),
                    )
                })
                .collect();
            if let [(x, y)] = pts.as_slice() {
                Marker::Circle.draw(&mut c.out, *x, *y, color);
            } else {
                let joined: Vec<String> =
                    pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                writeln!(
                    c.out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    joined.join(" ")
                )
                .unwrap();
            }
        }
        c.out.push_str("</g>\n");
        c.legend_entry(
            i,
            color,
            Marker::Circle,
            &format!("set 2 rho {}", format_sig6(rho)),
        );
    }
    Ok(c.finish())
}

pub fn emit_line_figure(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_svg(path, &render_line_figure(rows)?)
}

/// Scatter of log10(citations + 1) against jittered quality for two sets.
pub fn render_scatter_figure(
    set_a: &ArticleSet,
    set_b: &ArticleSet,
    labels: [&str; 2],
    jitter_seed: Seed,
) -> Result<String> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::InvalidParameter(
            "scatter sets must be non-empty".into(),
        ));
    }
    let max_c = set_a
        .citations
        .iter()
        .chain(&set_b.citations)
        .copied()
        .max()
        .unwrap_or(0);
    let y_max = ((max_c as f64 + 1.0).log10().ceil()).max(1.0);
    let mut c = Canvas::new(
        "Quality against citations (jittered quality, log scale)",
        (-0.5, 4.5),
        (0.0, y_max),
    );
    for k in 0..=(y_max as i64) {
        c.y_gridline(k as f64, &format!("{}", 10u64.pow(k as u32)));
    }
    for q in 0..5 {
        c.x_tick(q as f64, &q.to_string());
    }
    c.frame("Quality score", "Citations + 1");

    let mut rng = crate::seed::rng(jitter_seed);
    let styles = [(PALETTE[0], Marker::Circle), (PALETTE[1], Marker::Square)];
    for (set, (color, marker)) in [set_a, set_b].into_iter().zip(styles) {
        c.out.push_str("<g class=\"points\">\n");
        for (q, &cites) in set.qualities.iter().zip(&set.citations) {
            let jitter: f64 = rng.random_range(-JITTER..=JITTER);
            let x = c.x.at(q.value() as f64 + jitter);
            let y = c.y.at((cites as f64 + 1.0).log10());
            marker.draw(&mut c.out, x, y, color);
        }
        c.out.push_str("</g>\n");
    }
    for (i, ((color, marker), label)) in styles.into_iter().zip(labels).enumerate() {
        c.legend_entry(i, color, marker, label);
    }
    Ok(c.finish())
}

pub fn emit_scatter_figure(
    set_a: &ArticleSet,
    set_b: &ArticleSet,
    labels: [&str; 2],
    jitter_seed: Seed,
    path: &Path,
) -> Result<()> {
    write_svg(
        path,
        &render_scatter_figure(set_a, set_b, labels, jitter_seed)?,
    )
}
