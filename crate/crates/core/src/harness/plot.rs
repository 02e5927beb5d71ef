use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classical::PointSource;
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub title: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self { width: 640.0, height: 480.0, margin: 60.0, title: "time-data trade-off".into() }
    }
}

/// Axis ranges in data units: x over log₂D/n, y over log₂T/n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extent {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl PlotStyle {
    /// Pixel coordinates of a data point.
    pub fn project(&self, extent: &Extent, x: f64, y: f64) -> (f64, f64) {
        let (w, h) = (self.width - 2.0 * self.margin, self.height - 2.0 * self.margin);
        let px = self.margin + (x - extent.x.0) / (extent.x.1 - extent.x.0) * w;
        let py = self.height - self.margin - (y - extent.y.0) / (extent.y.1 - extent.y.0) * h;
        (px, py)
    }

    /// Inverse of [`PlotStyle::project`].
    pub fn unproject(&self, extent: &Extent, px: f64, py: f64) -> (f64, f64) {
        let (w, h) = (self.width - 2.0 * self.margin, self.height - 2.0 * self.margin);
        let x = extent.x.0 + (px - self.margin) / w * (extent.x.1 - extent.x.0);
        let y = extent.y.0 + (self.height - self.margin - py) / h * (extent.y.1 - extent.y.0);
        (x, y)
    }
}

/// The points of one attack, sorted by x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub attack: String,
    pub source: PointSource,
    pub points: Vec<(f64, f64)>,
}

/// Reads a curve CSV (`tradeoff_curve`) or a sweep CSV. Needs the columns
/// `attack`, `log2D_over_n` and `log2T_over_n`; `measured_or_formula` is
/// optional and defaults to measured. Rows with an empty coordinate are
/// skipped.
pub fn read_series(csv_text: &str) -> Result<Vec<Series>> {
    if csv_text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let schema = |e: csv::Error| Error::Schema(e.to_string());
    let headers = reader.headers().map_err(schema)?.clone();
    let column = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (ia, ix, iy) = (column("attack")?, column("log2D_over_n")?, column("log2T_over_n")?);
    let is = headers.iter().position(|h| h == "measured_or_formula");
    let mut series: BTreeMap<(String, bool), Vec<(f64, f64)>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(schema)?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        if cell(ix).is_empty() || cell(iy).is_empty() {
            continue;
        }
        let number = |i: usize| -> Result<f64> {
            cell(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Schema(format!("row {}: `{}` is not a number", line + 1, cell(i))))
        };
        let formula = match is.map(cell) {
            None | Some("measured") => false,
            Some("formula") => true,
            Some(other) => return Err(Error::Schema(format!("row {}: unknown source `{other}`", line + 1))),
        };
        series.entry((cell(ia).to_string(), formula)).or_default().push((number(ix)?, number(iy)?));
    }
    Ok(series
        .into_iter()
        .map(|((attack, formula), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let source = if formula { PointSource::Formula } else { PointSource::Measured };
            Series { attack, source, points }
        })
        .collect())
}

/// The axis ranges used for a set of series: x covers [0, 1] and y the
/// integer hull of the data, at least [0, 1].
pub fn extent_of(series: &[Series]) -> Extent {
    let points = || series.iter().flat_map(|s| s.points.iter());
    let x_max = points().map(|p| p.0).fold(1.0f64, f64::max).ceil();
    let x_min = points().map(|p| p.0).fold(0.0f64, f64::min).floor();
    let y_max = points().map(|p| p.1).fold(1.0f64, f64::max).ceil();
    let y_min = points().map(|p| p.1).fold(0.0f64, f64::min).floor();
    Extent { x: (x_min, x_max), y: (y_min, y_max) }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders a CSV as a standalone SVG with log₂D/n and log₂T/n axes and one
/// polyline per attack. Formula curves are solid; measured ones are dashed
/// with a marker per point.
pub fn plot_curves(csv_text: &str, style: &PlotStyle) -> Result<String> {
    let series = read_series(csv_text)?;
    let extent = extent_of(&series);
    let mut svg = String::new();
    let (w, h, m) = (style.width, style.height, style.margin);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, m / 2.0, escape(&style.title));

    // axes, ticks every quarter on x and every half on y
    let (x0, y0) = style.project(&extent, extent.x.0, extent.y.0);
    let (x1, y1) = style.project(&extent, extent.x.1, extent.y.1);
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(svg, "</g>");
    let steps = |lo: f64, hi: f64, per_unit: f64| -> Vec<f64> {
        let count = ((hi - lo) * per_unit).round() as i64;
        (0..=count).map(|i| lo + i as f64 / per_unit).collect()
    };
    let _ = writeln!(svg, r#"<g class="ticks" text-anchor="middle">"#);
    for x in steps(extent.x.0, extent.x.1, 4.0) {
        let (px, py) = style.project(&extent, x, extent.y.0);
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{py:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, py + 5.0);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}">{x}</text>"#, py + 18.0);
    }
    for y in steps(extent.y.0, extent.y.1, 2.0) {
        let (px, py) = style.project(&extent, extent.x.0, y);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{px:.2}" y2="{py:.2}" stroke="black"/>"#, px - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y}</text>"#, px - 8.0, py + 4.0);
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">log2(D)/n</text>"#, w / 2.0, h - m / 4.0);
    let _ = writeln!(
        svg,
        r#"<text x="{0:.2}" y="{1:.2}" text-anchor="middle" transform="rotate(-90 {0:.2} {1:.2})">log2(T)/n</text>"#,
        m / 4.0,
        h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = style.project(&extent, x, y);
                format!("{px:.4},{py:.4}")
            })
            .collect();
        let (source, dash) = match s.source {
            PointSource::Formula => ("formula", ""),
            PointSource::Measured => ("measured", r#" stroke-dasharray="6 3""#),
        };
        let _ = writeln!(
            svg,
            r#"<polyline data-attack="{}" data-source="{source}" fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
            escape(&s.attack),
            points.join(" ")
        );
        if s.source == PointSource::Measured {
            for &(x, y) in &s.points {
                let (px, py) = style.project(&extent, x, y);
                let _ = writeln!(svg, r#"<circle cx="{px:.4}" cy="{py:.4}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{} ({source})</text>"#,
            w - m,
            escape(&s.attack)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
