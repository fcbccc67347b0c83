use std::fmt::Write as _;
use std::path::Path;

use super::{ExplainError, TokenScores};

const CELL_COLOR: (u8, u8, u8) = (192, 57, 43);
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn cell_width(token: &str) -> f64 {
    12.0 + 7.5 * token.chars().count() as f64
}

/// Standalone SVG with one shaded cell per token; fill opacity is the score.
pub fn heatmap_svg(scores: &TokenScores) -> String {
    let (pad, height, gap) = (8.0, 28.0, 4.0);
    let width: f64 = scores.tokens.iter().map(|t| cell_width(t) + gap).sum::<f64>() - gap + 2.0 * pad;
    let (r, g, b) = CELL_COLOR;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.1}" height="{:.1}">"#,
        width,
        height + 2.0 * pad
    );
    let _ = writeln!(
        s,
        r#"<g class="heatmap" data-kind="{}" font-family="monospace" font-size="13">"#,
        scores.kind.as_str()
    );
    let mut x = pad;
    for (i, (tok, &score)) in scores.tokens.iter().zip(&scores.scores).enumerate() {
        let w = cell_width(tok);
        let _ = writeln!(s, r#"<g class="token" data-index="{i}" data-score="{score}">"#);
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{x:.1}" y="{pad:.1}" width="{w:.1}" height="{height:.1}" fill="rgb({r},{g},{b})" fill-opacity="{score}"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + w / 2.0,
            pad + height / 2.0 + 4.5,
            escape(tok)
        );
        if scores.aspect.contains(&i) {
            let y = pad + height - 4.0;
            let _ = writeln!(
                s,
                r#"<line class="aspect" x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black" stroke-width="1.5"/>"#,
                x + 3.0,
                x + w - 3.0
            );
        }
        s.push_str("</g>\n");
        x += w + gap;
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// HTML fragment for inlining in a report: one `span.cell` per token,
/// aspect tokens wrapped in `<u>`.
pub fn heatmap_html(scores: &TokenScores) -> String {
    let (r, g, b) = CELL_COLOR;
    let mut s = format!(r#"<div class="token-heatmap" data-kind="{}">"#, scores.kind.as_str());
    for (i, (tok, &score)) in scores.tokens.iter().zip(&scores.scores).enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let body = if scores.aspect.contains(&i) {
            format!("<u>{}</u>", escape(tok))
        } else {
            escape(tok)
        };
        let _ = write!(
            s,
            r#"<span class="cell" style="background-color: rgba({r}, {g}, {b}, {score})">{body}</span>"#
        );
    }
    s.push_str("</div>\n");
    s
}

/// Writes an HTML fragment for `.html`/`.htm` paths and SVG otherwise.
pub fn render_heatmap(scores: &TokenScores, out: &Path) -> Result<(), ExplainError> {
    let html = matches!(
        out.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("html" | "htm")
    );
    let body = if html { heatmap_html(scores) } else { heatmap_svg(scores) };
    std::fs::write(out, body)?;
    Ok(())
}

/// One labeled density curve over an increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KdeSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl KdeSeries {
    pub fn new(label: impl Into<String>, grid: &[f64], density: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: grid.iter().copied().zip(density.iter().copied()).collect(),
        }
    }
}

fn check(series: &[KdeSeries]) -> Result<(), ExplainError> {
    if series.is_empty() {
        return Err(ExplainError::Curve("no series".into()));
    }
    for s in series {
        if s.points.len() < 2 {
            return Err(ExplainError::Curve(format!("`{}` has fewer than 2 points", s.label)));
        }
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(ExplainError::Curve(format!("`{}` has a non-finite value", s.label)));
        }
        if s.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ExplainError::Curve(format!("`{}` grid is not strictly increasing", s.label)));
        }
    }
    Ok(())
}

/// Line chart of one or more density curves with axes, ticks and a legend.
pub fn kde_svg(series: &[KdeSeries]) -> Result<String, ExplainError> {
    check(series)?;
    let (w, h) = (560.0, 340.0);
    let (left, right, top, bottom) = (56.0, 150.0, 20.0, 44.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let y0 = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::min);
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<line class="axis x" x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
        top + ph,
        left + pw,
        top + ph
    );
    let _ = writeln!(s, r#"<line class="axis y" x1="{left}" y1="{top}" x2="{left}" y2="{:.1}"/>"#, top + ph);
    s.push_str("</g>\n<g class=\"ticks\">\n");
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{xv:.2}</text>"#,
            top + ph,
            top + ph + 4.0,
            top + ph + 16.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{left}" y2="{py:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.2}</text>"#,
            left - 4.0,
            left - 6.0,
            py + 4.0
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text class="label" x="{:.1}" y="{:.1}" text-anchor="middle">proximity</text>"#,
        left + pw / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text class="label" x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">density</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            escape(&ser.label),
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    s.push_str("<g class=\"legend\">\n");
    for (i, ser) in series.iter().enumerate() {
        let y = top + 10.0 + 18.0 * i as f64;
        let x = left + pw + 16.0;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            x + 20.0,
            PALETTE[i % PALETTE.len()],
            x + 26.0,
            y + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}

pub fn render_kde(series: &[KdeSeries], out: &Path) -> Result<(), ExplainError> {
    let body = kde_svg(series)?;
    std::fs::write(out, body)?;
    Ok(())
}
