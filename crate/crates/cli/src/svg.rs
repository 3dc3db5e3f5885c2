//! Self-contained SVG box plots.
//!
//! Boxes span the quartiles (linear interpolation between order
//! statistics) with a line at the median. Whiskers reach the most extreme
//! values within 1.5 IQR of the box (Tukey); values beyond are drawn as
//! circles. With a clip limit, the value axis stops there and points above
//! it are counted in a label at the top edge.

use std::fmt::Write as _;

use impdiag::experiments::quantile_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub n: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub low_whisker: f64,
    pub high_whisker: f64,
    pub outliers: Vec<f64>,
}

pub fn box_summary(values: &[f64]) -> Option<BoxSummary> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let median = quantile_sorted(&v, 0.5);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
    Some(BoxSummary {
        n: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        q1,
        median,
        q3,
        low_whisker: inside.first().copied().unwrap_or(q1),
        high_whisker: inside.last().copied().unwrap_or(q3),
        outliers: v.into_iter().filter(|&x| x < lo_fence || x > hi_fence).collect(),
    })
}

/// One panel: a box per group.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub groups: Vec<(String, Vec<f64>)>,
}

pub const WHISKER_NOTE: &str =
    "Boxes: quartiles and median. Whiskers: most extreme values within 1.5 IQR. Circles: values beyond.";

const PANEL_W: f64 = 340.0;
const PANEL_H: f64 = 250.0;
const LEFT: f64 = 52.0;
const RIGHT: f64 = 14.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round step for about five ticks over `span`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

/// Render `panels` in a grid under a common title.
pub fn render(title: &str, panels: &[Panel], clip: Option<f64>) -> String {
    let cols = match panels.len() {
        0 | 1 => 1,
        2 | 4 => 2,
        _ => 3,
    };
    let rows = panels.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + 60.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<desc>{}</desc>", escape(WHISKER_NOTE));
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (k, panel) in panels.iter().enumerate() {
        let ox = (k % cols) as f64 * PANEL_W;
        let oy = 24.0 + (k / cols) as f64 * PANEL_H;
        draw_panel(&mut s, panel, ox, oy, clip);
    }
    let mut note = WHISKER_NOTE.to_string();
    if let Some(c) = clip {
        note.push_str(&format!(" Axis clipped at {c}; counts above it are marked at the top."));
    }
    let _ = writeln!(
        s,
        r##"<text x="8" y="{}" font-size="10" fill="#444">{}</text>"##,
        height - 12.0,
        escape(&note)
    );
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, panel: &Panel, ox: f64, oy: f64, clip: Option<f64>) {
    let boxes: Vec<(String, Option<BoxSummary>)> = panel
        .groups
        .iter()
        .map(|(name, v)| (name.clone(), box_summary(v)))
        .collect();
    let mut lo = 0.0f64;
    let mut hi = f64::NEG_INFINITY;
    for b in boxes.iter().filter_map(|b| b.1.as_ref()) {
        lo = lo.min(b.low_whisker).min(b.outliers.first().copied().unwrap_or(0.0));
        hi = hi.max(b.high_whisker).max(b.outliers.last().copied().unwrap_or(hi));
    }
    if let Some(c) = clip {
        hi = hi.min(c);
    }
    if !hi.is_finite() || hi <= lo {
        hi = lo + 1.0;
    }
    let step = tick_step(hi - lo);
    let lo = (lo / step).floor() * step;
    let hi = (hi / step).ceil() * step;
    let plot_w = PANEL_W - LEFT - RIGHT;
    let plot_h = PANEL_H - TOP - BOTTOM;
    let x0 = ox + LEFT;
    let y0 = oy + TOP;
    let y = |v: f64| y0 + plot_h * (1.0 - (v.clamp(lo, hi) - lo) / (hi - lo));

    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-weight="bold">{}</text>"#,
        x0 + plot_w / 2.0,
        oy + 20.0,
        escape(&panel.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    let mut t = lo;
    while t <= hi + step * 1e-9 {
        let ty = y(t);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{ty:.2}" x2="{}" y2="{ty:.2}" stroke="#eee"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0,
            x0 + plot_w,
            x0 - 4.0,
            ty + 4.0,
            fmt_tick(t, step)
        );
        t += step;
    }
    let n = boxes.len().max(1) as f64;
    let slot = plot_w / n;
    let bw = (slot * 0.5).min(50.0);
    for (i, (name, b)) in boxes.iter().enumerate() {
        let cx = x0 + slot * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + plot_h + 16.0,
            escape(name)
        );
        let Some(b) = b else { continue };
        let _ = writeln!(
            s,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
            y(b.high_whisker),
            y(b.q3)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
            y(b.q1),
            y(b.low_whisker)
        );
        for w in [b.low_whisker, b.high_whisker] {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
                cx - bw / 4.0,
                y(w),
                cx + bw / 4.0,
                y(w)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#9ecae1" stroke="#333"/>"##,
            cx - bw / 2.0,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#08306b" stroke-width="2"/>"##,
            cx - bw / 2.0,
            y(b.median),
            cx + bw / 2.0,
            y(b.median)
        );
        let mut above = 0;
        for &o in &b.outliers {
            if o > hi {
                above += 1;
                continue;
            }
            let _ = writeln!(
                s,
                r##"<circle cx="{cx:.2}" cy="{:.2}" r="2" fill="none" stroke="#555"/>"##,
                y(o)
            );
        }
        if above > 0 {
            let _ = writeln!(
                s,
                r##"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="#b00">&#9650;{above}</text>"##,
                y0 - 2.0
            );
        }
    }
}
