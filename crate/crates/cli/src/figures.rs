//! SVG figures and markdown tables. Output depends only on the input data.

use std::fmt::Write;

use secbeam::trainer::stats::Summary;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Runs sharing a label; each run is a list of `(epoch, value)` points.
#[derive(Debug, Clone)]
pub struct CurveGroup {
    pub label: String,
    pub runs: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub epochs: Vec<usize>,
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Trailing moving average; the first points average what is available.
pub fn smooth(points: &[(usize, f64)], window: usize) -> Vec<(usize, f64)> {
    let w = window.max(1);
    let mut sum = 0.0;
    points
        .iter()
        .enumerate()
        .map(|(i, &(e, v))| {
            sum += v;
            if i >= w {
                sum -= points[i - w].1;
            }
            (e, sum / (i + 1).min(w) as f64)
        })
        .collect()
}

/// Mean and min-max envelope over the epochs present in every run.
pub fn band(runs: &[Vec<(usize, f64)>]) -> Band {
    let mut epochs: Vec<usize> = runs.first().map(|r| r.iter().map(|p| p.0).collect()).unwrap_or_default();
    for r in &runs[1.min(runs.len())..] {
        epochs.retain(|e| r.iter().any(|p| p.0 == *e));
    }
    let mut out = Band {
        epochs: Vec::with_capacity(epochs.len()),
        mean: Vec::new(),
        lo: Vec::new(),
        hi: Vec::new(),
    };
    for e in epochs {
        let vals: Vec<f64> = runs
            .iter()
            .map(|r| r.iter().find(|p| p.0 == e).map(|p| p.1).unwrap_or(f64::NAN))
            .collect();
        out.epochs.push(e);
        out.mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
        out.lo.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
        out.hi.push(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    out
}

/// Round-number tick positions covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(svg: &mut String, title: &str, attrs: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12"{attrs}>"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn y_axis(svg: &mut String, f: &Frame, label: &str) {
    let x = LEFT;
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{x}" y1="{TOP}" x2="{x}" y2="{}" stroke="#000"/>"##,
        HEIGHT - BOTTOM
    );
    for t in ticks(f.y0, f.y1, 6) {
        let y = f.py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text class="ytick" x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            WIDTH - RIGHT,
            x - 6.0,
            y + 4.0,
            label_num(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(label)
    );
}

fn legend(svg: &mut String, i: usize, label: &str) {
    let x = WIDTH - RIGHT + 15.0;
    let y = TOP + 10.0 + 20.0 * i as f64;
    let _ = writeln!(
        svg,
        r#"<rect x="{x}" y="{}" width="14" height="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
        y - 2.0,
        PALETTE[i % PALETTE.len()],
        x + 20.0,
        y + 4.0,
        escape(label)
    );
}

/// Learning curves: one polyline per group (mean over its runs) over a
/// shaded min-max band. The x-axis spans `[0, max epoch]`.
pub fn curves_svg(groups: &[CurveGroup], title: &str, y_label: &str) -> String {
    let bands: Vec<Band> = groups.iter().map(|g| band(&g.runs)).collect();
    let x_max = bands
        .iter()
        .flat_map(|b| b.epochs.last().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let (y0, y1) = padded_range(bands.iter().flat_map(|b| b.lo.iter().chain(&b.hi).copied()));
    let f = Frame { x0: 0.0, x1: x_max, y0, y1 };
    let mut svg = String::new();
    header(&mut svg, title, &format!(r#" data-x-min="0" data-x-max="{}""#, label_num(x_max)));
    y_axis(&mut svg, &f, y_label);
    let base = HEIGHT - BOTTOM;
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="#000"/>"##,
        WIDTH - RIGHT
    );
    for t in ticks(0.0, x_max, 8) {
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            f.px(t),
            base + 16.0,
            label_num(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    for (i, (g, b)) in groups.iter().zip(&bands).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&g.label);
        let upper = b.epochs.iter().zip(&b.hi).map(|(&e, &v)| format!("{:.2},{:.2}", f.px(e as f64), f.py(v)));
        let lower = b.epochs.iter().zip(&b.lo).rev().map(|(&e, &v)| format!("{:.2},{:.2}", f.px(e as f64), f.py(v)));
        let outline: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" data-label="{label}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            outline.join(" ")
        );
        let line: Vec<String> = b
            .epochs
            .iter()
            .zip(&b.mean)
            .map(|(&e, &v)| format!("{:.2},{:.2}", f.px(e as f64), f.py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" data-label="{label}" data-runs="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            g.runs.len(),
            line.join(" ")
        );
        legend(&mut svg, i, &g.label);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Box plot: box from Q1 to Q3, a median bar, whiskers to min and max.
/// Quartiles interpolate linearly between closest ranks.
pub fn box_svg(groups: &[(String, Vec<f64>)], title: &str, y_label: &str) -> String {
    let sums: Vec<Summary> = groups.iter().map(|(_, v)| Summary::of(v)).collect();
    let (y0, y1) = padded_range(sums.iter().flat_map(|s| [s.min, s.max]));
    let f = Frame { x0: 0.0, x1: groups.len().max(1) as f64, y0, y1 };
    let mut svg = String::new();
    header(&mut svg, title, "");
    y_axis(&mut svg, &f, y_label);
    let base = HEIGHT - BOTTOM;
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{LEFT}" y1="{base}" x2="{}" y2="{base}" stroke="#000"/>"##,
        WIDTH - RIGHT
    );
    let slot = f.px(1.0) - f.px(0.0);
    for (i, ((label, _), s)) in groups.iter().zip(&sums).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let cx = f.px(i as f64 + 0.5);
        let half = (slot * 0.3).min(40.0);
        let (top, bottom) = (f.py(s.q3), f.py(s.q1));
        let label = escape(label);
        let _ = writeln!(
            svg,
            r##"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#000"/>"##,
            f.py(s.max),
            f.py(s.min)
        );
        let _ = writeln!(
            svg,
            r##"<rect class="box" data-label="{label}" data-q1="{}" data-median="{}" data-q3="{}" data-min="{}" data-max="{}" x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.35" stroke="#000"/>"##,
            s.q1,
            s.median,
            s.q3,
            s.min,
            s.max,
            cx - half,
            2.0 * half,
            bottom - top
        );
        let my = f.py(s.median);
        let _ = writeln!(
            svg,
            r##"<line class="median" x1="{:.2}" y1="{my:.2}" x2="{:.2}" y2="{my:.2}" stroke="#000" stroke-width="2"/>"##,
            cx - half,
            cx + half
        );
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{cx:.2}" y="{}" text-anchor="middle">{label}</text>"#,
            base + 16.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Markdown table of per-iteration seconds. Overhead is relative to the
/// row at `reference`.
pub fn latency_table(rows: &[(String, Vec<f64>)], reference: usize) -> String {
    let stats: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|(_, s)| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            let sd = if s.len() > 1 {
                (s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            (m, sd, secbeam::trainer::stats::median(s))
        })
        .collect();
    let ref_mean = stats.get(reference).map(|s| s.0).unwrap_or(f64::NAN);
    let mut out = String::from(
        "| variant | iterations | mean s/iter | std s/iter | median s/iter | overhead vs reference |\n|---|---:|---:|---:|---:|---:|\n",
    );
    for (i, ((label, s), (m, sd, med))) in rows.iter().zip(&stats).enumerate() {
        let overhead = if i == reference {
            "reference".to_string()
        } else {
            format!("{:+.1}%", 100.0 * (m / ref_mean - 1.0))
        };
        let _ = writeln!(out, "| {label} | {} | {m:.6} | {sd:.6} | {med:.6} | {overhead} |", s.len());
    }
    out
}
