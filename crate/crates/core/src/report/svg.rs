use std::fmt::Write;

use super::GrowthCurves;
use crate::stats::{cd_groups, CriticalDifference, SimilarityMatrix};

pub const WIDTH: u32 = 800;
pub const HEIGHT: u32 = 480;
const FONT: &str = "DejaVu Sans Mono, Menlo, Consolas, monospace";
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

struct Svg(String);

impl Svg {
    fn new(title: &str) -> Svg {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="{FONT}" font-size="12">"##
        );
        let _ = writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
        let _ = writeln!(
            s,
            r##"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"##,
            WIDTH / 2,
            escape(title)
        );
        Svg(s)
    }

    #[allow(clippy::too_many_arguments)]
    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.0,
            r##"<line class="{class}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"##
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, body: &str) {
        let _ = writeln!(
            self.0,
            r##"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"##,
            escape(body)
        );
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

/// Step from {1, 2, 5} × 10ⁿ giving at most six intervals up to `max`.
fn nice_step(max: f64) -> f64 {
    if max <= 0.0 {
        return 1.0;
    }
    let mut step = 10f64.powf((max / 6.0).log10().floor());
    for m in [1.0, 2.0, 5.0, 10.0] {
        if max / (step * m) <= 6.0 {
            step *= m;
            break;
        }
    }
    step.max(1.0)
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

/// Median coverage over time, one polyline per fuzzer.
pub fn plot_coverage_growth(curves: &GrowthCurves) -> String {
    let mut svg = Svg::new(&format!("Coverage growth: {}", curves.benchmark));
    if !curves.has_samples {
        svg.text(f64::from(WIDTH) / 2.0, f64::from(HEIGHT) / 2.0, "middle", "no data");
        return svg.finish();
    }
    let (left, right, top, bottom) = (80.0, 620.0, 50.0, 420.0);
    let x_max = curves.duration_s.max(1) as f64;
    let y_peak = curves
        .series
        .iter()
        .flat_map(|s| s.median_lines.iter().copied())
        .fold(0.0, f64::max);
    let y_step = nice_step(y_peak);
    let y_max = ((y_peak / y_step).ceil() * y_step).max(y_step);
    let px = |t: f64| left + (right - left) * t / x_max;
    let py = |v: f64| bottom - (bottom - top) * v / y_max;

    svg.line("axis", left, bottom, right, bottom, "#000000", 1.0);
    svg.line("axis", left, bottom, left, top, "#000000", 1.0);
    let x_step = nice_step(x_max);
    let mut t = 0.0;
    while t <= x_max + 1e-9 {
        svg.line("tick", px(t), bottom, px(t), bottom + 5.0, "#000000", 1.0);
        svg.text(px(t), bottom + 18.0, "middle", &fmt_tick(t));
        t += x_step;
    }
    let mut v = 0.0;
    while v <= y_max + 1e-9 {
        svg.line("grid", left, py(v), right, py(v), "#e0e0e0", 1.0);
        svg.text(left - 8.0, py(v) + 4.0, "end", &fmt_tick(v));
        v += y_step;
    }
    svg.text((left + right) / 2.0, bottom + 40.0, "middle", "seconds");
    let _ = writeln!(
        svg.0,
        r##"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">lines covered</text>"##,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    for (i, s) in curves.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curves
            .ticks
            .iter()
            .zip(&s.median_lines)
            .map(|(&t, &v)| format!("{:.2},{:.2}", px(t as f64), py(v)))
            .collect();
        let _ = writeln!(
            svg.0,
            r##"<polyline class="series" data-fuzzer="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"##,
            escape(&s.fuzzer),
            points.join(" ")
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        svg.line("legend", 640.0, ly, 665.0, ly, color, 2.0);
        svg.text(672.0, ly + 4.0, "start", &s.fuzzer);
    }
    svg.finish()
}

/// Critical difference diagram: mean ranks on an axis (best on the left),
/// bars joining groups not separated by the critical difference, and a CD ruler.
pub fn plot_critical_difference(cd: &CriticalDifference) -> String {
    let k = cd.average_ranks.len();
    let mut svg = Svg::new(&format!(
        "Critical difference (alpha = {}, N = {})",
        cd.alpha, cd.n_benchmarks
    ));
    let hi = (k as f64).max((1.0 + cd.cd_value).ceil());
    let (left, right, axis_y) = (100.0, 700.0, 110.0);
    let px = |r: f64| left + (right - left) * (r - 1.0) / (hi - 1.0).max(1.0);

    let ruler_y = 60.0;
    svg.line(
        "cd-ruler",
        px(1.0),
        ruler_y,
        px(1.0 + cd.cd_value),
        ruler_y,
        "#000000",
        2.0,
    );
    svg.line(
        "cd-ruler",
        px(1.0),
        ruler_y - 5.0,
        px(1.0),
        ruler_y + 5.0,
        "#000000",
        1.0,
    );
    let end = px(1.0 + cd.cd_value);
    svg.line("cd-ruler", end, ruler_y - 5.0, end, ruler_y + 5.0, "#000000", 1.0);
    svg.text(
        (px(1.0) + end) / 2.0,
        ruler_y - 9.0,
        "middle",
        &format!("CD = {:.4}", cd.cd_value),
    );

    svg.line("axis", px(1.0), axis_y, px(hi), axis_y, "#000000", 1.5);
    for r in 1..=hi as usize {
        let x = px(r as f64);
        svg.line("tick", x, axis_y - 6.0, x, axis_y, "#000000", 1.0);
        svg.text(x, axis_y - 10.0, "middle", &r.to_string());
    }

    let ranks: Vec<f64> = cd.average_ranks.iter().map(|m| m.mean_rank).collect();
    let groups = cd_groups(&ranks, cd.cd_value);
    for (g, &(a, b)) in groups.iter().enumerate() {
        let y = axis_y + 14.0 + 8.0 * g as f64;
        svg.line("cd-group", px(ranks[a]) - 4.0, y, px(ranks[b]) + 4.0, y, "#000000", 4.0);
    }

    let label_top = axis_y + 30.0 + 8.0 * groups.len() as f64;
    let row = ((f64::from(HEIGHT) - 20.0 - label_top) / k.max(1) as f64).min(24.0);
    let half = k.div_ceil(2);
    for (i, m) in cd.average_ranks.iter().enumerate() {
        let x = px(m.mean_rank);
        let (y, edge, anchor) = if i < half {
            (label_top + row * i as f64, left - 70.0, "start")
        } else {
            (label_top + row * (k - 1 - i) as f64, right + 70.0, "end")
        };
        svg.line("label", x, axis_y, x, y, "#555555", 1.0);
        svg.line("label", x, y, edge, y, "#555555", 1.0);
        let text = format!("{} ({:.2})", m.fuzzer, m.mean_rank);
        svg.text(edge, y - 3.0, anchor, &text);
    }
    svg.finish()
}

fn heat(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * v).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 8.0),
        lerp(255.0, 48.0),
        lerp(255.0, 107.0)
    )
}

/// Cosine similarity heatmap; undefined cells are grey.
pub fn plot_similarity(matrix: &SimilarityMatrix, title: &str) -> String {
    let mut svg = Svg::new(title);
    let k = matrix.fuzzers.len();
    if k == 0 {
        svg.text(f64::from(WIDTH) / 2.0, f64::from(HEIGHT) / 2.0, "middle", "no data");
        return svg.finish();
    }
    let (left, top, size) = (200.0, 90.0, 360.0);
    let cell = size / k as f64;
    for (i, f) in matrix.fuzzers.iter().enumerate() {
        let c = top + cell * (i as f64 + 0.5);
        svg.text(left - 8.0, c + 4.0, "end", f);
        let cx = left + cell * (i as f64 + 0.5);
        let _ = writeln!(
            svg.0,
            r##"<text x="{cx:.2}" y="{:.2}" text-anchor="start" transform="rotate(-45 {cx:.2} {:.2})">{}</text>"##,
            top - 6.0,
            top - 6.0,
            escape(f)
        );
    }
    for (i, row) in matrix.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (x, y) = (left + cell * j as f64, top + cell * i as f64);
            let fill = v.map_or_else(|| "#cccccc".to_string(), heat);
            let _ = writeln!(
                svg.0,
                r##"<rect class="cell" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}" stroke="#ffffff"/>"##
            );
            if cell >= 24.0 {
                let label = v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
                let ink = if v.is_some_and(|v| v > 0.6) {
                    "#ffffff"
                } else {
                    "#000000"
                };
                let _ = writeln!(
                    svg.0,
                    r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="{ink}">{label}</text>"##,
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0
                );
            }
        }
    }
    let lx = left + size + 30.0;
    for s in 0..=10 {
        let v = f64::from(s) / 10.0;
        let y = top + size * f64::from(10 - s) / 11.0;
        let _ = writeln!(
            svg.0,
            r##"<rect class="scale" x="{lx:.2}" y="{y:.2}" width="20" height="{:.2}" fill="{}"/>"##,
            size / 11.0,
            heat(v)
        );
    }
    svg.text(lx + 26.0, top + size / 22.0 + 4.0, "start", "1.00");
    svg.text(lx + 26.0, top + size - size / 22.0 + 4.0, "start", "0.00");
    svg.finish()
}
