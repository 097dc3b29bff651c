//! Minimal self-contained SVG plots (no scripts, no external resources).

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [(f64, f64)],
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Written as a leading XML comment when present.
    pub timestamp: Option<String>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit<'b>(points: impl Iterator<Item = &'b (f64, f64)>) -> Frame {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for &(x, y) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };
        }
        if f.x1 == f.x0 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 == f.y0 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, plot: &Plot, frame: &Frame) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(ts) = &plot.timestamp {
        let _ = writeln!(out, "<!-- generated {} -->", ts.replace("--", "-"));
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(plot.title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(out, "<path d=\"M{l} {t} L{l} {b} L{r} {b}\" fill=\"none\" stroke=\"black\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        escape(plot.x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(plot.y_label)
    );
    for (v, x, y, anchor) in [
        (frame.x0, l, b + 16.0, "middle"),
        (frame.x1, r, b + 16.0, "middle"),
        (frame.y0, l - 6.0, b, "end"),
        (frame.y1, l - 6.0, t + 4.0, "end"),
    ] {
        let _ = writeln!(out, "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"{anchor}\">{}</text>", tick(v));
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN + 4.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 150.0;
        let _ = writeln!(out, "<rect x=\"{x}\" y=\"{}\" width=\"12\" height=\"4\" fill=\"{}\"/>", y - 4.0, s.color);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{y}\">{}</text>", x + 18.0, escape(s.label));
    }
}

pub fn line_plot(plot: &Plot, series: &[Series]) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    header(&mut out, plot, &frame);
    for s in series {
        let mut d = String::new();
        for (i, &(x, y)) in s.points.iter().filter(|p| p.1.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, frame.px(x), frame.py(y));
        }
        let _ =
            writeln!(out, "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>", d.trim_end(), s.color);
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Scatter where point `i` is coloured along a red-to-blue ramp by `i`.
pub fn ramp_scatter(plot: &Plot, points: &[(f64, f64)]) -> String {
    let frame = Frame::fit(points.iter());
    let mut out = String::new();
    header(&mut out, plot, &frame);
    let n = points.len().max(2) - 1;
    for (i, &(x, y)) in points.iter().enumerate() {
        let t = i as f64 / n as f64;
        let (r, b) = ((255.0 * (1.0 - t)).round(), (255.0 * t).round());
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"rgb({r},40,{b})\"/>",
            frame.px(x),
            frame.py(y)
        );
    }
    out.push_str("</svg>\n");
    out
}
