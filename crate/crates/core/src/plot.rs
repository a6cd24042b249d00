//! Deterministic SVG renderings of traces, spectra, and PCA scatters.
//!
//! Everything is emitted as plain text with fixed precision, so identical
//! inputs give byte-identical files.

use crate::metrics::TrainingTrace;
use crate::pca::ProjectionPair;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 90.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        let pad = |lo: f64, hi: f64| {
            if (hi - lo).abs() < 1e-300 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x_min, x_max) = pad(x_min, x_max);
        let (y_min, y_max) = pad(y_min, y_max);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    let rounded = (v * 1e9).round() / 1e9;
    if rounded == 0.0 {
        "0".to_string() // avoid "-0"
    } else {
        format!("{rounded}")
    }
}

fn ticks(min: f64, max: f64) -> Vec<f64> {
    let range = max - min;
    if !(range > 0.0) || !range.is_finite() {
        return vec![min];
    }
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| range / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let mut t = (min / step).ceil() * step;
    let mut out = Vec::new();
    while t <= max + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
             <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        );
        body.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
             text-anchor=\"middle\">{}</text>\n",
            coord(WIDTH / 2.0),
            escape(title)
        ));
        Svg { body }
    }

    fn axes(&mut self, frame: &Frame, x_label: &str, y_label: &str) {
        let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            coord(x0),
            coord(y0),
            coord(x1),
            coord(y0)
        ));
        self.body.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            coord(x0),
            coord(y0),
            coord(x0),
            coord(y1)
        ));
        for t in ticks(frame.x_min, frame.x_max) {
            let px = frame.px(t);
            self.body.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n\
                 <text x=\"{0}\" y=\"{3}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"middle\">{4}</text>\n",
                coord(px),
                coord(y0),
                coord(y0 + 5.0),
                coord(y0 + 18.0),
                tick_label(t)
            ));
        }
        for t in ticks(frame.y_min, frame.y_max) {
            let py = frame.py(t);
            self.body.push_str(&format!(
                "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n\
                 <text x=\"{3}\" y=\"{4}\" font-family=\"sans-serif\" font-size=\"11\" \
                 text-anchor=\"end\">{5}</text>\n",
                coord(py),
                coord(x0 - 5.0),
                coord(x0),
                coord(x0 - 8.0),
                coord(py + 4.0),
                tick_label(t)
            ));
        }
        self.body.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\">{}</text>\n",
            coord((x0 + x1) / 2.0),
            coord(HEIGHT - 12.0),
            escape(x_label)
        ));
        self.body.push_str(&format!(
            "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
             text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
            coord((y0 + y1) / 2.0),
            coord((y0 + y1) / 2.0),
            escape(y_label)
        ));
    }

    fn polyline(&mut self, frame: &Frame, xs: &[f64], ys: &[f64], color: &str, dash: Option<&str>) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{},{}", coord(frame.px(x)), coord(frame.py(y))))
            .collect();
        let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
        self.body.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash_attr} \
             points=\"{}\"/>\n",
            pts.join(" ")
        ));
    }

    fn legend(&mut self, entries: &[(&str, &str, Option<&str>)]) {
        let x = WIDTH - MARGIN_R + 6.0;
        for (i, (label, color, dash)) in entries.iter().enumerate() {
            let y = MARGIN_T + 14.0 + 18.0 * i as f64;
            let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
            self.body.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
                 stroke-width=\"2\"{dash_attr}/>\n\
                 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                coord(x),
                coord(y),
                coord(x + 18.0),
                coord(y),
                coord(x + 22.0),
                coord(y + 4.0),
                escape(label)
            ));
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Train and test accuracy against epoch.
pub fn render_accuracy_curves(trace: &TrainingTrace) -> String {
    let epochs: Vec<f64> = trace.rows.iter().map(|r| r.epoch as f64).collect();
    let train: Vec<f64> = trace.rows.iter().map(|r| r.train_acc).collect();
    let test: Vec<f64> = trace.rows.iter().map(|r| r.test_acc).collect();
    let x_max = epochs.last().copied().unwrap_or(1.0);
    let frame = Frame::new(0.0, x_max, 0.0, 1.0);
    let mut svg = Svg::new("Training and test accuracy");
    svg.axes(&frame, "epoch", "accuracy");
    svg.polyline(&frame, &epochs, &train, PALETTE[1], Some("4 3"));
    svg.polyline(&frame, &epochs, &test, PALETTE[0], None);
    svg.legend(&[
        ("train", PALETTE[1], Some("4 3")),
        ("test", PALETTE[0], None),
    ]);
    svg.finish()
}

/// Per-layer weight entropies with the accuracy curves overlaid on a second
/// scale, the layout used for entropy-dynamics figures.
pub fn render_entropy_curves(trace: &TrainingTrace) -> String {
    let epochs: Vec<f64> = trace.rows.iter().map(|r| r.epoch as f64).collect();
    let layers = trace.rows.first().map_or(0, |r| r.entropies.len());
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for r in &trace.rows {
        for &e in &r.entropies {
            s_min = s_min.min(e);
            s_max = s_max.max(e);
        }
    }
    if !s_min.is_finite() {
        s_min = 0.0;
        s_max = 1.0;
    }
    let x_max = epochs.last().copied().unwrap_or(1.0);
    let frame = Frame::new(0.0, x_max, s_min, s_max);
    let mut svg = Svg::new("Layer entropies and accuracy");
    svg.axes(&frame, "epoch", "entropy (nats)");

    let mut legend: Vec<(String, &str, Option<&str>)> = Vec::new();
    for l in 0..layers {
        let series: Vec<f64> = trace.rows.iter().map(|r| r.entropies[l]).collect();
        let color = PALETTE[(2 + l) % PALETTE.len()];
        svg.polyline(&frame, &epochs, &series, color, None);
        legend.push((format!("entropy layer {}", l + 1), color, None));
    }
    // accuracies rescaled from [0,1] onto the entropy axis
    let rescale = |a: f64| frame.y_min + a * (frame.y_max - frame.y_min);
    let train: Vec<f64> = trace.rows.iter().map(|r| rescale(r.train_acc)).collect();
    let test: Vec<f64> = trace.rows.iter().map(|r| rescale(r.test_acc)).collect();
    svg.polyline(&frame, &epochs, &train, PALETTE[1], Some("2 4"));
    svg.polyline(&frame, &epochs, &test, PALETTE[0], None);
    legend.push(("train acc (scaled)".into(), PALETTE[1], Some("2 4")));
    legend.push(("test acc (scaled)".into(), PALETTE[0], None));
    let refs: Vec<(&str, &str, Option<&str>)> = legend
        .iter()
        .map(|(l, c, d)| (l.as_str(), *c, *d))
        .collect();
    svg.legend(&refs);
    svg.finish()
}

/// Scatter of one projection pair with every point labeled by its class.
pub fn render_pca_scatter(pair: &ProjectionPair) -> String {
    let xs: Vec<f64> = pair.points.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pair.points.iter().map(|p| p[1]).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(min(&xs), max(&xs), min(&ys), max(&ys));
    let m = pair.pair_index;
    let mut svg = Svg::new(&format!("PCA projections: pair {m}"));
    svg.axes(
        &frame,
        &format!("PC {}", 2 * m),
        &format!("PC {}", 2 * m + 1),
    );
    for (label, p) in pair.points.iter().enumerate() {
        let (px, py) = (frame.px(p[0]), frame.py(p[1]));
        svg.body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{label}</text>\n",
            coord(px),
            coord(py),
            PALETTE[0],
            coord(px + 5.0),
            coord(py - 5.0),
        ));
    }
    svg.finish()
}

/// Power spectrum as impulses per bin.
pub fn render_spectrum(spectrum: &[f64], title: &str) -> String {
    let y_max = spectrum.iter().copied().fold(0.0f64, f64::max);
    let frame = Frame::new(0.0, (spectrum.len().max(2) - 1) as f64, 0.0, y_max.max(1e-12));
    let mut svg = Svg::new(title);
    svg.axes(&frame, "frequency bin", "power");
    for (bin, &v) in spectrum.iter().enumerate() {
        let px = frame.px(bin as f64);
        svg.body.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
            coord(px),
            coord(frame.py(0.0)),
            coord(frame.py(v)),
            PALETTE[0]
        ));
    }
    svg.finish()
}

/// Autocorrelation (or any lag sequence) as a line with point markers.
pub fn render_autocorrelation(values: &[f64], title: &str) -> String {
    let lags: Vec<f64> = (0..values.len()).map(|k| k as f64).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame::new(0.0, (values.len().max(2) - 1) as f64, lo.min(0.0), hi.max(0.0));
    let mut svg = Svg::new(title);
    svg.axes(&frame, "lag", "correlation");
    svg.polyline(&frame, &lags, values, PALETTE[0], None);
    for (k, &v) in values.iter().enumerate() {
        svg.body.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"{}\"/>\n",
            coord(frame.px(k as f64)),
            coord(frame.py(v)),
            PALETTE[0]
        ));
    }
    svg.finish()
}
