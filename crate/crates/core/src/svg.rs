//! Deterministic two-panel (magnitude/phase) Bode plots as standalone
//! SVG 1.1 documents. Byte-for-byte reproducible for fixed inputs: no
//! timestamps, no randomness, fixed decimal formatting.

use std::io::Write;

use crate::curve::ImpedanceCurve;
use crate::error::{Error, Result};

const WIDTH: f64 = 860.0;
const PANEL_HEIGHT: f64 = 280.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 60.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn from_values(values: impl Iterator<Item = f64>) -> Axis {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = -1.0;
            hi = 1.0;
        }
        if hi - lo < 1e-9 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn map(&self, v: f64, out_lo: f64, out_hi: f64) -> f64 {
        out_lo + (v - self.lo) / (self.hi - self.lo) * (out_hi - out_lo)
    }

    /// Round tick positions covering the range, at most `max_ticks`.
    fn ticks(&self, max_ticks: usize) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / max_ticks as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| span / s <= max_ticks as f64)
            .unwrap_or(mag * 10.0);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn fmt(v: f64) -> String {
    // fixed short decimal keeps output deterministic across platforms
    let s = format!("{v:.3}");
    s
}

fn decade_ticks(f_lo: f64, f_hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut d = 10f64.powf(f_lo.log10().floor());
    while d <= f_hi * 1.0000001 {
        if d >= f_lo * 0.9999999 {
            out.push(d);
        }
        d *= 10.0;
    }
    if out.is_empty() {
        out.push(f_lo);
        out.push(f_hi);
    }
    out
}

fn panel(
    out: &mut String,
    top: f64,
    x_lo: f64,
    x_hi: f64,
    y_axis: &Axis,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) {
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let bottom = top + PANEL_HEIGHT;
    let x_map =
        |f: f64| left + (f.log10() - x_lo.log10()) / (x_hi.log10() - x_lo.log10()) * (right - left);
    let y_map = |v: f64| y_axis.map(v, bottom, top);

    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n",
        fmt(left),
        fmt(top),
        fmt(right - left),
        fmt(PANEL_HEIGHT)
    ));
    for f in decade_ticks(x_lo, x_hi) {
        let x = x_map(f);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y1}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"#ddd\"/>\n",
            x = fmt(x),
            y1 = fmt(top),
            y2 = fmt(bottom)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(x),
            fmt(bottom + 16.0),
            format_frequency(f)
        ));
    }
    for t in y_axis.ticks(6) {
        let y = y_map(t);
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            x1 = fmt(left),
            x2 = fmt(right),
            y = fmt(y)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(left - 6.0),
            fmt(y + 4.0),
            fmt(t)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {} {})\">{}</text>\n",
        fmt(18.0),
        fmt((top + bottom) / 2.0),
        fmt(18.0),
        fmt((top + bottom) / 2.0),
        y_label
    ));

    for (idx, (_, points)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(f, v)| format!("{},{}", fmt(x_map(f)), fmt(y_map(v))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
    }
}

fn format_frequency(f: f64) -> String {
    if f >= 1000.0 {
        format!("{} kHz", fmt(f / 1000.0))
    } else {
        format!("{} Hz", fmt(f))
    }
}

/// Render labeled curves as a stacked magnitude/phase Bode figure.
pub fn emit_bode_svg<W: Write>(
    curves: &[(&str, &ImpedanceCurve)],
    title: &str,
    mut w: W,
) -> Result<()> {
    if curves.is_empty() || curves.iter().any(|(_, c)| c.is_empty()) {
        return Err(Error::EmptyCurve);
    }

    let x_lo = curves
        .iter()
        .map(|(_, c)| c.f_min())
        .fold(f64::INFINITY, f64::min);
    let x_hi = curves
        .iter()
        .map(|(_, c)| c.f_max())
        .fold(f64::NEG_INFINITY, f64::max);

    let mag_series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(label, c)| {
            (
                label.to_string(),
                c.frequencies()
                    .iter()
                    .copied()
                    .zip(c.magnitude_db())
                    .collect(),
            )
        })
        .collect();
    let phase_series: Vec<(String, Vec<(f64, f64)>)> = curves
        .iter()
        .map(|(label, c)| {
            (
                label.to_string(),
                c.frequencies()
                    .iter()
                    .copied()
                    .zip(c.phase_deg_unwrapped())
                    .collect(),
            )
        })
        .collect();

    let mag_axis = Axis::from_values(mag_series.iter().flat_map(|(_, p)| p.iter().map(|&(_, v)| v)));
    let phase_axis =
        Axis::from_values(phase_series.iter().flat_map(|(_, p)| p.iter().map(|&(_, v)| v)));

    let height = MARGIN_TOP + 2.0 * PANEL_HEIGHT + PANEL_GAP + MARGIN_BOTTOM;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\">\n",
        fmt(WIDTH),
        fmt(height),
        fmt(WIDTH),
        fmt(height)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        fmt(WIDTH / 2.0),
        xml_escape(title)
    ));

    panel(&mut out, MARGIN_TOP, x_lo, x_hi, &mag_axis, "magnitude [dB re 1 ohm]", &mag_series);
    panel(
        &mut out,
        MARGIN_TOP + PANEL_HEIGHT + PANEL_GAP,
        x_lo,
        x_hi,
        &phase_axis,
        "phase [deg]",
        &phase_series,
    );

    // legend under the phase panel
    let legend_y = MARGIN_TOP + 2.0 * PANEL_HEIGHT + PANEL_GAP + 34.0;
    let mut x = MARGIN_LEFT;
    for (idx, (label, _)) in curves.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        out.push_str(&format!(
            "<line x1=\"{x1}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            x1 = fmt(x),
            x2 = fmt(x + 22.0),
            y = fmt(legend_y - 4.0)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
            fmt(x + 27.0),
            fmt(legend_y),
            xml_escape(label)
        ));
        x += 34.0 + 7.0 * label.len() as f64 + 20.0;
    }

    out.push_str("</svg>\n");
    w.write_all(out.as_bytes())?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
