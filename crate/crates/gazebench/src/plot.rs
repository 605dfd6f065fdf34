//! Deterministic SVG charts. Every function is a pure map from data to an
//! SVG 1.1 document: no timestamps, no randomness, fixed element ordering,
//! so identical inputs give byte-identical files.

use crate::error::{Error, Result};
use crate::tracelab::IntensityHistogram;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#9d755d", "#eeca3b",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

fn open_svg(title: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" \
         height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{x}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{t}</text>\n",
        x = WIDTH / 2.0,
        t = esc(title),
    );
    s
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        Scale { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn axes(out: &mut String, x: &Scale, y: &Scale, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = num(MARGIN_L),
        r = num(WIDTH - MARGIN_R),
        t = num(MARGIN_T),
        b = num(HEIGHT - MARGIN_B),
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x.lo + f * (x.hi - x.lo);
        let yv = y.lo + f * (y.hi - y.lo);
        let xp = x.map(xv);
        let yp = y.map(yv);
        let _ = write!(
            out,
            "<line x1=\"{xp}\" y1=\"{b}\" x2=\"{xp}\" y2=\"{b2}\" stroke=\"black\"/>\n\
             <text x=\"{xp}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{xl}</text>\n\
             <line x1=\"{l}\" y1=\"{yp}\" x2=\"{l2}\" y2=\"{yp}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{typ}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{yl}</text>\n",
            xp = num(xp),
            b = num(HEIGHT - MARGIN_B),
            b2 = num(HEIGHT - MARGIN_B + 5.0),
            ty = num(HEIGHT - MARGIN_B + 18.0),
            xl = num(xv),
            l = num(MARGIN_L),
            l2 = num(MARGIN_L - 5.0),
            yp = num(yp),
            tx = num(MARGIN_L - 8.0),
            typ = num(yp + 4.0),
            yl = num(yv),
        );
    }
    let _ = write!(
        out,
        "<text x=\"{cx}\" y=\"{cy}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{xl}</text>\n\
         <text x=\"16\" y=\"{my}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 16 {my})\">{yl}</text>\n",
        cx = num((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        cy = num(HEIGHT - 12.0),
        xl = esc(x_label),
        my = num((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
        yl = esc(y_label),
    );
}

/// Scatter plot with an optional least-squares trend line, given as
/// (intercept, slope) in data units.
pub fn scatter_with_trend(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    trend: Option<(f64, f64)>,
) -> Result<String> {
    if points.is_empty() {
        return Err(Error::EmptyData("scatter plot without points".into()));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidInput("scatter point is not finite".into()));
    }
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let ymin = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let xpad = 0.05 * (xmax - xmin).max(1e-9);
    let ypad = 0.05 * (ymax - ymin).max(1e-9);
    let x = Scale::new(xmin - xpad, xmax + xpad, MARGIN_L, WIDTH - MARGIN_R);
    let y = Scale::new(ymin - ypad, ymax + ypad, HEIGHT - MARGIN_B, MARGIN_T);

    let mut out = open_svg(title);
    axes(&mut out, &x, &y, x_label, y_label);
    if let Some((intercept, slope)) = trend {
        let y1 = intercept + slope * x.lo;
        let y2 = intercept + slope * x.hi;
        let _ = write!(
            out,
            "<line class=\"trend\" x1=\"{a}\" y1=\"{b}\" x2=\"{c}\" y2=\"{d}\" \
             stroke=\"{col}\" stroke-width=\"2\" stroke-dasharray=\"6 3\"/>\n",
            a = num(x.map(x.lo)),
            b = num(y.map(y1)),
            c = num(x.map(x.hi)),
            d = num(y.map(y2)),
            col = PALETTE[1],
        );
    }
    for (px, py) in points {
        let _ = write!(
            out,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"3\" fill=\"{col}\" fill-opacity=\"0.8\"/>\n",
            cx = num(x.map(*px)),
            cy = num(y.map(*py)),
            col = PALETTE[0],
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Bar chart of labeled intensity histograms; series share bins and are
/// drawn side by side within each bin.
pub fn histogram_svg(title: &str, series: &[(&str, &IntensityHistogram)]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::EmptyData("histogram plot without series".into()));
    }
    let bins = series[0].1.counts.len();
    if series.iter().any(|(_, h)| h.counts.len() != bins) {
        return Err(Error::InvalidInput("histogram series disagree on bin count".into()));
    }
    let max_count = series
        .iter()
        .flat_map(|(_, h)| h.counts.iter())
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let x = Scale::new(series[0].1.lo, series[0].1.hi, MARGIN_L, WIDTH - MARGIN_R);
    let y = Scale::new(0.0, max_count, HEIGHT - MARGIN_B, MARGIN_T);

    let mut out = open_svg(title);
    axes(&mut out, &x, &y, "intensity", "frames");
    let bin_px = (WIDTH - MARGIN_L - MARGIN_R) / bins as f64;
    let bar_px = bin_px / series.len() as f64;
    for (si, (label, hist)) in series.iter().enumerate() {
        let col = PALETTE[si % PALETTE.len()];
        for (bi, count) in hist.counts.iter().enumerate() {
            if *count == 0 {
                continue;
            }
            let x0 = MARGIN_L + bin_px * bi as f64 + bar_px * si as f64;
            let yp = y.map(*count as f64);
            let _ = write!(
                out,
                "<rect x=\"{x0}\" y=\"{yp}\" width=\"{w}\" height=\"{h}\" fill=\"{col}\" \
                 fill-opacity=\"0.85\"/>\n",
                x0 = num(x0),
                yp = num(yp),
                w = num((bar_px - 0.5).max(0.5)),
                h = num(HEIGHT - MARGIN_B - yp),
            );
        }
        let _ = write!(
            out,
            "<rect x=\"{lx}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{col}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{lab}</text>\n",
            lx = num(MARGIN_L + 10.0),
            ly = num(MARGIN_T + 6.0 + 18.0 * si as f64),
            tx = num(MARGIN_L + 26.0),
            ty = num(MARGIN_T + 16.0 + 18.0 * si as f64),
            lab = esc(label),
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One cluster of bars sharing a label.
#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    pub label: String,
    /// One value per series, in `series_names` order.
    pub values: Vec<f64>,
}

/// Grouped bar chart; bars of a group sit side by side. Negative values
/// hang below the zero baseline.
pub fn grouped_bars_svg(title: &str, series_names: &[String], groups: &[BarGroup]) -> Result<String> {
    if groups.is_empty() || series_names.is_empty() {
        return Err(Error::EmptyData("bar chart without data".into()));
    }
    for g in groups {
        if g.values.len() != series_names.len() {
            return Err(Error::InvalidInput(format!(
                "group `{}` has {} values for {} series",
                g.label,
                g.values.len(),
                series_names.len()
            )));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("group `{}` has a non-finite value", g.label)));
        }
    }
    let vmax = groups.iter().flat_map(|g| g.values.iter()).fold(0.0f64, |a, &b| a.max(b));
    let vmin = groups.iter().flat_map(|g| g.values.iter()).fold(0.0f64, |a, &b| a.min(b));
    let y = Scale::new(vmin, vmax, HEIGHT - MARGIN_B, MARGIN_T);

    let mut out = open_svg(title);
    let group_px = (WIDTH - MARGIN_L - MARGIN_R) / groups.len() as f64;
    let bar_px = group_px * 0.8 / series_names.len() as f64;
    let base = y.map(0.0);
    let _ = write!(
        out,
        "<line x1=\"{l}\" y1=\"{base}\" x2=\"{r}\" y2=\"{base}\" stroke=\"black\"/>\n",
        l = num(MARGIN_L),
        r = num(WIDTH - MARGIN_R),
        base = num(base),
    );
    for (gi, g) in groups.iter().enumerate() {
        let gx = MARGIN_L + group_px * (gi as f64 + 0.1);
        for (si, v) in g.values.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let yp = y.map(*v);
            let (top, h) = if yp < base { (yp, base - yp) } else { (base, yp - base) };
            let _ = write!(
                out,
                "<rect x=\"{x}\" y=\"{top}\" width=\"{w}\" height=\"{h}\" fill=\"{col}\"/>\n",
                x = num(gx + bar_px * si as f64),
                top = num(top),
                w = num((bar_px - 1.0).max(0.5)),
                h = num(h),
                col = PALETTE[si % PALETTE.len()],
            );
        }
        let _ = write!(
            out,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{lab}</text>\n",
            x = num(gx + group_px * 0.4),
            y = num(HEIGHT - MARGIN_B + 18.0),
            lab = esc(&g.label),
        );
    }
    for (si, name) in series_names.iter().enumerate() {
        let _ = write!(
            out,
            "<rect x=\"{lx}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{col}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{lab}</text>\n",
            lx = num(MARGIN_L + 10.0),
            ly = num(MARGIN_T + 6.0 + 18.0 * si as f64),
            col = PALETTE[si % PALETTE.len()],
            tx = num(MARGIN_L + 26.0),
            ty = num(MARGIN_T + 16.0 + 18.0 * si as f64),
            lab = esc(name),
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One wedge of the radial chart: a labeled stack of band values.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSector {
    pub label: String,
    /// One value per band, in `band_names` order; all non-negative.
    pub values: Vec<f64>,
}

fn polar(cx: f64, cy: f64, r: f64, angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.to_radians();
    (cx + r * a.cos(), cy + r * a.sin())
}

fn sector_paths(
    out: &mut String,
    sectors: &[RadialSector],
    start_deg: f64,
    span_deg: f64,
    cx: f64,
    cy: f64,
    r0: f64,
    r_max: f64,
    unit: f64,
) {
    let slice = span_deg / sectors.len() as f64;
    for (i, s) in sectors.iter().enumerate() {
        let a0 = start_deg + slice * i as f64 + 1.0;
        let a1 = start_deg + slice * (i as f64 + 1.0) - 1.0;
        let mut r_in = r0;
        for (bi, v) in s.values.iter().enumerate() {
            let thick = v * unit;
            if thick <= 0.0 {
                continue;
            }
            let r_out = r_in + thick;
            let (x1, y1) = polar(cx, cy, r_out, a0);
            let (x2, y2) = polar(cx, cy, r_out, a1);
            let (x3, y3) = polar(cx, cy, r_in, a1);
            let (x4, y4) = polar(cx, cy, r_in, a0);
            let _ = write!(
                out,
                "<path d=\"M {x1} {y1} A {ro} {ro} 0 0 1 {x2} {y2} L {x3} {y3} \
                 A {ri} {ri} 0 0 0 {x4} {y4} Z\" fill=\"{col}\" stroke=\"white\" \
                 stroke-width=\"0.5\"/>\n",
                x1 = num(x1),
                y1 = num(y1),
                ro = num(r_out),
                x2 = num(x2),
                y2 = num(y2),
                x3 = num(x3),
                y3 = num(y3),
                ri = num(r_in),
                x4 = num(x4),
                y4 = num(y4),
                col = PALETTE[bi % PALETTE.len()],
            );
            r_in = r_out;
        }
        let mid = (a0 + a1) / 2.0;
        let (tx, ty) = polar(cx, cy, r_max + 14.0, mid);
        let _ = write!(
            out,
            "<text x=\"{tx}\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"10\">{lab}</text>\n",
            tx = num(tx),
            ty = num(ty),
            lab = esc(&s.label),
        );
    }
}

/// Radial stacked chart: each sector stacks its band values outward from a
/// common inner radius; the `left` sectors fill the left half circle, the
/// `right` sectors the right half.
pub fn radial_stacked_svg(
    title: &str,
    band_names: &[String],
    left_label: &str,
    left: &[RadialSector],
    right_label: &str,
    right: &[RadialSector],
) -> Result<String> {
    if band_names.is_empty() || (left.is_empty() && right.is_empty()) {
        return Err(Error::EmptyData("radial chart without sectors".into()));
    }
    for s in left.iter().chain(right) {
        if s.values.len() != band_names.len() {
            return Err(Error::InvalidInput(format!(
                "sector `{}` has {} values for {} bands",
                s.label,
                s.values.len(),
                band_names.len()
            )));
        }
        if s.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "sector `{}` has a negative or non-finite value",
                s.label
            )));
        }
    }
    let (cx, cy) = (WIDTH / 2.0, (HEIGHT + 20.0) / 2.0);
    let r0 = 42.0;
    let r_max = 180.0;
    let tallest = left
        .iter()
        .chain(right)
        .map(|s| s.values.iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    let unit = if tallest > 0.0 { (r_max - r0) / tallest } else { 0.0 };

    let mut out = open_svg(title);
    let _ = write!(
        out,
        "<line x1=\"{cx}\" y1=\"{t}\" x2=\"{cx}\" y2=\"{b}\" stroke=\"#999\" \
         stroke-dasharray=\"4 4\"/>\n\
         <circle cx=\"{cx}\" cy=\"{cy}\" r=\"{r0}\" fill=\"none\" stroke=\"#ccc\"/>\n",
        cx = num(cx),
        t = num(cy - r_max - 6.0),
        b = num(cy + r_max + 6.0),
        cy = num(cy),
        r0 = num(r0),
    );
    // SVG angles grow clockwise; 90..270 sweeps the left half through the
    // bottom, 270..450 the right half through the top.
    if !left.is_empty() {
        sector_paths(&mut out, left, 90.0, 180.0, cx, cy, r0, r_max, unit);
    }
    if !right.is_empty() {
        sector_paths(&mut out, right, 270.0, 180.0, cx, cy, r0, r_max, unit);
    }
    let _ = write!(
        out,
        "<text x=\"{lx}\" y=\"{ly}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{ll}</text>\n\
         <text x=\"{rx}\" y=\"{ly}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{rl}</text>\n",
        lx = num(cx - r_max / 2.0 - 40.0),
        ly = num(cy - r_max - 14.0),
        ll = esc(left_label),
        rx = num(cx + r_max / 2.0 + 40.0),
        rl = esc(right_label),
    );
    for (bi, name) in band_names.iter().enumerate() {
        let _ = write!(
            out,
            "<rect x=\"{lx}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{col}\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{lab}</text>\n",
            lx = num(12.0),
            ly = num(MARGIN_T + 6.0 + 18.0 * bi as f64),
            col = PALETTE[bi % PALETTE.len()],
            tx = num(28.0),
            ty = num(MARGIN_T + 16.0 + 18.0 * bi as f64),
            lab = esc(name),
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracelab::intensity_histogram;

    #[test]
    fn scatter_is_deterministic_and_draws_everything() {
        let pts = vec![(1.0, 400.0), (2.0, 2200.0), (1.5, 1300.0)];
        let a = scatter_with_trend("mt by difficulty", "bits", "ms", &pts, Some((400.0, 900.0)))
            .unwrap();
        let b = scatter_with_trend("mt by difficulty", "bits", "ms", &pts, Some((400.0, 900.0)))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<circle cx=").count(), 3);
        assert!(a.contains("class=\"trend\""));
        assert!(a.starts_with("<svg "));
        assert!(a.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn scatter_rejects_empty_and_non_finite() {
        assert!(matches!(
            scatter_with_trend("t", "x", "y", &[], None),
            Err(Error::EmptyData(_))
        ));
        assert!(scatter_with_trend("t", "x", "y", &[(f64::NAN, 1.0)], None).is_err());
    }

    #[test]
    fn histogram_draws_a_bar_per_nonzero_bin() {
        let h = intensity_histogram(&[10.0, 10.0, 200.0], 8).unwrap();
        let nonzero = h.counts.iter().filter(|&&c| c > 0).count();
        let svg = histogram_svg("intensities", &[("category1", &h)]).unwrap();
        let bars = svg.matches("fill-opacity=\"0.85\"").count();
        assert_eq!(bars, nonzero);
        assert!(histogram_svg("t", &[]).is_err());
    }

    #[test]
    fn grouped_bars_skip_zeros_and_validate_shape() {
        let names = vec!["left".to_string(), "right".to_string()];
        let groups = vec![
            BarGroup { label: "mv".into(), values: vec![1.5, 0.0] },
            BarGroup { label: "me".into(), values: vec![0.5, -0.7] },
        ];
        let svg = grouped_bars_svg("metrics", &names, &groups).unwrap();
        let bars = svg
            .lines()
            .filter(|l| l.starts_with("<rect") && l.contains("fill=\"#") && !l.contains("width=\"12\""))
            .count();
        assert_eq!(bars, 3, "zero-valued bar is omitted");
        let bad = vec![BarGroup { label: "mv".into(), values: vec![1.0] }];
        assert!(grouped_bars_svg("metrics", &names, &bad).is_err());
        assert!(grouped_bars_svg("metrics", &names, &[]).is_err());
    }

    #[test]
    fn radial_chart_drops_zeroed_bands_everywhere() {
        let bands: Vec<String> =
            ["mv", "me", "mo", "odc", "mdc", "tac", "re"].iter().map(|s| s.to_string()).collect();
        let sector = |label: &str, zero_idx: usize| {
            let mut values = vec![1.0; 7];
            values[zero_idx] = 0.0;
            RadialSector { label: label.into(), values }
        };
        let left = vec![sector("1.9", 2), sector("2.0", 2)];
        let right = vec![sector("1.9", 2), sector("2.0", 2)];
        let svg =
            radial_stacked_svg("profile", &bands, "plain", &left, "assisted", &right).unwrap();
        let zero_band_color = PALETTE[2];
        let band_paths = svg
            .lines()
            .filter(|l| l.starts_with("<path") && l.contains(zero_band_color))
            .count();
        assert_eq!(band_paths, 0, "zeroed metric must not appear in any sector");
        let other_color_paths = svg
            .lines()
            .filter(|l| l.starts_with("<path") && l.contains(PALETTE[0]))
            .count();
        assert_eq!(other_color_paths, 4, "one band per sector for live metrics");
        assert_eq!(
            svg,
            radial_stacked_svg("profile", &bands, "plain", &left, "assisted", &right).unwrap()
        );
    }

    #[test]
    fn radial_chart_validates_input() {
        let bands = vec!["a".to_string()];
        assert!(matches!(
            radial_stacked_svg("t", &bands, "l", &[], "r", &[]),
            Err(Error::EmptyData(_))
        ));
        let bad = vec![RadialSector { label: "s".into(), values: vec![1.0, 2.0] }];
        assert!(radial_stacked_svg("t", &bands, "l", &bad, "r", &[]).is_err());
        let neg = vec![RadialSector { label: "s".into(), values: vec![-1.0] }];
        assert!(radial_stacked_svg("t", &bands, "l", &neg, "r", &[]).is_err());
    }

    #[test]
    fn labels_are_xml_escaped() {
        let pts = vec![(1.0, 1.0)];
        let svg = scatter_with_trend("a < b & c", "x", "y", &pts, None).unwrap();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(!svg.contains("a < b & c"));
    }
}
