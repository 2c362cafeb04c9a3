//! Static SVG emission for the rate plot: log mean-loss against delta^2,
//! one scatter series per algorithm, the fitted line, and the reference
//! slope -1/8 drawn through the fitted intercept.

use speclust::harness::RateFit;

pub struct RateSeries {
    pub name: String,
    /// (delta^2, log mean loss) for the uncensored grid points.
    pub points: Vec<(f64, f64)>,
    pub fit: RateFit,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const ML: f64 = 70.0; // margins
const MR: f64 = 20.0;
const MT: f64 = 30.0;
const MB: f64 = 55.0;
const COLORS: [&str; 3] = ["#1f6fb2", "#c23b22", "#3f8f3f"];

pub fn rate_plot(series: &[RateSeries]) -> String {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x0, x1) = padded_range(pts.iter().map(|p| p.0));
    let (y0, y1) = padded_range(pts.iter().map(|p| p.1));
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut body = String::new();
    // frame and ticks
    body.push_str(&format!(
        "<rect x='{ML}' y='{MT}' width='{}' height='{}' fill='none' stroke='#444'/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    for (t, x) in ticks(x0, x1) {
        body.push_str(&format!(
            "<line x1='{0:.2}' y1='{1}' x2='{0:.2}' y2='{2}' stroke='#444'/>\n",
            sx(x),
            H - MB,
            H - MB + 5.0
        ));
        body.push_str(&format!(
            "<text x='{:.2}' y='{}' font-size='11' text-anchor='middle'>{t}</text>\n",
            sx(x),
            H - MB + 18.0
        ));
    }
    for (t, y) in ticks(y0, y1) {
        body.push_str(&format!(
            "<line x1='{0}' y1='{1:.2}' x2='{2}' y2='{1:.2}' stroke='#444'/>\n",
            ML - 5.0,
            sy(y),
            ML
        ));
        body.push_str(&format!(
            "<text x='{}' y='{:.2}' font-size='11' text-anchor='end'>{t}</text>\n",
            ML - 8.0,
            sy(y) + 4.0
        ));
    }
    body.push_str(&format!(
        "<text x='{:.1}' y='{:.1}' font-size='13' text-anchor='middle'>delta^2</text>\n",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    ));
    body.push_str(&format!(
        "<text x='16' y='{:.1}' font-size='13' text-anchor='middle' transform='rotate(-90 16 {:.1})'>log mean loss</text>\n",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    ));

    for (si, s) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        for &(x, y) in &s.points {
            body.push_str(&format!(
                "<circle cx='{:.2}' cy='{:.2}' r='3.5' fill='{color}'/>\n",
                sx(x),
                sy(y)
            ));
        }
        // fitted line over the visible x-range
        let fy = |x: f64| s.fit.intercept + s.fit.slope * x;
        body.push_str(&format!(
            "<line x1='{:.2}' y1='{:.2}' x2='{:.2}' y2='{:.2}' stroke='{color}' stroke-width='1.8'/>\n",
            sx(x0),
            sy(fy(x0)),
            sx(x1),
            sy(fy(x1))
        ));
        // reference slope -1/8 through the fitted intercept
        let ry = |x: f64| s.fit.intercept + s.fit.reference_slope * x;
        body.push_str(&format!(
            "<line x1='{:.2}' y1='{:.2}' x2='{:.2}' y2='{:.2}' stroke='{color}' stroke-width='1.2' stroke-dasharray='6 4' opacity='0.7'/>\n",
            sx(x0),
            sy(ry(x0)),
            sx(x1),
            sy(ry(x1))
        ));
        body.push_str(&format!(
            "<text x='{:.1}' y='{:.1}' font-size='12' fill='{color}'>{}: slope {:.4} (ref -0.125 dashed)</text>\n",
            ML + 10.0,
            MT + 16.0 + 16.0 * si as f64,
            s.name,
            s.fit.slope
        ));
    }

    format!(
        "<svg xmlns='http://www.w3.org/2000/svg' width='{W}' height='{H}' viewBox='0 0 {W} {H}'>\n\
         <rect width='{W}' height='{H}' fill='white'/>\n{body}</svg>\n"
    )
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-9);
    (lo - 0.08 * span, hi + 0.08 * span)
}

fn ticks(lo: f64, hi: f64) -> Vec<(String, f64)> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= 6.0)
        .unwrap_or(mag * 10.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 {
        out.push((format!("{t:.6}").trim_end_matches('0').trim_end_matches('.').to_string(), t));
        t += step;
    }
    out
}
