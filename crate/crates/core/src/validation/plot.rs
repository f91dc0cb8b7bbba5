use std::fmt::Write as _;

use super::{AucResult, CoverageResult};

/// `pct_scale,cum_err,threshold`
pub fn coverage_csv(c: &CoverageResult) -> String {
    let mut s = String::from("pct_scale,cum_err,threshold\n");
    for (x, y) in &c.cumulative_curve {
        let _ = writeln!(s, "{x},{y},{}", c.threshold);
    }
    s
}

/// `pct_scale,abs_error,smoothed_err,e_avg`, with `sorted_errors` in AD order.
pub fn auc_csv(a: &AucResult, sorted_errors: &[f64]) -> String {
    let n = a.smoothed_curve.len();
    let mut s = String::from("pct_scale,abs_error,smoothed_err,e_avg\n");
    for (i, (e, m)) in sorted_errors.iter().zip(&a.smoothed_curve).enumerate() {
        let _ = writeln!(s, "{},{e},{m},{}", 100.0 * (i + 1) as f64 / n as f64, a.e_avg);
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG line plot over `x ∈ [0, 100]` with a dashed horizontal
/// rule at `rule`.
pub fn curve_svg(title: &str, y_label: &str, points: &[(f64, f64)], rule: f64, rule_label: &str) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 20.0, 30.0, 40.0);
    let ys = points.iter().map(|p| p.1).chain(std::iter::once(rule)).filter(|v| v.is_finite());
    let (mut lo, mut hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let px = |x: f64| left + x / 100.0 * (w - left - right);
    let py = |y: f64| top + (hi - y) / (hi - lo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let (x0, x1, y0, y1) = (px(0.0), px(100.0), py(lo), py(hi));
    let _ = writeln!(s, r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" stroke="black" fill="none"/>"#);
    for t in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{t}</text>"#,
            px(t),
            y0 + 15.0
        );
    }
    for t in [lo, (lo + hi) / 2.0, hi] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{t:.3}</text>"#,
            x0 - 4.0,
            py(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">% of test set (AD order)</text>"#,
        w / 2.0,
        h - 5.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    if !points.is_empty() {
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#, coords.join(" "));
    }
    if rule.is_finite() {
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{r:.2}" x2="{x1:.2}" y2="{r:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            r = py(rule)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="firebrick" text-anchor="end">{} = {rule:.4}</text>"#,
            x1,
            py(rule) - 4.0,
            escape(rule_label)
        );
    }
    s.push_str("</svg>\n");
    s
}
