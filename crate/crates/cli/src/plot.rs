//! Static SVG line plots of per-subject marker series.

use std::fmt::Write;

use cohmark::marker::MarkerSeries;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One polyline per subject: visit index on x, marker on y. Output depends
/// only on the input, so repeated renders are byte-identical.
pub fn series_svg(title: &str, series: &[MarkerSeries]) -> String {
    let points = series.iter().flat_map(|s| s.visits.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (v, m) in points {
        x0 = x0.min(v as f64);
        x1 = x1.max(v as f64);
        y0 = y0.min(m);
        y1 = y1.max(m);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (1.0, 2.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{left:.1} {top:.1} L{left:.1} {bottom:.1} L{right:.1} {bottom:.1}" stroke="black" fill="none"/>"#
    );
    for v in (x0 as i64)..=(x1 as i64) {
        let x = sx(v as f64);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{v}</text>"#,
            bottom + 16.0
        );
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{y:.3}</text>"#,
            left - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">visit</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .visits
            .iter()
            .map(|&(v, m)| format!("{:.2},{:.2}", sx(v as f64), sy(m)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" stroke="{colour}" fill="none" stroke-width="1.5"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.subject_id)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use cohmark::ingest::Diagnosis;

    #[test]
    fn one_polyline_per_subject() {
        let s = |id: &str, v: &[(u32, f64)]| MarkerSeries {
            subject_id: id.into(),
            diagnosis: Diagnosis::Ad,
            visits: v.to_vec(),
        };
        let svg = series_svg("ad <cohort>", &[s("a", &[(1, 0.5), (2, 0.4)]), s("b", &[(1, 0.6), (3, 0.7)])]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("ad &lt;cohort&gt;"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg, series_svg("ad <cohort>", &[s("a", &[(1, 0.5), (2, 0.4)]), s("b", &[(1, 0.6), (3, 0.7)])]));
        assert!(series_svg("empty", &[]).contains("</svg>"));
    }
}
