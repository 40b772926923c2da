//! Minimal static SVG line charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Draw markers only.
    pub scatter: bool,
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let mut b: Option<(f64, f64, f64, f64)> = None;
    for &(x, y) in pts {
        b = Some(match b {
            None => (x, x, y, y),
            Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
        });
    }
    b.map(|(x0, x1, y0, y1)| {
        let (x1, y1) = (if x1 > x0 { x1 } else { x0 + 1.0 }, if y1 > y0 { y1 } else { y0 + 1.0 });
        (x0, x1, y0, y1)
    })
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{y_label}</text>"#,
        HEIGHT / 2.0
    );
    let Some((x0, x1, y0, y1)) = bounds(series) else {
        s.push_str("</svg>\n");
        return s;
    };
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN + ph - (y - y0) / (y1 - y0) * ph;
    for (i, t) in [0.0, 0.5, 1.0].iter().enumerate() {
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let anchor = ["start", "middle", "end"][i];
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="{anchor}">{xv:.4}</text>"#, px(xv), HEIGHT - MARGIN + 15.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#, MARGIN - 5.0, py(yv) + 4.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> =
            ser.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| (px(x), py(y))).collect();
        if ser.scatter {
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
            }
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, path.join(" "));
        }
        let ly = MARGIN + 15.0 + 15.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 5.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polyline_and_skips_nonfinite() {
        let svg = line_chart(
            "t",
            "x",
            "y",
            &[Series { label: "a".into(), points: vec![(0.0, 1.0), (1.0, f64::NEG_INFINITY), (2.0, 3.0)], scatter: false }],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("inf"));
    }
}
