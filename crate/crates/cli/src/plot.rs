//! Static SVG plots of a finished run: the 2-D paths and the
//! distance-versus-headway curves. No interactivity, just artifacts that
//! drop out of every run for quick visual inspection.

use platoon_core::consensus::ReferenceSignal;
use platoon_core::sim::TrajectoryLog;
use std::fmt::Write as _;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 620.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 54.0;
/// Points per polyline before downsampling kicks in.
const MAX_POINTS: usize = 1600;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let mut f = Frame {
            x_min: f64::MAX,
            x_max: f64::MIN,
            y_min: f64::MAX,
            y_max: f64::MIN,
        };
        for &(x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        // Pad 4% so strokes stay off the axes; guard degenerate ranges.
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = (*hi - *lo).max(1e-9);
            *lo -= 0.04 * span;
            *hi += 0.04 * span;
        };
        pad(&mut f.x_min, &mut f.x_max);
        pad(&mut f.y_min, &mut f.y_max);
        f
    }

    fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        let px =
            MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = HEIGHT
            - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B);
        (px, py)
    }
}

/// Tick spacing of roughly range/n snapped to 1/2/5 decades.
fn nice_step(range: f64, n: usize) -> f64 {
    let raw = range / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let snapped = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    snapped * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn downsample(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<(f64, f64)> = points.iter().copied().step_by(stride).collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

struct SvgBuilder {
    body: String,
    frame: Frame,
}

impl SvgBuilder {
    fn new(frame: Frame, title: &str, x_label: &str, y_label: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(
            body,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            body,
            r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
            (WIDTH - MARGIN_R + MARGIN_L) / 2.0
        );
        let mut b = SvgBuilder { body, frame };
        b.axes(x_label, y_label);
        b
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let f = &self.frame;
        let x_step = nice_step(f.x_max - f.x_min, 6);
        let y_step = nice_step(f.y_max - f.y_min, 6);
        let mut x = (f.x_min / x_step).ceil() * x_step;
        while x <= f.x_max {
            let (px, _) = f.to_px(x, 0.0);
            let _ = writeln!(
                self.body,
                r##"<line x1="{px:.1}" y1="{}" x2="{px:.1}" y2="{}" stroke="#ddd" stroke-width="1"/>"##,
                MARGIN_T,
                HEIGHT - MARGIN_B
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{px:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
                HEIGHT - MARGIN_B + 16.0,
                fmt_tick(x)
            );
            x += x_step;
        }
        let mut y = (f.y_min / y_step).ceil() * y_step;
        while y <= f.y_max {
            let (_, py) = f.to_px(0.0, y);
            let _ = writeln!(
                self.body,
                r##"<line x1="{}" y1="{py:.1}" x2="{}" y2="{py:.1}" stroke="#ddd" stroke-width="1"/>"##,
                MARGIN_L,
                WIDTH - MARGIN_R
            );
            let _ = writeln!(
                self.body,
                r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
                MARGIN_L - 6.0,
                py + 4.0,
                fmt_tick(y)
            );
            y += y_step;
        }
        let _ = writeln!(
            self.body,
            r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{}" height="{}" fill="none" stroke="#333" stroke-width="1"/>"##,
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text>"#,
            (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
            HEIGHT - 14.0
        );
        let _ = writeln!(
            self.body,
            r#"<text x="18" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
            (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
            (HEIGHT - MARGIN_B + MARGIN_T) / 2.0
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64, dash: Option<&str>) {
        if points.is_empty() {
            return;
        }
        let pts: Vec<String> = downsample(points)
            .iter()
            .map(|&(x, y)| {
                let (px, py) = self.frame.to_px(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let dash_attr = dash
            .map(|d| format!(r#" stroke-dasharray="{d}""#))
            .unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"{dash_attr}/>"#,
            pts.join(" ")
        );
    }

    fn cross_marker(&mut self, x: f64, y: f64, color: &str) {
        let (px, py) = self.frame.to_px(x, y);
        let r = 5.0;
        let _ = writeln!(
            self.body,
            r#"<path d="M {x1:.1} {y1:.1} L {x2:.1} {y2:.1} M {x1:.1} {y2:.1} L {x2:.1} {y1:.1}" stroke="{color}" stroke-width="2"/>"#,
            x1 = px - r,
            y1 = py - r,
            x2 = px + r,
            y2 = py + r
        );
    }

    fn dot_marker(&mut self, x: f64, y: f64, color: &str) {
        let (px, py) = self.frame.to_px(x, y);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{px:.1}" cy="{py:.1}" r="4" fill="{color}"/>"#
        );
    }

    fn legend_entry(&mut self, row: usize, color: &str, dash: Option<&str>, label: &str) {
        let x = WIDTH - MARGIN_R + 12.0;
        let y = MARGIN_T + 14.0 + row as f64 * 18.0;
        let dash_attr = dash
            .map(|d| format!(r#" stroke-dasharray="{d}""#))
            .unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash_attr}/>"#,
            x + 22.0
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{label}</text>"#,
            x + 28.0,
            y + 4.0
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// 2-D paths of every follower plus the reference course, start positions
/// crossed, final positions dotted.
pub fn trajectory_svg(log: &TrajectoryLog, reference: &ReferenceSignal) -> String {
    let k = log.records.first().map_or(0, |r| r.states.len());
    let follower_paths: Vec<Vec<(f64, f64)>> = (0..k)
        .map(|i| {
            log.records
                .iter()
                .map(|r| (r.states[i].east, r.states[i].north))
                .collect()
        })
        .collect();
    let ref_path: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| {
            let p = reference.eval(r.t);
            (p.x, p.y)
        })
        .collect();

    let frame = Frame::from_points(follower_paths.iter().flatten().chain(ref_path.iter()));
    let mut svg = SvgBuilder::new(frame, "Platoon trajectories", "east (m)", "north (m)");
    svg.polyline(&ref_path, "#888", 1.5, Some("6 4"));
    svg.legend_entry(0, "#888", Some("6 4"), "reference");
    for (i, path) in follower_paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.polyline(path, color, 1.8, None);
        svg.legend_entry(i + 1, color, None, &format!("follower {}", i + 1));
        if let (Some(&first), Some(&last)) = (path.first(), path.last()) {
            svg.cross_marker(first.0, first.1, color);
            svg.dot_marker(last.0, last.1, color);
        }
    }
    svg.finish()
}

/// Adjacent-pair distances against their binding headway requirement,
/// plus the unconstrained reference-to-follower-1 distance.
pub fn distances_svg(log: &TrajectoryLog) -> String {
    let k = log.records.first().map_or(0, |r| r.states.len());
    let pairs = k.saturating_sub(1);
    let mut curves: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = Vec::with_capacity(pairs);
    for p in 0..pairs {
        let dist: Vec<(f64, f64)> = log
            .records
            .iter()
            .map(|r| (r.t, r.pair_distances[p]))
            .collect();
        let min_safe: Vec<(f64, f64)> = log
            .records
            .iter()
            .map(|r| (r.t, r.pair_min_safe[p]))
            .collect();
        curves.push((dist, min_safe));
    }
    let leader: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| (r.t, r.leader_distance))
        .collect();

    let frame = Frame::from_points(
        curves
            .iter()
            .flat_map(|(d, m)| d.iter().chain(m.iter()))
            .chain(leader.iter()),
    );
    let mut svg = SvgBuilder::new(
        frame,
        "Inter-agent distances vs. headway",
        "t (s)",
        "distance (m)",
    );
    svg.polyline(&leader, "#888", 1.2, Some("2 3"));
    svg.legend_entry(0, "#888", Some("2 3"), "ref to follower 1");
    for (p, (dist, min_safe)) in curves.iter().enumerate() {
        let color = PALETTE[p % PALETTE.len()];
        svg.polyline(dist, color, 1.8, None);
        svg.polyline(min_safe, color, 1.2, Some("5 4"));
        svg.legend_entry(2 * p + 1, color, None, &format!("dist {}-{}", p + 1, p + 2));
        svg.legend_entry(
            2 * p + 2,
            color,
            Some("5 4"),
            &format!("headway {}-{}", p + 1, p + 2),
        );
    }
    svg.finish()
}
