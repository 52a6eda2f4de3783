//! Hand-rolled SVG charts: smoothed learning-curve overlays, the
//! reward-vs-MVS scatter, and the dimension-drop bar chart. No drawing
//! dependencies; output is deterministic text.

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

/// Trailing-mean smoothing over a window of `window` points (window 1 or
/// fewer points passes data through). Used at report time only.
pub fn smooth(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    if window <= 1 {
        return points.to_vec();
    }
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, _))| {
            let start = (i + 1).saturating_sub(window);
            let slice = &points[start..=i];
            let mean = slice.iter().map(|p| p.1).sum::<f64>() / slice.len() as f64;
            (x, mean)
        })
        .collect()
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn around(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut frame = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            frame.x_min = frame.x_min.min(x);
            frame.x_max = frame.x_max.max(x);
            frame.y_min = frame.y_min.min(y);
            frame.y_max = frame.y_max.max(y);
        }
        if !frame.x_min.is_finite() {
            frame = Frame {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        // degenerate spans get symmetric padding so scaling stays finite
        if frame.x_max - frame.x_min < 1e-12 {
            frame.x_min -= 0.5;
            frame.x_max += 0.5;
        }
        if frame.y_max - frame.y_min < 1e-12 {
            frame.y_min -= 0.5;
            frame.y_max += 0.5;
        }
        frame
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x_min) / (self.x_max - self.x_min)
            * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (v - self.y_min) / (self.y_max - self.y_min)
                * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fp(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if magnitude >= 1000.0 {
        format!("{v:.0}")
    } else if magnitude >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open_svg(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let vx = frame.x_min + t * (frame.x_max - frame.x_min);
        let px = frame.x(vx);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y0}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fp(px),
            fp(px),
            fp(y0 + 5.0),
            fp(px),
            fp(y0 + 20.0),
            tick_label(vx)
        ));
        let vy = frame.y_min + t * (frame.y_max - frame.y_min);
        let py = frame.y(vy);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{x0}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fp(x0 - 5.0),
            fp(py),
            fp(py),
            fp(x0 - 8.0),
            fp(py + 4.0),
            tick_label(vy)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
}

fn legend(out: &mut String, entries: &[(String, String)]) {
    for (idx, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 8.0 + idx as f64 * 18.0;
        let x = WIDTH - MARGIN_RIGHT - 190.0;
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            x + 22.0,
            x + 28.0,
            y + 4.0,
            escape(label)
        ));
    }
}

/// Multi-series line chart (one polyline per series).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::around(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    let mut seen: Vec<(String, String)> = Vec::new();
    for s in series {
        if s.points.is_empty() {
            continue;
        }
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{},{}", fp(frame.x(x)), fp(frame.y(y))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.color,
            coords.join(" ")
        ));
        if !seen.iter().any(|(l, _)| *l == s.label) {
            seen.push((s.label.clone(), s.color.clone()));
        }
    }
    legend(&mut out, &seen);
    out.push_str("</svg>\n");
    out
}

/// Labeled scatter plot; every point carries its own annotation.
pub fn scatter_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64, String)],
) -> String {
    let frame = Frame::around(points.iter().map(|&(x, y, _)| (x, y)));
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    for (idx, (x, y, label)) in points.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let px = frame.x(*x);
        let py = frame.y(*y);
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n",
            fp(px),
            fp(py),
            fp(px + 6.0),
            fp(py - 6.0),
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bar chart with one labeled bar per entry.
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let y_lo = bars.iter().map(|b| b.1).fold(0.0f64, f64::min);
    let y_hi = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
    let frame = Frame::around([(0.0, y_lo), (bars.len().max(1) as f64, y_hi)].into_iter());
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    let baseline = frame.y(0.0);
    for (idx, (label, value)) in bars.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let x_left = frame.x(idx as f64 + 0.15);
        let x_right = frame.x(idx as f64 + 0.85);
        let y_val = frame.y(*value);
        let (top, height) = if *value >= 0.0 {
            (y_val, baseline - y_val)
        } else {
            (baseline, y_val - baseline)
        };
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
            fp(x_left),
            fp(top),
            fp(x_right - x_left),
            fp(height.max(0.0))
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
            fp((x_left + x_right) / 2.0),
            fp(HEIGHT - MARGIN_BOTTOM + 34.0),
            escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_is_a_trailing_mean() {
        let points: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, (i * i) as f64)).collect();
        let smoothed = smooth(&points, 3);
        assert_eq!(smoothed[0], (0.0, 0.0));
        assert_eq!(smoothed[1], (1.0, 0.5));
        assert_eq!(smoothed[2], (2.0, (0.0 + 1.0 + 4.0) / 3.0));
        assert_eq!(smoothed[5], (5.0, (9.0 + 16.0 + 25.0) / 3.0));
        assert_eq!(smooth(&points, 1), points);
        assert_eq!(smooth(&[], 10), vec![]);
    }

    #[test]
    fn line_chart_emits_one_polyline_per_series() {
        let series = vec![
            Series {
                label: "condition".into(),
                color: "#d62728".into(),
                points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)],
            },
            Series {
                label: "baseline".into(),
                color: "#999999".into(),
                points: vec![(0.0, 2.0), (2.0, 4.0)],
            },
        ];
        let svg = line_chart("Learning curves", "timestep", "return", &series);
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("Learning curves"));
        assert!(svg.contains("timestep"));
        assert!(svg.contains("baseline"));
    }

    #[test]
    fn scatter_chart_has_one_circle_per_point() {
        let points = vec![
            (0.01, 450.0, "baseline".to_string()),
            (0.8, 120.0, "ar(2,0.9+0.1,0.1,all)".to_string()),
        ];
        let svg = scatter_chart("Reward vs MVS", "mvs", "mean return", &points);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("ar(2,0.9+0.1,0.1,all)"));

        let single = scatter_chart("s", "x", "y", &points[..1]);
        assert_eq!(single.matches("<circle").count(), 1);
    }

    #[test]
    fn bar_chart_handles_negative_values() {
        let bars = vec![
            ("drop(CartPos)".to_string(), -12.0),
            ("drop(PoleAngVel)".to_string(), -71.5),
        ];
        let svg = bar_chart("Return change", "condition", "Δ return (%)", &bars);
        assert_eq!(svg.matches("<rect").count(), 3); // background + 2 bars
        assert!(svg.contains("drop(PoleAngVel)"));
    }

    #[test]
    fn degenerate_ranges_stay_finite() {
        let series = vec![Series {
            label: "flat".into(),
            color: "#000000".into(),
            points: vec![(1.0, 5.0), (2.0, 5.0)],
        }];
        let svg = line_chart("flat", "x", "y", &series);
        assert!(!svg.contains("NaN"));
        assert!(!svg.contains("inf"));
        let empty = line_chart("empty", "x", "y", &[]);
        assert!(empty.contains("</svg>"));
    }
}
