//! Static SVG line and scatter charts rendered from analysis tables. No
//! interactive machinery; output is deterministic byte-for-byte.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 8] = [
    "#d4a017", "#3f7f3f", "#9060b0", "#3a6ea5", "#c05050", "#50a0a0", "#806040", "#606060",
];

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Frame {
        let mut frame = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            frame.x_min = frame.x_min.min(*x);
            frame.x_max = frame.x_max.max(*x);
            frame.y_min = frame.y_min.min(*y);
            frame.y_max = frame.y_max.max(*y);
        }
        if !frame.x_min.is_finite() {
            frame = Frame {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        if frame.x_max == frame.x_min {
            frame.x_max = frame.x_min + 1.0;
        }
        if frame.y_max == frame.y_min {
            frame.y_max = frame.y_min + 1.0;
        }
        frame
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn chart_open(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(
        s,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" font-size=\"15\">{}</text>\n",
        MARGIN_LEFT,
        escape(title)
    );
    // axes
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = write!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"{}\">{}</text>\n\
         <text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    // numeric extents
    let _ = write!(
        s,
        "<text x=\"{x0}\" y=\"{}\" font-size=\"10\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
        y0 + 14.0,
        fmt(frame.x_min),
        x1,
        y0 + 14.0,
        fmt(frame.x_max),
        x0 - 4.0,
        y0,
        fmt(frame.y_min),
        x0 - 4.0,
        y1 + 4.0,
        fmt(frame.y_max),
    );
    s
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = MARGIN_TOP + 16.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = write!(
            s,
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            y - 9.0,
            x + 14.0,
            y,
            escape(name)
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Multi-series line chart (time series per variant).
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|(_, pts)| pts.iter()));
    let mut s = chart_open(title, x_label, y_label, &frame);
    let mut entries = Vec::new();
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        entries.push((name.clone(), color));
        if points.is_empty() {
            continue;
        }
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(j, (x, y))| {
                format!(
                    "{}{},{}",
                    if j == 0 { "M" } else { "L" },
                    fmt(frame.sx(*x)),
                    fmt(frame.sy(*y))
                )
            })
            .collect();
        let _ = write!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        );
        for (x, y) in points {
            let _ = write!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"2.2\" fill=\"{color}\"/>\n",
                fmt(frame.sx(*x)),
                fmt(frame.sy(*y))
            );
        }
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}

/// Scatter chart with one point class per series, plus optional fitted
/// curves drawn as polylines.
pub fn scatter_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    classes: &[(String, Vec<(f64, f64)>)],
    curves: &[(String, Vec<(f64, f64)>)],
) -> String {
    let frame = Frame::from_points(
        classes
            .iter()
            .flat_map(|(_, pts)| pts.iter())
            .chain(curves.iter().flat_map(|(_, pts)| pts.iter())),
    );
    let mut s = chart_open(title, x_label, y_label, &frame);
    let mut entries = Vec::new();
    for (i, (name, points)) in classes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        entries.push((name.clone(), color));
        for (x, y) in points {
            let _ = write!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n",
                fmt(frame.sx(*x)),
                fmt(frame.sy(*y))
            );
        }
    }
    for (i, (name, points)) in curves.iter().enumerate() {
        let color = PALETTE[(classes.len() + i) % PALETTE.len()];
        entries.push((name.clone(), color));
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(j, (x, y))| {
                format!(
                    "{}{},{}",
                    if j == 0 { "M" } else { "L" },
                    fmt(frame.sx(*x)),
                    fmt(frame.sy(*y))
                )
            })
            .collect();
        let _ = write!(
            s,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            path.join(" ")
        );
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}
