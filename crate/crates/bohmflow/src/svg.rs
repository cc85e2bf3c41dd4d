//! Minimal standalone SVG previews: polylines and markers on auto-scaled axes.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400", "#555555"];

enum Item {
    Line { points: Vec<(f64, f64)>, color: usize },
    Marker { at: (f64, f64), color: usize },
}

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    log_y: bool,
    items: Vec<Item>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            items: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn line(&mut self, points: impl IntoIterator<Item = (f64, f64)>) -> &mut Self {
        let color = self.items.iter().filter(|i| matches!(i, Item::Line { .. })).count() % PALETTE.len();
        self.items.push(Item::Line {
            points: points.into_iter().collect(),
            color,
        });
        self
    }

    pub fn marker(&mut self, x: f64, y: f64, color: usize) -> &mut Self {
        self.items.push(Item::Marker {
            at: (x, y),
            color: color % PALETTE.len(),
        });
        self
    }

    fn map(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { x.ln() } else { x };
        let y = if self.log_y { y.ln() } else { y };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .items
            .iter()
            .flat_map(|i| match i {
                Item::Line { points, .. } => points.clone(),
                Item::Marker { at, .. } => vec![*at],
            })
            .filter_map(|p| self.map(p))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
        );
        if !(x1 > x0) {
            x0 -= 1.0;
            x1 += 1.0;
        }
        if !(y1 > y0) {
            y0 -= 1.0;
            y1 += 1.0;
        }
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
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let scale = |log: bool, a: f64, b: f64| {
            if log {
                format!("[{:.3e}, {:.3e}]", a.exp(), b.exp())
            } else {
                format!("[{a:.3}, {b:.3}]")
            }
        };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{} {}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label),
            scale(self.log_x, x0, x1)
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">{} {}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label),
            scale(self.log_y, y0, y1)
        );
        for item in &self.items {
            match item {
                Item::Line { points, color } => {
                    // break the polyline at non-finite points
                    let mut segment = String::new();
                    let flush = |seg: &mut String, out: &mut String| {
                        if !seg.is_empty() {
                            let _ = writeln!(
                                out,
                                r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
                                PALETTE[*color],
                                seg.trim_end()
                            );
                            seg.clear();
                        }
                    };
                    for p in points {
                        match self.map(*p) {
                            Some((x, y)) => {
                                let _ = write!(segment, "{:.2},{:.2} ", sx(x), sy(y));
                            }
                            None => flush(&mut segment, &mut out),
                        }
                    }
                    flush(&mut segment, &mut out);
                }
                Item::Marker { at, color } => {
                    if let Some((x, y)) = self.map(*at) {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                            sx(x),
                            sy(y),
                            PALETTE[*color]
                        );
                    }
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
