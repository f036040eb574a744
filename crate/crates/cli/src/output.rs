//! CSV and SVG emitters.

use std::fmt::Write;

/// Shortest decimal string that parses back to the same double.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// CSV text with leading `#` comment lines and a header row.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(comments: &[String], header: &str) -> Self {
        let mut text = String::new();
        for c in comments {
            for line in c.lines() {
                writeln!(text, "# {line}").unwrap();
            }
        }
        writeln!(text, "{header}").unwrap();
        Csv { text }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(c.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn peek(&self) -> &str {
        &self.text
    }

    pub fn finish(self) -> String {
        self.text
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str, x_ticks: &[(f64, String)], y_ticks: &[(f64, String)]) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN, MARGIN);
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    for (px, label) in x_ticks {
        writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            escape(label)
        )
        .unwrap();
    }
    for (py, label) in y_ticks {
        writeln!(
            s,
            r#"<text x="{:.1}" y="{py:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            escape(label)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    )
    .unwrap();
}

/// Line chart with a logarithmic x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax.partial_cmp(&xmin) != Some(std::cmp::Ordering::Greater) {
        xmax = xmin * 10.0;
    }
    if ymax.partial_cmp(&ymin) != Some(std::cmp::Ordering::Greater) {
        ymax = ymin + 1.0;
    }
    let (lx0, lx1) = (xmin.log10(), xmax.log10());
    let px = |x: f64| MARGIN + (x.log10() - lx0) / (lx1 - lx0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - ymin) / (ymax - ymin) * (H - 2.0 * MARGIN);

    let mut s = open(title);
    let mut xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let x_ticks: Vec<(f64, String)> = xs.iter().map(|&x| (px(x), num(x))).collect();
    let y_ticks: Vec<(f64, String)> = (0..=4)
        .map(|i| {
            let y = ymin + (ymax - ymin) * f64::from(i) / 4.0;
            (py(y), format!("{y:.3e}"))
        })
        .collect();
    axes(&mut s, x_label, y_label, &x_ticks, &y_ticks);
    for (i, (name, points)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        )
        .unwrap();
        let ly = MARGIN + 16.0 * i as f64;
        writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{colour}">{}</text>"#,
            W - MARGIN - 90.0,
            escape(name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Colour grid of `log10(value)`: blue above 1, red below.
pub fn heat_grid(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    value: impl Fn(usize, usize) -> f64,
) -> String {
    let mut s = open(title);
    let cw = (W - 2.0 * MARGIN) / xs.len() as f64;
    let ch = (H - 2.0 * MARGIN) / ys.len() as f64;
    let mut span = 0.0f64;
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = value(i, j).log10();
            if v.is_finite() {
                span = span.max(v.abs());
            }
        }
    }
    let span = span.max(1e-12);
    for i in 0..xs.len() {
        for j in 0..ys.len() {
            let v = (value(i, j).log10() / span).clamp(-1.0, 1.0);
            let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
            let colour = if v >= 0.0 {
                format!("#{:02x}{:02x}ff", fade(v), fade(v))
            } else {
                format!("#ff{:02x}{:02x}", fade(v), fade(v))
            };
            let x = MARGIN + cw * i as f64;
            let y = H - MARGIN - ch * (j + 1) as f64;
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{colour}"/>"#
            )
            .unwrap();
        }
    }
    let every = xs.len().div_ceil(5).max(1);
    let x_ticks: Vec<(f64, String)> = xs
        .iter()
        .enumerate()
        .step_by(every)
        .map(|(i, &x)| (MARGIN + cw * (i as f64 + 0.5), num(x / 1000.0)))
        .collect();
    let y_ticks: Vec<(f64, String)> = ys
        .iter()
        .enumerate()
        .step_by(every)
        .map(|(j, &y)| (H - MARGIN - ch * (j as f64 + 0.5), num(y / 1000.0)))
        .collect();
    axes(&mut s, x_label, y_label, &x_ticks, &y_ticks);
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">log10 range +-{:.3}</text>"#,
        W - MARGIN,
        MARGIN - 8.0,
        span
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e-17, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a\nb".into()], "x,y");
        c.row(["1", "2"]);
        assert_eq!(c.finish(), "# a\n# b\nx,y\n1,2\n");
    }

    #[test]
    fn svgs_are_well_formed_enough() {
        let s = line_chart("t", "x", "y", &[("A".into(), vec![(0.1, 1.0), (1.0, 2.0)])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("polyline"));
        let h = heat_grid(
            "t",
            "x",
            "y",
            &[1.0, 2.0],
            &[1.0, 2.0],
            |i, j| if i == j { 1.0 } else { 10.0 },
        );
        assert_eq!(h.matches("<rect").count(), 5);
    }
}
