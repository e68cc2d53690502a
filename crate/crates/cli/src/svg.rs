//! Minimal SVG emission: axes, polylines and scatter markers. CSV stays the
//! canonical output; these files are quick-look charts with no dependency.

use std::fmt::Write as _;

pub struct Figure {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
    title: String,
    x_label: String,
    y_label: String,
}

impl Figure {
    pub fn new(
        title: &str,
        x_label: &str,
        y_label: &str,
        x_range: (f64, f64),
        y_range: (f64, f64),
    ) -> Self {
        Self {
            width: 820.0,
            height: 620.0,
            margin: 60.0,
            x_range,
            y_range,
            body: String::new(),
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
        }
    }

    fn sx(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn sy(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                self.sx(x),
                self.sy(y)
            );
        }
        let dash = if dashed {
            " stroke-dasharray=\"7,5\""
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"{dash}/>",
            d.trim_end()
        );
    }

    /// Closed loop (appends the first point).
    pub fn loop_path(&mut self, pts: &[(f64, f64)], color: &str, width: f64, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let mut closed = pts.to_vec();
        closed.push(pts[0]);
        self.polyline(&closed, color, width, dashed);
    }

    pub fn scatter(&mut self, pts: &[(f64, f64)], color: &str, radius: f64) {
        for &(x, y) in pts {
            let _ = writeln!(
                self.body,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{color}\"/>",
                self.sx(x),
                self.sy(y)
            );
        }
    }

    /// Filled unit cells for raster overlays.
    pub fn cells(
        &mut self,
        pts: &[(f64, f64)],
        cell_w: f64,
        cell_h: f64,
        color: &str,
        opacity: f64,
    ) {
        let w = (self.sx(cell_w) - self.sx(0.0)).abs().max(0.5);
        let h = (self.sy(cell_h) - self.sy(0.0)).abs().max(0.5);
        for &(x, y) in pts {
            let _ = writeln!(
                self.body,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{color}\" fill-opacity=\"{opacity}\"/>",
                self.sx(x) - w / 2.0,
                self.sy(y) - h / 2.0
            );
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">",
            self.width, self.height
        );
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        // frame
        let (x0, x1) = (self.margin, self.width - self.margin);
        let (y0, y1) = (self.margin, self.height - self.margin);
        let _ = writeln!(
            out,
            "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            x1 - x0,
            y1 - y0
        );
        // ticks
        for i in 0..=5 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / 5.0;
            let px = self.sx(fx);
            let _ = writeln!(
                out,
                "<line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>",
                y1 + 6.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{px}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{fx:.3}</text>",
                y1 + 22.0
            );
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 5.0;
            let py = self.sy(fy);
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>",
                x0 - 6.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">{fy:.3}</text>",
                x0 - 10.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"30\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
            self.width / 2.0,
            self.title
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            self.width / 2.0,
            self.height - 12.0,
            self.x_label
        );
        let _ = writeln!(
            out,
            "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
            self.height / 2.0,
            self.height / 2.0,
            self.y_label
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}
