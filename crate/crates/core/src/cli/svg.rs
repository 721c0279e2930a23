//! SVG 1.1 scatter plots of point clouds on the unit square.

use std::fmt::Write as _;

use crate::conjugation::ConjugateSample;
use crate::sdot::boundary_segments;

/// Points on `[0, 1)^2` with an optional grid-aligned boundary underlay.
#[derive(Debug, Clone, PartialEq)]
pub struct SvgScene {
    pub points: Vec<[f64; 2]>,
    pub radius: f64,
    pub opacity: f64,
    pub underlay: Option<Vec<[f64; 4]>>,
    /// Side length of the viewport in user units.
    pub size: f64,
    pub title: Option<String>,
}

impl SvgScene {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Self {
            points,
            radius: 1.2,
            opacity: 0.8,
            underlay: None,
            size: 800.0,
            title: None,
        }
    }

    /// Cloud points over the staircase boundary of the diagram. Repeated
    /// points are drawn once.
    pub fn from_sample(s: &ConjugateSample) -> Self {
        let mut pts: Vec<[f64; 2]> = s
            .cloud
            .points
            .iter()
            .map(|p| {
                let c = p.coords();
                [c[0], if c.len() > 1 { c[1] } else { 0.0 }]
            })
            .collect();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        let mut scene = Self::new(pts);
        scene.underlay = Some(boundary_segments(&s.diagram));
        scene
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.size, (1.0 - y) * self.size)
    }

    pub fn render(&self) -> String {
        let s = self.size;
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
        out.push_str(
            "<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 1.1//EN\" \"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd\">\n",
        );
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">"
        );
        if let Some(t) = &self.title {
            let _ = writeln!(out, "<title>{}</title>", escape(t));
        }
        let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{s}\" height=\"{s}\" fill=\"white\"/>");
        if let Some(segs) = &self.underlay {
            out.push_str("<path fill=\"none\" stroke=\"#b0b0b0\" stroke-width=\"0.5\" d=\"");
            for (i, g) in segs.iter().enumerate() {
                let (x0, y0) = self.map(g[0], g[1]);
                let (x1, y1) = self.map(g[2], g[3]);
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "M{x0:.2} {y0:.2}L{x1:.2} {y1:.2}");
            }
            out.push_str("\"/>\n");
        }
        let _ = writeln!(out, "<g fill=\"black\" fill-opacity=\"{:.3}\">", self.opacity);
        for p in &self.points {
            let (x, y) = self.map(p[0], p[1]);
            let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{:.2}\"/>", self.radius);
        }
        out.push_str("</g>\n</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_flipped_and_inside() {
        let mut scene = SvgScene::new(vec![[0.0, 0.0], [0.25, 0.75], [0.999, 0.5]]);
        scene.size = 100.0;
        let svg = scene.render();
        assert!(svg.contains("<circle cx=\"0.00\" cy=\"100.00\""));
        assert!(svg.contains("<circle cx=\"25.00\" cy=\"25.00\""));
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn title_is_escaped() {
        let mut scene = SvgScene::new(Vec::new());
        scene.title = Some("a<b & c".into());
        assert!(scene.render().contains("<title>a&lt;b &amp; c</title>"));
    }
}
