use std::fmt::Write;

use deligan::autodiff::Tensor;
use deligan::data::ToySpec;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for j in 0..2 {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        if !lo[0].is_finite() {
            return Self {
                lo: [-1.0; 2],
                hi: [1.0; 2],
            };
        }
        for j in 0..2 {
            let pad = ((hi[j] - lo[j]) * 0.05).max(0.5);
            lo[j] -= pad;
            hi[j] += pad;
        }
        Self { lo, hi }
    }

    fn scale(&self, j: usize) -> f64 {
        (SIZE - 2.0 * MARGIN) / (self.hi[j] - self.lo[j])
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.lo[0]) * self.scale(0)
    }

    fn y(&self, v: f64) -> f64 {
        SIZE - MARGIN - (v - self.lo[1]) * self.scale(1)
    }
}

/// Scatter plot of 2-D samples with optional truth ellipses (at
/// `radius` standard deviations) and mixture-mean markers.
pub fn render_svg(
    samples: &Tensor<f64>,
    truth: Option<&ToySpec>,
    mu: Option<&Tensor<f64>>,
    radius: f64,
) -> String {
    let rows = |t: &Tensor<f64>| -> Vec<[f64; 2]> {
        (0..t.rows()).map(|r| [t.get(r, 0), t.get(r, 1)]).collect()
    };
    let pts = rows(samples);
    let mus = mu.map(rows).unwrap_or_default();
    let mut extent = pts.clone();
    extent.extend(&mus);
    if let Some(spec) = truth {
        for m in &spec.modes {
            let (sx, sy) = (radius * m.cov_diag[0].sqrt(), radius * m.cov_diag[1].sqrt());
            extent.push([m.mean[0] - sx, m.mean[1] - sy]);
            extent.push([m.mean[0] + sx, m.mean[1] + sy]);
        }
    }
    let f = Frame::fit(extent.into_iter());

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#
    );
    let (x0, x1, y0, y1) = (MARGIN, SIZE - MARGIN, SIZE - MARGIN, MARGIN);
    for (a, b, c, d) in [
        (x0, y0, x1, y0),
        (x0, y0, x0, y1),
        (x1, y0, x1, y1),
        (x0, y1, x1, y1),
    ] {
        let _ = writeln!(
            s,
            r#"<line x1="{a:.2}" y1="{b:.2}" x2="{c:.2}" y2="{d:.2}" stroke="black" stroke-width="1"/>"#
        );
    }
    for (v, x, y, anchor) in [
        (f.lo[0], x0, y0 + 16.0, "start"),
        (f.hi[0], x1, y0 + 16.0, "end"),
        (f.lo[1], x0 - 4.0, y0, "end"),
        (f.hi[1], x0 - 4.0, y1 + 10.0, "end"),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="10" text-anchor="{anchor}">{v:.2}</text>"#
        );
    }
    if let Some(spec) = truth {
        for m in &spec.modes {
            let rx = radius * m.cov_diag[0].sqrt() * f.scale(0);
            let ry = radius * m.cov_diag[1].sqrt() * f.scale(1);
            let _ = writeln!(
                s,
                r#"<ellipse cx="{:.2}" cy="{:.2}" rx="{rx:.2}" ry="{ry:.2}" fill="none" stroke="green" stroke-width="1.5"/>"#,
                f.x(m.mean[0]),
                f.y(m.mean[1])
            );
        }
    }
    for p in &pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="steelblue" fill-opacity="0.6"/>"#,
            f.x(p[0]),
            f.y(p[1])
        );
    }
    for p in &mus {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="crimson" stroke-width="1.5"/>"#,
            f.x(p[0]),
            f.y(p[1])
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_has_axes_only() {
        let svg = render_svg(&Tensor::zeros(&[0, 2]), None, None, 3.0);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<line").count(), 4);
        assert_eq!(svg.matches("<circle").count(), 0);
    }

    #[test]
    fn bimodal_truth_draws_two_ellipses() {
        let x = Tensor::from_rows(&[vec![-3.0, 0.1], vec![3.0, -0.2]]).unwrap();
        let svg = render_svg(&x, Some(&ToySpec::bimodal()), None, 3.0);
        assert_eq!(svg.matches("<ellipse").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg, render_svg(&x, Some(&ToySpec::bimodal()), None, 3.0));
    }
}
