//! Hand-written SVG for the two report figures. The plotted numbers are
//! always written alongside as CSV.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 480.0;
const M: f64 = 56.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub pc1: f64,
    pub pc2: f64,
    pub label: bool,
    pub synthetic: bool,
}

fn color(label: bool) -> &'static str {
    if label {
        "#cc3311"
    } else {
        "#0077bb"
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<line x1=\"{M}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{y}\" stroke=\"black\"/>\n\
         <text x=\"{xc}\" y=\"{yl}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>\n\
         <text x=\"16\" y=\"{yc}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {yc})\">{y_label}</text>",
        y = H - M,
        x2 = W - M,
        xc = W / 2.0,
        yl = H - 16.0,
        yc = H / 2.0,
    );
}

fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

/// Circles for original rows, crosses for synthetic ones, colored by label.
pub fn pca_scatter_svg(points: &[ScatterPoint], explained: [f64; 2]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p.pc1);
        x1 = x1.max(p.pc1);
        y0 = y0.min(p.pc2);
        y1 = y1.max(p.pc2);
    }
    let mut out = header("PCA of the balanced design matrix");
    axes(
        &mut out,
        &format!("PC1 (variance {:.3})", explained[0]),
        &format!("PC2 (variance {:.3})", explained[1]),
    );
    for p in points {
        let x = scale(p.pc1, x0, x1, M + 8.0, W - M - 8.0);
        let y = scale(p.pc2, y0, y1, H - M - 8.0, M + 8.0);
        let c = color(p.label);
        if p.synthetic {
            let _ = writeln!(
                out,
                "<path class=\"point synthetic\" d=\"M{:.2} {:.2}l6 6m0 -6l-6 6\" stroke=\"{c}\" stroke-width=\"1.5\"/>",
                x - 3.0,
                y - 3.0
            );
        } else {
            let _ = writeln!(
                out,
                "<circle class=\"point original\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{c}\" fill-opacity=\"0.7\"/>"
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn pca_scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("index,pc1,pc2,label,synthetic\n");
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{}",
            p.pc1, p.pc2, p.label as u8, p.synthetic as u8
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub model: String,
    /// (feature set, mean AUROC)
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantiles by linear interpolation between order statistics.
pub fn box_stats(values: &[f64]) -> BoxStats {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    BoxStats {
        min: q(0.0),
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: q(1.0),
    }
}

/// One box-and-strip group per model, AUROC on a fixed [0, 1] axis.
pub fn auroc_distribution_svg(groups: &[Group]) -> String {
    let mut out = header("Mean cross-validated AUROC across feature sets");
    axes(&mut out, "model", "mean AUROC");
    let y = |v: f64| scale(v, 0.0, 1.0, H - M, M);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{t:.2}</text>",
            M - 4.0,
            y(t) + 3.0
        );
    }
    let slot = (W - 2.0 * M) / groups.len().max(1) as f64;
    for (gi, g) in groups.iter().enumerate() {
        let cx = M + slot * (gi as f64 + 0.5);
        let vals: Vec<f64> = g.values.iter().map(|v| v.1).collect();
        let b = box_stats(&vals);
        let half = (slot * 0.25).min(30.0);
        let _ = writeln!(out, "<g class=\"group\" data-model=\"{}\">", g.model);
        if !b.median.is_nan() {
            let _ = writeln!(
                out,
                "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"#555\"/>\n\
                 <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#dddddd\" stroke=\"#333\"/>\n\
                 <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#000\" stroke-width=\"2\"/>",
                y(b.min),
                y(b.max),
                cx - half,
                y(b.q3),
                2.0 * half,
                (y(b.q1) - y(b.q3)).max(0.5),
                cx - half,
                y(b.median),
                cx + half,
                y(b.median),
            );
        }
        for (i, (_, v)) in g.values.iter().enumerate() {
            // Deterministic spread so overlapping points stay visible.
            let dx = ((i as f64 * 0.618_033_988_7).fract() - 0.5) * half;
            let _ = writeln!(
                out,
                "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#ee7733\"/>",
                cx + dx,
                y(*v)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n</g>",
            H - M + 14.0,
            g.model
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn auroc_points_csv(groups: &[Group]) -> String {
    let mut out = String::from("model,feature_set,mean_auroc\n");
    for g in groups {
        for (set, v) in &g.values {
            let _ = writeln!(out, "{},{set},{v}", g.model);
        }
    }
    out
}

pub fn auroc_groups_csv(groups: &[Group]) -> String {
    let mut out = String::from("model,n,min,q1,median,q3,max\n");
    for g in groups {
        let vals: Vec<f64> = g.values.iter().map(|v| v.1).collect();
        let b = box_stats(&vals);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            g.model,
            vals.len(),
            b.min,
            b.q1,
            b.median,
            b.q3,
            b.max
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let b = box_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(
            (b.min, b.q1, b.median, b.q3, b.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        let b = box_stats(&[0.0, 1.0]);
        assert_eq!((b.q1, b.median), (0.25, 0.5));
    }

    #[test]
    fn scatter_counts_points() {
        let pts: Vec<ScatterPoint> = (0..7)
            .map(|i| ScatterPoint {
                pc1: i as f64,
                pc2: -(i as f64),
                label: i % 2 == 0,
                synthetic: i >= 5,
            })
            .collect();
        let svg = pca_scatter_svg(&pts, [1.0, 0.5]);
        assert_eq!(svg.matches("class=\"point original\"").count(), 5);
        assert_eq!(svg.matches("class=\"point synthetic\"").count(), 2);
        assert_eq!(pca_scatter_csv(&pts).lines().count(), 8);
    }
}
