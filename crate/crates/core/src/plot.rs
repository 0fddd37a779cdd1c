//! Ternary (simplex) plots of 3-strategy trajectories as standalone SVG.
//!
//! Geometry lives in plot coordinates: the triangle of
//! [`TRIANGLE`](crate::trajectory::TRIANGLE) with strategy `i` at vertex `i`.
//! Shapes sit in a group that flips the y axis, so the coordinates written in
//! `points` are plot coordinates unchanged. Nothing is clipped.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::trajectory::{barycentric_raw, Trajectory, TRIANGLE};

/// Plot-coordinate positions of every sample.
pub fn trajectory_points(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    if traj.n_states() != 3 {
        return Err(Error::dim(format!(
            "ternary plots need exactly 3 strategies, trajectory has {}",
            traj.n_states()
        )));
    }
    Ok((0..traj.len()).map(|i| barycentric_raw(&traj.state_row(i))).collect())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(traj: &Trajectory, labels: &[String]) -> Result<String> {
    let points = trajectory_points(traj)?;
    if labels.len() != 3 {
        return Err(Error::dim(format!("need 3 vertex labels, got {}", labels.len())));
    }
    let top = TRIANGLE[2].1;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="640" height="580" viewBox="-0.15 {} 1.3 {}">"#,
        -(top + 0.1),
        top + 0.25
    );
    svg.push_str("<rect x=\"-0.15\" y=\"-1\" width=\"1.3\" height=\"1.2\" fill=\"white\"/>\n");
    svg.push_str("<g transform=\"scale(1,-1)\">\n");
    let tri: Vec<String> = TRIANGLE.iter().map(|(x, y)| format!("{x},{y}")).collect();
    let _ = writeln!(
        svg,
        r#"<polygon class="simplex" points="{}" fill="none" stroke="black" stroke-width="0.004"/>"#,
        tri.join(" ")
    );
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x},{y}")).collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#1f5fa8" stroke-width="0.003" stroke-linejoin="round"/>"##,
        pts.join(" ")
    );
    if let Some((x, y)) = points.first() {
        let _ = writeln!(svg, r##"<circle class="start" cx="{x}" cy="{y}" r="0.008" fill="#c0392b"/>"##);
    }
    svg.push_str("</g>\n");
    // labels are placed in screen coordinates (y down)
    let anchors = [
        (TRIANGLE[0].0 - 0.03, -TRIANGLE[0].1 + 0.05, "end"),
        (TRIANGLE[1].0 + 0.03, -TRIANGLE[1].1 + 0.05, "start"),
        (TRIANGLE[2].0, -TRIANGLE[2].1 - 0.03, "middle"),
    ];
    for ((x, y, anchor), label) in anchors.iter().zip(labels) {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="0.05" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads back the trajectory polyline of an SVG produced by [`render_svg`].
pub fn polyline_points(svg: &str) -> Option<Vec<(f64, f64)>> {
    let start = svg.find("<polyline")?;
    let rest = &svg[start..];
    let attr = rest.find("points=\"")? + "points=\"".len();
    let end = rest[attr..].find('"')? + attr;
    rest[attr..end]
        .split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

/// Whether `p` lies inside or on [`TRIANGLE`], up to `tol`.
pub fn inside_triangle(p: (f64, f64), tol: f64) -> bool {
    let [a, b, c] = TRIANGLE;
    let cross = |o: (f64, f64), u: (f64, f64), q: (f64, f64)| (u.0 - o.0) * (q.1 - o.1) - (u.1 - o.1) * (q.0 - o.0);
    cross(a, b, p) >= -tol && cross(b, c, p) >= -tol && cross(c, a, p) >= -tol
}
