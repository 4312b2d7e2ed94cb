//! Grid CSV and ternary SVG heatmap export.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::eval::sweep::AggregateLas;
use crate::weights::WeightGrid;

/// Writes `point_id, alpha_1..alpha_m, las, correct, total`.
pub fn write_grid_csv<W: Write>(grid: &WeightGrid, agg: &AggregateLas, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["point_id".to_string()];
    header.extend((1..=grid.m()).map(|t| format!("alpha_{t}")));
    header.extend(["las", "correct", "total"].map(String::from));
    w.write_record(&header)?;
    for p in grid.points() {
        let mut row = vec![p.id.to_string()];
        row.extend(p.weights.alphas().iter().map(|a| a.to_string()));
        row.push(format!("{:.6}", agg.las(p.id)));
        row.push(agg.correct[p.id].to_string());
        row.push(agg.total.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of a heatmap request.
#[derive(Clone, Debug, PartialEq)]
pub enum Heatmap {
    Svg(String),
    /// The grid cannot be drawn in the plane; carries a diagnostic.
    Unsupported(String),
}

const SIZE: f64 = 600.0;
const PAD: f64 = 40.0;

/// Corner positions of the unit triangle.
fn project(alphas: &[f64]) -> (f64, f64) {
    let corners = [(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)];
    alphas
        .iter()
        .zip(corners)
        .fold((0.0, 0.0), |(x, y), (a, (cx, cy))| (x + a * cx, y + a * cy))
}

/// Colour ramp from dark blue (0) through teal to yellow (1).
fn colour(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 3] = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let i = if t <= 0.5 { 0 } else { 1 };
    let (t0, c0) = STOPS[i];
    let (t1, c1) = STOPS[i + 1];
    let f = (t - t0) / (t1 - t0);
    let mix = |k: usize| (c0[k] + f * (c1[k] - c0[k])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}

/// SVG heatmap of LAS over a three-treebank grid: one hexagon per point, the
/// triangle of fixed corners, and the best points circled.
pub fn heatmap_svg(grid: &WeightGrid, agg: &AggregateLas, names: &[String]) -> Heatmap {
    if grid.m() != 3 {
        return Heatmap::Unsupported(format!(
            "heatmap needs exactly 3 treebanks, grid has {}; wrote CSV only",
            grid.m()
        ));
    }
    let projected: Vec<(f64, f64)> = grid.points().iter().map(|p| project(p.weights.alphas())).collect();
    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 1.0f64, 3f64.sqrt() / 2.0);
    for &(x, y) in &projected {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let spacing = grid.step();
    let (x0, y0, x1, y1) = (x0 - spacing, y0 - spacing, x1 + spacing, y1 + spacing);
    let scale = (SIZE - 2.0 * PAD) / (x1 - x0).max(y1 - y0);
    let to_px = |(x, y): (f64, f64)| (PAD + (x - x0) * scale, SIZE - PAD - (y - y0) * scale);

    let lo = agg.correct.iter().min().copied().unwrap_or(0);
    let hi = agg.correct.iter().max().copied().unwrap_or(0);
    let radius = spacing / 3f64.sqrt() * scale;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
    writeln!(svg, r#"<g id="cells">"#).unwrap();
    for (p, &xy) in grid.points().iter().zip(&projected) {
        let (cx, cy) = to_px(xy);
        let t = if hi == lo {
            0.5
        } else {
            (agg.correct[p.id] - lo) as f64 / (hi - lo) as f64
        };
        let corners: Vec<String> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64 + std::f64::consts::PI / 6.0;
                format!("{:.2},{:.2}", cx + radius * a.cos(), cy + radius * a.sin())
            })
            .collect();
        writeln!(
            svg,
            r#"<polygon points="{}" fill="{}"><title>{} LAS {:.4}</title></polygon>"#,
            corners.join(" "),
            colour(t),
            p.weights,
            agg.las(p.id)
        )
        .unwrap();
    }
    writeln!(svg, "</g>").unwrap();

    let tri: Vec<(f64, f64)> = (1..=3)
        .map(|t| {
            let mut a = [0.0; 3];
            a[t - 1] = 1.0;
            to_px(project(&a))
        })
        .collect();
    let tri_pts: Vec<String> = tri.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    writeln!(
        svg,
        r##"<polygon id="fixed" points="{}" fill="none" stroke="#000000" stroke-width="1.5"/>"##,
        tri_pts.join(" ")
    )
    .unwrap();
    for (i, (x, y)) in tri.iter().enumerate() {
        let label = names.get(i).cloned().unwrap_or_else(|| format!("t{}", i + 1));
        writeln!(
            svg,
            r##"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="14" text-anchor="middle" fill="#000000">{label}</text>"##,
            y + if i == 2 { -8.0 } else { 18.0 }
        )
        .unwrap();
    }
    writeln!(svg, r#"<g id="argmax">"#).unwrap();
    for p in agg.argmax() {
        let (cx, cy) = to_px(projected[p]);
        writeln!(
            svg,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="#000000" stroke-width="2"/>"##,
            radius * 0.6
        )
        .unwrap();
    }
    writeln!(svg, "</g>\n</svg>").unwrap();
    Heatmap::Svg(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::generate_grid;

    #[test]
    fn corner_grid_csv_has_three_rows() {
        let grid = generate_grid(3, 1.0, 0.0).unwrap();
        let agg = AggregateLas {
            correct: vec![1, 2, 3],
            total: 4,
        };
        let mut buf = Vec::new();
        write_grid_csv(&grid, &agg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "point_id,alpha_1,alpha_2,alpha_3,las,correct,total");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0,0,0,1,0.250000,1,4");
    }

    #[test]
    fn four_treebanks_get_a_note() {
        let grid = generate_grid(4, 1.0, 0.0).unwrap();
        let agg = AggregateLas {
            correct: vec![0; 4],
            total: 1,
        };
        assert!(matches!(heatmap_svg(&grid, &agg, &[]), Heatmap::Unsupported(_)));
    }

    #[test]
    fn flat_landscape_uses_one_colour() {
        let grid = generate_grid(3, 0.25, 0.25).unwrap();
        let agg = AggregateLas {
            correct: vec![5; grid.len()],
            total: 10,
        };
        let Heatmap::Svg(svg) = heatmap_svg(&grid, &agg, &[]) else { panic!() };
        let fills: std::collections::BTreeSet<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<polygon points"))
            .map(|l| l.split("fill=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(fills.len(), 1);
        assert_eq!(svg.matches("<circle").count(), grid.len());
    }
}
