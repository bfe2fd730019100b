//! SVG rendering of tilings in lattice units (one square = `SCALE` px).

use std::fmt::Write as _;
use std::path::Path;

use temperley_core::{HeightField, LatticeSquare, PolyominoRegion, Tiling};

const SCALE: f64 = 10.0;
const HORIZONTAL: &str = "#4f81bd";
const VERTICAL: &str = "#c0504d";

/// Hue for a height value. Depends on the value alone, so deterministic
/// boundary heights get the same colour in every render.
fn height_color(h: i64) -> String {
    format!("hsl({},70%,45%)", (h * 23).rem_euclid(360))
}

pub fn render_svg(region: &PolyominoRegion, tiling: &Tiling, heights: Option<&HeightField>) -> String {
    let mut all: Vec<LatticeSquare> = region.squares().iter().copied().collect();
    all.extend(region.removed_square());
    let (i0, i1) = all.iter().fold((i32::MAX, i32::MIN), |(a, b), s| (a.min(s.i), b.max(s.i)));
    let (j0, j1) = all.iter().fold((i32::MAX, i32::MIN), |(a, b), s| (a.min(s.j), b.max(s.j)));
    let (w, h) = ((i1 - i0 + 3) as f64 * SCALE, (j1 - j0 + 3) as f64 * SCALE);
    // lattice point (x, y) in square units -> pixels, y up
    let px = |x: f64| (x - i0 as f64 + 1.5) * SCALE;
    let py = |y: f64| (j1 as f64 + 1.5 - y) * SCALE;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    s.push('\n');
    let _ = writeln!(s, r##"<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);
    let mut outlines = String::new();
    for lp in region.boundary_loops() {
        // shoelace in lattice units; holes are the negatively oriented loops
        let area: i64 = lp
            .iter()
            .zip(lp.iter().cycle().skip(1))
            .map(|(a, b)| a.p as i64 * b.q as i64 - b.p as i64 * a.q as i64)
            .sum();
        let pts: Vec<String> =
            lp.iter().map(|v| format!("{},{}", px(v.p as f64 - 0.5), py(v.q as f64 - 0.5))).collect();
        if area < 0 {
            let _ = writeln!(s, r##"<polygon class="hole" points="{}" fill="#d8d8d8"/>"##, pts.join(" "));
        }
        let class = if area < 0 { "boundary hole" } else { "boundary outer" };
        let _ = writeln!(
            outlines,
            r##"<polygon class="{class}" points="{}" fill="none" stroke="#000000" stroke-width="2"/>"##,
            pts.join(" ")
        );
    }
    for d in tiling.dominoes() {
        let (a, b) = (d.white, d.black);
        let (x0, x1) = (a.i.min(b.i) as f64 - 0.5, a.i.max(b.i) as f64 + 0.5);
        let (y0, y1) = (a.j.min(b.j) as f64 - 0.5, a.j.max(b.j) as f64 + 0.5);
        let (class, fill) = if d.is_horizontal() { ("domino horizontal", HORIZONTAL) } else { ("domino vertical", VERTICAL) };
        let _ = writeln!(
            s,
            r##"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="#202020" stroke-width="1"/>"##,
            px(x0),
            py(y1),
            (x1 - x0) * SCALE,
            (y1 - y0) * SCALE
        );
    }
    s.push_str(&outlines);
    let mark = |s: &mut String, sq: LatticeSquare, class: &str, color: &str| {
        let _ = writeln!(
            s,
            r#"<rect class="{class}" x="{}" y="{}" width="{SCALE}" height="{SCALE}" fill="none" stroke="{color}" stroke-width="2.5"/>"#,
            px(sq.i as f64 - 0.5),
            py(sq.j as f64 + 0.5)
        );
    };
    for &sq in region.added_squares() {
        mark(&mut s, sq, "marked added", "#f0b000");
    }
    if let Some(sq) = region.removed_square() {
        mark(&mut s, sq, "marked removed", "#20a040");
    }
    if let Some(hf) = heights {
        for (v, &val) in hf.index().vertices().iter().zip(hf.values()) {
            let _ = writeln!(
                s,
                r#"<circle class="height" cx="{}" cy="{}" r="{}" fill="{}"><title>{val}</title></circle>"#,
                px(v.p as f64 - 0.5),
                py(v.q as f64 - 0.5),
                0.18 * SCALE,
                height_color(val)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_tiling(
    region: &PolyominoRegion,
    tiling: &Tiling,
    heights: Option<&HeightField>,
    path: &Path,
) -> std::io::Result<()> {
    std::fs::write(path, render_svg(region, tiling, heights))
}
