//! Phase-grid heatmap as a standalone SVG document.

use std::fmt::Write;

use driftlab::phase::{PhaseGrid, Verdict};

const CELL: f64 = 6.0;
const MARGIN: f64 = 60.0;
const LEGEND_WIDTH: f64 = 170.0;

pub const VERDICTS: [Verdict; 5] = [
    Verdict::Recurrent,
    Verdict::Transient,
    Verdict::OpenProblem,
    Verdict::CriticalBoundary,
    Verdict::Invalid,
];

pub fn color(v: Verdict) -> &'static str {
    match v {
        Verdict::Recurrent => "#2c7bb6",
        Verdict::Transient => "#d7191c",
        Verdict::OpenProblem => "#ffbf00",
        Verdict::CriticalBoundary => "#6a3d9a",
        Verdict::Invalid => "#d9d9d9",
    }
}

/// Columns run over alpha left to right, rows over beta bottom to top.
pub fn heatmap(grid: &PhaseGrid) -> String {
    let n = grid.resolution;
    let side = n as f64 * CELL;
    let (w, h) = (side + 2.0 * MARGIN + LEGEND_WIDTH, side + 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for row in 0..n {
        for col in 0..n {
            let c = grid.cell(row, col);
            let x = MARGIN + col as f64 * CELL;
            let y = MARGIN + (n - 1 - row) as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>alpha={} beta={} {} {}</title></rect>"#,
                color(c.label.verdict),
                c.alpha,
                c.beta,
                c.label.verdict.as_str(),
                c.label.justification.as_str()
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );

    let first = grid.cell(0, 0);
    let last = grid.cell(n - 1, n - 1);
    let bottom = MARGIN + side;
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}">{}</text>"#, bottom + 16.0, first.alpha);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN + side,
        bottom + 16.0,
        last.alpha
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">alpha</text>"#,
        MARGIN + side / 2.0,
        bottom + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{bottom}" text-anchor="end">{}</text>"#,
        MARGIN - 6.0,
        first.beta
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN - 6.0,
        MARGIN + 10.0,
        last.beta
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">beta</text>"#,
        MARGIN - 30.0,
        MARGIN + side / 2.0,
        MARGIN - 30.0,
        MARGIN + side / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}">rho = {}</text>"#,
        MARGIN - 20.0,
        first.rho
    );

    let lx = MARGIN + side + 20.0;
    for (i, v) in VERDICTS.iter().enumerate() {
        let y = MARGIN + i as f64 * 22.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{y}" width="14" height="14" fill="{}" stroke="black"/>"#,
            color(*v)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, y + 12.0, v.as_str());
    }
    s.push_str("</svg>\n");
    s
}
