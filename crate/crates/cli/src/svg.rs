//! Color-cell rendering of a correlation matrix.

use std::fmt::Write as _;

use fedrul::preprocess::CorrelationMatrix;

const CELL: usize = 18;
const MARGIN: usize = 48;

/// Gray level for a coefficient: -1 is black, +1 is white.
pub fn gray(r: f64) -> u8 {
    let r = if r.is_finite() {
        r.clamp(-1.0, 1.0)
    } else {
        0.0
    };
    ((r + 1.0) / 2.0 * 255.0).round() as u8
}

pub fn heatmap_svg(m: &CorrelationMatrix) -> String {
    let n = m.size();
    let side = MARGIN + n * CELL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" font-family="monospace" font-size="8">"#
    );
    for (i, label) in m.labels.iter().enumerate() {
        let pos = MARGIN + i * CELL + CELL / 2;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{pos}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
            MARGIN - 4
        );
        let _ = writeln!(
            out,
            r#"<text x="{pos}" y="{}" text-anchor="start" transform="rotate(-90 {pos} {})">{label}</text>"#,
            MARGIN - 4,
            MARGIN - 4
        );
    }
    for i in 0..n {
        for j in 0..n {
            let r = m.get(i, j);
            let g = gray(r);
            let _ = writeln!(
                out,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{g:02x}{g:02x}{g:02x}"><title>{} / {}: {r:.3}</title></rect>"##,
                MARGIN + j * CELL,
                MARGIN + i * CELL,
                m.labels[i],
                m.labels[j],
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_ends() {
        assert_eq!(gray(-1.0), 0);
        assert_eq!(gray(1.0), 255);
        assert_eq!(gray(0.0), 128);
        assert_eq!(gray(f64::NAN), 128);
    }

    #[test]
    fn one_rect_per_cell() {
        let m = CorrelationMatrix {
            labels: vec!["A".into(), "RUL".into()],
            values: vec![1.0, -0.5, -0.5, 1.0],
        };
        let svg = heatmap_svg(&m);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("#ffffff"));
        assert!(svg.contains("#404040"));
    }
}
