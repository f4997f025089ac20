//! CSV and SVG emission helpers for the CLI.
//!
//! All output is byte-deterministic for a given input: floats are printed
//! with Rust's shortest-roundtrip formatting and the SVG is a static
//! document with fixed layout.

use std::fmt::Write as _;

use crate::bec::{polarization_fraction, rate_statistic, ErasureVector};

pub const CSV_HEADER: &str = "# polarkit-csv v1";

/// Leaf table plus per-level summary block for a polarization run.
pub fn polarize_csv(levels: &[ErasureVector], delta: f64, beta: f64) -> String {
    let mut out = String::new();
    let last = levels.last().expect("at least one level");
    writeln!(out, "{CSV_HEADER}").unwrap();
    writeln!(out, "leaf_index,path_digits,eps,I,Z").unwrap();
    for (idx, &eps) in last.eps.iter().enumerate() {
        let digits = path_digits(idx, last.ell, last.level);
        writeln!(out, "{idx},{digits},{eps},{},{eps}", 1.0 - eps).unwrap();
    }
    writeln!(out, "# summary").unwrap();
    writeln!(out, "level,fraction_mid,rate_stat,mean_eps").unwrap();
    for v in levels {
        writeln!(
            out,
            "{},{},{},{}",
            v.level,
            polarization_fraction(v, delta),
            rate_statistic(v, beta),
            v.mean()
        )
        .unwrap();
    }
    out
}

pub fn path_digits(mut idx: usize, ell: usize, level: usize) -> String {
    if level == 0 {
        return "-".into();
    }
    let mut digits = vec![0usize; level];
    for d in (0..level).rev() {
        digits[d] = idx % ell;
        idx /= ell;
    }
    digits.iter().map(|d| d.to_string()).collect()
}

/// Static SVG: one 20-bin histogram of leaf capacities per level.
pub fn polarize_svg(levels: &[ErasureVector], non_polarizing: bool) -> String {
    const BINS: usize = 20;
    const ROW_H: usize = 80;
    const BAR_W: usize = 24;
    const MARGIN: usize = 60;
    let width = MARGIN + BINS * BAR_W + 20;
    let height = levels.len() * ROW_H + 40;
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    )
    .unwrap();
    writeln!(out, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>").unwrap();
    let title = if non_polarizing {
        "leaf capacity histograms (non-polarizing)"
    } else {
        "leaf capacity histograms"
    };
    writeln!(
        out,
        "<text x=\"{MARGIN}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{title}</text>"
    )
    .unwrap();
    for (row, v) in levels.iter().enumerate() {
        let top = 30 + row * ROW_H;
        let base = top + ROW_H - 18;
        let mut bins = [0usize; BINS];
        for &eps in &v.eps {
            let i = 1.0 - eps;
            let bin = ((i * BINS as f64) as usize).min(BINS - 1);
            bins[bin] += 1;
        }
        let total = v.eps.len() as f64;
        writeln!(
            out,
            "<text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">n={}</text>",
            base - 20,
            v.level
        )
        .unwrap();
        for (b, &count) in bins.iter().enumerate() {
            let frac = count as f64 / total;
            let h = (frac * (ROW_H - 24) as f64).round() as usize;
            let x = MARGIN + b * BAR_W;
            let y = base - h;
            writeln!(
                out,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{}\" height=\"{h}\" fill=\"#336699\"/>",
                BAR_W - 2
            )
            .unwrap();
        }
        writeln!(
            out,
            "<line x1=\"{MARGIN}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>",
            MARGIN + BINS * BAR_W
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{MARGIN}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">I=0</text>",
            base + 12
        )
        .unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"10\">I=1</text>",
            MARGIN + BINS * BAR_W - 20,
            base + 12
        )
        .unwrap();
    }
    writeln!(out, "</svg>").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bec::bec_polarize;
    use crate::gf2::g2;

    #[test]
    fn csv_is_versioned_and_deterministic() {
        let levels: Vec<ErasureVector> =
            (0..=3).map(|n| bec_polarize(&g2(), 0.5, n).unwrap()).collect();
        let a = polarize_csv(&levels, 0.1, 0.25);
        let b = polarize_csv(&levels, 0.1, 0.25);
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        assert!(a.contains("# summary"));
        assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 8 + 1 + 4 + 1);
    }

    #[test]
    fn path_digit_rendering() {
        assert_eq!(path_digits(5, 2, 4), "0101");
        assert_eq!(path_digits(5, 3, 3), "012");
        assert_eq!(path_digits(0, 2, 0), "-");
    }

    #[test]
    fn svg_is_self_contained() {
        let levels = vec![bec_polarize(&g2(), 0.5, 2).unwrap()];
        let svg = polarize_svg(&levels, false);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg, polarize_svg(&levels, false));
    }
}
