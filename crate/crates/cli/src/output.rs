//! CSV and SVG rendering of stability regions.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use crate::experiments::StabilityRegion;

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (PRECISION - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv_string(region: &StabilityRegion) -> String {
    let mut out = String::from("axis1,axis2,stable,max_real_eig\n");
    for (i, &v1) in region.values1.iter().enumerate() {
        for (j, &v2) in region.values2.iter().enumerate() {
            let c = region.cell(i, j);
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_g(v1),
                fmt_g(v2),
                u8::from(c.stable),
                fmt_g(c.max_real_eig)
            );
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn emit_csv(region: &StabilityRegion, path: &Path) -> Result<()> {
    write_file(path, &csv_string(region))
}

const STABLE_FILL: &str = "#3b6fb6";
const UNSTABLE_FILL: &str = "#f0f0f0";
const PLOT_W: f64 = 600.0;
const PLOT_H: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Heatmap with axis1 horizontal and axis2 vertical (increasing upward).
pub fn svg_string(region: &StabilityRegion) -> String {
    let n1 = region.values1.len();
    let n2 = region.values2.len();
    let cw = PLOT_W / n1 as f64;
    let ch = PLOT_H / n2 as f64;
    let width = PLOT_W + 2.0 * MARGIN;
    let height = PLOT_H + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for i in 0..n1 {
        for j in 0..n2 {
            let fill = if region.cell(i, j).stable { STABLE_FILL } else { UNSTABLE_FILL };
            let x = MARGIN + i as f64 * cw;
            let y = MARGIN + PLOT_H - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                cw + 0.01,
                ch + 0.01
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
    );
    let bottom = MARGIN + PLOT_H;
    let (x0, x1) = (region.values1[0], region.values1[n1 - 1]);
    let (y0, y1) = (region.values2[0], region.values2[n2 - 1]);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.1}" text-anchor="start">{}</text>"#,
        bottom + 16.0,
        fmt_g(x0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        MARGIN + PLOT_W,
        bottom + 16.0,
        fmt_g(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN + PLOT_W / 2.0,
        bottom + 36.0,
        region.axis1.as_str()
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{bottom:.1}" text-anchor="end">{}</text>"#,
        MARGIN - 6.0,
        fmt_g(y0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
        MARGIN - 6.0,
        MARGIN + 12.0,
        fmt_g(y1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        MARGIN - 24.0,
        MARGIN + PLOT_H / 2.0,
        MARGIN - 24.0,
        MARGIN + PLOT_H / 2.0,
        region.axis2.as_str()
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="20" width="12" height="12" fill="{STABLE_FILL}"/><text x="{:.1}" y="30">stable</text>"#,
        MARGIN,
        MARGIN + 16.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.1}" y="20" width="12" height="12" fill="{UNSTABLE_FILL}" stroke="black"/><text x="{:.1}" y="30">unstable</text>"#,
        MARGIN + 90.0,
        MARGIN + 106.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg_heatmap(region: &StabilityRegion, path: &Path) -> Result<()> {
    write_file(path, &svg_string(region))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::CellRecord;
    use crate::scenario::AxisName;

    #[test]
    fn percent_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-6.0, "-6"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333333"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-5, "1e-05"),
            (0.0001234, "0.0001234"),
            (-2.014889156509222, "-2.01488915651"),
            (1e100, "1e+100"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    fn tiny() -> StabilityRegion {
        let cell = |stable, e| CellRecord { stable, max_real_eig: e, error: None };
        StabilityRegion {
            axis1: AxisName::Beta,
            axis2: AxisName::KDb,
            values1: vec![0.0, 1.0],
            values2: vec![-6.0, 0.5],
            cells: vec![cell(true, -0.5), cell(true, -1.0), cell(false, 0.25), cell(false, f64::NAN)],
        }
    }

    #[test]
    fn csv_rows() {
        let csv = csv_string(&tiny());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "axis1,axis2,stable,max_real_eig");
        assert_eq!(lines[1], "0,-6,1,-0.5");
        assert_eq!(lines[4], "1,0.5,0,nan");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn svg_is_deterministic() {
        let a = svg_string(&tiny());
        assert_eq!(a, svg_string(&tiny()));
        assert_eq!(a.matches(STABLE_FILL).count(), 3);
        assert!(a.contains(">beta<") && a.contains(">k_db<"));
    }
}
