//! Text formats: curve CSV, trace CSV, SVG and matrix dumps.
//!
//! Floats are written with Rust's shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{FlowTrace, Snapshot};
use crate::geometry::{DiscreteCurve, Vec2};

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Parses `x,y` lines (no header). Blank lines and `#` comments are skipped.
pub fn parse_curve_csv(text: &str) -> Result<DiscreteCurve> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::InvalidCurve(format!("line {}: expected `x,y`, got {line:?}", lineno + 1));
        let (x, y) = line.split_once(',').ok_or_else(bad)?;
        let x: f64 = x.trim().parse().map_err(|_| bad())?;
        let y: f64 = y.trim().parse().map_err(|_| bad())?;
        points.push(Vec2::new(x, y));
    }
    DiscreteCurve::new(points)
}

pub fn curve_csv(curve: &DiscreteCurve) -> String {
    let mut out = String::new();
    for p in curve.points() {
        let _ = writeln!(out, "{},{}", num(p.x), num(p.y));
    }
    out
}

/// `iteration,x,y` rows for one snapshot.
pub fn snapshot_csv(snapshot: &Snapshot) -> String {
    let mut out = String::from("iteration,x,y\n");
    for p in snapshot.curve.points() {
        let _ = writeln!(out, "{},{},{}", snapshot.iteration, num(p.x), num(p.y));
    }
    out
}

pub fn summary_header(with_stability: bool) -> String {
    let mut h = String::from("iteration,matched_fraction,area,max_v,cond_stage1,cond_stage2,time,mean_radius");
    if with_stability {
        h.push_str(",stability_bound");
    }
    h
}

/// One row per snapshot. Fields that were not computed are left empty.
pub fn summary_csv(trace: &FlowTrace, with_stability: bool) -> String {
    let mut out = summary_header(with_stability);
    out.push('\n');
    for s in &trace.snapshots {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.iteration,
            num(s.matched_fraction),
            num(s.area),
            opt(s.max_speed),
            opt(s.cond_stage1),
            opt(s.cond_stage2),
            num(s.time),
            num(s.curve.mean_radius()),
        );
        if with_stability {
            let _ = write!(out, ",{}", opt(s.stability_bound));
        }
        out.push('\n');
    }
    out
}

/// Red for the first snapshot through green for the last.
pub fn progress_color(index: usize, count: usize) -> String {
    let s = if count <= 1 { 1.0 } else { index as f64 / (count - 1) as f64 };
    let r = (220.0 * (1.0 - s)).round() as u8;
    let g = (160.0 * s).round() as u8;
    format!("#{r:02x}{g:02x}00")
}

/// Closed paths for the given curves, y axis pointing up.
pub fn curves_svg(curves: &[&DiscreteCurve]) -> String {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for c in curves {
        for p in c.points() {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
    }
    if curves.is_empty() {
        lo = Vec2::zeros();
        hi = Vec2::repeat(1.0);
    }
    let extent = (hi - lo).max().max(f64::MIN_POSITIVE);
    let margin = 0.05 * extent;
    let (x0, y0) = (lo.x - margin, -hi.y - margin);
    let (w, h) = (hi.x - lo.x + 2.0 * margin, hi.y - lo.y + 2.0 * margin);
    let stroke = extent / 400.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        num(x0),
        num(y0),
        num(w),
        num(h)
    );
    for (i, c) in curves.iter().enumerate() {
        let mut d = String::new();
        for (j, p) in c.points().iter().enumerate() {
            let _ = write!(d, "{}{} {} ", if j == 0 { 'M' } else { 'L' }, num(p.x), num(-p.y));
        }
        d.push('Z');
        let _ = writeln!(
            out,
            r#"  <path d="{d}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            progress_color(i, curves.len()),
            num(stroke)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn trace_svg(trace: &FlowTrace) -> String {
    let curves: Vec<&DiscreteCurve> = trace.snapshots.iter().map(|s| &s.curve).collect();
    curves_svg(&curves)
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn vector_csv(v: &DVector<f64>) -> String {
    v.iter().map(|x| num(*x) + "\n").collect()
}

/// Writes `snapshots/iter_XXXXXX.csv`, `summary.csv` and `final.svg`.
pub fn write_trace(dir: &Path, trace: &FlowTrace, with_stability: bool) -> std::io::Result<()> {
    let snaps = dir.join("snapshots");
    fs::create_dir_all(&snaps)?;
    for s in &trace.snapshots {
        fs::write(snaps.join(format!("iter_{:06}.csv", s.iteration)), snapshot_csv(s))?;
    }
    fs::write(dir.join("summary.csv"), summary_csv(trace, with_stability))?;
    fs::write(dir.join("final.svg"), trace_svg(trace))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_round_trip() {
        let c = DiscreteCurve::circle(Vec2::new(0.1, -0.3), 1.7, 9).unwrap();
        assert_eq!(parse_curve_csv(&curve_csv(&c)).unwrap(), c);
    }

    #[test]
    fn curve_csv_rejects_short_and_garbage() {
        assert!(parse_curve_csv("0,0\n1,0\n1,1\n0,1\n").is_err());
        assert!(parse_curve_csv("0,0\n1;0\n").is_err());
    }

    #[test]
    fn colors_run_red_to_green() {
        assert_eq!(progress_color(0, 5), "#dc0000");
        assert_eq!(progress_color(4, 5), "#00a000");
    }

    #[test]
    fn svg_has_one_path_per_curve() {
        let a = DiscreteCurve::circle(Vec2::zeros(), 1.0, 8).unwrap();
        let b = DiscreteCurve::circle(Vec2::zeros(), 0.5, 8).unwrap();
        let svg = curves_svg(&[&a, &b]);
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.starts_with("<svg"));
    }
}
