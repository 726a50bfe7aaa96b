//! 2-D scatter plots of a partitioning as SVG 1.1.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::PartitionAssignment;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a",
];

const PLOT: f64 = 600.0;
const MARGIN: f64 = 20.0;
const LEGEND_WIDTH: f64 = 180.0;
const RADIUS: f64 = 3.0;

pub fn partition_color(partition: usize) -> &'static str {
    PALETTE[partition % PALETTE.len()]
}

/// Renders every point filled with its partition's color; affected points
/// get a black ring. A legend lists every partition with its size, empty
/// ones included. Output bytes depend only on the inputs.
pub fn render_svg(ds: &Dataset, assignment: &PartitionAssignment) -> Result<String> {
    if ds.dims() != 2 {
        return Err(Error::NotTwoDimensional { dims: ds.dims() });
    }
    assignment.validate(ds)?;
    let m = assignment.partition_count();
    let legend_height = MARGIN * 2.0 + 18.0 * m as f64;
    let width = PLOT + 2.0 * MARGIN + LEGEND_WIDTH;
    let height = (PLOT + 2.0 * MARGIN).max(legend_height);

    let bounds = ds.bounds();
    let scale = |v: f64, j: usize| {
        let b = bounds[j];
        if b.width() > 0.0 {
            (v - b.min) / b.width()
        } else {
            0.5
        }
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" fill="none" stroke="#ccc"/>"##
    );

    for p in 0..m {
        let _ = writeln!(svg, r#"<g class="partition" id="p{p}" fill="{}">"#, partition_color(p));
        for (row, _) in assignment.labels().iter().enumerate().filter(|(_, &l)| l == p) {
            let c = ds.row(row);
            let x = MARGIN + scale(c[0], 0) * PLOT;
            let y = MARGIN + (1.0 - scale(c[1], 1)) * PLOT;
            let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{RADIUS}"/>"#);
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r#"<g class="affected" fill="none" stroke="black" stroke-width="1">"#);
    for (row, _) in assignment.affected_flags().iter().enumerate().filter(|(_, &a)| a) {
        let c = ds.row(row);
        let x = MARGIN + scale(c[0], 0) * PLOT;
        let y = MARGIN + (1.0 - scale(c[1], 1)) * PLOT;
        let _ = writeln!(svg, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{:.1}"/>"#, RADIUS + 2.0);
    }
    let _ = writeln!(svg, "</g>");

    let sizes = assignment.sizes();
    let lx = PLOT + 2.0 * MARGIN;
    let _ = writeln!(svg, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (p, size) in sizes.iter().enumerate() {
        let y = MARGIN + 18.0 * p as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}">partition {p} ({size})</text>"#,
            partition_color(p),
            lx + 18.0,
            y + 10.0
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

pub fn render_2d(ds: &Dataset, assignment: &PartitionAssignment, path: &Path) -> Result<()> {
    let svg = render_svg(ds, assignment)?;
    std::fs::write(path, svg).map_err(Error::at(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn single_partition_uses_one_color() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]]).unwrap();
        let a = PartitionAssignment::new(1, ds.ids().to_vec(), vec![0; 3], vec![false; 3]).unwrap();
        let svg = render_svg(&ds, &a).unwrap();
        assert_eq!(count(&svg, "<circle"), 3);
        assert_eq!(count(&svg, r#"class="partition""#), 1);
        assert!(svg.contains(PALETTE[0]));
        assert!(!svg.contains(PALETTE[1]));
    }

    #[test]
    fn empty_partition_keeps_its_legend_entry() {
        let ds = Dataset::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let a = PartitionAssignment::new(3, ds.ids().to_vec(), vec![0, 2], vec![false, true]).unwrap();
        let svg = render_svg(&ds, &a).unwrap();
        assert!(svg.contains("partition 1 (0)"));
        assert!(svg.contains("<g class=\"partition\" id=\"p1\" fill=\"#ff7f0e\">\n</g>"));
        // two points plus one ring
        assert_eq!(count(&svg, "<circle"), 3);
    }

    #[test]
    fn output_is_deterministic_and_2d_only() {
        let ds = Dataset::from_rows(&[[0.5, 0.25], [0.1, 0.9]]).unwrap();
        let a = PartitionAssignment::new(2, ds.ids().to_vec(), vec![1, 0], vec![false; 2]).unwrap();
        assert_eq!(render_svg(&ds, &a).unwrap(), render_svg(&ds, &a).unwrap());
        let ds3 = Dataset::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        let a3 = PartitionAssignment::new(1, vec![0], vec![0], vec![false]).unwrap();
        assert!(matches!(render_svg(&ds3, &a3), Err(Error::NotTwoDimensional { dims: 3 })));
    }
}
