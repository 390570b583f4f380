//! CSV layouts for fields and boundary controls.
//!
//! Fields: header row `t, y_0, ..., y_nx`, then one row per level.
//! Controls: `t,w` for one side, `t,w_left,w_right` for both.
//! Numbers use the shortest representation that round-trips.

use std::path::Path;

use super::field::{BoundaryControl, SpaceTimeField, Traces};
use super::Grid;
use crate::scale::{Segment, Side};
use crate::{Error, Result};

pub fn write_field_csv(path: &Path, field: &SpaceTimeField) -> Result<()> {
    let g = field.grid();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..g.nodes()).map(|j| g.y(j).to_string()));
    w.write_record(&header)?;
    for m in 0..g.levels() {
        let mut row = vec![g.t(m).to_string()];
        row.extend(field.level(m).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Shape(format!("not a number: {s:?}")))
}

/// Reads a field written by [`write_field_csv`]; the grid is inferred.
pub fn read_field_csv(path: &Path) -> Result<SpaceTimeField> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let nodes = r.headers()?.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != nodes + 1 {
            return Err(Error::Shape("ragged field csv".into()));
        }
        times.push(parse(&rec[0])?);
        for s in rec.iter().skip(1) {
            values.push(parse(s)?);
        }
    }
    if times.len() < 2 || nodes < 2 {
        return Err(Error::Shape("field csv too small".into()));
    }
    let grid = Grid::new(nodes - 1, times.len() - 1, times[times.len() - 1])?;
    SpaceTimeField::from_values(grid, values)
}

/// Writes the active sides of a control (a single side gets a `w` column).
pub fn write_control_csv(path: &Path, control: &BoundaryControl, grid: Grid) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let seg = control.segment();
    let sides: Vec<Side> = match seg.single_side() {
        Some(s) => vec![s],
        None => vec![Side::Left, Side::Right],
    };
    if sides.len() == 1 {
        w.write_record(["t", "w"])?;
    } else {
        w.write_record(["t", "w_left", "w_right"])?;
    }
    for m in 0..grid.levels() {
        let mut row = vec![grid.t(m).to_string()];
        row.extend(sides.iter().map(|&s| control.samples(s)[m].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a control for `segment` on `grid`; columns follow [`write_control_csv`].
pub fn read_control_csv(path: &Path, segment: Segment, grid: Grid) -> Result<BoundaryControl> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    let mut traces = Traces::zeros(grid.nt);
    let mut m = 0;
    for rec in r.records() {
        let rec = rec?;
        if m >= grid.levels() {
            return Err(Error::Shape("control csv has too many rows".into()));
        }
        match (cols, segment.single_side()) {
            (2, Some(side)) => traces.side_mut(side)[m] = parse(&rec[1])?,
            (3, _) => {
                traces.left[m] = parse(&rec[1])?;
                traces.right[m] = parse(&rec[2])?;
            }
            _ => return Err(Error::Shape("control csv columns do not match the segment".into())),
        }
        m += 1;
    }
    if m != grid.levels() {
        return Err(Error::Shape(format!("control csv needs {} rows, got {m}", grid.levels())));
    }
    BoundaryControl::from_traces(segment, grid, traces)
}
