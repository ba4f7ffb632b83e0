//! CSV grids and JSON summaries.
//!
//! A grid CSV has one header row. Axis columns are named
//! `axis:<name>:<start>:<step>:<count>`, followed by one column per component.
//! Rows are in row-major sample order (last axis fastest).

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::grid::{Axis, Field, GridChart};

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Write bytes through a temporary sibling and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_field_csv(path: &Path, field: &Field, names: &[&str]) -> Result<()> {
    if names.len() != field.ncomp {
        return Err(GeomError::Dimension { expected: field.ncomp, got: names.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        field.chart.axes.iter().map(|a| format!("axis:{}:{}:{}:{}", a.name, a.start, a.step, a.count)).collect();
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..field.chart.len() {
        row.clear();
        let idx = field.chart.unflat(k);
        row.extend(field.chart.coords(&idx).iter().map(|x| x.to_string()));
        row.extend(field.at_flat(k).iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| GeomError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

fn parse_axis(cell: &str) -> Result<Axis> {
    let parts: Vec<&str> = cell.split(':').collect();
    let bad = || GeomError::Spec(format!("malformed axis header `{cell}`"));
    if parts.len() != 5 || parts[0] != "axis" {
        return Err(bad());
    }
    let start: f64 = parts[2].parse().map_err(|_| bad())?;
    let step: f64 = parts[3].parse().map_err(|_| bad())?;
    let count: usize = parts[4].parse().map_err(|_| bad())?;
    Ok(Axis::new(parts[1], start, step, count))
}

/// Read a grid CSV back into a field and its component names.
pub fn read_field_csv(path: &Path) -> Result<(Field, Vec<String>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let axes: Vec<Axis> = header.iter().take_while(|c| c.starts_with("axis:")).map(parse_axis).collect::<Result<_>>()?;
    let dim = axes.len();
    let names: Vec<String> = header.iter().skip(dim).map(String::from).collect();
    let chart = GridChart::new(axes);
    chart.validate()?;
    let mut data = Vec::with_capacity(chart.len() * names.len());
    for rec in r.records() {
        let rec = rec?;
        for cell in rec.iter().skip(dim) {
            data.push(cell.parse::<f64>().map_err(|_| GeomError::Spec(format!("bad number `{cell}` in {}", path.display())))?);
        }
    }
    let f = Field::from_data(chart, names.len(), data)?;
    Ok((f, names))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let chart = GridChart::centered(&["u", "v"], &[7, 6], 0.1);
        let f = Field::from_coord_fn(chart, 2, |x, out| {
            out[0] = (x[0] * 3.7).sin() / 3.0;
            out[1] = x[1].exp() * 1e-7;
        });
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &f, &["a", "b"]).unwrap();
        let (g, names) = read_field_csv(&p).unwrap();
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(f, g);
    }

    #[test]
    fn malformed_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "axis:u:0:x:5,a\n0,1\n").unwrap();
        assert!(read_field_csv(&p).is_err());
    }
}
