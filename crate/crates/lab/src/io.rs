//! CSV and JSON artifacts. Missing values are written as empty cells.

use std::fs;
use std::path::Path;

use relvac_core::GoodState;
use serde::Serialize;

use crate::error::LabResult;

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Option<f64>>]) -> LabResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|c| c.map(fmt_num).unwrap_or_default()))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-tripping form; scientific notation for very small or large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() { x.to_string() } else { format!("{x:e}") }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> LabResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Node coordinates, `r`, `v` and the fluid flag of one state.
pub fn write_snapshot(path: &Path, s: &GoodState) -> LabResult<()> {
    let g = s.grid();
    let two = g.dim() == 2;
    let header: &[&str] = if two { &["x", "y", "r", "v1", "v2", "inside"] } else { &["x", "r", "v", "inside"] };
    let rows: Vec<Vec<Option<f64>>> = (0..g.len())
        .map(|k| {
            let x = g.x(k);
            let inside = if s.mask().inside[k] { 1.0 } else { 0.0 };
            let mut row = vec![Some(x[0])];
            if two {
                row.push(Some(x[1]));
            }
            row.push(Some(s.r().get(k, 0)));
            for c in 0..s.v().ncomp() {
                row.push(Some(s.v().get(k, c)));
            }
            row.push(Some(inside));
            row
        })
        .collect();
    write_csv(path, header, &rows)
}

pub fn ensure_dir(path: &Path) -> LabResult<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &["t", "x"], &[vec![Some(0.5), None], vec![Some(1e-20), Some(-3.0)]]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text, "t,x\n0.5,\n1e-20,-3\n");
        let mut rd = csv::Reader::from_path(&p).unwrap();
        let back: Vec<f64> = rd.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
        assert_eq!(back, vec![0.5, 1e-20]);
    }
}
