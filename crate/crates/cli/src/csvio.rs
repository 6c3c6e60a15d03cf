//! Fixed CSV schemas for the experiment artifacts.
//!
//! * samples: `site_row,site_col,y1,y2`
//! * tables: `sample_size,j,estimator,threshold,mean,std,is_min`
//! * grids: `x1,x2,value`
//! * rates: `wavelet,sample_size,estimator,j0,j1,mean_ise,std_ise`

use crate::runner::RatesRow;
use crate::CliError;
use std::path::Path;
use wavedens::estimator::Sample;
use wavedens::lattice::LatticeShape;
use wavedens::postprocess::{QuadratureGrid, VerReport};

pub fn write_sample_csv(path: &Path, shape: &LatticeShape, sample: &Sample) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["site_row", "site_col", "y1", "y2"])?;
    for (i, p) in sample.iter().enumerate() {
        let site = shape.site_at(i);
        w.write_record(&[
            site.row().to_string(),
            site.col().to_string(),
            p[0].to_string(),
            p[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample CSV back into lattice order; reports the first malformed
/// row by number.
pub fn read_sample_csv(path: &Path) -> Result<(LatticeShape, Sample), CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows: Vec<(i64, i64, f64, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line one
        let record = record.map_err(|e| {
            CliError::Config(format!("{}: malformed CSV at row {line}: {e}", path.display()))
        })?;
        let parse = |field: usize| -> Result<f64, CliError> {
            record
                .get(field)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "{}: row {line} has no field {field}",
                        path.display()
                    ))
                })?
                .parse::<f64>()
                .map_err(|e| {
                    CliError::Config(format!(
                        "{}: malformed number in row {line}, field {field}: {e}",
                        path.display()
                    ))
                })
        };
        rows.push((parse(0)? as i64, parse(1)? as i64, parse(2)?, parse(3)?));
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    let n1 = rows.iter().map(|r| r.0).max().unwrap();
    let n2 = rows.iter().map(|r| r.1).max().unwrap();
    if n1 < 1 || n2 < 1 || rows.len() != (n1 * n2) as usize {
        return Err(CliError::Config(format!(
            "{}: rows do not fill a {n1} x {n2} lattice",
            path.display()
        )));
    }
    let shape = LatticeShape::new(vec![n1 as usize, n2 as usize])?;
    let mut flat = vec![f64::NAN; 2 * rows.len()];
    for &(r, c, y1, y2) in &rows {
        let site = wavedens::lattice::Site::from_coords(&[r, c]);
        let idx = shape.flat_index(&site)?;
        flat[2 * idx] = y1;
        flat[2 * idx + 1] = y2;
    }
    if flat.iter().any(|v| v.is_nan()) {
        return Err(CliError::Config(format!("{}: duplicate or missing sites", path.display())));
    }
    Ok((shape, Sample::new(2, flat)?))
}

pub fn write_table_csv(path: &Path, report: &VerReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_size", "j", "estimator", "threshold", "mean", "std", "is_min"])?;
    for cell in &report.cells {
        w.write_record(&[
            cell.key.sample_size.to_string(),
            cell.key.level.to_string(),
            cell.key.estimator.clone(),
            cell.key.threshold.map(|t| t.to_string()).unwrap_or_default(),
            cell.mean.to_string(),
            cell.std.to_string(),
            (cell.is_min as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid_csv(path: &Path, grid: &QuadratureGrid, values: &[f64]) -> Result<(), CliError> {
    assert_eq!(values.len(), grid.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "value"])?;
    let mut idx = 0usize;
    let mut result = Ok(());
    grid.for_each_node(|x| {
        if result.is_ok() {
            result = w
                .write_record(&[x[0].to_string(), x[1].to_string(), values[idx].to_string()])
                .map_err(CliError::from);
        }
        idx += 1;
    });
    result?;
    w.flush()?;
    Ok(())
}

pub fn write_rates_csv(path: &Path, rows: &[RatesRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["wavelet", "sample_size", "estimator", "j0", "j1", "mean_ise", "std_ise"])?;
    for r in rows {
        w.write_record(&[
            r.wavelet.clone(),
            r.sample_size.to_string(),
            r.estimator.clone(),
            r.j0.to_string(),
            r.j1.to_string(),
            r.mean_ise.to_string(),
            r.std_ise.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use wavedens::lattice::LatticeShape;

    #[test]
    fn sample_csv_round_trip() {
        let dir = std::env::temp_dir().join("wavedens-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sample.csv");
        let shape = LatticeShape::new(vec![3, 4]).unwrap();
        let flat: Vec<f64> = (0..24).map(|i| i as f64 / 10.0).collect();
        let sample = Sample::new(2, flat).unwrap();
        write_sample_csv(&path, &shape, &sample).unwrap();
        let (shape2, sample2) = read_sample_csv(&path).unwrap();
        assert_eq!(shape2, shape);
        assert_eq!(sample2, sample);
    }

    #[test]
    fn malformed_csv_reports_row() {
        let dir = std::env::temp_dir().join("wavedens-csv-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("broken.csv");
        std::fs::write(&path, "site_row,site_col,y1,y2\n1,1,0.5,0.5\n1,2,oops,0.5\n").unwrap();
        let err = read_sample_csv(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "message: {msg}");
    }
}
