//! CSV artifacts. Reals are written with 17 significant digits
//! (`{:.16e}`) so every file parses back to the identical `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::harness::LandscapeSlice;
use crate::model::{Dataset, Layout};
use crate::solvers::SolveReport;

pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

/// One row of `table1.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub iterations: usize,
    pub walltime_ms: f64,
    pub final_loss: f64,
}

pub fn table1_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("method,iterations,walltime_ms,final_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{}\n",
            r.method,
            r.iterations,
            r.walltime_ms,
            format_real(r.final_loss)
        ));
    }
    out
}

pub fn write_table1(path: &Path, rows: &[TableRow]) -> std::io::Result<()> {
    write_file(path, &table1_csv(rows))
}

/// `iter,loss,grad_inf_norm,p0,...,p{K-1}`
pub fn trajectory_csv(report: &SolveReport) -> String {
    let k = report.final_params.len();
    let mut out = String::from("iter,loss,grad_inf_norm");
    for p in 0..k {
        out.push_str(&format!(",p{p}"));
    }
    out.push('\n');
    for (it, ((l, g), v)) in report
        .loss_trace
        .iter()
        .zip(&report.grad_norm_trace)
        .zip(&report.trajectory)
        .enumerate()
    {
        out.push_str(&format!("{it},{},{}", format_real(*l), format_real(*g)));
        for x in &v.values {
            out.push(',');
            out.push_str(&format_real(*x));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, report: &SolveReport) -> std::io::Result<()> {
    write_file(path, &trajectory_csv(report))
}

pub fn landscape_file_name(slice: &LandscapeSlice) -> String {
    format!("landscape_{}_{}.csv", slice.axis1.name, slice.axis2.name)
}

/// `<ax1>,<ax2>,loss`, row-major over `grid1` then `grid2`; overflow is `inf`.
pub fn landscape_csv(slice: &LandscapeSlice) -> String {
    let mut out = format!("{},{},loss\n", slice.axis1.name, slice.axis2.name);
    for (a, row) in slice.grid1.iter().zip(&slice.loss_values) {
        for (b, cell) in slice.grid2.iter().zip(row) {
            out.push_str(&format!(
                "{},{},{}\n",
                format_real(*a),
                format_real(*b),
                format_real(cell.unwrap_or(f64::INFINITY))
            ));
        }
    }
    out
}

pub fn write_landscape(dir: &Path, slice: &LandscapeSlice) -> std::io::Result<std::path::PathBuf> {
    let path = dir.join(landscape_file_name(slice));
    write_file(&path, &landscape_csv(slice))?;
    Ok(path)
}

/// Header `x1,...,xd,y`.
pub fn dataset_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 1..=data.dim() {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("y\n");
    for (x, y) in data.iter() {
        for v in x {
            out.push_str(&format_real(*v));
            out.push(',');
        }
        out.push_str(&format_real(y));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset, ReadError> {
    let display = path.display().to_string();
    let csv_err = |source| ReadError::Csv {
        path: display.clone(),
        source,
    };
    let format_err = |message: String| ReadError::Format {
        path: display.clone(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let dim = headers.len().saturating_sub(1);
    let expected: Vec<String> = (1..=dim)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    if dim == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(format_err(format!(
            "header must be `{}`",
            expected.join(",")
        )));
    }
    let mut points = Vec::new();
    let mut targets = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = parsed.map_err(|e| format_err(format!("row {}: {e}", line + 2)))?;
        points.extend_from_slice(&values[..dim]);
        targets.push(values[dim]);
    }
    Dataset::new(dim, points, targets).map_err(|e| format_err(e.to_string()))
}

/// Axis names of a layout in canonical order.
pub fn axis_names(layout: Layout) -> Vec<String> {
    (0..layout.len()).map(|k| layout.axis_name(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = Dataset::from_rows(&[vec![0.1, 1.0 / 3.0], vec![2.5, -7.0]], vec![0.7, 1e-300]).unwrap();
        let path = dir.path().join("dataset.csv");
        std::fs::write(&path, dataset_csv(&data)).unwrap();
        assert_eq!(read_dataset_csv(&path).unwrap(), data);
    }

    #[test]
    fn dataset_csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_dataset_csv(&path), Err(ReadError::Format { .. })));
    }

    #[test]
    fn special_values() {
        assert_eq!(format_real(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn reals_parse_back_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(format_real(v).parse::<f64>().unwrap(), v);
        }
    }
}
