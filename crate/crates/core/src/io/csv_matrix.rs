//! Headered, comma-separated numeric matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A parsed CSV matrix. Unlike [`Tensor`] it may have zero data rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvMatrix {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.header.len()
    }

    /// Fails on an empty matrix.
    pub fn to_tensor(&self) -> Result<Tensor> {
        if self.rows.is_empty() {
            return Err(Error::invalid("matrix has no data rows"));
        }
        Tensor::from_rows(&self.rows)
    }
}

/// Parses a CSV whose first line names the columns. Every data row must have
/// the header's arity and finite numeric fields; errors carry the 0-based
/// data-row index.
pub fn parse_matrix_csv(text: &str) -> Result<CsvMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::invalid("missing header line"));
    }
    let mut rows = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Row {
                row,
                reason: format!("{} fields, header has {}", record.len(), header.len()),
            });
        }
        let values = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Row {
                    row,
                    reason: format!("{field:?} is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(CsvMatrix { header, rows })
}

pub fn read_matrix_csv(path: &Path) -> Result<CsvMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

pub fn matrix_csv_string(header: &[String], data: &Tensor) -> Result<String> {
    let (_, cols) = data.dims2()?;
    if cols != header.len() {
        return Err(Error::invalid(format!("{} header names for {cols} columns", header.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in 0..data.rows() {
        // `{}` on f64 prints the shortest string that parses back exactly
        w.write_record(data.row(r).iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_matrix_csv(path: &Path, header: &[String], data: &Tensor) -> Result<()> {
    std::fs::write(path, matrix_csv_string(header, data)?)?;
    Ok(())
}
