//! CSV ingestion into clustered datasets, and writers for datasets and
//! matrices.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use clusterwise_core::data::{build_dataset, ClusterBlock, ClusteredDataset};
use clusterwise_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Name given to the column of ones added by `add_intercept`.
pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub cluster_col: String,
    pub y_col: String,
    pub x_cols: Vec<String>,
    #[serde(default = "default_true")]
    pub add_intercept: bool,
    /// Drop rows with a missing cell instead of failing.
    #[serde(default)]
    pub drop_na: bool,
    /// Clusters with fewer rows are dropped after reading.
    #[serde(default = "default_min_cluster_size")]
    pub min_cluster_size: usize,
}

fn default_true() -> bool {
    true
}

fn default_min_cluster_size() -> usize {
    1
}

impl CsvSchema {
    pub fn new(cluster_col: impl Into<String>, y_col: impl Into<String>, x_cols: Vec<String>) -> Self {
        Self {
            cluster_col: cluster_col.into(),
            y_col: y_col.into(),
            x_cols,
            add_intercept: true,
            drop_na: false,
            min_cluster_size: 1,
        }
    }

    /// Regressor names in design-column order.
    pub fn term_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.x_cols.len() + 1);
        if self.add_intercept {
            names.push(INTERCEPT.to_string());
        }
        names.extend(self.x_cols.iter().cloned());
        names
    }
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: ClusteredDataset,
    pub terms: Vec<String>,
    pub rows_read: usize,
    pub dropped_na_rows: usize,
    pub dropped_clusters: usize,
    pub dropped_cluster_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "N/A" | "na" | "NaN" | "nan" | "null" | "NULL")
}

fn parse_cell(cell: &str, line: u64, column: &str) -> Result<Option<f64>, DataError> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(DataError::ParseError {
            line,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedData, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Groups rows by `cluster_col` in order of first appearance.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadedData, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let cluster_idx = find(&schema.cluster_col)?;
    let y_idx = find(&schema.y_col)?;
    let x_idx: Vec<usize> = schema.x_cols.iter().map(|c| find(c)).collect::<Result<_, _>>()?;

    let offset = usize::from(schema.add_intercept);
    let k = schema.x_cols.len() + offset;
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut rows_read = 0;
    let mut dropped_na_rows = 0;

    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| DataError::Malformed {
            line: e.position().map_or(line, |p| p.line()),
            message: e.to_string(),
        })?;
        rows_read += 1;
        let cluster = record.get(cluster_idx).unwrap_or("").trim();
        if is_missing(cluster) {
            if schema.drop_na {
                dropped_na_rows += 1;
                continue;
            }
            return Err(DataError::MissingValue {
                line,
                column: schema.cluster_col.clone(),
            });
        }

        let mut row = vec![1.0; k];
        let mut missing = None;
        let y = parse_cell(record.get(y_idx).unwrap_or(""), line, &schema.y_col)?;
        if y.is_none() {
            missing = Some(&schema.y_col);
        }
        for (j, (&col, name)) in x_idx.iter().zip(&schema.x_cols).enumerate() {
            match parse_cell(record.get(col).unwrap_or(""), line, name)? {
                Some(v) => row[j + offset] = v,
                None => missing = missing.or(Some(name)),
            }
        }
        if let Some(column) = missing {
            if schema.drop_na {
                dropped_na_rows += 1;
                continue;
            }
            return Err(DataError::MissingValue {
                line,
                column: column.clone(),
            });
        }

        let g = *index.entry(cluster.to_string()).or_insert_with(|| {
            order.push(cluster.to_string());
            xs.push(Vec::new());
            ys.push(Vec::new());
            order.len() - 1
        });
        xs[g].extend(row);
        ys[g].push(y.expect("checked above"));
    }
    if rows_read == 0 {
        return Err(DataError::EmptyFile);
    }

    let mut blocks = Vec::with_capacity(order.len());
    let mut dropped_clusters = 0;
    let mut dropped_cluster_rows = 0;
    for ((id, x), y) in order.into_iter().zip(xs).zip(ys) {
        if y.len() < schema.min_cluster_size {
            dropped_clusters += 1;
            dropped_cluster_rows += y.len();
            continue;
        }
        let n = y.len();
        let x = Matrix::from_row_major(n, k, x).map_err(DataError::Model)?;
        blocks.push(ClusterBlock::new(id, x, y).map_err(DataError::Model)?);
    }
    if blocks.is_empty() {
        if dropped_clusters > 0 {
            return Err(DataError::AllClustersDropped {
                min_size: schema.min_cluster_size,
            });
        }
        return Err(DataError::EmptyFile);
    }
    Ok(LoadedData {
        dataset: build_dataset(blocks).map_err(DataError::Model)?,
        terms: schema.term_names(),
        rows_read,
        dropped_na_rows,
        dropped_clusters,
        dropped_cluster_rows,
    })
}

/// Writes `cluster_col, y_col, x_cols...` in the schema's column order,
/// skipping the added intercept. Numbers use the shortest representation
/// that parses back to the same `f64`.
pub fn write_csv<W: Write>(writer: W, dataset: &ClusteredDataset, schema: &CsvSchema) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.cluster_col.as_str(), schema.y_col.as_str()];
    header.extend(schema.x_cols.iter().map(String::as_str));
    w.write_record(&header)?;
    let offset = usize::from(schema.add_intercept);
    for block in dataset.blocks() {
        for i in 0..block.len() {
            let mut record = vec![block.id().to_string(), block.y()[i].to_string()];
            record.extend(block.x().row(i)[offset..].iter().map(f64::to_string));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dense row-major dump, one matrix row per CSV row, no header.
pub fn write_matrix_csv<W: Write>(writer: W, m: &Matrix) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
