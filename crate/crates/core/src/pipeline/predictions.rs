use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::network::{LabelNetwork, NodeKind};

/// Header of the instance column in prediction files.
pub const ID_COLUMN: &str = "instance_id";

/// Probabilities per instance (rows) and node name (columns).
///
/// On disk this is a wide CSV: `instance_id,<node>,...`, one row per
/// instance in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    columns: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl PredictionTable {
    pub fn new(columns: Vec<String>) -> Result<Self> {
        crate::dataset::check_names(&columns)?;
        if columns.iter().any(|c| c == ID_COLUMN) {
            return Err(Error::DuplicateName(ID_COLUMN.to_string()));
        }
        Ok(PredictionTable {
            columns,
            ids: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub fn push_row(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "row has {} values for {} columns",
                values.len(),
                self.columns.len()
            )));
        }
        self.ids.push(id.into());
        self.rows.push(values);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn n_instances(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn value(&self, row: usize, column: &str) -> Option<f64> {
        self.column_index(column).map(|j| self.rows[row][j])
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Row with the given instance id.
    pub fn find(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        PredictionTable {
            columns: self.columns.clone(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Rows for the given instance ids, in that order.
    pub fn select_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| Error::CoverageMismatch(format!("no predictions for instance `{}`", id.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_rows(&rows))
    }

    /// Fails on the first value outside [0, 1], naming its cell.
    pub fn check_range(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ProbabilityOutOfRange {
                        location: format!("instance `{}`, column `{}`", self.ids[i], self.columns[j]),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.first().map(String::as_str) != Some(ID_COLUMN) {
            return Err(Error::SchemaMismatch(format!(
                "prediction file must start with an `{ID_COLUMN}` column"
            )));
        }
        let mut table = PredictionTable::new(header[1..].to_vec())?;
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::RaggedRow {
                    row: r + 1,
                    expected: header.len(),
                    found: record.len(),
                });
            }
            let id = record[0].trim().to_string();
            let values = record
                .iter()
                .skip(1)
                .zip(&header[1..])
                .map(|(cell, col)| {
                    cell.trim().parse::<f64>().map_err(|_| Error::ProbabilityOutOfRange {
                        location: format!("instance `{id}`, column `{col}` (`{cell}` is not a number)"),
                        value: f64::NAN,
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push_row(id, values)?;
        }
        Ok(table)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once(ID_COLUMN).chain(self.columns.iter().map(String::as_str)))?;
        for (id, row) in self.ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<predictions>", e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Aligns a raw table with the evidence nodes of `network`.
///
/// The result has one column per evidence node, in node order. A missing
/// leak column is filled with the leak's training frequency and logged as a
/// warning; a missing real-label column is an error. Extra columns are
/// ignored.
pub fn align_predictions(raw: &PredictionTable, network: &LabelNetwork) -> Result<PredictionTable> {
    raw.check_range()?;
    let mut sources: Vec<Result<usize, f64>> = Vec::new();
    let mut columns = Vec::new();
    for (_, node) in network.evidence_nodes() {
        columns.push(node.name.clone());
        match raw.column_index(&node.name) {
            Some(j) => sources.push(Ok(j)),
            None if node.kind.is_leak() => {
                let freq = node.train_frequency.ok_or_else(|| {
                    Error::SchemaMismatch(format!(
                        "leak column `{}` missing and no training frequency recorded",
                        node.name
                    ))
                })?;
                warn!("imputing missing leak column `{}` with training frequency {freq}", node.name);
                sources.push(Err(freq));
            }
            None => {
                debug_assert_eq!(node.kind, NodeKind::Label);
                return Err(Error::SchemaMismatch(format!("missing label column `{}`", node.name)));
            }
        }
    }
    let mut out = PredictionTable::new(columns)?;
    for (i, id) in raw.ids().iter().enumerate() {
        let row = raw.row(i);
        let values = sources
            .iter()
            .map(|s| match *s {
                Ok(j) => row[j],
                Err(f) => f,
            })
            .collect();
        out.push_row(id.clone(), values)?;
    }
    Ok(out)
}

/// Reads an external predictions file and aligns it with `network`.
pub fn ingest_external_predictions(path: &Path, network: &LabelNetwork) -> Result<PredictionTable> {
    align_predictions(&PredictionTable::load(path)?, network)
}

/// Checks that every id names a dataset row (`0..n_instances`).
pub fn check_instance_ids(table: &PredictionTable, n_instances: usize) -> Result<()> {
    for id in table.ids() {
        match id.parse::<usize>() {
            Ok(i) if i < n_instances && i.to_string() == *id => {}
            _ => return Err(Error::UnknownInstance(id.clone())),
        }
    }
    Ok(())
}
