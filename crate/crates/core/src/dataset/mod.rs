//! Multi-label datasets: a boolean label matrix paired with a feature
//! matrix, plus loaders and cross-validation fold assignment.

mod arff;
mod csv;
mod folds;

use std::collections::HashSet;

pub use self::arff::{load_mulan, parse_label_xml, read_mulan};
pub use self::csv::{load_csv, read_csv, write_csv};
pub use self::folds::{split_folds, FoldSplit};

use crate::error::{Error, Result};

/// Marker for a missing feature value in text formats.
pub const MISSING: &str = "?";

pub(crate) fn check_names<'a>(names: impl IntoIterator<Item = &'a String>) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateName(name.clone()));
        }
    }
    Ok(())
}

/// Instances × labels boolean matrix, stored column by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    names: Vec<String>,
    n_instances: usize,
    columns: Vec<Vec<bool>>,
}

impl LabelMatrix {
    /// Builds a matrix from per-label columns. Names must be unique and
    /// non-empty and all columns must have the same length.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<bool>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} label names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        check_names(&names)?;
        let n_instances = columns.first().map_or(0, Vec::len);
        if let Some((j, col)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_instances) {
            return Err(Error::Shape(format!(
                "column `{}` has {} rows, expected {}",
                names[j],
                col.len(),
                n_instances
            )));
        }
        Ok(LabelMatrix {
            names,
            n_instances,
            columns,
        })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<bool>]) -> Result<Self> {
        let q = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); q];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: q,
                    found: row.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let mut m = Self::from_columns(names, columns)?;
        m.n_instances = rows.len();
        Ok(m)
    }

    /// An empty matrix with the given labels and no instances.
    pub fn empty(names: Vec<String>) -> Result<Self> {
        let columns = vec![Vec::new(); names.len()];
        Self::from_columns(names, columns)
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_labels(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, label: usize) -> &[bool] {
        &self.columns[label]
    }

    pub fn column_by_name(&self, name: &str) -> Result<&[bool]> {
        self.index_of(name)
            .map(|j| self.column(j))
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn get(&self, instance: usize, label: usize) -> bool {
        self.columns[label][instance]
    }

    pub fn row(&self, instance: usize) -> Vec<bool> {
        self.columns.iter().map(|c| c[instance]).collect()
    }

    /// Number of instances carrying the label.
    pub fn positive_count(&self, label: usize) -> usize {
        self.columns[label].iter().filter(|&&v| v).count()
    }

    pub fn positive_counts(&self) -> Vec<usize> {
        (0..self.n_labels()).map(|j| self.positive_count(j)).collect()
    }

    /// Sub-matrix over the given instances, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        LabelMatrix {
            names: self.names.clone(),
            n_instances: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }

    /// Appends a column. Fails on a duplicate name or a length mismatch.
    pub fn push_column(&mut self, name: String, column: Vec<bool>) -> Result<()> {
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if self.index_of(&name).is_some() {
            return Err(Error::DuplicateName(name));
        }
        if column.len() != self.n_instances {
            return Err(Error::Shape(format!(
                "column `{}` has {} rows, expected {}",
                name,
                column.len(),
                self.n_instances
            )));
        }
        self.names.push(name);
        self.columns.push(column);
        Ok(())
    }
}

/// One feature column: either all numeric or all nominal, with `None` for
/// missing cells.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureColumn {
    Numeric(Vec<Option<f64>>),
    Nominal(Vec<Option<String>>),
}

impl FeatureColumn {
    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric(v) => v.len(),
            FeatureColumn::Nominal(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureColumn::Numeric(_))
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            FeatureColumn::Numeric(v) => {
                FeatureColumn::Numeric(rows.iter().map(|&i| v[i]).collect())
            }
            FeatureColumn::Nominal(v) => {
                FeatureColumn::Nominal(rows.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }

    /// Text form of a cell, using [`MISSING`] for absent values.
    pub fn cell_text(&self, row: usize) -> String {
        match self {
            FeatureColumn::Numeric(v) => v[row].map_or_else(|| MISSING.to_string(), |x| x.to_string()),
            FeatureColumn::Nominal(v) => v[row].clone().unwrap_or_else(|| MISSING.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_instances: usize,
    names: Vec<String>,
    columns: Vec<FeatureColumn>,
}

impl FeatureMatrix {
    pub fn new(n_instances: usize, names: Vec<String>, columns: Vec<FeatureColumn>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        check_names(&names)?;
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n_instances) {
            return Err(Error::Shape(format!(
                "feature `{}` has {} rows, expected {}",
                names[j],
                c.len(),
                n_instances
            )));
        }
        Ok(FeatureMatrix {
            n_instances,
            names,
            columns,
        })
    }

    /// A matrix with rows but no feature columns.
    pub fn empty(n_instances: usize) -> Self {
        FeatureMatrix {
            n_instances,
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        FeatureMatrix {
            n_instances: rows.len(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
        }
    }
}

/// Features and labels for the same instances.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    pub name: String,
    features: FeatureMatrix,
    labels: LabelMatrix,
}

impl MultiLabelDataset {
    pub fn new(name: impl Into<String>, features: FeatureMatrix, labels: LabelMatrix) -> Result<Self> {
        if features.n_instances() != labels.n_instances() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} label rows",
                features.n_instances(),
                labels.n_instances()
            )));
        }
        check_names(features.names().iter().chain(labels.names()))?;
        Ok(MultiLabelDataset {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn n_instances(&self) -> usize {
        self.labels.n_instances()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        MultiLabelDataset {
            name: self.name.clone(),
            features: self.features.select_rows(rows),
            labels: self.labels.select_rows(rows),
        }
    }
}
