use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureColumn, FeatureMatrix, LabelMatrix, MultiLabelDataset, MISSING};
use crate::error::{Error, Result};

/// Loads a CSV dataset. Columns named in `label_names` become labels (kept
/// in header order), every other column is a feature.
pub fn load_csv<S: AsRef<str>>(path: impl AsRef<Path>, label_names: &[S]) -> Result<MultiLabelDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, label_names, name)
}

pub fn read_csv<R: Read, S: AsRef<str>>(
    reader: R,
    label_names: &[S],
    name: impl Into<String>,
) -> Result<MultiLabelDataset> {
    if label_names.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    super::check_names(&header)?;

    let wanted: HashSet<&str> = label_names.iter().map(AsRef::as_ref).collect();
    for l in label_names {
        if !header.iter().any(|h| h == l.as_ref()) {
            return Err(Error::MissingLabelColumn(l.as_ref().to_string()));
        }
    }
    let is_label: Vec<bool> = header.iter().map(|h| wanted.contains(h.as_str())).collect();

    let mut label_cols: Vec<Vec<bool>> = vec![Vec::new(); wanted.len()];
    let mut raw_features: Vec<Vec<String>> = vec![Vec::new(); header.len() - wanted.len()];
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let (mut li, mut fi) = (0, 0);
        for (j, cell) in record.iter().enumerate() {
            if is_label[j] {
                let v = match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::NonBinaryLabel {
                            row,
                            column: header[j].clone(),
                            value: other.to_string(),
                        })
                    }
                };
                label_cols[li].push(v);
                li += 1;
            } else {
                raw_features[fi].push(cell.to_string());
                fi += 1;
            }
        }
        n += 1;
    }

    let label_header: Vec<String> = header
        .iter()
        .zip(&is_label)
        .filter(|(_, &l)| l)
        .map(|(h, _)| h.clone())
        .collect();
    let feature_header: Vec<String> = header
        .iter()
        .zip(&is_label)
        .filter(|(_, &l)| !l)
        .map(|(h, _)| h.clone())
        .collect();
    let mut labels = LabelMatrix::from_columns(label_header, label_cols)?;
    labels.n_instances = n;
    let columns = raw_features.into_iter().map(infer_column).collect();
    let features = FeatureMatrix::new(n, feature_header, columns)?;
    MultiLabelDataset::new(name, features, labels)
}

/// A column is numeric when every present cell parses as a number.
fn infer_column(cells: Vec<String>) -> FeatureColumn {
    let present = |c: &String| c.trim() != MISSING;
    let numeric = cells
        .iter()
        .filter(|c| present(c))
        .all(|c| c.trim().parse::<f64>().is_ok());
    if numeric {
        FeatureColumn::Numeric(
            cells
                .iter()
                .map(|c| present(c).then(|| c.trim().parse().unwrap()))
                .collect(),
        )
    } else {
        FeatureColumn::Nominal(
            cells
                .into_iter()
                .map(|c| if present(&c) { Some(c) } else { None })
                .collect(),
        )
    }
}

/// Writes features followed by labels, in the format [`read_csv`] accepts.
pub fn write_csv<W: Write>(dataset: &MultiLabelDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let features = dataset.features();
    let labels = dataset.labels();
    w.write_record(features.names().iter().chain(labels.names()))?;
    for i in 0..dataset.n_instances() {
        let mut record: Vec<String> = features.columns().iter().map(|c| c.cell_text(i)).collect();
        record.extend((0..labels.n_labels()).map(|j| if labels.get(i, j) { "1" } else { "0" }.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
