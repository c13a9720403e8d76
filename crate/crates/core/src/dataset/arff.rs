//! Mulan-style input: an attribute-relation file holding features and
//! labels, plus an XML file listing which attributes are labels.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::{FeatureColumn, FeatureMatrix, LabelMatrix, MultiLabelDataset, MISSING};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug)]
struct Attribute {
    name: String,
    kind: AttrType,
}

impl Attribute {
    /// Value of a cell omitted from a sparse row.
    fn sparse_default(&self) -> String {
        match &self.kind {
            AttrType::Numeric => "0".to_string(),
            AttrType::Nominal(values) => values[0].clone(),
        }
    }
}

pub fn load_mulan(arff_path: impl AsRef<Path>, xml_path: impl AsRef<Path>) -> Result<MultiLabelDataset> {
    let arff_path = arff_path.as_ref();
    let xml_path = xml_path.as_ref();
    let arff = fs::read_to_string(arff_path).map_err(|e| Error::io(arff_path, e))?;
    let xml = fs::read_to_string(xml_path).map_err(|e| Error::io(xml_path, e))?;
    read_mulan(&arff, &xml)
}

/// Collects the `name` attribute of every `<label>` element, at any depth
/// (hierarchical label files nest them).
pub fn parse_label_xml(text: &str) -> Result<Vec<String>> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Xml(e.to_string()))?;
    let mut names = Vec::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("label")) {
        let name = node
            .attribute("name")
            .ok_or_else(|| Error::Xml("<label> element without a name attribute".into()))?;
        names.push(name.to_string());
    }
    if names.is_empty() {
        return Err(Error::NoLabels);
    }
    super::check_names(&names)?;
    Ok(names)
}

pub fn read_mulan(arff: &str, xml: &str) -> Result<MultiLabelDataset> {
    let label_names = parse_label_xml(xml)?;
    let mut relation = String::new();
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    let mut in_data = false;

    for (idx, raw) in arff.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let err = |message: String| Error::Arff {
            line: line_no,
            message,
        };
        if in_data {
            rows.push((line_no, parse_row(line, &attrs).map_err(err)?));
            continue;
        }
        let (keyword, rest) = split_keyword(line);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => relation = unquote(rest.trim()),
            "@attribute" => attrs.push(parse_attribute(rest, line_no)?),
            "@data" => in_data = true,
            other => return Err(err(format!("unexpected header line starting with `{other}`"))),
        }
    }
    if !in_data {
        return Err(Error::Arff {
            line: arff.lines().count(),
            message: "missing @data section".into(),
        });
    }
    let attr_names: Vec<String> = attrs.iter().map(|a| a.name.clone()).collect();
    super::check_names(&attr_names)?;
    for l in &label_names {
        if !attr_names.contains(l) {
            return Err(Error::MissingLabelColumn(l.clone()));
        }
    }

    let wanted: HashSet<&str> = label_names.iter().map(String::as_str).collect();
    let n = rows.len();
    let mut label_header = Vec::new();
    let mut label_cols = Vec::new();
    let mut feature_header = Vec::new();
    let mut feature_cols = Vec::new();
    for (j, attr) in attrs.iter().enumerate() {
        if wanted.contains(attr.name.as_str()) {
            let mut col = Vec::with_capacity(n);
            for (line, row) in &rows {
                col.push(match row[j].as_str() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::NonBinaryLabel {
                            row: *line,
                            column: attr.name.clone(),
                            value: other.to_string(),
                        })
                    }
                });
            }
            label_header.push(attr.name.clone());
            label_cols.push(col);
        } else {
            let column = match &attr.kind {
                AttrType::Numeric => FeatureColumn::Numeric(
                    rows.iter()
                        .map(|(_, r)| (r[j] != MISSING).then(|| r[j].parse().unwrap()))
                        .collect(),
                ),
                AttrType::Nominal(_) => FeatureColumn::Nominal(
                    rows.iter()
                        .map(|(_, r)| (r[j] != MISSING).then(|| r[j].clone()))
                        .collect(),
                ),
            };
            feature_header.push(attr.name.clone());
            feature_cols.push(column);
        }
    }
    let mut labels = LabelMatrix::from_columns(label_header, label_cols)?;
    labels.n_instances = n;
    let features = FeatureMatrix::new(n, feature_header, feature_cols)?;
    MultiLabelDataset::new(relation, features, labels)
}

fn split_keyword(line: &str) -> (&str, &str) {
    match line.find(char::is_whitespace) {
        Some(i) => (&line[..i], &line[i..]),
        None => (line, ""),
    }
}

/// Reads one possibly-quoted token from the front of `s`, returning it and
/// the remainder.
fn take_token(s: &str) -> (String, &str) {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, q @ ('\'' | '"'))) => {
            let mut out = String::new();
            let mut escaped = false;
            for (i, c) in chars {
                if escaped {
                    out.push(c);
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    return (out, &s[i + 1..]);
                } else {
                    out.push(c);
                }
            }
            (out, "")
        }
        Some(_) => {
            let end = s.find(char::is_whitespace).unwrap_or(s.len());
            (s[..end].to_string(), &s[end..])
        }
        None => (String::new(), ""),
    }
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2
        && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"')))
    {
        take_token(s).0
    } else {
        s.to_string()
    }
}

/// Splits on commas that are not inside quotes.
fn split_fields(s: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in s.chars() {
        if escaped {
            current.push(c);
            escaped = false;
            continue;
        }
        match (quote, c) {
            (Some(_), '\\') => {
                current.push(c);
                escaped = true;
            }
            (Some(q), c) if c == q => {
                quote = None;
                current.push(c);
            }
            (None, '\'' | '"') => {
                quote = Some(c);
                current.push(c);
            }
            (None, ',') => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields.into_iter().map(|f| unquote(&f)).collect()
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let (name, kind_text) = take_token(rest);
    if name.is_empty() {
        return Err(Error::Arff {
            line,
            message: "attribute without a name".into(),
        });
    }
    let kind_text = kind_text.trim();
    let lower = kind_text.to_ascii_lowercase();
    let kind = if matches!(lower.as_str(), "numeric" | "real" | "integer") {
        AttrType::Numeric
    } else if kind_text.starts_with('{') && kind_text.ends_with('}') {
        let values = split_fields(&kind_text[1..kind_text.len() - 1]);
        if values.iter().any(String::is_empty) {
            return Err(Error::Arff {
                line,
                message: format!("attribute `{name}` has an empty nominal value"),
            });
        }
        AttrType::Nominal(values)
    } else {
        let kind = lower.split_whitespace().next().unwrap_or("").to_string();
        return Err(Error::UnsupportedAttribute { name, kind });
    };
    Ok(Attribute { name, kind })
}

fn check_value(attr: &Attribute, value: String) -> std::result::Result<String, String> {
    if value == MISSING {
        return Ok(value);
    }
    match &attr.kind {
        AttrType::Numeric => value
            .parse::<f64>()
            .map(|_| value.clone())
            .map_err(|_| format!("attribute `{}`: `{value}` is not numeric", attr.name)),
        AttrType::Nominal(values) => {
            if values.contains(&value) {
                Ok(value)
            } else {
                Err(format!("attribute `{}`: `{value}` is not a declared value", attr.name))
            }
        }
    }
}

fn parse_row(line: &str, attrs: &[Attribute]) -> std::result::Result<Vec<String>, String> {
    if let Some(body) = line.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| "unterminated sparse row".to_string())?;
        let mut row: Vec<String> = attrs.iter().map(Attribute::sparse_default).collect();
        if body.trim().is_empty() {
            return Ok(row);
        }
        for entry in split_fields_raw(body) {
            let entry = entry.trim();
            let (index, value) = entry
                .split_once(char::is_whitespace)
                .ok_or_else(|| format!("malformed sparse entry `{entry}`"))?;
            let index: usize = index
                .parse()
                .map_err(|_| format!("bad sparse index `{index}`"))?;
            let attr = attrs
                .get(index)
                .ok_or_else(|| format!("sparse index {index} out of range"))?;
            row[index] = check_value(attr, unquote(value))?;
        }
        Ok(row)
    } else {
        let fields = split_fields(line);
        if fields.len() != attrs.len() {
            return Err(format!("expected {} values, found {}", attrs.len(), fields.len()));
        }
        fields
            .into_iter()
            .zip(attrs)
            .map(|(v, a)| check_value(a, v.trim().to_string()))
            .collect()
    }
}

/// Like [`split_fields`] but leaves quoting in place, so sparse entries can
/// be split into index and value afterwards.
fn split_fields_raw(s: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    for c in s.chars() {
        match (quote, c) {
            (Some(q), c) if c == q => {
                quote = None;
                current.push(c);
            }
            (None, '\'' | '"') => {
                quote = Some(c);
                current.push(c);
            }
            (None, ',') => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}
