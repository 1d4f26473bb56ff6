//! Feature CSV loading.
//!
//! Files are comma separated. A header row is detected when the first row
//! has a non-numeric entry outside the label column. The label column is
//! chosen by header name or zero-based index; its values may be arbitrary
//! strings and are mapped to dense ids in order of first appearance.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use activeclust_core::similarity::{canonicalize_labels, Dataset};
use activeclust_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which CSV column holds ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(s.parse().map(LabelColumn::Index).unwrap_or_else(|_| LabelColumn::Name(s.to_string())))
    }
}

/// A parsed feature file with its column names, when the file had a header.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub feature_names: Option<Vec<String>>,
    /// Original label strings, indexed by dense id.
    pub label_names: Option<Vec<String>>,
}

pub fn load_dataset(path: &Path, label: Option<&LabelColumn>) -> Result<LoadedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file, path, label)
}

fn is_numeric(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

pub fn parse_dataset(reader: impl Read, path: &Path, label: Option<&LabelColumn>) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::parse(path, 1, "empty file"));
    };
    let width = first.len();

    let header_by_name = matches!(label, Some(LabelColumn::Name(_)));
    let label_index = |header: Option<&[String]>| -> Result<Option<usize>> {
        match label {
            None => Ok(None),
            Some(LabelColumn::Index(i)) if *i < width => Ok(Some(*i)),
            Some(LabelColumn::Index(i)) => Err(Error::Config(format!("label column {i} but rows have {width} fields"))),
            Some(LabelColumn::Name(name)) => header
                .and_then(|h| h.iter().position(|c| c == name))
                .map(Some)
                .ok_or_else(|| Error::Config(format!("no column named {name:?}"))),
        }
    };
    let provisional = label_index(None).unwrap_or(None);
    let has_header = header_by_name || first.iter().enumerate().any(|(c, v)| Some(c) != provisional && !is_numeric(v));
    let header = has_header.then(|| rows[0].1.clone());
    let label_col = label_index(header.as_deref())?;
    let body = &rows[usize::from(has_header)..];

    let d = width - usize::from(label_col.is_some());
    if d == 0 {
        return Err(Error::Config("no feature columns".into()));
    }
    let mut features = Vec::with_capacity(body.len() * d);
    let mut raw_labels = Vec::new();
    for (line, row) in body {
        if row.len() != width {
            return Err(Error::parse(path, *line, format!("expected {width} fields, found {}", row.len())));
        }
        for (c, v) in row.iter().enumerate() {
            if Some(c) == label_col {
                raw_labels.push(v.clone());
            } else {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::parse(path, *line, format!("non-numeric feature {v:?} in column {c}")))?;
                features.push(x);
            }
        }
    }
    let n = body.len();
    let matrix = Matrix::from_vec(n, d, features)?;
    let (labels, label_names) = if label_col.is_some() {
        let ids = canonicalize_labels(&raw_labels);
        let mut names = vec![String::new(); ids.iter().max().map_or(0, |m| m + 1)];
        for (id, raw) in ids.iter().zip(&raw_labels) {
            names[*id].clone_from(raw);
        }
        (Some(ids), Some(names))
    } else {
        (None, None)
    };
    let feature_names = header
        .map(|h| h.into_iter().enumerate().filter(|(c, _)| Some(*c) != label_col).map(|(_, name)| name).collect());
    Ok(LoadedDataset { dataset: Dataset::new(matrix, labels)?, feature_names, label_names })
}

/// One label per non-empty line, for datasets given as a precomputed
/// similarity matrix.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if raw.is_empty() {
        return Err(Error::parse(path, 1, "empty label file"));
    }
    Ok(canonicalize_labels(&raw))
}
