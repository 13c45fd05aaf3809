use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{format_f64, IoError, Transform};
use crate::dataset::{Column, FeatureInfo, FeatureKind, Partition, SurrogateDataset};

const MAX_REPORTED_CELLS: usize = 5;

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    /// Surrogate response column.
    pub response: String,
    pub original: Option<String>,
    /// Column of `train` / `test` tags.
    pub tag: Option<String>,
    /// Model features; `None` takes every column without another role.
    pub features: Option<Vec<String>>,
    pub categorical: BTreeSet<String>,
    pub transform: Transform,
    /// Accept files without the response column; the response is then 0.
    pub response_optional: bool,
}

impl Schema {
    pub fn new(response: impl Into<String>) -> Self {
        Self {
            response: response.into(),
            ..Self::default()
        }
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<SurrogateDataset, IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    read_csv(file, schema)
}

/// Parses a headed CSV. Numeric cells that fail to parse are collected and
/// reported together with 1-based data row numbers.
pub fn read_csv(reader: impl Read, schema: &Schema) -> Result<SurrogateDataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::MissingColumn(name.to_owned()))
    };
    let response_col = match position(&schema.response) {
        Ok(c) => Some(c),
        Err(_) if schema.response_optional => None,
        Err(e) => return Err(e),
    };
    let original_col = schema.original.as_deref().map(position).transpose()?;
    let tag_col = schema.tag.as_deref().map(position).transpose()?;
    let feature_names: Vec<String> = match &schema.features {
        Some(list) => list.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                Some(*i) != response_col && Some(*i) != original_col && Some(*i) != tag_col
            })
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let feature_cols = feature_names
        .iter()
        .map(|n| position(n))
        .collect::<Result<Vec<_>, _>>()?;
    for name in &schema.categorical {
        if !feature_names.contains(name) {
            return Err(IoError::MissingColumn(name.clone()));
        }
    }
    let kinds: Vec<FeatureKind> = feature_names
        .iter()
        .map(|n| {
            if schema.categorical.contains(n) {
                FeatureKind::Categorical
            } else {
                FeatureKind::Continuous
            }
        })
        .collect();

    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut text: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
    let mut response = Vec::new();
    let mut original = Vec::new();
    let mut tags = Vec::new();
    let mut bad: Vec<String> = Vec::new();
    let mut bad_count = 0;

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut num = |col: usize, name: &str| -> f64 {
            let cell = record.get(col).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) => v,
                Err(_) => {
                    bad_count += 1;
                    if bad.len() < MAX_REPORTED_CELLS {
                        bad.push(format!("row {row}, column '{name}': '{cell}'"));
                    }
                    f64::NAN
                }
            }
        };
        for (k, &col) in feature_cols.iter().enumerate() {
            match kinds[k] {
                FeatureKind::Continuous => numeric[k].push(num(col, &feature_names[k])),
                FeatureKind::Categorical => {
                    text[k].push(record.get(col).unwrap_or("").to_owned())
                }
            }
        }
        response.push(match response_col {
            Some(col) => num(col, &schema.response),
            None => 0.0,
        });
        if let (Some(col), Some(name)) = (original_col, &schema.original) {
            original.push(num(col, name));
        }
        if let Some(col) = tag_col {
            let cell = record.get(col).unwrap_or("");
            tags.push(match cell.to_ascii_lowercase().as_str() {
                "train" => Partition::Train,
                "test" => Partition::Test,
                _ => {
                    return Err(IoError::BadTag {
                        row,
                        value: cell.to_owned(),
                    })
                }
            });
        }
    }
    if bad_count > 0 {
        return Err(IoError::BadNumbers {
            count: bad_count,
            examples: bad.join("; "),
        });
    }
    if response.is_empty() {
        return Err(IoError::EmptyFile);
    }
    let response = response.into_iter().map(|p| schema.transform.apply(p)).collect();
    let features = feature_names
        .iter()
        .zip(&kinds)
        .map(|(n, k)| FeatureInfo {
            name: n.clone(),
            kind: *k,
        })
        .collect();
    let columns = kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| match kind {
            FeatureKind::Continuous => Column::Continuous(std::mem::take(&mut numeric[k])),
            FeatureKind::Categorical => Column::Categorical(std::mem::take(&mut text[k])),
        })
        .collect();
    let mut dataset = SurrogateDataset::new(features, columns, response)?;
    if original_col.is_some() {
        dataset = dataset.with_original(original)?;
    }
    if tag_col.is_some() {
        dataset = dataset.with_tags(tags)?;
    }
    Ok(dataset)
}

/// Writes features, then the response (and original response and tags when
/// present) under the given column names.
pub fn write_dataset(
    writer: impl Write,
    dataset: &SurrogateDataset,
    response_name: &str,
    original_name: &str,
    tag_name: &str,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.features().iter().map(|f| f.name.as_str()).collect();
    header.push(response_name);
    if dataset.original().is_some() {
        header.push(original_name);
    }
    if dataset.tags().is_some() {
        header.push(tag_name);
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for r in 0..dataset.len() {
        row.clear();
        for f in 0..dataset.features().len() {
            row.push(match dataset.column(f) {
                Column::Continuous(v) => format_f64(v[r]),
                Column::Categorical(v) => v[r].clone(),
            });
        }
        row.push(format_f64(dataset.response()[r]));
        if let Some(o) = dataset.original() {
            row.push(format_f64(o[r]));
        }
        if let Some(t) = dataset.tags() {
            row.push(match t[r] {
                Partition::Train => "train".into(),
                Partition::Test => "test".into(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One prediction per line under a `prediction` header, with the leaf id.
pub fn write_predictions(
    writer: impl Write,
    predictions: &[f64],
    leaves: &[usize],
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "leaf", "prediction"])?;
    for (r, (p, l)) in predictions.iter().zip(leaves).enumerate() {
        w.write_record([r.to_string(), l.to_string(), format_f64(*p)])?;
    }
    w.flush()?;
    Ok(())
}
