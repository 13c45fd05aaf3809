use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{format_f64, IoError};
use crate::diagnostics::{EffectCurve, EffectGrid, ImportanceTable, SplitContribution};
use crate::tree::Tree;

fn name(tree: &Tree, feature: usize) -> &str {
    &tree.spec.features[feature].name
}

/// `leaf_id,feature,v`, ordered by leaf then feature.
pub fn write_importance(
    writer: impl Write,
    tree: &Tree,
    table: &ImportanceTable,
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["leaf_id", "feature", "v"])?;
    for (&(leaf, f), &v) in &table.entries {
        w.write_record([leaf.to_string(), name(tree, f).to_owned(), format_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// `node_id,feature,c,p`, ordered by node then feature.
pub fn write_contributions(
    writer: impl Write,
    tree: &Tree,
    contributions: &[SplitContribution],
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node_id", "feature", "c", "p"])?;
    let mut sorted: Vec<&SplitContribution> = contributions.iter().collect();
    sorted.sort_by_key(|s| s.node);
    for s in sorted {
        for (f, (c, p)) in s.c.iter().zip(&s.p).enumerate() {
            w.write_record([
                s.node.to_string(),
                name(tree, f).to_owned(),
                format_f64(*c),
                format_f64(*p),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `leaf_id,feature,grid,effect`, ordered by leaf, feature, then grid.
pub fn write_curves(writer: impl Write, tree: &Tree, curves: &[EffectCurve]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["leaf_id", "feature", "grid", "effect"])?;
    let mut sorted: Vec<&EffectCurve> = curves.iter().collect();
    sorted.sort_by_key(|c| (c.node, c.feature));
    for curve in sorted {
        let labels: Vec<String> = match &curve.grid {
            EffectGrid::Continuous(xs) => xs.iter().map(|x| format_f64(*x)).collect(),
            EffectGrid::Levels(ls) => ls.clone(),
        };
        for (g, v) in labels.into_iter().zip(&curve.values) {
            w.write_record([
                curve.node.to_string(),
                name(tree, curve.feature).to_owned(),
                g,
                format_f64(*v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn create(dir: &Path, file: &str) -> Result<File, IoError> {
    let path = dir.join(file);
    File::create(&path).map_err(|e| IoError::file(path, e))
}

/// Writes `importance.csv`, `contributions.csv` and `curves.csv` into `dir`.
pub fn write_diagnostics(
    dir: &Path,
    tree: &Tree,
    importance: &ImportanceTable,
    contributions: &[SplitContribution],
    curves: &[EffectCurve],
) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    write_importance(create(dir, "importance.csv")?, tree, importance)?;
    write_contributions(create(dir, "contributions.csv")?, tree, contributions)?;
    write_curves(create(dir, "curves.csv")?, tree, curves)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub leaf_id: usize,
    pub feature: String,
    /// Grid value or category level, as written.
    pub grid: String,
    pub effect: f64,
}

pub fn read_curves(reader: impl Read) -> Result<Vec<CurveRow>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |what: &str| IoError::BadNumbers {
            count: 1,
            examples: format!("row {}, column '{what}': '{}'", i + 1, rec.as_slice()),
        };
        out.push(CurveRow {
            leaf_id: field(0).parse().map_err(|_| bad("leaf_id"))?,
            feature: field(1).to_owned(),
            grid: field(2).to_owned(),
            effect: field(3).parse().map_err(|_| bad("effect"))?,
        });
    }
    Ok(out)
}
