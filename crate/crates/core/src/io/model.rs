use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IoError, Transform};
use crate::basis::{BasisKind, DesignSpec};
use crate::dataset::FeatureKind;
use crate::tree::{GrowConfig, Tree, TreeError, TreeNode};

pub const FORMAT_NAME: &str = "slim-tree";
pub const FORMAT_VERSION: u32 = 1;

/// How the training data was declared, kept so that predictions can be
/// produced from the saved model alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub response: String,
    #[serde(default)]
    pub original: Option<String>,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default)]
    pub binary: bool,
    /// Tag column that defined the training rows, if any.
    #[serde(default)]
    pub tag: Option<String>,
    /// Seeded split used when there is no tag column.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    2.0 / 3.0
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    meta: ModelMeta,
    spec: DesignSpec,
    config: GrowConfig,
    nodes: Vec<TreeNode>,
}

pub fn write_tree(writer: impl Write, tree: &Tree, meta: &ModelMeta) -> Result<(), IoError> {
    let doc = Document {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        meta: meta.clone(),
        spec: tree.spec.clone(),
        config: tree.config.clone(),
        nodes: tree.nodes.values().cloned().collect(),
    };
    let mut w = BufWriter::new(writer);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn save_tree(path: &Path, tree: &Tree, meta: &ModelMeta) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::file(path, e))?;
    write_tree(file, tree, meta)
}

fn check_spec(spec: &DesignSpec) -> Result<(), IoError> {
    let drift = |m: String| Err(IoError::SchemaDrift(m));
    let mut next = 1;
    for block in &spec.blocks {
        let Some(info) = spec.features.get(block.feature) else {
            return drift(format!("block refers to unknown feature {}", block.feature));
        };
        let expected = match block.kind {
            BasisKind::OneHot { .. } => FeatureKind::Categorical,
            _ => FeatureKind::Continuous,
        };
        if info.kind != expected {
            return drift(format!("feature '{}' has a block of the wrong kind", info.name));
        }
        if let BasisKind::OneHot { levels } = &block.kind {
            if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
                return drift(format!("levels of '{}' are not sorted and unique", info.name));
            }
        }
        if let BasisKind::Spline { knots } = &block.kind {
            let k = knots.knots();
            if k.len() < 2 || k.windows(2).any(|w| !(w[0] < w[1])) {
                return drift(format!("knots of '{}' are not strictly increasing", info.name));
            }
        }
        if block.columns.start != next || block.columns.len() != block.kind.width() {
            return drift(format!("columns of '{}' do not tile the design", info.name));
        }
        next = block.columns.end;
    }
    if next != spec.width {
        return drift(format!("blocks cover {next} columns, width is {}", spec.width));
    }
    Ok(())
}

/// Parses and validates a saved model.
pub fn read_tree(reader: impl Read) -> Result<(Tree, ModelMeta), IoError> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(reader))?;
    let format = value.get("format").and_then(|v| v.as_str()).unwrap_or("");
    let version = value.get("version").and_then(|v| v.as_u64());
    if format != FORMAT_NAME || version != Some(FORMAT_VERSION as u64) {
        return Err(IoError::Version {
            found: format!("{format} v{}", version.map_or("?".into(), |v| v.to_string())),
            expected: format!("{FORMAT_NAME} v{FORMAT_VERSION}"),
        });
    }
    let doc: Document = serde_json::from_value(value)?;
    check_spec(&doc.spec)?;
    let mut nodes = std::collections::BTreeMap::new();
    for node in doc.nodes {
        let id = node.id;
        if nodes.insert(id, node).is_some() {
            return Err(TreeError::Malformed(format!("duplicate node id {id}")).into());
        }
    }
    let tree = Tree {
        spec: doc.spec,
        config: doc.config,
        nodes,
    };
    tree.validate()?;
    Ok((tree, doc.meta))
}

pub fn load_tree(path: &Path) -> Result<(Tree, ModelMeta), IoError> {
    let file = File::open(path).map_err(|e| IoError::file(path, e))?;
    read_tree(file)
}
