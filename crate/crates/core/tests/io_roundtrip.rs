mod common;

use common::{all_rows, uniform_dataset};
use slim_core::basis::{BasisOptions, DesignSpec};
use slim_core::diagnostics::{effect_curves, EffectGrid};
use slim_core::io::{
    export_dot, read_csv, read_curves, read_tree, write_curves, write_dataset, write_tree, IoError,
};
use slim_core::simgen::{simulate, SimKind};
use slim_core::tree::grow;
use slim_core::{GrowConfig, ModelMeta, Schema, Transform, Tree};

fn meta() -> ModelMeta {
    ModelMeta {
        response: "f".into(),
        original: Some("y".into()),
        transform: Transform::Identity,
        binary: false,
        tag: Some("tag".into()),
        seed: 0,
        train_fraction: 2.0 / 3.0,
    }
}

fn fitted(depth: usize) -> (Tree, slim_core::SurrogateDataset) {
    let sim = simulate(SimKind::F2, 1500, 0.3, 17).unwrap();
    let data = sim.dataset();
    let spec = DesignSpec::fit(
        &data,
        &all_rows(data.len()),
        &BasisOptions {
            num_knots: 4,
            ..BasisOptions::default()
        },
    )
    .unwrap();
    let config = GrowConfig {
        max_depth: depth,
        num_bins: 10,
        ..GrowConfig::default()
    };
    (grow(&data, &spec, &config).unwrap(), data)
}

#[test]
fn csv_round_trip_is_exact() {
    let data = simulate(SimKind::F1, 200, 0.5, 3).unwrap().dataset();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &data, "f", "y", "tag").unwrap();
    let schema = Schema {
        original: Some("y".into()),
        tag: Some("tag".into()),
        ..Schema::new("f")
    };
    let back = read_csv(buf.as_slice(), &schema).unwrap();
    assert_eq!(back, data);
}

#[test]
fn saved_models_predict_identically() {
    let (tree, data) = fitted(2);
    let mut buf = Vec::new();
    write_tree(&mut buf, &tree, &meta()).unwrap();
    let (loaded, m) = read_tree(buf.as_slice()).unwrap();
    assert_eq!(m, meta());
    assert_eq!(loaded, tree);
    assert_eq!(loaded.predict(&data).unwrap(), tree.predict(&data).unwrap());
}

#[test]
fn rejects_other_format_versions() {
    let (tree, _) = fitted(0);
    let mut buf = Vec::new();
    write_tree(&mut buf, &tree, &meta()).unwrap();
    let text = String::from_utf8(buf).unwrap().replacen("\"version\": 1", "\"version\": 9", 1);
    assert!(matches!(read_tree(text.as_bytes()), Err(IoError::Version { .. })));
}

#[test]
fn rejects_broken_structure() {
    let (tree, _) = fitted(1);
    let mut buf = Vec::new();
    write_tree(&mut buf, &tree, &meta()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    let nodes = doc["nodes"].as_array_mut().unwrap();
    nodes.truncate(2);
    let err = read_tree(serde_json::to_vec(&doc).unwrap().as_slice()).unwrap_err();
    assert!(err.to_string().contains("missing"), "{err}");

    let mut doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    doc["spec"]["width"] = serde_json::json!(3);
    assert!(matches!(
        read_tree(serde_json::to_vec(&doc).unwrap().as_slice()),
        Err(IoError::SchemaDrift(_))
    ));
}

#[test]
fn dot_output_parses() {
    let (tree, _) = fitted(2);
    let text = export_dot(&tree);
    let ast = dot_parser::ast::Graph::try_from(text.as_str()).expect("valid DOT");
    let graph = dot_parser::canonical::Graph::from(ast);
    assert_eq!(graph.nodes.set.len(), tree.len());
    assert_eq!(graph.edges.set.len(), 2 * tree.internal().count());
    for node in tree.nodes.values() {
        assert!(graph.nodes.set.contains_key(&format!("n{}", node.id)));
    }
    for node in tree.internal() {
        let (l, r) = node.children.unwrap();
        for child in [l, r] {
            assert!(graph
                .edges
                .set
                .iter()
                .any(|e| e.from == format!("n{}", node.id) && e.to == format!("n{child}")));
        }
    }
}

#[test]
fn curves_round_trip() {
    let data = uniform_dataset(600, 2, 4, |x| x[0].exp() - x[1]);
    let spec = DesignSpec::fit(&data, &all_rows(600), &BasisOptions::default()).unwrap();
    let tree = grow(
        &data,
        &spec,
        &GrowConfig {
            max_depth: 0,
            ..GrowConfig::default()
        },
    )
    .unwrap();
    let curves = effect_curves(&tree, 25).unwrap();
    let mut buf = Vec::new();
    write_curves(&mut buf, &tree, &curves).unwrap();
    let rows = read_curves(buf.as_slice()).unwrap();
    assert_eq!(rows.len(), 50);
    let mut i = 0;
    for curve in &curves {
        let EffectGrid::Continuous(grid) = &curve.grid else {
            panic!("continuous features only");
        };
        for (g, v) in grid.iter().zip(&curve.values) {
            let row = &rows[i];
            assert_eq!(row.leaf_id, curve.node);
            assert_eq!(row.feature, tree.spec.features[curve.feature].name);
            assert_eq!(row.grid.parse::<f64>().unwrap(), *g);
            assert_eq!(row.effect, *v);
            i += 1;
        }
    }
}

#[test]
fn root_effect_of_a_linear_term_is_linear() {
    let data = uniform_dataset(3000, 2, 9, |x| 3.0 * x[0] + (2.0 * x[1]).cos());
    let spec = DesignSpec::fit(&data, &all_rows(3000), &BasisOptions::default()).unwrap();
    let tree = grow(
        &data,
        &spec,
        &GrowConfig {
            max_depth: 0,
            ..GrowConfig::default()
        },
    )
    .unwrap();
    let curves = effect_curves(&tree, 41).unwrap();
    let EffectGrid::Continuous(grid) = &curves[0].grid else {
        unreachable!()
    };
    // compare to 3x up to a constant
    let diffs: Vec<f64> = grid.iter().zip(&curves[0].values).map(|(x, h)| h - 3.0 * x).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let worst = diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "max deviation {worst}");
}
