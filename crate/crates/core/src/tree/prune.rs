use std::collections::BTreeMap;

use super::Tree;

/// Collapses every internal node whose model already fits well
/// (`r2 >= r2_threshold`) or whose split gains little
/// (`dsse < dsse_fraction · root loss`). Collapsing never changes an
/// ancestor's statistics, so a single top-down sweep reaches the fixed
/// point. Surviving nodes keep their ids.
pub fn prune(tree: &Tree, r2_threshold: f64, dsse_fraction: f64) -> Tree {
    let floor = dsse_fraction * tree.root().loss;
    let mut kept = BTreeMap::new();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        let mut node = tree.nodes[&id].clone();
        if let Some((l, r)) = node.children {
            if node.model.r2 >= r2_threshold || node.dsse < floor {
                node.split = None;
                node.children = None;
                node.dsse = 0.0;
            } else {
                stack.push(r);
                stack.push(l);
            }
        }
        kept.insert(id, node);
    }
    Tree {
        spec: tree.spec.clone(),
        config: tree.config.clone(),
        nodes: kept,
    }
}
