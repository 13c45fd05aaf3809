use std::fmt::Write;

use crate::tree::{SplitRule, Tree, TreeNode};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn short(x: f64) -> String {
    let s = format!("{x:.4}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn levels(ls: &[String]) -> String {
    format!("{{{}}}", ls.join(", "))
}

fn edge_labels(tree: &Tree, node: &TreeNode) -> Option<(String, String)> {
    let split = node.split.as_ref()?;
    let name = &tree.spec.features[split.feature].name;
    Some(match &split.rule {
        SplitRule::Threshold { threshold } => (
            format!("{name} ≤ {}", short(*threshold)),
            format!("{name} > {}", short(*threshold)),
        ),
        // unseen levels route left, so the left branch is "not in right"
        SplitRule::Categories { right, .. } => (
            format!("{name} ∉ {}", levels(right)),
            format!("{name} ∈ {}", levels(right)),
        ),
    })
}

/// Graphviz rendering: one box per node with its id, size, split, dsse
/// and R², and one labeled edge per routing branch.
pub fn export_dot(tree: &Tree) -> String {
    let mut out = String::new();
    out.push_str("digraph slim {\n");
    out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
    out.push_str("  edge [fontname=\"Helvetica\"];\n");
    for node in tree.nodes.values() {
        let mut label = format!("N{}\\nsize = {}", node.id, node.count);
        if let Some((left, _)) = edge_labels(tree, node) {
            let _ = write!(label, "\\nsplit: {}", escape(&left));
        }
        let _ = write!(
            label,
            "\\ndsse = {}\\nR2 = {}",
            short(node.dsse),
            short(node.model.r2)
        );
        let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, label);
    }
    for node in tree.nodes.values() {
        if let (Some((l, r)), Some((ll, rl))) = (node.children, edge_labels(tree, node)) {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", node.id, l, escape(&ll));
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", node.id, r, escape(&rl));
        }
    }
    out.push_str("}\n");
    out
}
