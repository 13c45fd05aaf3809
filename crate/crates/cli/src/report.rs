use std::fmt::Write;

use slim_core::diagnostics::{accuracy, fidelity, Accuracy, DiagError};
use slim_core::{SurrogateDataset, Task, Tree};

pub struct Part<'a> {
    pub name: &'a str,
    pub rows: &'a [usize],
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:>12.6}"),
        None => format!("{:>12}", "NA"),
    }
}

/// Fidelity (against the surrogate response) and, when the original
/// response is present, accuracy for each partition.
pub fn fit_table(
    tree: &Tree,
    dataset: &SurrogateDataset,
    parts: &[Part<'_>],
    task: Task,
) -> Result<String, DiagError> {
    let predictions = tree.predict(dataset)?;
    let pick = |v: &[f64], rows: &[usize]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
    let parts: Vec<&Part> = parts.iter().filter(|p| p.rows.len() >= 2).collect();
    let mut out = String::new();
    let _ = writeln!(out, "{:<15}{:<7}{:>12}{:>12}", "", "", "MSE", "R2");
    for (i, part) in parts.iter().enumerate() {
        let f = fidelity(&pick(&predictions, part.rows), &pick(dataset.response(), part.rows))?;
        let label = if i == 0 { "SLIM-Fidelity" } else { "" };
        let _ = writeln!(out, "{label:<15}{:<7}{}{}", part.name, cell(Some(f.mse)), cell(f.r2));
    }
    if let Some(original) = dataset.original() {
        if let Task::Binary { .. } = task {
            let _ = writeln!(out, "{:<15}{:<7}{:>12}{:>12}", "", "", "AUC", "LogLoss");
        }
        for (i, part) in parts.iter().enumerate() {
            let label = if i == 0 { "SLIM-Accuracy" } else { "" };
            let (a, b) = match accuracy(&pick(&predictions, part.rows), &pick(original, part.rows), task)? {
                Accuracy::Continuous { mse, r2 } => (Some(mse), r2),
                Accuracy::Binary { auc, log_loss } => (auc, Some(log_loss)),
            };
            let _ = writeln!(out, "{label:<15}{:<7}{}{}", part.name, cell(a), cell(b));
        }
    }
    Ok(out)
}

fn rule(tree: &Tree, id: usize) -> String {
    let node = &tree.nodes[&id];
    match &node.split {
        None => "leaf".into(),
        Some(s) => {
            let name = &tree.spec.features[s.feature].name;
            match &s.rule {
                slim_core::SplitRule::Threshold { threshold } => format!("{name} <= {threshold:.6}"),
                slim_core::SplitRule::Categories { right, .. } => {
                    format!("{name} not in {{{}}}", right.join(","))
                }
            }
        }
    }
}

/// One line per node: id, depth, size, split rule, dsse and R².
pub fn node_table(tree: &Tree) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5} {:>5} {:>8}  {:<28}{:>14}{:>10}",
        "node", "depth", "size", "split", "dsse", "R2"
    );
    for node in tree.nodes.values() {
        let _ = writeln!(
            out,
            "{:>5} {:>5} {:>8}  {:<28}{:>14.4}{:>10.5}",
            format!("N{}", node.id),
            node.depth,
            node.count,
            rule(tree, node.id),
            node.dsse,
            node.model.r2
        );
    }
    out
}
