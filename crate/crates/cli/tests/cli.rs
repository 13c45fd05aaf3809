use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn slim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &TempDir, kind: &str, n: usize, seed: u64) -> String {
    let out = path(dir, &format!("{kind}_{n}_{seed}.csv"));
    let o = slim(&[
        "simulate", "--kind", kind, "--n", &n.to_string(), "--sigma", "0.1", "--seed",
        &seed.to_string(), "--out", &out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

/// A small, fast fit: few knots, coarse bins.
fn fit(dir: &TempDir, data: &str, extra: &[&str]) -> (String, Output) {
    let model = path(dir, "model.json");
    let mut args = vec![
        "fit", "--data", data, "--out", &model, "--original", "y", "--tag", "tag", "--knots",
        "5", "--num-bins", "12",
    ];
    args.extend_from_slice(extra);
    let o = slim(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    (model, o)
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(simulate(&dir, "f2", 200, 9)).unwrap();
    let o = slim(&["simulate", "--kind", "f2", "--n", "200", "--sigma", "0.1", "--seed", "9"]);
    assert!(o.status.success());
    assert_eq!(a, o.stdout);
    let header = stdout(&o).lines().next().unwrap().to_owned();
    assert_eq!(header, "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,f,y,tag");
}

#[test]
fn negative_sigma_is_an_argument_error() {
    let o = slim(&["simulate", "--kind", "f1", "--n", "10", "--sigma", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma"));
}

#[test]
fn unknown_kind_is_an_argument_error() {
    let o = slim(&["simulate", "--kind", "f3", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_response_is_named() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 50, 1);
    let o = slim(&["fit", "--data", &data, "--out", &path(&dir, "m.json"), "--response", "target"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("'target'"), "{}", stderr(&o));
}

#[test]
fn bad_setting_is_an_argument_error() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 50, 1);
    let o = slim(&["fit", "--data", &data, "--out", &path(&dir, "m.json"), "--loss", "huber"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("loss"));
}

#[test]
fn config_file_with_overrides() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 300, 2);
    let cfg = path(&dir, "run.cfg");
    std::fs::write(&cfg, "# small\ntag = tag\noriginal = y\nmax_depth = 4\nknots = 4\nnum_bins = 8\nprune = false\n").unwrap();
    let model = path(&dir, "m.json");
    let o = slim(&["fit", "--data", &data, "--out", &model, "--config", &cfg, "--max-depth", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("final: 1 nodes"), "{}", stdout(&o));
}

#[test]
fn depth_zero_is_a_single_leaf() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f2", 400, 3);
    let (_, o) = fit(&dir, &data, &["--max-depth", "0"]);
    let text = stdout(&o);
    assert!(text.contains("grown: 1 nodes, depth 0"), "{text}");
    assert!(text.contains("SLIM-Fidelity"));
    assert!(text.contains("SLIM-Accuracy"));
}

#[test]
fn additive_surface_prunes_to_the_root() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 1500, 4);
    let (_, o) = fit(&dir, &data, &["--max-depth", "2"]);
    assert!(stdout(&o).contains("final: 1 nodes"), "{}", stdout(&o));
}

#[test]
fn predict_matches_evaluate() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f2", 900, 5);
    let (model, _) = fit(&dir, &data, &["--max-depth", "2", "--prune", "false"]);
    let preds = path(&dir, "pred.csv");
    let o = slim(&["predict", "--model", &model, "--data", &data, "--out", &preds]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,leaf,prediction"));
    let predicted: Vec<f64> = lines
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(predicted.len(), 900);

    // Fidelity MSE over the test rows, recomputed from the prediction file.
    let csv = std::fs::read_to_string(&data).unwrap();
    let (mut sse, mut n) = (0.0, 0usize);
    for (line, p) in csv.lines().skip(1).zip(&predicted) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells[12] == "test" {
            let f: f64 = cells[10].parse().unwrap();
            sse += (f - p).powi(2);
            n += 1;
        }
    }
    let mse = sse / n as f64;

    let o = slim(&["evaluate", "--model", &model, "--data", &data]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    let test_line = report
        .lines()
        .find(|l| l.trim_start().starts_with("Test"))
        .expect("fidelity test row");
    let reported: f64 = test_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((reported - mse).abs() <= 1e-6 * (1.0 + mse), "{reported} vs {mse}");
}

#[test]
fn predict_without_response_columns() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 300, 6);
    let (model, _) = fit(&dir, &data, &["--max-depth", "1"]);
    let features_only = path(&dir, "x.csv");
    let csv = std::fs::read_to_string(&data).unwrap();
    let stripped: String = csv
        .lines()
        .map(|l| l.split(',').take(10).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(&features_only, stripped).unwrap();
    let o = slim(&["predict", "--model", &model, "--data", &features_only]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 301);
}

#[test]
fn diagnose_root_only_tree() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f1", 300, 7);
    let (model, _) = fit(&dir, &data, &["--max-depth", "0"]);
    let out = dir.path().join("diag");
    let o = slim(&[
        "diagnose", "--model", &model, "--data", &data, "--out-dir",
        out.to_str().unwrap(), "--grid-points", "11",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |name: &str| std::fs::read_to_string(out.join(name)).unwrap();
    assert_eq!(read("contributions.csv").lines().count(), 1);
    assert_eq!(read("importance.csv").lines().count(), 11);
    assert_eq!(read("curves.csv").lines().count(), 1 + 10 * 11);
}

#[test]
fn dot_export_labels_nodes_and_edges() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f2", 900, 8);
    let (model, _) = fit(&dir, &data, &["--max-depth", "1", "--prune", "false"]);
    let dot = path(&dir, "tree.dot");
    let o = slim(&["export", "--model", &model, "--format", "dot", "--out", &dot]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(Path::new(&dot)).unwrap();
    assert!(text.starts_with("digraph slim {"));
    assert!(text.contains("N0\\nsize = 600"), "{text}");
    assert!(text.contains("n0 -> n1"));
    assert!(text.contains("≤"));
    assert!(text.contains("R2 = "));
}

#[test]
fn thread_count_does_not_change_the_model() {
    let dir = TempDir::new().unwrap();
    let data = simulate(&dir, "f2", 600, 10);
    let (model, _) = fit(&dir, &data, &["--max-depth", "2", "--threads", "1"]);
    let one = std::fs::read(&model).unwrap();
    let (model, _) = fit(&dir, &data, &["--max-depth", "2", "--threads", "3"]);
    assert_eq!(one, std::fs::read(&model).unwrap());
}
