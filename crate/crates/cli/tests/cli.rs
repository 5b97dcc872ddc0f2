use std::path::PathBuf;
use std::process::{Command, Output};

fn meshmsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshmsf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_file(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("meshmsf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json report")
}

#[test]
fn gen_tree_has_n_minus_one_edges() {
    let o = meshmsf(&["gen", "tree", "--vertices", "8", "--seed", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("8 7"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn gen_is_reproducible() {
    let args = ["gen", "random-gnm", "--vertices", "50", "--edges", "90", "--seed", "9"];
    let (a, b) = (meshmsf(&args), meshmsf(&args));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, meshmsf(&["gen", "random-gnm", "--vertices", "50", "--edges", "90", "--seed", "10"]).stdout);
}

#[test]
fn gen_grid_and_union() {
    let o = meshmsf(&["gen", "grid", "--vertices", "100"]);
    assert_eq!(stdout(&o).lines().next(), Some("100 180"));
    let o = meshmsf(&["gen", "disjoint-union", "--vertices", "10", "--edges", "12", "--parts", "3"]);
    assert_eq!(stdout(&o).lines().next(), Some("30 36"));
}

#[test]
fn run_triangle() {
    let g = temp_file("triangle.txt", "3 3\n0 1 1\n1 2 2\n0 2 3\n");
    let o = meshmsf(&["run", "--graph", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["msf_weight"], 3);
    assert_eq!(r["components"], 1);
    assert_eq!(r["version"], 1);
    assert!(r["steps_total"].as_u64().unwrap() > 0);
}

#[test]
fn run_generated_graph_without_verification() {
    let text = stdout(&meshmsf(&["gen", "random-gnm", "--vertices", "200", "--edges", "300", "--seed", "1"]));
    let g = temp_file("gnm.txt", &text);
    let o = meshmsf(&["run", "--graph", g.to_str().unwrap(), "--verify", "off", "--rounds", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["verdict"], "skipped");
}

#[test]
fn run_edgeless_graph() {
    let g = temp_file("empty.txt", "16 0\n");
    let o = meshmsf(&["run", "--graph", g.to_str().unwrap()]);
    let r = report(&o);
    assert_eq!((r["components"].as_u64(), r["msf_weight"].as_u64()), (Some(16), Some(0)));
}

#[test]
fn usage_errors_exit_with_two() {
    let bad = temp_file("bad.txt", "3 1\n0 7 1\n");
    assert_eq!(meshmsf(&["run", "--graph", bad.to_str().unwrap()]).status.code(), Some(2));
    let garbled = temp_file("garbled.txt", "3 x\n");
    let o = meshmsf(&["run", "--graph", garbled.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert_eq!(meshmsf(&["run", "--graph", "/nonexistent/graph.txt"]).status.code(), Some(2));
    let ok = temp_file("ok.txt", "2 1\n0 1 1\n");
    assert_eq!(meshmsf(&["run", "--graph", ok.to_str().unwrap(), "--side", "1"]).status.code(), Some(2));
    assert_eq!(meshmsf(&["run", "--graph", ok.to_str().unwrap(), "--rounds", "0"]).status.code(), Some(2));
    assert_eq!(meshmsf(&["bench", "--bench-sides", "12"]).status.code(), Some(2));
    assert_eq!(meshmsf(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bench_single_side_csv() {
    let o = meshmsf(&["bench", "--bench-sides", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "side,n,trial,total_steps,phases");
    assert!(lines[1].starts_with("8,64,0,"));
    assert!(lines[2].starts_with("# loglog_slope="));
}

#[test]
fn bench_json_and_primitives() {
    let o = meshmsf(&["bench", "--bench-sides", "8,16", "--format", "json"]);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert_eq!(r["ratios"].as_array().unwrap().len(), 1);
    let o = meshmsf(&["bench", "--bench-sides", "8", "--primitives"]);
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "mesh_sort,8,80"));
}
