use std::process::{Command, Output};

fn bx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bx")).args(args).output().expect("bx runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn gen_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("comb.json");
    let p = path.to_str().unwrap();
    let o = bx(&["gen", "comb:h=2,v=3,k=3,lambda=1,9/10", "--out", p]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("6 agents"));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"format\": \"bx-v1\""));
    let b = bx_core::InstanceBundle::from_json_str(&text).unwrap();
    assert_eq!(b.n, 6);
    assert_eq!(b.to_canonical_string(), text);
    let s = bx(&["solve", p, "greedy"]);
    let v: serde_json::Value = serde_json::from_slice(&s.stdout).unwrap();
    assert_eq!(v["welfare"], "2/1");
    assert_eq!(v["exchange"], serde_json::json!([[1, 2]]));
    assert_eq!(v["ratio"]["ratio"], "27/10");
}

#[test]
fn gen_gbad_agent_count() {
    let o = bx(&["gen", "gbad:q=1"]);
    assert_eq!(o.status.code(), Some(0));
    let b = bx_core::InstanceBundle::from_json_str(&stdout(&o)).unwrap();
    assert_eq!(b.n, 15);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bx(&["gen", "rand:n=0"]).status.code(), Some(1));
    assert_eq!(bx(&["gen", "gbad:q=1..2"]).status.code(), Some(1));
    assert_eq!(bx(&["solve", "gbad:q=1", "nope"]).status.code(), Some(1));
    assert_eq!(bx(&["solve", "missing/file.json", "greedy"]).status.code(), Some(1));
    assert_eq!(bx(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bx(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_gbad_and_empty() {
    let v: serde_json::Value = serde_json::from_slice(&bx(&["solve", "gbad:q=1", "ls:q=1"]).stdout).unwrap();
    assert_eq!(v["welfare"], "6/1");
    assert_eq!(v["ratio"]["ratio"], "5/2");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    let empty = r#"{"format":"bx-v1","k":3,"lambda":["1/1","1/1"],"n":3,"wishes":[[],[],[]]}"#;
    std::fs::write(&path, empty).unwrap();
    let o = bx(&["solve", path.to_str().unwrap(), "greedy"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["exchange"], serde_json::json!([]));
    assert_eq!(v["welfare"], "0/1");
}

#[test]
fn oracle_cap_downgrades_to_warning() {
    let o = bx(&["solve", "gbad:q=2", "ls:q=2", "--oracle-cap", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["ratio"].is_null());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn sweep_gbad_family() {
    let o = bx(&["sweep", "gbad:q=1..4", "ls:q=*"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "instance,mechanism,weight,oracle,ratio,bound,within_bound,ratio_decimal");
    let ratios: Vec<&str> = lines.map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(ratios, ["5/2", "7/3", "9/4", "11/5"]);
}

#[test]
fn sweep_with_impossible_bound_fails() {
    let o = bx(&["sweep", "gbad:q=1", "ls:q=1", "--bound", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains(",false,"));
}

#[test]
fn fuzz_ls_on_random_seeds_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.jsonl");
    let o = bx(&["fuzz", "rand:n=6,p=2/5,seed=0..199", "ls:q=2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
}

#[test]
fn fuzz_flags_disloyal_search() {
    let o = bx(&["fuzz", "gn:k=3,N=2", "lsbad:q=1"]);
    assert_eq!(o.status.code(), Some(2));
    let first: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(first["agent"], 1);
    assert_eq!(first["space"], "nodes");
}

#[test]
fn profile_lambda_values() {
    let v: serde_json::Value = serde_json::from_slice(&bx(&["profile-lambda", "1,1/2"]).stdout).unwrap();
    assert_eq!(v["rho"], "7/4");
    assert_eq!(v["ell_star"], 2);
    assert_eq!(v["tight_predicate"], false);
    let csv = stdout(&bx(&["profile-lambda", "1,9/10", "--format", "csv"]));
    assert!(csv.contains("rho,27/10"));
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = bx(&[
            "sweep",
            "rand:n=7,p=1/2,seed=0..9,lambda=1,9/10",
            "greedy",
            "nu:q=1",
            "io",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
