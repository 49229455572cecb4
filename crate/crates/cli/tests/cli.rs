use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn reclink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reclink"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Simulated directory with a link config shortened for tests.
fn small_sim(root: &Path) -> std::path::PathBuf {
    let scenario = root.join("scenario.toml");
    std::fs::write(&scenario, "n_a = 120\nn_b = 150\nn_links = 80\n").unwrap();
    let sim = root.join("sim");
    let out = reclink(&["simulate", "--scenario", p(&scenario), "--seed", "3", "--out", p(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = sim.join("link.toml");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("v0 = 75", "v0 = 5")
        .replace("v1 = 25", "v1 = 3")
        .replace("z0 = 100\nz1 = 100", "z0 = 10\nz1 = 10")
        .replace("n_sim = 1000", "n_sim = 100")
        .replace("chains = 1", "chains = 2");
    std::fs::write(&cfg, text).unwrap();
    sim
}

#[test]
fn default_simulation_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reclink(&["simulate", "--seed", "7", "--out", p(&tmp.path().join("sim"))]);
    assert!(out.status.success());
    let lines = |f: &str| std::fs::read_to_string(tmp.path().join("sim").join(f)).unwrap().lines().count();
    assert_eq!(lines("A.csv"), 801);
    assert_eq!(lines("B.csv"), 1001);
    assert_eq!(lines("truth.csv"), 501);
}

#[test]
fn link_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = small_sim(tmp.path());
    let run = tmp.path().join("run");
    let out = reclink(&["link", "--config", p(&sim.join("link.toml")), "--out", p(&run), "--threshold", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let links = std::fs::read_to_string(run.join("links.csv")).unwrap();
    assert!(links.starts_with("row_index_a,row_index_b,probability"));
    for f in ["trace.csv", "posterior_hist.csv", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = reclink(&["evaluate", "--links", p(&run.join("links.csv")), "--truth", p(&sim.join("truth.csv"))]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["TP", "FP", "FN", "FDR", "sensitivity", "F1"] {
        assert!(text.contains(key), "{text}");
    }
}

#[test]
fn fdr_mode_records_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = small_sim(tmp.path());
    let run = tmp.path().join("run");
    let out = reclink(&["link", "--config", p(&sim.join("link.toml")), "--out", p(&run), "--fdr", "0.10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(run.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"threshold\""));
    assert!(manifest.contains("\"estimated_fdr\""));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = small_sim(tmp.path());
    let cfg = sim.join("link.toml");
    let mut dirs = Vec::new();
    for (threads, name) in [("1", "r1"), ("3", "r3"), ("3", "r3b")] {
        let dir = tmp.path().join(name);
        let out = reclink(&["--threads", threads, "link", "--config", p(&cfg), "--out", p(&dir)]);
        assert!(out.status.success());
        dirs.push(dir_bytes(&dir));
    }
    assert_eq!(dirs[0], dirs[1]);
    assert_eq!(dirs[1], dirs[2]);
}

#[test]
fn inputs_are_not_modified() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = small_sim(tmp.path());
    let before = dir_bytes(&sim);
    let out = reclink(&["link", "--config", p(&sim.join("link.toml")), "--out", p(&tmp.path().join("run"))]);
    assert!(out.status.success());
    let out = reclink(&["distort", "--in", p(&sim), "--out", p(&tmp.path().join("d")), "--level", "0.04"]);
    assert!(out.status.success());
    assert_eq!(before, dir_bytes(&sim));
}

#[test]
fn missing_time_column_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("a.csv"), "zip\n1\n2\n").unwrap();
    std::fs::write(tmp.path().join("b.csv"), "zip\n1\n3\n").unwrap();
    let cfg = tmp.path().join("cfg.toml");
    std::fs::write(&cfg, "file_a = \"a.csv\"\nfile_b = \"b.csv\"\n[[piv]]\nname = \"zip\"\nstable = false\n").unwrap();
    let out = reclink(&["link", "--config", p(&cfg), "--out", p(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zip"));
}

#[test]
fn malformed_data_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("links.csv"), "row_index_a,row_index_b\n0,1\nx,2\n").unwrap();
    std::fs::write(tmp.path().join("truth.csv"), "row_index_a,row_index_b\n0,1\n").unwrap();
    let out = reclink(&[
        "evaluate",
        "--links",
        p(&tmp.path().join("links.csv")),
        "--truth",
        p(&tmp.path().join("truth.csv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn distort_raises_level() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert!(reclink(&["simulate", "--seed", "2", "--out", p(&sim)]).status.success());
    let out = reclink(&["distort", "--level", "0.04", "--in", p(&sim), "--out", p(&tmp.path().join("d"))]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let nums: Vec<f64> = text
        .split_whitespace()
        .filter_map(|w| w.parse().ok())
        .collect();
    assert!((nums[1] - nums[0] - 0.04).abs() < 0.01, "{text}");
}

#[test]
fn independence_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let out = reclink(&["independence", "--n-b", "500,1000", "--c", "0:2", "--out", p(tmp.path())]);
    assert!(out.status.success());
    for k in [10, 190] {
        let text = std::fs::read_to_string(tmp.path().join(format!("ratio_k{k}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("c,n_b,ratio"));
    }
}
