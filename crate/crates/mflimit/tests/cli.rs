use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mflimit::idx::{encode_images, encode_labels, IdxImages};

const SMALL: &str = "\
n_grid = 20,40
replicas = 4
lln_replicas = 4
particles = 200
quadrature_nodes = 64
dt = 0.01
record_every = 10
martingale_grid = 20,40
martingale_nodes = 16
martingale_replicas = 3
";

fn mflimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflimit")).args(args).output().expect("binary runs")
}

fn run(cmd: &str, config: &Path, out: &Path) -> Output {
    mflimit(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{SMALL}{extra}")).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Every CSV below `dir`, relative path to bytes.
fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn zero_alpha_leaves_output_weights_in_place() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "alpha = 0\n");
    let o = run("train", &cfg, tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for n in [20, 40] {
        for r in 0..4 {
            let d = tmp.path().join(format!("train/n{n}/r{r:03}"));
            assert_eq!(fs::read(d.join("hist_c_initial.csv")).unwrap(), fs::read(d.join("hist_c_final.csv")).unwrap());
            assert_eq!(fs::read(d.join("snapshot_00.csv")).unwrap(), fs::read(d.join("snapshot_05.csv")).unwrap());
        }
    }
}

#[test]
fn tables_do_not_depend_on_worker_count_or_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let one = write_config(tmp.path(), "one.cfg", "workers = 1\n");
    let three = write_config(tmp.path(), "three.cfg", "workers = 3\n");
    let mut seen = Vec::new();
    for (cfg, out) in [(&one, "w1"), (&three, "w3"), (&one, "w1b")] {
        let out = tmp.path().join(out);
        for cmd in ["train", "meanfield"] {
            let o = run(cmd, cfg, &out);
            assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        }
        seen.push(csv_files(&out));
    }
    assert!(seen[0].len() > 50);
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
}

#[test]
fn verify_writes_a_report_and_exit_code_matches_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "");
    for cmd in ["train", "meanfield"] {
        assert!(run(cmd, &cfg, tmp.path()).status.success());
    }
    let o = run("verify", &cfg, tmp.path());
    let report = fs::read_to_string(tmp.path().join("verify/report.txt")).unwrap();
    assert_eq!(report, String::from_utf8_lossy(&o.stdout));
    assert_eq!(report.lines().count(), 6);
    let code = if report.lines().all(|l| l.starts_with("PASS")) { 0 } else { 4 };
    assert_eq!(o.status.code(), Some(code));
    let meta = fs::read_to_string(tmp.path().join("verify/lln.csv.meta")).unwrap();
    assert!(meta.contains("config_hash="));
    let header = fs::read_to_string(tmp.path().join("verify/lln.csv")).unwrap();
    assert!(header.starts_with("function,n,mean,mean_se,mean_lo,mean_hi,std,"));
}

#[test]
fn verify_refuses_artifacts_from_another_config() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.cfg", "");
    let b = write_config(tmp.path(), "b.cfg", "noise = 0.2\n");
    assert!(run("train", &a, tmp.path()).status.success());
    assert!(run("meanfield", &b, tmp.path()).status.success());
    let o = run("verify", &a, tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("refusing to mix"), "{}", stderr(&o));
}

#[test]
fn damaged_and_missing_artifacts_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "");

    let o = run("verify", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("mflimit train"), "{}", stderr(&o));

    assert!(run("train", &cfg, tmp.path()).status.success());
    let o = run("verify", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("mflimit meanfield"), "{}", stderr(&o));

    assert!(run("meanfield", &cfg, tmp.path()).status.success());
    let snap = tmp.path().join("train/n40/r002/snapshot_03.csv");
    let mut bytes = fs::read(&snap).unwrap();
    let i = bytes.iter().position(|&b| b.is_ascii_digit() && b != b'9').unwrap();
    bytes[i] += 1;
    fs::write(&snap, bytes).unwrap();
    let o = run("verify", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
    assert!(stderr(&o).contains("snapshot_03.csv"), "{}", stderr(&o));
}

#[test]
fn divergence_keeps_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "alpha = 1e6\ninit_w = gaussian:5\n");
    let o = run("train", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let marker = fs::read_to_string(tmp.path().join("train/DIVERGED")).unwrap();
    assert!(marker.contains("step="), "{marker}");
    assert!(tmp.path().join("train/runs.csv").exists());
    assert!(tmp.path().join("train/manifest.txt").exists());
    assert!(tmp.path().join("train/n20/r000/snapshot_00.csv").exists());
}

#[test]
fn picard_non_convergence_reports_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "solver = picard\npicard_tol = 1e-14\npicard_max_iters = 2\n");
    let o = run("meanfield", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("picard distances"), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("meanfield/picard.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "learning_rate = 3\n");
    let o = run("train", &cfg, tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
    assert!(!tmp.path().join("train").exists());

    let o = run("mnist-hist", &write_config(tmp.path(), "b.cfg", ""), tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_hash_and_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.cfg", "");
    let c = cfg.to_str().unwrap();
    for (seed, out) in [("5", "s5"), ("6", "s6")] {
        let o = mflimit(&["train", "--config", c, "--seed", seed, "--out", tmp.path().join(out).to_str().unwrap(), "--quiet"]);
        assert!(o.status.success());
    }
    let m5 = fs::read_to_string(tmp.path().join("s5/train/manifest.txt")).unwrap();
    let m6 = fs::read_to_string(tmp.path().join("s6/train/manifest.txt")).unwrap();
    assert!(m5.contains("seed=5\n") && m6.contains("seed=6\n"));
    assert_ne!(m5.lines().nth(1), m6.lines().nth(1));
    assert_ne!(csv_files(&tmp.path().join("s5")), csv_files(&tmp.path().join("s6")));
}

fn tiny_mnist(dir: &Path) -> PathBuf {
    // Two 4x4 "digits": a vertical bar labelled 1 and a ring labelled 0.
    let bar = [0, 255, 255, 0, 0, 255, 255, 0, 0, 255, 255, 0, 0, 255, 255, 0];
    let ring = [255, 255, 255, 255, 255, 0, 0, 255, 255, 0, 0, 255, 255, 255, 255, 255];
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for k in 0..20u8 {
        let img = if k % 2 == 0 { &ring } else { &bar };
        pixels.extend(img.iter().map(|&p: &u8| p.saturating_sub(k)));
        labels.push(k % 2);
    }
    fs::write(dir.join("img"), encode_images(&IdxImages { count: 20, rows: 4, cols: 4, pixels })).unwrap();
    fs::write(dir.join("lab"), encode_labels(&labels)).unwrap();
    let cfg = dir.join("mnist.cfg");
    fs::write(&cfg, "model = mnist\nmnist_images = img\nmnist_labels = lab\ndigits = 0,1\nn_grid = 1,10,100\nbins = 8\n").unwrap();
    cfg
}

#[test]
fn mnist_histograms_are_valid_for_a_single_neuron_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_mnist(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = run("mnist-hist", &cfg, out);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("criterion  9"));
    }
    assert_eq!(csv_files(&a), csv_files(&b));

    let one = fs::read_to_string(a.join("mnist/hist_c_n1.csv")).unwrap();
    let rows: Vec<&str> = one.lines().collect();
    assert_eq!(rows[0], "edge_lo,edge_hi,count");
    assert_eq!(rows.len(), 2, "{one}");
    let cells: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!(cells[0] < cells[1] && cells[2] == 1.0);

    for n in [10, 100] {
        let t = fs::read_to_string(a.join(format!("mnist/hist_c_n{n}.csv"))).unwrap();
        let total: f64 = t.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
        assert_eq!(total, n as f64);
    }
    let w1 = fs::read_to_string(a.join("mnist/w1.csv")).unwrap();
    assert_eq!(w1.lines().count(), 3);
}
