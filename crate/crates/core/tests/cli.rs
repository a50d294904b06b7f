//! Command-line contract: exit codes and artifacts.

use distorted_nls::cli::main_with_args;
use std::fs;

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["dnls"];
    v.extend_from_slice(args);
    main_with_args(v)
}

#[test]
fn scatter_writes_table_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    assert_eq!(run(&["scatter", "--quiet", "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("scattering.csv")).unwrap();
    assert!(csv.starts_with("k,re_T,im_T,re_Rp,im_Rp,re_Rm,im_Rm,unitarity_defect"));
    let max_defect = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(max_defect < 1e-6);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn zero_data_solve_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.cfg");
    fs::write(&cfg, "evolution.eta = 0\nevolution.t_end = 2\n").unwrap();
    let out = dir.path().join("z");
    assert_eq!(
        run(&["solve", "-q", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    let snaps = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    for line in snaps.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!((v[2], v[3]), (0.0, 0.0));
    }
}

#[test]
fn error_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let out = out.to_str().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "grid.n_x = many\n").unwrap();
    assert_eq!(run(&["scatter", "-q", "--config", bad.to_str().unwrap(), "--out", out]), 2);
    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["scatter", "-q", "--config", missing.to_str().unwrap(), "--out", out]), 2);
    let sampled = dir.path().join("sampled.cfg");
    let vfile = dir.path().join("v.csv");
    fs::write(&vfile, "x,v\n-1,0\n0,-1\n1,0\n").unwrap();
    fs::write(&sampled, format!("potential.kind = sampled\npotential.file = {}\n", vfile.display())).unwrap();
    assert_eq!(run(&["scatter", "-q", "--config", sampled.to_str().unwrap(), "--out", out]), 3);
    assert_eq!(run(&["no-such-command"]), 2);
}

#[test]
fn delta_limit_table_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    assert_eq!(run(&["delta-limit", "-q", "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("delta_limit.csv")).unwrap();
    let col: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(col.len(), 4);
    assert!(col.windows(2).all(|w| w[1] < w[0]));
}
