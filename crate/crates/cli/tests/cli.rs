//! End-to-end checks of the command-line surface: exit codes, file
//! formats, manifest re-use, and bitwise reproducibility under epoch
//! budgets.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_horizonlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn horizonlab")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn simulate_is_reproducible_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = run(&[
            "simulate",
            "--system",
            "lorenz",
            "--dt",
            "0.04",
            "--steps",
            "200",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_ok(&res);
    }
    assert_eq!(
        read(&out_a.join("trajectory.csv")),
        read(&out_b.join("trajectory.csv"))
    );
    let meta: serde_json::Value =
        serde_json::from_str(&read(&out_a.join("trajectory.meta.json"))).unwrap();
    assert_eq!(meta["system"], "lorenz");
    assert_eq!(meta["dt"], 0.04);
    assert_eq!(meta["seed"], 1);
}

#[test]
fn simulate_external_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "simulate",
        "--system",
        "external",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn simulate_divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // the verbatim limit-cycle cubic escapes: divergence, exit 3
    let res = run(&[
        "simulate",
        "--system",
        "limit_cycle",
        "--steps",
        "500",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn food_web_stays_positive_and_finite() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "simulate",
        "--system",
        "food_web",
        "--dt",
        "2.0",
        "--steps",
        "2000",
        "--seed",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&res);
    let csv = read(&dir.path().join("trajectory.csv"));
    for (i, line) in csv.lines().skip(1).enumerate() {
        for field in line.split(',').skip(1) {
            let v: f64 = field.parse().unwrap();
            assert!(v.is_finite(), "row {i}: non-finite");
            assert!(v >= 0.0, "row {i}: negative abundance {v}");
        }
    }
}

#[test]
fn ingest_round_trips_simulate_output() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_ok(&run(&[
        "simulate",
        "--system",
        "lorenz",
        "--steps",
        "100",
        "--seed",
        "2",
        "--out",
        sim.to_str().unwrap(),
    ]));
    let ing = dir.path().join("ing");
    assert_ok(&run(&[
        "ingest",
        "--input",
        sim.join("trajectory.csv").to_str().unwrap(),
        "--out",
        ing.to_str().unwrap(),
    ]));
    assert_eq!(
        read(&sim.join("trajectory.csv")),
        read(&ing.join("trajectory.csv"))
    );
}

#[test]
fn ingest_rejects_nan_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x0\n0.0,1.0\n1.0,NaN\n2.0,2.0\n").unwrap();
    let res = run(&[
        "ingest",
        "--input",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("row 2"), "error should name the row: {err}");
}

#[test]
fn ingest_normalize_zero_means() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_ok(&run(&[
        "simulate",
        "--system",
        "lorenz",
        "--steps",
        "150",
        "--seed",
        "4",
        "--out",
        sim.to_str().unwrap(),
    ]));
    let ing = dir.path().join("ing");
    assert_ok(&run(&[
        "ingest",
        "--input",
        sim.join("trajectory.csv").to_str().unwrap(),
        "--normalize",
        "--out",
        ing.to_str().unwrap(),
    ]));
    let csv = read(&ing.join("trajectory.csv"));
    let mut sums = vec![0.0f64; 3];
    let mut n = 0usize;
    for line in csv.lines().skip(1) {
        for (j, field) in line.split(',').skip(1).enumerate() {
            sums[j] += field.parse::<f64>().unwrap();
        }
        n += 1;
    }
    for s in sums {
        assert!((s / n as f64).abs() < 1e-12);
    }
}

fn train_config(dir: &Path, seed: u64) -> String {
    let cfg = serde_json::json!({
        "data": {"system": "limit_cycle", "hopf_normal_form": true, "samples": 250, "seed": 7},
        "model": {"input_dim": 0, "width_factor": 4, "n_blocks": 1, "residual": true,
                  "activation": {"softplus": {"beta": 8.0}}, "seed": seed},
        "train": {"eta": 2e-3, "batch_size": 64, "budget": {"epochs": 12}, "seed": seed},
        "horizon": 2,
        "out_dir": dir.to_str().unwrap(),
    });
    serde_json::to_string_pretty(&cfg).unwrap()
}

#[test]
fn train_epoch_budget_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, train_config(out, 7)).unwrap();
        assert_ok(&run(&["train", "--config", cfg_path.to_str().unwrap()]));
    }
    assert_eq!(read(&out_a.join("curves.csv")), read(&out_b.join("curves.csv")));
    assert_eq!(
        std::fs::read(out_a.join("model.bin")).unwrap(),
        std::fs::read(out_b.join("model.bin")).unwrap()
    );
}

#[test]
fn train_manifest_re_runs_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, train_config(&out_a, 9)).unwrap();
    assert_ok(&run(&["train", "--config", cfg_path.to_str().unwrap()]));
    let curves_first = read(&out_a.join("curves.csv"));
    // manifest echoes the config; feed it back (it overwrites the same out dir)
    let manifest_path = out_a.join("manifest.json");
    assert_ok(&run(&["train", "--config", manifest_path.to_str().unwrap()]));
    assert_eq!(curves_first, read(&out_a.join("curves.csv")));
}

#[test]
fn config_schema_violation_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&train_config(dir.path(), 1)).unwrap();
    cfg["trian"] = cfg["train"].clone(); // typo'd key
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let res = run(&["train", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("trian"), "error should name the bad key: {err}");
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = serde_json::json!({
        "data": {"system": "limit_cycle", "hopf_normal_form": true, "samples": 200, "seed": 5},
        "model": {"input_dim": 0, "width_factor": 3, "n_blocks": 1, "residual": true,
                  "activation": "relu", "seed": 1},
        "train": {"eta": 1e-3, "batch_size": 64, "budget": {"epochs": 4}, "seed": 2},
        "grid": {"horizons": [1, 2], "etas": [1e-3, 1e-2], "sigmas": [0.0], "sizes": [[3, 1]]},
        "out_dir": out.to_str().unwrap(),
    });
    let cfg_path = dir.path().join("sweep.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_ok(&run(&["sweep", "--config", cfg_path.to_str().unwrap()]));
    let csv = read(&out.join("sweep.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "system,T,eta,sigma,width_factor,n_blocks,seed,best_val_loss,stop_reason,steps,wall_seconds"
    );
    assert_eq!(lines.len(), 5, "header + 4 cells");
}

#[test]
fn probe_grad_ratio_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("probe");
    let cfg = serde_json::json!({
        "data": {"system": "limit_cycle", "hopf_normal_form": true, "samples": 220, "seed": 6},
        "model": {"input_dim": 0, "width_factor": 4, "n_blocks": 1, "residual": true,
                  "activation": {"softplus": {"beta": 8.0}}, "seed": 3},
        "train": {"eta": 2e-3, "batch_size": 64, "budget": {"epochs": 10}, "seed": 4},
        "probe": {"grad_ratio": {"t_list": [1, 2, 4], "pretrain_horizon": 1}},
        "out_dir": out.to_str().unwrap(),
    });
    let cfg_path = dir.path().join("probe.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_ok(&run(&["probe", "--config", cfg_path.to_str().unwrap()]));
    let csv = read(&out.join("grad_ratio.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "T,g");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], 1.0);
    assert_eq!(first[1], 1.0);
}

#[test]
fn schedule_runs_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sched");
    let cfg = serde_json::json!({
        "data": {"system": "limit_cycle", "hopf_normal_form": true, "samples": 220, "seed": 8},
        "model": {"input_dim": 0, "width_factor": 4, "n_blocks": 1, "residual": true,
                  "activation": {"softplus": {"beta": 8.0}}, "seed": 5},
        "train": {"eta": 2e-3, "batch_size": 64, "budget": {"epochs": 1}, "seed": 6},
        "scheduler": {"eta0": 2e-3, "wall_limit_seconds": 3.0, "trend_fit": "linear",
                      "lookahead_epochs": 3},
        "out_dir": out.to_str().unwrap(),
    });
    let cfg_path = dir.path().join("sched.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_ok(&run(&["schedule", "--config", cfg_path.to_str().unwrap()]));
    let csv = read(&out.join("schedule_trace.csv"));
    assert!(csv.starts_with("wall_time,T,eta,phase,val_loss,grad_norm,action"));
    assert!(out.join("model.bin").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn curriculum_writes_phase_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curr");
    let cfg = serde_json::json!({
        "data": {"system": "limit_cycle", "hopf_normal_form": true, "samples": 220, "seed": 9},
        "model": {"input_dim": 0, "width_factor": 4, "n_blocks": 1, "residual": true,
                  "activation": {"softplus": {"beta": 8.0}}, "seed": 7},
        "train": {"eta": 2e-3, "batch_size": 64, "budget": {"epochs": 1}, "seed": 8},
        "t_max": 3,
        "total_budget": {"epochs": 9},
        "out_dir": out.to_str().unwrap(),
    });
    let cfg_path = dir.path().join("curr.json");
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_ok(&run(&["curriculum", "--config", cfg_path.to_str().unwrap()]));
    let csv = read(&out.join("curriculum.csv"));
    assert_eq!(csv.lines().count(), 4, "header + 3 phases");
}

#[test]
fn lyapunov_command_reports_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&[
        "lyapunov",
        "--system",
        "limit_cycle",
        "--hopf",
        "--steps",
        "800",
        "--discard",
        "80",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&res);
    let csv = read(&dir.path().join("lyapunov.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,lambda");
    assert_eq!(lines.len(), 3);
    let l1: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let l2: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(l1.abs() < 0.05);
    assert!(l2 < -0.1);
}
