use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qjh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qjh"))
        .args(args)
        .env_remove("QJH_SEED")
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}, stderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        summary(&qjh(&[
            "sample",
            "--target",
            "std-normal",
            "--dim",
            "2",
            "--iters",
            "1000",
            "--seed",
            "7",
            "--out",
            path_str(out),
        ]));
    }
    for f in ["samples.csv", "diagnostics.json"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
    let csv = std::fs::read_to_string(a.join("samples.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "chain,draw,theta_0,theta_1");
    assert_eq!(csv.lines().count(), 1 + 4 * 1000);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        summary(&qjh(&[
            "sample",
            "--target",
            "ill-gaussian",
            "--dim",
            "3",
            "--iters",
            "300",
            "--warmup",
            "200",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            path_str(out),
        ]));
    }
    assert_eq!(
        std::fs::read(a.join("samples.csv")).unwrap(),
        std::fs::read(b.join("samples.csv")).unwrap()
    );
}

#[test]
fn negative_step_size_exits_2() {
    let out = qjh(&["sample", "--step-size", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step size"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"sample\"\n[sampler]\nstep_size = -0.1\n").unwrap();
    let out = qjh(&["--config", path_str(&cfg), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("step size") && err.contains("sampler.step_size"), "{err}");
}

#[test]
fn bench_airy_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&qjh(&["bench-airy", "--modes", "5", "--out", path_str(dir.path())]));
    let csv = std::fs::read_to_string(dir.path().join("airy_eigs.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,exact,estimate,abs_err,rel_err");
    assert_eq!(lines.len(), 1 + 5);
    assert!(s["results"]["max_relative_error"].as_f64().unwrap() < 1e-6);
    assert!(dir.path().join("posterior_samples.csv").exists());
}

#[test]
fn minimal_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "command = \"lindblad-evolve\"\n").unwrap();
    let s = summary(&qjh(&[
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&dir.path().join("o")),
    ]));
    let c = &s["config"];
    assert_eq!(s["command"], "lindblad-evolve");
    assert_eq!(c["seed"], 1);
    assert_eq!(c["sampler"]["step_size"], 0.2);
    assert_eq!(c["sampler"]["leapfrog_steps"], 8);
    assert_eq!(c["sampler"]["warmup"], 1000);
    assert_eq!(c["sampler"]["iterations"], 5000);
    assert_eq!(c["sampler"]["chains"], 4);
    assert_eq!(c["preconditioner"]["enabled"], true);
    assert_eq!(c["preconditioner"]["alpha"], 0.1);
    assert_eq!(c["preconditioner"]["dtau"], 0.01);
    assert_eq!(c["lindblad"]["model"], "amplitude-damping");
    assert_eq!(c["target"]["kind"], "std-normal");
}

#[test]
fn flag_overrides_file_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[sampler]\nstep_size = 0.1\nwarmup = 50\niterations = 100\nchains = 1\n",
    )
    .unwrap();
    let s = summary(&qjh(&[
        "sample",
        "--config",
        path_str(&cfg),
        "--step-size",
        "0.2",
        "--out",
        path_str(dir.path()),
    ]));
    assert_eq!(s["config"]["sampler"]["step_size"], 0.2);
    assert_eq!(s["config"]["sampler"]["warmup"], 50);
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["sampler"]["step_size"], 0.2);
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[sampler]\nstep_sise = 0.1\n").unwrap();
    let out = qjh(&["sample", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step_sise"));

    let out = qjh(&["sample", "--step-sise", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--step-sise"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qjh"))
        .args(["lindblad-evolve", "--t-final", "0.1", "--out", path_str(dir.path())])
        .env("QJH_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(summary(&out)["seed"], 42);
    let out = Command::new(env!("CARGO_BIN_EXE_qjh"))
        .args([
            "lindblad-evolve",
            "--t-final",
            "0.1",
            "--seed",
            "3",
            "--out",
            path_str(dir.path()),
        ])
        .env("QJH_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(summary(&out)["seed"], 3);
}

#[test]
fn manifest_checksums_match_files() {
    let dir = tempfile::tempdir().unwrap();
    summary(&qjh(&[
        "rmt-spacing",
        "--samples",
        "2000",
        "--svg",
        "--out",
        path_str(dir.path()),
    ]));
    let manifest: Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let bytes = std::fs::read(dir.path().join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), qjh_cli::output::sha256_hex(&bytes));
        assert_eq!(o["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    assert!(manifest["versions"]["qjh-core"].is_string());
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not-a-dir");
    std::fs::write(&file, "x").unwrap();
    let out = qjh(&["lindblad-evolve", "--t-final", "0.1", "--out", path_str(&file)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(qjh(&["--help"]).status.code(), Some(0));
    assert_eq!(qjh(&["--version"]).status.code(), Some(0));
    assert_eq!(qjh(&[]).status.code(), Some(2));
}

#[test]
fn trajectory_exports_have_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    summary(&qjh(&[
        "sse-validate",
        "--paths",
        "50",
        "--t-final",
        "0.1",
        "--dt",
        "0.01",
        "--out",
        path_str(dir.path()),
    ]));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(
        traj.lines().next().unwrap(),
        "time,psi_0_re,psi_0_im,psi_1_re,psi_1_im,norm"
    );
    assert_eq!(traj.lines().count(), 1 + 11);
    let val = std::fs::read_to_string(dir.path().join("sse_validation.csv")).unwrap();
    assert_eq!(val.lines().count(), 1 + 10);

    summary(&qjh(&[
        "lindblad-evolve",
        "--t-final",
        "1",
        "--dt",
        "0.1",
        "--out",
        path_str(dir.path()),
    ]));
    let lind = std::fs::read_to_string(dir.path().join("lindblad_trajectory.csv")).unwrap();
    assert!(lind.starts_with("time,rho_00_re,rho_00_im,"));
    assert_eq!(lind.lines().count(), 1 + 11);
}
