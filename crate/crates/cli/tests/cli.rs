use std::path::Path;
use std::process::{Command, Output};

fn pidoc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pidoc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "n_points = 50\nlayers = \"1x4\"\nmax_iters = 3\noutput_dir = \"out\"\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_artifacts_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = pidoc(
        &[
            "run", "--config", &cfg, "--seed", "7", "--lambda", "inf", "--serial",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for f in [
        "summary.json",
        "timing.json",
        "losses.csv",
        "trajectory.csv",
        "params.txt",
    ] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 7);
    assert_eq!(summary["config"]["lambda_mode"], "inf");
    assert_eq!(summary["config"]["vdp"]["n_points"], 50);

    let out = pidoc(&["plotdata", "--from", "out"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
    assert!(dir.path().join("out/figdata/manifest.json").exists());
}

#[test]
fn desk_profile_warns_about_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("capped.toml");
    std::fs::write(
        &path,
        "n_points = 20\nlayers = \"1x2\"\nmax_iters = 6000\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let cfg = path.to_string_lossy().into_owned();
    let out = pidoc(&["run", "--config", &cfg, "--max-iters", "2"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!stderr(&out).contains("warning"));
    let out = pidoc(&["run", "--config", &cfg, "--t-end", "1"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("desk profile caps"));
    let out = pidoc(
        &[
            "run",
            "--config",
            &cfg,
            "--t-end",
            "1",
            "--profile",
            "paper",
            "--max-iters",
            "2",
        ],
        dir.path(),
    );
    assert!(!stderr(&out).contains("warning"));
}

#[test]
fn sweep_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = pidoc(
        &[
            "sweep",
            "--kind",
            "mu",
            "--config",
            &cfg,
            "--value",
            "1",
            "--value",
            "3",
            "--output-dir",
            "mu",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "mu,abs_mean_err,T,mean_loss,norm_time");
    assert_eq!(lines.len(), 3);
    assert_eq!(
        stdout,
        std::fs::read_to_string(dir.path().join("mu/table.csv")).unwrap()
    );

    let out = pidoc(&["plotdata", "--from", "mu"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("mu/figdata/error_acceleration.csv").exists());
}

#[test]
fn preset_sweep_defaults_its_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tiny.toml"),
        "n_points = 20\nlayers = \"1x3\"\nmax_iters = 1\n",
    )
    .unwrap();
    let out = pidoc(
        &["sweep", "--kind", "initial", "--config", "tiny.toml", "--serial"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = std::fs::read_to_string(dir.path().join("runs/initial/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn bad_input_exits_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    let out = pidoc(&["run", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("colour"));

    let cfg = tiny_config(dir.path());
    let out = pidoc(&["run", "--config", &cfg, "--amplitude", "-1"], dir.path());
    assert!(!out.status.success());

    let out = pidoc(&["sweep", "--kind", "colour", "--config", &cfg], dir.path());
    assert!(!out.status.success());

    let out = pidoc(&["plotdata", "--from", "nowhere"], dir.path());
    assert!(!out.status.success());
}
