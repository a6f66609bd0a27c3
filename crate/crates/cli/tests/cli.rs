use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graspforge"));
    c.env("GRASPFORGE_LOG", "warn");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn graspforge")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let o = run(args, cwd);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Small PPO budget so the training tests take seconds.
fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{"ppo": {"rollout_steps": 96, "contexts": 2, "minibatch": 48, "hidden": [16]}}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

fn parse_obj(text: &str) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let p: Vec<f64> = it.map(|x| x.parse().unwrap()).collect();
                v.push([p[0], p[1], p[2]]);
            }
            Some("f") => {
                let i: Vec<usize> = it.map(|x| x.split('/').next().unwrap().parse().unwrap()).collect();
                assert_eq!(i.len(), 3, "{line}");
                f.push([i[0], i[1], i[2]]);
            }
            _ => {}
        }
    }
    (v, f)
}

#[test]
fn render_writes_a_valid_obj() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["render", "--phi", "0.03,0.03,0.08,1.0,1.0", "--out", "s.obj"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("s.obj")).unwrap();
    let (v, f) = parse_obj(&text);
    assert!(!v.is_empty() && !f.is_empty());
    for face in &f {
        assert!(face.iter().all(|&i| i >= 1 && i <= v.len()));
    }
    // ellipsoid with semi-axes 3, 3, 8 cm
    for p in &v {
        let g = (p[0] / 0.03).powi(2) + (p[1] / 0.03).powi(2) + (p[2] / 0.08).powi(2);
        assert!((g - 1.0).abs() < 1e-6, "{p:?}");
    }
    assert!(dir.path().join("s.obj.run.json").exists());
}

#[test]
fn render_depth_image_is_pgm() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["render", "--phi", "0.03,0.03,0.08,0.5,1.5", "--out", "d.pgm"], dir.path());
    let bytes = std::fs::read(dir.path().join("d.pgm")).unwrap();
    assert!(bytes.starts_with(b"P5"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_shape_vector_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["render", "--phi", "0.03,0.03", "--out", "s.obj"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["eval", "--ckpt", "none.json", "--shapes", "none.json", "--out", "e.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emitted_default_config_round_trips_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(&["config", "--emit-default"], dir.path());
    let path = dir.path().join("c.json");
    std::fs::write(&path, &o.stdout).unwrap();
    let checked = ok(&["config", "--check", "c.json"], dir.path());
    let a: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&checked.stdout).unwrap();
    assert_eq!(a, b);

    std::fs::write(&path, r#"{"ppo": {"gama": 0.9}}"#).unwrap();
    let bad = run(&["config", "--check", "c.json"], dir.path());
    assert!(!bad.status.success());
}

fn metrics_updates(dir: &Path) -> Vec<usize> {
    let text = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect()
}

#[test]
fn one_update_writes_checkpoint_and_one_metrics_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&["train-rl", "--config", &cfg, "--seed", "4", "--out", "rl", "--total-updates", "1"], dir.path());
    assert!(dir.path().join("rl/checkpoint.bin").exists());
    assert!(dir.path().join("rl/run.json").exists());
    assert_eq!(metrics_updates(&dir.path().join("rl")), vec![1]);
}

#[test]
fn resume_continues_numbering_and_matches_a_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = small_config(p);
    ok(&["train-rl", "--config", &cfg, "--seed", "4", "--out", "a", "--total-updates", "1"], p);
    ok(
        &[
            "train-rl", "--config", &cfg, "--seed", "4", "--out", "a", "--total-updates", "3", "--resume",
            "a/checkpoint.bin",
        ],
        p,
    );
    assert_eq!(metrics_updates(&p.join("a")), vec![1, 2, 3]);
    ok(&["train-rl", "--config", &cfg, "--seed", "4", "--out", "b", "--total-updates", "3"], p);
    assert_eq!(
        std::fs::read(p.join("a/checkpoint.bin")).unwrap(),
        std::fs::read(p.join("b/checkpoint.bin")).unwrap()
    );
}

#[test]
fn data_clone_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["gen-data", "--zero-residual", "--seed", "2", "--episodes", "6", "--out", "data"], p);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("data/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["episodes"], 6);
    assert!(p.join("data/run.json").exists());

    ok(&["train-bc", "--data", "data", "--epochs", "2", "--seed", "2", "--out", "bc.json"], p);
    std::fs::write(
        p.join("shapes.json"),
        r#"[{"id": "sphere", "phi": [0.03, 0.03, 0.06, 1.0, 1.0]}, [0.04, 0.03, 0.08, 0.3, 0.3]]"#,
    )
    .unwrap();
    ok(&["eval", "--ckpt", "bc.json", "--shapes", "shapes.json", "--trials", "2", "--out", "e.csv"], p);
    let csv = std::fs::read_to_string(p.join("e.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 2 + 1, "{csv}");
    assert!(p.join("e.csv.run.json").exists());
}

#[test]
fn gen_data_requires_a_policy_choice() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen-data", "--episodes", "2", "--out", "d"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
