use std::fs;
use std::path::Path;
use std::process::Command;

use conelab_cli::config::{BoundaryConfig, TargetConfig};
use conelab_cli::report::Reporter;
use conelab_cli::{run_experiment, CliError, ExperimentConfig, ExperimentKind};

fn conelab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_conelab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn small_solve() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Solve);
    cfg.domain.level = 1;
    cfg
}

#[test]
fn passing_run_exits_zero_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[domain]\nlevel = 1\n");
    let out = dir.path().join("out");
    let (code, stdout, _) = conelab(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS closed_form_error"));
    for f in [
        "summary.json",
        "mesh.json",
        "map.json",
        "energy_trace.csv",
        "density.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "solve");
    for c in summary["checks"].as_array().unwrap() {
        assert!(c["anchor"].as_str().is_some_and(|s| !s.is_empty()));
        assert!(c["tolerance"].is_number());
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[domain]\nlevel = 1\nlevle = 2\n");
    let (code, _, stderr) = conelab(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("levle"), "{stderr}");
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "kind = \"sharpness\"\n");
    let (code, _, _) = conelab(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn missing_referenced_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[target]\nkind = \"tree\"\nfile = \"nope.json\"\n",
    );
    let (code, _, _) = conelab(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn failed_assertion_exits_one_and_names_the_statement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[domain]\nlevel = 1\n[solver]\noracle_tol = 1e-15\n",
    );
    let (code, stdout, stderr) = conelab(&[
        "solve",
        "--config",
        &cfg,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL closed_form_error"));
    assert!(stderr.contains("harmonic extension"), "{stderr}");
}

#[test]
fn unwritable_output_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "x");
    let cfg = write(dir.path(), "c.toml", "[domain]\nlevel = 1\n");
    let (code, _, _) = conelab(&["solve", "--config", &cfg, "--out", &format!("{blocker}/sub")]);
    assert_eq!(code, 3);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 1\n[npc]\nquadruples = 50\n");
    let out = dir.path().join("o");
    let (code, _, _) = conelab(&[
        "npc-check",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 9);
}

#[test]
fn config_round_trips_through_toml() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::HopfLax);
    cfg.target = TargetConfig::Tripod { leg: 2.0 };
    cfg.boundary = BoundaryConfig::TreeLegEmbed;
    cfg.hopf_lax.outer_radius = Some(0.8);
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn empty_check_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rep = Reporter::new(dir.path()).unwrap();
    let err = rep.finish(&small_solve(), 0.0).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn non_periodic_cosine_data_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_solve();
    cfg.boundary = BoundaryConfig::CosAlphaPhi {
        alpha: Some(0.5),
        amplitude: 1.0,
    };
    assert!(matches!(run_experiment(&cfg, dir.path()), Err(CliError::Config(_))));
}

#[test]
fn tabulated_boundary_matches_cosine_data() {
    let dir = tempfile::tempdir().unwrap();
    let n = 2000;
    let mut table = String::from("phi,value\n");
    for i in 0..n {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        table.push_str(&format!("{phi},{}\n", phi.cos()));
    }
    let cfg_path = write(
        dir.path(),
        "c.toml",
        "kind = \"solve\"\n[domain]\nlevel = 1\n[target]\nkind = \"euclidean\"\ndim = 1\n[boundary]\nkind = \"tabulated\"\nfile = \"table.csv\"\n",
    );
    write(dir.path(), "table.csv", &table);
    let mut cfg = ExperimentConfig::load(Path::new(&cfg_path)).unwrap();
    cfg.resolve_kind(None).unwrap();
    let tab = run_experiment(&cfg, &dir.path().join("tab")).unwrap();
    let cos = run_experiment(&small_solve(), &dir.path().join("cos")).unwrap();
    let e_tab = tab.metric("energy").unwrap();
    let e_cos = cos.metric("energy").unwrap();
    assert!((e_tab / e_cos - 1.0).abs() < 1e-4, "{e_tab} vs {e_cos}");
}

#[test]
fn tree_file_target_with_walk_boundary_solves() {
    let dir = tempfile::tempdir().unwrap();
    let tree = r#"{"nodes":["o","a","b","c","d"],"edges":[
        {"id":"oa","from":"o","to":"a","length":1.0},
        {"id":"ob","from":"o","to":"b","length":0.5},
        {"id":"bc","from":"b","to":"c","length":0.5},
        {"id":"bd","from":"b","to":"d","length":0.7}]}"#;
    write(dir.path(), "tree.json", tree);
    let cfg_path = write(
        dir.path(),
        "c.toml",
        "kind = \"solve\"\n[domain]\nlevel = 1\n[target]\nkind = \"tree\"\nfile = \"tree.json\"\n[boundary]\nkind = \"tree_leg_embed\"\n",
    );
    let mut cfg = ExperimentConfig::load(Path::new(&cfg_path)).unwrap();
    cfg.resolve_kind(None).unwrap();
    let summary = run_experiment(&cfg, &dir.path().join("o")).unwrap();
    assert!(summary.passed(), "{:?}", summary.failures());
    assert!(summary.check("uniqueness").is_some());
}

#[test]
fn regularity_table_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Regularity);
    cfg.regularity.levels = vec![1, 2];
    cfg.regularity.product_pairs = 2000;
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert!(summary.passed(), "{:?}", summary.failures());
    let body = fs::read_to_string(dir.path().join("regularity.csv")).unwrap();
    assert_eq!(body.lines().next().unwrap(), "vertex,r,phi,lip,density,ratio");
}

#[test]
fn identical_configs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::NpcCheck);
    cfg.seed = 42;
    cfg.npc.quadruples = 500;
    run_experiment(&cfg, &dir.path().join("a")).unwrap();
    run_experiment(&cfg, &dir.path().join("b")).unwrap();
    let a = fs::read(dir.path().join("a/quadruples.csv")).unwrap();
    let b = fs::read(dir.path().join("b/quadruples.csv")).unwrap();
    assert_eq!(a, b);
    cfg.seed = 43;
    run_experiment(&cfg, &dir.path().join("c")).unwrap();
    assert_ne!(a, fs::read(dir.path().join("c/quadruples.csv")).unwrap());
}
