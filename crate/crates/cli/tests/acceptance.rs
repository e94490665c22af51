//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use conelab_cli::config::{BoundaryConfig, TargetConfig};
use conelab_cli::{run_experiment, ExperimentConfig, ExperimentKind, Summary};

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(cfg: &ExperimentConfig, dir: &Path) -> (Summary, f64) {
    let start = Instant::now();
    let summary = run_experiment(cfg, dir).expect("experiment runs");
    (summary, start.elapsed().as_secs_f64())
}

/// Pass iff every named check is present and passed.
fn checks(summary: &Summary, names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in names {
        match summary.check(name) {
            Some(c) => {
                passed &= c.passed;
                parts.push(format!("{name}={:.3e}/{:.1e}", c.value, c.tolerance));
            }
            None => {
                passed = false;
                parts.push(format!("{name}=missing"));
            }
        }
    }
    Outcome {
        passed,
        detail: parts.join(" "),
    }
}

fn prefixed(summary: &Summary, prefix: &str) -> Vec<String> {
    summary
        .checks
        .iter()
        .filter(|c| c.name.starts_with(prefix))
        .map(|c| c.name.clone())
        .collect()
}

fn both(a: Outcome, b: Outcome) -> Outcome {
    Outcome {
        passed: a.passed && b.passed,
        detail: format!("{} {}", a.detail, b.detail),
    }
}

fn within(outcome: Outcome, secs: f64, limit: f64) -> Outcome {
    Outcome {
        passed: outcome.passed && secs < limit,
        detail: format!("{} runtime={secs:.1}s/{limit}s", outcome.detail),
    }
}

fn csv_bodies(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("output directory exists")
        .map(|e| e.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn cos2() -> BoundaryConfig {
    BoundaryConfig::CosAlphaPhi {
        alpha: Some(2.0),
        amplitude: 1.0,
    }
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temporary directory");
    let dir = |name: &str| root.path().join(name);
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    // 1: scalar harmonic oracle on the flat disk, h ≈ 0.02
    let solve_cfg = ExperimentConfig::new(ExperimentKind::Solve);
    let (solve, solve_secs) = timed(&solve_cfg, &dir("solve"));
    results.push((
        1,
        "scalar harmonic oracle",
        within(checks(&solve, &["closed_form_error"]), solve_secs, 10.0),
    ));

    // 2: cone sharpness
    let sharp_cfg = ExperimentConfig::new(ExperimentKind::Sharpness);
    let (sharp, sharp_secs) = timed(&sharp_cfg, &dir("sharpness"));
    let names: Vec<String> = sharp.checks.iter().map(|c| c.name.clone()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    results.push((2, "cone sharpness", within(checks(&sharp, &names), sharp_secs, 120.0)));

    // 3 and 4: energy normalization and convergence for a linear map
    let conv_cfg = ExperimentConfig::new(ExperimentKind::EnergyConvergence);
    let (conv, _) = timed(&conv_cfg, &dir("convergence"));
    results.push((
        3,
        "energy normalization",
        checks(&conv, &["density_normalization", "graph_energy_exactness"]),
    ));
    results.push((
        4,
        "energy convergence",
        checks(&conv, &["l1_gap_monotone", "l1_gap_relative", "mean_value_ratio"]),
    ));

    // 5: comparison inequality sweeps
    let npc_cfg = ExperimentConfig::new(ExperimentKind::NpcCheck);
    let (npc, _) = timed(&npc_cfg, &dir("npc"));
    results.push((
        5,
        "NPC inequalities",
        checks(
            &npc,
            &[
                "quadruple_euclidean3",
                "quadruple_hyperbolic_plane",
                "quadruple_tripod",
                "collinear_equality",
            ],
        ),
    ));

    // 6 and 7: product sub-harmonicity and mean values on solved maps
    let mut reg_line_cfg = ExperimentConfig::new(ExperimentKind::Regularity);
    reg_line_cfg.boundary = cos2();
    let (reg_line, _) = timed(&reg_line_cfg, &dir("regularity_line"));
    let mut reg_tree_cfg = ExperimentConfig::new(ExperimentKind::Regularity);
    reg_tree_cfg.target = TargetConfig::Tripod { leg: 1.0 };
    reg_tree_cfg.boundary = BoundaryConfig::TreeLegEmbed;
    let (reg_tree, _) = timed(&reg_tree_cfg, &dir("regularity_tripod"));
    let product = [
        "product_subharmonic",
        "product_subharmonic_trend",
        "squared_distance_laplacian",
        "squared_distance_trend",
    ];
    results.push((
        6,
        "product sub-harmonicity",
        both(checks(&reg_line, &product), checks(&reg_tree, &product)),
    ));
    results.push((
        7,
        "mean-value inequalities",
        checks(
            &reg_line,
            &[
                "mean_value_equality",
                "mean_value_equality_trend",
                "mean_value_harmonic",
            ],
        ),
    ));

    // 8: inf-convolution suite at t = t_0/4, Δλ = 0.02, k ∈ {0, −1}
    let mut hl_cfg = ExperimentConfig::new(ExperimentKind::HopfLax);
    hl_cfg.boundary = cos2();
    let (hl, hl_secs) = timed(&hl_cfg, &dir("hopf_lax"));
    let names: Vec<String> = hl.checks.iter().map(|c| c.name.clone()).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut outcome = within(checks(&hl, &names), hl_secs, 300.0);
    let nontrivial: Vec<String> = hl
        .metrics
        .iter()
        .filter(|(k, _)| k.starts_with("nontrivial_fraction"))
        .map(|(k, v)| format!("{}={v:.3}", k.trim_start_matches("nontrivial_fraction_")))
        .collect();
    outcome.detail = format!("{} nontrivial cells: {}", outcome.detail, nontrivial.join(" "));
    results.push((8, "inf-convolution suite", outcome));

    // 9: solver contracts on every solved run
    let mut solver_names = vec!["uniqueness".to_string(), "maximum_principle".to_string()];
    solver_names.extend(prefixed(&solve, "energy_nonincreasing"));
    let solver_names: Vec<&str> = solver_names.iter().map(String::as_str).collect();
    let mut outcome = checks(&solve, &solver_names);
    for s in [&reg_line, &reg_tree] {
        let names = prefixed(s, "energy_nonincreasing");
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let o = checks(s, &names);
        outcome.passed &= o.passed && !names.is_empty();
    }
    results.push((9, "solver contracts", outcome));

    // 10: determinism of CSV bodies
    let mut identical = true;
    let mut compared = 0;
    let reruns = [
        ("solve", &solve_cfg),
        ("convergence", &conv_cfg),
        ("npc", &npc_cfg),
        ("regularity_tripod", &reg_tree_cfg),
        ("hopf_lax", &hl_cfg),
    ];
    for (name, cfg) in reruns {
        let again = dir(&format!("{name}_again"));
        run_experiment(cfg, &again).expect("experiment runs");
        let a = csv_bodies(&dir(name));
        let b = csv_bodies(&again);
        compared += a.len();
        identical &= !a.is_empty() && a == b;
    }
    results.push((
        10,
        "determinism",
        Outcome {
            passed: identical,
            detail: format!("{compared} CSV files compared across {} experiments", reruns.len()),
        },
    ));

    let mut failed = 0;
    for (n, title, o) in &results {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {n} ({title}): {}", o.detail);
        if !o.passed {
            failed += 1;
        }
    }

    // larger t, where cells are nontrivial; reported only
    let mut steep = ExperimentConfig::new(ExperimentKind::HopfLax);
    steep.boundary = BoundaryConfig::CosPhi { amplitude: 20.0 };
    steep.hopf_lax.t_fraction = 0.9;
    steep.hopf_lax.outer_radius = Some(0.9);
    steep.hopf_lax.inner_radius = 0.25;
    let summary = run_experiment(&steep, &dir("hopf_lax_steep")).expect("experiment runs");
    for c in &summary.checks {
        println!(
            "INFO t = 0.9 t_0 {}: {} = {:.3e} (tolerance {:.1e}, {})",
            c.name,
            c.statistic,
            c.value,
            c.tolerance,
            if c.passed { "within" } else { "outside" }
        );
    }

    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
