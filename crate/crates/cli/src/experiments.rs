//! Experiment pipelines. Each records checks, metrics and tables on a
//! [`Reporter`].

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use conelab_core::energy::{
    approx_energy_density, density_convergence_study, graph_dirichlet_energy, BallQuadrature, StudyRegion,
};
use conelab_core::hopf_lax::{
    compute_hopf_lax, hopf_lax_property_residuals, supersolution_residual, time_derivative_residual,
    uniform_lambda_grid, CylinderCheck,
};
use conelab_core::regularity::{
    composition_inequality_residual, holder_exponent_fit, lipschitz_field, main_theorem_ratio, mean_value_residual,
    MeanValueMode, PairSelection,
};
use conelab_core::solver::{
    ball_subdomain, max_single_vertex_decrease, maximum_principle_residual, solve_dirichlet, solve_scalar_poisson,
    SweepMode,
};
use conelab_core::{
    ComparisonGeometry, ConeSpec, DirichletProblem, DomainMesh, InitPolicy, MapState, MetricTree, NpcTarget,
    SolverOptions, SolverReport, TargetPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind, InitConfig, ModeConfig, NpcTargetName, SolverConfig};
use crate::error::CliError;
use crate::report::{cell, Check, Reporter, Summary};
use crate::setup::{build_mesh, build_target, BoundaryData};

/// Run the configured experiment, writing artifacts and `summary.json` to
/// `out`. The summary is returned whether or not its checks pass.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, CliError> {
    let kind = cfg
        .kind
        .ok_or_else(|| CliError::Config("experiment kind is not set".into()))?;
    let start = Instant::now();
    let mut rep = Reporter::new(out)?;
    match kind {
        ExperimentKind::Solve => solve(cfg, &mut rep)?,
        ExperimentKind::NpcCheck => npc_check(cfg, &mut rep)?,
        ExperimentKind::EnergyConvergence => energy_convergence(cfg, &mut rep)?,
        ExperimentKind::Regularity => regularity(cfg, &mut rep)?,
        ExperimentKind::Sharpness => sharpness(cfg, &mut rep)?,
        ExperimentKind::HopfLax => hopf_lax(cfg, &mut rep)?,
    }
    rep.finish(cfg, start.elapsed().as_secs_f64())
}

fn total_angle(cfg: &ExperimentConfig, mesh: &DomainMesh) -> f64 {
    mesh.chart().map_or(cfg.domain.total_angle_pi * PI, |c| c.total_angle)
}

fn solver_options(s: &SolverConfig) -> SolverOptions {
    let mut opts = SolverOptions::default()
        .with_tol(s.tol)
        .with_max_iter(s.max_iter)
        .with_mode(match s.mode {
            ModeConfig::GaussSeidel => SweepMode::GaussSeidel,
            ModeConfig::Jacobi => SweepMode::Jacobi,
        });
    if let Some(w) = s.over_relaxation {
        opts = opts.with_over_relaxation(w);
    }
    opts
}

/// A solved map with the solver's report.
struct Solved {
    map: MapState,
    report: SolverReport,
}

fn solve_map(
    cfg: &ExperimentConfig,
    mesh: &DomainMesh,
    target: &NpcTarget,
    init: InitPolicy,
) -> Result<Solved, CliError> {
    let bd = BoundaryData::new(&cfg.boundary, target, total_angle(cfg, mesh))?;
    let problem = DirichletProblem::from_boundary_fn(mesh, target.clone(), |p| bd.value(p))?.with_init(init);
    let (map, report) = solve_dirichlet(&problem, &solver_options(&cfg.solver))?;
    Ok(Solved { map, report })
}

fn initial_policy(cfg: &ExperimentConfig) -> InitPolicy {
    match cfg.solver.init {
        InitConfig::BoundaryBarycenter => InitPolicy::BoundaryBarycenter,
        InitConfig::Random => InitPolicy::Random { seed: cfg.seed },
    }
}

/// Largest relative rise between consecutive energies.
fn worst_energy_rise(report: &SolverReport) -> f64 {
    let scale = report.energy_trace.first().copied().unwrap_or(0.0).abs().max(1.0);
    report
        .energy_trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / scale)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

fn solver_checks(rep: &mut Reporter, label: &str, s: &Solved, tol: f64) {
    rep.check(Check::new(
        &format!("converged{label}"),
        "largest vertex move of the final sweep below the solver tolerance",
        "final displacement",
        s.report.final_displacement,
        tol,
        s.report.converged,
    ));
    rep.check(Check::at_most(
        &format!("energy_nonincreasing{label}"),
        "graph Dirichlet energy never increases across sweeps",
        "largest relative energy rise",
        worst_energy_rise(&s.report),
        ENERGY_SLACK,
    ));
}

const ENERGY_SLACK: f64 = 1e-12;

fn solve(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let mesh = build_mesh(&cfg.domain, cfg.domain.level)?;
    let target = build_target(&cfg.target)?;
    let tol = cfg.solver.tol;
    let solved = solve_map(cfg, &mesh, &target, initial_policy(cfg))?;
    solver_checks(rep, "", &solved, tol);
    rep.metric("iterations", solved.report.iterations as f64);
    rep.metric("over_relaxation", solved.report.over_relaxation);
    rep.metric("mesh_spacing", mesh.mesh_spacing());
    rep.metric("vertices", mesh.num_vertices() as f64);
    rep.metric(
        "max_single_vertex_decrease",
        max_single_vertex_decrease(&mesh, &solved.map),
    );
    let (energy, density) = graph_dirichlet_energy(&mesh, &solved.map);
    rep.metric("energy", energy);

    if cfg.solver.uniqueness_probe {
        let seed = match cfg.solver.init {
            InitConfig::Random => cfg.seed.wrapping_add(1),
            InitConfig::BoundaryBarycenter => cfg.seed,
        };
        let other = solve_map(cfg, &mesh, &target, InitPolicy::Random { seed })?;
        solver_checks(rep, "_second_start", &other, tol);
        rep.check(Check::at_most(
            "uniqueness",
            "solutions from two starts coincide",
            "largest pointwise distance between the two solutions",
            solved.map.max_distance(&other.map),
            10.0 * tol,
        ));
    }

    let bd = BoundaryData::new(&cfg.boundary, &target, total_angle(cfg, &mesh))?;
    if let Some(exact) = bd.closed_form(mesh.radius()) {
        let values = solved.map.scalars().expect("closed forms exist for scalar targets");
        let err = mesh
            .interior_vertices()
            .into_iter()
            .map(|v| (values[v] - exact(mesh.vertex(v))).abs())
            .fold(0.0, f64::max);
        rep.check(Check::at_most(
            "closed_form_error",
            "interior values match the harmonic extension r^α cos(αφ)",
            "max interior error",
            err,
            cfg.solver.oracle_tol,
        ));
    }
    if let Some(values) = solved.map.scalars() {
        let all: Vec<usize> = (0..mesh.num_vertices()).collect();
        let half = ball_subdomain(&mesh, 0, 0.5 * mesh.radius());
        let worst =
            maximum_principle_residual(&mesh, &values, &all)?.max(maximum_principle_residual(&mesh, &values, &half)?);
        rep.check(Check::at_most(
            "maximum_principle",
            "a harmonic function on a subdomain is bounded by its boundary extremes",
            "largest excess over the boundary range",
            worst,
            cfg.solver.max_principle_tol,
        ));
    }

    rep.text("mesh.json", &mesh.to_json_string()?)?;
    rep.text("map.json", &solved.map.to_json_string()?)?;
    let mut trace = Vec::new();
    solved.report.write_trace_csv(&mut trace)?;
    rep.text("energy_trace.csv", &String::from_utf8_lossy(&trace))?;
    let mut dens = Vec::new();
    density.write_csv(&mesh, &mut dens)?;
    rep.text("density.csv", &String::from_utf8_lossy(&dens))?;
    Ok(())
}

fn npc_target(name: NpcTargetName) -> Result<(String, NpcTarget), CliError> {
    Ok(match name {
        NpcTargetName::Euclidean3 => ("euclidean3".into(), NpcTarget::Euclidean { dim: 3 }),
        NpcTargetName::HyperbolicPlane => ("hyperbolic_plane".into(), NpcTarget::HyperbolicPlane),
        NpcTargetName::Tripod => ("tripod".into(), NpcTarget::Tree(MetricTree::tripod(1.0)?)),
    })
}

fn npc_check(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let c = &cfg.npc;
    if c.targets.is_empty() || c.quadruples == 0 {
        return Err(CliError::Config(
            "npc-check needs targets and a positive quadruple count".into(),
        ));
    }
    let mut rows = Vec::new();
    for (i, &name) in c.targets.iter().enumerate() {
        let (label, target) = npc_target(name)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let mut worst = f64::INFINITY;
        for q in 0..c.quadruples {
            let p: Vec<TargetPoint> = (0..4).map(|_| target.random_point(&mut rng, c.scale)).collect();
            let r = target.npc_quadruple_residual(&p[0], &p[1], &p[2], &p[3]);
            worst = worst.min(r.residual);
            rows.push(vec![label.clone(), cell(q), cell(r.lhs), cell(r.rhs), cell(r.residual)]);
        }
        rep.check(Check::at_least(
            &format!("quadruple_{label}"),
            "quadruple comparison inequality of nonpositively curved spaces",
            "smallest residual lhs − rhs",
            worst,
            -c.tol,
        ));

        let sets = (c.quadruples / 10).max(1);
        let mut worst_gap = f64::INFINITY;
        for _ in 0..sets {
            let n = rng.gen_range(2..6);
            let pts: Vec<(TargetPoint, f64)> = (0..n)
                .map(|_| (target.random_point(&mut rng, c.scale), rng.gen_range(0.1..1.0)))
                .collect();
            let b = target.weighted_barycenter(&pts, 1e-12)?;
            let fb = target.barycenter_objective(&b, &pts);
            let total: f64 = pts.iter().map(|p| p.1).sum();
            for (q, _) in &pts {
                let gap = target.barycenter_objective(q, &pts) - fb - total * target.dist(q, &b).powi(2);
                worst_gap = worst_gap.min(gap / (1.0 + fb));
            }
        }
        rep.check(Check::at_least(
            &format!("variance_{label}"),
            "variance inequality F(q) − F(b) ≥ W d²(q, b) at the barycenter b",
            "smallest relative slack",
            worst_gap,
            -1e-7,
        ));
    }
    let line = NpcTarget::real_line();
    let p: Vec<TargetPoint> = [0.0, 1.0, 3.0, 4.0].iter().map(|&x| TargetPoint::scalar(x)).collect();
    let r = line.npc_quadruple_residual(&p[0], &p[1], &p[2], &p[3]);
    rep.check(Check::at_most(
        "collinear_equality",
        "collinear quadruple (0, 1, 3, 4) gives equality 4 = 4",
        "|lhs − 4| + |rhs − 4|",
        (r.lhs - 4.0).abs() + (r.rhs - 4.0).abs(),
        0.0,
    ));
    rows.push(vec![
        "collinear".into(),
        cell(0),
        cell(r.lhs),
        cell(r.rhs),
        cell(r.residual),
    ]);
    rep.table("quadruples.csv", &["target", "index", "lhs", "rhs", "residual"], rows)
}

fn linear_map(mesh: &DomainMesh, a: [f64; 2]) -> Result<MapState, CliError> {
    Ok(MapState::from_chart_fn(mesh, |p| {
        let [x, y] = p.to_xy();
        a[0] * x + a[1] * y
    })?)
}

fn nonincreasing(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

fn energy_convergence(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let c = &cfg.convergence;
    if c.levels.is_empty() {
        return Err(CliError::Config("energy-convergence needs at least one level".into()));
    }
    let quad = BallQuadrature::RimWeighted;
    let grad = c.slope[0].hypot(c.slope[1]);
    let expected = grad.powf(c.p);
    let mut meshes = Vec::new();
    let mut maps = Vec::new();
    let mut eps = Vec::new();
    let mut norm_rows = Vec::new();
    let mut worst_norm = 0.0f64;
    let mut worst_exact = 0.0f64;
    for (i, &level) in c.levels.iter().enumerate() {
        let mesh = build_mesh(&cfg.domain, level)?;
        let map = linear_map(&mesh, c.slope)?;
        let h = mesh.mesh_spacing();

        let (energy, _) = graph_dirichlet_energy(&mesh, &map);
        let exact = grad * grad * mesh.total_measure();
        worst_exact = worst_exact.max((energy - exact).abs());

        let e8 = c.normalization_eps_factor * h;
        let probes: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&v| mesh.distance_to_boundary(v) >= e8)
            .collect();
        let errs: Vec<f64> = probes
            .iter()
            .map(|&v| approx_energy_density(&mesh, &map, c.p, e8, v, quad).map(|e| (e / expected - 1.0).abs()))
            .collect::<Result<_, _>>()?;
        let max_err = errs.iter().copied().fold(0.0, f64::max);
        let center = approx_energy_density(&mesh, &map, c.p, e8, 0, quad)?;
        worst_norm = worst_norm.max(max_err);
        norm_rows.push(vec![
            cell(level),
            cell(h),
            cell(e8),
            cell(probes.len()),
            cell(center),
            cell(max_err),
            cell(energy),
            cell(exact),
        ]);

        eps.push(c.eps_factor * h * c.eps_growth.powi(i as i32));
        meshes.push(mesh);
        maps.push(map);
    }
    rep.check(Check::at_most(
        "density_normalization",
        "approximate energy density of a linear map equals |a|^p",
        "max relative error over vertices at distance ≥ ε from the boundary",
        worst_norm,
        c.normalization_tol,
    ));
    rep.check(Check::at_most(
        "graph_energy_exactness",
        "cotangent graph energy of a linear map equals |a|² · area",
        "max absolute error",
        worst_exact,
        c.exactness_tol,
    ));

    let region = StudyRegion {
        r: 0.0,
        phi: 0.0,
        radius: c.region_radius,
    };
    let rows = density_convergence_study(&meshes, &maps, c.p, &eps, region, quad)?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.l1_gap).collect();
    rep.check(Check::at_most(
        "l1_gap_monotone",
        "L¹ gap between approximate and graph densities does not grow under refinement",
        "largest increase between consecutive levels",
        nonincreasing(&gaps),
        0.0,
    ));
    let last = rows.last().expect("levels are nonempty");
    rep.check(Check::at_most(
        "l1_gap_relative",
        "L¹ gap is a small fraction of the energy at the finest level",
        "L¹ gap / energy",
        last.relative_gap,
        c.max_relative_gap,
    ));
    let worst_ratio = rows
        .iter()
        .map(|r| (r.mean_value_ratio - 1.0).abs())
        .fold(0.0, f64::max);
    rep.check(Check::at_most(
        "mean_value_ratio",
        "ball averages of d²(u(x), u(y)) / ε² recover the energy density",
        "max |ratio − 1| over levels",
        worst_ratio,
        c.mean_value_tol,
    ));
    rep.table(
        "normalization.csv",
        &[
            "level",
            "mesh_spacing",
            "eps",
            "probes",
            "center_density",
            "max_relative_error",
            "graph_energy",
            "exact_energy",
        ],
        norm_rows,
    )?;
    rep.table(
        "convergence.csv",
        &[
            "level",
            "mesh_spacing",
            "eps",
            "l1_gap",
            "energy",
            "relative_gap",
            "mean_value_ratio",
            "min_ratio",
            "max_ratio",
        ],
        rows.iter().map(|r| {
            vec![
                cell(r.level),
                cell(r.mesh_spacing),
                cell(r.eps),
                cell(r.l1_gap),
                cell(r.energy),
                cell(r.relative_gap),
                cell(r.mean_value_ratio),
                cell(r.min_ratio),
                cell(r.max_ratio),
            ]
        }),
    )
}

fn regularity(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let c = &cfg.regularity;
    if c.levels.is_empty() {
        return Err(CliError::Config("regularity needs at least one level".into()));
    }
    let target = build_target(&cfg.target)?;
    let mut fractions = Vec::new();
    let mut sq_fractions = Vec::new();
    let mut comp_rows = Vec::new();
    let mut mv_rows = Vec::new();
    let mut equality_worst = Vec::new();
    let mut harmonic_worst = Vec::new();
    let mut finest = None;
    for &level in &c.levels {
        let mesh = build_mesh(&cfg.domain, level)?;
        let solved = solve_map(cfg, &mesh, &target, initial_policy(cfg))?;
        solver_checks(rep, &format!("_level{level}"), &solved, cfg.solver.tol);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let boundary = mesh.boundary_vertices();
        let probes = vec![
            solved.map.value(0).clone(),
            solved.map.value(boundary[rng.gen_range(0..boundary.len())]).clone(),
            target.random_point(&mut rng, 1.0),
        ];
        let pairs = match c.product_pairs {
            0 => PairSelection::All,
            count => PairSelection::Sample { count, seed: cfg.seed },
        };
        let comp = composition_inequality_residual(
            &mesh,
            &solved.map,
            &solved.report,
            cfg.solver.tol,
            &probes,
            pairs,
            c.composition_tol_constant,
        )?;
        fractions.push(comp.product.violation_fraction());
        sq_fractions.push(comp.squared_distance.violation_fraction());
        comp_rows.push(vec![
            cell(level),
            cell(mesh.mesh_spacing()),
            cell("product"),
            cell(comp.product.checked),
            cell(comp.product.violations),
            cell(comp.product.worst_margin),
            cell(comp.product_tol),
        ]);
        comp_rows.push(vec![
            cell(level),
            cell(mesh.mesh_spacing()),
            cell("squared_distance"),
            cell(comp.squared_distance.checked),
            cell(comp.squared_distance.violations),
            cell(comp.squared_distance.worst_margin),
            cell(comp.tol_constant),
        ]);

        let geom = ComparisonGeometry::new(mesh.dimension(), 0.0);
        let f: Vec<f64> = mesh.vertices().iter().map(|p| 1.0 - p.r * p.r).collect();
        let src = vec![-4.0; mesh.num_vertices()];
        let eq = mean_value_residual(
            &mesh,
            geom,
            MeanValueMode::Scalar { f: &f, h: &src },
            0,
            &c.mean_value_radii,
        )?;
        equality_worst.push(eq.iter().map(|r| r.residual.abs()).fold(0.0, f64::max));
        for r in &eq {
            mv_rows.push(vec![
                cell(level),
                cell("equality"),
                cell(r.radius),
                cell(r.residual),
                cell(r.normalized),
                cell(r.measure_ratio),
            ]);
        }
        if let Some(values) = solved.map.scalars() {
            let zero = vec![0.0; mesh.num_vertices()];
            let hm = mean_value_residual(
                &mesh,
                geom,
                MeanValueMode::Scalar { f: &values, h: &zero },
                0,
                &c.mean_value_radii,
            )?;
            harmonic_worst.push(hm.iter().map(|r| r.residual.abs()).fold(0.0, f64::max));
            for r in &hm {
                mv_rows.push(vec![
                    cell(level),
                    cell("harmonic"),
                    cell(r.radius),
                    cell(r.residual),
                    cell(r.normalized),
                    cell(r.measure_ratio),
                ]);
            }
        }
        let mp = mean_value_residual(
            &mesh,
            geom,
            MeanValueMode::Map {
                map: &solved.map,
                probe: &probes[2],
            },
            0,
            &c.mean_value_radii,
        )?;
        for r in &mp {
            mv_rows.push(vec![
                cell(level),
                cell("map"),
                cell(r.radius),
                cell(r.residual),
                cell(r.normalized),
                cell(r.measure_ratio),
            ]);
        }
        finest = Some((mesh, solved));
    }
    let last = |v: &[f64]| *v.last().expect("levels are nonempty");
    rep.check(Check::at_most(
        "product_subharmonic",
        "d(u(x), u(y)) is subharmonic on the product domain",
        "violation fraction at the finest level",
        last(&fractions),
        c.max_violation_fraction,
    ));
    rep.check(Check::at_most(
        "product_subharmonic_trend",
        "violation fraction of the product check does not grow under refinement",
        "largest increase between consecutive levels",
        nonincreasing(&fractions),
        0.0,
    ));
    rep.check(Check::at_most(
        "squared_distance_laplacian",
        "Δ d²(u(·), P) ≥ 2|∇u|² for every probe point P",
        "violation fraction at the finest level",
        last(&sq_fractions),
        c.max_violation_fraction,
    ));
    rep.check(Check::at_most(
        "squared_distance_trend",
        "violation fraction of the squared-distance check does not grow under refinement",
        "largest increase between consecutive levels",
        nonincreasing(&sq_fractions),
        0.0,
    ));
    rep.check(Check::at_most(
        "mean_value_equality",
        "f = 1 − r² with Δf = −4 satisfies the mean-value identity",
        "max |residual| at the finest level",
        last(&equality_worst),
        c.mean_value_tol,
    ));
    rep.check(Check::at_most(
        "mean_value_equality_trend",
        "mean-value residual of the equality case does not grow under refinement",
        "largest increase between consecutive levels",
        nonincreasing(&equality_worst),
        0.0,
    ));
    if !harmonic_worst.is_empty() {
        rep.check(Check::at_most(
            "mean_value_harmonic",
            "sphere averages of a harmonic function equal its center value",
            "max |residual| at the finest level",
            last(&harmonic_worst),
            c.mean_value_tol,
        ));
    }

    let (mesh, solved) = finest.expect("levels are nonempty");
    let h = mesh.mesh_spacing();
    let radii: Vec<f64> = c.holder_radii_h.iter().map(|k| k * h).collect();
    let fit = holder_exponent_fit(&mesh, &solved.map, 0, &radii)?;
    let alpha = fit.alpha.unwrap_or(f64::NAN);
    rep.metric("holder_alpha", alpha);
    rep.metric("holder_residual", fit.residual);
    let bd = BoundaryData::new(&cfg.boundary, &target, total_angle(cfg, &mesh))?;
    if let (Some(_), Some(expected)) = (bd.closed_form(mesh.radius()), bd.cosine_exponent()) {
        rep.check(Check::at_most(
            "holder_exponent",
            "oscillation on B(r) at the cone point scales like r^α",
            "|fitted α − α|",
            (alpha - expected).abs(),
            c.holder_tol,
        ));
    }
    let lip = lipschitz_field(&mesh, &solved.map, c.lip_radius_h * h);
    let (_, density) = graph_dirichlet_energy(&mesh, &solved.map);
    rep.table(
        "regularity.csv",
        &["vertex", "r", "phi", "lip", "density", "ratio"],
        (0..mesh.num_vertices()).map(|v| {
            let p = mesh.vertex(v);
            let d = density.values[v];
            vec![
                cell(v),
                cell(p.r),
                cell(p.phi),
                cell(lip[v]),
                cell(d),
                cell(lip[v] * lip[v] / d),
            ]
        }),
    )?;
    rep.table(
        "holder.csv",
        &["radius", "oscillation"],
        fit.radii
            .iter()
            .zip(&fit.oscillations)
            .map(|(r, o)| vec![cell(r), cell(o)]),
    )?;
    rep.table(
        "composition.csv",
        &[
            "level",
            "mesh_spacing",
            "check",
            "checked",
            "violations",
            "worst_margin",
            "tolerance",
        ],
        comp_rows,
    )?;
    rep.table(
        "mean_value.csv",
        &["level", "case", "radius", "residual", "normalized", "measure_ratio"],
        mv_rows,
    )
}

fn sharpness(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let c = &cfg.sharpness;
    if c.angles_pi.is_empty() || c.levels.len() < 2 {
        return Err(CliError::Config(
            "sharpness needs angles and at least two levels".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut holder_rows = Vec::new();
    for &angle in &c.angles_pi {
        let theta = angle * PI;
        let alpha = 2.0 / angle;
        let data = |mesh: &DomainMesh| -> Result<MapState, CliError> {
            let g: Vec<f64> = mesh.vertices().iter().map(|p| (alpha * p.phi).cos()).collect();
            let sol = solve_scalar_poisson(mesh, &vec![0.0; mesh.num_vertices()], &g)?;
            Ok(MapState::from_scalars(mesh, &sol.values)?)
        };
        let mut ratios = Vec::new();
        for &level in &c.levels {
            let spec = ConeSpec::new(theta, cfg.domain.radius, level).with_base_rings(c.base_rings);
            let mesh = DomainMesh::build_cone(&spec)?;
            let map = data(&mesh)?;
            let r = main_theorem_ratio(&mesh, &map, 0, c.radius * cfg.domain.radius)?;
            ratios.push(r.ratio);
            rows.push(vec![
                cell(angle),
                cell(level),
                cell(mesh.mesh_spacing()),
                cell(r.ratio),
                cell(r.pairs),
                cell(r.numerator),
                cell(r.denominator),
                cell(r.osc),
                cell(r.energy),
            ]);
        }
        let tag = format!("{angle}pi");
        if alpha < 1.0 {
            let growth = ratios.windows(2).map(|w| w[1] / w[0]).fold(f64::INFINITY, f64::min);
            rep.check(Check::at_least(
                &format!("ratio_growth_{tag}"),
                "Lipschitz-to-energy ratio blows up at a cone point of angle above 2π",
                "smallest ratio growth factor per refinement",
                growth,
                c.min_growth,
            ));
        } else {
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(0.0, f64::max);
            rep.check(Check::at_most(
                &format!("ratio_bounded_{tag}"),
                "Lipschitz-to-energy ratio stays bounded when the cone angle is at most 2π",
                "max/min ratio across levels",
                if lo > 0.0 { hi / lo } else { f64::INFINITY },
                c.max_spread,
            ));
        }

        let finest = *c.levels.iter().max().expect("levels are nonempty");
        let spec = ConeSpec::new(theta, cfg.domain.radius, finest).with_base_rings(c.holder_base_rings);
        let mesh = DomainMesh::build_cone(&spec)?;
        let map = data(&mesh)?;
        let h = mesh.mesh_spacing();
        let radii: Vec<f64> = c.holder_radii_h.iter().map(|k| k * h).collect();
        let fit = holder_exponent_fit(&mesh, &map, 0, &radii)?;
        let fitted = fit.alpha.unwrap_or(f64::NAN);
        rep.metric(format!("holder_alpha_{tag}"), fitted);
        for (r, o) in fit.radii.iter().zip(&fit.oscillations) {
            holder_rows.push(vec![cell(angle), cell(r), cell(o)]);
        }
        if alpha < 1.0 {
            rep.check(Check::at_most(
                &format!("holder_exponent_{tag}"),
                "harmonic functions at a cone point of angle θ > 2π are exactly 2π/θ-Hölder",
                "|fitted α − 2π/θ|",
                (fitted - alpha).abs(),
                c.holder_tol,
            ));
        }
    }
    rep.table(
        "sharpness.csv",
        &[
            "total_angle_pi",
            "level",
            "mesh_spacing",
            "ratio",
            "pairs",
            "numerator",
            "denominator",
            "osc",
            "energy",
        ],
        rows,
    )?;
    rep.table("holder.csv", &["total_angle_pi", "radius", "oscillation"], holder_rows)
}

fn cylinder_row(k: f64, level: u32, name: &str, c: &CylinderCheck) -> Vec<String> {
    vec![
        cell(k),
        cell(level),
        cell(name),
        cell(c.checked),
        cell(c.violations),
        cell(c.worst_margin),
        cell(c.tolerance),
    ]
}

fn hopf_lax(cfg: &ExperimentConfig, rep: &mut Reporter) -> Result<(), CliError> {
    let c = &cfg.hopf_lax;
    if c.levels.is_empty() || c.curvatures.is_empty() {
        return Err(CliError::Config("hopf-lax needs levels and curvatures".into()));
    }
    let grid = uniform_lambda_grid(c.lambda_step)?;
    let target = build_target(&cfg.target)?;
    let names = [
        "range",
        "lambda_lipschitz",
        "argmin_distance",
        "lambda_derivative",
        "lambda_derivative_right",
    ];
    let anchors = [
        "−osc u ≤ f_t ≤ 0",
        "|f_t(λ) − f_t(λ')| ≤ e^{−2nk} C_* |λ − λ'|",
        "distance to the argmin set is at most √(C_* t) + h",
        "forward λ-difference of f_t is at least −e^{−2nkλ}(nk/t)L² − C_* Δλ",
        "forward λ-difference of f_t is at least −e^{−2nkλ}(nk/t)L²(λ + Δλ)",
    ];
    let mut violations = [0usize; 5];
    let mut margins = [f64::INFINITY; 5];
    let mut check_rows = Vec::new();
    let mut sup_rows = Vec::new();
    let mut td_rows = Vec::new();
    let finest = *c.levels.iter().max().expect("levels are nonempty");
    for &k in &c.curvatures {
        let mut sup_fractions = Vec::new();
        for &level in &c.levels {
            let mesh = build_mesh(&cfg.domain, level)?;
            let mesh = match mesh.curvature_bound().value() {
                Some(k0) if k0 == k => mesh,
                _ => mesh.with_curvature_bound(k)?,
            };
            let map = if target.is_scalar() {
                let bd = BoundaryData::new(&cfg.boundary, &target, total_angle(cfg, &mesh))?;
                let g: Vec<f64> = mesh
                    .vertices()
                    .iter()
                    .map(|&p| bd.value(p).as_scalar().expect("scalar target"))
                    .collect();
                let sol = solve_scalar_poisson(&mesh, &vec![0.0; mesh.num_vertices()], &g)?;
                MapState::from_scalars(&mesh, &sol.values)?
            } else {
                solve_map(cfg, &mesh, &target, initial_policy(cfg))?.map
            };
            let outer = match c.outer_radius {
                Some(r) => ball_subdomain(&mesh, 0, r),
                None => (0..mesh.num_vertices()).collect(),
            };
            let inner = ball_subdomain(&mesh, 0, c.inner_radius);
            let constants = conelab_core::hopf_lax::HopfLaxConstants::of(&mesh, &map, &outer, &inner)?;
            let t = c.t_fraction * constants.t0;
            let mut hcfg = conelab_core::HopfLaxConfig::new(t, grid.clone(), outer.clone(), inner.clone());
            hcfg.argmin_tol = c.argmin_tol;
            let field = compute_hopf_lax(&mesh, &map, &hcfg)?;
            let props = hopf_lax_property_residuals(&field)?;
            let all = [
                &props.range,
                &props.lambda_lipschitz,
                &props.argmin_distance,
                &props.lambda_derivative,
                &props.lambda_derivative_right,
            ];
            for (i, chk) in all.iter().enumerate() {
                violations[i] += chk.violations;
                margins[i] = margins[i].min(chk.worst_margin);
                check_rows.push(cylinder_row(k, level, names[i], chk));
            }
            let tag = format!("k{k}_level{level}");
            rep.metric(
                format!("nontrivial_fraction_{tag}"),
                props.nontrivial_cells as f64 / props.cells as f64,
            );
            rep.metric(format!("t0_{tag}"), constants.t0);
            rep.metric(format!("c_star_{tag}"), constants.c_star);

            let mut checked = 0;
            let mut bad = 0;
            for &lambda in &c.supersolution_lambdas {
                let j = ((lambda / c.lambda_step).round() as usize).min(grid.len() - 1);
                let s = supersolution_residual(&mesh, &field, j, c.supersolution_c)?;
                checked += s.check.checked;
                bad += s.check.violations;
                sup_rows.push(vec![
                    cell(k),
                    cell(level),
                    cell(s.lambda),
                    cell(s.check.checked),
                    cell(s.check.violations),
                    cell(s.excluded),
                    cell(s.check.worst_margin),
                    cell(s.check.tolerance),
                ]);
            }
            sup_fractions.push(if checked == 0 { 0.0 } else { bad as f64 / checked as f64 });

            if level == finest {
                let mut fcsv = Vec::new();
                field.write_csv(&mut fcsv)?;
                rep.text(&format!("field_k{k}.csv"), &String::from_utf8_lossy(&fcsv))?;

                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let probes: Vec<usize> = (0..c.probes).map(|_| inner[rng.gen_range(0..inner.len())]).collect();
                let room = (constants.t0 - t).min(t);
                let steps: Vec<f64> = c.time_steps.iter().map(|f| f * room).collect();
                let rows = time_derivative_residual(&mesh, &map, &outer, &inner, &probes, 0.5, t, &steps)?;
                let tol = c.time_c * constants.c_star * mesh.mesh_spacing();
                let smallest = steps.iter().copied().fold(f64::INFINITY, f64::min);
                let at_smallest: Vec<f64> = rows.iter().filter(|r| r.s == smallest).map(|r| r.residual).collect();
                let pass = at_smallest.iter().filter(|&&r| r <= tol).count() as f64 / at_smallest.len().max(1) as f64;
                rep.check(Check::at_least(
                    &format!("time_derivative_k{k}"),
                    "forward t-difference of v = −f_t is at most Lip²u + |∇⁺v|²",
                    "fraction of probes within tolerance C_*·h at the smallest step",
                    pass,
                    c.probe_pass_fraction,
                ));
                for r in rows {
                    td_rows.push(vec![
                        cell(k),
                        cell(r.vertex),
                        cell(r.s),
                        cell(r.lhs),
                        cell(r.lip_sq),
                        cell(r.grad_plus_sq),
                        cell(r.residual),
                        cell(tol),
                    ]);
                }
            }
        }
        rep.check(Check::at_most(
            &format!("supersolution_k{k}"),
            "f_t is a discrete super-solution of Δf = −e^{−2nkλ}(nk/t)L²",
            "violation fraction at the finest level",
            *sup_fractions.last().expect("levels are nonempty"),
            c.max_violation_fraction,
        ));
        rep.check(Check::at_most(
            &format!("supersolution_trend_k{k}"),
            "super-solution violation fraction does not grow under refinement",
            "largest increase between consecutive levels",
            nonincreasing(&sup_fractions),
            0.0,
        ));
    }
    for i in 0..names.len() {
        rep.check(Check::new(
            names[i],
            anchors[i],
            "violations over all cells, levels and curvatures",
            violations[i] as f64,
            0.0,
            violations[i] == 0,
        ));
        rep.metric(format!("worst_margin_{}", names[i]), margins[i]);
    }
    rep.table(
        "hopf_lax_checks.csv",
        &[
            "curvature",
            "level",
            "check",
            "checked",
            "violations",
            "worst_margin",
            "tolerance",
        ],
        check_rows,
    )?;
    rep.table(
        "supersolution.csv",
        &[
            "curvature",
            "level",
            "lambda",
            "checked",
            "violations",
            "excluded",
            "worst_margin",
            "tolerance",
        ],
        sup_rows,
    )?;
    rep.table(
        "time_derivative.csv",
        &[
            "curvature",
            "vertex",
            "s",
            "lhs",
            "lip_sq",
            "grad_plus_sq",
            "residual",
            "tolerance",
        ],
        td_rows,
    )
}
