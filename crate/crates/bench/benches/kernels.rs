use std::hint::black_box;

use conelab_bench::{cone, harmonic};
use conelab_core::energy::{approx_energy_density_field, graph_dirichlet_energy, BallQuadrature};
use conelab_core::hopf_lax::{compute_hopf_lax, uniform_lambda_grid, HopfLaxConstants};
use conelab_core::solver::{ball_subdomain, solve_dirichlet, solve_scalar_poisson};
use conelab_core::{
    ConeSpec, DirichletProblem, DomainMesh, HopfLaxConfig, MetricTree, NpcTarget, SolverOptions, TargetPoint,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mesh_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("mesh_build");
    for level in [1u32, 2, 3] {
        let spec = ConeSpec::new(3.0 * std::f64::consts::PI, 1.0, level);
        g.bench_with_input(BenchmarkId::from_parameter(level), &spec, |b, s| {
            b.iter(|| DomainMesh::build_cone(black_box(s)).unwrap())
        });
    }
    g.finish();
}

fn scalar_solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("scalar_solve");
    g.sample_size(10);
    for level in [1u32, 2] {
        let mesh = cone(2.0, level);
        let g_data: Vec<f64> = mesh.vertices().iter().map(|p| p.phi.cos()).collect();
        g.bench_with_input(BenchmarkId::new("cg", level), &mesh, |b, m| {
            b.iter(|| solve_scalar_poisson(m, &vec![0.0; m.num_vertices()], &g_data).unwrap())
        });
        let problem =
            DirichletProblem::from_boundary_fn(&mesh, NpcTarget::real_line(), |p| TargetPoint::scalar(p.phi.cos()))
                .unwrap();
        g.bench_with_input(BenchmarkId::new("gauss_seidel", level), &problem, |b, p| {
            b.iter(|| solve_dirichlet(p, &SolverOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn tripod_solve(c: &mut Criterion) {
    let mesh = cone(2.0, 1);
    let target = NpcTarget::Tree(MetricTree::tripod(1.0).unwrap());
    let problem = DirichletProblem::from_boundary_fn(&mesh, target, |p| {
        let s = 3.0 * p.phi / (2.0 * std::f64::consts::PI);
        let leg = (s.floor() as usize).min(2);
        TargetPoint::tree(leg, 1.0 - (1.0 - 2.0 * (s - leg as f64)).abs())
    })
    .unwrap();
    let mut g = c.benchmark_group("tripod_solve");
    g.sample_size(10);
    g.bench_function("level1", |b| {
        b.iter(|| solve_dirichlet(&problem, &SolverOptions::default()).unwrap())
    });
    g.finish();
}

fn energies(c: &mut Criterion) {
    let mesh = cone(2.0, 2);
    let map = harmonic(&mesh, 2.0);
    let h = mesh.mesh_spacing();
    c.bench_function("graph_energy_level2", |b| {
        b.iter(|| graph_dirichlet_energy(&mesh, black_box(&map)))
    });
    let mut g = c.benchmark_group("approx_density_level2");
    g.sample_size(10);
    for quad in [BallQuadrature::Lumped, BallQuadrature::RimWeighted] {
        g.bench_function(format!("{quad:?}"), |b| {
            b.iter(|| approx_energy_density_field(&mesh, &map, 2.0, 4.0 * h, quad).unwrap())
        });
    }
    g.finish();
}

fn barycenters(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = c.benchmark_group("barycenter");
    for target in [
        NpcTarget::Euclidean { dim: 3 },
        NpcTarget::HyperbolicPlane,
        NpcTarget::Tree(MetricTree::tripod(1.0).unwrap()),
    ] {
        let pts: Vec<(TargetPoint, f64)> = (0..6).map(|_| (target.random_point(&mut rng, 2.0), 1.0)).collect();
        g.bench_function(target.label(), |b| {
            b.iter(|| target.weighted_barycenter(black_box(&pts), 1e-10).unwrap())
        });
    }
    g.finish();
}

fn hopf_lax_field(c: &mut Criterion) {
    let mesh = cone(2.0, 2).with_curvature_bound(-1.0).unwrap();
    let map = harmonic(&mesh, 1.0);
    let outer = ball_subdomain(&mesh, 0, 0.9);
    let inner = ball_subdomain(&mesh, 0, 0.25);
    let k = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
    let cfg = HopfLaxConfig::new(0.9 * k.t0, uniform_lambda_grid(0.02).unwrap(), outer, inner);
    let mut g = c.benchmark_group("hopf_lax");
    g.sample_size(10);
    g.bench_function("level2_k-1", |b| {
        b.iter(|| compute_hopf_lax(&mesh, &map, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    mesh_build,
    scalar_solvers,
    tripod_solve,
    energies,
    barycenters,
    hopf_lax_field
);
criterion_main!(benches);
