//! Shared fixtures for the benchmarks.

use conelab_core::solver::solve_scalar_poisson;
use conelab_core::{ConeSpec, DomainMesh, MapState};

/// Cone of angle `angle_pi · π` at `level` with the default ring count.
pub fn cone(angle_pi: f64, level: u32) -> DomainMesh {
    DomainMesh::build_cone(&ConeSpec::new(angle_pi * std::f64::consts::PI, 1.0, level)).expect("valid cone")
}

/// Harmonic function with boundary data `cos(2φ/angle_pi)`.
pub fn harmonic(mesh: &DomainMesh, angle_pi: f64) -> MapState {
    let alpha = 2.0 / angle_pi;
    let g: Vec<f64> = mesh.vertices().iter().map(|p| (alpha * p.phi).cos()).collect();
    let sol = solve_scalar_poisson(mesh, &vec![0.0; mesh.num_vertices()], &g).expect("solvable");
    MapState::from_scalars(mesh, &sol.values).expect("matching length")
}
