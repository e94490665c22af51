//! Discrete harmonic maps and the scalar Dirichlet problem.
//!
//! A harmonic map minimizes the graph energy `Σ_edges w_ij d²(u_i, u_j)`
//! with frozen boundary values. Each interior value is repeatedly replaced
//! by the weighted barycenter of its neighbors' values. An over-relaxed step
//! along the geodesic through the barycenter is taken when it lowers the
//! local energy; the plain barycenter is used otherwise, so the total energy
//! never increases.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{ChartPoint, DomainMesh};
use crate::energy::{csv_error, graph_dirichlet_energy, MapState};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgReport, CsrMatrix};
use crate::target::{NpcTarget, TargetPoint};

/// How interior values are initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitPolicy {
    /// The barycenter of all boundary values, at every interior vertex.
    BoundaryBarycenter,
    /// Independent random points, reproducible from the seed.
    Random { seed: u64 },
}

/// Update schedule of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// In-place updates in vertex-index order.
    GaussSeidel,
    /// Simultaneous updates from a snapshot; runs in parallel.
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop once the largest move of a sweep is below `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in `[1, 2)`; `None` picks one from the mesh
    /// spacing. Ignored in Jacobi mode.
    pub over_relaxation: Option<f64>,
    pub mode: SweepMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 100_000,
            over_relaxation: None,
            mode: SweepMode::GaussSeidel,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_over_relaxation(mut self, omega: f64) -> Self {
        self.over_relaxation = Some(omega);
        self
    }

    pub fn with_mode(mut self, mode: SweepMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Diagnostics of a harmonic-map solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Total energy before the first sweep and after every sweep.
    pub energy_trace: Vec<f64>,
    /// Largest vertex move of every sweep.
    pub displacement_trace: Vec<f64>,
    pub final_displacement: f64,
    pub converged: bool,
    pub over_relaxation: f64,
}

impl SolverReport {
    /// Whether the energy trace never increases by more than `slack`
    /// relative to its starting value.
    pub fn energy_nonincreasing(&self, slack: f64) -> bool {
        let scale = self.energy_trace.first().copied().unwrap_or(0.0).abs().max(1.0);
        self.energy_trace.windows(2).all(|w| w[1] <= w[0] + slack * scale)
    }

    /// CSV with columns `iteration, energy, displacement`; row 0 holds the
    /// initial energy and an empty displacement.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "energy", "displacement"])
            .map_err(csv_error)?;
        for (i, e) in self.energy_trace.iter().enumerate() {
            let d = if i == 0 {
                String::new()
            } else {
                self.displacement_trace[i - 1].to_string()
            };
            w.write_record([i.to_string(), e.to_string(), d]).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Minimize the graph energy among maps with prescribed boundary values.
#[derive(Clone, Debug)]
pub struct DirichletProblem<'a> {
    mesh: &'a DomainMesh,
    target: NpcTarget,
    boundary: Vec<Option<TargetPoint>>,
    init: InitPolicy,
}

impl<'a> DirichletProblem<'a> {
    /// `data` must assign a value to every boundary vertex and to no other.
    pub fn new(mesh: &'a DomainMesh, target: NpcTarget, data: Vec<(usize, TargetPoint)>) -> Result<Self> {
        let mut boundary = vec![None; mesh.num_vertices()];
        for (v, p) in data {
            if v >= mesh.num_vertices() {
                return Err(Error::OutOfDomain(format!("vertex {v}")));
            }
            if !mesh.is_boundary(v) {
                return Err(Error::InvalidSpec(format!(
                    "boundary data given at interior vertex {v}"
                )));
            }
            target.check(&p)?;
            boundary[v] = Some(p);
        }
        if let Some(v) = (0..mesh.num_vertices()).find(|&v| mesh.is_boundary(v) && boundary[v].is_none()) {
            return Err(Error::InvalidSpec(format!("no boundary data at vertex {v}")));
        }
        if mesh.boundary_vertices().is_empty() {
            return Err(Error::InvalidSpec("domain has no boundary".into()));
        }
        if let Some(e) = mesh.edges().iter().find(|e| !(e.weight > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "edge ({}, {}) has nonpositive weight {}",
                e.i, e.j, e.weight
            )));
        }
        Ok(DirichletProblem {
            mesh,
            target,
            boundary,
            init: InitPolicy::BoundaryBarycenter,
        })
    }

    /// Boundary data from a function of the chart point.
    pub fn from_boundary_fn(
        mesh: &'a DomainMesh,
        target: NpcTarget,
        f: impl Fn(ChartPoint) -> TargetPoint,
    ) -> Result<Self> {
        let data = mesh
            .boundary_vertices()
            .into_iter()
            .map(|v| (v, f(mesh.vertex(v))))
            .collect();
        DirichletProblem::new(mesh, target, data)
    }

    pub fn with_init(mut self, init: InitPolicy) -> Self {
        self.init = init;
        self
    }

    pub fn mesh(&self) -> &DomainMesh {
        self.mesh
    }

    pub fn target(&self) -> &NpcTarget {
        &self.target
    }

    pub fn boundary_value(&self, v: usize) -> Option<&TargetPoint> {
        self.boundary[v].as_ref()
    }

    /// Complete map given by the initializer.
    pub fn initial_state(&self) -> Result<MapState> {
        let data: Vec<(TargetPoint, f64)> = self.boundary.iter().flatten().map(|p| (p.clone(), 1.0)).collect();
        let values = match self.init {
            InitPolicy::BoundaryBarycenter => {
                let c = self.target.weighted_barycenter(&data, 1e-12)?;
                self.fill(|_| c.clone())
            }
            InitPolicy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = data.iter().map(|(p, _)| magnitude(p)).fold(1.0, f64::max);
                self.fill(|_| self.target.random_point(&mut rng, scale))
            }
        };
        MapState::new(self.mesh, self.target.clone(), values)
    }

    fn fill(&self, mut interior: impl FnMut(usize) -> TargetPoint) -> Vec<TargetPoint> {
        (0..self.mesh.num_vertices())
            .map(|v| match &self.boundary[v] {
                Some(p) => p.clone(),
                None => interior(v),
            })
            .collect()
    }
}

fn magnitude(p: &TargetPoint) -> f64 {
    match p {
        TargetPoint::Euclidean { coords } => coords.iter().map(|c| c.abs()).fold(0.0, f64::max),
        TargetPoint::Hyperbolic { coords } => coords[1].abs().max(coords[2].abs()),
        TargetPoint::Tree(_) => 0.0,
    }
}

/// Over-relaxation factor for Laplace-type sweeps on a domain of radius `R`
/// with spacing `h`: `2 / (1 + 1.7 h / R)`.
pub fn default_over_relaxation(mesh: &DomainMesh) -> f64 {
    let ratio = mesh.mesh_spacing() / mesh.radius().max(mesh.mesh_spacing());
    (2.0 / (1.0 + 1.7 * ratio)).clamp(1.0, 1.98)
}

/// Solve from the problem's initializer.
pub fn solve_dirichlet(problem: &DirichletProblem, opts: &SolverOptions) -> Result<(MapState, SolverReport)> {
    let start = problem.initial_state()?;
    solve_dirichlet_from(problem, start, opts)
}

/// Solve starting from a given complete map.
pub fn solve_dirichlet_from(
    problem: &DirichletProblem,
    start: MapState,
    opts: &SolverOptions,
) -> Result<(MapState, SolverReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Range(format!(
            "solver tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if start.len() != problem.mesh.num_vertices() || start.target() != &problem.target {
        return Err(Error::TypeMismatch("starting map does not match the problem".into()));
    }
    let omega = match opts.mode {
        SweepMode::Jacobi => 1.0,
        SweepMode::GaussSeidel => opts
            .over_relaxation
            .unwrap_or_else(|| default_over_relaxation(problem.mesh)),
    };
    if !(1.0..2.0).contains(&omega) {
        return Err(Error::Range(format!("over-relaxation must lie in [1, 2), got {omega}")));
    }
    let mut map = start;
    for v in 0..problem.mesh.num_vertices() {
        if let Some(p) = &problem.boundary[v] {
            map.set_unchecked(v, p.clone());
        }
    }
    match &problem.target {
        NpcTarget::Euclidean { dim } => solve_euclidean(problem, map, *dim, omega, opts),
        _ => solve_general(problem, map, omega, opts),
    }
}

fn new_report(omega: f64, initial_energy: f64) -> SolverReport {
    SolverReport {
        iterations: 0,
        energy_trace: vec![initial_energy],
        displacement_trace: Vec::new(),
        final_displacement: f64::INFINITY,
        converged: false,
        over_relaxation: omega,
    }
}

/// Euclidean targets on flat coordinate arrays; the barycenter is the
/// weighted mean and the local energy is quadratic, so any `ω ∈ [1, 2)`
/// decreases it.
fn solve_euclidean(
    problem: &DirichletProblem,
    map: MapState,
    dim: usize,
    omega: f64,
    opts: &SolverOptions,
) -> Result<(MapState, SolverReport)> {
    let mesh = problem.mesh;
    let mut x: Vec<f64> = Vec::with_capacity(dim * mesh.num_vertices());
    for p in map.values() {
        if let TargetPoint::Euclidean { coords } = p {
            x.extend_from_slice(coords);
        }
    }
    let interior = mesh.interior_vertices();
    let energy = |x: &[f64]| -> f64 {
        mesh.edges()
            .iter()
            .map(|e| {
                let d2: f64 = (0..dim).map(|k| (x[e.i * dim + k] - x[e.j * dim + k]).powi(2)).sum();
                e.weight * d2
            })
            .sum()
    };
    let mut report = new_report(omega, energy(&x));
    let mut bary = vec![0.0; dim];
    for it in 1..=opts.max_iter {
        let mut max_move: f64 = 0.0;
        match opts.mode {
            SweepMode::GaussSeidel => {
                for &v in &interior {
                    bary.iter_mut().for_each(|b| *b = 0.0);
                    let mut total = 0.0;
                    for n in mesh.neighbors(v) {
                        total += n.weight;
                        for k in 0..dim {
                            bary[k] += n.weight * x[n.vertex * dim + k];
                        }
                    }
                    let mut mv = 0.0;
                    for k in 0..dim {
                        let old = x[v * dim + k];
                        let new = old + omega * (bary[k] / total - old);
                        mv += (new - old).powi(2);
                        x[v * dim + k] = new;
                    }
                    max_move = max_move.max(mv.sqrt());
                }
            }
            SweepMode::Jacobi => {
                let snapshot = x.clone();
                let updates: Vec<(usize, Vec<f64>)> = interior
                    .par_iter()
                    .map(|&v| {
                        let mut b = vec![0.0; dim];
                        let mut total = 0.0;
                        for n in mesh.neighbors(v) {
                            total += n.weight;
                            for k in 0..dim {
                                b[k] += n.weight * snapshot[n.vertex * dim + k];
                            }
                        }
                        (v, b.into_iter().map(|s| s / total).collect())
                    })
                    .collect();
                for (v, b) in updates {
                    let mv: f64 = (0..dim).map(|k| (b[k] - x[v * dim + k]).powi(2)).sum();
                    max_move = max_move.max(mv.sqrt());
                    x[v * dim..(v + 1) * dim].copy_from_slice(&b);
                }
            }
        }
        report.iterations = it;
        report.energy_trace.push(energy(&x));
        report.displacement_trace.push(max_move);
        report.final_displacement = max_move;
        if max_move < opts.tol {
            report.converged = true;
            break;
        }
    }
    let values = x.chunks(dim).map(TargetPoint::euclidean).collect();
    Ok((MapState::new(mesh, problem.target.clone(), values)?, report))
}

fn local_energy(target: &NpcTarget, p: &TargetPoint, neighbors: &[(TargetPoint, f64)]) -> f64 {
    neighbors.iter().map(|(q, w)| w * target.dist(p, q).powi(2)).sum()
}

fn solve_general(
    problem: &DirichletProblem,
    mut map: MapState,
    omega: f64,
    opts: &SolverOptions,
) -> Result<(MapState, SolverReport)> {
    let mesh = problem.mesh;
    let target = &problem.target;
    let interior = mesh.interior_vertices();
    let inner_tol = (opts.tol * 1e-2).max(1e-15);
    let mut report = new_report(omega, graph_dirichlet_energy(mesh, &map).0);
    let gather = |map: &MapState, v: usize| -> (Vec<(TargetPoint, f64)>, f64) {
        let nb: Vec<(TargetPoint, f64)> = mesh
            .neighbors(v)
            .iter()
            .map(|n| (map.value(n.vertex).clone(), n.weight))
            .collect();
        let total = nb.iter().map(|(_, w)| w).sum();
        (nb, total)
    };
    for it in 1..=opts.max_iter {
        let mut max_move: f64 = 0.0;
        match opts.mode {
            SweepMode::GaussSeidel => {
                for &v in &interior {
                    let (nb, total) = gather(&map, v);
                    let old = map.value(v).clone();
                    let bary = target.barycenter_unchecked(&nb, total, inner_tol);
                    let mut new = bary;
                    if omega > 1.0 {
                        let ext = target.extrapolate(&old, &new, omega);
                        if local_energy(target, &ext, &nb) <= local_energy(target, &old, &nb) {
                            new = ext;
                        }
                    }
                    max_move = max_move.max(target.dist(&old, &new));
                    map.set_unchecked(v, new);
                }
            }
            SweepMode::Jacobi => {
                let updates: Vec<(usize, TargetPoint)> = interior
                    .par_iter()
                    .map(|&v| {
                        let (nb, total) = gather(&map, v);
                        (v, target.barycenter_unchecked(&nb, total, inner_tol))
                    })
                    .collect();
                for (v, p) in updates {
                    max_move = max_move.max(target.dist(map.value(v), &p));
                    map.set_unchecked(v, p);
                }
            }
        }
        report.iterations = it;
        report.energy_trace.push(graph_dirichlet_energy(mesh, &map).0);
        report.displacement_trace.push(max_move);
        report.final_displacement = max_move;
        if max_move < opts.tol {
            report.converged = true;
            break;
        }
    }
    Ok((map, report))
}

/// Largest energy decrease available from replacing a single interior value
/// by the barycenter of its neighbors. Zero at an exact discrete minimizer.
pub fn max_single_vertex_decrease(mesh: &DomainMesh, map: &MapState) -> f64 {
    let target = map.target();
    mesh.interior_vertices()
        .par_iter()
        .map(|&v| {
            let nb: Vec<(TargetPoint, f64)> = mesh
                .neighbors(v)
                .iter()
                .map(|n| (map.value(n.vertex).clone(), n.weight))
                .collect();
            let total = nb.iter().map(|(_, w)| w).sum();
            let b = target.barycenter_unchecked(&nb, total, 1e-14);
            (local_energy(target, map.value(v), &nb) - local_energy(target, &b, &nb)).max(0.0)
        })
        .reduce(|| 0.0, f64::max)
}

/// Weighted graph Laplacian `L f(x) = Σ_y w_xy (f(y) − f(x))` at every vertex.
pub fn graph_laplacian(mesh: &DomainMesh, f: &[f64]) -> Vec<f64> {
    (0..mesh.num_vertices())
        .map(|x| mesh.neighbors(x).iter().map(|n| n.weight * (f[n.vertex] - f[x])).sum())
        .collect()
}

/// Solution of the scalar Dirichlet problem.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSolution {
    pub values: Vec<f64>,
    /// `max_x |L f(x) − μ_x h(x)|` over interior vertices.
    pub max_residual: f64,
    pub cg: CgReport,
}

/// Solve `L f = μ·h` at interior vertices with `f = g` on the boundary.
/// `h` and `g` are full vertex arrays; `g` is read only on the boundary and
/// `h` only in the interior.
pub fn solve_scalar_poisson(mesh: &DomainMesh, h: &[f64], g: &[f64]) -> Result<PoissonSolution> {
    let n = mesh.num_vertices();
    if h.len() != n || g.len() != n {
        return Err(Error::InvalidSpec(
            "source and boundary arrays must cover every vertex".into(),
        ));
    }
    let interior = mesh.interior_vertices();
    check_interior_reaches_boundary(mesh)?;
    let mut index = vec![usize::MAX; n];
    for (k, &v) in interior.iter().enumerate() {
        index[v] = k;
    }
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; interior.len()];
    for (k, &v) in interior.iter().enumerate() {
        let mut diag = 0.0;
        rhs[k] = -mesh.measure(v) * h[v];
        for nb in mesh.neighbors(v) {
            diag += nb.weight;
            if mesh.is_boundary(nb.vertex) {
                rhs[k] += nb.weight * g[nb.vertex];
            } else {
                triplets.push((k, index[nb.vertex], -nb.weight));
            }
        }
        triplets.push((k, k, diag));
    }
    let a = CsrMatrix::from_triplets(interior.len(), triplets);
    let mut x = vec![0.0; interior.len()];
    let mut values: Vec<f64> = (0..n).map(|v| if mesh.is_boundary(v) { g[v] } else { 0.0 }).collect();
    let mut tol = 1e-12;
    loop {
        let cg = conjugate_gradient(&a, &rhs, &mut x, tol, 20 * interior.len().max(100))?;
        for (k, &v) in interior.iter().enumerate() {
            values[v] = x[k];
        }
        let lf = graph_laplacian(mesh, &values);
        let max_residual = interior
            .iter()
            .map(|&v| (lf[v] - mesh.measure(v) * h[v]).abs())
            .fold(0.0, f64::max);
        if max_residual <= 1e-10 || tol <= 1e-15 {
            return Ok(PoissonSolution {
                values,
                max_residual,
                cg,
            });
        }
        tol *= 0.1;
    }
}

/// Every connected component of the interior must touch the boundary.
fn check_interior_reaches_boundary(mesh: &DomainMesh) -> Result<()> {
    let n = mesh.num_vertices();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = mesh.boundary_vertices().into_iter().collect();
    for &b in &queue {
        seen[b] = true;
    }
    while let Some(u) = queue.pop_front() {
        for nb in mesh.neighbors(u) {
            if !seen[nb.vertex] && nb.weight != 0.0 {
                seen[nb.vertex] = true;
                queue.push_back(nb.vertex);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(v) => Err(Error::Topology(format!(
            "interior vertex {v} is not connected to the boundary; the system is singular"
        ))),
        None => Ok(()),
    }
}

/// Closed-form boundary data helpers on a cone of total angle `θ`.
pub fn cos_alpha_phi(theta: f64) -> impl Fn(ChartPoint) -> f64 {
    let alpha = 2.0 * PI / theta;
    move |p: ChartPoint| (alpha * p.phi).cos()
}

/// `min_{∂Ω'} f − min_{Ω'} f` for a vertex set `Ω'`. Its boundary `∂Ω'` is
/// formed by the members that lie on the domain boundary or have a neighbor
/// outside the set; `Ω'` proper is the remaining members.
pub fn maximum_principle_residual(mesh: &DomainMesh, f: &[f64], subdomain: &[usize]) -> Result<f64> {
    if subdomain.is_empty() {
        return Err(Error::Configuration("empty subdomain".into()));
    }
    let mut member = vec![false; mesh.num_vertices()];
    for &v in subdomain {
        if v >= mesh.num_vertices() {
            return Err(Error::OutOfDomain(format!("vertex {v}")));
        }
        member[v] = true;
    }
    let mut min_boundary = f64::INFINITY;
    let mut min_inside = f64::INFINITY;
    for &v in subdomain {
        let on_edge = mesh.is_boundary(v) || mesh.neighbors(v).iter().any(|n| !member[n.vertex]);
        if on_edge {
            min_boundary = min_boundary.min(f[v]);
        } else {
            min_inside = min_inside.min(f[v]);
        }
    }
    if !min_inside.is_finite() || !min_boundary.is_finite() {
        return Err(Error::Configuration(
            "subdomain needs both interior and boundary vertices".into(),
        ));
    }
    Ok(min_boundary - min_inside)
}

/// Vertices within `radius` of vertex `center`, as a subdomain.
pub fn ball_subdomain(mesh: &DomainMesh, center: usize, radius: f64) -> Vec<usize> {
    mesh.closed_ball(center, radius).into_iter().map(|(v, _)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConeSpec;
    use crate::target::MetricTree;

    #[test]
    fn constant_boundary_gives_constant_map_in_one_sweep() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let target = NpcTarget::HyperbolicPlane;
        let c = TargetPoint::hyperbolic_from_plane(0.4, -0.1);
        let problem = DirichletProblem::from_boundary_fn(&mesh, target.clone(), |_| c.clone()).unwrap();
        let (map, report) = solve_dirichlet(&problem, &SolverOptions::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert!(map.values().iter().all(|p| target.dist(p, &c) < 1e-12));
    }

    #[test]
    fn disk_cos_phi_is_reproduced() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(2)).unwrap();
        let problem =
            DirichletProblem::from_boundary_fn(&mesh, NpcTarget::real_line(), |p| TargetPoint::scalar(p.phi.cos()))
                .unwrap();
        let (map, report) = solve_dirichlet(&problem, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert!(report.energy_nonincreasing(1e-12));
        let err = (0..mesh.num_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                (map.value(v).as_scalar().unwrap() - p.r * p.phi.cos()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn poisson_reproduces_linear_and_constant_data() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let n = mesh.num_vertices();
        let g: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| 2.0 * p.to_xy()[0] - p.to_xy()[1] + 0.5)
            .collect();
        let sol = solve_scalar_poisson(&mesh, &vec![0.0; n], &g).unwrap();
        assert!(sol.max_residual <= 1e-10);
        for (a, b) in sol.values.iter().zip(&g) {
            assert!((a - b).abs() < 1e-9);
        }
        let sol = solve_scalar_poisson(&mesh, &vec![0.0; n], &vec![3.0; n]).unwrap();
        assert!(sol.values.iter().all(|&f| (f - 3.0).abs() < 1e-10));
    }

    #[test]
    fn scalar_solvers_agree() {
        let mesh = DomainMesh::build_cone(&ConeSpec::new(3.0 * PI, 1.0, 1)).unwrap();
        let g = cos_alpha_phi(3.0 * PI);
        let problem =
            DirichletProblem::from_boundary_fn(&mesh, NpcTarget::real_line(), |p| TargetPoint::scalar(g(p))).unwrap();
        let (map, _) = solve_dirichlet(&problem, &SolverOptions::default().with_tol(1e-12)).unwrap();
        let gv: Vec<f64> = mesh.vertices().iter().map(|&p| g(p)).collect();
        let sol = solve_scalar_poisson(&mesh, &vec![0.0; mesh.num_vertices()], &gv).unwrap();
        let u = map.scalars().unwrap();
        let diff = u
            .iter()
            .zip(&sol.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn tripod_map_with_data_in_one_leg_stays_there() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let tree = NpcTarget::Tree(MetricTree::tripod(2.0).unwrap());
        let offset = |p: ChartPoint| 1.0 + 0.5 * p.phi.cos();
        let problem = DirichletProblem::from_boundary_fn(&mesh, tree, |p| TargetPoint::tree(1, offset(p))).unwrap();
        let (map, report) = solve_dirichlet(&problem, &SolverOptions::default().with_tol(1e-11)).unwrap();
        assert!(report.converged);
        assert!(report.energy_nonincreasing(1e-12));
        let g: Vec<f64> = mesh.vertices().iter().map(|&p| offset(p)).collect();
        let scalar = solve_scalar_poisson(&mesh, &vec![0.0; mesh.num_vertices()], &g).unwrap();
        for v in 0..mesh.num_vertices() {
            let tp = map.value(v).as_tree().unwrap();
            assert_eq!(tp.edge, 1);
            assert!((tp.offset - scalar.values[v]).abs() < 1e-8);
        }
    }

    #[test]
    fn jacobi_mode_converges_to_the_same_map() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(0)).unwrap();
        let problem = DirichletProblem::from_boundary_fn(&mesh, NpcTarget::Euclidean { dim: 2 }, |p| {
            TargetPoint::euclidean(&[p.phi.cos(), p.phi.sin().powi(2)])
        })
        .unwrap();
        let (a, _) = solve_dirichlet(&problem, &SolverOptions::default().with_tol(1e-12)).unwrap();
        let (b, rb) = solve_dirichlet(
            &problem,
            &SolverOptions::default().with_tol(1e-12).with_mode(SweepMode::Jacobi),
        )
        .unwrap();
        assert!(rb.converged);
        assert!(a.max_distance(&b) < 1e-9);
    }

    #[test]
    fn max_iter_returns_unconverged_iterate() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let problem =
            DirichletProblem::from_boundary_fn(&mesh, NpcTarget::real_line(), |p| TargetPoint::scalar(p.phi.cos()))
                .unwrap();
        let (_, report) = solve_dirichlet(&problem, &SolverOptions::default().with_max_iter(3)).unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations, 3);
    }

    #[test]
    fn missing_boundary_data_is_rejected() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(0)).unwrap();
        let b = mesh.boundary_vertices();
        let data = vec![(b[0], TargetPoint::scalar(0.0))];
        assert!(DirichletProblem::new(&mesh, NpcTarget::real_line(), data).is_err());
        let data = vec![(0, TargetPoint::scalar(0.0))];
        assert!(DirichletProblem::new(&mesh, NpcTarget::real_line(), data).is_err());
    }

    #[test]
    fn maximum_principle_examples() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let all: Vec<usize> = (0..mesh.num_vertices()).collect();
        assert_eq!(
            maximum_principle_residual(&mesh, &vec![1.0; all.len()], &all).unwrap(),
            0.0
        );
        let f: Vec<f64> = mesh.vertices().iter().map(|p| 1.0 - p.r * p.r).collect();
        assert!(maximum_principle_residual(&mesh, &f, &all).unwrap() <= 0.0);
        assert!(maximum_principle_residual(&mesh, &f, &[]).is_err());
    }
}
