//! Lipschitz and Hölder estimates of maps, and residuals of the
//! subharmonicity and mean-value inequalities satisfied by harmonic maps.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{ComparisonGeometry, DomainMesh};
use crate::energy::{graph_density_at, graph_dirichlet_energy, graph_energy_on, MapState};
use crate::error::{Error, Result};
use crate::solver::SolverReport;
use crate::target::TargetPoint;

/// Pairs closer than this many mesh spacings are left out of ratio suprema.
pub const MIN_PAIR_SPACINGS: f64 = 2.0;

/// `sup d(u(x), u(y)) / |xy|` over decreasing radii.
#[derive(Clone, Debug, PartialEq)]
pub struct LipProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl LipProfile {
    /// Estimate at the smallest radius.
    pub fn lip(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }
}

/// Pointwise Lipschitz constant of `map` at `x`, as a profile over `radii`
/// (which must decrease, each at least twice the mesh spacing).
pub fn pointwise_lipschitz(mesh: &DomainMesh, map: &MapState, x: usize, radii: &[f64]) -> Result<LipProfile> {
    if x >= mesh.num_vertices() {
        return Err(Error::OutOfDomain(format!("vertex {x}")));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Configuration(format!(
            "radii must be nonempty and decreasing, got {radii:?}"
        )));
    }
    let h = mesh.mesh_spacing();
    if let Some(&r) = radii.iter().find(|&&r| r < 2.0 * h * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "radius {r} is below twice the mesh spacing {h}"
        )));
    }
    let ball = mesh.closed_ball(x, radii[0]);
    let mut values = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best: f64 = 0.0;
        let mut found = false;
        for &(y, d) in &ball {
            if y != x && d <= r && d > 0.0 {
                found = true;
                best = best.max(map.dist(x, y) / d);
            }
        }
        if !found {
            return Err(Error::Resolution(format!("no vertex within {r} of vertex {x}")));
        }
        values.push(best);
    }
    Ok(LipProfile {
        radii: radii.to_vec(),
        values,
    })
}

/// `sup_{y ∈ B̄_x(r), y ≠ x} d(u(x), u(y)) / |xy|` at every vertex.
pub fn lipschitz_field(mesh: &DomainMesh, map: &MapState, r: f64) -> Vec<f64> {
    (0..mesh.num_vertices())
        .into_par_iter()
        .map(|x| {
            mesh.closed_ball(x, r)
                .iter()
                .filter(|&&(y, d)| y != x && d > 0.0)
                .map(|&(y, d)| map.dist(x, y) / d)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Diameter of the image of the closed ball `B̄_center(r)`.
pub fn oscillation(mesh: &DomainMesh, map: &MapState, center: usize, r: f64) -> f64 {
    let pts: Vec<&TargetPoint> = mesh.closed_ball(center, r).iter().map(|&(v, _)| map.value(v)).collect();
    map.target().diameter(&pts)
}

/// Diameter of the image of a vertex set.
pub fn oscillation_on(map: &MapState, vertices: &[usize]) -> f64 {
    let pts: Vec<&TargetPoint> = vertices.iter().map(|&v| map.value(v)).collect();
    map.target().diameter(&pts)
}

/// Least-squares fit of `log osc(B_center(r))` against `log r`.
#[derive(Clone, Debug, PartialEq)]
pub struct HolderFit {
    /// Fitted exponent; `None` when every oscillation vanishes.
    pub alpha: Option<f64>,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
}

pub fn holder_exponent_fit(mesh: &DomainMesh, map: &MapState, center: usize, radii: &[f64]) -> Result<HolderFit> {
    if radii.len() < 4 {
        return Err(Error::Configuration(format!(
            "a Hölder fit needs at least 4 radii, got {}",
            radii.len()
        )));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Range("radii must be positive".into()));
    }
    let oscillations: Vec<f64> = radii.iter().map(|&r| oscillation(mesh, map, center, r)).collect();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&oscillations)
        .filter(|(_, &o)| o > 0.0)
        .map(|(&r, &o)| (r.ln(), o.ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(HolderFit {
            alpha: None,
            residual: 0.0,
            radii: radii.to_vec(),
            oscillations,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(HolderFit {
        alpha: Some(slope),
        residual,
        radii: radii.to_vec(),
        oscillations,
    })
}

/// Both sides of the interior Lipschitz estimate on `B_q(R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    /// `(vertex, sup_y d/|xy|)` over pairs inside `B_q(R/16)`.
    pub lip: Vec<(usize, f64)>,
    /// `[R/16, R]`.
    pub probe_radii: [f64; 2],
    pub osc: f64,
    pub energy: f64,
    pub volume: f64,
    pub pairs: usize,
    pub numerator: f64,
    pub denominator: f64,
    /// `numerator / denominator`, or 0 when both vanish.
    pub ratio: f64,
}

/// `sup_{x,y ∈ B_q(R/16)} d(u(x), u(y))/|xy|` divided by
/// `√(E(B_q(R))/vol(B_q(R))) + osc_{B̄_q(R)} u`. Pairs closer than twice the
/// mesh spacing are skipped.
pub fn main_theorem_ratio(mesh: &DomainMesh, map: &MapState, q: usize, radius: f64) -> Result<LipschitzReport> {
    if q >= mesh.num_vertices() {
        return Err(Error::OutOfDomain(format!("vertex {q}")));
    }
    if 2.0 * radius > mesh.distance_to_boundary(q) * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!(
            "B_q(2R) with R = {radius} leaves the domain"
        )));
    }
    let min_sep = MIN_PAIR_SPACINGS * mesh.mesh_spacing() * (1.0 - 1e-12);
    let inner = mesh.ball(q, radius / 16.0);
    let lip: Vec<(usize, f64)> = inner
        .par_iter()
        .map(|&(x, _)| {
            let best = inner
                .iter()
                .filter_map(|&(y, _)| {
                    let d = mesh.vertex_distance(x, y);
                    (d >= min_sep).then(|| map.dist(x, y) / d)
                })
                .fold(0.0, f64::max);
            (x, best)
        })
        .collect();
    let pairs = inner
        .iter()
        .map(|&(x, _)| {
            inner
                .iter()
                .filter(|&&(y, _)| mesh.vertex_distance(x, y) >= min_sep)
                .count()
        })
        .sum::<usize>()
        / 2;
    let numerator = lip.iter().map(|&(_, l)| l).fold(0.0, f64::max);
    let outer: Vec<usize> = mesh.ball_vertices(q, radius);
    let energy = graph_energy_on(mesh, map, &outer);
    let volume: f64 = outer.iter().map(|&v| mesh.measure(v)).sum();
    let osc = oscillation(mesh, map, q, radius);
    let denominator = (energy / volume).sqrt() + osc;
    let ratio = if numerator == 0.0 {
        0.0
    } else if denominator == 0.0 {
        return Err(Error::Inconsistency(
            "nonconstant map with zero energy and oscillation".into(),
        ));
    } else {
        numerator / denominator
    };
    Ok(LipschitzReport {
        lip,
        probe_radii: [radius / 16.0, radius],
        osc,
        energy,
        volume,
        pairs,
        numerator,
        denominator,
        ratio,
    })
}

/// Fitted `sup_x Lip²(x) / e_graph(x)` over `B_q(radius)`, with `Lip`
/// measured at `lip_radius`.
pub fn lipschitz_energy_constant(
    mesh: &DomainMesh,
    map: &MapState,
    q: usize,
    radius: f64,
    lip_radius: f64,
) -> Result<f64> {
    let (_, density) = graph_dirichlet_energy(mesh, map);
    let mut best: f64 = 0.0;
    for v in mesh.ball_vertices(q, radius) {
        let lip = pointwise_lipschitz(mesh, map, v, &[lip_radius])?.lip();
        let e = density.values[v];
        if e > 0.0 {
            best = best.max(lip * lip / e);
        } else if lip > 0.0 {
            return Err(Error::Inconsistency(format!(
                "vertex {v} has Lip {lip} but zero energy density"
            )));
        }
    }
    Ok(best)
}

/// Which interior pairs the product check visits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairSelection {
    All,
    Sample { count: usize, seed: u64 },
}

/// Violation statistics of a pointwise inequality `value ≥ −tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct InequalityStats {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `value + tol` observed (negative iff violated).
    pub worst_margin: f64,
    /// Locations of violations, as vertex pairs (for single-vertex checks
    /// both entries coincide).
    pub violating: Vec<(usize, usize)>,
}

impl InequalityStats {
    fn new() -> Self {
        InequalityStats {
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            violating: Vec::new(),
        }
    }

    fn record(&mut self, at: (usize, usize), margin: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < 0.0 {
            self.violations += 1;
            self.violating.push(at);
        }
    }

    fn merge(mut self, other: InequalityStats) -> Self {
        self.checked += other.checked;
        self.violations += other.violations;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self.violating.extend(other.violating);
        self
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        }
    }
}

/// Residuals of the two subharmonicity statements for a solved map.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionResidual {
    /// `(L⊕L) d(u(x), u(y)) ≥ −tol` over interior pairs.
    pub product: InequalityStats,
    pub product_tol: f64,
    /// `L(d²(u, P))/μ − 2 e_graph ≥ −tol_h` over interior vertices and probes.
    pub squared_distance: InequalityStats,
    /// Per-vertex minimum over probes of `L(d²(u, P))(x)/μ_x − 2 e_graph(x)`.
    pub squared_distance_field: Vec<f64>,
    /// The constant `c` in `tol_h = c·h·Lip²`.
    pub tol_constant: f64,
}

/// Check `(L⊕L) f ≥ −tol` for `f(x, y) = d(u(x), u(y))` and
/// `L(f_P²) ≥ 2 e_graph − c·h·Lip²` for `f_P = d(u(·), P)`. The product
/// Laplacian is the sum of the measure-normalized Laplacians in each
/// factor. `tol` for the product check is `c_solver · τ · max_x(Σ_y w_xy/μ_x)`,
/// the size of the Laplacian of a perturbation of amplitude `τ`, with `τ`
/// the solver tolerance.
pub fn composition_inequality_residual(
    mesh: &DomainMesh,
    map: &MapState,
    solve: &SolverReport,
    solver_tol: f64,
    probes: &[TargetPoint],
    pairs: PairSelection,
    tol_constant: f64,
) -> Result<CompositionResidual> {
    if !solve.converged || solve.final_displacement >= solver_tol {
        return Err(Error::StaleInput(format!(
            "map is not solved: last displacement {} against tolerance {solver_tol}",
            solve.final_displacement
        )));
    }
    for p in probes {
        map.target().check(p)?;
    }
    let interior = mesh.interior_vertices();
    let h = mesh.mesh_spacing();
    let stiffness = interior
        .iter()
        .map(|&x| mesh.neighbors(x).iter().map(|n| n.weight).sum::<f64>() / mesh.measure(x))
        .fold(0.0, f64::max);
    let product_tol = 100.0 * solver_tol * stiffness;

    let partial = |x: usize, y: usize| -> f64 {
        let base = map.dist(x, y);
        let s: f64 = mesh
            .neighbors(x)
            .iter()
            .map(|n| n.weight * (map.dist(n.vertex, y) - base))
            .sum();
        s / mesh.measure(x)
    };
    let check_pair = |x: usize, y: usize| partial(x, y) + partial(y, x) + product_tol;
    let product = match pairs {
        PairSelection::All => interior
            .par_iter()
            .map(|&x| {
                let mut st = InequalityStats::new();
                for &y in &interior {
                    st.record((x, y), check_pair(x, y));
                }
                st
            })
            .reduce(InequalityStats::new, InequalityStats::merge),
        PairSelection::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chosen: Vec<(usize, usize)> = (0..count)
                .map(|_| {
                    (
                        interior[rng.gen_range(0..interior.len())],
                        interior[rng.gen_range(0..interior.len())],
                    )
                })
                .collect();
            chosen
                .par_chunks(1024)
                .map(|chunk| {
                    let mut st = InequalityStats::new();
                    for &(x, y) in chunk {
                        st.record((x, y), check_pair(x, y));
                    }
                    st
                })
                .reduce(InequalityStats::new, InequalityStats::merge)
        }
    };

    let (_, density) = graph_dirichlet_energy(mesh, map);
    let local_lip = |x: usize| {
        mesh.neighbors(x)
            .iter()
            .map(|n| map.dist(x, n.vertex) / n.length)
            .fold(0.0, f64::max)
    };
    let mut squared_distance = InequalityStats::new();
    let mut field = vec![f64::INFINITY; mesh.num_vertices()];
    for p in probes {
        let f2: Vec<f64> = map.values().iter().map(|q| map.target().dist(q, p).powi(2)).collect();
        let rows: Vec<(usize, f64, f64)> = interior
            .par_iter()
            .map(|&x| {
                let lf: f64 = mesh
                    .neighbors(x)
                    .iter()
                    .map(|n| n.weight * (f2[n.vertex] - f2[x]))
                    .sum();
                let value = lf / mesh.measure(x) - 2.0 * density.values[x];
                let tol = tol_constant * h * local_lip(x).powi(2);
                (x, value, tol)
            })
            .collect();
        for (x, value, tol) in rows {
            field[x] = field[x].min(value);
            squared_distance.record((x, x), value + tol);
        }
    }
    for v in field.iter_mut() {
        if v.is_infinite() {
            *v = 0.0;
        }
    }
    Ok(CompositionResidual {
        product,
        product_tol,
        squared_distance,
        squared_distance_field: field,
        tol_constant,
    })
}

/// One radius of a mean-value profile.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanValueRow {
    pub radius: f64,
    pub residual: f64,
    /// Residual divided by `R²` (scalar mode) or `R^{n+2}` (map mode).
    pub normalized: f64,
    /// Measure of the annulus (scalar) or ball (map) divided by the
    /// comparison-space value; 1 on a flat domain.
    pub measure_ratio: f64,
}

/// What the mean-value inequality is applied to.
#[derive(Clone, Copy, Debug)]
pub enum MeanValueMode<'a> {
    /// Scalar `f` with source `h` (`L f = h·μ`).
    Scalar { f: &'a [f64], h: &'a [f64] },
    /// Solved map and probe point.
    Map { map: &'a MapState, probe: &'a TargetPoint },
}

/// Mean-value residual profile at vertex `p`.
///
/// Scalar mode: `avg_{∂B_p(R)} f − f(p) − h(p) R²/(2n)`, with the sphere
/// average taken over an annulus of width `h_mesh` around the sphere.
/// Map mode: `∫_{B_p(R)} [d²(P, u(p)) − d²(P, u(x))] dμ + e(p) ω_{n−1} R^{n+2}/(n(n+2))`.
pub fn mean_value_residual(
    mesh: &DomainMesh,
    geom: ComparisonGeometry,
    mode: MeanValueMode,
    p: usize,
    radii: &[f64],
) -> Result<Vec<MeanValueRow>> {
    if p >= mesh.num_vertices() {
        return Err(Error::OutOfDomain(format!("vertex {p}")));
    }
    let hm = mesh.mesh_spacing();
    let n = geom.n as f64;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        if r + hm > mesh.distance_to_boundary(p) {
            return Err(Error::Configuration(format!("ball of radius {r} leaves the domain")));
        }
        let row = match mode {
            MeanValueMode::Scalar { f, h } => {
                let outer = mesh.ball_quadrature(p, r + 0.5 * hm);
                let inner = mesh.ball_quadrature(p, (r - 0.5 * hm).max(0.0));
                let mut total = 0.0;
                let mut acc = 0.0;
                let mut j = 0;
                for &(v, _, w) in &outer {
                    while j < inner.len() && inner[j].0 < v {
                        j += 1;
                    }
                    let wi = if j < inner.len() && inner[j].0 == v {
                        inner[j].2
                    } else {
                        0.0
                    };
                    let wa = w - wi;
                    if wa > 0.0 {
                        total += wa;
                        acc += wa * f[v];
                    }
                }
                if !(total > 0.0) {
                    return Err(Error::Resolution(format!("empty annulus at radius {r}")));
                }
                let residual = acc / total - f[p] - h[p] * r * r / (2.0 * n);
                let sphere = geom.comparison_sphere_area(r)?;
                MeanValueRow {
                    radius: r,
                    residual,
                    normalized: residual / (r * r),
                    measure_ratio: total / (hm * sphere),
                }
            }
            MeanValueMode::Map { map, probe } => {
                map.target().check(probe)?;
                let density = graph_density_at(mesh, map, p);
                let d0 = map.target().dist(probe, map.value(p)).powi(2);
                let quad = mesh.ball_quadrature(p, r);
                if quad.is_empty() {
                    return Err(Error::Resolution(format!("empty ball at radius {r}")));
                }
                let integral: f64 = quad
                    .iter()
                    .map(|&(v, _, w)| w * (d0 - map.target().dist(probe, map.value(v)).powi(2)))
                    .sum();
                let volume: f64 = quad.iter().map(|&(_, _, w)| w).sum();
                let scale = r.powf(n + 2.0);
                let residual = integral + density * geom.unit_sphere_area() / (n * (n + 2.0)) * scale;
                let flat_volume = geom.unit_sphere_area() * r.powf(n) / n;
                MeanValueRow {
                    radius: r,
                    residual,
                    normalized: residual / scale,
                    measure_ratio: volume / flat_volume,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ConeSpec;
    use crate::solver::{solve_dirichlet, DirichletProblem, SolverOptions};
    use crate::target::NpcTarget;

    fn linear(mesh: &DomainMesh, a: [f64; 2]) -> MapState {
        MapState::from_chart_fn(mesh, |p| {
            let [x, y] = p.to_xy();
            a[0] * x + a[1] * y
        })
        .unwrap()
    }

    #[test]
    fn lipschitz_of_linear_map() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(3)).unwrap();
        let map = linear(&mesh, [0.6, -0.8]);
        let h = mesh.mesh_spacing();
        let x = mesh.nearest_vertex(crate::domain::ChartPoint::new(0.3, 2.0)).unwrap();
        let prof = pointwise_lipschitz(&mesh, &map, x, &[8.0 * h, 4.0 * h]).unwrap();
        assert!((prof.lip() - 1.0).abs() < 0.02, "{}", prof.lip());
        assert!(pointwise_lipschitz(&mesh, &map, x, &[h]).is_err());
    }

    #[test]
    fn constant_map_has_zero_ratio_and_lip() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(2)).unwrap();
        let map = MapState::from_scalars(&mesh, &vec![1.5; mesh.num_vertices()]).unwrap();
        let rep = main_theorem_ratio(&mesh, &map, 0, 0.5).unwrap();
        assert_eq!(rep.ratio, 0.0);
        let prof = pointwise_lipschitz(&mesh, &map, 0, &[0.2, 0.1]).unwrap();
        assert_eq!(prof.lip(), 0.0);
        let fit = holder_exponent_fit(&mesh, &map, 0, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(fit.alpha.is_none());
    }

    #[test]
    fn holder_fit_of_power_law() {
        let mesh = DomainMesh::build_cone(&ConeSpec::new(std::f64::consts::PI, 1.0, 3)).unwrap();
        let map = MapState::from_chart_fn(&mesh, |p| p.r * p.r * (2.0 * p.phi).cos()).unwrap();
        let h = mesh.mesh_spacing();
        let radii: Vec<f64> = [4.0, 8.0, 16.0, 32.0].iter().map(|k| k * h).collect();
        let fit = holder_exponent_fit(&mesh, &map, 0, &radii).unwrap();
        assert!((fit.alpha.unwrap() - 2.0).abs() < 0.05, "{fit:?}");
        assert!(holder_exponent_fit(&mesh, &map, 0, &[0.1, 0.2, 0.4]).is_err());
    }

    #[test]
    fn scalar_mean_value_equality_case() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(3)).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|p| 1.0 - p.r * p.r).collect();
        let h = vec![-4.0; mesh.num_vertices()];
        let rows = mean_value_residual(
            &mesh,
            ComparisonGeometry::new(2, 0.0),
            MeanValueMode::Scalar { f: &f, h: &h },
            0,
            &[0.2, 0.4],
        )
        .unwrap();
        for row in rows {
            assert!(row.residual.abs() < 5e-3, "{row:?}");
        }
    }

    #[test]
    fn map_mean_value_vanishes_for_constant_maps() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(2)).unwrap();
        let target = NpcTarget::Euclidean { dim: 2 };
        let c = TargetPoint::euclidean(&[0.3, 0.1]);
        let map = MapState::constant(&mesh, target, c).unwrap();
        let probe = TargetPoint::euclidean(&[1.0, 1.0]);
        let rows = mean_value_residual(
            &mesh,
            ComparisonGeometry::new(2, 0.0),
            MeanValueMode::Map {
                map: &map,
                probe: &probe,
            },
            0,
            &[0.3],
        )
        .unwrap();
        assert_eq!(rows[0].residual, 0.0);
    }

    #[test]
    fn composition_residuals_of_solved_scalar_map() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(1)).unwrap();
        let problem =
            DirichletProblem::from_boundary_fn(&mesh, NpcTarget::real_line(), |p| TargetPoint::scalar(p.phi.cos()))
                .unwrap();
        let opts = SolverOptions::default();
        let (map, rep) = solve_dirichlet(&problem, &opts).unwrap();
        let res = composition_inequality_residual(
            &mesh,
            &map,
            &rep,
            opts.tol,
            &[TargetPoint::scalar(0.0)],
            PairSelection::All,
            1.0,
        )
        .unwrap();
        assert_eq!(res.product.violations, 0);
        assert_eq!(res.squared_distance.violations, 0);
        assert!(res.squared_distance_field.iter().all(|v| v.abs() < 1e-5));

        let mut stale = rep.clone();
        stale.converged = false;
        assert!(matches!(
            composition_inequality_residual(&mesh, &map, &stale, opts.tol, &[], PairSelection::All, 1.0),
            Err(Error::StaleInput(_))
        ));
    }
}
