//! Maps, graph Dirichlet energy and the ε-ball approximating energy.
//!
//! For a map `u` from an `n`-dimensional domain, the approximating energy
//! density at `x` is
//!
//! ```text
//! e_{p,ε}(x) = (n + p) / (c_{n,p} ε^n) · ∫_{B_x(ε)} d^p(u(x), u(y)) / ε^p dμ(y)
//! ```
//!
//! with `c_{n,p} = ∫_{S^{n−1}} |x¹|^p dσ`. The normalization makes a linear
//! map `u(x) = ⟨a, x⟩` on flat space have density `|a|^p` when `p = 2`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{unit_sphere_volume, ChartPoint, DomainMesh};
use crate::error::{Error, Result};
use crate::target::{NpcTarget, TargetPoint};

/// A map from mesh vertices into an NPC target. Boundary values are frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct MapState {
    target: NpcTarget,
    values: Vec<TargetPoint>,
    frozen: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    version: u32,
    target: String,
    values: Vec<TargetPoint>,
}

impl MapState {
    pub fn new(mesh: &DomainMesh, target: NpcTarget, values: Vec<TargetPoint>) -> Result<MapState> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::InvalidSpec(format!(
                "map has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        for p in &values {
            target.check(p)?;
        }
        Ok(MapState {
            target,
            values,
            frozen: mesh.boundary_flags().to_vec(),
        })
    }

    /// Scalar map into the real line.
    pub fn from_scalars(mesh: &DomainMesh, values: &[f64]) -> Result<MapState> {
        MapState::new(
            mesh,
            NpcTarget::real_line(),
            values.iter().map(|&x| TargetPoint::scalar(x)).collect(),
        )
    }

    /// Scalar map given by a function of the chart point of each vertex.
    pub fn from_chart_fn(mesh: &DomainMesh, f: impl Fn(ChartPoint) -> f64) -> Result<MapState> {
        let values: Vec<f64> = mesh.vertices().iter().map(|&p| f(p)).collect();
        MapState::from_scalars(mesh, &values)
    }

    pub fn constant(mesh: &DomainMesh, target: NpcTarget, value: TargetPoint) -> Result<MapState> {
        MapState::new(mesh, target, vec![value; mesh.num_vertices()])
    }

    pub fn target(&self) -> &NpcTarget {
        &self.target
    }

    pub fn value(&self, v: usize) -> &TargetPoint {
        &self.values[v]
    }

    pub fn values(&self) -> &[TargetPoint] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_frozen(&self, v: usize) -> bool {
        self.frozen[v]
    }

    /// Values of a real-valued map.
    pub fn scalars(&self) -> Option<Vec<f64>> {
        if !self.target.is_scalar() {
            return None;
        }
        self.values.iter().map(TargetPoint::as_scalar).collect()
    }

    /// Replace the value at an interior vertex.
    pub fn set(&mut self, v: usize, value: TargetPoint) -> Result<()> {
        if v >= self.values.len() {
            return Err(Error::OutOfDomain(format!("vertex {v}")));
        }
        if self.frozen[v] {
            return Err(Error::Range(format!("boundary value at vertex {v} is frozen")));
        }
        self.target.check(&value)?;
        self.values[v] = value;
        Ok(())
    }

    pub(crate) fn set_unchecked(&mut self, v: usize, value: TargetPoint) {
        self.values[v] = value;
    }

    /// Target distance between the images of two vertices.
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.target.dist(&self.values[a], &self.values[b])
    }

    /// Largest pointwise target distance to another map.
    pub fn max_distance(&self, other: &MapState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| self.target.dist(a, b))
            .fold(0.0, f64::max)
    }

    /// Scalar map `x ↦ d(u(x), p)`.
    pub fn distance_to(&self, mesh: &DomainMesh, p: &TargetPoint) -> Result<MapState> {
        self.target.check(p)?;
        let d: Vec<f64> = self.values.iter().map(|q| self.target.dist(q, p)).collect();
        MapState::from_scalars(mesh, &d)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&MapFile {
            version: 1,
            target: self.target.label(),
            values: self.values.clone(),
        })?)
    }

    pub fn from_json_str(mesh: &DomainMesh, target: NpcTarget, text: &str) -> Result<MapState> {
        let file: MapFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::Format(format!("unsupported map version {}", file.version)));
        }
        if file.target != target.label() {
            return Err(Error::TypeMismatch(format!(
                "map file targets {}, expected {}",
                file.target,
                target.label()
            )));
        }
        MapState::new(mesh, target, file.values)
    }
}

/// Which energy a density field represents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DensityTag {
    /// ε-ball approximating density with exponent `p`.
    Approx { p: f64, eps: f64 },
    /// Per-vertex share of the graph Dirichlet energy.
    Graph,
}

impl DensityTag {
    pub fn label(&self) -> String {
        match self {
            DensityTag::Approx { p, eps } => format!("approx(p={p},eps={eps})"),
            DensityTag::Graph => "graph".into(),
        }
    }
}

/// Energy per unit measure at each vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyDensityField {
    pub tag: DensityTag,
    pub values: Vec<f64>,
    /// Vertices whose ball was cut by the domain boundary.
    pub near_boundary: Vec<bool>,
}

impl EnergyDensityField {
    /// `∫ e dμ` over the given vertices.
    pub fn integrate(&self, mesh: &DomainMesh, vertices: &[usize]) -> f64 {
        vertices.iter().map(|&v| self.values[v] * mesh.measure(v)).sum()
    }

    /// CSV with columns `vertex_index, r, phi, density, tag`.
    pub fn write_csv<W: Write>(&self, mesh: &DomainMesh, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let tag = self.tag.label();
        w.write_record(["vertex_index", "r", "phi", "density", "tag"])
            .map_err(csv_error)?;
        for (v, d) in self.values.iter().enumerate() {
            let p = mesh.vertex(v);
            w.write_record([
                v.to_string(),
                p.r.to_string(),
                p.phi.to_string(),
                d.to_string(),
                tag.clone(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// `c_{n,p} = ∫_{S^{n−1}} |x¹|^p dσ`, by one-dimensional quadrature of
/// `ω_{n−2} ∫_0^π |cos ψ|^p sin^{n−2} ψ dψ`. Results are cached.
pub fn sphere_moment(n: usize, p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, p.to_bits());
    if let Some(&c) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return c;
    }
    let c = if n == 1 {
        2.0
    } else {
        let integrand = |psi: f64| psi.cos().powf(p) * psi.sin().powi(n as i32 - 2);
        // symmetric about π/2
        2.0 * unit_sphere_volume(n - 2) * adaptive_simpson(&integrand, 0.0, std::f64::consts::FRAC_PI_2, 1e-13)
    };
    cache.lock().unwrap_or_else(|e| e.into_inner()).insert(key, c);
    c
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

fn check_density_args(mesh: &DomainMesh, p: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Range(format!("ε must be positive, got {eps}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Range(format!("p must be at least 1, got {p}")));
    }
    if eps <= mesh.mesh_spacing() {
        log::warn!(
            "ε = {eps} does not exceed the mesh spacing {}; the ball quadrature is unresolved",
            mesh.mesh_spacing()
        );
    }
    Ok(())
}

/// Quadrature rule for integrals over `B_x(ε)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallQuadrature {
    /// Full vertex measure for every vertex strictly inside the ball.
    Lumped,
    /// Vertex measure scaled by the part of the vertex's cell inside the
    /// ball; see [`DomainMesh::ball_quadrature`].
    #[default]
    RimWeighted,
}

fn density_at(mesh: &DomainMesh, map: &MapState, p: f64, eps: f64, x: usize, quad: BallQuadrature) -> f64 {
    let n = mesh.dimension();
    let norm = (n as f64 + p) / (sphere_moment(n, p) * eps.powi(n as i32) * eps.powf(p));
    let sum: f64 = match quad {
        BallQuadrature::Lumped => mesh
            .ball(x, eps)
            .iter()
            .map(|&(y, _)| mesh.measure(y) * map.dist(x, y).powf(p))
            .sum(),
        BallQuadrature::RimWeighted => mesh
            .ball_quadrature(x, eps)
            .iter()
            .map(|&(y, _, w)| w * map.dist(x, y).powf(p))
            .sum(),
    };
    norm * sum
}

/// Approximating energy density `e_{p,ε}(x)` over `B_x(ε) ∩ Ω`.
pub fn approx_energy_density(
    mesh: &DomainMesh,
    map: &MapState,
    p: f64,
    eps: f64,
    x: usize,
    quad: BallQuadrature,
) -> Result<f64> {
    check_density_args(mesh, p, eps)?;
    if x >= mesh.num_vertices() {
        return Err(Error::OutOfDomain(format!("vertex {x}")));
    }
    Ok(density_at(mesh, map, p, eps, x, quad))
}

/// Approximating density at every vertex.
pub fn approx_energy_density_field(
    mesh: &DomainMesh,
    map: &MapState,
    p: f64,
    eps: f64,
    quad: BallQuadrature,
) -> Result<EnergyDensityField> {
    check_density_args(mesh, p, eps)?;
    let values = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|x| density_at(mesh, map, p, eps, x, quad))
        .collect();
    let near_boundary = (0..mesh.num_vertices())
        .map(|x| mesh.distance_to_boundary(x) < eps)
        .collect();
    Ok(EnergyDensityField {
        tag: DensityTag::Approx { p, eps },
        values,
        near_boundary,
    })
}

/// Total graph energy `Σ_edges w d²` and the per-vertex density
/// `e(x) = (1/(2μ_x)) Σ_{y∼x} w_xy d²(u(x), u(y))`.
pub fn graph_dirichlet_energy(mesh: &DomainMesh, map: &MapState) -> (f64, EnergyDensityField) {
    let total = mesh.edges().iter().map(|e| e.weight * map.dist(e.i, e.j).powi(2)).sum();
    let values = (0..mesh.num_vertices())
        .map(|x| graph_density_at(mesh, map, x))
        .collect();
    let near_boundary = mesh
        .boundary_flags()
        .iter()
        .enumerate()
        .map(|(x, &b)| b || mesh.neighbors(x).iter().any(|n| mesh.is_boundary(n.vertex)))
        .collect();
    (
        total,
        EnergyDensityField {
            tag: DensityTag::Graph,
            values,
            near_boundary,
        },
    )
}

pub(crate) fn graph_density_at(mesh: &DomainMesh, map: &MapState, x: usize) -> f64 {
    let s: f64 = mesh
        .neighbors(x)
        .iter()
        .map(|n| n.weight * map.dist(x, n.vertex).powi(2))
        .sum();
    s / (2.0 * mesh.measure(x))
}

/// Graph energy of the edges with both ends in `vertices`, plus half of the
/// edges leaving the set.
pub fn graph_energy_on(mesh: &DomainMesh, map: &MapState, vertices: &[usize]) -> f64 {
    vertices
        .iter()
        .map(|&x| graph_density_at(mesh, map, x) * mesh.measure(x))
        .sum()
}

/// A ball in the chart used as the region of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyRegion {
    pub r: f64,
    pub phi: f64,
    pub radius: f64,
}

/// One refinement level of a density convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub mesh_spacing: f64,
    pub eps: f64,
    /// `∫_B |e_{p,ε} − e_graph| dμ`.
    pub l1_gap: f64,
    /// `∫_B e_graph dμ`.
    pub energy: f64,
    pub relative_gap: f64,
    /// Mean over `B` of `∫_{B_x(ε)} d^p dμ / (c_{n,p}/(n+p) · e_graph(x) · ε^{n+p})`.
    pub mean_value_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Compare the approximating density with the graph density over an
/// interior region at each refinement level.
pub fn density_convergence_study(
    meshes: &[DomainMesh],
    maps: &[MapState],
    p: f64,
    eps: &[f64],
    region: StudyRegion,
    quad: BallQuadrature,
) -> Result<Vec<ConvergenceRow>> {
    if meshes.len() != maps.len() || meshes.len() != eps.len() {
        return Err(Error::Configuration(
            "convergence study needs one map and one ε per mesh".into(),
        ));
    }
    for w in eps.windows(2) {
        if w[1] > w[0] {
            return Err(Error::Configuration(format!("ε schedule must decrease, got {eps:?}")));
        }
    }
    let mut rows = Vec::new();
    for (level, ((mesh, map), &e)) in meshes.iter().zip(maps).zip(eps).enumerate() {
        if e < 4.0 * mesh.mesh_spacing() * (1.0 - 1e-12) {
            return Err(Error::Configuration(format!(
                "ε = {e} is below 4h = {}",
                4.0 * mesh.mesh_spacing()
            )));
        }
        let center = ChartPoint::new(region.r, region.phi);
        let dist_to_boundary = mesh.radius() - center.r;
        if region.radius + e >= dist_to_boundary {
            return Err(Error::Configuration(format!(
                "study region of radius {} with ε = {e} touches the boundary",
                region.radius
            )));
        }
        let c = mesh.nearest_vertex(center)?;
        let region_vertices: Vec<usize> = mesh.ball(c, region.radius).into_iter().map(|(v, _)| v).collect();
        let approx = approx_energy_density_field(mesh, map, p, e, quad)?;
        let (_, graph) = graph_dirichlet_energy(mesh, map);
        let mut l1_gap = 0.0;
        let mut energy = 0.0;
        let mut ratios = Vec::new();
        for &v in &region_vertices {
            let mu = mesh.measure(v);
            l1_gap += (approx.values[v] - graph.values[v]).abs() * mu;
            energy += graph.values[v] * mu;
            if graph.values[v] > 0.0 {
                ratios.push(approx.values[v] / graph.values[v]);
            }
        }
        let (mean, lo, hi) = if ratios.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                ratios.iter().sum::<f64>() / ratios.len() as f64,
                ratios.iter().copied().fold(f64::INFINITY, f64::min),
                ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        rows.push(ConvergenceRow {
            level,
            mesh_spacing: mesh.mesh_spacing(),
            eps: e,
            l1_gap,
            energy,
            relative_gap: if energy > 0.0 { l1_gap / energy } else { 0.0 },
            mean_value_ratio: mean,
            min_ratio: lo,
            max_ratio: hi,
        });
    }
    Ok(rows)
}

/// Terms of the Poincaré-type bound `∫∫_{B_z(r)²} d² ≤ C r^{n+2} E(B_z(6r))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareFit {
    pub numerator: f64,
    pub energy: f64,
    pub constant: f64,
}

/// Fitted constant of the Poincaré-type bound at center vertex `z`.
pub fn poincare_residual(mesh: &DomainMesh, map: &MapState, z: usize, r: f64) -> Result<PoincareFit> {
    if z >= mesh.num_vertices() {
        return Err(Error::OutOfDomain(format!("vertex {z}")));
    }
    if !(r > 0.0) {
        return Err(Error::Range(format!("radius must be positive, got {r}")));
    }
    if 6.0 * r > mesh.distance_to_boundary(z) {
        return Err(Error::Configuration(format!("B(6r) with r = {r} leaves the domain")));
    }
    let inner: Vec<usize> = mesh.ball_vertices(z, r);
    let mut numerator = 0.0;
    for &x in &inner {
        for &y in &inner {
            numerator += mesh.measure(x) * mesh.measure(y) * map.dist(x, y).powi(2);
        }
    }
    let energy = graph_energy_on(mesh, map, &mesh.ball_vertices(z, 6.0 * r));
    let n = mesh.dimension() as i32;
    let constant = if numerator == 0.0 {
        0.0
    } else if energy == 0.0 {
        return Err(Error::Inconsistency(
            "nonzero oscillation with zero energy on the enclosing ball".into(),
        ));
    } else {
        numerator / (r.powi(n + 2) * energy)
    };
    Ok(PoincareFit {
        numerator,
        energy,
        constant,
    })
}
