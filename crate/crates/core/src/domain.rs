//! Discrete metric-measure domains.
//!
//! A [`DomainMesh`] is a triangulated two-dimensional metric cone of total
//! angle `θ`, stored in the chart `(r, φ)` with `0 ≤ r ≤ R` and `0 ≤ φ < θ`.
//! The apex sits at `r = 0`. Every triangle is flat with the intrinsic edge
//! lengths of the cone, so the cotangent weights make the graph Dirichlet
//! energy of a piecewise-linear function equal to its Dirichlet integral.
//!
//! Distances between chart points use the exact cone metric. Meshes loaded
//! without a cone chart fall back to shortest paths over the edge graph.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::OnceLock;

use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rings at refinement level 0 unless a spec asks otherwise.
pub const DEFAULT_BASE_RINGS: usize = 6;

pub const MESH_FORMAT_VERSION: u32 = 1;

/// Parameters of a cone mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub total_angle: f64,
    pub radius: f64,
    pub refinement_level: u32,
    #[serde(default = "default_base_rings")]
    pub base_rings: usize,
}

fn default_base_rings() -> usize {
    DEFAULT_BASE_RINGS
}

impl ConeSpec {
    pub fn new(total_angle: f64, radius: f64, refinement_level: u32) -> Self {
        ConeSpec {
            total_angle,
            radius,
            refinement_level,
            base_rings: DEFAULT_BASE_RINGS,
        }
    }

    /// Unit-radius flat disk.
    pub fn disk(refinement_level: u32) -> Self {
        ConeSpec::new(2.0 * PI, 1.0, refinement_level)
    }

    pub fn with_base_rings(mut self, base_rings: usize) -> Self {
        self.base_rings = base_rings;
        self
    }

    pub fn with_level(mut self, refinement_level: u32) -> Self {
        self.refinement_level = refinement_level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_angle > 0.0) || !self.total_angle.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "total angle must be positive, got {}",
                self.total_angle
            )));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.base_rings == 0 {
            return Err(Error::InvalidSpec("base_rings must be at least 1".into()));
        }
        if self.refinement_level > 16 {
            return Err(Error::InvalidSpec(format!(
                "refinement level {} is beyond what fits in memory",
                self.refinement_level
            )));
        }
        Ok(())
    }

    /// Number of rings: `base_rings · 2^L`.
    pub fn rings(&self) -> usize {
        self.base_rings << self.refinement_level
    }

    /// Ring spacing `h(L) = R / (base_rings · 2^L)`.
    pub fn mesh_spacing(&self) -> f64 {
        self.radius / self.rings() as f64
    }

    /// Angular sectors at the apex; ring `i` carries `sectors · i` vertices.
    pub fn sectors(&self) -> usize {
        (self.total_angle.round() as usize).max(3)
    }

    pub fn area(&self) -> f64 {
        0.5 * self.total_angle * self.radius * self.radius
    }

    /// Curvature lower bound of the cone: 0 up to total angle 2π, none above.
    pub fn curvature_bound(&self) -> CurvatureBound {
        if self.total_angle <= 2.0 * PI + 1e-12 {
            CurvatureBound::Bounded(0.0)
        } else {
            CurvatureBound::UnboundedBelow
        }
    }
}

/// Lower curvature bound of a domain in the sense of triangle comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurvatureBound {
    Bounded(f64),
    /// Cone points of total angle above 2π: no lower bound exists.
    UnboundedBelow,
}

impl CurvatureBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            CurvatureBound::Bounded(k) => Some(k),
            CurvatureBound::UnboundedBelow => None,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            CurvatureBound::Bounded(k) => format!("{k}"),
            CurvatureBound::UnboundedBelow => "unbounded-below".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum CurvatureRepr {
    Value(f64),
    Flag(CurvatureFlag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum CurvatureFlag {
    #[serde(rename = "unbounded-below")]
    UnboundedBelow,
}

impl From<CurvatureBound> for CurvatureRepr {
    fn from(c: CurvatureBound) -> Self {
        match c {
            CurvatureBound::Bounded(k) => CurvatureRepr::Value(k),
            CurvatureBound::UnboundedBelow => CurvatureRepr::Flag(CurvatureFlag::UnboundedBelow),
        }
    }
}

impl From<CurvatureRepr> for CurvatureBound {
    fn from(c: CurvatureRepr) -> Self {
        match c {
            CurvatureRepr::Value(k) => CurvatureBound::Bounded(k),
            CurvatureRepr::Flag(_) => CurvatureBound::UnboundedBelow,
        }
    }
}

/// The metric of a cone of total angle `total_angle`, truncated at `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeChart {
    pub total_angle: f64,
    pub radius: f64,
}

impl ConeChart {
    /// Angular separation reduced to `[0, θ/2]`.
    fn angular_gap(&self, phi_a: f64, phi_b: f64) -> f64 {
        let theta = self.total_angle;
        let d = (phi_a - phi_b).abs().rem_euclid(theta);
        d.min(theta - d)
    }

    /// Exact cone distance. Pairs whose angular gap reaches π are joined
    /// through the apex.
    pub fn distance(&self, a: ChartPoint, b: ChartPoint) -> f64 {
        let delta = self.angular_gap(a.phi, b.phi);
        if delta < PI {
            let s = (0.5 * delta).sin();
            ((a.r - b.r).powi(2) + 4.0 * a.r * b.r * s * s).sqrt()
        } else {
            a.r + b.r
        }
    }

    pub fn normalize(&self, p: ChartPoint) -> Result<ChartPoint> {
        if !(p.r >= 0.0) || p.r > self.radius * (1.0 + 1e-12) || !p.phi.is_finite() {
            return Err(Error::OutOfDomain(format!(
                "chart point (r={}, φ={}) outside radius {}",
                p.r, p.phi, self.radius
            )));
        }
        Ok(ChartPoint {
            r: p.r,
            phi: p.phi.rem_euclid(self.total_angle),
        })
    }
}

/// Chart coordinates `(r, φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub r: f64,
    pub phi: f64,
}

impl ChartPoint {
    pub fn new(r: f64, phi: f64) -> Self {
        ChartPoint { r, phi }
    }

    /// Planar coordinates of the unrolled chart. They are Euclidean
    /// coordinates only on a flat disk (total angle 2π).
    pub fn to_xy(&self) -> [f64; 2] {
        [self.r * self.phi.cos(), self.r * self.phi.sin()]
    }
}

/// Undirected edge with cotangent weight and intrinsic length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub vertex: usize,
    pub weight: f64,
    pub length: f64,
}

/// Either a mesh vertex or an arbitrary chart point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Vertex(usize),
    Chart(ChartPoint),
}

/// Dimension and curvature bound of the comparison space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonGeometry {
    pub k: f64,
    pub n: usize,
}

impl ComparisonGeometry {
    pub fn new(n: usize, k: f64) -> Self {
        ComparisonGeometry { k, n }
    }

    /// The comparison function `s_k`: `sin(√k t)/√k`, `t`, or
    /// `sinh(√(−k) t)/√(−k)` according to the sign of `k`.
    pub fn s_k(&self, t: f64) -> f64 {
        if self.k > 0.0 {
            let s = self.k.sqrt();
            (s * t).sin() / s
        } else if self.k == 0.0 {
            t
        } else {
            let s = (-self.k).sqrt();
            (s * t).sinh() / s
        }
    }

    /// `ω_{n−1}`, the volume of the unit `(n−1)`-sphere.
    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_volume(self.n - 1)
    }

    /// `ω_{n−1} · s_k(R)^{n−1}`.
    pub fn comparison_sphere_area(&self, radius: f64) -> Result<f64> {
        if self.k > 0.0 {
            return Err(Error::UnsupportedCurvature(format!(
                "comparison geometry requires k ≤ 0, got {}",
                self.k
            )));
        }
        if self.n == 0 {
            return Err(Error::Range("dimension must be at least 1".into()));
        }
        if !(radius > 0.0) {
            return Err(Error::Range(format!("radius must be positive, got {radius}")));
        }
        Ok(self.unit_sphere_area() * self.s_k(radius).powi(self.n as i32 - 1))
    }
}

/// Volume of the unit `m`-sphere `S^m ⊂ R^{m+1}`.
pub fn unit_sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_volume(m - 2),
    }
}

/// Summary of the structural invariants of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshInvariants {
    pub total_measure: f64,
    pub euler_characteristic: i64,
    pub min_interior_degree: usize,
    pub min_weight: f64,
    pub boundary_count: usize,
}

#[derive(Clone, Debug)]
struct GraphMetric {
    graph: UnGraph<(), f64>,
}

/// A discrete metric-measure domain.
#[derive(Clone, Debug)]
pub struct DomainMesh {
    vertices: Vec<ChartPoint>,
    edges: Vec<Edge>,
    measure: Vec<f64>,
    boundary: Vec<bool>,
    curvature: CurvatureBound,
    dimension: usize,
    mesh_spacing: f64,
    chart: Option<ConeChart>,
    triangles: Vec<[usize; 3]>,
    adj_offsets: Vec<usize>,
    adj: Vec<Neighbor>,
    by_radius: Vec<usize>,
    sorted_radii: Vec<f64>,
    max_cell_radius: f64,
    graph_metric: OnceLock<GraphMetric>,
}

impl DomainMesh {
    /// Radial-angular triangulation of a cone with a triangle fan at the apex.
    pub fn build_cone(spec: &ConeSpec) -> Result<DomainMesh> {
        spec.validate()?;
        let chart = ConeChart {
            total_angle: spec.total_angle,
            radius: spec.radius,
        };
        let n = spec.rings();
        let m = spec.sectors();
        let h = spec.mesh_spacing();
        let theta = spec.total_angle;

        let ring_start = |i: usize| if i == 0 { 0 } else { 1 + m * i * (i - 1) / 2 };
        let idx = |i: usize, k: usize| {
            if i == 0 {
                0
            } else {
                ring_start(i) + k % (m * i)
            }
        };

        let num_vertices = ring_start(n + 1);
        let mut vertices = Vec::with_capacity(num_vertices);
        vertices.push(ChartPoint::new(0.0, 0.0));
        for i in 1..=n {
            // the outer ring sits exactly on r = R
            let r = if i == n { spec.radius } else { i as f64 * h };
            let count = m * i;
            for k in 0..count {
                vertices.push(ChartPoint::new(r, theta * k as f64 / count as f64));
            }
        }
        debug_assert_eq!(vertices.len(), num_vertices);

        let mut triangles = Vec::with_capacity(m * n * n);
        for i in 0..n {
            for s in 0..m {
                if i == 0 {
                    triangles.push([0, idx(1, s), idx(1, s + 1)]);
                    continue;
                }
                for j in 0..=i {
                    triangles.push([
                        idx(i, s * i + j),
                        idx(i + 1, s * (i + 1) + j),
                        idx(i + 1, s * (i + 1) + j + 1),
                    ]);
                }
                for j in 0..i {
                    triangles.push([
                        idx(i, s * i + j),
                        idx(i + 1, s * (i + 1) + j + 1),
                        idx(i, s * i + j + 1),
                    ]);
                }
            }
        }

        let boundary = (0..num_vertices).map(|v| v >= ring_start(n)).collect();
        DomainMesh::from_triangles(vertices, triangles, boundary, chart, spec.curvature_bound(), h)
    }

    fn from_triangles(
        vertices: Vec<ChartPoint>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        chart: ConeChart,
        curvature: CurvatureBound,
        mesh_spacing: f64,
    ) -> Result<DomainMesh> {
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut measure = vec![0.0; vertices.len()];

        for tri in &triangles {
            let lengths = [
                chart.distance(vertices[tri[1]], vertices[tri[2]]),
                chart.distance(vertices[tri[2]], vertices[tri[0]]),
                chart.distance(vertices[tri[0]], vertices[tri[1]]),
            ];
            let area = triangle_area(lengths[0], lengths[1], lengths[2]);
            if !(area > 0.0) {
                return Err(Error::Inconsistency(format!(
                    "degenerate triangle {tri:?} with side lengths {lengths:?}"
                )));
            }
            for &v in tri {
                measure[v] += area / 3.0;
            }
            // corner c is opposite to the edge (c+1, c+2)
            for c in 0..3 {
                let a = tri[(c + 1) % 3];
                let b = tri[(c + 2) % 3];
                let opp = lengths[c];
                let s1 = lengths[(c + 1) % 3];
                let s2 = lengths[(c + 2) % 3];
                let cot = (s1 * s1 + s2 * s2 - opp * opp) / (4.0 * area);
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        i: key.0,
                        j: key.1,
                        weight: 0.0,
                        length: opp,
                    });
                    edges.len() - 1
                });
                edges[e].weight += 0.5 * cot;
            }
        }

        DomainMesh::assemble(
            vertices,
            edges,
            measure,
            boundary,
            curvature,
            2,
            mesh_spacing,
            Some(chart),
            triangles,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        vertices: Vec<ChartPoint>,
        edges: Vec<Edge>,
        measure: Vec<f64>,
        boundary: Vec<bool>,
        curvature: CurvatureBound,
        dimension: usize,
        mesh_spacing: f64,
        chart: Option<ConeChart>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<DomainMesh> {
        let nv = vertices.len();
        if measure.len() != nv || boundary.len() != nv {
            return Err(Error::Format(
                "vertex, measure and boundary arrays differ in length".into(),
            ));
        }
        let mut degree = vec![0usize; nv];
        for e in &edges {
            if e.i >= nv || e.j >= nv || e.i == e.j {
                return Err(Error::Format(format!("invalid edge ({}, {})", e.i, e.j)));
            }
            if !(e.length > 0.0) {
                return Err(Error::Format(format!(
                    "edge ({}, {}) has non-positive length",
                    e.i, e.j
                )));
            }
            degree[e.i] += 1;
            degree[e.j] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(nv + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![
            Neighbor {
                vertex: 0,
                weight: 0.0,
                length: 0.0
            };
            adj_offsets[nv]
        ];
        for e in &edges {
            adj[fill[e.i]] = Neighbor {
                vertex: e.j,
                weight: e.weight,
                length: e.length,
            };
            fill[e.i] += 1;
            adj[fill[e.j]] = Neighbor {
                vertex: e.i,
                weight: e.weight,
                length: e.length,
            };
            fill[e.j] += 1;
        }
        for v in 0..nv {
            adj[adj_offsets[v]..adj_offsets[v + 1]].sort_by_key(|n| n.vertex);
        }

        let mut by_radius: Vec<usize> = (0..nv).collect();
        by_radius.sort_by(|&a, &b| vertices[a].r.total_cmp(&vertices[b].r).then(a.cmp(&b)));
        let sorted_radii = by_radius.iter().map(|&v| vertices[v].r).collect();
        let max_cell_radius = measure.iter().map(|&m| cell_radius(m)).fold(0.0, f64::max);

        Ok(DomainMesh {
            vertices,
            edges,
            measure,
            boundary,
            curvature,
            dimension,
            mesh_spacing,
            chart,
            triangles,
            adj_offsets,
            adj,
            by_radius,
            sorted_radii,
            max_cell_radius,
            graph_metric: OnceLock::new(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[ChartPoint] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> ChartPoint {
        self.vertices[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn measure(&self, v: usize) -> f64 {
        self.measure[v]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn neighbors(&self, v: usize) -> &[Neighbor] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn curvature_bound(&self) -> CurvatureBound {
        self.curvature
    }

    /// Replace the curvature bound by a weaker one. A domain with curvature
    /// `≥ k0` also has curvature `≥ k` for every `k ≤ k0`.
    pub fn with_curvature_bound(mut self, k: f64) -> Result<DomainMesh> {
        match self.curvature {
            CurvatureBound::Bounded(k0) if k <= k0 => {
                self.curvature = CurvatureBound::Bounded(k);
                Ok(self)
            }
            CurvatureBound::Bounded(k0) => Err(Error::UnsupportedCurvature(format!(
                "cannot raise the curvature bound from {k0} to {k}"
            ))),
            CurvatureBound::UnboundedBelow => Err(Error::UnsupportedCurvature(
                "domain has no lower curvature bound".into(),
            )),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mesh_spacing(&self) -> f64 {
        self.mesh_spacing
    }

    pub fn chart(&self) -> Option<ConeChart> {
        self.chart
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Vertex closest to a chart point.
    pub fn nearest_vertex(&self, p: ChartPoint) -> Result<usize> {
        let p = match self.chart {
            Some(c) => c.normalize(p)?,
            None => p,
        };
        let mut best = (f64::INFINITY, 0);
        for v in 0..self.num_vertices() {
            let d = self.distance_to_chart(v, p);
            if d < best.0 {
                best = (d, v);
            }
        }
        Ok(best.1)
    }

    /// Radius of the chart, or the largest stored radius when no cone chart
    /// is attached.
    pub fn radius(&self) -> f64 {
        match self.chart {
            Some(c) => c.radius,
            None => self.sorted_radii.last().copied().unwrap_or(0.0),
        }
    }

    fn distance_to_chart(&self, v: usize, p: ChartPoint) -> f64 {
        match self.chart {
            Some(c) => c.distance(self.vertices[v], p),
            None => {
                let [x0, y0] = self.vertices[v].to_xy();
                let [x1, y1] = p.to_xy();
                (x0 - x1).hypot(y0 - y1)
            }
        }
    }

    fn resolve(&self, loc: Location) -> Result<Location> {
        match loc {
            Location::Vertex(v) if v < self.num_vertices() => Ok(loc),
            Location::Vertex(v) => Err(Error::OutOfDomain(format!(
                "vertex {v} not in mesh of {} vertices",
                self.num_vertices()
            ))),
            Location::Chart(p) => match self.chart {
                Some(c) => Ok(Location::Chart(c.normalize(p)?)),
                None => Ok(Location::Vertex(self.nearest_vertex(p)?)),
            },
        }
    }

    /// Geodesic distance between two locations.
    pub fn geodesic_distance(&self, x: Location, y: Location) -> Result<f64> {
        let x = self.resolve(x)?;
        let y = self.resolve(y)?;
        match self.chart {
            Some(c) => {
                let px = self.location_point(x);
                let py = self.location_point(y);
                Ok(c.distance(px, py))
            }
            None => match (x, y) {
                (Location::Vertex(a), Location::Vertex(b)) => Ok(self.graph_distances_from(a)[b]),
                _ => unreachable!("chart locations resolve to vertices without a cone chart"),
            },
        }
    }

    fn location_point(&self, loc: Location) -> ChartPoint {
        match loc {
            Location::Vertex(v) => self.vertices[v],
            Location::Chart(p) => p,
        }
    }

    /// Distance between two vertices.
    pub fn vertex_distance(&self, a: usize, b: usize) -> f64 {
        match self.chart {
            Some(c) => c.distance(self.vertices[a], self.vertices[b]),
            None => self.graph_distances_from(a)[b],
        }
    }

    /// Vertices strictly within `eps` of `center` with their distances,
    /// ordered by vertex index.
    pub fn ball(&self, center: usize, eps: f64) -> Vec<(usize, f64)> {
        self.ball_around(Location::Vertex(center), eps, false)
    }

    /// Vertices within `eps` (inclusive) of `center`, ordered by vertex index.
    pub fn closed_ball(&self, center: usize, eps: f64) -> Vec<(usize, f64)> {
        self.ball_around(Location::Vertex(center), eps, true)
    }

    fn ball_around(&self, center: Location, eps: f64, closed: bool) -> Vec<(usize, f64)> {
        let inside = |d: f64| if closed { d <= eps } else { d < eps };
        let mut out = Vec::new();
        match self.chart {
            Some(c) => {
                let p = self.location_point(center);
                // |r_x − r_y| ≤ d(x, y) on a cone
                let lo = self.sorted_radii.partition_point(|&r| r < p.r - eps);
                let hi = self.sorted_radii.partition_point(|&r| r <= p.r + eps);
                for &v in &self.by_radius[lo..hi] {
                    let d = c.distance(p, self.vertices[v]);
                    if inside(d) {
                        out.push((v, d));
                    }
                }
                out.sort_unstable_by_key(|&(v, _)| v);
            }
            None => {
                let Location::Vertex(src) = center else {
                    unreachable!("chart locations require a cone chart")
                };
                for (v, d) in self.graph_distances_from(src).into_iter().enumerate() {
                    if inside(d) {
                        out.push((v, d));
                    }
                }
            }
        }
        out
    }

    /// Vertices in the open ball `B_x(ε)` with their measure weights.
    pub fn metric_ball(&self, x: usize, eps: f64) -> Result<Vec<(usize, f64)>> {
        if x >= self.num_vertices() {
            return Err(Error::OutOfDomain(format!("vertex {x}")));
        }
        if !(eps > 0.0) {
            return Err(Error::Range(format!("ball radius must be positive, got {eps}")));
        }
        Ok(self
            .ball(x, eps)
            .into_iter()
            .map(|(v, _)| (v, self.measure[v]))
            .collect())
    }

    /// Quadrature nodes `(vertex, distance, weight)` for integrals over the
    /// ball `B_x(ε)`. Each vertex stands for a disk of its own measure and
    /// is weighted by the part of that disk lying inside the ball, which
    /// removes the jumps of plain lumping as rings cross the rim.
    pub fn ball_quadrature(&self, x: usize, eps: f64) -> Vec<(usize, f64, f64)> {
        self.ball(x, eps + self.max_cell_radius)
            .into_iter()
            .filter_map(|(v, d)| {
                let mu = self.measure[v];
                let w = mu * disk_fraction_inside(eps - d, cell_radius(mu));
                (w > 0.0).then_some((v, d, w))
            })
            .collect()
    }

    /// Measure of the open ball `B_x(ε)`.
    pub fn ball_measure(&self, x: usize, eps: f64) -> f64 {
        self.ball(x, eps).iter().map(|&(v, _)| self.measure[v]).sum()
    }

    /// Vertices in the ball of radius `eps` around vertex `center`.
    pub fn ball_vertices(&self, center: usize, eps: f64) -> Vec<usize> {
        self.ball(center, eps).into_iter().map(|(v, _)| v).collect()
    }

    /// Distance from a vertex to the outer boundary (`R − r` on a cone).
    pub fn distance_to_boundary(&self, v: usize) -> f64 {
        match self.chart {
            Some(c) => c.radius - self.vertices[v].r,
            None => {
                let d = self.graph_distances_from(v);
                (0..self.num_vertices())
                    .filter(|&b| self.boundary[b])
                    .map(|b| d[b])
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Shortest-path distances over the edge graph, augmented by the
    /// diagonals of convex pairs of adjacent triangles (unfolded into the
    /// plane). Every graph path is realized by a curve on the surface, so
    /// these distances bound the true geodesic distance from above.
    pub fn graph_distances_from(&self, source: usize) -> Vec<f64> {
        let metric = self.graph_metric.get_or_init(|| self.build_graph_metric());
        let dist = petgraph::algo::dijkstra(&metric.graph, NodeIndex::new(source), None, |e| *e.weight());
        let mut out = vec![f64::INFINITY; self.num_vertices()];
        for (node, d) in dist {
            out[node.index()] = d;
        }
        out
    }

    fn build_graph_metric(&self) -> GraphMetric {
        let mut graph = UnGraph::<(), f64>::with_capacity(self.num_vertices(), self.edges.len() * 2);
        for _ in 0..self.num_vertices() {
            graph.add_node(());
        }
        let mut length: HashMap<(usize, usize), f64> = HashMap::new();
        for e in &self.edges {
            graph.add_edge(NodeIndex::new(e.i), NodeIndex::new(e.j), e.length);
            length.insert((e.i, e.j), e.length);
        }
        let len = |a: usize, b: usize| length[&(a.min(b), a.max(b))];

        // opposite corners of the (up to two) triangles on each edge
        let mut opposite: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in &self.triangles {
            for c in 0..3 {
                let a = t[(c + 1) % 3];
                let b = t[(c + 2) % 3];
                opposite.entry((a.min(b), a.max(b))).or_default().push(t[c]);
            }
        }
        let mut keys: Vec<_> = opposite.keys().copied().collect();
        keys.sort_unstable();
        for (a, b) in keys {
            let opp = &opposite[&(a, b)];
            if opp.len() != 2 {
                continue;
            }
            let (c, d) = (opp[0], opp[1]);
            let ab = len(a, b);
            // unfold: a at the origin, b on the positive x-axis, c above, d below
            let place = |la: f64, lb: f64, sign: f64| {
                let x = (la * la - lb * lb + ab * ab) / (2.0 * ab);
                let y = (la * la - x * x).max(0.0).sqrt();
                (x, sign * y)
            };
            let pc = place(len(a, c), len(b, c), 1.0);
            let pd = place(len(a, d), len(b, d), -1.0);
            // the segment c–d must cross the open segment a–b
            let t = pc.1 / (pc.1 - pd.1);
            let x = pc.0 + t * (pd.0 - pc.0);
            if x > 0.0 && x < ab {
                let cd = (pc.0 - pd.0).hypot(pc.1 - pd.1);
                graph.add_edge(NodeIndex::new(c), NodeIndex::new(d), cd);
            }
        }
        GraphMetric { graph }
    }

    /// Sum of the triangle angles at a vertex; `2π` at a flat interior vertex
    /// and the total cone angle at the apex.
    pub fn vertex_angle_sum(&self, v: usize) -> f64 {
        let mut total = 0.0;
        let len = |a: usize, b: usize| match self.chart {
            Some(c) => c.distance(self.vertices[a], self.vertices[b]),
            None => self
                .neighbors(a)
                .iter()
                .find(|n| n.vertex == b)
                .map(|n| n.length)
                .unwrap_or(f64::NAN),
        };
        for t in &self.triangles {
            if let Some(pos) = t.iter().position(|&x| x == v) {
                let a = t[(pos + 1) % 3];
                let b = t[(pos + 2) % 3];
                let (la, lb, lab) = (len(v, a), len(v, b), len(a, b));
                let cos = ((la * la + lb * lb - lab * lab) / (2.0 * la * lb)).clamp(-1.0, 1.0);
                total += cos.acos();
            }
        }
        total
    }

    /// Structural invariants: total measure, Euler characteristic, minimum
    /// interior degree and minimum edge weight.
    pub fn invariants(&self) -> MeshInvariants {
        let euler = self.num_vertices() as i64 - self.edges.len() as i64 + self.triangles.len() as i64;
        let min_interior_degree = (0..self.num_vertices())
            .filter(|&v| !self.boundary[v])
            .map(|v| self.neighbors(v).len())
            .min()
            .unwrap_or(0);
        let min_weight = self.edges.iter().map(|e| e.weight).fold(f64::INFINITY, f64::min);
        MeshInvariants {
            total_measure: self.total_measure(),
            euler_characteristic: euler,
            min_interior_degree,
            min_weight,
            boundary_count: self.boundary.iter().filter(|&&b| b).count(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = MeshFile {
            version: MESH_FORMAT_VERSION,
            dimension: self.dimension,
            curvature_bound: self.curvature.into(),
            mesh_spacing: self.mesh_spacing,
            cone: self.chart,
            vertices: self.vertices.iter().map(|p| [p.r, p.phi]).collect(),
            edges: self.edges.iter().map(|e| (e.i, e.j, e.weight, e.length)).collect(),
            measures: self.measure.clone(),
            boundary: self.boundary_vertices(),
            triangles: self.triangles.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(text: &str) -> Result<DomainMesh> {
        let file: MeshFile = serde_json::from_str(text)?;
        if file.version != MESH_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported mesh format version {}",
                file.version
            )));
        }
        let nv = file.vertices.len();
        let mut boundary = vec![false; nv];
        for &b in &file.boundary {
            if b >= nv {
                return Err(Error::Format(format!("boundary index {b} out of range")));
            }
            boundary[b] = true;
        }
        if file.measures.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Format("vertex measures must be positive".into()));
        }
        if file.triangles.iter().flatten().any(|&v| v >= nv) {
            return Err(Error::Format("triangle index out of range".into()));
        }
        DomainMesh::assemble(
            file.vertices.iter().map(|&[r, phi]| ChartPoint::new(r, phi)).collect(),
            file.edges
                .iter()
                .map(|&(i, j, weight, length)| Edge { i, j, weight, length })
                .collect(),
            file.measures,
            boundary,
            file.curvature_bound.into(),
            file.dimension,
            file.mesh_spacing,
            file.cone,
            file.triangles,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DomainMesh> {
        DomainMesh::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    version: u32,
    dimension: usize,
    curvature_bound: CurvatureRepr,
    mesh_spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cone: Option<ConeChart>,
    vertices: Vec<[f64; 2]>,
    edges: Vec<(usize, usize, f64, f64)>,
    measures: Vec<f64>,
    boundary: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    triangles: Vec<[usize; 3]>,
}

fn cell_radius(measure: f64) -> f64 {
    (measure / PI).sqrt()
}

/// Fraction of a disk of radius `rho` lying on the near side of a line at
/// signed distance `s` from its center.
fn disk_fraction_inside(s: f64, rho: f64) -> f64 {
    if rho == 0.0 || s >= rho {
        return if s >= 0.0 { 1.0 } else { 0.0 };
    }
    if s <= -rho {
        return 0.0;
    }
    let t = s / rho;
    0.5 + (t.asin() + t * (1.0 - t * t).sqrt()) / PI
}

/// Triangle area from side lengths (Kahan's form of Heron's formula).
pub fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [x, y, z] = s;
    let p = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
    0.25 * p.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flat_disk_level_zero_is_a_topological_disk() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(0)).unwrap();
        let inv = mesh.invariants();
        assert_eq!(inv.euler_characteristic, 1);
        assert!(inv.min_interior_degree >= 3);
        assert_eq!(mesh.curvature_bound(), CurvatureBound::Bounded(0.0));
    }

    #[test]
    fn cone_area_within_one_percent() {
        let spec = ConeSpec::new(3.0 * PI, 1.0, 2);
        let mesh = DomainMesh::build_cone(&spec).unwrap();
        let area = mesh.total_measure();
        assert!((area / (1.5 * PI) - 1.0).abs() < 0.01, "area {area}");
        assert_eq!(mesh.curvature_bound(), CurvatureBound::UnboundedBelow);
        assert_eq!(mesh.invariants().euler_characteristic, 1);
    }

    #[test]
    fn half_plane_cone_has_apex_angle_pi() {
        for level in 0..3 {
            let mesh = DomainMesh::build_cone(&ConeSpec::new(PI, 1.0, level)).unwrap();
            assert!(close(mesh.vertex_angle_sum(0), PI, 1e-12));
            // interior non-apex vertices are flat
            let v = mesh.nearest_vertex(ChartPoint::new(0.5, 1.0)).unwrap();
            assert!(close(mesh.vertex_angle_sum(v), 2.0 * PI, 1e-12));
        }
    }

    #[test]
    fn boundary_is_exactly_the_outer_ring() {
        let mesh = DomainMesh::build_cone(&ConeSpec::new(2.5, 2.0, 1)).unwrap();
        for v in 0..mesh.num_vertices() {
            assert_eq!(mesh.is_boundary(v), mesh.vertex(v).r == 2.0);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(matches!(
            DomainMesh::build_cone(&ConeSpec::new(0.0, 1.0, 0)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            DomainMesh::build_cone(&ConeSpec::new(1.0, -1.0, 0)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn mesh_spacing_halves_per_level() {
        let spec = ConeSpec::disk(0);
        for l in 0..4 {
            let a = spec.with_level(l).mesh_spacing();
            let b = spec.with_level(l + 1).mesh_spacing();
            assert!(b < a && close(a / b, 2.0, 1e-12));
        }
        assert!(close(ConeSpec::disk(3).mesh_spacing(), 1.0 / 48.0, 1e-15));
    }

    #[test]
    fn cone_distance_examples() {
        let disk = ConeChart {
            total_angle: 2.0 * PI,
            radius: 1.0,
        };
        assert!(close(
            disk.distance(ChartPoint::new(0.2, 0.3), ChartPoint::new(0.7, 0.3)),
            0.5,
            1e-15
        ));
        assert!(close(
            disk.distance(ChartPoint::new(1.0, 0.0), ChartPoint::new(1.0, PI / 2.0)),
            2f64.sqrt(),
            1e-15
        ));
        let cone = ConeChart {
            total_angle: 3.0 * PI,
            radius: 1.0,
        };
        assert_eq!(
            cone.distance(ChartPoint::new(1.0, 0.0), ChartPoint::new(1.0, 1.5 * PI)),
            2.0
        );
    }

    #[test]
    fn out_of_chart_point_is_rejected() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(0)).unwrap();
        let err = mesh.geodesic_distance(Location::Chart(ChartPoint::new(1.5, 0.0)), Location::Vertex(0));
        assert!(matches!(err, Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn comparison_sphere_areas() {
        let flat = ComparisonGeometry::new(2, 0.0);
        assert!(close(flat.comparison_sphere_area(0.5).unwrap(), PI, 1e-15));
        let hyp = ComparisonGeometry::new(2, -1.0);
        assert!(close(
            hyp.comparison_sphere_area(1.0).unwrap(),
            2.0 * PI * 1f64.sinh(),
            1e-14
        ));
        let flat3 = ComparisonGeometry::new(3, 0.0);
        assert!(close(flat3.comparison_sphere_area(2.0).unwrap(), 16.0 * PI, 1e-13));
        assert!(matches!(
            ComparisonGeometry::new(2, 1.0).comparison_sphere_area(1.0),
            Err(Error::UnsupportedCurvature(_))
        ));
    }

    #[test]
    fn ball_larger_than_diameter_contains_everything() {
        let mesh = DomainMesh::build_cone(&ConeSpec::new(3.0 * PI, 1.0, 1)).unwrap();
        let ball = mesh.metric_ball(17, 2.5).unwrap();
        assert_eq!(ball.len(), mesh.num_vertices());
        assert!(ball.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn ball_measure_matches_disk_and_cone_areas() {
        let disk = DomainMesh::build_cone(&ConeSpec::disk(2)).unwrap();
        let x = disk.nearest_vertex(ChartPoint::new(0.3, 0.4)).unwrap();
        let m = disk.ball_measure(x, 0.3);
        assert!((m / (PI * 0.09) - 1.0).abs() < 0.05, "disk ball {m}");

        // radius halfway between rings, where lumped measures switch over
        let cone = DomainMesh::build_cone(&ConeSpec::new(3.0 * PI, 1.0, 2)).unwrap();
        let eps = 7.5 * cone.mesh_spacing();
        let m = cone.ball_measure(0, eps);
        assert!((m / (1.5 * PI * eps * eps) - 1.0).abs() < 0.02, "apex ball {m}");
    }

    #[test]
    fn curvature_bound_can_only_be_lowered() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(0)).unwrap();
        assert!(mesh.clone().with_curvature_bound(0.5).is_err());
        let lowered = mesh.with_curvature_bound(-1.0).unwrap();
        assert_eq!(lowered.curvature_bound(), CurvatureBound::Bounded(-1.0));
    }

    #[test]
    fn unit_sphere_volumes() {
        assert!(close(unit_sphere_volume(2), 4.0 * PI, 1e-14));
        assert!(close(unit_sphere_volume(3), 2.0 * PI * PI, 1e-13));
    }
}
