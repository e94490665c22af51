//! Non-positively curved target spaces.
//!
//! Three families are supported: Euclidean space `R^m`, the hyperbolic plane
//! in the hyperboloid model, and finite metric trees. All of them are CAT(0),
//! so geodesics are unique and the squared distance is convex along them.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default displacement tolerance of the barycenter iterations.
pub const BARYCENTER_TOL: f64 = 1e-10;
/// Iteration cap of the barycenter iterations.
pub const BARYCENTER_MAX_ITER: usize = 100_000;

/// A point in a target space, serialized as a tagged record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetPoint {
    Euclidean {
        coords: Vec<f64>,
    },
    /// Hyperboloid coordinates with `x0² − x1² − x2² = 1`, `x0 > 0`.
    Hyperbolic {
        coords: [f64; 3],
    },
    Tree(TreePoint),
}

impl TargetPoint {
    pub fn scalar(x: f64) -> Self {
        TargetPoint::Euclidean { coords: vec![x] }
    }

    pub fn euclidean(coords: &[f64]) -> Self {
        TargetPoint::Euclidean {
            coords: coords.to_vec(),
        }
    }

    /// Lift of a point of the plane `(x1, x2)` onto the hyperboloid.
    pub fn hyperbolic_from_plane(x1: f64, x2: f64) -> Self {
        TargetPoint::Hyperbolic {
            coords: [(1.0 + x1 * x1 + x2 * x2).sqrt(), x1, x2],
        }
    }

    pub fn tree(edge: usize, offset: f64) -> Self {
        TargetPoint::Tree(TreePoint { edge, offset })
    }

    /// First coordinate of a Euclidean point.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            TargetPoint::Euclidean { coords } => coords.first().copied(),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<TreePoint> {
        match self {
            TargetPoint::Tree(p) => Some(*p),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            TargetPoint::Euclidean { .. } => "euclidean",
            TargetPoint::Hyperbolic { .. } => "hyperbolic",
            TargetPoint::Tree(_) => "tree",
        }
    }
}

/// A point on a tree edge at `offset` from the edge's `from` node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreePoint {
    pub edge: usize,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEdge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    nodes: Vec<String>,
    edges: Vec<TreeFileEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFileEdge {
    id: String,
    from: String,
    to: String,
    length: f64,
}

/// A finite tree with positive edge lengths. Node-to-node distances and
/// next hops are tabulated at construction, so point distances are O(1).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTree {
    nodes: Vec<String>,
    edges: Vec<TreeEdge>,
    node_dist: Vec<f64>,
    next_hop: Vec<usize>,
    edge_between: HashMap<(usize, usize), usize>,
}

impl MetricTree {
    pub fn new(nodes: Vec<String>, edges: Vec<TreeEdge>) -> Result<MetricTree> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::InvalidSpec("tree needs at least one node".into()));
        }
        if edges.len() + 1 != n {
            return Err(Error::InvalidSpec(format!(
                "a tree on {n} nodes has {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut edge_between = HashMap::new();
        for (k, e) in edges.iter().enumerate() {
            if e.from >= n || e.to >= n || e.from == e.to {
                return Err(Error::InvalidSpec(format!("edge {} has invalid endpoints", e.id)));
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "edge {} must have positive length, got {}",
                    e.id, e.length
                )));
            }
            adjacency[e.from].push((e.to, e.length));
            adjacency[e.to].push((e.from, e.length));
            edge_between.insert((e.from, e.to), k);
            edge_between.insert((e.to, e.from), k);
        }

        let mut node_dist = vec![f64::INFINITY; n * n];
        let mut next_hop = vec![usize::MAX; n * n];
        for src in 0..n {
            // BFS from src; first hop toward each node is recorded at that node's parent chain
            let mut parent = vec![usize::MAX; n];
            node_dist[src * n + src] = 0.0;
            parent[src] = src;
            let mut queue = VecDeque::from([src]);
            let mut order = Vec::with_capacity(n);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for &(v, l) in &adjacency[u] {
                    if parent[v] == usize::MAX {
                        parent[v] = u;
                        node_dist[src * n + v] = node_dist[src * n + u] + l;
                        queue.push_back(v);
                    }
                }
            }
            if order.len() != n {
                return Err(Error::InvalidSpec("tree is not connected".into()));
            }
            for &v in &order {
                next_hop[src * n + v] = if v == src {
                    src
                } else if parent[v] == src {
                    v
                } else {
                    next_hop[src * n + parent[v]]
                };
            }
        }
        Ok(MetricTree {
            nodes,
            edges,
            node_dist,
            next_hop,
            edge_between,
        })
    }

    /// Three legs of length `leg` glued at a center node `c`. Leg `i` is
    /// edge `i`, with offsets measured from the center.
    pub fn tripod(leg: f64) -> Result<MetricTree> {
        let nodes = ["c", "t1", "t2", "t3"].map(String::from).to_vec();
        let edges = (1..=3)
            .map(|i| TreeEdge {
                id: format!("leg{i}"),
                from: 0,
                to: i,
                length: leg,
            })
            .collect();
        MetricTree::new(nodes, edges)
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_distance(&self, a: usize, b: usize) -> f64 {
        self.node_dist[a * self.n() + b]
    }

    /// The point representing node `v`.
    pub fn node_point(&self, v: usize) -> TreePoint {
        let k = self.edges.iter().position(|e| e.from == v || e.to == v).unwrap_or(0);
        let e = &self.edges[k];
        TreePoint {
            edge: k,
            offset: if e.from == v { 0.0 } else { e.length },
        }
    }

    fn check_point(&self, p: &TreePoint) -> Result<()> {
        match self.edges.get(p.edge) {
            Some(e) if p.offset >= -1e-12 && p.offset <= e.length + 1e-12 => Ok(()),
            Some(e) => Err(Error::Range(format!(
                "offset {} outside edge {} of length {}",
                p.offset, e.id, e.length
            ))),
            None => Err(Error::Range(format!("tree has no edge {}", p.edge))),
        }
    }

    pub fn point_to_node(&self, p: TreePoint, v: usize) -> f64 {
        let e = &self.edges[p.edge];
        (p.offset + self.node_distance(e.from, v)).min(e.length - p.offset + self.node_distance(e.to, v))
    }

    /// Endpoints `(x, y)` through which the geodesic from `p` leaves its edge
    /// and enters the edge of `q`, with the two partial lengths.
    fn exits(&self, p: TreePoint, q: TreePoint) -> (usize, usize, f64, f64) {
        let ep = &self.edges[p.edge];
        let eq = &self.edges[q.edge];
        let mut best = (f64::INFINITY, 0, 0, 0.0, 0.0);
        for (x, dx) in [(ep.from, p.offset), (ep.to, ep.length - p.offset)] {
            for (y, dy) in [(eq.from, q.offset), (eq.to, eq.length - q.offset)] {
                let total = dx + self.node_distance(x, y) + dy;
                if total < best.0 {
                    best = (total, x, y, dx, dy);
                }
            }
        }
        (best.1, best.2, best.3, best.4)
    }

    pub fn distance(&self, p: TreePoint, q: TreePoint) -> f64 {
        if p.edge == q.edge {
            return (p.offset - q.offset).abs();
        }
        let (x, y, dx, dy) = self.exits(p, q);
        dx + self.node_distance(x, y) + dy
    }

    fn point_at(&self, edge: usize, from_node: usize, along: f64) -> TreePoint {
        let e = &self.edges[edge];
        let along = along.clamp(0.0, e.length);
        TreePoint {
            edge,
            offset: if e.from == from_node { along } else { e.length - along },
        }
    }

    /// Point at arclength `s · d(p, q)` from `p` along the geodesic to `q`.
    pub fn geodesic(&self, p: TreePoint, q: TreePoint, s: f64) -> TreePoint {
        if p.edge == q.edge {
            return TreePoint {
                edge: p.edge,
                offset: p.offset + s * (q.offset - p.offset),
            };
        }
        let (x, y, dx, _) = self.exits(p, q);
        let target = s * self.distance(p, q);
        if target <= dx {
            let e = &self.edges[p.edge];
            let offset = if x == e.from {
                p.offset - target
            } else {
                p.offset + target
            };
            return TreePoint {
                edge: p.edge,
                offset: offset.clamp(0.0, e.length),
            };
        }
        let mut rem = target - dx;
        let mut u = x;
        while u != y {
            let v = self.next_hop[u * self.n() + y];
            let k = self.edge_between[&(u, v)];
            let l = self.edges[k].length;
            if rem <= l {
                return self.point_at(k, u, rem);
            }
            rem -= l;
            u = v;
        }
        self.point_at(q.edge, y, rem)
    }

    /// Exact minimizer of `Σ w_i d²(·, P_i)`. On a fixed edge every distance
    /// is affine in the offset (or `|s − s_i|` for points on the edge), so the
    /// objective is one quadratic per edge.
    pub fn barycenter(&self, points: &[(TreePoint, f64)]) -> TreePoint {
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        let mut best = (f64::INFINITY, TreePoint { edge: 0, offset: 0.0 });
        for (k, e) in self.edges.iter().enumerate() {
            let mut num = 0.0;
            for &(p, w) in points {
                if p.edge == k {
                    num += w * p.offset;
                } else {
                    let da = self.point_to_node(p, e.from);
                    let db = self.point_to_node(p, e.to);
                    if da <= db {
                        // d = da + s
                        num -= w * da;
                    } else {
                        // d = db + ℓ − s
                        num += w * (db + e.length);
                    }
                }
            }
            let s = (num / total).clamp(0.0, e.length);
            let cand = TreePoint { edge: k, offset: s };
            let value: f64 = points.iter().map(|&(p, w)| w * self.distance(cand, p).powi(2)).sum();
            if value < best.0 {
                best = (value, cand);
            }
        }
        best.1
    }

    pub fn from_json_str(text: &str) -> Result<MetricTree> {
        let file: TreeFile = serde_json::from_str(text)?;
        let index: HashMap<&str, usize> = file.nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if index.len() != file.nodes.len() {
            return Err(Error::Format("duplicate node names in tree file".into()));
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::Format(format!("unknown tree node {name}")))
        };
        let edges = file
            .edges
            .iter()
            .map(|e| {
                Ok(TreeEdge {
                    id: e.id.clone(),
                    from: lookup(&e.from)?,
                    to: lookup(&e.to)?,
                    length: e.length,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MetricTree::new(file.nodes, edges)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = TreeFile {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| TreeFileEdge {
                    id: e.id.clone(),
                    from: self.nodes[e.from].clone(),
                    to: self.nodes[e.to].clone(),
                    length: e.length,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MetricTree> {
        MetricTree::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// Description of an NPC target.
#[derive(Clone, Debug, PartialEq)]
pub enum NpcTarget {
    Euclidean { dim: usize },
    HyperbolicPlane,
    Tree(MetricTree),
}

/// Both sides and the difference of the quadruple comparison inequality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadrupleResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

fn minkowski(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    -a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn hyperbolic_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = -minkowski(a, b);
    if c > 2.0 {
        c.acosh()
    } else {
        let diff = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        let n2 = minkowski(&diff, &diff).max(0.0);
        2.0 * (0.5 * n2.sqrt()).asinh()
    }
}

/// Rescale onto the upper sheet of the hyperboloid.
fn renormalize(x: [f64; 3]) -> [f64; 3] {
    let q = -minkowski(&x, &x);
    let s = if q > 0.0 { q.sqrt() } else { 1.0 };
    let mut y = x.map(|c| c / s);
    if y[0] < 0.0 {
        y = y.map(|c| -c);
    }
    // pin x0 to the spatial part so the constraint holds to rounding
    y[0] = (1.0 + y[1] * y[1] + y[2] * y[2]).sqrt();
    y
}

fn hyperbolic_log(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    let d = hyperbolic_distance(a, b);
    if d == 0.0 {
        return [0.0; 3];
    }
    let c = -minkowski(a, b);
    let v = [b[0] - c * a[0], b[1] - c * a[1], b[2] - c * a[2]];
    let nv = minkowski(&v, &v).max(0.0).sqrt();
    if nv == 0.0 {
        return [0.0; 3];
    }
    v.map(|x| x * d / nv)
}

fn hyperbolic_exp(a: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    let n = minkowski(v, v).max(0.0).sqrt();
    if n == 0.0 {
        return *a;
    }
    let (ch, sh) = (n.cosh(), n.sinh() / n);
    renormalize([ch * a[0] + sh * v[0], ch * a[1] + sh * v[1], ch * a[2] + sh * v[2]])
}

impl NpcTarget {
    pub fn real_line() -> Self {
        NpcTarget::Euclidean { dim: 1 }
    }

    pub fn label(&self) -> String {
        match self {
            NpcTarget::Euclidean { dim } => format!("euclidean({dim})"),
            NpcTarget::HyperbolicPlane => "hyperbolic_plane".into(),
            NpcTarget::Tree(t) => format!("metric_tree({} edges)", t.edges.len()),
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, NpcTarget::Euclidean { dim: 1 })
    }

    /// Validate that `p` is a point of this target.
    pub fn check(&self, p: &TargetPoint) -> Result<()> {
        match (self, p) {
            (NpcTarget::Euclidean { dim }, TargetPoint::Euclidean { coords }) => {
                if coords.len() == *dim {
                    Ok(())
                } else {
                    Err(Error::TypeMismatch(format!(
                        "point of dimension {} in euclidean({dim})",
                        coords.len()
                    )))
                }
            }
            (NpcTarget::HyperbolicPlane, TargetPoint::Hyperbolic { coords }) => {
                let q = -minkowski(coords, coords);
                if (q - 1.0).abs() <= 1e-10 * coords[0] * coords[0] && coords[0] > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Range(format!(
                        "point {coords:?} violates the hyperboloid constraint"
                    )))
                }
            }
            (NpcTarget::Tree(t), TargetPoint::Tree(tp)) => t.check_point(tp),
            _ => Err(Error::TypeMismatch(format!(
                "{} point in {} target",
                p.kind(),
                self.label()
            ))),
        }
    }

    /// Distance with kind checking.
    pub fn distance(&self, p: &TargetPoint, q: &TargetPoint) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.dist(p, q))
    }

    /// Distance without validation; mismatched kinds give NaN.
    pub fn dist(&self, p: &TargetPoint, q: &TargetPoint) -> f64 {
        match (self, p, q) {
            (
                NpcTarget::Euclidean { .. },
                TargetPoint::Euclidean { coords: a },
                TargetPoint::Euclidean { coords: b },
            ) => {
                if a.len() == 1 {
                    (a[0] - b[0]).abs()
                } else {
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                }
            }
            (
                NpcTarget::HyperbolicPlane,
                TargetPoint::Hyperbolic { coords: a },
                TargetPoint::Hyperbolic { coords: b },
            ) => hyperbolic_distance(a, b),
            (NpcTarget::Tree(t), TargetPoint::Tree(a), TargetPoint::Tree(b)) => t.distance(*a, *b),
            _ => f64::NAN,
        }
    }

    /// Point at arclength `s · d(P, Q)` from `P` on the geodesic to `Q`.
    pub fn geodesic_point(&self, p: &TargetPoint, q: &TargetPoint, s: f64) -> Result<TargetPoint> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Range(format!("geodesic parameter {s} outside [0, 1]")));
        }
        self.check(p)?;
        self.check(q)?;
        Ok(self.interpolate(p, q, s))
    }

    fn interpolate(&self, p: &TargetPoint, q: &TargetPoint, s: f64) -> TargetPoint {
        match (self, p, q) {
            (_, TargetPoint::Euclidean { coords: a }, TargetPoint::Euclidean { coords: b }) => TargetPoint::Euclidean {
                coords: a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect(),
            },
            (_, TargetPoint::Hyperbolic { coords: a }, TargetPoint::Hyperbolic { coords: b }) => {
                if s == 0.0 {
                    return p.clone();
                }
                if s == 1.0 {
                    return q.clone();
                }
                let v = hyperbolic_log(a, b).map(|x| x * s);
                TargetPoint::Hyperbolic {
                    coords: hyperbolic_exp(a, &v),
                }
            }
            (NpcTarget::Tree(t), TargetPoint::Tree(a), TargetPoint::Tree(b)) => {
                TargetPoint::Tree(t.geodesic(*a, *b, s))
            }
            _ => p.clone(),
        }
    }

    /// Point on the geodesic from `from` through `through`, extended past
    /// `through` to parameter `omega ≥ 1`. On trees the extension stays on the
    /// edge containing `through`.
    pub fn extrapolate(&self, from: &TargetPoint, through: &TargetPoint, omega: f64) -> TargetPoint {
        match (self, from, through) {
            (_, TargetPoint::Euclidean { coords: a }, TargetPoint::Euclidean { coords: b }) => TargetPoint::Euclidean {
                coords: a.iter().zip(b).map(|(x, y)| x + omega * (y - x)).collect(),
            },
            (_, TargetPoint::Hyperbolic { coords: a }, TargetPoint::Hyperbolic { coords: b }) => {
                let v = hyperbolic_log(a, b).map(|x| x * omega);
                TargetPoint::Hyperbolic {
                    coords: hyperbolic_exp(a, &v),
                }
            }
            (NpcTarget::Tree(t), TargetPoint::Tree(a), TargetPoint::Tree(b)) => {
                let e = &t.edges[b.edge];
                let extra = (omega - 1.0) * t.distance(*a, *b);
                let offset = if a.edge == b.edge {
                    if b.offset >= a.offset {
                        b.offset + extra
                    } else {
                        b.offset - extra
                    }
                } else {
                    let (_, y, _, _) = t.exits(*a, *b);
                    if y == e.from {
                        b.offset + extra
                    } else {
                        b.offset - extra
                    }
                };
                TargetPoint::tree(b.edge, offset.clamp(0.0, e.length))
            }
            _ => through.clone(),
        }
    }

    /// `Σ w_i d²(q, P_i)`.
    pub fn barycenter_objective(&self, q: &TargetPoint, points: &[(TargetPoint, f64)]) -> f64 {
        points.iter().map(|(p, w)| w * self.dist(q, p).powi(2)).sum()
    }

    /// Unique minimizer of `Σ w_i d²(·, P_i)`.
    ///
    /// Euclidean targets use the weighted mean and trees the exact per-edge
    /// quadratic minimization. The hyperbolic plane runs the fixed-point
    /// iteration `q ← exp_q(Σ w_i log_q P_i / Σ w_i)` from the normalized
    /// Minkowski mean until the step is below `tol`.
    pub fn weighted_barycenter(&self, points: &[(TargetPoint, f64)], tol: f64) -> Result<TargetPoint> {
        let total: f64 = points.iter().map(|(_, w)| *w).sum();
        if points.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::Range("barycenter weights must be nonnegative".into()));
        }
        if !(total > 0.0) {
            return Err(Error::Degenerate("all barycenter weights are zero".into()));
        }
        for (p, _) in points {
            self.check(p)?;
        }
        Ok(self.barycenter_unchecked(points, total, tol))
    }

    pub(crate) fn barycenter_unchecked(&self, points: &[(TargetPoint, f64)], total: f64, tol: f64) -> TargetPoint {
        match self {
            NpcTarget::Euclidean { dim } => {
                let mut acc = vec![0.0; *dim];
                for (p, w) in points {
                    if let TargetPoint::Euclidean { coords } = p {
                        for (a, c) in acc.iter_mut().zip(coords) {
                            *a += w * c;
                        }
                    }
                }
                TargetPoint::Euclidean {
                    coords: acc.into_iter().map(|a| a / total).collect(),
                }
            }
            NpcTarget::HyperbolicPlane => {
                let coords: Vec<([f64; 3], f64)> = points
                    .iter()
                    .filter_map(|(p, w)| match p {
                        TargetPoint::Hyperbolic { coords } => Some((*coords, *w)),
                        _ => None,
                    })
                    .collect();
                let mut mean = [0.0; 3];
                for (c, w) in &coords {
                    for k in 0..3 {
                        mean[k] += w * c[k];
                    }
                }
                let mut q = renormalize(mean);
                for _ in 0..BARYCENTER_MAX_ITER {
                    let mut g = [0.0; 3];
                    for (c, w) in &coords {
                        let l = hyperbolic_log(&q, c);
                        for k in 0..3 {
                            g[k] += w * l[k] / total;
                        }
                    }
                    let step = minkowski(&g, &g).max(0.0).sqrt();
                    q = hyperbolic_exp(&q, &g);
                    if step < tol {
                        break;
                    }
                }
                TargetPoint::Hyperbolic { coords: q }
            }
            NpcTarget::Tree(t) => {
                let pts: Vec<(TreePoint, f64)> = points
                    .iter()
                    .filter_map(|(p, w)| p.as_tree().map(|tp| (tp, *w)))
                    .collect();
                TargetPoint::Tree(t.barycenter(&pts))
            }
        }
    }

    /// Barycenter by cyclic pairwise geodesic averaging: the running estimate
    /// moves toward `P_i` by the fraction `w_i / (accumulated weight)`, cycling
    /// through the inputs in order. Converges for every CAT(0) target, but
    /// only at rate `O(k^{-1/2})`; it serves as a kind-independent reference.
    pub fn cyclic_barycenter(&self, points: &[(TargetPoint, f64)], tol: f64, max_iter: usize) -> Result<TargetPoint> {
        let total: f64 = points.iter().map(|(_, w)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("all barycenter weights are zero".into()));
        }
        let active: Vec<&(TargetPoint, f64)> = points.iter().filter(|(_, w)| *w > 0.0).collect();
        let mut q = active[0].0.clone();
        let mut acc = active[0].1;
        for k in 1..max_iter {
            let (p, w) = active[k % active.len()];
            acc += w;
            let next = self.interpolate(&q, p, w / acc);
            let moved = self.dist(&q, &next);
            q = next;
            if moved < tol && k >= active.len() {
                break;
            }
        }
        Ok(q)
    }

    /// Largest decrease of the barycenter objective obtained by moving `q` a
    /// fraction `step` of the way toward any input point.
    pub fn barycenter_optimality_gap(&self, q: &TargetPoint, points: &[(TargetPoint, f64)], step: f64) -> f64 {
        let f0 = self.barycenter_objective(q, points);
        points
            .iter()
            .map(|(p, _)| f0 - self.barycenter_objective(&self.interpolate(q, p, step), points))
            .fold(0.0, f64::max)
    }

    /// Quadruple comparison inequality for an ordered `(P, Q, R, S)` with
    /// `Q_m` the midpoint of `QR`:
    /// `(d_PS − d_QR)·d_QR ≥ (d²_PQm − d²_PQ − d²_QmQ) + (d²_SQm − d²_SR − d²_QmR)`.
    pub fn npc_quadruple_residual(
        &self,
        p: &TargetPoint,
        q: &TargetPoint,
        r: &TargetPoint,
        s: &TargetPoint,
    ) -> QuadrupleResidual {
        let qm = self.interpolate(q, r, 0.5);
        let d = |a: &TargetPoint, b: &TargetPoint| self.dist(a, b);
        let d_qr = d(q, r);
        let lhs = (d(p, s) - d_qr) * d_qr;
        let rhs = (d(p, &qm).powi(2) - d(p, q).powi(2) - d(&qm, q).powi(2))
            + (d(s, &qm).powi(2) - d(s, r).powi(2) - d(&qm, r).powi(2));
        QuadrupleResidual {
            lhs,
            rhs,
            residual: lhs - rhs,
        }
    }

    /// Random point; coordinates in `[−scale, scale]`.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> TargetPoint {
        match self {
            NpcTarget::Euclidean { dim } => TargetPoint::Euclidean {
                coords: (0..*dim).map(|_| rng.gen_range(-scale..=scale)).collect(),
            },
            NpcTarget::HyperbolicPlane => {
                TargetPoint::hyperbolic_from_plane(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale))
            }
            NpcTarget::Tree(t) => {
                let k = rng.gen_range(0..t.edges.len());
                TargetPoint::tree(k, rng.gen_range(0.0..=t.edges[k].length))
            }
        }
    }

    /// Diameter of a finite point set. Scalars use `max − min` and trees a
    /// double sweep (exact for tree metrics); other targets compare all pairs.
    pub fn diameter(&self, points: &[&TargetPoint]) -> f64 {
        if points.len() < 2 {
            return 0.0;
        }
        if self.is_scalar() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in points {
                let x = p.as_scalar().unwrap_or(f64::NAN);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            return hi - lo;
        }
        if let NpcTarget::Tree(_) = self {
            let far = |from: &TargetPoint| {
                points
                    .iter()
                    .map(|p| (self.dist(from, p), *p))
                    .fold((f64::NEG_INFINITY, points[0]), |a, b| if b.0 > a.0 { b } else { a })
            };
            let (_, a) = far(points[0]);
            return far(a).0;
        }
        let mut best: f64 = 0.0;
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                best = best.max(self.dist(p, q));
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tripod() -> NpcTarget {
        NpcTarget::Tree(MetricTree::tripod(1.0).unwrap())
    }

    #[test]
    fn distance_examples() {
        let e2 = NpcTarget::Euclidean { dim: 2 };
        let d = e2
            .distance(
                &TargetPoint::euclidean(&[0.0, 0.0]),
                &TargetPoint::euclidean(&[3.0, 4.0]),
            )
            .unwrap();
        assert_eq!(d, 5.0);

        let t = tripod();
        let d = t
            .distance(&TargetPoint::tree(0, 0.4), &TargetPoint::tree(1, 0.5))
            .unwrap();
        assert!((d - 0.9).abs() < 1e-15);

        let h = NpcTarget::HyperbolicPlane;
        let p = TargetPoint::Hyperbolic {
            coords: [1.0, 0.0, 0.0],
        };
        let q = TargetPoint::Hyperbolic {
            coords: [1f64.cosh(), 1f64.sinh(), 0.0],
        };
        assert!((h.distance(&p, &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mismatched_kinds_are_type_errors() {
        let err = NpcTarget::HyperbolicPlane.distance(&TargetPoint::scalar(1.0), &TargetPoint::scalar(2.0));
        assert!(matches!(err, Err(Error::TypeMismatch(_))));
        let err = NpcTarget::real_line().distance(&TargetPoint::euclidean(&[1.0, 2.0]), &TargetPoint::scalar(0.0));
        assert!(matches!(err, Err(Error::TypeMismatch(_))));
    }

    #[test]
    fn geodesic_examples() {
        let e2 = NpcTarget::Euclidean { dim: 2 };
        let p = TargetPoint::euclidean(&[0.0, 0.0]);
        let q = TargetPoint::euclidean(&[2.0, 0.0]);
        assert_eq!(e2.geodesic_point(&p, &q, 0.0).unwrap(), p);
        assert_eq!(
            e2.geodesic_point(&p, &q, 0.5).unwrap(),
            TargetPoint::euclidean(&[1.0, 0.0])
        );
        assert!(matches!(e2.geodesic_point(&p, &q, 1.5), Err(Error::Range(_))));

        let t = tripod();
        let mid = t
            .geodesic_point(&TargetPoint::tree(0, 0.8), &TargetPoint::tree(1, 0.4), 0.5)
            .unwrap();
        let TargetPoint::Tree(tp) = mid else { panic!() };
        assert_eq!(tp.edge, 0);
        assert!((tp.offset - 0.2).abs() < 1e-15);
    }

    #[test]
    fn tree_geodesic_crosses_interior_nodes() {
        // path graph a - b - c - d with lengths 1, 2, 3
        let nodes = ["a", "b", "c", "d"].map(String::from).to_vec();
        let edge = |id: &str, from, to, length| TreeEdge {
            id: id.into(),
            from,
            to,
            length,
        };
        let tree = MetricTree::new(
            nodes,
            vec![edge("ab", 0, 1, 1.0), edge("bc", 1, 2, 2.0), edge("cd", 2, 3, 3.0)],
        )
        .unwrap();
        let p = TreePoint { edge: 0, offset: 0.5 };
        let q = TreePoint { edge: 2, offset: 1.0 };
        assert!((tree.distance(p, q) - 3.5).abs() < 1e-15);
        let m = tree.geodesic(p, q, 0.5);
        assert_eq!(m.edge, 1);
        assert!((m.offset - 1.25).abs() < 1e-15);
    }

    #[test]
    fn barycenter_examples() {
        let e1 = NpcTarget::real_line();
        let single = e1
            .weighted_barycenter(&[(TargetPoint::scalar(3.0), 2.0)], 1e-10)
            .unwrap();
        assert_eq!(single, TargetPoint::scalar(3.0));

        let h = NpcTarget::HyperbolicPlane;
        let a = TargetPoint::hyperbolic_from_plane(0.3, -0.2);
        let b = TargetPoint::hyperbolic_from_plane(-1.0, 0.7);
        let m = h
            .weighted_barycenter(&[(a.clone(), 1.0), (b.clone(), 1.0)], 1e-12)
            .unwrap();
        let mid = h.geodesic_point(&a, &b, 0.5).unwrap();
        assert!(h.dist(&m, &mid) < 1e-10);

        let t = tripod();
        let tips: Vec<_> = (0..3).map(|k| (TargetPoint::tree(k, 1.0), 1.0)).collect();
        let c = t.weighted_barycenter(&tips, 1e-10).unwrap();
        assert!(t.dist(&c, &TargetPoint::tree(0, 0.0)) < 1e-12);
    }

    #[test]
    fn tripod_barycenter_matches_grid_search() {
        let t = tripod();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let pts: Vec<_> = (0..4)
                .map(|_| (t.random_point(&mut rng, 1.0), rng.gen_range(0.1..2.0)))
                .collect();
            let b = t.weighted_barycenter(&pts, 1e-10).unwrap();
            let fb = t.barycenter_objective(&b, &pts);
            // brute force over a fine grid of tree points
            let mut best = f64::INFINITY;
            for k in 0..3 {
                for i in 0..=2000 {
                    let q = TargetPoint::tree(k, i as f64 / 2000.0);
                    best = best.min(t.barycenter_objective(&q, &pts));
                }
            }
            assert!(fb <= best + 1e-9, "{fb} > {best}");
            assert!(best - fb < 1e-5);
        }
    }

    #[test]
    fn cyclic_averaging_approaches_the_exact_barycenter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for target in [NpcTarget::HyperbolicPlane, tripod(), NpcTarget::Euclidean { dim: 2 }] {
            let pts: Vec<_> = (0..5)
                .map(|_| (target.random_point(&mut rng, 1.0), rng.gen_range(0.5..1.5)))
                .collect();
            let exact = target.weighted_barycenter(&pts, 1e-12).unwrap();
            let slow = target.cyclic_barycenter(&pts, 0.0, 200_000).unwrap();
            assert!(target.dist(&exact, &slow) < 1e-2, "{}", target.label());
            assert!(target.barycenter_optimality_gap(&exact, &pts, 1e-3) < 1e-10);
        }
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let err = NpcTarget::real_line().weighted_barycenter(&[(TargetPoint::scalar(1.0), 0.0)], 1e-10);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn quadruple_examples() {
        let e1 = NpcTarget::real_line();
        let pt = TargetPoint::scalar;
        let r = e1.npc_quadruple_residual(&pt(0.0), &pt(1.0), &pt(3.0), &pt(4.0));
        assert_eq!((r.lhs, r.rhs, r.residual), (4.0, 4.0, 0.0));
        let r = e1.npc_quadruple_residual(&pt(0.5), &pt(2.0), &pt(2.0), &pt(-1.0));
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
    }

    #[test]
    fn hyperbolic_operations_stay_on_the_hyperboloid() {
        let h = NpcTarget::HyperbolicPlane;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = h.random_point(&mut rng, 3.0);
            let b = h.random_point(&mut rng, 3.0);
            let g = h.geodesic_point(&a, &b, rng.gen_range(0.0..1.0)).unwrap();
            h.check(&g).unwrap();
            h.check(&h.extrapolate(&a, &b, 1.7)).unwrap();
        }
    }

    #[test]
    fn tree_file_round_trip() {
        let tree = MetricTree::tripod(1.5).unwrap();
        let text = tree.to_json_string().unwrap();
        assert_eq!(MetricTree::from_json_str(&text).unwrap(), tree);
        assert!(MetricTree::from_json_str(
            r#"{"nodes":["a","b"],"edges":[{"id":"e","from":"a","to":"b","length":0.0}]}"#
        )
        .is_err());
    }

    #[test]
    fn tree_diameter_matches_pairwise() {
        let t = tripod();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..40).map(|_| t.random_point(&mut rng, 1.0)).collect();
        let refs: Vec<&TargetPoint> = pts.iter().collect();
        let mut brute: f64 = 0.0;
        for p in &pts {
            for q in &pts {
                brute = brute.max(t.dist(p, q));
            }
        }
        assert!((t.diameter(&refs) - brute).abs() < 1e-14);
    }
}
