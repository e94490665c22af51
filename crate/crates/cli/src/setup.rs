//! Meshes, targets and boundary data from a configuration.

use std::f64::consts::PI;
use std::path::Path;

use conelab_core::{ChartPoint, ConeSpec, DomainMesh, MetricTree, NpcTarget, TargetPoint, TreePoint};

use crate::config::{BoundaryConfig, DomainConfig, TargetConfig};
use crate::error::CliError;

pub fn cone_spec(domain: &DomainConfig, level: u32) -> ConeSpec {
    ConeSpec::new(domain.total_angle_pi * PI, domain.radius, level).with_base_rings(domain.base_rings)
}

/// The configured mesh, at `level` unless it comes from a file.
pub fn build_mesh(domain: &DomainConfig, level: u32) -> Result<DomainMesh, CliError> {
    let mesh = match &domain.mesh_file {
        Some(path) => DomainMesh::load(path)?,
        None => DomainMesh::build_cone(&cone_spec(domain, level))?,
    };
    match domain.curvature_bound {
        Some(k) => Ok(mesh.with_curvature_bound(k)?),
        None => Ok(mesh),
    }
}

pub fn build_target(cfg: &TargetConfig) -> Result<NpcTarget, CliError> {
    Ok(match cfg {
        TargetConfig::RealLine => NpcTarget::real_line(),
        TargetConfig::Euclidean { dim } => {
            if *dim == 0 {
                return Err(CliError::Config("euclidean target needs dim ≥ 1".into()));
            }
            NpcTarget::Euclidean { dim: *dim }
        }
        TargetConfig::HyperbolicPlane => NpcTarget::HyperbolicPlane,
        TargetConfig::Tripod { leg } => NpcTarget::Tree(MetricTree::tripod(*leg)?),
        TargetConfig::Tree { file } => NpcTarget::Tree(MetricTree::load(file)?),
    })
}

/// Boundary data as a function of the chart point.
pub struct BoundaryData {
    kind: BoundaryKind,
    total_angle: f64,
}

enum BoundaryKind {
    Cosine {
        alpha: f64,
        amplitude: f64,
        target: NpcTarget,
    },
    Walk {
        stops: Vec<(f64, TreePoint)>,
        length: f64,
        tree: NpcTarget,
    },
    Table {
        rows: Vec<(f64, TargetPoint)>,
        target: NpcTarget,
    },
}

impl BoundaryData {
    pub fn new(cfg: &BoundaryConfig, target: &NpcTarget, total_angle: f64) -> Result<Self, CliError> {
        let kind = match cfg {
            BoundaryConfig::CosPhi { amplitude } => cosine(1.0, *amplitude, target, total_angle)?,
            BoundaryConfig::CosAlphaPhi { alpha, amplitude } => {
                cosine(alpha.unwrap_or(2.0 * PI / total_angle), *amplitude, target, total_angle)?
            }
            BoundaryConfig::TreeLegEmbed => match target {
                NpcTarget::Tree(t) => {
                    let (stops, length) = euler_walk(t);
                    BoundaryKind::Walk {
                        stops,
                        length,
                        tree: target.clone(),
                    }
                }
                _ => return Err(CliError::Config("tree_leg_embed needs a tree target".into())),
            },
            BoundaryConfig::Tabulated { file } => BoundaryKind::Table {
                rows: read_table(file, target, total_angle)?,
                target: target.clone(),
            },
        };
        Ok(BoundaryData { kind, total_angle })
    }

    pub fn value(&self, p: ChartPoint) -> TargetPoint {
        let phi = p.phi.rem_euclid(self.total_angle);
        match &self.kind {
            BoundaryKind::Cosine {
                alpha,
                amplitude,
                target,
            } => embed_scalar(target, amplitude * (alpha * phi).cos()),
            BoundaryKind::Walk { stops, length, tree } => {
                let s = phi / self.total_angle * length;
                let i = stops
                    .partition_point(|&(a, _)| a <= s)
                    .saturating_sub(1)
                    .min(stops.len() - 2);
                let (a, p) = stops[i];
                let (b, q) = stops[i + 1];
                let frac = if b > a {
                    ((s - a) / (b - a)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                tree.geodesic_point(&TargetPoint::Tree(p), &TargetPoint::Tree(q), frac)
                    .expect("fraction lies in [0, 1]")
            }
            BoundaryKind::Table { rows, target } => {
                let i = rows.partition_point(|(a, _)| *a <= phi);
                let (a, p) = if i == 0 {
                    let (a, p) = rows.last().expect("table is nonempty");
                    (a - self.total_angle, p)
                } else {
                    (rows[i - 1].0, &rows[i - 1].1)
                };
                let (b, q) = if i == rows.len() {
                    (rows[0].0 + self.total_angle, &rows[0].1)
                } else {
                    (rows[i].0, &rows[i].1)
                };
                let frac = if b > a {
                    ((phi - a) / (b - a)).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                target.geodesic_point(p, q, frac).expect("fraction lies in [0, 1]")
            }
        }
    }

    /// `α` of cosine data.
    pub fn cosine_exponent(&self) -> Option<f64> {
        match &self.kind {
            BoundaryKind::Cosine { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// Harmonic extension `amplitude (r/R)^α cos αφ` for scalar cosine data.
    pub fn closed_form(&self, radius: f64) -> Option<impl Fn(ChartPoint) -> f64 + '_> {
        match &self.kind {
            BoundaryKind::Cosine {
                alpha,
                amplitude,
                target,
            } if target.is_scalar() => {
                Some(move |p: ChartPoint| amplitude * (p.r / radius).powf(*alpha) * (alpha * p.phi).cos())
            }
            _ => None,
        }
    }
}

fn cosine(alpha: f64, amplitude: f64, target: &NpcTarget, total_angle: f64) -> Result<BoundaryKind, CliError> {
    let turns = alpha * total_angle / (2.0 * PI);
    if !(alpha > 0.0) || (turns - turns.round()).abs() > 1e-9 {
        return Err(CliError::Config(format!(
            "cos(αφ) with α = {alpha} is not periodic on a cone of angle {total_angle}"
        )));
    }
    if matches!(target, NpcTarget::Tree(_)) {
        return Err(CliError::Config(
            "cosine boundary data needs a euclidean or hyperbolic target".into(),
        ));
    }
    Ok(BoundaryKind::Cosine {
        alpha,
        amplitude,
        target: target.clone(),
    })
}

fn embed_scalar(target: &NpcTarget, v: f64) -> TargetPoint {
    match target {
        NpcTarget::Euclidean { dim } => {
            let mut coords = vec![0.0; *dim];
            coords[0] = v;
            TargetPoint::euclidean(&coords)
        }
        NpcTarget::HyperbolicPlane => TargetPoint::hyperbolic_from_plane(v, 0.0),
        NpcTarget::Tree(_) => unreachable!("rejected at construction"),
    }
}

/// Closed depth-first walk from node 0 visiting every edge twice, as
/// `(arclength, point)` stops.
fn euler_walk(tree: &MetricTree) -> (Vec<(f64, TreePoint)>, f64) {
    let mut stops = vec![(0.0, tree.node_point(0))];
    let mut length = 0.0;
    walk(tree, 0, None, &mut stops, &mut length);
    (stops, length)
}

fn walk(tree: &MetricTree, node: usize, parent: Option<usize>, stops: &mut Vec<(f64, TreePoint)>, length: &mut f64) {
    for (k, e) in tree.edges().iter().enumerate() {
        let (next, forward) = if e.from == node {
            (e.to, true)
        } else if e.to == node {
            (e.from, false)
        } else {
            continue;
        };
        if Some(next) == parent {
            continue;
        }
        let far = if forward { e.length } else { 0.0 };
        *length += e.length;
        stops.push((*length, TreePoint { edge: k, offset: far }));
        walk(tree, next, Some(node), stops, length);
        *length += e.length;
        stops.push((
            *length,
            TreePoint {
                edge: k,
                offset: e.length - far,
            },
        ));
    }
}

fn read_table(path: &Path, target: &NpcTarget, total_angle: f64) -> Result<Vec<(f64, TargetPoint)>, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("phi") {
        return Err(CliError::Config(format!(
            "{}: first column must be phi",
            path.display()
        )));
    }
    let width = match target {
        NpcTarget::Euclidean { dim } => *dim,
        NpcTarget::HyperbolicPlane => 2,
        NpcTarget::Tree(_) => {
            return Err(CliError::Config(
                "tabulated boundary data needs a euclidean or hyperbolic target".into(),
            ))
        }
    };
    if headers.len() != width + 1 {
        return Err(CliError::Config(format!(
            "{}: expected {} value columns, found {}",
            path.display(),
            width,
            headers.len() - 1
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let nums: Vec<f64> = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let point = match target {
            NpcTarget::HyperbolicPlane => TargetPoint::hyperbolic_from_plane(nums[1], nums[2]),
            _ => TargetPoint::euclidean(&nums[1..]),
        };
        rows.push((nums[0], point));
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: table is empty", path.display())));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) || rows[0].0 < 0.0 || rows[rows.len() - 1].0 >= total_angle {
        return Err(CliError::Config(format!(
            "{}: phi must increase within [0, {total_angle})",
            path.display()
        )));
    }
    Ok(rows)
}
