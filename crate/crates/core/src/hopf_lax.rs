//! The two-parameter inf-convolution
//!
//! ```text
//! f_t(x, λ) = min_{y ∈ Ω'} e^{−2nkλ} |xy|² / (2t) − d(u(x), u(y))
//! ```
//!
//! of a map `u`, evaluated at the vertices of an inner set `Ω''`, together
//! with residuals of the inequalities it satisfies when `u` is harmonic and
//! the domain has curvature bounded below by `k`.
//!
//! With `C_* = 2 osc_{Ω'} u + 2`, every minimizer lies within `√(C_* t)` of
//! `x`, so the search is restricted to that ball. This needs
//! `t < t_0 = dist²(Ω'', ∂Ω') / (4 C_*)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::DomainMesh;
use crate::energy::MapState;
use crate::error::{Error, Result};
use crate::regularity::{oscillation_on, pointwise_lipschitz};

/// Relative slack for inequalities that hold exactly up to rounding.
const ROUNDING_SLACK: f64 = 1e-9;

/// Default tolerance on values defining the discrete argmin set.
pub const DEFAULT_ARGMIN_TOL: f64 = 1e-9;

/// Inputs of a Hopf–Lax evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfLaxConfig {
    pub t: f64,
    /// Increasing values in `[0, 1]`.
    pub lambda_grid: Vec<f64>,
    /// `Ω'`: vertices searched for minimizers.
    pub outer: Vec<usize>,
    /// `Ω''`: vertices at which `f_t` is evaluated.
    pub inner: Vec<usize>,
    /// Values within this much of the minimum define the argmin set.
    pub argmin_tol: f64,
}

impl HopfLaxConfig {
    pub fn new(t: f64, lambda_grid: Vec<f64>, outer: Vec<usize>, inner: Vec<usize>) -> Self {
        HopfLaxConfig {
            t,
            lambda_grid,
            outer,
            inner,
            argmin_tol: DEFAULT_ARGMIN_TOL,
        }
    }
}

/// `0, Δ, 2Δ, …, 1`.
pub fn uniform_lambda_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Range(format!("λ step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::Configuration(format!("λ step {step} does not divide [0, 1]")));
    }
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Constants fixed by `u`, `Ω'`, `Ω''` and the curvature bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HopfLaxConstants {
    pub n: usize,
    pub k: f64,
    pub osc: f64,
    pub c_star: f64,
    /// `dist(Ω'', ∂Ω')`.
    pub separation: f64,
    pub t0: f64,
}

impl HopfLaxConstants {
    /// `e^{−2nkλ}`.
    pub fn weight(&self, lambda: f64) -> f64 {
        (-2.0 * self.n as f64 * self.k * lambda).exp()
    }

    /// Compute the constants of a configuration.
    pub fn of(mesh: &DomainMesh, map: &MapState, outer: &[usize], inner: &[usize]) -> Result<HopfLaxConstants> {
        let k = mesh.curvature_bound().value().ok_or_else(|| {
            Error::UnsupportedCurvature("the inf-convolution needs a finite lower curvature bound".into())
        })?;
        if outer.is_empty() || inner.is_empty() {
            return Err(Error::Configuration("Ω' and Ω'' must be nonempty".into()));
        }
        let mut in_outer = vec![false; mesh.num_vertices()];
        for &v in outer {
            if v >= mesh.num_vertices() {
                return Err(Error::OutOfDomain(format!("vertex {v}")));
            }
            in_outer[v] = true;
        }
        if let Some(&v) = inner.iter().find(|&&v| v >= mesh.num_vertices() || !in_outer[v]) {
            return Err(Error::Configuration(format!("vertex {v} of Ω'' is not in Ω'")));
        }
        let rim: Vec<usize> = outer
            .iter()
            .copied()
            .filter(|&v| mesh.is_boundary(v) || mesh.neighbors(v).iter().any(|n| !in_outer[n.vertex]))
            .collect();
        let separation = inner
            .par_iter()
            .map(|&x| {
                rim.iter()
                    .map(|&y| mesh.vertex_distance(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min);
        let osc = oscillation_on(map, outer);
        let c_star = 2.0 * osc + 2.0;
        Ok(HopfLaxConstants {
            n: mesh.dimension(),
            k,
            osc,
            c_star,
            separation,
            t0: separation * separation / (4.0 * c_star),
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Parameter(format!("t must be positive, got {t}")));
        }
        if t >= self.t0 {
            return Err(Error::Parameter(format!(
                "t = {t} violates t < t_0 = dist²(Ω'', ∂Ω')/(4C_*) = {}",
                self.t0
            )));
        }
        Ok(())
    }
}

/// Value, argmin set and distance to it for one `(x, λ)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct HopfLaxCell {
    pub value: f64,
    /// Vertices whose objective is within the argmin tolerance of the
    /// minimum, in index order.
    pub argmin: Vec<usize>,
    /// Distance from `x` to the argmin set.
    pub l: f64,
}

/// Minimization candidates around one vertex: `(y, |xy|, d(u(x), u(y)))`.
struct Candidates(Vec<(usize, f64, f64)>);

impl Candidates {
    fn gather(mesh: &DomainMesh, map: &MapState, in_outer: &[bool], x: usize, radius: f64) -> Candidates {
        Candidates(
            mesh.closed_ball(x, radius)
                .into_iter()
                .filter(|&(y, _)| in_outer[y])
                .map(|(y, s)| (y, s, map.dist(x, y)))
                .collect(),
        )
    }

    fn cell(&self, weight: f64, t: f64, tol: f64) -> HopfLaxCell {
        let objective = |s: f64, d: f64| weight * s * s / (2.0 * t) - d;
        let min = self
            .0
            .iter()
            .map(|&(_, s, d)| objective(s, d))
            .fold(f64::INFINITY, f64::min);
        let mut argmin = Vec::new();
        let mut l = f64::INFINITY;
        for &(y, s, d) in &self.0 {
            if objective(s, d) <= min + tol {
                argmin.push(y);
                l = l.min(s);
            }
        }
        HopfLaxCell { value: min, argmin, l }
    }
}

/// `f_t(x, λ)` on `Ω'' × grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct HopfLaxField {
    pub t: f64,
    pub lambda_grid: Vec<f64>,
    pub inner: Vec<usize>,
    /// `cells[i][j]` belongs to `(inner[i], lambda_grid[j])`.
    pub cells: Vec<Vec<HopfLaxCell>>,
    pub constants: HopfLaxConstants,
    pub mesh_spacing: f64,
    pub argmin_tol: f64,
    position: Vec<usize>,
}

impl HopfLaxField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].value
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.cells[i][j].l
    }

    /// Row of `inner` holding vertex `v`.
    pub fn row_of(&self, v: usize) -> Option<usize> {
        match self.position.get(v) {
            Some(&i) if i != usize::MAX => Some(i),
            _ => None,
        }
    }

    /// Cells whose minimizer is not `x` itself (`f < 0`).
    pub fn nontrivial_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.value < 0.0).count()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() * self.lambda_grid.len()
    }

    /// CSV with columns `vertex, lambda, f, L, argmin_size`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "lambda", "f", "L", "argmin_size"])
            .map_err(crate::energy::csv_error)?;
        for (i, &v) in self.inner.iter().enumerate() {
            for (j, &lambda) in self.lambda_grid.iter().enumerate() {
                let c = &self.cells[i][j];
                w.write_record([
                    v.to_string(),
                    lambda.to_string(),
                    c.value.to_string(),
                    c.l.to_string(),
                    c.argmin.len().to_string(),
                ])
                .map_err(crate::energy::csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Configuration("λ grid is empty".into()));
    }
    if grid.iter().any(|l| !(0.0..=1.0).contains(l)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration(format!(
            "λ grid must increase within [0, 1], got {grid:?}"
        )));
    }
    Ok(())
}

fn outer_mask(mesh: &DomainMesh, outer: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; mesh.num_vertices()];
    for &v in outer {
        mask[v] = true;
    }
    mask
}

/// Evaluate `f_t` on `Ω''` for every λ in the grid.
pub fn compute_hopf_lax(mesh: &DomainMesh, map: &MapState, cfg: &HopfLaxConfig) -> Result<HopfLaxField> {
    check_grid(&cfg.lambda_grid)?;
    if !(cfg.argmin_tol >= 0.0) {
        return Err(Error::Range(format!(
            "argmin tolerance must be nonnegative, got {}",
            cfg.argmin_tol
        )));
    }
    let constants = HopfLaxConstants::of(mesh, map, &cfg.outer, &cfg.inner)?;
    constants.check_time(cfg.t)?;
    let radius = (constants.c_star * cfg.t).sqrt();
    let in_outer = outer_mask(mesh, &cfg.outer);
    let cells: Vec<Vec<HopfLaxCell>> = cfg
        .inner
        .par_iter()
        .map(|&x| {
            let cand = Candidates::gather(mesh, map, &in_outer, x, radius);
            if cand.0.len() < 2 {
                return Err(Error::Resolution(format!(
                    "search ball of radius {radius} around vertex {x} holds no other vertex"
                )));
            }
            if constants.k == 0.0 {
                let cell = cand.cell(1.0, cfg.t, cfg.argmin_tol);
                Ok(vec![cell; cfg.lambda_grid.len()])
            } else {
                Ok(cfg
                    .lambda_grid
                    .iter()
                    .map(|&lambda| cand.cell(constants.weight(lambda), cfg.t, cfg.argmin_tol))
                    .collect())
            }
        })
        .collect::<Result<_>>()?;
    let mut position = vec![usize::MAX; mesh.num_vertices()];
    for (i, &v) in cfg.inner.iter().enumerate() {
        position[v] = i;
    }
    Ok(HopfLaxField {
        t: cfg.t,
        lambda_grid: cfg.lambda_grid.clone(),
        inner: cfg.inner.clone(),
        cells,
        constants,
        mesh_spacing: mesh.mesh_spacing(),
        argmin_tol: cfg.argmin_tol,
        position,
    })
}

/// Counts for one inequality checked over many cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderCheck {
    pub checked: usize,
    pub violations: usize,
    /// Smallest slack observed; negative iff some cell violates.
    pub worst_margin: f64,
    /// Tolerance added to the inequality (largest value if it varies).
    pub tolerance: f64,
}

impl CylinderCheck {
    fn new(tolerance: f64) -> Self {
        CylinderCheck {
            checked: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            tolerance,
        }
    }

    fn record(&mut self, margin: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < 0.0 {
            self.violations += 1;
        }
    }

    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        }
    }
}

/// Residuals of the pointwise inequalities of `f_t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderCheckReport {
    /// `−osc ≤ f ≤ 0`.
    pub range: CylinderCheck,
    /// `|f(λ) − f(λ')| ≤ e^{−2nk} C_* |λ − λ'|` over all grid pairs.
    pub lambda_lipschitz: CylinderCheck,
    /// `L ≤ √(C_* t) + h`.
    pub argmin_distance: CylinderCheck,
    /// `(f(λ+Δ) − f(λ))/Δ + e^{−2nkλ}(nk/t) L²(λ) ≥ −C_* Δ`.
    pub lambda_derivative: CylinderCheck,
    /// The same difference quotient against `L²(λ + Δ)`, which holds without
    /// tolerance because each objective is convex in λ.
    pub lambda_derivative_right: CylinderCheck,
    pub nontrivial_cells: usize,
    pub cells: usize,
}

/// Check range, λ-Lipschitz, argmin-distance and λ-derivative bounds.
pub fn hopf_lax_property_residuals(field: &HopfLaxField) -> Result<CylinderCheckReport> {
    let grid = &field.lambda_grid;
    if grid.windows(2).any(|w| w[1] - w[0] > 0.05 + 1e-12) {
        return Err(Error::Configuration("λ grid spacing exceeds 0.05".into()));
    }
    let c = &field.constants;
    let lip_bound = (-2.0 * c.n as f64 * c.k).exp() * c.c_star;
    let l_bound = (c.c_star * field.t).sqrt() + field.mesh_spacing;
    let nk = c.n as f64 * c.k;
    let max_step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let mut range = CylinderCheck::new(0.0);
    let mut lambda_lipschitz = CylinderCheck::new(0.0);
    let mut argmin_distance = CylinderCheck::new(field.mesh_spacing);
    let mut lambda_derivative = CylinderCheck::new(c.c_star * max_step);
    let mut lambda_derivative_right = CylinderCheck::new(ROUNDING_SLACK);
    for row in &field.cells {
        for cell in row {
            range.record((-cell.value).min(cell.value + c.osc));
            argmin_distance.record(l_bound - cell.l);
        }
        for j in 0..row.len() {
            for jj in j + 1..row.len() {
                let bound = lip_bound * (grid[jj] - grid[j]);
                lambda_lipschitz.record(bound - (row[jj].value - row[j].value).abs());
            }
        }
        for j in 0..row.len().saturating_sub(1) {
            let step = grid[j + 1] - grid[j];
            let quotient = (row[j + 1].value - row[j].value) / step;
            let curvature = c.weight(grid[j]) * nk / field.t * row[j].l * row[j].l;
            lambda_derivative.record(quotient + curvature + c.c_star * step);
            let right = c.weight(grid[j]) * nk / field.t * row[j + 1].l * row[j + 1].l;
            let scale = 1.0 + quotient.abs() + right.abs();
            lambda_derivative_right.record(quotient + right + ROUNDING_SLACK * scale);
        }
    }
    Ok(CylinderCheckReport {
        range,
        lambda_lipschitz,
        argmin_distance,
        lambda_derivative,
        lambda_derivative_right,
        nontrivial_cells: field.nontrivial_cells(),
        cells: field.num_cells(),
    })
}

/// Super-solution residual of `f_t(·, λ)` at the vertices of `Ω''` whose
/// neighbors all lie in `Ω''`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupersolutionReport {
    pub lambda: f64,
    /// `(vertex, L f/μ − rhs)` with `rhs = −e^{−2nkλ}(nk/t) L²`.
    pub residual: Vec<(usize, f64)>,
    pub check: CylinderCheck,
    /// Vertices of `Ω''` left out because a neighbor lies outside.
    pub excluded: usize,
    /// `c` in the tolerance `c·h·Lip(f_t)`.
    pub tol_constant: f64,
}

/// `L f_t(·, λ)(x)/μ_x ≤ −e^{−2nkλ}(nk/t) L²(x) + c·h·Lip(f_t)(x)`, with
/// `Lip(f_t)(x)` the largest difference quotient of `f_t(·, λ)` over the
/// edges at `x`.
pub fn supersolution_residual(
    mesh: &DomainMesh,
    field: &HopfLaxField,
    lambda_index: usize,
    tol_constant: f64,
) -> Result<SupersolutionReport> {
    if lambda_index >= field.lambda_grid.len() {
        return Err(Error::Configuration(format!("λ index {lambda_index} outside the grid")));
    }
    let lambda = field.lambda_grid[lambda_index];
    let c = &field.constants;
    let nk = c.n as f64 * c.k;
    let h = mesh.mesh_spacing();
    let f = |v: usize| field.row_of(v).map(|i| field.value(i, lambda_index));
    let mut residual = Vec::new();
    let mut check = CylinderCheck::new(0.0);
    let mut excluded = 0;
    for (i, &x) in field.inner.iter().enumerate() {
        let nb = mesh.neighbors(x);
        if mesh.is_boundary(x) || nb.iter().any(|n| f(n.vertex).is_none()) {
            excluded += 1;
            continue;
        }
        let fx = field.value(i, lambda_index);
        let mut lap = 0.0;
        let mut lip: f64 = 0.0;
        for n in nb {
            let fy = f(n.vertex).unwrap_or(fx);
            lap += n.weight * (fy - fx);
            lip = lip.max((fy - fx).abs() / n.length);
        }
        let rhs = -c.weight(lambda) * nk / field.t * field.l(i, lambda_index).powi(2);
        let r = lap / mesh.measure(x) - rhs;
        let tol = tol_constant * h * lip;
        check.tolerance = check.tolerance.max(tol);
        check.record(tol - r);
        residual.push((x, r));
    }
    Ok(SupersolutionReport {
        lambda,
        residual,
        check,
        excluded,
        tol_constant,
    })
}

/// One probe of the time-derivative bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeDerivativeRow {
    pub vertex: usize,
    pub s: f64,
    /// `(v(t+s) − v(t))/s` with `v = −f`.
    pub lhs: f64,
    pub lip_sq: f64,
    pub grad_plus_sq: f64,
    /// `lhs − (Lip² u + |∇⁺v|²)`.
    pub residual: f64,
}

/// Forward differences in `t` of `v = −f_t(x, λ)` against
/// `Lip² u(x) + |∇⁺v(t, x)|²`, both measured at radius `4h`, where
/// `|∇⁺v(x)| = sup_{y ∈ B_x(4h)} (v(y) − v(x))₊ / (4h)`.
#[allow(clippy::too_many_arguments)]
pub fn time_derivative_residual(
    mesh: &DomainMesh,
    map: &MapState,
    outer: &[usize],
    inner: &[usize],
    probes: &[usize],
    lambda: f64,
    t: f64,
    steps: &[f64],
) -> Result<Vec<TimeDerivativeRow>> {
    if steps.windows(2).any(|w| w[1] >= w[0]) || steps.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Configuration(format!(
            "time steps must be positive and decreasing, got {steps:?}"
        )));
    }
    let constants = HopfLaxConstants::of(mesh, map, outer, inner)?;
    constants.check_time(t)?;
    for &s in steps {
        constants.check_time(t + s)?;
    }
    let r = 4.0 * mesh.mesh_spacing();
    let in_outer = outer_mask(mesh, outer);
    let mut in_inner = vec![false; mesh.num_vertices()];
    for &v in inner {
        in_inner[v] = true;
    }
    let weight = constants.weight(lambda);
    let v_at = |x: usize, time: f64| -> f64 {
        let cand = Candidates::gather(mesh, map, &in_outer, x, (constants.c_star * time).sqrt());
        -cand.cell(weight, time, 0.0).value
    };
    probes
        .par_iter()
        .map(|&x| {
            if !in_inner[x] {
                return Err(Error::Configuration(format!("probe vertex {x} is not in Ω''")));
            }
            let ball: Vec<(usize, f64)> = mesh
                .ball(x, r)
                .into_iter()
                .filter(|&(y, _)| y != x && in_inner[y])
                .collect();
            if ball.is_empty() {
                return Err(Error::Resolution(format!("no vertex of Ω'' within 4h of vertex {x}")));
            }
            let lip = pointwise_lipschitz(mesh, map, x, &[r])?.lip();
            let vx = v_at(x, t);
            let grad_plus = ball
                .iter()
                .map(|&(y, _)| (v_at(y, t) - vx).max(0.0) / r)
                .fold(0.0, f64::max);
            Ok(steps
                .iter()
                .map(|&s| {
                    let lhs = (v_at(x, t + s) - vx) / s;
                    let rhs = lip * lip + grad_plus * grad_plus;
                    TimeDerivativeRow {
                        vertex: x,
                        s,
                        lhs,
                        lip_sq: lip * lip,
                        grad_plus_sq: grad_plus * grad_plus,
                        residual: lhs - rhs,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()
        .map(|rows| rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ChartPoint, ConeSpec};
    use crate::solver::ball_subdomain;

    fn linear_setup(a: f64) -> (DomainMesh, MapState) {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(3)).unwrap();
        let map = MapState::from_chart_fn(&mesh, |p| a * p.to_xy()[0]).unwrap();
        (mesh, map)
    }

    #[test]
    fn constant_map_gives_zero_field() {
        let mesh = DomainMesh::build_cone(&ConeSpec::disk(2)).unwrap();
        let map = MapState::from_scalars(&mesh, &vec![0.7; mesh.num_vertices()]).unwrap();
        let outer = ball_subdomain(&mesh, 0, 0.8);
        let inner = ball_subdomain(&mesh, 0, 0.3);
        let c = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
        let cfg = HopfLaxConfig::new(c.t0 / 4.0, uniform_lambda_grid(0.02).unwrap(), outer, inner);
        let field = compute_hopf_lax(&mesh, &map, &cfg).unwrap();
        for row in &field.cells {
            for cell in row {
                assert_eq!(cell.value, 0.0);
                assert_eq!(cell.l, 0.0);
            }
        }
        let rep = hopf_lax_property_residuals(&field).unwrap();
        assert_eq!(rep.range.violations + rep.lambda_derivative.violations, 0);
    }

    #[test]
    fn time_at_or_beyond_t0_is_rejected() {
        let (mesh, map) = linear_setup(1.0);
        let outer = ball_subdomain(&mesh, 0, 0.8);
        let inner = ball_subdomain(&mesh, 0, 0.3);
        let c = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
        let cfg = HopfLaxConfig::new(c.t0, vec![0.0, 1.0], outer, inner);
        assert!(matches!(compute_hopf_lax(&mesh, &map, &cfg), Err(Error::Parameter(_))));
    }

    #[test]
    fn linear_map_matches_closed_form() {
        // f_t = min_s s²/(2t) − a s = −a² t / 2
        let a = 20.0;
        let (mesh, map) = linear_setup(a);
        let outer = ball_subdomain(&mesh, 0, 0.9);
        let inner = vec![0];
        let c = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
        let t = 0.9 * c.t0;
        assert!((c.c_star * t).sqrt() >= 8.0 * mesh.mesh_spacing());
        let cfg = HopfLaxConfig::new(t, vec![0.0, 0.5, 1.0], outer, inner);
        let field = compute_hopf_lax(&mesh, &map, &cfg).unwrap();
        let expected = -a * a * t / 2.0;
        assert!(
            (field.value(0, 0) / expected - 1.0).abs() < 0.1,
            "{} vs {expected}",
            field.value(0, 0)
        );
        assert_eq!(field.value(0, 0), field.value(0, 2));
    }

    #[test]
    fn lambda_dependence_for_negative_curvature() {
        let (mesh, map) = linear_setup(20.0);
        let mesh = mesh.with_curvature_bound(-1.0).unwrap();
        let outer = ball_subdomain(&mesh, 0, 0.9);
        let inner = ball_subdomain(&mesh, 0, 0.05);
        let c = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
        let cfg = HopfLaxConfig::new(0.5 * c.t0, uniform_lambda_grid(0.05).unwrap(), outer, inner);
        let field = compute_hopf_lax(&mesh, &map, &cfg).unwrap();
        // a heavier penalty can only raise the minimum
        for row in &field.cells {
            assert!(row.windows(2).all(|w| w[1].value >= w[0].value));
        }
        let rep = hopf_lax_property_residuals(&field).unwrap();
        assert_eq!(rep.range.violations, 0);
        assert_eq!(rep.lambda_lipschitz.violations, 0);
        assert_eq!(rep.argmin_distance.violations, 0);
        assert_eq!(rep.lambda_derivative_right.violations, 0);
        assert!(rep.nontrivial_cells > 0);
    }

    #[test]
    fn probes_outside_inner_set_are_rejected() {
        let (mesh, map) = linear_setup(1.0);
        let outer = ball_subdomain(&mesh, 0, 0.8);
        let inner = ball_subdomain(&mesh, 0, 0.3);
        let far = mesh.nearest_vertex(ChartPoint::new(0.6, 0.0)).unwrap();
        let c = HopfLaxConstants::of(&mesh, &map, &outer, &inner).unwrap();
        let err = time_derivative_residual(&mesh, &map, &outer, &inner, &[far], 0.0, c.t0 / 4.0, &[c.t0 / 100.0]);
        assert!(err.is_err());
    }
}
