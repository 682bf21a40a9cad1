//! The coverage loop pieces: projecting the agent onto the cloud, the
//! footprint, coverage and source bookkeeping, gradient estimation and the
//! agent's point-mass dynamics.

use nalgebra::{DMatrix, DVector};

use crate::cga::{
    embed_point, extract_point, fit_plane, fit_primitive, line_direction, orthogonal_line,
    plane_normal, project_to_primitive, split_pair, tangent_plane, Multivector, Primitive,
};
use crate::kdtree::KdTree;
use crate::pointcloud::PointCloud;
use crate::{Error, Result, Vec3};

/// Fit residuals at or below this are treated as an exactly flat fit.
const FLAT_RESIDUAL: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub v_max: f64,
    pub a_max: f64,
}

impl AgentState {
    pub fn new(position: Vec3, radius: f64, v_max: f64, a_max: f64) -> Result<Self> {
        for (name, v) in [("radius", radius), ("v_max", v_max), ("a_max", a_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "agent {name} must be positive, got {v}"
                )));
            }
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(Error::domain("agent position must be finite"));
        }
        Ok(AgentState {
            position,
            velocity: Vec3::zeros(),
            radius,
            v_max,
            a_max,
        })
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone)]
pub struct CoverageState {
    target: Vec<f64>,
    raw_coverage: Vec<f64>,
    coverage: Vec<f64>,
    source: Vec<f64>,
    step: usize,
    dt: f64,
}

impl CoverageState {
    /// Rescales `target` so that `Σ Mᵢᵢ pᵢ = 1`.
    pub fn new(target: &[f64], mass: &[f64], dt: f64) -> Result<Self> {
        if target.len() != mass.len() {
            return Err(Error::domain(format!(
                "target has {} entries, mass has {}",
                target.len(),
                mass.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        if target.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::domain(
                "target values must be finite and nonnegative",
            ));
        }
        let total: f64 = target.iter().zip(mass).map(|(p, m)| p * m).sum();
        if !(total > 0.0) {
            return Err(Error::domain("target has no mass"));
        }
        let n = target.len();
        Ok(CoverageState {
            target: target.iter().map(|p| p / total).collect(),
            raw_coverage: vec![0.0; n],
            coverage: vec![0.0; n],
            source: vec![0.0; n],
            step: 0,
            dt,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn raw_coverage(&self) -> &[f64] {
        &self.raw_coverage
    }

    pub fn coverage(&self) -> &[f64] {
        &self.coverage
    }

    /// The source from the most recent [`source_term`] call.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// The agent's local surface patch.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    indices: Vec<usize>,
    primitive: Primitive,
    projected: Vec3,
    normal: Vec3,
    residuals: Vec<f64>,
    normalized: Vec<f64>,
    footprint: Vec<bool>,
}

impl Neighborhood {
    /// Cloud indices used for the fit.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn primitive(&self) -> &Primitive {
        &self.primitive
    }

    /// Projected agent position `P_a'`.
    pub fn projected(&self) -> Vec3 {
        self.projected
    }

    /// Unit surface normal at `P_a'` (sign arbitrary).
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `rᵢ = eᵢ / max(e)`, all zero for an exactly flat fit.
    pub fn normalized_residuals(&self) -> &[f64] {
        &self.normalized
    }

    /// Whether each entry of [`indices`](Self::indices) lies within `r_a` of `P_a'`.
    pub fn in_footprint(&self) -> &[bool] {
        &self.footprint
    }

    /// Cloud indices under the footprint.
    pub fn footprint_indices(&self) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.footprint)
            .filter(|(_, &f)| f)
            .map(|(&i, _)| i)
            .collect()
    }
}

fn project_onto(x: &Primitive, p: &Multivector) -> Result<Vec3> {
    extract_point(&split_pair(&project_to_primitive(p, x.element())?, p)?)
}

/// Fits a plane or sphere to the points around the agent and projects the
/// agent onto it. The query ball is widened to `3h` when fewer than four
/// points lie within `r_a`.
pub fn project_agent(
    cloud: &PointCloud,
    index: &KdTree,
    agent: &AgentState,
    spacing: f64,
) -> Result<Neighborhood> {
    let mut radius = agent.radius;
    let mut indices = index.radius_neighbors(&agent.position, radius);
    if indices.len() < 4 {
        radius = agent.radius.max(3.0 * spacing);
        indices = index.radius_neighbors(&agent.position, radius);
    }
    if indices.len() < 4 {
        return Err(Error::LostAgent {
            found: indices.len(),
            radius,
        });
    }
    let pts: Vec<Vec3> = indices.iter().map(|&i| cloud.positions()[i]).collect();
    let pa = embed_point(&agent.position);
    let fitted = fit_primitive(&pts).and_then(|x| {
        let q = project_onto(&x, &pa)?;
        Ok((x, q))
    });
    let (primitive, projected) = match fitted {
        Ok(v) => v,
        // cocircular or otherwise ambiguous patches: fall back to the best plane
        Err(_) => {
            let x = fit_plane(&pts)?;
            let q = project_onto(&x, &pa)?;
            (x, q)
        }
    };
    let line = orthogonal_line(primitive.element(), &embed_point(&projected))?;
    let normal = line_direction(&line)?;

    let residuals = primitive.residuals().to_vec();
    let emax = residuals.iter().cloned().fold(0.0, f64::max);
    let normalized = if emax <= FLAT_RESIDUAL {
        vec![0.0; residuals.len()]
    } else {
        residuals.iter().map(|e| e / emax).collect()
    };
    let footprint = pts
        .iter()
        .map(|x| (x - projected).norm() <= agent.radius)
        .collect();
    Ok(Neighborhood {
        indices,
        primitive,
        projected,
        normal,
        residuals,
        normalized,
        footprint,
    })
}

/// `wᵢ = exp(−ε² rᵢ²)` for every fit point of the neighborhood.
pub fn footprint_weights(nbh: &Neighborhood, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    Ok(nbh
        .normalized
        .iter()
        .map(|r| (-(epsilon * r).powi(2)).exp())
        .collect())
}

/// Adds one step of footprint coverage and renormalizes `c`.
pub fn accumulate_coverage(
    state: &mut CoverageState,
    nbh: &Neighborhood,
    weights: &[f64],
    mass: &[f64],
) -> Result<()> {
    if weights.len() != nbh.indices.len() {
        return Err(Error::domain("one weight per neighborhood point expected"));
    }
    if mass.len() != state.raw_coverage.len() {
        return Err(Error::domain("mass does not match the coverage field"));
    }
    for ((&i, &w), &inside) in nbh.indices.iter().zip(weights).zip(&nbh.footprint) {
        if inside {
            state.raw_coverage[i] += w * state.dt;
        }
    }
    let total: f64 = state
        .raw_coverage
        .iter()
        .zip(mass)
        .map(|(c, m)| c * m)
        .sum();
    if total > 0.0 {
        for (c, raw) in state.coverage.iter_mut().zip(&state.raw_coverage) {
            *c = raw / total;
        }
    }
    state.step += 1;
    Ok(())
}

/// `sᵢ = max(pᵢ − cᵢ, 0)²`, kept in the state as the next diffusion input.
pub fn source_term(state: &mut CoverageState) -> &[f64] {
    for ((s, p), c) in state
        .source
        .iter_mut()
        .zip(&state.target)
        .zip(&state.coverage)
    {
        *s = (p - c).max(0.0).powi(2);
    }
    &state.source
}

/// `‖max(p − c, 0)‖₂ / Σ pᵢ`.
pub fn ergodicity_of(target: &[f64], coverage: &[f64]) -> Result<f64> {
    if target.len() != coverage.len() {
        return Err(Error::domain("target and coverage lengths differ"));
    }
    let sum: f64 = target.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::domain("target sums to zero"));
    }
    let gap: f64 = target
        .iter()
        .zip(coverage)
        .map(|(p, c)| (p - c).max(0.0).powi(2))
        .sum();
    Ok(gap.sqrt() / sum)
}

pub fn ergodicity(state: &CoverageState) -> Result<f64> {
    ergodicity_of(&state.target, &state.coverage)
}

fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

fn monomials(x: f64, y: f64, degree: usize) -> impl Iterator<Item = f64> {
    (0..=degree).flat_map(move |d| (0..=d).map(move |k| x.powi((d - k) as i32) * y.powi(k as i32)))
}

/// Gradient of `u` at `P_a'` from a weighted least-squares polynomial fit
/// in the tangent plane. The degree is 3, or lower when there are fewer
/// than 10 (or 6) neighbors.
pub fn estimate_gradient(
    cloud: &PointCloud,
    u: &[f64],
    nbh: &Neighborhood,
    weights: &[f64],
) -> Result<Vec3> {
    let m = nbh.indices.len();
    let degree = if m >= 10 {
        3
    } else if m >= 6 {
        2
    } else {
        1
    };
    estimate_gradient_with_degree(cloud, u, nbh, weights, degree)
}

pub fn estimate_gradient_with_degree(
    cloud: &PointCloud,
    u: &[f64],
    nbh: &Neighborhood,
    weights: &[f64],
    degree: usize,
) -> Result<Vec3> {
    if u.len() != cloud.len() {
        return Err(Error::domain("field length does not match the cloud"));
    }
    if weights.len() != nbh.indices.len() {
        return Err(Error::domain("one weight per neighborhood point expected"));
    }
    if !(1..=3).contains(&degree) {
        return Err(Error::domain(format!(
            "polynomial degree must be 1..=3, got {degree}"
        )));
    }
    let cols = (degree + 1) * (degree + 2) / 2;
    let m = nbh.indices.len();
    if m < cols {
        return Err(Error::Gradient(format!(
            "{m} neighbors cannot determine a degree-{degree} fit"
        )));
    }

    let p = embed_point(&nbh.projected);
    let line = orthogonal_line(nbh.primitive.element(), &p)?;
    let plane = tangent_plane(&line, &p)?;
    let (t1, t2) = tangent_basis(&plane_normal(&plane)?);

    // in-plane coordinates of the orthogonal projection onto the tangent plane
    let coords: Vec<(f64, f64)> = nbh
        .indices
        .iter()
        .map(|&i| {
            let d = cloud.positions()[i] - nbh.projected;
            (d.dot(&t1), d.dot(&t2))
        })
        .collect();
    let scale = coords
        .iter()
        .map(|(a, b)| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::Gradient("neighbors collapse onto the agent".into()));
    }
    let mut design = DMatrix::zeros(m, cols);
    let mut rhs = DVector::zeros(m);
    for (r, ((&(a, b), &i), &w)) in coords.iter().zip(&nbh.indices).zip(weights).enumerate() {
        let sw = w.sqrt();
        for (c, v) in monomials(a / scale, b / scale, degree).enumerate() {
            design[(r, c)] = sw * v;
        }
        rhs[r] = sw * u[i];
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Gradient(format!(
            "rank-deficient degree-{degree} design (neighbors nearly collinear)"
        )));
    }
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Gradient(e.to_string()))?;
    Ok((t1 * coef[1] + t2 * coef[2]) / scale)
}

/// Full-strength acceleration along `gradient`, or zero when the gradient
/// is negligible against the field's magnitude over `length`.
pub fn acceleration_command(gradient: &Vec3, field_scale: f64, length: f64, a_max: f64) -> Vec3 {
    let g = gradient.norm();
    if !(g > 0.0) || g * length <= 1e-9 * field_scale {
        return Vec3::zeros();
    }
    gradient * (a_max / g)
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Semi-implicit Euler step on the surface: clamp the acceleration, update
/// and clamp the velocity, move, re-project, and keep the velocity tangent.
pub fn step_agent(
    cloud: &PointCloud,
    index: &KdTree,
    agent: &AgentState,
    acceleration: &Vec3,
    dt: f64,
    spacing: f64,
) -> Result<(AgentState, Neighborhood)> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let a = clamp_norm(*acceleration, agent.a_max);
    let v = clamp_norm(agent.velocity + a * dt, agent.v_max);
    let mut next = AgentState {
        position: agent.position + v * dt,
        velocity: v,
        ..*agent
    };
    let nbh = project_agent(cloud, index, &next, spacing)?;
    let n = nbh.normal;
    next.position = nbh.projected;
    next.velocity = clamp_norm(v - n * v.dot(&n), agent.v_max);
    Ok((next, nbh))
}
