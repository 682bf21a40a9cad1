//! Point-cloud Laplace–Beltrami operator.
//!
//! Each point's k nearest neighbours are projected onto a PCA tangent plane,
//! a local 2-D Delaunay triangulation is built, and the triangles incident to
//! the point contribute cotangent edge weights and a mixed Voronoi area. The
//! per-point stencils are symmetrized into one stiffness matrix `S` (positive
//! semidefinite, `S·1 = 0`) and a diagonal mass `M`. The continuous operator
//! is approximated by `−M⁻¹S`; zero-Neumann behaviour at boundaries falls out
//! of the construction.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kdtree::KdTree;
use crate::pointcloud::{mean_spacing_with, PointCloud};
use crate::sparse::CsrMatrix;
use crate::spectral::FactorCache;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaplacianParams {
    /// Neighbours per local triangulation.
    pub k: usize,
    /// Intrinsic mollification, relative to the mean spacing.
    pub mollify: f64,
}

impl Default for LaplacianParams {
    fn default() -> Self {
        LaplacianParams {
            k: 12,
            mollify: 1e-5,
        }
    }
}

/// Local orthonormal frame `(t1, t2, normal)` at a cloud point.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub origin: usize,
    pub t1: Vec3,
    pub t2: Vec3,
    pub normal: Vec3,
    pub neighbors: Vec<usize>,
    /// Neighbour positions in `(t1, t2)` coordinates, origin at `(0, 0)`.
    pub coords: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    mass: Vec<f64>,
    stiffness: CsrMatrix,
    boundary: Vec<bool>,
    spacing: f64,
    cache: FactorCache,
}

impl LaplacianOperator {
    pub fn from_parts(
        mass: Vec<f64>,
        stiffness: CsrMatrix,
        boundary: Vec<bool>,
        spacing: f64,
    ) -> Result<Self> {
        let n = mass.len();
        if stiffness.dim() != n || boundary.len() != n {
            return Err(Error::domain("operator parts have mismatched sizes"));
        }
        if mass.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::domain("mass entries must be positive"));
        }
        Ok(LaplacianOperator {
            mass,
            stiffness,
            boundary,
            spacing,
            cache: FactorCache::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub(crate) fn factor_cache(&self) -> &FactorCache {
        &self.cache
    }

    pub fn total_area(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Writes `stiffness.txt` (`i j value`), `mass.txt` (one diagonal entry
    /// per line) and `boundary.txt` (0/1 per line) into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.stiffness.write_triplets(&dir.join("stiffness.txt"))?;
        let mass: String = self.mass.iter().map(|m| format!("{m:e}\n")).collect();
        fs::write(dir.join("mass.txt"), mass)?;
        let bnd: String = self
            .boundary
            .iter()
            .map(|&b| if b { "1\n" } else { "0\n" })
            .collect();
        fs::write(dir.join("boundary.txt"), bnd)?;
        fs::write(dir.join("spacing.txt"), format!("{:e}\n", self.spacing))?;
        Ok(())
    }

    pub fn import(dir: &Path) -> Result<Self> {
        let parse_lines = |name: &str| -> Result<Vec<f64>> {
            fs::read_to_string(dir.join(name))?
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(no, l)| {
                    l.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: no + 1,
                        msg: format!("{name}: {e}"),
                    })
                })
                .collect()
        };
        let mass = parse_lines("mass.txt")?;
        let n = mass.len();
        let stiffness =
            CsrMatrix::from_triplet_text(n, &fs::read_to_string(dir.join("stiffness.txt"))?)?;
        let boundary = match parse_lines("boundary.txt") {
            Ok(b) => b.into_iter().map(|v| v != 0.0).collect(),
            Err(Error::Io(_)) => vec![false; n],
            Err(e) => return Err(e),
        };
        let spacing = parse_lines("spacing.txt")
            .ok()
            .and_then(|v| v.first().copied())
            .unwrap_or(f64::NAN);
        LaplacianOperator::from_parts(mass, stiffness, boundary, spacing)
    }
}

/// PCA frame over the point and its `k` nearest distinct neighbours.
pub fn build_tangent_frame(
    cloud: &PointCloud,
    index: &KdTree,
    i: usize,
    k: usize,
) -> Result<TangentFrame> {
    if k < 3 {
        return Err(Error::domain(format!("tangent frame needs k ≥ 3, got {k}")));
    }
    if cloud.len() <= k {
        return Err(Error::domain(format!(
            "cloud has {} points, need more than k = {k}",
            cloud.len()
        )));
    }
    let pts = cloud.positions();
    let p = pts[i];
    let neighbors = distinct_neighbors(index, &p, i, k)?;
    if neighbors.len() < 3 {
        return Err(Error::Frame {
            index: i,
            msg: "fewer than three distinct neighbours".into(),
        });
    }

    let count = (neighbors.len() + 1) as f64;
    let mean = (neighbors.iter().map(|&j| pts[j]).sum::<Vec3>() + p) / count;
    let mut cov = Matrix3::zeros();
    for q in neighbors.iter().map(|&j| pts[j]).chain(std::iter::once(p)) {
        let d = q - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (order[0], order[1], order[2]);
    let lmax = eig.eigenvalues[hi];
    if !(lmax > 0.0) || eig.eigenvalues[mid] <= 1e-10 * lmax {
        return Err(Error::Frame {
            index: i,
            msg: "neighbourhood is collinear".into(),
        });
    }
    let t1: Vec3 = eig.eigenvectors.column(hi).into_owned().normalize();
    let normal: Vec3 = eig.eigenvectors.column(lo).into_owned().normalize();
    let t2 = normal.cross(&t1).normalize();
    let normal = t1.cross(&t2);

    let coords = neighbors
        .iter()
        .map(|&j| {
            let d = pts[j] - p;
            [d.dot(&t1), d.dot(&t2)]
        })
        .collect();
    Ok(TangentFrame {
        origin: i,
        t1,
        t2,
        normal,
        neighbors,
        coords,
    })
}

fn distinct_neighbors(index: &KdTree, p: &Vec3, i: usize, k: usize) -> Result<Vec<usize>> {
    let n = index.len();
    let mut want = (k + 1).min(n);
    loop {
        let found = index.knn_with_distances(p, want)?;
        let picked: Vec<usize> = found
            .iter()
            .filter(|&&(j, d)| j != i && d > 0.0)
            .map(|&(j, _)| j)
            .take(k)
            .collect();
        if picked.len() == k || want == n {
            return Ok(picked);
        }
        want = (want * 2).min(n);
    }
}

/// True when the neighbour directions leave an angular gap wider than π/2.
pub fn detect_boundary(frame: &TangentFrame) -> bool {
    let mut angles: Vec<f64> = frame
        .coords
        .iter()
        .filter(|c| c[0] != 0.0 || c[1] != 0.0)
        .map(|c| c[1].atan2(c[0]))
        .collect();
    if angles.len() < 2 {
        return true;
    }
    angles.sort_by(f64::total_cmp);
    let wrap = angles[0] + 2.0 * std::f64::consts::PI - angles[angles.len() - 1];
    let max_gap = angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
    max_gap > std::f64::consts::FRAC_PI_2
}

/// Triangles `(a, b)` of the local Delaunay triangulation incident to the
/// origin, as indices into `coords`, counter-clockwise.
pub fn origin_fan(coords: &[[f64; 2]]) -> Vec<(usize, usize)> {
    // vertex 0 is the origin, vertices 1..=n the neighbours, then 3 super vertices
    let n = coords.len();
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n + 4);
    pts.push([0.0, 0.0]);
    pts.extend_from_slice(coords);
    let extent = coords
        .iter()
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max)
        .max(1e-300);
    let m = 100.0 * extent;
    let s0 = pts.len();
    pts.push([-2.0 * m, -m]);
    pts.push([2.0 * m, -m]);
    pts.push([0.0, 2.0 * m]);

    let mut tris: Vec<Tri> = vec![Tri::new(&pts, s0, s0 + 1, s0 + 2)];
    // insert by distance from the origin, origin first
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&a, &b| {
        let da = pts[a][0].hypot(pts[a][1]);
        let db = pts[b][0].hypot(pts[b][1]);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    for &v in &order {
        let p = pts[v];
        let mut bad: Vec<usize> = tris
            .iter()
            .enumerate()
            .filter(|(_, t)| t.circle_contains(p))
            .map(|(ti, _)| ti)
            .collect();
        if bad.is_empty() {
            // the point lies on an existing circle only; grab its containing triangle
            if let Some(ti) = tris.iter().position(|t| t.contains_point(&pts, p)) {
                bad.push(ti);
            } else {
                continue;
            }
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &ti in &bad {
            let t = &tris[ti];
            for e in [(t.v[0], t.v[1]), (t.v[1], t.v[2]), (t.v[2], t.v[0])] {
                if let Some(pos) = edges.iter().position(|&(a, b)| a == e.1 && b == e.0) {
                    edges.swap_remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        bad.sort_unstable();
        for &ti in bad.iter().rev() {
            tris.swap_remove(ti);
        }
        for (a, b) in edges {
            if orient(pts[a], pts[b], p) > 0.0 {
                tris.push(Tri::new(&pts, a, b, v));
            }
        }
    }

    let mut fan: Vec<(usize, usize)> = tris
        .iter()
        .filter(|t| t.v.iter().all(|&x| x < s0) && t.v.contains(&0))
        .map(|t| {
            let r = t.v.iter().position(|&x| x == 0).expect("origin present");
            (t.v[(r + 1) % 3] - 1, t.v[(r + 2) % 3] - 1)
        })
        .collect();
    fan.sort_unstable();
    fan
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

struct Tri {
    v: [usize; 3],
    center: [f64; 2],
    r2: f64,
}

impl Tri {
    fn new(pts: &[[f64; 2]], a: usize, b: usize, c: usize) -> Tri {
        let (pa, pb, pc) = (pts[a], pts[b], pts[c]);
        let d = 2.0 * orient(pa, pb, pc);
        let (bx, by) = (pb[0] - pa[0], pb[1] - pa[1]);
        let (cx, cy) = (pc[0] - pa[0], pc[1] - pa[1]);
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        Tri {
            v: [a, b, c],
            center: [pa[0] + ux, pa[1] + uy],
            r2: ux * ux + uy * uy,
        }
    }

    fn circle_contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.r2 * (1.0 - 1e-10)
    }

    fn contains_point(&self, pts: &[[f64; 2]], p: [f64; 2]) -> bool {
        let [a, b, c] = self.v.map(|i| pts[i]);
        orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
    }
}

/// Row stencil of one point: cotangent weights to neighbours and a mixed
/// Voronoi area, computed on mollified edge lengths.
#[derive(Debug, Clone, Default)]
struct Stencil {
    weights: Vec<(usize, f64)>,
    area: f64,
}

/// `|cot|` of the largest interior angle (150°) a fan triangle may have.
const MAX_ANGLE_COT: f64 = 1.732_050_807_568_877_2;

fn point_stencil(frame: &TangentFrame, delta: f64) -> Stencil {
    let fan = origin_fan(&frame.coords);
    let mut st = Stencil::default();
    let len = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]) + delta;
    for (a, b) in fan {
        let (pa, pb) = (frame.coords[a], frame.coords[b]);
        let l_oa = len([0.0, 0.0], pa);
        let l_ob = len([0.0, 0.0], pb);
        let l_ab = len(pa, pb);
        let s = 0.5 * (l_oa + l_ob + l_ab);
        let area2 = s * (s - l_oa) * (s - l_ob) * (s - l_ab);
        if !(area2 > 0.0) {
            continue;
        }
        let area = area2.sqrt();
        // cotangent of the angle opposite each edge
        let cot_o = (l_oa * l_oa + l_ob * l_ob - l_ab * l_ab) / (4.0 * area);
        let cot_a = (l_oa * l_oa + l_ab * l_ab - l_ob * l_ob) / (4.0 * area);
        let cot_b = (l_ob * l_ob + l_ab * l_ab - l_oa * l_oa) / (4.0 * area);
        // hull slivers along near-straight boundaries carry arbitrary weights
        if cot_o.min(cot_a).min(cot_b) < -MAX_ANGLE_COT {
            continue;
        }
        st.weights.push((frame.neighbors[a], 0.5 * cot_b));
        st.weights.push((frame.neighbors[b], 0.5 * cot_a));
        st.area += if cot_o < 0.0 {
            0.5 * area
        } else if cot_a < 0.0 || cot_b < 0.0 {
            0.25 * area
        } else {
            (l_oa * l_oa * cot_b + l_ob * l_ob * cot_a) / 8.0
        };
    }
    st
}

pub fn build_laplacian(cloud: &PointCloud, params: &LaplacianParams) -> Result<LaplacianOperator> {
    let index = cloud.spatial_index();
    build_laplacian_with(cloud, &index, params)
}

pub fn build_laplacian_with(
    cloud: &PointCloud,
    index: &KdTree,
    params: &LaplacianParams,
) -> Result<LaplacianOperator> {
    let n = cloud.len();
    if params.k < 6 {
        return Err(Error::domain(format!(
            "neighbour count k = {} is below 6",
            params.k
        )));
    }
    if n < params.k + 1 {
        return Err(Error::domain(format!(
            "cloud has {n} points, need at least k + 1 = {}",
            params.k + 1
        )));
    }
    if !(params.mollify >= 0.0) {
        return Err(Error::domain("mollification must be nonnegative"));
    }
    let h = mean_spacing_with(cloud, index)?;
    let delta = params.mollify * h;

    let locals: Vec<Result<(Stencil, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let frame = build_tangent_frame(cloud, index, i, params.k)?;
            Ok((point_stencil(&frame, delta), detect_boundary(&frame)))
        })
        .collect();

    let failed: Vec<usize> = locals
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    if !failed.is_empty() {
        return Err(Error::Operator(failed));
    }

    let mut mass = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    let mut trips = Vec::new();
    for (i, local) in locals.into_iter().enumerate() {
        let (st, bnd) = local.expect("failures handled above");
        mass.push(st.area);
        boundary.push(bnd);
        for (j, w) in st.weights {
            trips.push((i, j, 0.5 * w));
            trips.push((j, i, 0.5 * w));
        }
    }
    if let Some(i) = mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Operator(vec![i]));
    }

    // symmetrized weights; negative (obtuse) weights are dropped so S stays PSD
    let weights = CsrMatrix::from_triplets(n, &trips);
    let mut s_trips = Vec::with_capacity(weights.nnz() + n);
    for i in 0..n {
        let mut diag = 0.0;
        for (j, w) in weights.row(i) {
            if j != i && w > 0.0 {
                s_trips.push((i, j, -w));
                diag += w;
            }
        }
        s_trips.push((i, i, diag));
    }
    let stiffness = CsrMatrix::from_triplets(n, &s_trips);
    LaplacianOperator::from_parts(mass, stiffness, boundary, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn flat_grid_normal_is_z() {
        let cloud = fixtures::grid(10, 10, 1.0);
        let idx = cloud.spatial_index();
        let f = build_tangent_frame(&cloud, &idx, 45, 12).unwrap();
        assert!((f.normal.z.abs() - 1.0).abs() < 1e-8);
        for (a, b) in [(f.t1, f.t2), (f.t1, f.normal), (f.t2, f.normal)] {
            assert!(a.dot(&b).abs() < 1e-10);
        }
        for v in [f.t1, f.t2, f.normal] {
            assert!((v.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_cap_normal_is_radial() {
        let cloud = fixtures::icosphere(4, 1.0);
        let idx = cloud.spatial_index();
        let top = idx.nearest(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let f = build_tangent_frame(&cloud, &idx, top, 12).unwrap();
        let radial = cloud.positions()[top].normalize();
        let angle = f.normal.dot(&radial).abs().min(1.0).acos();
        assert!(angle < 0.05, "angle {angle}");
    }

    #[test]
    fn collinear_neighbourhood_fails() {
        let pts = (0..8).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let idx = cloud.spatial_index();
        assert!(matches!(
            build_tangent_frame(&cloud, &idx, 3, 6),
            Err(Error::Frame { index: 3, .. })
        ));
    }

    #[test]
    fn boundary_rule_on_grid() {
        let cloud = fixtures::grid(10, 10, 1.0);
        let idx = cloud.spatial_index();
        let frame = |i| build_tangent_frame(&cloud, &idx, i, 12).unwrap();
        assert!(!detect_boundary(&frame(45))); // interior
        assert!(detect_boundary(&frame(0))); // corner
        assert!(detect_boundary(&frame(5))); // bottom edge midpoint
    }

    #[test]
    fn edge_stencil_gaps() {
        // five-neighbour stencil of an edge midpoint: directions at 0, π/2, π
        // and the two diagonals; the open side leaves a gap of π.
        let frame = TangentFrame {
            origin: 0,
            t1: Vec3::x(),
            t2: Vec3::y(),
            normal: Vec3::z(),
            neighbors: vec![1, 2, 3, 4, 5],
            coords: vec![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [-1.0, 1.0], [-1.0, 0.0]],
        };
        assert!(detect_boundary(&frame));
        let closed = TangentFrame {
            coords: (0..8)
                .map(|k| {
                    let a = k as f64 * std::f64::consts::FRAC_PI_4;
                    [a.cos(), a.sin()]
                })
                .collect(),
            neighbors: (1..9).collect(),
            ..frame
        };
        assert!(!detect_boundary(&closed));
    }

    #[test]
    fn fan_of_grid_point() {
        let coords: Vec<[f64; 2]> = vec![
            [1.0, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
            [0.0, -1.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
            [1.0, -1.0],
        ];
        let fan = origin_fan(&coords);
        // total angle around an interior point is 2π
        let total: f64 = fan
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (coords[a], coords[b]);
                (pa[0] * pb[1] - pa[1] * pb[0]).atan2(pa[0] * pb[0] + pa[1] * pb[1])
            })
            .sum();
        assert!((total - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn grid_operator_properties() {
        let cloud = fixtures::grid(20, 20, 1.0);
        let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
        let s = op.stiffness();
        let ones = vec![1.0; op.len()];
        let row_sums = s.mul_vec(&ones);
        assert!(row_sums.iter().all(|r| r.abs() <= 1e-9));
        assert!(s.asymmetry() <= 1e-12 * s.max_abs());
        // interior cells have unit Voronoi area
        for j in 3..17 {
            for i in 3..17 {
                let m = op.mass()[j * 20 + i];
                assert!((m - 1.0).abs() < 0.1, "mass {m}");
            }
        }
        // 5-point stencil in the interior
        let c = 10 * 20 + 10;
        // exact up to the mollification
        assert!((s.get(c, c) - 4.0).abs() < 1e-4);
        assert!((s.get(c, c + 1) + 1.0).abs() < 1e-4);
        assert!(s.get(c, c + 21).abs() < 1e-4);
    }

    #[test]
    fn sphere_area() {
        let cloud = fixtures::icosphere(4, 1.0);
        assert_eq!(cloud.len(), 2562);
        let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
        let area = op.total_area();
        let exact = 4.0 * std::f64::consts::PI;
        assert!((area - exact).abs() < 0.05 * exact, "area {area}");
        assert!(op.boundary().iter().all(|&b| !b));
    }

    #[test]
    fn rigid_motion_leaves_operator_unchanged() {
        let cloud = fixtures::wavy_sheet(15, 15, 1.0, 0.6, 11);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let moved = cloud.transformed(&rot, &Vec3::new(5.0, -3.0, 40.0));
        let a = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
        let b = build_laplacian(&moved, &LaplacianParams::default()).unwrap();
        let scale = a.stiffness().max_abs();
        for (i, j, v) in a.stiffness().triplets() {
            assert!((v - b.stiffness().get(i, j)).abs() <= 1e-8 * scale);
        }
        for (x, y) in a.mass().iter().zip(b.mass()) {
            assert!((x - y).abs() <= 1e-8 * x);
        }
    }

    #[test]
    fn export_import_round_trip() {
        let cloud = fixtures::grid(6, 6, 1.0);
        let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        op.export(dir.path()).unwrap();
        let back = LaplacianOperator::import(dir.path()).unwrap();
        assert_eq!(back.len(), op.len());
        for (i, j, v) in op.stiffness().triplets() {
            assert!((v - back.stiffness().get(i, j)).abs() <= 1e-15 * v.abs().max(1.0));
        }
        assert_eq!(back.boundary(), op.boundary());
    }

    #[test]
    fn too_small_cloud_is_rejected() {
        let cloud = fixtures::grid(3, 3, 1.0);
        assert!(build_laplacian(&cloud, &LaplacianParams::default()).is_err());
    }
}
