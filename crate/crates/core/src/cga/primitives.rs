use nalgebra::{Matrix4, Matrix5, SymmetricEigen, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use super::multivector::{Multivector, E0, E1, E2, E3, EINF};
use crate::{Error, Result, Vec3};

/// Conformal point `e₀ + x + ½‖x‖² e∞`.
pub fn embed_point(x: &Vec3) -> Multivector {
    Multivector::e0() + Multivector::vector(x) + Multivector::einf() * (0.5 * x.norm_squared())
}

/// Euclidean position of a (possibly scaled) conformal point.
pub fn extract_point(p: &Multivector) -> Result<Vec3> {
    let w = p.get(E0);
    let scale = p.max_abs();
    if !(w.abs() > 1e-12 * scale) {
        return Err(Error::geometry(
            "point at infinity has no Euclidean position",
        ));
    }
    Ok(Vec3::new(p.get(E1), p.get(E2), p.get(E3)) / w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Plane,
    Sphere,
}

/// Fitted plane or sphere. `element` is the grade-4 primitive `X`; its dual
/// `X I` is the vector `v₀e₀ + v + v₄e∞`.
#[derive(Debug, Clone)]
pub struct Primitive {
    kind: PrimitiveKind,
    element: Multivector,
    residuals: Vec<f64>,
}

impl Primitive {
    /// Classifies the dual vector `v₀e₀ + v + v₄e∞`.
    pub fn from_dual_vector(s: &Multivector, residuals: Vec<f64>) -> Result<Self> {
        let v0 = s.get(E0);
        let v = Vec3::new(s.get(E1), s.get(E2), s.get(E3));
        let norm = (v0 * v0 + v.norm_squared() + s.get(EINF).powi(2)).sqrt();
        if !(norm > 0.0) {
            return Err(Error::geometry("zero primitive"));
        }
        let kind = if v0.abs() <= 1e-9 * norm {
            PrimitiveKind::Plane
        } else {
            PrimitiveKind::Sphere
        };
        let prim = Primitive {
            kind,
            element: s.dual(),
            residuals,
        };
        if kind == PrimitiveKind::Sphere && !(prim.radius_squared() > 0.0) {
            return Err(Error::geometry("fitted sphere is imaginary"));
        }
        Ok(prim)
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.kind
    }

    pub fn element(&self) -> &Multivector {
        &self.element
    }

    /// The dual vector `X I = v₀e₀ + v + v₄e∞`.
    pub fn dual_vector(&self) -> Multivector {
        self.element.undual().grade(1)
    }

    /// Per-point algebraic fit errors.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn center(&self) -> Option<Vec3> {
        let s = self.dual_vector();
        match self.kind {
            PrimitiveKind::Sphere => Some(Vec3::new(s.get(E1), s.get(E2), s.get(E3)) / s.get(E0)),
            PrimitiveKind::Plane => None,
        }
    }

    fn radius_squared(&self) -> f64 {
        let s = self.dual_vector();
        let v0 = s.get(E0);
        let c = Vec3::new(s.get(E1), s.get(E2), s.get(E3)) / v0;
        c.norm_squared() - 2.0 * s.get(EINF) / v0
    }

    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            PrimitiveKind::Sphere => Some(self.radius_squared().sqrt()),
            PrimitiveKind::Plane => None,
        }
    }

    /// Unit normal and offset `d` of the plane `n·x = d`.
    pub fn plane(&self) -> Option<(Vec3, f64)> {
        let s = self.dual_vector();
        match self.kind {
            PrimitiveKind::Plane => {
                let n = Vec3::new(s.get(E1), s.get(E2), s.get(E3));
                let len = n.norm();
                Some((n / len, -s.get(EINF) / len))
            }
            PrimitiveKind::Sphere => None,
        }
    }
}

/// Centering and scaling applied before fitting, for conditioning.
struct Frame {
    center: Vec3,
    scale: f64,
}

impl Frame {
    fn of(points: &[Vec3]) -> Result<Frame> {
        if points.len() < 4 {
            return Err(Error::geometry(format!(
                "primitive fit needs at least 4 points, got {}",
                points.len()
            )));
        }
        let center = points.iter().sum::<Vec3>() / points.len() as f64;
        let scale = (points
            .iter()
            .map(|p| (p - center).norm_squared())
            .sum::<f64>()
            / points.len() as f64)
            .sqrt();
        if !(scale > 0.0) {
            return Err(Error::geometry("all fit points coincide"));
        }
        Ok(Frame { center, scale })
    }

    fn row(&self, p: &Vec3) -> Vector5<f64> {
        let u = (p - self.center) / self.scale;
        Vector5::new(u.x, u.y, u.z, -1.0, -0.5 * u.norm_squared())
    }

    /// Maps the local solution `(v₁, v₂, v₃, v₄, v₀)` back to world units.
    fn dual_vector(&self, v: &Vector5<f64>) -> Multivector {
        let (l, c) = (self.scale, self.center);
        let vl = Vec3::new(v[0], v[1], v[2]);
        let v0 = v[4];
        let vw = vl * l + c * v0;
        let v4 = l * vl.dot(&c) + l * l * v[3] + 0.5 * c.norm_squared() * v0;
        Multivector::e0() * v0 + Multivector::vector(&vw) + Multivector::einf() * v4
    }
}

/// Least-squares plane or sphere through `points`: the eigenvector of the
/// smallest eigenvalue of `Σ wᵢwᵢᵀ` with `w = [x, y, z, −1, −½‖x‖²]`.
/// Residuals `(Pᵢ·X*)²` are reported in the fit frame (centroid-relative,
/// unit RMS radius, unit coefficient vector), so they are comparable across
/// fits of the same points.
pub fn fit_primitive(points: &[Vec3]) -> Result<Primitive> {
    let frame = Frame::of(points)?;
    let rows: Vec<Vector5<f64>> = points.iter().map(|p| frame.row(p)).collect();
    let b = rows
        .iter()
        .fold(Matrix5::zeros(), |acc, w| acc + w * w.transpose());
    let eig = SymmetricEigen::new(b);
    let mut order = [0usize, 1, 2, 3, 4];
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let lmax = eig.eigenvalues[order[4]];
    if eig.eigenvalues[order[1]] <= 1e-12 * lmax {
        return Err(Error::geometry(
            "fit is rank deficient (points admit several primitives)",
        ));
    }
    let v: Vector5<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let residuals = rows.iter().map(|w| w.dot(&v).powi(2)).collect();
    let local_v0 = v[4];
    let s = frame.dual_vector(&v);
    if local_v0.abs() <= 1e-9 * v.norm() {
        // exact plane: drop the numerically tiny e₀ part
        let plane = s - Multivector::e0() * s.get(E0);
        return Primitive::from_dual_vector(&plane, residuals);
    }
    Primitive::from_dual_vector(&s, residuals)
}

/// The same fit restricted to planes (`v₀ = 0`).
pub fn fit_plane(points: &[Vec3]) -> Result<Primitive> {
    let frame = Frame::of(points)?;
    let rows: Vec<Vector5<f64>> = points.iter().map(|p| frame.row(p)).collect();
    let b = rows.iter().fold(Matrix4::zeros(), |acc, w| {
        let w4 = Vector4::new(w[0], w[1], w[2], w[3]);
        acc + w4 * w4.transpose()
    });
    let eig = SymmetricEigen::new(b);
    let k = eig.eigenvalues.imin();
    let v4: Vector4<f64> = eig.eigenvectors.column(k).into_owned();
    let v = Vector5::new(v4[0], v4[1], v4[2], v4[3], 0.0);
    let residuals = rows.iter().map(|w| w.dot(&v).powi(2)).collect();
    let s = frame.dual_vector(&v);
    let plane = s - Multivector::e0() * s.get(E0);
    Primitive::from_dual_vector(&plane, residuals)
}

/// `((P ∧ e∞) ⌋ X) X⁻¹`: the point pair where the line through `P`
/// orthogonal to `X` meets it (a flat point for planes).
pub fn project_to_primitive(p: &Multivector, x: &Multivector) -> Result<Multivector> {
    let xx = x.geometric(&x.reverse()).scalar_part();
    if !(xx.abs() > 1e-300) {
        return Err(Error::geometry("primitive is not invertible"));
    }
    let x_inv = x.reverse() / xx;
    let flat = p.outer(&Multivector::einf());
    Ok(flat.inner(x).geometric(&x_inv).grade(2))
}

fn is_flat_point(pair: &Multivector) -> bool {
    pair.outer(&Multivector::einf()).max_abs() <= 1e-9 * pair.max_abs()
}

/// The finite points of a point pair (one for a flat point, two otherwise).
pub fn pair_points(pair: &Multivector) -> Result<Vec<Vec3>> {
    let scale = pair.max_abs();
    if !(scale > 0.0) {
        return Err(Error::geometry("empty point pair"));
    }
    if is_flat_point(pair) {
        let w = pair.get(E0 | EINF);
        if !(w.abs() > 1e-12 * scale) {
            return Err(Error::geometry("flat point at infinity"));
        }
        return Ok(vec![
            Vec3::new(
                pair.get(E1 | EINF),
                pair.get(E2 | EINF),
                pair.get(E3 | EINF),
            ) / w,
        ]);
    }
    let sq = pair.geometric(pair).scalar_part();
    if sq < -1e-12 * scale * scale {
        return Err(Error::geometry("imaginary point pair has no real points"));
    }
    let root = sq.max(0.0).sqrt();
    let d = -Multivector::einf().inner(pair);
    let mut out = Vec::with_capacity(2);
    for s in [1.0, -1.0] {
        let cand = (*pair + Multivector::scalar(s * root))
            .geometric(&d)
            .grade(1);
        if let Ok(x) = extract_point(&cand) {
            out.push(x);
        }
    }
    if out.is_empty() {
        return Err(Error::geometry("point pair has no finite factor"));
    }
    Ok(out)
}

/// The factor of `pair` closest to `reference`; exact ties go to the
/// lexicographically smaller coordinates.
pub fn split_pair(pair: &Multivector, reference: &Multivector) -> Result<Multivector> {
    let r = extract_point(reference)?;
    let pts = pair_points(pair)?;
    let best = pts
        .iter()
        .min_by(|a, b| {
            let da = (*a - r).norm();
            let db = (*b - r).norm();
            if (da - db).abs() <= 1e-12 * da.max(db).max(1.0) {
                lex_cmp(a, b)
            } else {
                da.total_cmp(&db)
            }
        })
        .expect("at least one point");
    Ok(embed_point(best))
}

fn lex_cmp(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Scales a line or plane so that `|X²| = 1`.
pub fn normalize_blade(x: &Multivector) -> Result<Multivector> {
    let sq = x.geometric(x).scalar_part();
    if !(sq.abs() > 1e-24 * x.max_abs().powi(2)) || !(sq.abs() > 0.0) {
        return Err(Error::geometry("degenerate blade cannot be normalized"));
    }
    Ok(*x / sq.abs().sqrt())
}

/// `X* ∧ P ∧ e∞`, normalized: the line through `P` orthogonal to `X`.
pub fn orthogonal_line(x: &Multivector, p: &Multivector) -> Result<Multivector> {
    let line = x.dual().grade(1).outer(p).outer(&Multivector::einf());
    if line.max_abs() <= 1e-12 * x.max_abs() * p.max_abs() {
        return Err(Error::geometry(
            "point lies at the sphere center; normal line is undefined",
        ));
    }
    normalize_blade(&line)
}

/// `L* ∧ P ∧ e∞`, normalized: the plane through `P` orthogonal to `L`.
pub fn tangent_plane(line: &Multivector, p: &Multivector) -> Result<Multivector> {
    let plane = line.dual().grade(2).outer(p).outer(&Multivector::einf());
    if plane.max_abs() <= 1e-12 * line.max_abs() * p.max_abs() {
        return Err(Error::geometry("degenerate tangent plane"));
    }
    normalize_blade(&plane)
}

/// Unit direction of a line `L = P ∧ d ∧ e∞` (sign follows `L`).
pub fn line_direction(line: &Multivector) -> Result<Vec3> {
    let d = Vec3::new(
        line.get(E0 | E1 | EINF),
        line.get(E0 | E2 | EINF),
        line.get(E0 | E3 | EINF),
    );
    let n = d.norm();
    if !(n > 1e-12 * line.max_abs()) {
        return Err(Error::geometry("line has no finite direction"));
    }
    Ok(d / n)
}

/// Unit normal of a plane given as a grade-4 element (sign follows the plane).
pub fn plane_normal(plane: &Multivector) -> Result<Vec3> {
    let s = plane.undual();
    let n = Vec3::new(s.get(E1), s.get(E2), s.get(E3));
    let len = n.norm();
    if !(len > 1e-12 * plane.max_abs()) {
        return Err(Error::geometry("element is not a plane"));
    }
    Ok(n / len)
}

/// Line through two distinct points, normalized.
pub fn line_through(a: &Vec3, b: &Vec3) -> Result<Multivector> {
    normalize_blade(
        &embed_point(a)
            .outer(&embed_point(b))
            .outer(&Multivector::einf()),
    )
}

/// Line through `p` with direction `d`, normalized.
pub fn line_from_point_direction(p: &Vec3, d: &Vec3) -> Result<Multivector> {
    normalize_blade(
        &embed_point(p)
            .outer(&Multivector::vector(d))
            .outer(&Multivector::einf()),
    )
}

/// Sphere element `X` with the given center and radius.
pub fn sphere(center: &Vec3, radius: f64) -> Multivector {
    (embed_point(center) - Multivector::einf() * (0.5 * radius * radius)).dual()
}

/// Plane element `X` for `n·x = d`.
pub fn plane(normal: &Vec3, d: f64) -> Multivector {
    (Multivector::vector(normal) + Multivector::einf() * d).dual()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-10.0f64..10.0).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    #[test]
    fn embedding_examples() {
        assert!(embed_point(&Vec3::zeros()).approx_eq(&Multivector::e0(), 0.0));
        let p = embed_point(&Vec3::new(1.0, 0.0, 0.0));
        let want = Multivector::e0() + Multivector::e1() + Multivector::einf() * 0.5;
        assert!(p.approx_eq(&want, 1e-15));
    }

    #[test]
    fn extraction_examples() {
        assert_eq!(extract_point(&Multivector::e0()).unwrap(), Vec3::zeros());
        let p = (Multivector::e0() + Multivector::e1() + Multivector::einf() * 0.5) * 2.0;
        assert!((extract_point(&p).unwrap() - Vec3::x()).norm() < 1e-15);
        assert!(extract_point(&Multivector::einf()).is_err());
    }

    proptest! {
        #[test]
        fn points_are_null(x in vec3()) {
            let p = embed_point(&x);
            prop_assert!((p * p).max_abs() <= 1e-12 * (1.0 + x.norm_squared()).powi(2));
            prop_assert!((extract_point(&p).unwrap() - x).norm() < 1e-12 * (1.0 + x.norm()));
        }

        #[test]
        fn inner_product_is_distance(a in vec3(), b in vec3()) {
            let d = embed_point(&a).inner(&embed_point(&b)).scalar_part();
            prop_assert!((d + 0.5 * (a - b).norm_squared()).abs() < 1e-9 * (1.0 + (a - b).norm_squared()));
        }
    }

    #[test]
    fn plane_fit() {
        let pts: Vec<Vec3> = (0..10)
            .map(|i| {
                Vec3::new(
                    (i as f64 * 1.3).sin() * 4.0,
                    (i as f64 * 0.7).cos() * 3.0,
                    0.0,
                )
            })
            .collect();
        let prim = fit_primitive(&pts).unwrap();
        assert_eq!(prim.kind(), PrimitiveKind::Plane);
        let (n, d) = prim.plane().unwrap();
        assert!((n.z.abs() - 1.0).abs() < 1e-12);
        assert!(d.abs() < 1e-12);
        assert!(prim.residuals().iter().all(|&e| e <= 1e-10));
    }

    #[test]
    fn sphere_fit() {
        let c = Vec3::new(1.0, 2.0, 3.0);
        let pts: Vec<Vec3> = (0..20)
            .map(|i| {
                let t = i as f64 * 2.399;
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / 20.0;
                let r = (1.0 - z * z).sqrt();
                c + Vec3::new(r * t.cos(), r * t.sin(), z) * 5.0
            })
            .collect();
        let prim = fit_primitive(&pts).unwrap();
        assert_eq!(prim.kind(), PrimitiveKind::Sphere);
        assert!((prim.center().unwrap() - c).norm() < 1e-6);
        assert!((prim.radius().unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_fits() {
        assert!(fit_primitive(&[Vec3::zeros(); 3]).is_err());
        assert!(fit_primitive(&[Vec3::x(); 6]).is_err());
        // four cocircular coplanar points lie on a whole family of spheres
        let square = [Vec3::x(), Vec3::y(), -Vec3::x(), -Vec3::y()];
        assert!(fit_primitive(&square).is_err());
    }

    #[test]
    fn projection_onto_sphere() {
        let x = sphere(&Vec3::zeros(), 1.0);
        let pair = project_to_primitive(&embed_point(&Vec3::new(0.0, 0.0, 2.0)), &x).unwrap();
        let mut pts = pair_points(&pair).unwrap();
        pts.sort_by(|a, b| a.z.total_cmp(&b.z));
        assert!((pts[0] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((pts[1] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        let near = split_pair(&pair, &embed_point(&Vec3::new(0.0, 0.0, 2.0))).unwrap();
        assert!((extract_point(&near).unwrap() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn projection_onto_plane() {
        let x = plane(&Vec3::z(), 0.0);
        let flat = project_to_primitive(&embed_point(&Vec3::new(0.0, 0.0, 5.0)), &x).unwrap();
        let p = split_pair(&flat, &embed_point(&Vec3::new(0.0, 0.0, 5.0))).unwrap();
        assert!(extract_point(&p).unwrap().norm() < 1e-12);
        // a point on the plane is fixed
        let q = Vec3::new(1.5, -2.0, 0.0);
        let flat = project_to_primitive(&embed_point(&q), &x).unwrap();
        let p = split_pair(&flat, &embed_point(&q)).unwrap();
        assert!((extract_point(&p).unwrap() - q).norm() < 1e-12);
    }

    #[test]
    fn split_tie_is_lexicographic() {
        let a = Vec3::new(-1.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        let pair = embed_point(&a).outer(&embed_point(&b));
        let p = split_pair(&pair, &embed_point(&Vec3::new(0.0, 3.0, 0.0))).unwrap();
        assert!((extract_point(&p).unwrap() - a).norm() < 1e-12);
    }

    #[test]
    fn imaginary_pair_fails() {
        let x = sphere(&Vec3::zeros(), 1.0);
        // line x = 2, parallel to z, misses the unit sphere
        let line = line_from_point_direction(&Vec3::new(2.0, 0.0, 0.0), &Vec3::z()).unwrap();
        let pair = line.dual().outer(&x.dual()).dual().grade(2);
        assert!(pair_points(&pair).is_err(), "{pair}");
        // while the z axis meets it at the poles
        let axis = line_from_point_direction(&Vec3::zeros(), &Vec3::z()).unwrap();
        let pair = axis.dual().outer(&x.dual()).dual().grade(2);
        let mut pts = pair_points(&pair).unwrap();
        pts.sort_by(|a, b| a.z.total_cmp(&b.z));
        assert!((pts[1] - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_lines_and_tangent_planes() {
        // plane z = 0 at the origin: the z axis
        let l = orthogonal_line(&plane(&Vec3::z(), 0.0), &Multivector::e0()).unwrap();
        assert!((line_direction(&l).unwrap().z.abs() - 1.0).abs() < 1e-12);
        assert!(l.outer(&Multivector::e0()).max_abs() < 1e-12);
        let e = tangent_plane(&l, &Multivector::e0()).unwrap();
        assert!((plane_normal(&e).unwrap().z.abs() - 1.0).abs() < 1e-12);

        // unit sphere at (1,0,0): radial line and the plane x = 1
        let s = sphere(&Vec3::zeros(), 1.0);
        let p = embed_point(&Vec3::x());
        let l = orthogonal_line(&s, &p).unwrap();
        assert!(l.outer(&Multivector::e0()).max_abs() < 1e-12);
        assert!((line_direction(&l).unwrap().x.abs() - 1.0).abs() < 1e-12);
        let e = tangent_plane(&l, &p).unwrap();
        assert!(e.outer(&p).max_abs() < 1e-12);
        assert!((plane_normal(&e).unwrap().x.abs() - 1.0).abs() < 1e-12);
        // homogeneous in X
        let l2 = orthogonal_line(&(s * 2.0), &p).unwrap();
        assert!(l2.approx_eq(&l, 1e-12) || l2.approx_eq(&-l, 1e-12));
        // center of the sphere has no normal line
        assert!(orthogonal_line(&s, &Multivector::e0()).is_err());
    }

    #[test]
    fn tangent_plane_uses_only_line_direction() {
        let l = line_from_point_direction(&Vec3::zeros(), &Vec3::z()).unwrap();
        let p = embed_point(&Vec3::new(3.0, 1.0, 2.0));
        let e = tangent_plane(&l, &p).unwrap();
        assert!(e.outer(&p).max_abs() < 1e-12);
        assert!((plane_normal(&e).unwrap().z.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_squares() {
        let l = line_through(&Vec3::new(1.0, 2.0, 3.0), &Vec3::new(-2.0, 0.5, 1.0)).unwrap();
        assert!(((l * l).scalar_part() - 1.0).abs() < 1e-12);
        let e = tangent_plane(&l, &embed_point(&Vec3::new(1.0, 2.0, 3.0))).unwrap();
        assert!(((e * e).scalar_part().abs() - 1.0).abs() < 1e-12);
    }
}
