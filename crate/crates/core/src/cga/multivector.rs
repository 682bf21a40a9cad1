use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use nalgebra::{SMatrix, SVector};

use crate::Vec3;

/// Null-basis blade bits: `e₀`, `e₁`, `e₂`, `e₃`, `e∞`.
pub const E0: usize = 1;
pub const E1: usize = 2;
pub const E2: usize = 4;
pub const E3: usize = 8;
pub const EINF: usize = 16;

// Internal storage is over the orthonormal basis e1, e2, e3, e+, e− (bits
// 0..5) with e+² = 1 and e−² = −1. The null vectors are e₀ = ½(e− − e+) and
// e∞ = e− + e+.
const EP: usize = 8;
const EM: usize = 16;

type Mat32 = SMatrix<f64, 32, 32>;

struct Tables {
    sign: [[f64; 32]; 32],
    /// Column k: orthonormal coefficients of null blade k.
    null_to_orth: Mat32,
    orth_to_null: Mat32,
}

fn reorder_sign(a: usize, b: usize) -> f64 {
    let mut a = a >> 1;
    let mut swaps = 0;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut sign = [[0.0; 32]; 32];
        for (a, row) in sign.iter_mut().enumerate() {
            for (b, s) in row.iter_mut().enumerate() {
                let metric = if a & b & EM != 0 { -1.0 } else { 1.0 };
                *s = reorder_sign(a, b) * metric;
            }
        }
        let mut null_to_orth = Mat32::zeros();
        let mut vecs = [[0.0; 32]; 5];
        vecs[0][EM] = 0.5;
        vecs[0][EP] = -0.5;
        vecs[1][1] = 1.0;
        vecs[2][2] = 1.0;
        vecs[3][4] = 1.0;
        vecs[4][EM] = 1.0;
        vecs[4][EP] = 1.0;
        for k in 0..32 {
            let mut acc = [0.0; 32];
            acc[0] = 1.0;
            for (bit, v) in vecs.iter().enumerate() {
                if k & (1 << bit) != 0 {
                    acc = outer_raw(&sign, &acc, v);
                }
            }
            for (i, c) in acc.iter().enumerate() {
                null_to_orth[(i, k)] = *c;
            }
        }
        let orth_to_null = null_to_orth
            .try_inverse()
            .expect("null basis change is invertible");
        Tables {
            sign,
            null_to_orth,
            orth_to_null,
        }
    })
}

fn outer_raw(sign: &[[f64; 32]; 32], a: &[f64; 32], b: &[f64; 32]) -> [f64; 32] {
    let mut out = [0.0; 32];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if y != 0.0 && i & j == 0 {
                out[i ^ j] += sign[i][j] * x * y;
            }
        }
    }
    out
}

/// Element of the conformal algebra R(4,1), dense over all 32 blades.
#[derive(Clone, Copy, PartialEq)]
pub struct Multivector {
    c: [f64; 32],
}

impl Default for Multivector {
    fn default() -> Self {
        Multivector::ZERO
    }
}

impl Multivector {
    pub const ZERO: Multivector = Multivector { c: [0.0; 32] };

    pub fn scalar(s: f64) -> Self {
        let mut m = Self::ZERO;
        m.c[0] = s;
        m
    }

    pub fn one() -> Self {
        Self::scalar(1.0)
    }

    /// Basis blade of the null basis, e.g. `blade(E0 | EINF)` = `e₀ ∧ e∞`.
    pub fn blade(mask: usize) -> Self {
        let t = tables();
        let mut m = Self::ZERO;
        for i in 0..32 {
            m.c[i] = t.null_to_orth[(i, mask & 31)];
        }
        m
    }

    pub fn e0() -> Self {
        Self::blade(E0)
    }

    pub fn einf() -> Self {
        Self::blade(EINF)
    }

    pub fn e1() -> Self {
        Self::blade(E1)
    }

    pub fn e2() -> Self {
        Self::blade(E2)
    }

    pub fn e3() -> Self {
        Self::blade(E3)
    }

    /// Euclidean vector `x₁e₁ + x₂e₂ + x₃e₃`.
    pub fn vector(x: &Vec3) -> Self {
        let mut m = Self::ZERO;
        m.c[1] = x.x;
        m.c[2] = x.y;
        m.c[4] = x.z;
        m
    }

    /// `I = e₀ ∧ e₁ ∧ e₂ ∧ e₃ ∧ e∞`, with `I² = −1`.
    pub fn pseudoscalar() -> Self {
        Self::blade(31)
    }

    pub fn from_null_terms(terms: &[(usize, f64)]) -> Self {
        terms
            .iter()
            .fold(Self::ZERO, |acc, &(mask, v)| acc + Self::blade(mask) * v)
    }

    pub fn from_null_coefficients(coeffs: &[f64; 32]) -> Self {
        let v = tables().null_to_orth * SVector::<f64, 32>::from_column_slice(coeffs);
        let mut m = Self::ZERO;
        m.c.copy_from_slice(v.as_slice());
        m
    }

    pub fn null_coefficients(&self) -> [f64; 32] {
        let v = tables().orth_to_null * SVector::<f64, 32>::from_column_slice(&self.c);
        let mut out = [0.0; 32];
        out.copy_from_slice(v.as_slice());
        out
    }

    /// Coefficient of a null-basis blade.
    pub fn get(&self, mask: usize) -> f64 {
        let t = tables();
        (0..32)
            .map(|i| t.orth_to_null[(mask & 31, i)] * self.c[i])
            .sum()
    }

    pub fn scalar_part(&self) -> f64 {
        self.c[0]
    }

    /// Euclidean part `(c₁, c₂, c₃)` of the grade-1 component.
    pub fn euclidean(&self) -> Vec3 {
        Vec3::new(self.c[1], self.c[2], self.c[4])
    }

    pub fn grade(&self, k: u32) -> Self {
        let mut m = Self::ZERO;
        for (i, v) in self.c.iter().enumerate() {
            if i.count_ones() == k {
                m.c[i] = *v;
            }
        }
        m
    }

    /// Grades present above `tol` (relative to the largest coefficient).
    pub fn grades(&self, tol: f64) -> Vec<u32> {
        let scale = self.max_abs();
        let mut g: Vec<u32> = (0..32)
            .filter(|&i| self.c[i].abs() > tol * scale)
            .map(|i: usize| i.count_ones())
            .collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn even(&self) -> Self {
        let mut m = *self;
        for (i, v) in m.c.iter_mut().enumerate() {
            if i.count_ones() % 2 == 1 {
                *v = 0.0;
            }
        }
        m
    }

    pub fn reverse(&self) -> Self {
        let mut m = *self;
        for (i, v) in m.c.iter_mut().enumerate() {
            let k = i.count_ones();
            if (k * k.saturating_sub(1) / 2) % 2 == 1 {
                *v = -*v;
            }
        }
        m
    }

    pub fn geometric(&self, other: &Self) -> Self {
        let sign = &tables().sign;
        let mut out = Self::ZERO;
        for (i, &x) in self.c.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in other.c.iter().enumerate() {
                if y != 0.0 {
                    out.c[i ^ j] += sign[i][j] * x * y;
                }
            }
        }
        out
    }

    /// Outer (wedge) product.
    pub fn outer(&self, other: &Self) -> Self {
        Multivector {
            c: outer_raw(&tables().sign, &self.c, &other.c),
        }
    }

    /// Left contraction `self ⌋ other`.
    pub fn inner(&self, other: &Self) -> Self {
        let sign = &tables().sign;
        let mut out = Self::ZERO;
        for (i, &x) in self.c.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in other.c.iter().enumerate() {
                if y != 0.0 && i & !j == 0 {
                    out.c[i ^ j] += sign[i][j] * x * y;
                }
            }
        }
        out
    }

    /// Symmetric scalar product `⟨a b⟩₀`.
    pub fn scalar_product(&self, other: &Self) -> f64 {
        let sign = &tables().sign;
        (0..32).map(|i| sign[i][i] * self.c[i] * other.c[i]).sum()
    }

    /// Dual `X I⁻¹`.
    pub fn dual(&self) -> Self {
        // I⁻¹ = −I
        -self.geometric(&Self::pseudoscalar())
    }

    /// Inverse of [`Multivector::dual`]: `X I`.
    pub fn undual(&self) -> Self {
        self.geometric(&Self::pseudoscalar())
    }

    /// General inverse via the left-multiplication matrix.
    pub fn inverse(&self) -> Option<Self> {
        let sign = &tables().sign;
        let mut l = Mat32::zeros();
        for (i, &x) in self.c.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for j in 0..32 {
                l[(i ^ j, j)] += sign[i][j] * x;
            }
        }
        let mut rhs = SVector::<f64, 32>::zeros();
        rhs[0] = 1.0;
        let y = l.lu().solve(&rhs)?;
        let mut m = Self::ZERO;
        m.c.copy_from_slice(y.as_slice());
        if !m.c.iter().all(|v| v.is_finite()) {
            return None;
        }
        let check = self.geometric(&m) - Self::one();
        if check.max_abs() > 1e-8 * (1.0 + m.max_abs() * self.max_abs()) {
            return None;
        }
        Some(m)
    }

    /// `self · x · self̃`.
    pub fn sandwich(&self, x: &Self) -> Self {
        self.geometric(x).geometric(&self.reverse())
    }

    /// Commutator product `½(ab − ba)`.
    pub fn commutator(&self, other: &Self) -> Self {
        (self.geometric(other) - other.geometric(self)) * 0.5
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the orthonormal coefficients.
    pub fn coefficient_norm(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (*self - *other).max_abs() <= tol
    }
}

impl fmt::Debug for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Multivector({self})")
    }
}

fn blade_name(mask: usize) -> String {
    if mask == 0 {
        return String::new();
    }
    let mut s = String::from("e");
    for (bit, ch) in ['0', '1', '2', '3', '∞'].iter().enumerate() {
        if mask & (1 << bit) != 0 {
            s.push(*ch);
        }
    }
    s
}

/// Signed blade sum over the null basis, e.g. `1.0 e01 − 0.5 e23`.
impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coeffs = self.null_coefficients();
        let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut order: Vec<usize> = (0..32).collect();
        order.sort_by_key(|&m| (m.count_ones(), blade_name(m)));
        let mut first = true;
        for m in order {
            let v = coeffs[m];
            if v == 0.0 || v.abs() <= 1e-12 * scale {
                continue;
            }
            let sep = match (first, v < 0.0) {
                (true, false) => "",
                (true, true) => "−",
                (false, false) => " + ",
                (false, true) => " − ",
            };
            write!(f, "{sep}{:?}", v.abs())?;
            if m != 0 {
                write!(f, " {}", blade_name(m))?;
            }
            first = false;
        }
        if first {
            write!(f, "0.0")?;
        }
        Ok(())
    }
}

impl Add for Multivector {
    type Output = Multivector;
    fn add(mut self, rhs: Multivector) -> Multivector {
        self += rhs;
        self
    }
}

impl AddAssign for Multivector {
    fn add_assign(&mut self, rhs: Multivector) {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
    }
}

impl Sub for Multivector {
    type Output = Multivector;
    fn sub(mut self, rhs: Multivector) -> Multivector {
        self -= rhs;
        self
    }
}

impl SubAssign for Multivector {
    fn sub_assign(&mut self, rhs: Multivector) {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
    }
}

impl Neg for Multivector {
    type Output = Multivector;
    fn neg(mut self) -> Multivector {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul for Multivector {
    type Output = Multivector;
    fn mul(self, rhs: Multivector) -> Multivector {
        self.geometric(&rhs)
    }
}

impl Mul<f64> for Multivector {
    type Output = Multivector;
    fn mul(mut self, rhs: f64) -> Multivector {
        for a in self.c.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl Mul<Multivector> for f64 {
    type Output = Multivector;
    fn mul(self, rhs: Multivector) -> Multivector {
        rhs * self
    }
}

impl Div<f64> for Multivector {
    type Output = Multivector;
    fn div(self, rhs: f64) -> Multivector {
        self * (1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mv_strategy() -> impl Strategy<Value = Multivector> {
        prop::array::uniform32(-1.0f64..1.0).prop_map(|c| Multivector { c })
    }

    #[test]
    fn metric() {
        let e0 = Multivector::e0();
        let ei = Multivector::einf();
        assert!((Multivector::e1() * Multivector::e1()).approx_eq(&Multivector::one(), 1e-15));
        assert!((e0.inner(&ei).scalar_part() + 1.0).abs() < 1e-15);
        assert!((e0 * e0).max_abs() < 1e-15);
        assert!((ei * ei).max_abs() < 1e-15);
        let i = Multivector::pseudoscalar();
        assert!((i * i).approx_eq(&Multivector::scalar(-1.0), 1e-14));
    }

    #[test]
    fn null_coefficients_round_trip() {
        let m = Multivector::from_null_terms(&[(E0 | E1, 1.0), (E2 | E3, -0.5), (EINF, 2.0)]);
        let c = m.null_coefficients();
        assert!((c[E0 | E1] - 1.0).abs() < 1e-14);
        assert!((c[E2 | E3] + 0.5).abs() < 1e-14);
        assert!((m.get(EINF) - 2.0).abs() < 1e-14);
        assert!(Multivector::from_null_coefficients(&c).approx_eq(&m, 1e-14));
    }

    #[test]
    fn pretty_printer() {
        let m = Multivector::from_null_terms(&[(E0 | E1, 1.0), (E2 | E3, -0.5)]);
        assert_eq!(m.to_string(), "1.0 e01 − 0.5 e23");
        assert_eq!(Multivector::scalar(-2.0).to_string(), "−2.0");
        assert_eq!(Multivector::ZERO.to_string(), "0.0");
        assert_eq!(Multivector::einf().to_string(), "1.0 e∞");
    }

    #[test]
    fn wedge_of_null_vectors_matches_orthonormal_bivector() {
        let e0 = Multivector::e0();
        let ei = Multivector::einf();
        let lhs = e0.outer(&ei);
        // e₀ ∧ e∞ = e− ∧ e+ = −e+e−
        let mut rhs = Multivector::ZERO;
        rhs.c[EP | EM] = -1.0;
        assert!(lhs.approx_eq(&rhs, 1e-15));
        assert!(Multivector::blade(E0 | EINF).approx_eq(&lhs, 1e-15));
    }

    #[test]
    fn dual_round_trip_and_inverse() {
        let v = Multivector::from_null_terms(&[(E0, 1.0), (E1, 2.0), (EINF, -0.3)]);
        assert!(v.dual().undual().approx_eq(&v, 1e-14));
        let inv = v.inverse().unwrap();
        assert!((v * inv).approx_eq(&Multivector::one(), 1e-12));
        assert!(Multivector::e0().inverse().is_none());
    }

    proptest! {
        #[test]
        fn associativity(a in mv_strategy(), b in mv_strategy(), c in mv_strategy()) {
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            prop_assert!(lhs.approx_eq(&rhs, 1e-10));
        }

        #[test]
        fn grade_parts_sum_to_whole(a in mv_strategy()) {
            let sum = (0..=5).fold(Multivector::ZERO, |acc, k| acc + a.grade(k));
            prop_assert!(sum.approx_eq(&a, 0.0));
        }

        #[test]
        fn reverse_is_antimorphism(a in mv_strategy(), b in mv_strategy()) {
            prop_assert!((a * b).reverse().approx_eq(&(b.reverse() * a.reverse()), 1e-12));
        }

        #[test]
        fn vector_products_split(a in prop::array::uniform5(-1.0f64..1.0), b in prop::array::uniform5(-1.0f64..1.0)) {
            let mk = |v: [f64; 5]| Multivector::from_null_terms(&[(E0, v[0]), (E1, v[1]), (E2, v[2]), (E3, v[3]), (EINF, v[4])]);
            let (x, y) = (mk(a), mk(b));
            // ab = a⌋b + a∧b for vectors
            prop_assert!((x * y).approx_eq(&(x.inner(&y) + x.outer(&y)), 1e-12));
        }
    }
}
