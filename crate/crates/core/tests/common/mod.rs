#![allow(dead_code)]

use ergocov::cga::{
    motor_from_rotation_translation, revolute_screw, KinematicChain, Multivector, E1, E2, E3, EINF,
};
use ergocov::Vec3;
use nalgebra::{Matrix3, Matrix4, Rotation3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Joint table of the seven-axis fixture arm: unit axis and a point on it,
/// in metres, at the zero configuration.
pub const ARM_AXES: [([f64; 3], [f64; 3]); 7] = [
    ([0.0, 0.0, 1.0], [0.0, 0.0, 0.333]),
    ([0.0, 1.0, 0.0], [0.0, 0.0, 0.333]),
    ([0.0, 0.0, 1.0], [0.0, 0.0, 0.649]),
    ([0.0, -1.0, 0.0], [0.0825, 0.0, 0.649]),
    ([0.0, 0.0, 1.0], [0.0, 0.0, 1.033]),
    ([0.0, -1.0, 0.0], [0.0, 0.0, 1.033]),
    ([0.0, 0.0, -1.0], [0.088, 0.0, 1.033]),
];

pub fn arm_home() -> Matrix4<f64> {
    let r = Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
        * Rotation3::from_axis_angle(&Vec3::z_axis(), -std::f64::consts::FRAC_PI_4);
    homogeneous(r.matrix(), &Vec3::new(0.088, 0.0, 0.926))
}

pub fn homogeneous(r: &Matrix3<f64>, p: &Vec3) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(p);
    t
}

pub fn skew(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rigid motion of a unit twist (ω, v) advanced by `theta` (Rodrigues).
pub fn twist_exp(w: &Vec3, v: &Vec3, theta: f64) -> Matrix4<f64> {
    let k = skew(w);
    let r = Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos());
    let g = Matrix3::identity() * theta + k * (1.0 - theta.cos()) + k * k * (theta - theta.sin());
    homogeneous(&r, &(g * v))
}

/// Product-of-exponentials forward kinematics of a revolute chain.
pub fn poe_fk(axes: &[([f64; 3], [f64; 3])], home: &Matrix4<f64>, q: &[f64]) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    for ((w, p), &qi) in axes.iter().zip(q) {
        let w = Vec3::from(*w);
        let v = -w.cross(&Vec3::from(*p));
        t *= twist_exp(&w, &v, qi);
    }
    t * home
}

/// Body Jacobian columns (ω, v) with `T⁻¹ ∂T/∂qᵢ = [ω]× ⊕ v`.
pub fn body_jacobian(
    axes: &[([f64; 3], [f64; 3])],
    home: &Matrix4<f64>,
    q: &[f64],
) -> Vec<Vector6<f64>> {
    let mut prefix = Matrix4::identity();
    let t = poe_fk(axes, home, q);
    let r = t.fixed_view::<3, 3>(0, 0).into_owned();
    let p = t.fixed_view::<3, 1>(0, 3).into_owned();
    let mut cols = Vec::new();
    for ((w, pt), &qi) in axes.iter().zip(q) {
        let w = Vec3::from(*w);
        let v = -w.cross(&Vec3::from(*pt));
        let pr = prefix.fixed_view::<3, 3>(0, 0).into_owned();
        let pp = prefix.fixed_view::<3, 1>(0, 3).into_owned();
        // spatial column, then moved into the tool frame
        let ws = pr * w;
        let vs = pr * v + pp.cross(&ws);
        let wb = r.transpose() * ws;
        let vb = r.transpose() * (vs - p.cross(&ws));
        cols.push(Vector6::new(wb.x, wb.y, wb.z, vb.x, vb.y, vb.z));
        prefix *= twist_exp(&w, &v, qi);
    }
    cols
}

/// The fixture arm assembled from [`ARM_AXES`] and [`arm_home`].
pub fn arm_chain() -> KinematicChain {
    let screws = ARM_AXES
        .iter()
        .map(|(w, p)| revolute_screw(&Vec3::from(*w), &Vec3::from(*p)))
        .collect();
    let h = arm_home();
    let rot = Rotation3::from_matrix_unchecked(h.fixed_view::<3, 3>(0, 0).into_owned());
    let base = motor_from_rotation_translation(&rot, &Vec3::new(h[(0, 3)], h[(1, 3)], h[(2, 3)]));
    KinematicChain::new(screws, base).expect("valid chain")
}

/// Body twist (ω, v) of an end-effector-frame Jacobian column
/// `B = −½(ω₁e₂₃ − ω₂e₁₃ + ω₃e₁₂ + vᵢeᵢ∞)`.
pub fn column_twist(b: &Multivector) -> [f64; 6] {
    [
        -2.0 * b.get(E2 | E3),
        2.0 * b.get(E1 | E3),
        -2.0 * b.get(E1 | E2),
        -2.0 * b.get(E1 | EINF),
        -2.0 * b.get(E2 | EINF),
        -2.0 * b.get(E3 | EINF),
    ]
}
