use nalgebra::{Matrix3, Rotation3, Unit};

use super::multivector::{Multivector, E0, E1, E2, E3, EINF};
use super::primitives::{embed_point, extract_point};
use crate::{Error, Result, Vec3};

/// `exp(B)` for a bivector with `B² = s + Q`, `s` scalar and `Q` a
/// nilpotent grade-4 part commuting with `B` (every rigid-motion generator
/// has this form). Rotations follow `exp(−½θ e₁₂)`, turning `e₁` towards `e₂`
/// by `θ`; translations follow `exp(½t e∞e₁)`, moving points by `t` along `x`.
pub fn motor_exp(b: &Multivector) -> Multivector {
    let b = b.grade(2);
    let sq = b.geometric(&b);
    let s = sq.scalar_part();
    let q = sq.grade(4);
    // even series in s: c0 = Σ sᵐ/(2m)!, c1 = Σ sᵐ/(2m+1)!, with s-derivatives
    let (c0, dc0, c1, dc1) = if s.abs() < 1e-8 {
        (
            1.0 + s / 2.0,
            0.5 + s / 12.0,
            1.0 + s / 6.0,
            1.0 / 6.0 + s / 60.0,
        )
    } else if s < 0.0 {
        let phi = (-s).sqrt();
        let (sn, cs) = phi.sin_cos();
        (
            cs,
            sn / (2.0 * phi),
            sn / phi,
            (sn - phi * cs) / (2.0 * phi.powi(3)),
        )
    } else {
        let phi = s.sqrt();
        let (sn, cs) = (phi.sinh(), phi.cosh());
        (
            cs,
            sn / (2.0 * phi),
            sn / phi,
            (phi * cs - sn) / (2.0 * phi.powi(3)),
        )
    };
    Multivector::scalar(c0) + q * dc0 + b.geometric(&(Multivector::scalar(c1) + q * dc1))
}

/// Translator moving points by `t`.
pub fn translator(t: &Vec3) -> Multivector {
    Multivector::one() - Multivector::vector(t).geometric(&Multivector::einf()) * 0.5
}

/// Rotor turning by `angle` about the unit `axis` through the origin.
pub fn rotor(axis: &Vec3, angle: f64) -> Multivector {
    motor_exp(&(euclidean_bivector(axis) * (-0.5 * angle)))
}

/// `ωₓe₂₃ + ω_y e₃₁ + ω_z e₁₂`, the bivector dual to `ω` in 3-D.
pub fn euclidean_bivector(w: &Vec3) -> Multivector {
    Multivector::from_null_terms(&[(E2 | E3, w.x), (E1 | E3, -w.y), (E1 | E2, w.z)])
}

fn bivector_axis(b: &Multivector) -> Vec3 {
    Vec3::new(b.get(E2 | E3), -b.get(E1 | E3), b.get(E1 | E2))
}

pub fn motor_from_rotation_translation(rot: &Rotation3<f64>, t: &Vec3) -> Multivector {
    let r = match rot.axis_angle() {
        Some((axis, angle)) => rotor(&axis, angle),
        None => Multivector::one(),
    };
    translator(t).geometric(&r)
}

/// Rotation matrix and translation of the rigid motion `X ↦ M X M̃`.
pub fn motor_to_rotation_translation(m: &Multivector) -> Result<(Matrix3<f64>, Vec3)> {
    let t = apply_to_point(m, &Vec3::zeros())?;
    let mut r = Matrix3::zeros();
    for (j, e) in [Multivector::e1(), Multivector::e2(), Multivector::e3()]
        .iter()
        .enumerate()
    {
        let d = m.sandwich(e);
        // the image of a direction picks up an e∞ part; the Euclidean part rotates
        r.set_column(j, &d.euclidean());
    }
    Ok((r, t))
}

pub fn apply_to_point(m: &Multivector, x: &Vec3) -> Result<Vec3> {
    extract_point(&m.sandwich(&embed_point(x)))
}

/// `1 − M M̃`, the normalization defect of a motor.
pub fn motor_defect(m: &Multivector) -> f64 {
    (m.geometric(&m.reverse()) - Multivector::one()).max_abs()
}

/// Rotor part (no `e∞` blades) and translation `t` with `M = T(t) R`.
fn split_motor(m: &Multivector) -> (Multivector, Vec3) {
    let c = m.null_coefficients();
    let mut rc = [0.0; 32];
    for (mask, v) in c.iter().enumerate() {
        if mask & (EINF | E0) == 0 {
            rc[mask] = *v;
        }
    }
    let r = Multivector::from_null_coefficients(&rc);
    let tm = m.geometric(&r.reverse());
    // T = 1 − ½ t e∞ = 1 − ½ Σ tᵢ eᵢ∧e∞
    let t = Vec3::new(tm.get(E1 | EINF), tm.get(E2 | EINF), tm.get(E3 | EINF)) * -2.0;
    (r, t)
}

/// Bivector `B` with `exp(B) = ±M`, for rotation angles below π.
pub fn motor_log(m: &Multivector) -> Result<Multivector> {
    if motor_defect(m) > 1e-6 {
        return Err(Error::geometry("motor is not normalized"));
    }
    let (mut r, t) = split_motor(m);
    if r.scalar_part() < 0.0 {
        r = -r;
    }
    let cos_half = r.scalar_part().min(1.0);
    if cos_half < 1e-9 {
        return Err(Error::geometry("rotation by π has no unique logarithm"));
    }
    let rb = r.grade(2);
    let sin_half = rb.scalar_product(&rb.reverse()).max(0.0).sqrt();
    let trans = |v: &Vec3| Multivector::einf().geometric(&Multivector::vector(v)) * 0.5;
    if sin_half < 1e-15 {
        return Ok(trans(&t).grade(2));
    }
    let half = sin_half.atan2(cos_half);
    let theta = 2.0 * half;
    // rotation part −½θÎ with Î the unit rotation plane
    let br = rb * (half / sin_half);
    // rb = −sin(θ/2) Î
    let axis = -bivector_axis(&rb).normalize();
    let t_axis = axis * axis.dot(&t);
    let t_perp = t - t_axis;
    // axis offset c ⟂ axis with (I − Rot) c = t⊥
    let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), theta);
    let a = Matrix3::identity() - rot.matrix() + axis * axis.transpose();
    let c = a
        .lu()
        .solve(&t_perp)
        .ok_or_else(|| Error::geometry("screw axis is undefined"))?;
    let tc = translator(&c);
    let b = tc.sandwich(&br) + trans(&t_axis);
    Ok(b.grade(2))
}

/// `M = (1 + L₂L₁)/C` with `M L₁ M̃ = L₂` for normalized lines (`L² = 1`).
/// `C` is the square root of the scalar plus grade-4 part of `K K̃`.
pub fn motor_between_lines(l1: &Multivector, l2: &Multivector) -> Result<Multivector> {
    let k = Multivector::one() + l2.geometric(l1);
    let kk = k.geometric(&k.reverse());
    let s = kk.scalar_part();
    let q = kk.grade(4);
    if !(s > 1e-10) {
        return Err(Error::geometry(
            "opposite lines: the motor between them is not unique",
        ));
    }
    // (s + Q)^{-1/2} = s^{-1/2} (1 − Q/(2s)) since Q² = 0
    let inv_sqrt = (Multivector::one() - q / (2.0 * s)) / s.sqrt();
    Ok(k.geometric(&inv_sqrt).even())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cga::primitives::{line_from_point_direction, line_through};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-r..r).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    #[test]
    fn identity_motor() {
        assert!(motor_exp(&Multivector::ZERO).approx_eq(&Multivector::one(), 0.0));
        assert!(motor_log(&Multivector::one()).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn rotation_generator() {
        let m = motor_exp(&(Multivector::blade(E1 | E2) * -FRAC_PI_4));
        let p = apply_to_point(&m, &Vec3::x()).unwrap();
        assert!((p - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn translation_generator() {
        let t = 2.5;
        let b = Multivector::einf().geometric(&Multivector::e1()) * (t / 2.0);
        let m = motor_exp(&b);
        let p = apply_to_point(&m, &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert!((p - Vec3::new(1.0 + t, 2.0, 3.0)).norm() < 1e-12);
        assert!(m.approx_eq(&translator(&Vec3::new(t, 0.0, 0.0)), 1e-15));
    }

    #[test]
    fn rotation_translation_round_trip() {
        let rot = Rotation3::from_euler_angles(0.4, -0.2, 1.3);
        let t = Vec3::new(0.3, -1.0, 2.0);
        let m = motor_from_rotation_translation(&rot, &t);
        let (r, tt) = motor_to_rotation_translation(&m).unwrap();
        assert!((r - rot.matrix()).amax() < 1e-12);
        assert!((tt - t).norm() < 1e-12);
        let x = Vec3::new(1.0, 2.0, -0.5);
        assert!((apply_to_point(&m, &x).unwrap() - (rot * x + t)).norm() < 1e-12);
    }

    #[test]
    fn log_rejects_half_turn() {
        let m = rotor(&Vec3::z(), PI);
        assert!(motor_log(&m).is_err());
    }

    proptest! {
        #[test]
        fn log_inverts_exp(axis in vec3(1.0), angle in 0.01f64..(PI - 0.1), point in vec3(3.0), slide in -2.0f64..2.0) {
            prop_assume!(axis.norm() > 0.1);
            let axis = axis.normalize();
            let b = translator(&point).sandwich(&(euclidean_bivector(&axis) * (-0.5 * angle)))
                + Multivector::einf().geometric(&Multivector::vector(&(axis * slide))) * 0.5;
            let b = b.grade(2);
            let back = motor_log(&motor_exp(&b)).unwrap();
            prop_assert!(back.approx_eq(&b, 1e-9), "{} vs {}", back, b);
        }

        #[test]
        fn motors_stay_normalized_and_isometric(
            a in vec3(1.0), angle in -3.0f64..3.0, t in vec3(5.0), x in vec3(5.0), y in vec3(5.0)
        ) {
            prop_assume!(a.norm() > 0.1);
            let m = translator(&t).geometric(&rotor(&a.normalize(), angle));
            let m2 = m.geometric(&motor_exp(&(Multivector::blade(E2 | E3) * 0.3 + Multivector::blade(E1 | EINF) * 0.7)));
            prop_assert!(motor_defect(&m2) < 1e-10);
            let px = apply_to_point(&m2, &x).unwrap();
            let py = apply_to_point(&m2, &y).unwrap();
            prop_assert!(((px - py).norm() - (x - y).norm()).abs() < 1e-10 * (1.0 + (x - y).norm()));
        }

        #[test]
        fn line_motor_postcondition(p1 in vec3(5.0), d1 in vec3(1.0), p2 in vec3(5.0), d2 in vec3(1.0)) {
            prop_assume!(d1.norm() > 0.1 && d2.norm() > 0.1);
            let l1 = line_from_point_direction(&p1, &d1).unwrap();
            let l2 = line_from_point_direction(&p2, &d2).unwrap();
            prop_assume!(d1.normalize().dot(&d2.normalize()) > -0.99);
            let m = motor_between_lines(&l1, &l2).unwrap();
            prop_assert!(motor_defect(&m) < 1e-10);
            prop_assert!(m.sandwich(&l1).approx_eq(&l2, 1e-8));
        }
    }

    #[test]
    fn line_motor_examples() {
        let z = line_from_point_direction(&Vec3::zeros(), &Vec3::z()).unwrap();
        let m = motor_between_lines(&z, &z).unwrap();
        assert!(m.approx_eq(&Multivector::one(), 1e-12));
        assert!(motor_log(&m).unwrap().max_abs() < 1e-12);

        let x = line_from_point_direction(&Vec3::zeros(), &Vec3::x()).unwrap();
        let m = motor_between_lines(&z, &x).unwrap();
        let (r, t) = motor_to_rotation_translation(&m).unwrap();
        assert!(t.norm() < 1e-12);
        let want = Rotation3::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2);
        assert!((r - want.matrix()).amax() < 1e-12);

        let shifted = line_through(&Vec3::new(1.0, 2.0, 0.0), &Vec3::new(1.0, 2.0, 1.0)).unwrap();
        let m = motor_between_lines(&z, &shifted).unwrap();
        let (r, t) = motor_to_rotation_translation(&m).unwrap();
        assert!((r - Matrix3::identity()).amax() < 1e-12);
        assert!((t - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-12);

        assert!(motor_between_lines(&z, &-z).is_err());
    }
}
