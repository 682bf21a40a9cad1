//! Task-space impedance control evaluated at the kinematic level: line
//! tracking, a wrench PID, damping, and the mapping from wrenches to joint
//! torques. There is no rigid-body dynamics here.

use serde::{Deserialize, Serialize};

use crate::cga::{
    ee_frame_jacobian, forward_kinematics, motor_between_lines, motor_log, normalize_blade,
    KinematicChain, Multivector, E0, E1, E2, E3, EINF,
};
use crate::{Error, Result};

/// Wrench blades in component order: torques `e₂₃, e₁₃, e₁₂`, then forces
/// `e₀₁, e₀₂, e₀₃`.
pub const WRENCH_BLADES: [usize; 6] = [E2 | E3, E1 | E3, E1 | E2, E0 | E1, E0 | E2, E0 | E3];

/// Twist blades matching [`WRENCH_BLADES`] one-to-one: rotations, then `eᵢ∞`.
pub const TWIST_BLADES: [usize; 6] = [E2 | E3, E1 | E3, E1 | E2, E1 | EINF, E2 | EINF, E3 | EINF];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    pub k_line: [f64; 6],
    pub d_twist: [f64; 6],
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_clamp: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k_line: [30.0, 30.0, 30.0, 750.0, 750.0, 300.0],
            d_twist: [10.0, 10.0, 10.0, 150.0, 150.0, 50.0],
            kp: 0.5,
            ki: 5.0,
            kd: 0.5,
            integral_clamp: 10.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .k_line
            .iter()
            .chain(&self.d_twist)
            .chain([&self.kp, &self.ki, &self.kd]);
        for g in all {
            if !(*g >= 0.0) || !g.is_finite() {
                return Err(Error::domain(format!(
                    "gains must be finite and nonnegative, got {g}"
                )));
            }
        }
        if !(self.integral_clamp > 0.0) {
            return Err(Error::domain("integral clamp must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrenchPidState {
    integral: [f64; 6],
    previous: Option<[f64; 6]>,
    dt: f64,
}

impl WrenchPidState {
    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        Ok(WrenchPidState {
            integral: [0.0; 6],
            previous: None,
            dt,
        })
    }

    pub fn integral(&self) -> &[f64; 6] {
        &self.integral
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

pub fn wrench_coefficients(w: &Multivector) -> [f64; 6] {
    WRENCH_BLADES.map(|b| w.get(b))
}

pub fn wrench_from_coefficients(c: &[f64; 6]) -> Multivector {
    let terms: Vec<(usize, f64)> = WRENCH_BLADES
        .iter()
        .copied()
        .zip(c.iter().copied())
        .collect();
    Multivector::from_null_terms(&terms)
}

pub fn twist_coefficients(v: &Multivector) -> [f64; 6] {
    TWIST_BLADES.map(|b| v.get(b))
}

/// Twist to wrench with a scalar inertia: rotation blades become torques
/// and `eᵢ∞` becomes the force `e₀ᵢ`, so that `𝒱 ⌋ 𝒲 = −‖𝒱‖²`.
pub fn twist_to_wrench(v: &Multivector) -> Multivector {
    wrench_from_coefficients(&twist_coefficients(v))
}

fn scale_wrench(gains: &[f64; 6], w: &Multivector) -> Multivector {
    let c = wrench_coefficients(w);
    wrench_from_coefficients(&std::array::from_fn(|i| gains[i] * c[i]))
}

/// The end-effector z axis `M (e₀∧e₃∧e∞) M̃`, normalized.
pub fn end_effector_line(chain: &KinematicChain, q: &[f64]) -> Result<Multivector> {
    let m = forward_kinematics(chain, q)?;
    normalize_blade(&m.sandwich(&z_axis()).grade(3))
}

fn z_axis() -> Multivector {
    Multivector::blade(E0 | E3 | EINF)
}

/// Wrench from the twist `log M` of the motor taking `l_ee` onto `l_target`.
/// Lines that agree to rounding give exactly zero.
pub fn line_tracking_wrench(l_ee: &Multivector, l_target: &Multivector) -> Result<Multivector> {
    if (*l_ee - *l_target).max_abs() <= 1e-12 * l_ee.max_abs().max(1.0) {
        return Ok(Multivector::ZERO);
    }
    let m = motor_between_lines(l_ee, l_target)?;
    Ok(twist_to_wrench(&motor_log(&m)?))
}

/// `𝒲′ = M̃ 𝒲 M`.
pub fn transform_wrench(m: &Multivector, w: &Multivector) -> Multivector {
    m.reverse().sandwich(w).grade(2)
}

/// PID on `e = 𝒲_d − 𝒲_m′`. The integral is updated, clamped componentwise,
/// then used; the derivative is zero on the first call.
pub fn wrench_pid(
    state: &WrenchPidState,
    w_desired: &Multivector,
    w_measured_ee: &Multivector,
    gains: &ControllerGains,
) -> (Multivector, WrenchPidState) {
    let e = wrench_coefficients(&(*w_desired - *w_measured_ee));
    let mut next = *state;
    let bound = gains.integral_clamp;
    for i in 0..6 {
        next.integral[i] = (state.integral[i] + e[i] * state.dt).clamp(-bound, bound);
    }
    let out: [f64; 6] = std::array::from_fn(|i| {
        let d = state.previous.map_or(0.0, |p| (e[i] - p[i]) / state.dt);
        gains.kp * e[i] + gains.ki * next.integral[i] + gains.kd * d
    });
    next.previous = Some(e);
    (wrench_from_coefficients(&out), next)
}

/// The end-effector twist `Σ Bᵢᵉᵉ q̇ᵢ` mapped to a wrench.
pub fn damping_wrench(j_ee: &[Multivector], qdot: &[f64]) -> Result<Multivector> {
    if j_ee.len() != qdot.len() {
        return Err(Error::domain(format!(
            "jacobian has {} columns, joint velocity has {}",
            j_ee.len(),
            qdot.len()
        )));
    }
    let twist = j_ee
        .iter()
        .zip(qdot)
        .fold(Multivector::ZERO, |acc, (b, &v)| acc + *b * v);
    Ok(twist_to_wrench(&twist))
}

/// `τᵢ = −Bᵢᵉᵉ ⌋ 𝒲`.
pub fn wrench_to_torques(j_ee: &[Multivector], w: &Multivector) -> Vec<f64> {
    j_ee.iter().map(|b| -b.inner(w).scalar_part()).collect()
}

/// Everything one control step produces.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub torques: Vec<f64>,
    pub line_wrench: Multivector,
    pub damping_wrench: Multivector,
    pub pid_wrench: Multivector,
    pub wrench_error: Multivector,
    pub pid: WrenchPidState,
}

/// `τ = −J_eeᵀ ⌋ (K 𝒲_L − D 𝒲_𝒱 + 𝒲_C)`, all wrenches in the end-effector
/// frame. `l_target` and `w_measured` are given in the world frame.
#[allow(clippy::too_many_arguments)]
pub fn control_torques(
    chain: &KinematicChain,
    q: &[f64],
    qdot: &[f64],
    l_target: &Multivector,
    w_desired: &Multivector,
    w_measured: &Multivector,
    gains: &ControllerGains,
    pid: &WrenchPidState,
) -> Result<ControlOutput> {
    let m = forward_kinematics(chain, q)?;
    let j_ee = ee_frame_jacobian(chain, q)?;
    let target_ee = normalize_blade(&m.reverse().sandwich(l_target).grade(3))?;
    let line_wrench = line_tracking_wrench(&z_axis(), &target_ee)?;
    let damping = damping_wrench(&j_ee, qdot)?;
    let measured_ee = transform_wrench(&m, w_measured);
    let (pid_wrench, pid) = wrench_pid(pid, w_desired, &measured_ee, gains);
    let total = scale_wrench(&gains.k_line, &line_wrench) - scale_wrench(&gains.d_twist, &damping)
        + pid_wrench;
    Ok(ControlOutput {
        torques: wrench_to_torques(&j_ee, &total),
        line_wrench,
        damping_wrench: damping,
        pid_wrench,
        wrench_error: *w_desired - measured_ee,
        pid,
    })
}

/// Non-physical first-order joint model `q̇ = gain·τ`, for demos only.
pub fn toy_integrate(q: &[f64], tau: &[f64], gain: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let qdot: Vec<f64> = tau.iter().map(|t| gain * t).collect();
    let next = q.iter().zip(&qdot).map(|(q, v)| q + v * dt).collect();
    (next, qdot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cga::{line_from_point_direction, motor_exp, revolute_screw, rotor, translator};
    use crate::Vec3;
    use std::f64::consts::FRAC_PI_2;

    fn chain_with_base(base: Multivector) -> KinematicChain {
        KinematicChain::new(vec![revolute_screw(&Vec3::z(), &Vec3::zeros())], base).unwrap()
    }

    fn same_line(a: &Multivector, b: &Multivector) -> bool {
        a.approx_eq(b, 1e-12) || a.approx_eq(&-*b, 1e-12)
    }

    #[test]
    fn end_effector_lines() {
        let l = end_effector_line(&chain_with_base(Multivector::one()), &[0.0]).unwrap();
        assert!(same_line(
            &l,
            &line_from_point_direction(&Vec3::zeros(), &Vec3::z()).unwrap()
        ));
        let l = end_effector_line(&chain_with_base(rotor(&Vec3::x(), FRAC_PI_2)), &[0.0]).unwrap();
        assert!(same_line(
            &l,
            &line_from_point_direction(&Vec3::zeros(), &Vec3::y()).unwrap()
        ));
        let t = Vec3::new(1.0, -2.0, 0.5);
        let l = end_effector_line(&chain_with_base(translator(&t)), &[0.0]).unwrap();
        assert!(same_line(
            &l,
            &line_from_point_direction(&t, &Vec3::z()).unwrap()
        ));
    }

    #[test]
    fn line_wrenches() {
        let z = line_from_point_direction(&Vec3::zeros(), &Vec3::z()).unwrap();
        assert_eq!(line_tracking_wrench(&z, &z).unwrap(), Multivector::ZERO);

        let offset = |d: f64| {
            let l = line_from_point_direction(&Vec3::new(d, 0.0, 0.0), &Vec3::z()).unwrap();
            wrench_coefficients(&line_tracking_wrench(&z, &l).unwrap())
        };
        let (a, b) = (offset(0.5), offset(1.5));
        for i in [0, 1, 2, 4, 5] {
            assert!(a[i].abs() < 1e-12 && b[i].abs() < 1e-12);
        }
        assert!(a[3].abs() > 0.1);
        assert!((b[3] / a[3] - 3.0).abs() < 1e-9);

        let tilt = |theta: f64| {
            let d = Vec3::new(theta.sin(), 0.0, theta.cos());
            let l = line_from_point_direction(&Vec3::zeros(), &d).unwrap();
            wrench_coefficients(&line_tracking_wrench(&z, &l).unwrap())
        };
        let (a, b) = (tilt(0.2), tilt(0.6));
        for i in [0, 2, 3, 4, 5] {
            assert!(a[i].abs() < 1e-12 && b[i].abs() < 1e-12);
        }
        assert!((b[1] / a[1] - 3.0).abs() < 1e-9);

        let down = line_from_point_direction(&Vec3::zeros(), &-Vec3::z()).unwrap();
        assert!(line_tracking_wrench(&z, &down).is_err());
    }

    #[test]
    fn twist_wrench_pairing_is_negative_power() {
        let v = Multivector::from_null_terms(&[
            (E1 | E2, 0.3),
            (E2 | E3, -1.1),
            (E1 | E3, 0.4),
            (E1 | EINF, 2.0),
            (E3 | EINF, -0.7),
        ]);
        let w = twist_to_wrench(&v);
        let p: f64 = twist_coefficients(&v).iter().map(|c| c * c).sum();
        assert!((v.inner(&w).scalar_part() + p).abs() < 1e-12);
    }

    #[test]
    fn pid_behaviour() {
        let gains = ControllerGains::default();
        let s0 = WrenchPidState::new(0.01).unwrap();
        let zero = Multivector::ZERO;
        let (out, _) = wrench_pid(&s0, &zero, &zero, &gains);
        assert_eq!(out, zero);

        let only_i = ControllerGains {
            kp: 0.0,
            kd: 0.0,
            ..gains
        };
        let e = wrench_from_coefficients(&[0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let mut s = s0;
        let mut out = zero;
        for _ in 0..100 {
            (out, s) = wrench_pid(&s, &e, &zero, &only_i);
        }
        assert!((wrench_coefficients(&out)[5] - 5.0 * 100.0 * 0.01 * 2.0).abs() < 1e-9);
        for _ in 0..1000 {
            (out, s) = wrench_pid(&s, &e, &zero, &only_i);
        }
        assert_eq!(s.integral()[5], 10.0);
        assert!((wrench_coefficients(&out)[5] - 50.0).abs() < 1e-12);

        // paper gains, unit step held for one second
        let mut s = s0;
        for _ in 0..100 {
            (out, s) = wrench_pid(&s, &e, &zero, &gains);
        }
        let c = wrench_coefficients(&out)[5];
        let integral_part = gains.ki * s.integral()[5];
        assert!(integral_part > 0.9 * c);
    }

    #[test]
    fn pid_is_linear_before_clamping() {
        let gains = ControllerGains {
            integral_clamp: 1e9,
            ..Default::default()
        };
        let run = |errs: &[[f64; 6]]| {
            let mut s = WrenchPidState::new(0.05).unwrap();
            let mut out = Multivector::ZERO;
            for e in errs {
                (out, s) = wrench_pid(&s, &wrench_from_coefficients(e), &Multivector::ZERO, &gains);
            }
            wrench_coefficients(&out)
        };
        let a = [
            [1.0, 0.0, 2.0, 0.0, -1.0, 0.5],
            [0.5, 1.0, 0.0, 3.0, 0.0, 0.0],
        ];
        let b = [
            [0.0, -2.0, 1.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, -1.0, 2.0, 4.0],
        ];
        let sum: Vec<[f64; 6]> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| std::array::from_fn(|i| x[i] + y[i]))
            .collect();
        let (ra, rb, rs) = (run(&a), run(&b), run(&sum));
        for i in 0..6 {
            assert!((ra[i] + rb[i] - rs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn wrench_transport() {
        let f = wrench_from_coefficients(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(transform_wrench(&Multivector::one(), &f).approx_eq(&f, 0.0));
        let turned = transform_wrench(&rotor(&Vec3::z(), std::f64::consts::PI), &f);
        assert!(turned.approx_eq(&-f, 1e-12));
        // a force seen from a shifted frame keeps its force part and gains a moment
        let w = wrench_from_coefficients(&[0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let moved = wrench_coefficients(&transform_wrench(
            &translator(&Vec3::new(1.0, 0.0, 0.0)),
            &w,
        ));
        assert!((moved[5] - 2.0).abs() < 1e-12);
        assert!(moved[..3].iter().any(|m| m.abs() > 0.5));
    }

    #[test]
    fn damping() {
        let chain = KinematicChain::panda_like();
        let q = [0.1, 0.2, -0.3, -1.5, 0.0, 1.2, 0.4];
        let j = ee_frame_jacobian(&chain, &q).unwrap();
        assert_eq!(damping_wrench(&j, &[0.0; 7]).unwrap(), Multivector::ZERO);
        let mut qd = [0.0; 7];
        qd[3] = 1.0;
        assert!(damping_wrench(&j, &qd)
            .unwrap()
            .approx_eq(&twist_to_wrench(&j[3]), 0.0));
        assert!(damping_wrench(&j, &[0.0; 3]).is_err());
    }

    #[test]
    fn equilibrium_gives_zero_torque() {
        let chain = KinematicChain::panda_like();
        let q = [0.3, -0.2, 0.1, -1.7, 0.2, 1.5, 0.3];
        let target = end_effector_line(&chain, &q).unwrap();
        let pid = WrenchPidState::new(0.001).unwrap();
        let w = wrench_from_coefficients(&[0.0, 0.0, 0.0, 0.0, 0.0, 5.0]);
        // the measured wrench, expressed in the world, equals the desired one
        let m = forward_kinematics(&chain, &q).unwrap();
        let w_world = m.sandwich(&w);
        let out = control_torques(
            &chain,
            &q,
            &[0.0; 7],
            &target,
            &w,
            &w_world,
            &ControllerGains::default(),
            &pid,
        )
        .unwrap();
        assert!(
            out.torques.iter().all(|t| t.abs() < 1e-12),
            "{:?}",
            out.torques
        );
        let zero = Multivector::ZERO;
        let out = control_torques(
            &chain,
            &q,
            &[0.0; 7],
            &target,
            &zero,
            &zero,
            &ControllerGains::default(),
            &pid,
        )
        .unwrap();
        assert!(out.torques.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn toy_loop_converges_to_target_line() {
        let chain = KinematicChain::panda_like();
        let mut q = vec![0.0, -0.3, 0.0, -2.0, 0.0, 1.8, 0.8];
        let target_q = [0.15, -0.2, 0.1, -1.9, 0.05, 1.75, 0.8];
        let target = end_effector_line(&chain, &target_q).unwrap();
        let gains = ControllerGains {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
            ..Default::default()
        };
        let mut pid = WrenchPidState::new(0.001).unwrap();
        let zero = Multivector::ZERO;
        let err = |q: &[f64]| {
            let m = forward_kinematics(&chain, q).unwrap();
            let l = normalize_blade(&m.reverse().sandwich(&target).grade(3)).unwrap();
            let w = line_tracking_wrench(&z_axis(), &l).unwrap();
            wrench_coefficients(&w)
                .iter()
                .map(|c| c * c)
                .sum::<f64>()
                .sqrt()
        };
        let e0 = err(&q);
        let mut qdot = vec![0.0; 7];
        for _ in 0..3000 {
            let out =
                control_torques(&chain, &q, &qdot, &target, &zero, &zero, &gains, &pid).unwrap();
            pid = out.pid;
            (q, qdot) = toy_integrate(&q, &out.torques, 0.02, 0.001);
        }
        assert!(err(&q) < 0.3 * e0, "{} -> {}", e0, err(&q));
        let _ = motor_exp(&zero);
    }
}
