use super::motor::{euclidean_bivector, motor_exp, motor_from_rotation_translation, translator};
use super::multivector::Multivector;
use super::primitives::extract_point;
use crate::{Error, Result, Vec3};

/// Serial chain of joints given by screw bivectors in the zero
/// configuration, followed by a fixed end-effector motor.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    screws: Vec<Multivector>,
    base: Multivector,
}

/// Screw of a revolute joint about the unit `axis` through `point`.
pub fn revolute_screw(axis: &Vec3, point: &Vec3) -> Multivector {
    translator(point).sandwich(&(euclidean_bivector(&axis.normalize()) * -0.5))
}

/// Screw of a prismatic joint sliding along the unit `direction`.
pub fn prismatic_screw(direction: &Vec3) -> Multivector {
    Multivector::einf().geometric(&Multivector::vector(&direction.normalize())) * 0.5
}

impl KinematicChain {
    /// `base` is the end-effector motor at `q = 0`.
    pub fn new(screws: Vec<Multivector>, base: Multivector) -> Result<Self> {
        if screws.is_empty() {
            return Err(Error::domain("a kinematic chain needs at least one joint"));
        }
        for (i, b) in screws.iter().enumerate() {
            if (*b - b.grade(2)).max_abs() > 1e-12 * b.max_abs() || b.max_abs() == 0.0 {
                return Err(Error::domain(format!(
                    "screw {i} is not a nonzero bivector"
                )));
            }
        }
        Ok(KinematicChain { screws, base })
    }

    pub fn len(&self) -> usize {
        self.screws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.screws.is_empty()
    }

    pub fn screws(&self) -> &[Multivector] {
        &self.screws
    }

    pub fn base(&self) -> &Multivector {
        &self.base
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.screws.len() {
            return Err(Error::domain(format!(
                "joint vector has length {}, chain has {} joints",
                q.len(),
                self.screws.len()
            )));
        }
        Ok(())
    }

    /// Seven revolute joints with Panda-like geometry (metres), tool pointing
    /// down along −z in the zero configuration.
    pub fn panda_like() -> Self {
        let z = Vec3::z();
        let y = Vec3::y();
        let joints = [
            (z, Vec3::new(0.0, 0.0, 0.333)),
            (y, Vec3::new(0.0, 0.0, 0.333)),
            (z, Vec3::new(0.0, 0.0, 0.649)),
            (-y, Vec3::new(0.0825, 0.0, 0.649)),
            (z, Vec3::new(0.0, 0.0, 1.033)),
            (-y, Vec3::new(0.0, 0.0, 1.033)),
            (-z, Vec3::new(0.088, 0.0, 1.033)),
        ];
        let screws = joints.iter().map(|(a, p)| revolute_screw(a, p)).collect();
        let flip = nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI);
        let tool =
            nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), -std::f64::consts::FRAC_PI_4);
        let base = motor_from_rotation_translation(&(flip * tool), &Vec3::new(0.088, 0.0, 0.926));
        KinematicChain::new(screws, base).expect("fixture chain is valid")
    }
}

/// `M(q) = Π exp(qᵢBᵢ) · M₀`.
pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<Multivector> {
    chain.check(q)?;
    let m = chain
        .screws
        .iter()
        .zip(q)
        .fold(Multivector::one(), |acc, (b, &qi)| {
            acc.geometric(&motor_exp(&(*b * qi)))
        });
    Ok(m.geometric(&chain.base).even())
}

/// End-effector position `M e₀ M̃`.
pub fn end_effector_position(chain: &KinematicChain, q: &[f64]) -> Result<Vec3> {
    extract_point(&forward_kinematics(chain, q)?.sandwich(&Multivector::e0()))
}

/// Columns `Bᵢ' = (Π_{j≤i} Mⱼ) Bᵢ (Π_{j≤i} Mⱼ)~`, so that `∂M/∂qᵢ = Bᵢ' M`.
pub fn geometric_jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Multivector>> {
    chain.check(q)?;
    let mut acc = Multivector::one();
    let mut cols = Vec::with_capacity(q.len());
    for (b, &qi) in chain.screws.iter().zip(q) {
        acc = acc.geometric(&motor_exp(&(*b * qi)));
        cols.push(acc.sandwich(b).grade(2));
    }
    Ok(cols)
}

/// Columns `M̃ Bᵢ' M`, so that `∂M/∂qᵢ = M Bᵢᵉᵉ`.
pub fn ee_frame_jacobian(chain: &KinematicChain, q: &[f64]) -> Result<Vec<Multivector>> {
    let m = forward_kinematics(chain, q)?;
    let mr = m.reverse();
    Ok(geometric_jacobian(chain, q)?
        .iter()
        .map(|b| mr.sandwich(b).grade(2))
        .collect())
}
