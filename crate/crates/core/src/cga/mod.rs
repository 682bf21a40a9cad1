//! Conformal geometric algebra R(4,1).
//!
//! Points are null vectors `P = e₀ + x + ½‖x‖² e∞`; lines, planes, spheres,
//! point pairs and motors are multivectors. [`Multivector`] stores all 32
//! blades densely.

mod kinematics;
mod motor;
mod multivector;
mod primitives;

pub use kinematics::{
    ee_frame_jacobian, end_effector_position, forward_kinematics, geometric_jacobian,
    prismatic_screw, revolute_screw, KinematicChain,
};
pub use motor::{
    apply_to_point, euclidean_bivector, motor_between_lines, motor_defect, motor_exp,
    motor_from_rotation_translation, motor_log, motor_to_rotation_translation, rotor, translator,
};
pub use multivector::{Multivector, E0, E1, E2, E3, EINF};
pub use primitives::{
    embed_point, extract_point, fit_plane, fit_primitive, line_direction,
    line_from_point_direction, line_through, normalize_blade, orthogonal_line, pair_points, plane,
    plane_normal, project_to_primitive, sphere, split_pair, tangent_plane, Primitive,
    PrimitiveKind,
};
