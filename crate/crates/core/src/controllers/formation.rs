//! Formation control by change of variables.
//!
//! Agent `i` runs a consensus law on `G̃_i = G_i G*_i⁻¹` and maps the result
//! back through the fixed target `G*_i`.

use crate::se3::{
    conjugate_twist, to_formation_frame, unconjugate_twist, FormationSpec, Pose, Twist,
};
use crate::so3::Vec3;

use super::DynamicParams;

/// `G̃_i` for every agent.
pub fn formation_poses(poses: &[Pose], spec: &FormationSpec) -> Vec<Pose> {
    poses
        .iter()
        .zip(&spec.targets)
        .map(|(g, gs)| to_formation_frame(g, gs))
        .collect()
}

/// Body twists in the tilde frame, `ω̃ = R*ω`, `ṽ = −ω̃×T* + R*v`.
pub fn formation_twists(twists: &[Twist], spec: &FormationSpec) -> Vec<Twist> {
    twists
        .iter()
        .zip(&spec.targets)
        .map(|(xi, gs)| conjugate_twist(xi, gs))
        .collect()
}

/// Runs a kinematic law on the tilde poses and maps every commanded twist
/// back to the body frame.
pub fn kinematic_formation<E>(
    poses: &[Pose],
    spec: &FormationSpec,
    law: impl FnOnce(&[Pose]) -> Result<Vec<Twist>, E>,
) -> Result<Vec<Twist>, E> {
    let tilde = formation_poses(poses, spec);
    let xi_tilde = law(&tilde)?;
    Ok(xi_tilde
        .iter()
        .zip(&spec.targets)
        .map(|(xi, gs)| unconjugate_twist(xi, gs))
        .collect())
}

/// Body wrench realising the tilde-frame accelerations `a_des = d/dt ω̃` and
/// `b_des = d/dt ṽ`:
///
/// `τ = J R*ᵀ a_des + ω̂Jω`,
/// `f = m R*ᵀ(b_des + ω̃×(ω̃×T* + ṽ) + a_des×T*)`.
pub fn formation_wrench(
    a_des: &Vec3,
    b_des: &Vec3,
    xi_tilde: &Twist,
    target: &Pose,
    params: &DynamicParams,
) -> (Vec3, Vec3) {
    let rst = target.r.transpose();
    let omega = rst * xi_tilde.omega;
    let tau = params.inertia * (rst * *a_des) + params.gyroscopic(&omega);
    let ts = target.t;
    let w = xi_tilde.omega;
    let f =
        params.mass * (rst * (b_des + w.cross(&(w.cross(&ts) + xi_tilde.v)) + a_des.cross(&ts)));
    (tau, f)
}
