//! Torque and force laws for rigid bodies.
//!
//! Each law is written as a desired body-frame acceleration plus the term
//! that cancels the rigid-body drift, so that the formation wrappers can reuse
//! the accelerations on tilde variables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::so3::{
    jacobian_axis_angle, jacobian_param, AxisAngle, Mat3, Parameterization, Rotation, Vec3,
};
use crate::topology::Digraph;

/// Inertia, mass and feedback gain of one body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicParams {
    pub inertia: Mat3,
    pub mass: f64,
    pub gain: f64,
}

impl Default for DynamicParams {
    fn default() -> Self {
        DynamicParams {
            inertia: Mat3::from_diagonal(&Vec3::new(1.0, 1.5, 2.0)),
            mass: 1.0,
            gain: 3.0,
        }
    }
}

impl DynamicParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        let j = &self.inertia;
        if (j - j.transpose()).norm() > 1e-12 * j.norm().max(1.0) {
            return Err(ControlError::InvalidParams(
                "inertia is not symmetric".into(),
            ));
        }
        if j.symmetric_eigenvalues().min() <= 0.0 {
            return Err(ControlError::InvalidParams(
                "inertia is not positive definite".into(),
            ));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(ControlError::InvalidParams("mass must be positive".into()));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(ControlError::InvalidParams("gain must be positive".into()));
        }
        Ok(())
    }

    /// `ω̂Jω`.
    pub fn gyroscopic(&self, omega: &Vec3) -> Vec3 {
        omega.cross(&(self.inertia * omega))
    }
}

/// `ω̄_i = ω_i − Σ a_ij(x_j − x_i)`.
pub fn omega_bar_absolute(i: usize, x_all: &[AxisAngle], omega_i: &Vec3, g: &Digraph) -> Vec3 {
    omega_i - super::rot_law_absolute(i, x_all, g)
}

/// `ω̄′_i = ω_i − Σ a_ij y_ij`.
pub fn omega_bar_relative(
    i: usize,
    y_rel: &BTreeMap<usize, Vec3>,
    omega_i: &Vec3,
    g: &Digraph,
) -> Result<Vec3, ControlError> {
    Ok(omega_i - super::rot_law_relative(i, y_rel, g)?)
}

/// `v̄_i = v_i − Σ a_ij T_ij`.
pub fn v_bar(
    i: usize,
    t_rel: &BTreeMap<usize, Vec3>,
    v_i: &Vec3,
    g: &Digraph,
) -> Result<Vec3, ControlError> {
    Ok(v_i - super::trans_law_relative(i, t_rel, g)?)
}

/// `ω̇_i` commanded by the absolute torque law:
/// `−x_i + Σ a_ij(L_{x_j}ω_j − L_{x_i}ω_i − ω̄_i)`, self-loop included.
pub fn angular_accel_absolute(
    i: usize,
    x_all: &[AxisAngle],
    omega_all: &[Vec3],
    g: &Digraph,
) -> Vec3 {
    let wbar = omega_bar_absolute(i, x_all, &omega_all[i], g);
    let li_wi = jacobian_axis_angle(&x_all[i]) * omega_all[i];
    let mut acc = -x_all[i];
    for (j, a) in g.neighbors(i) {
        let lj_wj = if j == i {
            li_wi
        } else {
            jacobian_axis_angle(&x_all[j]) * omega_all[j]
        };
        acc += a * (lj_wj - li_wi - wbar);
    }
    acc
}

/// `𝛕_i = J_i(−x_i + Σ a_ij(L_{x_j}ω_j − L_{x_i}ω_i − ω̄_i)) + ω̂_iJ_iω_i`.
pub fn torque_law_absolute(
    i: usize,
    x_all: &[AxisAngle],
    omega_all: &[Vec3],
    g: &Digraph,
    dyn_params: &DynamicParams,
) -> Vec3 {
    dyn_params.inertia * angular_accel_absolute(i, x_all, omega_all, g)
        + dyn_params.gyroscopic(&omega_all[i])
}

/// `ω̇_i` commanded by the relative torque law:
/// `−k ω̄′_i + Σ a_ij L_{−y_ij} ω_ij`.
///
/// `L_{−y_ij}` is the jacobian of the coordinate map evaluated at `−y_ij`,
/// which satisfies `ẏ_ij = L_{−y_ij} ω_ij` for `ω_ij = R_ij ω_j − ω_i`.
pub fn angular_accel_relative(
    i: usize,
    y_rel: &BTreeMap<usize, Vec3>,
    omega_self: &Vec3,
    omega_rel: &BTreeMap<usize, Vec3>,
    g: &Digraph,
    gain: f64,
    p: Parameterization,
) -> Result<Vec3, ControlError> {
    let wbar = omega_bar_relative(i, y_rel, omega_self, g)?;
    let mut acc = -gain * wbar;
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        let missing = || ControlError::MissingNeighbor {
            agent: i,
            neighbor: j,
        };
        let y = y_rel.get(&j).ok_or_else(missing)?;
        let w = omega_rel.get(&j).ok_or_else(missing)?;
        acc += a * (jacobian_param(&(-y), p)? * w);
    }
    Ok(acc)
}

/// `𝛕_i = J_i(−k_iω̄′_i + Σ a_ij L_{−y_ij}ω_ij) + ω̂_iJ_iω_i`.
pub fn torque_law_relative(
    i: usize,
    y_rel: &BTreeMap<usize, Vec3>,
    omega_self: &Vec3,
    omega_rel: &BTreeMap<usize, Vec3>,
    g: &Digraph,
    dyn_params: &DynamicParams,
    p: Parameterization,
) -> Result<Vec3, ControlError> {
    let acc = angular_accel_relative(i, y_rel, omega_self, omega_rel, g, dyn_params.gain, p)?;
    Ok(dyn_params.inertia * acc + dyn_params.gyroscopic(omega_self))
}

/// `ω_ij = R_ij ω_j − ω_i` for every non-self neighbor of `i`.
pub fn relative_angular_velocities(
    i: usize,
    rotations: &[Rotation],
    omega_all: &[Vec3],
    g: &Digraph,
) -> BTreeMap<usize, Vec3> {
    g.neighbor_indices(i)
        .into_iter()
        .map(|j| {
            let rij = rotations[i].transpose() * rotations[j];
            (j, rij * omega_all[j] - omega_all[i])
        })
        .collect()
}

/// `v̇_i` commanded by the force law:
/// `−k v̄_i + Σ a_ij R_iᵀ(R_j v_j − R_i v_i) − Σ a_ij ω̂_i R_iᵀ(T_j − T_i)`.
pub fn linear_accel(
    i: usize,
    t_all: &[Vec3],
    v_all: &[Vec3],
    r_all: &[Rotation],
    omega_self: &Vec3,
    g: &Digraph,
    gain: f64,
) -> Vec3 {
    let rit = r_all[i].transpose();
    let mut consensus = Vec3::zeros();
    let mut coupling = Vec3::zeros();
    let world_vi = r_all[i] * v_all[i];
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        let tij = rit * (t_all[j] - t_all[i]);
        consensus += a * tij;
        coupling += a * (rit * (r_all[j] * v_all[j] - world_vi) - omega_self.cross(&tij));
    }
    let vbar = v_all[i] - consensus;
    -gain * vbar + coupling
}

/// `𝒇_i = m_i(−k_iv̄_i + Σ a_ij R_iᵀ(R_jv_j − R_iv_i) − Σ a_ij ω̂_iR_iᵀ(T_j − T_i) + ω̂_iv_i)`.
pub fn force_law(
    i: usize,
    t_all: &[Vec3],
    v_all: &[Vec3],
    r_all: &[Rotation],
    omega_self: &Vec3,
    g: &Digraph,
    dyn_params: &DynamicParams,
) -> Vec3 {
    let acc = linear_accel(i, t_all, v_all, r_all, omega_self, g, dyn_params.gain);
    dyn_params.mass * (acc + omega_self.cross(&v_all[i]))
}
