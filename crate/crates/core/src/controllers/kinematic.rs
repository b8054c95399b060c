//! Kinematic laws: the two 4×4 "first" laws, the rotation laws on local
//! coordinates and the two translation laws.

use std::collections::BTreeMap;

use nalgebra::Matrix4;

use super::ControlError;
use crate::se3::{relative_pose, rotation_block, translation_block, Pose, Twist};
use crate::so3::{
    axis_angle_to_param, jacobian_param, log_so3, relative_param, vee_unchecked, AxisAngle,
    Parameterization, Rotation, So3Error, Vec3,
};
use crate::topology::Digraph;

/// Sign tolerance for the support inequality of [`support_check`].
pub const SUPPORT_TOL: f64 = 1e-12;

fn missing(agent: usize, neighbor: usize) -> ControlError {
    ControlError::MissingNeighbor { agent, neighbor }
}

/// Splits a 4×4 law output into a twist.
///
/// The top-left block `B` is generally not skew; `ω = (B − Bᵀ)^∨ / 4`, which
/// makes the identity term `G − G⁻¹ ↦ sin θ · u` exact. `v` is the
/// top-right column.
pub fn extract_twist(b: &Matrix4<f64>) -> Twist {
    Twist {
        omega: 0.5 * vee_unchecked(&rotation_block(b)),
        v: translation_block(b),
    }
}

/// `Σ a_ij((G_j − G_i) + (G_i⁻¹ − G_j⁻¹))` from measured homogeneous matrices.
///
/// `measured[j]` is agent `i`'s measurement of `G_j`; inverses are taken as
/// general 4×4 inverses so that noisy measurements are handled as given.
pub fn first_law_absolute_measured(
    i: usize,
    measured: &[Matrix4<f64>],
    g: &Digraph,
) -> Result<Matrix4<f64>, ControlError> {
    let gi = measured[i];
    let gi_inv = gi
        .try_inverse()
        .ok_or(ControlError::SingularMeasurement(i))?;
    let mut out = Matrix4::zeros();
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        let gj = measured.get(j).ok_or_else(|| missing(i, j))?;
        let gj_inv = gj
            .try_inverse()
            .ok_or(ControlError::SingularMeasurement(j))?;
        out += a * ((gj - gi) + (gi_inv - gj_inv));
    }
    Ok(out)
}

/// First law on absolute transforms, exact measurements.
pub fn first_law_absolute(i: usize, poses: &[Pose], g: &Digraph) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    let gi = poses[i].to_matrix();
    let gi_inv = poses[i].inverse().to_matrix();
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        out += a * ((poses[j].to_matrix() - gi) + (gi_inv - poses[j].inverse().to_matrix()));
    }
    out
}

/// `Σ a_ij(G_ij − G_ij⁻¹)` from measured relative transforms.
pub fn first_law_relative_measured(
    i: usize,
    rel: &BTreeMap<usize, Matrix4<f64>>,
    g: &Digraph,
) -> Result<Matrix4<f64>, ControlError> {
    let mut out = Matrix4::zeros();
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        let gij = rel.get(&j).ok_or_else(|| missing(i, j))?;
        let gij_inv = gij
            .try_inverse()
            .ok_or(ControlError::SingularMeasurement(j))?;
        out += a * (gij - gij_inv);
    }
    Ok(out)
}

/// First law on relative transforms, exact measurements.
pub fn first_law_relative(
    i: usize,
    rel: &BTreeMap<usize, Pose>,
    g: &Digraph,
) -> Result<Matrix4<f64>, ControlError> {
    let mats: BTreeMap<usize, Matrix4<f64>> =
        rel.iter().map(|(&j, p)| (j, p.to_matrix())).collect();
    first_law_relative_measured(i, &mats, g)
}

/// `G_ij` for every non-self neighbor of `i`.
pub fn relative_transforms(i: usize, poses: &[Pose], g: &Digraph) -> BTreeMap<usize, Pose> {
    g.neighbor_indices(i)
        .into_iter()
        .map(|j| (j, relative_pose(&poses[i], &poses[j])))
        .collect()
}

/// `y_ij = f(R_iᵀR_j)` for every non-self neighbor of `i`.
pub fn relative_params(
    i: usize,
    rotations: &[Rotation],
    g: &Digraph,
    p: Parameterization,
) -> Result<BTreeMap<usize, Vec3>, So3Error> {
    let mut out = BTreeMap::new();
    for j in g.neighbor_indices(i) {
        let rij = rotations[i].transpose() * rotations[j];
        out.insert(j, crate::so3::to_param(&rij, p)?);
    }
    Ok(out)
}

/// `T_ij = R_iᵀ(T_j − T_i)` for every non-self neighbor of `i`.
pub fn relative_translations(i: usize, poses: &[Pose], g: &Digraph) -> BTreeMap<usize, Vec3> {
    g.neighbor_indices(i)
        .into_iter()
        .map(|j| (j, poses[i].r.transpose() * (poses[j].t - poses[i].t)))
        .collect()
}

/// `ω_i = Σ a_ij(y_j − y_i)`.
pub fn rot_law_absolute(i: usize, y_all: &[Vec3], g: &Digraph) -> Vec3 {
    g.neighbors(i)
        .filter(|&(j, _)| j != i)
        .fold(Vec3::zeros(), |acc, (j, a)| acc + a * (y_all[j] - y_all[i]))
}

/// `ω_i = Σ a_ij y_ij`.
pub fn rot_law_relative(
    i: usize,
    y_rel: &BTreeMap<usize, Vec3>,
    g: &Digraph,
) -> Result<Vec3, ControlError> {
    let mut out = Vec3::zeros();
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        out += a * y_rel.get(&j).ok_or_else(|| missing(i, j))?;
    }
    Ok(out)
}

/// `ω_i = L_{y_i}⁻¹ Σ a_ij(y_j − y_i)`.
pub fn rot_law_feedback_linearized(
    i: usize,
    y_all: &[Vec3],
    g: &Digraph,
    p: Parameterization,
) -> Result<Vec3, ControlError> {
    let l = jacobian_param(&y_all[i], p)?;
    let rhs = rot_law_absolute(i, y_all, g);
    let lu = l.lu();
    let sol = lu.solve(&rhs).ok_or(So3Error::NearSingular {
        condition: f64::INFINITY,
    })?;
    Ok(sol)
}

/// `v_i = Σ a_ij(T_j − T_i)`, a body-frame velocity.
pub fn trans_law_absolute(i: usize, t_all: &[Vec3], g: &Digraph) -> Vec3 {
    g.neighbors(i)
        .filter(|&(j, _)| j != i)
        .fold(Vec3::zeros(), |acc, (j, a)| acc + a * (t_all[j] - t_all[i]))
}

/// `v_i = Σ a_ij T_ij`.
pub fn trans_law_relative(
    i: usize,
    t_rel: &BTreeMap<usize, Vec3>,
    g: &Digraph,
) -> Result<Vec3, ControlError> {
    let mut out = Vec3::zeros();
    for (j, a) in g.neighbors(i) {
        if j == i {
            continue;
        }
        out += a * t_rel.get(&j).ok_or_else(|| missing(i, j))?;
    }
    Ok(out)
}

/// Outcome of the support-inequality check at the farthest pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportCheck {
    /// Maximizing pair `(i, j)` of `‖x_kl‖`.
    pub pair: (usize, usize),
    /// `min_k x_ijᵀ y_ik`, or `-∞` if some `y_ik` is outside the chart.
    pub min_inner: f64,
}

impl SupportCheck {
    pub fn holds(&self) -> bool {
        self.min_inner >= -SUPPORT_TOL
    }
}

/// Evaluates `x_ijᵀ y_ik` for all `k` at a pair maximizing `‖x_kl‖`, where
/// `x_kl` are relative axis-angle coordinates and `y_kl` relative coordinates
/// in `p`.
pub fn support_check(x: &[AxisAngle], p: Parameterization) -> SupportCheck {
    let n = x.len();
    let mut best = (0, 0);
    let mut best_norm = -1.0;
    let mut best_vec = Vec3::zeros();
    for k in 0..n {
        for l in 0..n {
            let Ok(xkl) = relative_param(&x[k], &x[l], Parameterization::AxisAngle) else {
                return SupportCheck {
                    pair: (k, l),
                    min_inner: f64::NEG_INFINITY,
                };
            };
            let norm = xkl.norm();
            if norm > best_norm {
                best_norm = norm;
                best = (k, l);
                best_vec = xkl;
            }
        }
    }
    let i = best.0;
    let mut min_inner = f64::INFINITY;
    for k in 0..n {
        let inner = match relative_param(&x[i], &x[k], p) {
            Ok(y) => best_vec.dot(&y),
            Err(_) => f64::NEG_INFINITY,
        };
        min_inner = min_inner.min(inner);
    }
    SupportCheck {
        pair: best,
        min_inner,
    }
}

/// Absolute coordinates `y_i = f(R_i)`.
pub fn absolute_params(rotations: &[Rotation], p: Parameterization) -> Result<Vec<Vec3>, So3Error> {
    rotations
        .iter()
        .map(|r| {
            log_so3(r).and_then(|x| {
                if x.norm() >= p.r() - crate::so3::INJECTIVITY_TOL {
                    Err(So3Error::OutsideInjectivityRegion {
                        angle: x.norm(),
                        radius: p.r(),
                        kind: p,
                    })
                } else {
                    Ok(axis_angle_to_param(&x, p))
                }
            })
        })
        .collect()
}
