//! Evaluation of the configured laws on a state snapshot.

use nalgebra::Matrix4;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::integrate::AgentState;
use super::noise::{inject_noise_vector, noisy_pose_matrix};
use crate::controllers::{
    angular_accel_absolute, angular_accel_relative, extract_twist, first_law_absolute,
    first_law_absolute_measured, first_law_relative_measured, formation_poses, formation_twists,
    formation_wrench, linear_accel, omega_bar_absolute, omega_bar_relative,
    relative_angular_velocities, relative_params, relative_transforms, relative_translations,
    rot_law_absolute, rot_law_feedback_linearized, rot_law_relative, trans_law_absolute,
    trans_law_relative, v_bar, ControlError, DynamicParams, LawFamily, LawKind,
};
use crate::se3::{unconjugate_twist, FormationSpec, Pose, Twist};
use crate::so3::{log_so3, to_param, Parameterization, Rotation, Vec3};
use crate::topology::Digraph;

/// Input applied to one agent over a sample interval: a twist `(ω, v)` in
/// kinematic mode, a wrench `(𝛕, 𝒇)` in dynamic mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub rot: Vec3,
    pub trans: Vec3,
}

/// Error variables of the dynamic laws, in the formation frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorVars {
    pub omega_bar: Option<Vec3>,
    pub v_bar: Option<Vec3>,
}

/// A law could not be evaluated for `agent`, typically because a rotation
/// left the chart of the parameterization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartFailure {
    pub agent: usize,
    pub error: ControlError,
}

fn fail<E: Into<ControlError>>(agent: usize) -> impl Fn(E) -> ChartFailure {
    move |e| ChartFailure {
        agent,
        error: e.into(),
    }
}

fn rotations(poses: &[Pose]) -> Vec<Rotation> {
    poses.iter().map(|p| p.r).collect()
}

fn absolute_params_by_agent(
    rots: &[Rotation],
    p: Parameterization,
) -> Result<Vec<Vec3>, ChartFailure> {
    rots.iter()
        .enumerate()
        .map(|(i, r)| to_param(r, p).map_err(fail(i)))
        .collect()
}

fn noisy<R: Rng + ?Sized>(xs: &[Vec3], magnitude: f64, rng: &mut R) -> Vec<Vec3> {
    xs.iter()
        .map(|x| inject_noise_vector(x, magnitude, rng))
        .collect()
}

/// Kinematic laws on the given poses. Each agent draws its own noise for
/// every quantity it reads.
pub fn kinematic_twists<R: Rng + ?Sized>(
    poses: &[Pose],
    g: &Digraph,
    laws: &[LawKind],
    p: Parameterization,
    noise: f64,
    rng: &mut R,
) -> Result<Vec<Twist>, ChartFailure> {
    let n = poses.len();
    let mut out = vec![Twist::zero(); n];
    let rots = rotations(poses);
    for &law in laws {
        match law {
            LawKind::FirstAbsolute => {
                for i in 0..n {
                    let m = if noise > 0.0 {
                        let measured: Vec<Matrix4<f64>> = poses
                            .iter()
                            .map(|q| noisy_pose_matrix(q, noise, rng))
                            .collect();
                        first_law_absolute_measured(i, &measured, g).map_err(fail(i))?
                    } else {
                        first_law_absolute(i, poses, g)
                    };
                    out[i] = extract_twist(&m);
                }
            }
            LawKind::FirstRelative => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let rel = relative_transforms(i, poses, g)
                        .into_iter()
                        .map(|(j, q)| (j, noisy_pose_matrix(&q, noise, rng)))
                        .collect();
                    *slot =
                        extract_twist(&first_law_relative_measured(i, &rel, g).map_err(fail(i))?);
                }
            }
            LawKind::RotAbsolute | LawKind::RotFeedbackLinearized => {
                let y = absolute_params_by_agent(&rots, p)?;
                for (i, slot) in out.iter_mut().enumerate() {
                    let y_i = noisy(&y, noise, rng);
                    slot.omega = if law == LawKind::RotAbsolute {
                        rot_law_absolute(i, &y_i, g)
                    } else {
                        rot_law_feedback_linearized(i, &y_i, g, p).map_err(fail(i))?
                    };
                }
            }
            LawKind::RotRelative => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let y = relative_params(i, &rots, g, p).map_err(fail(i))?;
                    let y = y
                        .into_iter()
                        .map(|(j, v)| (j, inject_noise_vector(&v, noise, rng)))
                        .collect();
                    slot.omega = rot_law_relative(i, &y, g).map_err(fail(i))?;
                }
            }
            LawKind::TransAbsolute => {
                let t: Vec<Vec3> = poses.iter().map(|q| q.t).collect();
                for (i, slot) in out.iter_mut().enumerate() {
                    slot.v = trans_law_absolute(i, &noisy(&t, noise, rng), g);
                }
            }
            LawKind::TransRelative => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let t = relative_translations(i, poses, g)
                        .into_iter()
                        .map(|(j, v)| (j, inject_noise_vector(&v, noise, rng)))
                        .collect();
                    slot.v = trans_law_relative(i, &t, g).map_err(fail(i))?;
                }
            }
            LawKind::TorqueAbsolute | LawKind::TorqueRelative | LawKind::Force => {
                unreachable!("dynamic law in kinematic evaluation")
            }
        }
    }
    Ok(out)
}

/// Tilde-frame quantities shared by the dynamic laws.
struct TildeSnapshot {
    poses: Vec<Pose>,
    rots: Vec<Rotation>,
    twists: Vec<Twist>,
}

impl TildeSnapshot {
    fn new(states: &[AgentState], spec: &FormationSpec) -> Self {
        let poses = formation_poses(&states.iter().map(|s| s.pose).collect::<Vec<_>>(), spec);
        let twists = formation_twists(&states.iter().map(|s| s.twist()).collect::<Vec<_>>(), spec);
        let rots = rotations(&poses);
        TildeSnapshot {
            poses,
            rots,
            twists,
        }
    }

    fn omegas(&self) -> Vec<Vec3> {
        self.twists.iter().map(|x| x.omega).collect()
    }
}

fn law_for(laws: &[LawKind], family: LawFamily) -> Option<LawKind> {
    laws.iter().copied().find(|l| l.family() == family)
}

/// Rotation error variable and commanded `d/dt ω̃` of every agent.
fn rotational_part(
    snap: &TildeSnapshot,
    g: &Digraph,
    law: Option<LawKind>,
    p: Parameterization,
    params: &DynamicParams,
    spec: &FormationSpec,
) -> Result<Vec<(Vec3, Option<Vec3>)>, ChartFailure> {
    let n = snap.poses.len();
    let om = snap.omegas();
    match law {
        Some(LawKind::TorqueAbsolute) => {
            let x: Vec<Vec3> = snap
                .rots
                .iter()
                .enumerate()
                .map(|(i, r)| log_so3(r).map_err(fail(i)))
                .collect::<Result<_, _>>()?;
            Ok((0..n)
                .map(|i| {
                    (
                        angular_accel_absolute(i, &x, &om, g),
                        Some(omega_bar_absolute(i, &x, &om[i], g)),
                    )
                })
                .collect())
        }
        Some(LawKind::TorqueRelative) => (0..n)
            .map(|i| {
                let y = relative_params(i, &snap.rots, g, p).map_err(fail(i))?;
                let w = relative_angular_velocities(i, &snap.rots, &om, g);
                let a = angular_accel_relative(i, &y, &om[i], &w, g, params.gain, p)
                    .map_err(fail(i))?;
                let wb = omega_bar_relative(i, &y, &om[i], g).map_err(fail(i))?;
                Ok((a, Some(wb)))
            })
            .collect(),
        _ => {
            // Torque-free motion expressed in the tilde frame.
            let j_inv = params.inertia.try_inverse().expect("inertia is invertible");
            Ok((0..n)
                .map(|i| {
                    let omega = spec.targets[i].r.transpose() * om[i];
                    (
                        spec.targets[i].r * (j_inv * -params.gyroscopic(&omega)),
                        None,
                    )
                })
                .collect())
        }
    }
}

/// Dynamic laws on the given states, evaluated on tilde variables and mapped
/// back through the formation targets (identity targets for consensus).
pub fn dynamic_wrenches(
    states: &[AgentState],
    g: &Digraph,
    laws: &[LawKind],
    p: Parameterization,
    params: &DynamicParams,
    spec: &FormationSpec,
) -> Result<Vec<(Control, ErrorVars)>, ChartFailure> {
    let n = states.len();
    let snap = TildeSnapshot::new(states, spec);
    let torque_law = law_for(laws, LawFamily::Torque);
    let force_law = law_for(laws, LawFamily::Force);
    let rot = rotational_part(&snap, g, torque_law, p, params, spec)?;
    let mut out = Vec::with_capacity(n);
    let t: Vec<Vec3> = snap.poses.iter().map(|q| q.t).collect();
    let v: Vec<Vec3> = snap.twists.iter().map(|x| x.v).collect();
    for i in 0..n {
        let (a, wbar) = rot[i];
        let (b, vbar) = if force_law.is_some() {
            let b = linear_accel(i, &t, &v, &snap.rots, &snap.twists[i].omega, g, params.gain);
            let rel = relative_translations(i, &snap.poses, g);
            (b, Some(v_bar(i, &rel, &v[i], g).map_err(fail(i))?))
        } else {
            (Vec3::zeros(), None)
        };
        let (tau, f) = formation_wrench(&a, &b, &snap.twists[i], &spec.targets[i], params);
        let control = Control {
            rot: if torque_law.is_some() {
                tau
            } else {
                Vec3::zeros()
            },
            trans: if force_law.is_some() {
                f
            } else {
                Vec3::zeros()
            },
        };
        out.push((
            control,
            ErrorVars {
                omega_bar: wbar,
                v_bar: vbar,
            },
        ));
    }
    Ok(out)
}

/// Body velocities for which the error variables of the active dynamic laws
/// equal `omega_bar` and `v_bar`. Without a torque (force) law, the error
/// variable is the tilde velocity itself.
pub fn velocities_from_errors(
    poses: &[Pose],
    g: &Digraph,
    laws: &[LawKind],
    p: Parameterization,
    spec: &FormationSpec,
    omega_bar: &[Vec3],
    v_bar_init: &[Vec3],
) -> Result<Vec<Twist>, ChartFailure> {
    let n = poses.len();
    let tilde = formation_poses(poses, spec);
    let rots = rotations(&tilde);
    let omega_consensus: Vec<Vec3> = match law_for(laws, LawFamily::Torque) {
        Some(LawKind::TorqueAbsolute) => {
            let x: Vec<Vec3> = rots
                .iter()
                .enumerate()
                .map(|(i, r)| log_so3(r).map_err(fail(i)))
                .collect::<Result<_, _>>()?;
            (0..n).map(|i| rot_law_absolute(i, &x, g)).collect()
        }
        Some(_) => (0..n)
            .map(|i| {
                let y = relative_params(i, &rots, g, p).map_err(fail(i))?;
                rot_law_relative(i, &y, g).map_err(fail(i))
            })
            .collect::<Result<_, _>>()?,
        None => vec![Vec3::zeros(); n],
    };
    let v_consensus: Vec<Vec3> = if law_for(laws, LawFamily::Force).is_some() {
        (0..n)
            .map(|i| {
                trans_law_relative(i, &relative_translations(i, &tilde, g), g).map_err(fail(i))
            })
            .collect::<Result<_, _>>()?
    } else {
        vec![Vec3::zeros(); n]
    };
    Ok((0..n)
        .map(|i| {
            let xt = Twist::new(
                omega_bar[i] + omega_consensus[i],
                v_bar_init[i] + v_consensus[i],
            );
            unconjugate_twist(&xt, &spec.targets[i])
        })
        .collect())
}
