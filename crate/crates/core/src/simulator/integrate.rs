//! One-agent propagation under held inputs.

use serde::{Deserialize, Serialize};

use crate::controllers::DynamicParams;
use crate::se3::{Pose, Twist};
use crate::so3::{exp_so3, jacobian_axis_angle, left_jacobian, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub omega: Vec3,
    pub v: Vec3,
    pub dyn_params: Option<DynamicParams>,
}

impl AgentState {
    pub fn kinematic(pose: Pose) -> Self {
        AgentState {
            pose,
            omega: Vec3::zeros(),
            v: Vec3::zeros(),
            dyn_params: None,
        }
    }

    pub fn dynamic(pose: Pose, omega: Vec3, v: Vec3, params: DynamicParams) -> Self {
        AgentState {
            pose,
            omega,
            v,
            dyn_params: Some(params),
        }
    }

    pub fn twist(&self) -> Twist {
        Twist::new(self.omega, self.v)
    }

    /// Largest of `‖T‖`, `‖ω‖`, `‖v‖`; infinite if any entry is not finite.
    pub fn magnitude(&self) -> f64 {
        let m = self.pose.t.norm().max(self.omega.norm()).max(self.v.norm());
        let finite = self.pose.r.matrix().iter().all(|x| x.is_finite());
        if m.is_finite() && finite {
            m
        } else {
            f64::INFINITY
        }
    }
}

/// Exact flow of `Ġ = Gξ` for a constant twist over time `h`.
pub fn step_kinematic(state: &AgentState, twist: &Twist, h: f64) -> AgentState {
    let phi = h * twist.omega;
    let r = state.pose.r;
    let t = state.pose.t + r * (h * (left_jacobian(&phi) * twist.v));
    AgentState {
        pose: Pose::new(r * exp_so3(&phi), t),
        omega: twist.omega,
        v: twist.v,
        dyn_params: state.dyn_params,
    }
}

#[derive(Clone, Copy)]
struct Local {
    theta: Vec3,
    t: Vec3,
    omega: Vec3,
    v: Vec3,
}

impl Local {
    fn axpy(&self, a: f64, d: &Local) -> Local {
        Local {
            theta: self.theta + a * d.theta,
            t: self.t + a * d.t,
            omega: self.omega + a * d.omega,
            v: self.v + a * d.v,
        }
    }
}

/// Rigid-body step with held torque and force.
///
/// Fourth-order Runge–Kutta in the local chart `R = R₀ exp(θ)`, so that the
/// rotation stays on the group.
///
/// # Panics
///
/// If the state carries no dynamic parameters.
pub fn step_dynamic(state: &AgentState, torque: &Vec3, force: &Vec3, h: f64) -> AgentState {
    let params = state
        .dyn_params
        .expect("dynamic step needs rigid-body parameters");
    let j = params.inertia;
    let j_inv = j
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(Mat3::identity);
    let r0 = state.pose.r;
    let f = |s: &Local| Local {
        theta: jacobian_axis_angle(&s.theta) * s.omega,
        t: r0 * (exp_so3(&s.theta) * s.v),
        omega: j_inv * (torque - s.omega.cross(&(j * s.omega))),
        v: force / params.mass - s.omega.cross(&s.v),
    };
    let y0 = Local {
        theta: Vec3::zeros(),
        t: state.pose.t,
        omega: state.omega,
        v: state.v,
    };
    let k1 = f(&y0);
    let k2 = f(&y0.axpy(0.5 * h, &k1));
    let k3 = f(&y0.axpy(0.5 * h, &k2));
    let k4 = f(&y0.axpy(h, &k3));
    let sum = Local {
        theta: k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta,
        t: k1.t + 2.0 * k2.t + 2.0 * k3.t + k4.t,
        omega: k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega,
        v: k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v,
    };
    let y1 = y0.axpy(h / 6.0, &sum);
    AgentState {
        pose: Pose::new(r0 * exp_so3(&y1.theta), y1.t),
        omega: y1.omega,
        v: y1.v,
        dyn_params: state.dyn_params,
    }
}
