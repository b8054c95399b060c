//! Rotation-group primitives.
//!
//! Everything here is a pure function of its inputs. Rotations are stored as
//! plain 3×3 matrices wrapped in [`Rotation`], which checks orthonormality on
//! construction. Local coordinates of the form `g(θ)·u` are described by
//! [`Parameterization`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Axis-angle coordinates `θ·u`.
pub type AxisAngle = Vector3<f64>;

/// Orthonormality tolerance for [`Rotation::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// `vee` rejects inputs whose symmetric part exceeds this Frobenius norm.
pub const SKEW_TOL: f64 = 1e-8;

/// The logarithm is refused when `1 + trace(R)` is below this value,
/// i.e. within roughly 3e-5 rad of the cut locus.
pub const LOG_TRACE_TOL: f64 = 1e-9;

/// Slack on the injectivity radius when classifying a rotation as inside a chart.
pub const INJECTIVITY_TOL: f64 = 1e-12;

/// Below this angle, series expansions replace the closed forms.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Condition-number ceiling for [`jacobian_param`].
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("matrix is not a rotation (orthonormality residual {residual:.3e})")]
    NotARotation { residual: f64 },
    #[error("matrix is not skew-symmetric (‖S + Sᵀ‖_F = {asymmetry:.3e})")]
    NotSkew { asymmetry: f64 },
    #[error("rotation angle {angle} is at the cut locus of the logarithm")]
    AntipodalRotation { angle: f64 },
    #[error("rotation angle {angle} is outside the injectivity radius {radius} of {kind}")]
    OutsideInjectivityRegion {
        angle: f64,
        radius: f64,
        kind: Parameterization,
    },
    #[error("coordinate norm {norm} is outside the image radius {radius} of {kind}")]
    OutsideImage {
        norm: f64,
        radius: f64,
        kind: Parameterization,
    },
    #[error("jacobian condition number {condition:.3e} exceeds {MAX_CONDITION:e}")]
    NearSingular { condition: f64 },
}

/// Element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps `m` after checking `‖mᵀm − I‖_F ≤ 1e-9` and `|det m − 1| ≤ 1e-9`.
    pub fn new(m: Mat3) -> Result<Self, So3Error> {
        let residual = orthonormality_residual(&m);
        if residual > ORTHONORMAL_TOL || !residual.is_finite() {
            return Err(So3Error::NotARotation { residual });
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking.
    #[cfg(test)]
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn residual(&self) -> f64 {
        orthonormality_residual(&self.0)
    }

    /// Nearest rotation in the Frobenius sense (polar factor).
    pub fn reproject(&self) -> Self {
        Rotation(project_to_so3(&self.0))
    }

    /// Geodesic distance to the identity, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.0)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<Mat3> for Rotation {
    type Error = So3Error;
    fn try_from(m: Mat3) -> Result<Self, Self::Error> {
        Rotation::new(m)
    }
}

impl From<Rotation> for Mat3 {
    fn from(r: Rotation) -> Mat3 {
        r.0
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn orthonormality_residual(m: &Mat3) -> f64 {
    let ortho = (m.transpose() * m - Mat3::identity()).norm();
    let det = (m.determinant() - 1.0).abs();
    ortho.max(det)
}

/// Polar projection `U Vᵀ` with the sign fixed so that `det = +1`.
pub fn project_to_so3(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// `p ↦ p^∧`.
pub fn hat(p: &Vec3) -> Mat3 {
    Mat3::new(0.0, -p.z, p.y, p.z, 0.0, -p.x, -p.y, p.x, 0.0)
}

/// Inverse of [`hat`], applied to the skew part of `s`.
pub fn vee(s: &Mat3) -> Result<Vec3, So3Error> {
    let asymmetry = (s + s.transpose()).norm();
    if asymmetry > SKEW_TOL || !asymmetry.is_finite() {
        return Err(So3Error::NotSkew { asymmetry });
    }
    Ok(vee_unchecked(s))
}

/// `vee` of the skew part `(S − Sᵀ)/2`, no checks.
pub fn vee_unchecked(s: &Mat3) -> Vec3 {
    0.5 * Vec3::new(
        s[(2, 1)] - s[(1, 2)],
        s[(0, 2)] - s[(2, 0)],
        s[(1, 0)] - s[(0, 1)],
    )
}

/// `sin(β)/β` with `sinc(0) = 1`.
pub fn sinc(beta: f64) -> f64 {
    if beta.abs() < SMALL_ANGLE {
        let b2 = beta * beta;
        1.0 - b2 / 6.0 * (1.0 - b2 / 20.0 * (1.0 - b2 / 42.0))
    } else {
        beta.sin() / beta
    }
}

/// `(1 − cos θ)/θ²`.
fn one_minus_cos_over_sq(theta: f64) -> f64 {
    if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0
    } else {
        (1.0 - theta.cos()) / (theta * theta)
    }
}

/// `(θ − sin θ)/θ³`.
fn theta_minus_sin_over_cube(theta: f64) -> f64 {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// Exponential map `x ↦ exp(x̂)`, Rodrigues' formula.
pub fn exp_so3(x: &AxisAngle) -> Rotation {
    let theta = x.norm();
    let k = hat(x);
    let m = Mat3::identity() + sinc(theta) * k + one_minus_cos_over_sq(theta) * k * k;
    Rotation(m)
}

fn rotation_angle(m: &Mat3) -> f64 {
    let c = 0.5 * (m.trace() - 1.0);
    let s = vee_unchecked(m).norm();
    s.atan2(c)
}

/// Logarithm `R ↦ (Log R)^∨` on the open ball `B_π(I)`.
pub fn log_so3(r: &Rotation) -> Result<AxisAngle, So3Error> {
    let m = &r.0;
    let trace = m.trace();
    let theta = rotation_angle(m);
    if 1.0 + trace <= LOG_TRACE_TOL {
        return Err(So3Error::AntipodalRotation { angle: theta });
    }
    let skew = vee_unchecked(m);
    if theta < 0.5 * PI {
        // skew = sin θ · u
        Ok(skew / sinc(theta))
    } else {
        // Axis from the symmetric part (1 − cos θ) u uᵀ, sign from the skew part.
        let c = theta.cos();
        let sym = 0.5 * (m + m.transpose()) - c * Mat3::identity();
        let diag = sym.diagonal();
        let k = diag.imax();
        let mut axis = sym.column(k).into_owned() / (diag[k] * (1.0 - c)).sqrt();
        axis /= axis.norm();
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        Ok(theta * axis)
    }
}

/// Riemannian distance `d(R1, R2)` = angle of `R1ᵀR2`, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    rotation_angle(&(r1.0.transpose() * r2.0))
}

/// Local coordinates `f(R) = g(θ)·u` on the ball `B_r(I)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parameterization {
    #[serde(rename = "axis_angle")]
    AxisAngle,
    #[serde(rename = "rodrigues")]
    Rodrigues,
    #[serde(rename = "mrp")]
    ModifiedRodrigues,
    #[serde(rename = "sin_map")]
    SinMap,
    #[serde(rename = "quat_vec")]
    QuaternionVector,
}

impl Parameterization {
    pub const ALL: [Parameterization; 5] = [
        Parameterization::AxisAngle,
        Parameterization::Rodrigues,
        Parameterization::ModifiedRodrigues,
        Parameterization::SinMap,
        Parameterization::QuaternionVector,
    ];

    /// Configuration-file name.
    pub fn name(self) -> &'static str {
        match self {
            Parameterization::AxisAngle => "axis_angle",
            Parameterization::Rodrigues => "rodrigues",
            Parameterization::ModifiedRodrigues => "mrp",
            Parameterization::SinMap => "sin_map",
            Parameterization::QuaternionVector => "quat_vec",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Injectivity radius `r`.
    pub fn r(self) -> f64 {
        match self {
            Parameterization::SinMap => FRAC_PI_2,
            _ => PI,
        }
    }

    /// Image radius `r′ = sup g(s), s ↑ r`.
    pub fn r_prime(self) -> f64 {
        match self {
            Parameterization::AxisAngle => PI,
            Parameterization::Rodrigues => f64::INFINITY,
            _ => 1.0,
        }
    }

    pub fn g(self, theta: f64) -> f64 {
        match self {
            Parameterization::AxisAngle => theta,
            Parameterization::Rodrigues => (0.5 * theta).tan(),
            Parameterization::ModifiedRodrigues => (0.25 * theta).tan(),
            Parameterization::SinMap => theta.sin(),
            Parameterization::QuaternionVector => (0.5 * theta).sin(),
        }
    }

    pub fn g_inv(self, s: f64) -> f64 {
        match self {
            Parameterization::AxisAngle => s,
            Parameterization::Rodrigues => 2.0 * s.atan(),
            Parameterization::ModifiedRodrigues => 4.0 * s.atan(),
            Parameterization::SinMap => s.asin(),
            Parameterization::QuaternionVector => 2.0 * s.asin(),
        }
    }

    /// Derivative `g′(θ)`.
    pub fn g_prime(self, theta: f64) -> f64 {
        match self {
            Parameterization::AxisAngle => 1.0,
            Parameterization::Rodrigues => 0.5 / (0.5 * theta).cos().powi(2),
            Parameterization::ModifiedRodrigues => 0.25 / (0.25 * theta).cos().powi(2),
            Parameterization::SinMap => theta.cos(),
            Parameterization::QuaternionVector => 0.5 * (0.5 * theta).cos(),
        }
    }

    /// Third derivative at zero; drives the small-angle limit of the jacobian.
    fn g_third_at_zero(self) -> f64 {
        match self {
            Parameterization::AxisAngle => 0.0,
            Parameterization::Rodrigues => 0.25,
            Parameterization::ModifiedRodrigues => 1.0 / 32.0,
            Parameterization::SinMap => -1.0,
            Parameterization::QuaternionVector => -0.125,
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `f(R) = g(θ)u`.
pub fn to_param(r: &Rotation, p: Parameterization) -> Result<Vec3, So3Error> {
    let angle = r.angle();
    if angle >= p.r() - INJECTIVITY_TOL {
        return Err(So3Error::OutsideInjectivityRegion {
            angle,
            radius: p.r(),
            kind: p,
        });
    }
    let x = log_so3(r)?;
    Ok(axis_angle_to_param(&x, p))
}

/// Maps axis-angle coordinates (norm below `r`) to `g(θ)u`.
pub fn axis_angle_to_param(x: &AxisAngle, p: Parameterization) -> Vec3 {
    let theta = x.norm();
    if p == Parameterization::AxisAngle {
        return *x;
    }
    if theta == 0.0 {
        return Vec3::zeros();
    }
    x * (p.g(theta) / theta)
}

/// Maps `g(θ)u` (norm below `r′`) back to axis-angle coordinates.
pub fn param_to_axis_angle(y: &Vec3, p: Parameterization) -> Result<AxisAngle, So3Error> {
    let norm = y.norm();
    if norm >= p.r_prime() || !norm.is_finite() {
        return Err(So3Error::OutsideImage {
            norm,
            radius: p.r_prime(),
            kind: p,
        });
    }
    if p == Parameterization::AxisAngle {
        return Ok(*y);
    }
    if norm == 0.0 {
        return Ok(Vec3::zeros());
    }
    Ok(y * (p.g_inv(norm) / norm))
}

/// Inverse of [`to_param`].
pub fn from_param(y: &Vec3, p: Parameterization) -> Result<Rotation, So3Error> {
    Ok(exp_so3(&param_to_axis_angle(y, p)?))
}

/// `y_ij = f(R_iᵀR_j)` with `R_k = exp(x̂_k)`.
pub fn relative_param(
    xi: &AxisAngle,
    xj: &AxisAngle,
    p: Parameterization,
) -> Result<Vec3, So3Error> {
    let rij = exp_so3(xi).transpose() * exp_so3(xj);
    to_param(&rij, p)
}

/// Transition matrix `L_x` with `ẋ = L_x ω` along `Ṙ = Rω̂`:
/// `L_x = I + x̂/2 + (1 − (θ/2)cot(θ/2))/θ² · x̂²`.
pub fn jacobian_axis_angle(x: &AxisAngle) -> Mat3 {
    let theta = x.norm();
    let k = hat(x);
    Mat3::identity() + 0.5 * k + jacobian_quadratic_coeff(theta) * k * k
}

/// `(1 − sinc θ / sinc²(θ/2)) / θ²`.
fn jacobian_quadratic_coeff(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1_209_600.0
    } else {
        let half = 0.5 * theta;
        (1.0 - sinc(theta) / (sinc(half) * sinc(half))) / (theta * theta)
    }
}

/// Left jacobian of SO(3); `∫₀¹ exp(sφ̂) ds`.
pub fn left_jacobian(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let k = hat(phi);
    Mat3::identity() + one_minus_cos_over_sq(theta) * k + theta_minus_sin_over_cube(theta) * k * k
}

/// Transition matrix `L_y` with `ẏ = L_y ω` for `y = f(R)`, `Ṙ = Rω̂`.
///
/// Chain rule through axis-angle: `L_y = [g′(θ) uuᵀ + (g(θ)/θ)(I − uuᵀ)] · L_x`.
pub fn jacobian_param(y: &Vec3, p: Parameterization) -> Result<Mat3, So3Error> {
    let x = param_to_axis_angle(y, p)?;
    let theta = x.norm();
    let lx = jacobian_axis_angle(&x);
    let radial = if theta < SMALL_ANGLE {
        // g′(θ) ≈ g′(0) + g‴(0)θ²/2, g(θ)/θ ≈ g′(0) + g‴(0)θ²/6
        let g1 = p.g_prime(0.0);
        let g3 = p.g_third_at_zero();
        let tangential = g1 + g3 * theta * theta / 6.0;
        tangential * Mat3::identity() + (g3 / 3.0) * (x * x.transpose())
    } else {
        let u = x / theta;
        let uu = u * u.transpose();
        let tangential = p.g(theta) / theta;
        p.g_prime(theta) * uu + tangential * (Mat3::identity() - uu)
    };
    let l = radial * lx;
    let sv = l.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(So3Error::NearSingular { condition });
    }
    Ok(l)
}

/// `θ − sin θ` without cancellation near zero.
fn theta_minus_sin(theta: f64) -> f64 {
    theta_minus_sin_over_cube(theta) * theta * theta * theta
}

/// Haar-uniform rotation conditioned on `d(I, R) < radius`.
///
/// Axis uniform on S², angle drawn from the Haar marginal density ∝ 1 − cos θ
/// on `[0, radius)` by bisection on its CDF.
pub fn sample_rotation_ball<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Rotation {
    assert!(radius > 0.0 && radius <= PI, "radius must lie in (0, π]");
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let target = rng.random::<f64>() * theta_minus_sin(radius);
    let (mut lo, mut hi) = (0.0, radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta_minus_sin(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    exp_so3(&(lo * Vec3::from(axis)))
}
