//! Measurement noise.

use nalgebra::Matrix4;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::se3::Pose;
use crate::so3::{hat, Mat3, Vec3};

/// Vector of norm `magnitude` with a uniformly distributed direction.
pub fn vector_noise<R: Rng + ?Sized>(magnitude: f64, rng: &mut R) -> Vec3 {
    if magnitude == 0.0 {
        return Vec3::zeros();
    }
    let d: [f64; 3] = UnitSphere.sample(rng);
    magnitude * Vec3::from(d)
}

/// Skew matrix of Frobenius norm `magnitude` with a uniformly distributed axis.
pub fn skew_noise<R: Rng + ?Sized>(magnitude: f64, rng: &mut R) -> Mat3 {
    hat(&vector_noise(magnitude / std::f64::consts::SQRT_2, rng))
}

/// Adds skew noise to a rotation-type measurement.
pub fn inject_noise_matrix<R: Rng + ?Sized>(m: &Mat3, magnitude: f64, rng: &mut R) -> Mat3 {
    if magnitude == 0.0 {
        return *m;
    }
    m + skew_noise(magnitude, rng)
}

/// Adds a random vector of norm `magnitude`.
pub fn inject_noise_vector<R: Rng + ?Sized>(v: &Vec3, magnitude: f64, rng: &mut R) -> Vec3 {
    if magnitude == 0.0 {
        return *v;
    }
    v + vector_noise(magnitude, rng)
}

/// Homogeneous matrix of `pose` whose rotation block carries skew noise.
pub fn noisy_pose_matrix<R: Rng + ?Sized>(
    pose: &Pose,
    magnitude: f64,
    rng: &mut R,
) -> Matrix4<f64> {
    let mut m = pose.to_matrix();
    if magnitude > 0.0 {
        let noisy = inject_noise_matrix(pose.r.matrix(), magnitude, rng);
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&noisy);
    }
    m
}
