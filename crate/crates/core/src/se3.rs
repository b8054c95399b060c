//! Rigid-body transforms and the consensus/formation change of coordinates.

use std::collections::BTreeMap;
use std::ops::Mul;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::so3::{hat, Mat3, Rotation, Vec3};

/// Tolerance used by [`check_transitive_consistency`].
pub const TRANSITIVITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("relative transform for pair ({0}, {1}) is missing")]
    MissingPair(usize, usize),
}

/// Element of SE(3), stored as a rotation and a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub r: Rotation,
    pub t: Vec3,
}

impl Pose {
    pub fn new(r: Rotation, t: Vec3) -> Self {
        Pose { r, t }
    }

    pub fn identity() -> Self {
        Pose {
            r: Rotation::identity(),
            t: Vec3::zeros(),
        }
    }

    pub fn from_rotation(r: Rotation) -> Self {
        Pose {
            r,
            t: Vec3::zeros(),
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose {
            r: Rotation::identity(),
            t,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.r.transpose();
        Pose {
            r: rt,
            t: -(rt * self.t),
        }
    }

    /// Homogeneous 4×4 view.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.r.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.t);
        m
    }

    /// Row-major rotation followed by translation.
    pub fn to_row_major(&self) -> [f64; 12] {
        let m = self.r.matrix();
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            self.t.x,
            self.t.y,
            self.t.z,
        ]
    }

    pub fn reproject(&self) -> Pose {
        Pose {
            r: self.r.reproject(),
            t: self.t,
        }
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// Body-frame angular and linear velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Twist {
    pub omega: Vec3,
    pub v: Vec3,
}

impl Twist {
    pub fn new(omega: Vec3, v: Vec3) -> Self {
        Twist { omega, v }
    }

    pub fn zero() -> Self {
        Twist {
            omega: Vec3::zeros(),
            v: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.omega
            .iter()
            .chain(self.v.iter())
            .all(|x| x.is_finite())
    }

    /// `[ω̂ v; 0 0]`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&self.omega));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.v);
        m
    }
}

/// Desired poses `G_i*` for a formation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    pub targets: Vec<Pose>,
}

impl FormationSpec {
    pub fn new(targets: Vec<Pose>) -> Self {
        FormationSpec { targets }
    }

    /// All ordered relative targets `G_i*⁻¹ G_j*`.
    pub fn relative_targets(&self) -> BTreeMap<(usize, usize), Pose> {
        let n = self.targets.len();
        let mut rel = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                rel.insert((i, j), relative_pose(&self.targets[i], &self.targets[j]));
            }
        }
        rel
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        r: a.r * b.r,
        t: a.r * b.t + a.t,
    }
}

/// `G_ij = G_i⁻¹ G_j`.
pub fn relative_pose(gi: &Pose, gj: &Pose) -> Pose {
    let rit = gi.r.transpose();
    Pose {
        r: rit * gj.r,
        t: rit * (gj.t - gi.t),
    }
}

/// `G̃ = G G*⁻¹`.
pub fn to_formation_frame(g: &Pose, gstar: &Pose) -> Pose {
    compose(g, &gstar.inverse())
}

/// Inverse of [`to_formation_frame`]: `G = G̃ G*`.
pub fn from_formation_frame(gtilde: &Pose, gstar: &Pose) -> Pose {
    compose(gtilde, gstar)
}

/// `ξ̃ = G* ξ G*⁻¹`.
pub fn conjugate_twist(xi: &Twist, gstar: &Pose) -> Twist {
    let omega = gstar.r * xi.omega;
    let v = -omega.cross(&gstar.t) + gstar.r * xi.v;
    Twist { omega, v }
}

/// `ξ = G*⁻¹ ξ̃ G*`.
pub fn unconjugate_twist(xi_tilde: &Twist, gstar: &Pose) -> Twist {
    let rt = gstar.r.transpose();
    let omega = rt * xi_tilde.omega;
    let v = rt * (xi_tilde.omega.cross(&gstar.t) + xi_tilde.v);
    Twist { omega, v }
}

fn pose_distance(a: &Pose, b: &Pose) -> f64 {
    (a.to_matrix() - b.to_matrix()).norm()
}

/// True iff `G_ij G_jk = G_ik` for every triple, to 1e-8 in Frobenius norm.
pub fn check_transitive_consistency(
    n: usize,
    rel: &BTreeMap<(usize, usize), Pose>,
) -> Result<bool, Se3Error> {
    let get = |i: usize, j: usize| rel.get(&(i, j)).ok_or(Se3Error::MissingPair(i, j));
    for i in 0..n {
        for j in 0..n {
            get(i, j)?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let gij = get(i, j)?;
            for k in 0..n {
                let lhs = compose(gij, get(j, k)?);
                if pose_distance(&lhs, get(i, k)?) > TRANSITIVITY_TOL {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// 4×4 inverse of a measured (possibly non-rigid) homogeneous matrix.
pub fn general_inverse(m: &Matrix4<f64>) -> Option<Matrix4<f64>> {
    m.try_inverse()
}

/// Top-left 3×3 block.
pub fn rotation_block(m: &Matrix4<f64>) -> Mat3 {
    m.fixed_view::<3, 3>(0, 0).into_owned()
}

/// Top-right 3×1 block.
pub fn translation_block(m: &Matrix4<f64>) -> Vec3 {
    m.fixed_view::<3, 1>(0, 3).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_so3, sample_rotation_ball};
    use approx::assert_relative_eq;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_pose<R: Rng>(rng: &mut R) -> Pose {
        let r = sample_rotation_ball(PI, rng);
        let t = Vec3::new(
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        ) * 4.0
            - Vec3::repeat(2.0);
        Pose::new(r, t)
    }

    fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
        pose_distance(a, b) <= tol
    }

    #[test]
    fn compose_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_pose(&mut rng);
        assert_eq!(compose(&Pose::identity(), &g), g);
        assert!(close(&compose(&g, &g.inverse()), &Pose::identity(), 1e-9));
    }

    #[test]
    fn compose_is_associative_and_matches_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (a, b, c) = (
                random_pose(&mut rng),
                random_pose(&mut rng),
                random_pose(&mut rng),
            );
            assert!(close(&((a * b) * c), &(a * (b * c)), 1e-10));
            assert_relative_eq!(
                (a * b).to_matrix(),
                a.to_matrix() * b.to_matrix(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn relative_pose_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let gi = random_pose(&mut rng);
            let gj = random_pose(&mut rng);
            assert!(close(&relative_pose(&gi, &gi), &Pose::identity(), 1e-12));
            assert_eq!(relative_pose(&Pose::identity(), &gj), gj);
            assert!(close(&compose(&gi, &relative_pose(&gi, &gj)), &gj, 1e-10));
            let back = relative_pose(&gj, &gi).inverse();
            assert!(close(&relative_pose(&gi, &gj), &back, 1e-10));
        }
    }

    #[test]
    fn formation_frame_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_pose(&mut rng);
        assert!(close(&to_formation_frame(&g, &g), &Pose::identity(), 1e-12));
        assert_eq!(to_formation_frame(&g, &Pose::identity()), g);
        for _ in 0..100 {
            let si = random_pose(&mut rng);
            let sj = random_pose(&mut rng);
            let common = random_pose(&mut rng);
            let gi = common * si;
            let gj = common * sj;
            let ti = to_formation_frame(&gi, &si);
            let tj = to_formation_frame(&gj, &sj);
            assert!(close(&ti, &tj, 1e-10));
            assert!(close(
                &relative_pose(&gi, &gj),
                &relative_pose(&si, &sj),
                1e-10
            ));
        }
    }

    #[test]
    fn conjugation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi = Twist::new(Vec3::new(0.3, -0.1, 0.7), Vec3::new(1.0, 2.0, -0.5));
        assert_eq!(conjugate_twist(&xi, &Pose::identity()), xi);
        for _ in 0..100 {
            let gs = random_pose(&mut rng);
            let c = conjugate_twist(&xi, &gs);
            let expected = gs.to_matrix() * xi.to_matrix() * gs.inverse().to_matrix();
            assert_relative_eq!(c.to_matrix(), expected, epsilon = 1e-12);
            let back = unconjugate_twist(&c, &gs);
            assert_relative_eq!(back.omega, xi.omega, epsilon = 1e-10);
            assert_relative_eq!(back.v, xi.v, epsilon = 1e-10);
        }
        let pure = Pose::from_rotation(exp_so3(&Vec3::new(0.2, 0.4, -0.1)));
        assert_relative_eq!(
            conjugate_twist(&xi, &pure).v,
            pure.r * xi.v,
            epsilon = 1e-15
        );
    }

    #[test]
    fn transitive_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = FormationSpec::new((0..4).map(|_| random_pose(&mut rng)).collect());
        let mut rel = spec.relative_targets();
        assert!(check_transitive_consistency(4, &rel).unwrap());
        let p = rel[&(0, 2)];
        rel.insert(
            (0, 2),
            Pose::new(p.r * exp_so3(&Vec3::new(0.1, 0.0, 0.0)), p.t),
        );
        assert!(!check_transitive_consistency(4, &rel).unwrap());
        let mut one = BTreeMap::new();
        one.insert((0, 0), Pose::identity());
        assert!(check_transitive_consistency(1, &one).unwrap());
        rel.remove(&(3, 1));
        assert_eq!(
            check_transitive_consistency(4, &rel),
            Err(Se3Error::MissingPair(3, 1))
        );
    }

    #[test]
    fn serialization_view() {
        let p = Pose::new(exp_so3(&Vec3::new(0.0, 0.0, 0.5)), Vec3::new(1.0, 2.0, 3.0));
        let row = p.to_row_major();
        assert_eq!(row[1], p.r.matrix()[(0, 1)]);
        assert_eq!(&row[9..], &[1.0, 2.0, 3.0]);
        let json = serde_json::to_string(&p).unwrap();
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn group_axioms_hold(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_pose(&mut rng), random_pose(&mut rng), random_pose(&mut rng));
            prop_assert!(close(&((a * b) * c), &(a * (b * c)), 1e-10));
            prop_assert!(close(&(a * Pose::identity()), &a, 1e-10));
            prop_assert!(close(&(a * a.inverse()), &Pose::identity(), 1e-10));
            prop_assert!(close(&(a.inverse() * a), &Pose::identity(), 1e-10));
        }

        #[test]
        fn relative_pose_reverses_under_inverse(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gi, gj) = (random_pose(&mut rng), random_pose(&mut rng));
            prop_assert!(close(&relative_pose(&gi, &gj), &relative_pose(&gj, &gi).inverse(), 1e-10));
        }

        #[test]
        fn common_transform_of_targets_is_formation_consensus(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_pose(&mut rng);
            let targets: Vec<Pose> = (0..4).map(|_| random_pose(&mut rng)).collect();
            let tilde: Vec<Pose> = targets
                .iter()
                .map(|s| to_formation_frame(&(q * *s), s))
                .collect();
            for t in &tilde[1..] {
                prop_assert!(close(t, &tilde[0], 1e-10));
            }
        }
    }
}
