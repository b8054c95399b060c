//! Consensus metrics, invariance and rate certificates computed from traces.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::controllers::{LawFamily, LawKind};
use crate::se3::Pose;
use crate::simulator::{run_trial, SimError, Snapshot, Trace, TrialConfig};
use crate::so3::{exp_so3, log_so3, to_param, Parameterization, So3Error, Vec3};

pub mod nnls;

pub use nnls::nnls;

/// Tolerance of the cone membership solver.
pub const NNLS_TOL: f64 = 1e-10;
/// Default success threshold on both consensus errors.
pub const CONSENSUS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("value {value} at index {index} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// Largest pairwise geodesic distance between the rotations.
pub fn rotation_consensus_error(poses: &[Pose]) -> Result<f64, So3Error> {
    let mut worst: f64 = 0.0;
    for (i, a) in poses.iter().enumerate() {
        for b in &poses[i + 1..] {
            worst = worst.max(log_so3(&(a.r.transpose() * b.r))?.norm());
        }
    }
    Ok(worst)
}

/// Euclidean distance of the stacked translations to the consensus set.
pub fn translation_consensus_error(t: &[Vec3]) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let mean = t.iter().fold(Vec3::zeros(), |acc, x| acc + x) / t.len() as f64;
    t.iter()
        .map(|x| (x - mean).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn translations(poses: &[Pose]) -> Vec<Vec3> {
    poses.iter().map(|p| p.t).collect()
}

/// Rotation and translation consensus errors of one snapshot in the formation frame.
pub fn snapshot_errors(trace: &Trace, snap: &Snapshot) -> (Option<f64>, f64) {
    let tilde = trace.tilde_poses(snap);
    (
        rotation_consensus_error(&tilde).ok(),
        translation_consensus_error(&translations(&tilde)),
    )
}

/// [`snapshot_errors`] at the end of the trace.
pub fn final_errors(trace: &Trace) -> (Option<f64>, f64) {
    snapshot_errors(trace, trace.last())
}

/// Completed, with both final errors below the given tolerances.
pub fn consensus_reached(trace: &Trace, rot_tol: f64, trans_tol: f64) -> bool {
    let (rot, trans) = final_errors(trace);
    trace.outcome.is_completed() && rot.is_some_and(|r| r < rot_tol) && trans < trans_tol
}

fn drives_rotation(laws: &[LawKind]) -> bool {
    laws.iter().any(|l| {
        matches!(
            l.family(),
            LawFamily::Twist | LawFamily::AngularVelocity | LawFamily::Torque
        )
    })
}

fn drives_translation(laws: &[LawKind]) -> bool {
    laws.iter().any(|l| {
        matches!(
            l.family(),
            LawFamily::Twist | LawFamily::LinearVelocity | LawFamily::Force
        )
    })
}

/// Consensus error over time, restricted to the quantities the active laws
/// act on. Rotations outside the log domain count as infinite error.
pub fn consensus_error_series(trace: &Trace) -> Vec<(f64, f64)> {
    let (rot, trans) = (
        drives_rotation(&trace.laws),
        drives_translation(&trace.laws),
    );
    trace
        .snapshots
        .iter()
        .map(|s| {
            let (r, t) = snapshot_errors(trace, s);
            let mut e: f64 = 0.0;
            if rot {
                e = e.max(r.unwrap_or(f64::INFINITY));
            }
            if trans {
                e = e.max(t);
            }
            (s.t, e)
        })
        .collect()
}

/// First time from which `value ≤ eps` holds until the end of the series.
pub fn time_to_threshold(series: &[(f64, f64)], eps: f64) -> Option<f64> {
    let mut entered = None;
    for &(t, v) in series {
        if v <= eps {
            entered.get_or_insert(t);
        } else {
            entered = None;
        }
    }
    entered
}

/// Norm checked by [`check_ball_invariance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallQuantity {
    /// `max_i ‖x_i‖`, the rotation angles.
    RotationX,
    /// `max_i (‖x_i‖² + ‖ω̄_i‖²)^{1/2}`.
    RotationVelocityPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallVerdict {
    pub holds: bool,
    pub max_value: f64,
    pub slack: f64,
    /// Time at which `max_value` is attained.
    pub worst_time: f64,
}

fn snapshot_ball_value(trace: &Trace, snap: &Snapshot, which: BallQuantity) -> f64 {
    let tilde = trace.tilde_poses(snap);
    tilde
        .iter()
        .zip(&snap.agents)
        .map(|(p, a)| {
            let x = p.r.angle();
            match which {
                BallQuantity::RotationX => x,
                BallQuantity::RotationVelocityPair => {
                    let w = a.errors.omega_bar.map_or(0.0, |w| w.norm_squared());
                    (x * x + w).sqrt()
                }
            }
        })
        .fold(0.0, f64::max)
}

/// The checked norm at every snapshot.
pub fn ball_series(trace: &Trace, which: BallQuantity) -> Vec<(f64, f64)> {
    trace
        .snapshots
        .iter()
        .map(|s| (s.t, snapshot_ball_value(trace, s, which)))
        .collect()
}

/// True iff the checked norm stays below `q + slack` on the whole trace, with
/// `slack = 1e−6 + Δ·max‖ω‖` for the control hold interval `Δ`.
pub fn check_ball_invariance(trace: &Trace, q: f64, which: BallQuantity) -> BallVerdict {
    let max_omega = trace
        .snapshots
        .iter()
        .flat_map(|s| s.agents.iter().map(|a| a.omega.norm()))
        .fold(0.0, f64::max);
    let slack = 1e-6 + trace.sample_period * max_omega;
    let (worst_time, max_value) =
        ball_series(trace, which)
            .into_iter()
            .fold(
                (trace.first().t, 0.0),
                |acc, (t, v)| if v > acc.1 { (t, v) } else { acc },
            );
    BallVerdict {
        holds: max_value <= q + slack,
        max_value,
        slack,
        worst_time,
    }
}

/// `V₆ = max_i (x_iᵀx_i + ω̄_iᵀω̄_i)` along the trace.
pub fn v6_series(trace: &Trace) -> Vec<(f64, f64)> {
    ball_series(trace, BallQuantity::RotationVelocityPair)
        .into_iter()
        .map(|(t, v)| (t, v * v))
        .collect()
}

/// Largest increase between consecutive values, or zero.
pub fn max_increase(series: &[(f64, f64)]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `ln(value)` against time.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(t, ln value)`.
pub fn fit_exponential_rate(series: &[(f64, f64)]) -> Result<RateFit, AnalysisError> {
    const MIN_POINTS: usize = 10;
    if series.len() < MIN_POINTS {
        return Err(AnalysisError::TooFewPoints {
            needed: MIN_POINTS,
            got: series.len(),
        });
    }
    if let Some((index, &(_, value))) = series.iter().enumerate().find(|(_, (_, v))| !(*v > 0.0)) {
        return Err(AnalysisError::NonPositiveValue { index, value });
    }
    let n = series.len() as f64;
    let tm = series.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in series {
        let (dt, dy) = (t - tm, v.ln() - ym);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let rate = sty / stt;
    let intercept = ym - rate * tm;
    let ss_res: f64 = series
        .iter()
        .map(|&(t, v)| (v.ln() - intercept - rate * t).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        rate,
        intercept,
        r_squared,
    })
}

/// Points of `series` whose value lies in `[lo, hi]`.
pub fn window(series: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    series
        .iter()
        .copied()
        .filter(|&(_, v)| v >= lo && v <= hi)
        .collect()
}

/// Distance from `zdot` to the cone spanned by `z_j − z` over the neighbors.
pub fn cone_membership(z: &Vec3, neighbors: &[Vec3], zdot: &Vec3) -> f64 {
    if neighbors.is_empty() {
        return zdot.norm();
    }
    let scale = zdot.norm();
    if scale == 0.0 {
        return 0.0;
    }
    // The cone is unchanged by rescaling its generators, so solve on unit
    // vectors to keep the absolute tolerance meaningful.
    let gens: Vec<Vec3> = neighbors
        .iter()
        .map(|zj| zj - z)
        .filter(|d| d.norm() > 0.0)
        .map(|d| d.normalize())
        .collect();
    if gens.is_empty() {
        return scale;
    }
    let a = DMatrix::from_fn(3, gens.len(), |r, c| gens[c][r]);
    let b = DVector::from_column_slice((zdot / scale).as_slice());
    let lambda = nnls(&a, &b, NNLS_TOL);
    scale * (&a * lambda - b).norm()
}

/// Relative cone residuals `dist / ‖ż_i‖` of every agent at every snapshot,
/// with `z` the Rodrigues coordinates of the formation-frame rotations and
/// `ż` a central difference of angular step `eps` along the held angular
/// velocity, rescaled by its norm. Agents whose
/// `‖ż_i‖` is below `1e−12` are skipped.
pub fn cone_residuals(trace: &Trace, eps: f64) -> Result<Vec<f64>, So3Error> {
    let p = Parameterization::Rodrigues;
    let mut out = Vec::new();
    let mut neighbor_sets: Vec<Vec<usize>> = vec![Vec::new(); trace.n];
    let mut ev = trace.events.iter().peekable();
    for snap in &trace.snapshots {
        while let Some(e) = ev.next_if(|e| e.t <= snap.t + 1e-9 * trace.sample_period) {
            neighbor_sets[e.agent] = e.neighbors.clone();
        }
        let tilde = trace.tilde_poses(snap);
        let z: Vec<Vec3> = tilde
            .iter()
            .map(|q| to_param(&q.r, p))
            .collect::<Result<_, _>>()?;
        for (i, agent) in snap.agents.iter().enumerate() {
            let omega = match &trace.targets {
                Some(spec) => spec.targets[i].r * agent.omega,
                None => agent.omega,
            };
            let speed = omega.norm();
            if speed == 0.0 {
                continue;
            }
            let r = tilde[i].r;
            let step = eps * omega / speed;
            let zdot = (to_param(&(r * exp_so3(&step)), p)?
                - to_param(&(r * exp_so3(&(-step))), p)?)
                * (speed / (2.0 * eps));
            if zdot.norm() < 1e-12 {
                continue;
            }
            let nb: Vec<Vec3> = neighbor_sets[i].iter().map(|&j| z[j]).collect();
            out.push(cone_membership(&z[i], &nb, &zdot) / zdot.norm());
        }
    }
    Ok(out)
}

/// Summary of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsensusReport {
    pub outcome: String,
    pub diverged: bool,
    pub final_rotation_error: Option<f64>,
    pub final_translation_error: f64,
    pub time_to_threshold: Option<f64>,
    /// Rotation angles never exceed their initial maximum (plus slack).
    pub ball_invariance: bool,
    /// Fitted decay rate of the consensus error while it is in `[1e−8, 1e−1]`.
    pub rate: Option<f64>,
}

pub fn consensus_report(trace: &Trace, threshold: f64) -> ConsensusReport {
    let (rot, trans) = final_errors(trace);
    let series = consensus_error_series(trace);
    let q = snapshot_ball_value(trace, trace.first(), BallQuantity::RotationX);
    let rate = fit_exponential_rate(&window(&series, 1e-8, 1e-1))
        .ok()
        .map(|f| f.rate);
    ConsensusReport {
        outcome: trace.outcome.name().to_string(),
        diverged: trace.outcome.is_diverged(),
        final_rotation_error: rot,
        final_translation_error: trans,
        time_to_threshold: time_to_threshold(&series, threshold),
        ball_invariance: check_ball_invariance(trace, q, BallQuantity::RotationX).holds,
        rate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub start_times: Vec<f64>,
    /// Time from each start until the consensus error stays below `eps`.
    pub times_to_eps: Vec<Option<f64>>,
    pub all_reached: bool,
    pub max_time: Option<f64>,
    pub spread: Option<f64>,
}

/// Runs `template` from each start time and measures how long the consensus
/// error takes to settle below `eps`.
pub fn certify_uniform_attractivity(
    template: &TrialConfig,
    start_times: &[f64],
    eps: f64,
) -> Result<UniformityReport, SimError> {
    let mut times = Vec::with_capacity(start_times.len());
    for &t0 in start_times {
        let mut cfg = template.clone();
        cfg.start_time = t0;
        let trace = run_trial(&cfg)?;
        let tau = if trace.outcome.is_completed() {
            time_to_threshold(&consensus_error_series(&trace), eps).map(|t| t - t0)
        } else {
            None
        };
        times.push(tau);
    }
    let all_reached = times.iter().all(Option::is_some);
    let (max_time, spread) = if all_reached && !times.is_empty() {
        let vals: Vec<f64> = times.iter().flatten().copied().collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        (Some(max), Some(max - min))
    } else {
        (None, None)
    };
    Ok(UniformityReport {
        start_times: start_times.to_vec(),
        times_to_eps: times,
        all_reached,
        max_time,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{TopologySpec, TrialConfig};
    use crate::so3::sample_rotation_ball;
    use crate::topology::Digraph;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zrot(a: f64) -> Pose {
        Pose::from_rotation(exp_so3(&Vec3::new(0.0, 0.0, a)))
    }

    #[test]
    fn rotation_error_examples() {
        assert_eq!(rotation_consensus_error(&[zrot(0.4); 3]).unwrap(), 0.0);
        assert_relative_eq!(
            rotation_consensus_error(&[zrot(0.0), zrot(0.3)]).unwrap(),
            0.3,
            epsilon = 1e-15
        );
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let poses: Vec<Pose> = (0..4)
            .map(|_| Pose::from_rotation(sample_rotation_ball(1.0, &mut rng)))
            .collect();
        let q = sample_rotation_ball(3.0, &mut rng);
        let moved: Vec<Pose> = poses.iter().map(|p| Pose::from_rotation(q * p.r)).collect();
        assert_relative_eq!(
            rotation_consensus_error(&poses).unwrap(),
            rotation_consensus_error(&moved).unwrap(),
            epsilon = 1e-12
        );
        assert!(rotation_consensus_error(&[zrot(0.0), zrot(std::f64::consts::PI)]).is_err());
    }

    #[test]
    fn translation_error_examples() {
        let t = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(translation_consensus_error(&[t, t]), 0.0);
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_relative_eq!(
            translation_consensus_error(&[x, -x]),
            2f64.sqrt(),
            epsilon = 1e-15
        );
        let off = Vec3::new(-3.0, 0.5, 9.0);
        assert_relative_eq!(
            translation_consensus_error(&[x + off, -x + off]),
            translation_consensus_error(&[x, -x]),
            epsilon = 1e-14
        );
    }

    #[test]
    fn translation_error_matches_grid_search() {
        let (a, b) = (Vec3::new(0.3, -0.2, 0.1), Vec3::new(-0.5, 0.4, 0.9));
        let mut best = f64::INFINITY;
        let steps = 400;
        // The optimum lies on the segment between the two points.
        for k in 0..=steps {
            let c = a + (b - a) * (k as f64 / steps as f64);
            best = best.min(((a - c).norm_squared() + (b - c).norm_squared()).sqrt());
        }
        assert!((best - translation_consensus_error(&[a, b])).abs() < 1e-6);
    }

    #[test]
    fn rate_fit_examples() {
        let s: Vec<(f64, f64)> = (0..50)
            .map(|k| (0.1 * k as f64, (-2.0 * 0.1 * k as f64).exp()))
            .collect();
        let f = fit_exponential_rate(&s).unwrap();
        assert!((f.rate + 2.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 3.0)).collect();
        let f = fit_exponential_rate(&c).unwrap();
        assert_eq!(f.rate, 0.0);
        assert_eq!(f.r_squared, 1.0);
        let mut bad = s.clone();
        bad[3].1 = 0.0;
        assert_eq!(
            fit_exponential_rate(&bad),
            Err(AnalysisError::NonPositiveValue {
                index: 3,
                value: 0.0
            })
        );
        assert!(matches!(
            fit_exponential_rate(&s[..5]),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    proptest! {
        #[test]
        fn rate_fit_recovers_rates(log_rate in -3.0f64..0.0, intercept in -2.0f64..2.0) {
            let rate = -(10f64.powf(log_rate)) * 10.0;
            let s: Vec<(f64, f64)> = (0..30).map(|k| {
                let t = k as f64 / (30.0 * rate.abs());
                (t, (intercept + rate * t).exp())
            }).collect();
            let f = fit_exponential_rate(&s).unwrap();
            prop_assert!(((f.rate - rate) / rate).abs() < 1e-6);
        }
    }

    #[test]
    fn cone_examples() {
        let z = Vec3::zeros();
        let zj = Vec3::new(1.0, 2.0, -1.0);
        assert!(cone_membership(&z, &[zj], &zj) < 1e-12);
        assert_relative_eq!(cone_membership(&z, &[zj], &-zj), zj.norm(), epsilon = 1e-12);
        let a = Vec3::new(1.0, 0.0, 0.0);
        let b = Vec3::new(0.0, 1.0, 0.0);
        assert!(cone_membership(&z, &[a, b], &Vec3::new(0.3, 0.7, 0.0)) < 1e-12);
        assert_relative_eq!(
            cone_membership(&z, &[a, b], &Vec3::new(0.3, 0.7, 0.5)),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn threshold_time() {
        let s = vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.5), (3.0, 0.05), (4.0, 0.01)];
        assert_eq!(time_to_threshold(&s, 0.2), Some(3.0));
        assert_eq!(time_to_threshold(&s, 1e-3), None);
    }

    fn consensus_trace() -> Trace {
        let mut cfg = TrialConfig::kinematic(3, LawKind::RotRelative, TopologySpec::Complete, 1.0);
        cfg.init.rotation_radius = Some(0.0);
        cfg.init.translation_box = 0.0;
        run_trial(&cfg).unwrap()
    }

    #[test]
    fn ball_invariance_controls() {
        let trace = consensus_trace();
        assert!(check_ball_invariance(&trace, 0.0, BallQuantity::RotationX).holds);
        let mut jumped = trace.clone();
        let k = jumped.snapshots.len() / 2;
        jumped.snapshots[k].agents[1].pose.r = exp_so3(&Vec3::new(0.5, 0.0, 0.0));
        let v = check_ball_invariance(&jumped, 0.1, BallQuantity::RotationX);
        assert!(!v.holds);
        assert_relative_eq!(v.max_value, 0.5, epsilon = 1e-12);
        assert_eq!(v.worst_time, jumped.snapshots[k].t);
    }

    #[test]
    fn report_of_converging_trial() {
        let mut cfg = TrialConfig::kinematic(
            4,
            LawKind::RotRelative,
            TopologySpec::Fixed {
                adjacency: Digraph::directed_cycle(4),
            },
            30.0,
        );
        cfg.companion_law = Some(LawKind::TransRelative);
        cfg.init.rotation_radius_factor = Some(0.45);
        cfg.seed = 9;
        let trace = run_trial(&cfg).unwrap();
        let rep = consensus_report(&trace, CONSENSUS_THRESHOLD);
        assert!(!rep.diverged);
        assert!(rep.final_rotation_error.unwrap() < 1e-6);
        assert!(rep.final_translation_error < 1e-6);
        assert!(rep.time_to_threshold.is_some());
        assert!(rep.ball_invariance);
        assert!(rep.rate.unwrap() < 0.0);
    }

    #[test]
    fn static_graph_gives_equal_attractivity_times() {
        let mut cfg = TrialConfig::kinematic(3, LawKind::RotRelative, TopologySpec::Complete, 10.0);
        cfg.init.rotation_radius = Some(1.0);
        cfg.seed = 4;
        let rep = certify_uniform_attractivity(&cfg, &[0.0, 0.3, 0.7], 1e-4).unwrap();
        assert!(rep.all_reached);
        assert!(rep.spread.unwrap() < 1e-9);
    }
}
