//! Property suites behind `check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use se3_consensus::analysis::{
    check_ball_invariance, cone_residuals, final_errors, fit_exponential_rate,
    rotation_consensus_error, window, BallQuantity, CONSENSUS_THRESHOLD,
};
use se3_consensus::controllers::{support_check, LawKind};
use se3_consensus::simulator::{run_trial, TopologySpec, Trace, TrialConfig};
use se3_consensus::so3::{
    exp_so3, from_param, log_so3, sample_rotation_ball, to_param, Parameterization,
};
use se3_consensus::topology::{random_qsc_graph, Digraph};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Roundtrips,
    Invariance,
    Lemma1,
    Cone,
    Rates,
    All,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// The quantity compared against `tolerance` (largest error, or smallest
    /// fraction for `cone`).
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckSummary {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

pub struct CheckOptions {
    pub seed: u64,
    /// Support-inequality sampling radius as a fraction of the injectivity radius.
    pub q_factor: f64,
}

const ROUNDTRIP_TOL: f64 = 1e-9;
const ROUNDTRIP_SAMPLES: usize = 10_000;
const LEMMA1_SAMPLES: usize = 10_000;
const CONE_TOL: f64 = 1e-3;
const CONE_FRACTION: f64 = 0.99;
const RATE_TOL: f64 = 0.01;
const R2_MIN: f64 = 0.99;

fn sim(cfg: &TrialConfig) -> Result<Trace, CliError> {
    run_trial(cfg).map_err(|e| CliError::Config(e.to_string()))
}

fn roundtrips(rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut cases = 0;
    let mut record = |err: f64| {
        cases += 1;
        if !(err <= ROUNDTRIP_TOL) {
            failures += 1;
        }
        worst = worst.max(err);
    };
    for p in Parameterization::ALL {
        for _ in 0..ROUNDTRIP_SAMPLES {
            let r = sample_rotation_ball(0.999 * p.r(), rng);
            let err = match to_param(&r, p).and_then(|y| from_param(&y, p)) {
                Ok(back) => (back.matrix() - r.matrix()).norm(),
                Err(_) => f64::INFINITY,
            };
            record(err);
        }
    }
    for _ in 0..ROUNDTRIP_SAMPLES {
        let x = log_so3(&sample_rotation_ball(0.999 * std::f64::consts::PI, rng))
            .expect("inside the ball");
        let err = log_so3(&exp_so3(&x))
            .map(|y| (y - x).norm())
            .unwrap_or(f64::INFINITY);
        record(err);
    }
    SuiteResult {
        suite: "roundtrips",
        passed: failures == 0,
        cases,
        failures,
        worst,
        tolerance: ROUNDTRIP_TOL,
    }
}

fn tournament(n: usize, forward: bool) -> Digraph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| if forward { (i, j) } else { (j, i) }))
        .collect();
    Digraph::from_edges(n, &edges).expect("valid tournament")
}

fn alternating(
    law: LawKind,
    p: Parameterization,
    factor: f64,
    horizon: f64,
    seed: u64,
) -> TrialConfig {
    let n = 5;
    let graphs = vec![tournament(n, true), tournament(n, false)];
    let mut cfg = TrialConfig::kinematic(
        n,
        law,
        TopologySpec::Periodic {
            graphs,
            period: 0.1,
        },
        horizon,
    );
    cfg.parameterization = p;
    cfg.sample_rate = Some(100.0);
    cfg.init.rotation_radius_factor = Some(factor);
    cfg.seed = seed;
    cfg
}

fn invariance(seed: u64) -> Result<SuiteResult, CliError> {
    let mut failures = 0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for p in Parameterization::ALL {
        for k in 0..10 {
            let trace = sim(&alternating(LawKind::RotAbsolute, p, 0.9, 30.0, seed + k))?;
            let q = trace
                .first()
                .agents
                .iter()
                .map(|a| a.pose.r.angle())
                .fold(0.0, f64::max);
            let ball = check_ball_invariance(&trace, q, BallQuantity::RotationX);
            let err = final_errors(&trace).0.unwrap_or(f64::INFINITY);
            cases += 1;
            if !(trace.outcome.is_completed() && ball.holds && err < CONSENSUS_THRESHOLD) {
                failures += 1;
            }
            worst = worst.max(err);
        }
    }
    Ok(SuiteResult {
        suite: "invariance",
        passed: failures == 0,
        cases,
        failures,
        worst,
        tolerance: CONSENSUS_THRESHOLD,
    })
}

fn lemma1(rng: &mut ChaCha8Rng, q_factor: f64) -> SuiteResult {
    let mut failures = 0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for p in Parameterization::ALL {
        let q = q_factor * p.r();
        for _ in 0..LEMMA1_SAMPLES {
            let n = rng.random_range(2..=6);
            let x: Vec<_> = (0..n)
                .map(|_| {
                    log_so3(&sample_rotation_ball(q.min(std::f64::consts::PI), rng))
                        .expect("inside the ball")
                })
                .collect();
            let check = support_check(&x, p);
            cases += 1;
            if !check.holds() {
                failures += 1;
                worst = worst.max(-check.min_inner);
            }
        }
    }
    SuiteResult {
        suite: "lemma1",
        passed: failures == 0,
        cases,
        failures,
        worst,
        tolerance: 0.0,
    }
}

fn cone(seed: u64) -> Result<SuiteResult, CliError> {
    let mut total = 0;
    let mut good = 0;
    for p in Parameterization::ALL {
        for k in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + k);
            let g = random_qsc_graph(3, &mut rng);
            let mut cfg = TrialConfig::kinematic(
                3,
                LawKind::RotRelative,
                TopologySpec::Fixed { adjacency: g },
                10.0,
            );
            cfg.parameterization = p;
            cfg.sample_rate = Some(100.0);
            cfg.init.rotation_radius_factor = Some(0.45);
            cfg.seed = seed + k;
            let trace = sim(&cfg)?;
            let res = cone_residuals(&trace, 1e-4).map_err(|e| CliError::Config(e.to_string()))?;
            total += res.len();
            good += res.iter().filter(|&&r| r <= CONE_TOL).count();
        }
    }
    let fraction = if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    };
    Ok(SuiteResult {
        suite: "cone",
        passed: fraction >= CONE_FRACTION,
        cases: total,
        failures: total - good,
        worst: fraction,
        tolerance: CONE_FRACTION,
    })
}

fn rates(seed: u64) -> Result<SuiteResult, CliError> {
    let mut failures = 0;
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    // Relative rotation law on alternating tournaments: a straight line in log V.
    for k in 0..3 {
        let trace = sim(&alternating(
            LawKind::RotRelative,
            Parameterization::AxisAngle,
            0.45,
            30.0,
            seed + k,
        ))?;
        let v: Vec<(f64, f64)> = trace
            .snapshots
            .iter()
            .filter_map(|s| {
                rotation_consensus_error(&s.poses())
                    .ok()
                    .map(|e| (s.t, e * e))
            })
            .collect();
        cases += 1;
        match fit_exponential_rate(&window(&v, 1e-5, 1e-1)) {
            Ok(fit) if fit.r_squared >= R2_MIN && fit.rate < 0.0 => {}
            _ => failures += 1,
        }
    }
    // Torque and force laws: error variables decay at exactly the gain.
    for law in [LawKind::TorqueRelative, LawKind::Force] {
        for k in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + k);
            let g = random_qsc_graph(5, &mut rng);
            let mut cfg = TrialConfig::dynamic(5, law, TopologySpec::Fixed { adjacency: g }, 4.0);
            cfg.h = Some(1e-4);
            cfg.sample_rate = Some(1e4);
            cfg.record_stride = 100;
            cfg.parameterization = Parameterization::SinMap;
            cfg.init.rotation_radius = Some(0.2 * Parameterization::SinMap.r());
            cfg.init.velocity_error_radius = 1.0;
            cfg.init.linear_velocity_error_radius = 1.0;
            cfg.seed = seed + k;
            let gain = cfg.dynamics.gain;
            let trace = sim(&cfg)?;
            for i in 0..5 {
                let s: Vec<(f64, f64)> = trace
                    .snapshots
                    .iter()
                    .filter_map(|snap| {
                        let e = snap.agents[i].errors;
                        let value = if law == LawKind::Force {
                            e.v_bar
                        } else {
                            e.omega_bar
                        };
                        value.map(|v| (snap.t, v.norm()))
                    })
                    .collect();
                cases += 1;
                let err = fit_exponential_rate(&window(&s, 1e-4, 10.0))
                    .map(|fit| (fit.rate + gain).abs() / gain)
                    .unwrap_or(f64::INFINITY);
                worst = worst.max(err);
                if !(err <= RATE_TOL) {
                    failures += 1;
                }
            }
        }
    }
    Ok(SuiteResult {
        suite: "rates",
        passed: failures == 0,
        cases,
        failures,
        worst,
        tolerance: RATE_TOL,
    })
}

/// Runs the requested suite, or all of them.
pub fn run(suite: Suite, opts: &CheckOptions) -> Result<CheckSummary, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let want = |s: Suite| suite == s || suite == Suite::All;
    let mut suites = Vec::new();
    if want(Suite::Roundtrips) {
        suites.push(roundtrips(&mut rng));
    }
    if want(Suite::Invariance) {
        suites.push(invariance(opts.seed)?);
    }
    if want(Suite::Lemma1) {
        suites.push(lemma1(&mut rng, opts.q_factor));
    }
    if want(Suite::Cone) {
        suites.push(cone(opts.seed)?);
    }
    if want(Suite::Rates) {
        suites.push(rates(opts.seed)?);
    }
    Ok(CheckSummary {
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
