//! Named experiments.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use se3_consensus::analysis::{consensus_reached, CONSENSUS_THRESHOLD};
use se3_consensus::controllers::LawKind;
use se3_consensus::simulator::{
    monte_carlo, run_trial, AgentInit, FormationConfig, McSummary, Outcome, TopologySpec,
    TrialConfig,
};
use se3_consensus::so3::{Parameterization, Vec3};
use se3_consensus::topology::Digraph;

use crate::output::{write_json_file, write_mc, write_trial};
use crate::CliError;

pub const PRESET_NAMES: [&str; 7] = [
    "fig1-first-laws",
    "fig2-noise-switching",
    "fig3-rot-laws",
    "fig4-dynamic",
    "mc-uniform-so3",
    "mc-halfpi-ball",
    "counterexample-trans",
];

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MC_TRIALS: usize = 200;
/// The noisy switching experiment was run 100 times.
const NOISE_TRIALS: usize = 100;
const NOISE_MAGNITUDE: f64 = 0.1;

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct PresetOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub threads: Option<usize>,
    pub horizon: Option<f64>,
}

/// A check on the preset's result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    Diverged,
    RateAtLeast { rate: f64 },
}

/// One labelled trial, or a batch of trials with a success tolerance.
#[derive(Clone, Debug)]
pub enum Part {
    Trial {
        label: String,
        cfg: TrialConfig,
    },
    MonteCarlo {
        label: String,
        cfg: TrialConfig,
        trials: usize,
        tolerance: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub parts: Vec<Part>,
    pub expect: Option<Expectation>,
}

#[derive(Serialize)]
struct PartResult {
    label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<Outcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<McBrief>,
    met: Option<bool>,
}

#[derive(Serialize)]
struct McBrief {
    trials: usize,
    successes: usize,
    rate: f64,
    diverged: usize,
    left_chart: usize,
    tolerance: f64,
}

#[derive(Serialize)]
pub struct PresetReport {
    preset: &'static str,
    seed: u64,
    expectation: Option<Expectation>,
    parts: Vec<PartResult>,
    pub met: bool,
}

fn first_law(law: LawKind, seed: u64) -> TrialConfig {
    let mut cfg = TrialConfig::kinematic(5, law, TopologySpec::RandomQsc, 20.0);
    cfg.sample_rate = Some(100.0);
    cfg.init.rotation_radius = Some(FRAC_PI_2);
    cfg.seed = seed;
    cfg
}

fn monte_carlo_law(law: LawKind, radius: f64, seed: u64) -> TrialConfig {
    let mut cfg = TrialConfig::kinematic(5, law, TopologySpec::RandomQsc, 3000.0);
    cfg.sample_rate = Some(50.0);
    cfg.init.rotation_radius = Some(radius);
    cfg.stop_tolerance = Some(CONSENSUS_THRESHOLD / 2.0);
    cfg.seed = seed;
    cfg
}

fn dynamic_pair(rot: LawKind, seed: u64) -> TrialConfig {
    let p = Parameterization::SinMap;
    let mut cfg = TrialConfig::dynamic(5, rot, TopologySpec::RandomQsc, 20.0);
    cfg.companion_law = Some(LawKind::Force);
    cfg.parameterization = p;
    cfg.dynamics.gain = 3.0;
    cfg.sample_rate = Some(1000.0);
    cfg.record_stride = 10;
    cfg.init.rotation_radius = Some(0.2 * p.r());
    cfg.init.velocity_error_radius = 1.0;
    cfg.init.linear_velocity_error_radius = 1.0;
    cfg.seed = seed;
    cfg
}

fn counterexample(seed: u64) -> TrialConfig {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = (0..n)
        .map(|_| AgentInit {
            rotation: Vec3::new(0.0, 0.0, PI),
            translation: Vec3::new(rng.random(), rng.random(), 0.0),
            omega: None,
            v: None,
        })
        .collect();
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let path = Digraph::from_edges(n, &edges).expect("valid path graph");
    let mut cfg = TrialConfig::kinematic(
        n,
        LawKind::TransAbsolute,
        TopologySpec::Fixed { adjacency: path },
        100.0,
    );
    cfg.init.agents = Some(agents);
    cfg.seed = seed;
    cfg
}

fn trial(law: LawKind, cfg: TrialConfig) -> Part {
    Part::Trial {
        label: law.name().to_string(),
        cfg,
    }
}

/// Builds the named preset.
pub fn build(name: &str, opts: &PresetOptions) -> Result<Preset, CliError> {
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let first_laws = [LawKind::FirstAbsolute, LawKind::FirstRelative];
    let (name, mut parts, expect) = match name {
        "fig1-first-laws" => {
            let parts = first_laws
                .map(|law| {
                    let mut cfg = first_law(law, seed);
                    cfg.formation = Some(FormationConfig::Random {
                        rotation_radius: FRAC_PI_2,
                        translation_box: 1.0,
                    });
                    trial(law, cfg)
                })
                .to_vec();
            (PRESET_NAMES[0], parts, None)
        }
        "fig2-noise-switching" => {
            let mut parts = Vec::new();
            for law in first_laws {
                let mut cfg = first_law(law, seed);
                cfg.topology = TopologySpec::RandomQscSwitching { period: 0.1 };
                cfg.sample_rate = Some(10.0);
                cfg.noise_magnitude = NOISE_MAGNITUDE;
                cfg.horizon = 60.0;
                parts.push(trial(law, cfg.clone()));
                parts.push(Part::MonteCarlo {
                    label: format!("{}_mc", law.name()),
                    cfg,
                    trials: opts.trials.unwrap_or(NOISE_TRIALS),
                    tolerance: 3.0 * NOISE_MAGNITUDE,
                });
            }
            (
                PRESET_NAMES[1],
                parts,
                Some(Expectation::RateAtLeast { rate: 1.0 }),
            )
        }
        "fig3-rot-laws" => {
            let parts = [LawKind::RotAbsolute, LawKind::RotRelative]
                .map(|law| {
                    let mut cfg = first_law(law, seed);
                    cfg.parameterization = Parameterization::SinMap;
                    trial(law, cfg)
                })
                .to_vec();
            (PRESET_NAMES[2], parts, None)
        }
        "fig4-dynamic" => {
            let parts = [LawKind::TorqueAbsolute, LawKind::TorqueRelative]
                .map(|law| Part::Trial {
                    label: format!("{}_force", law.name()),
                    cfg: dynamic_pair(law, seed),
                })
                .to_vec();
            (PRESET_NAMES[3], parts, None)
        }
        "mc-uniform-so3" | "mc-halfpi-ball" => {
            let uniform = name == "mc-uniform-so3";
            let radius = if uniform { PI } else { FRAC_PI_2 };
            let parts = first_laws
                .map(|law| Part::MonteCarlo {
                    label: law.name().to_string(),
                    cfg: monte_carlo_law(law, radius, seed),
                    trials: opts.trials.unwrap_or(DEFAULT_MC_TRIALS),
                    tolerance: CONSENSUS_THRESHOLD,
                })
                .to_vec();
            let (name, rate) = if uniform {
                (PRESET_NAMES[4], 0.85)
            } else {
                (PRESET_NAMES[5], 1.0)
            };
            (name, parts, Some(Expectation::RateAtLeast { rate }))
        }
        "counterexample-trans" => (
            PRESET_NAMES[6],
            vec![trial(LawKind::TransAbsolute, counterexample(seed))],
            Some(Expectation::Diverged),
        ),
        other => {
            return Err(CliError::Config(format!(
                "`preset`: unknown preset `{other}`; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    for part in &mut parts {
        let cfg = match part {
            Part::Trial { cfg, .. } | Part::MonteCarlo { cfg, .. } => cfg,
        };
        if let Some(h) = opts.horizon {
            cfg.horizon = h;
        }
        cfg.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(Preset {
        name,
        parts,
        expect,
    })
}

fn mc_brief(s: &McSummary, tolerance: f64) -> McBrief {
    McBrief {
        trials: s.trials,
        successes: s.successes,
        rate: s.rate,
        diverged: s.diverged,
        left_chart: s.left_chart,
        tolerance,
    }
}

/// Runs every part, writing each into its own subdirectory, then
/// `report.json` at the top.
pub fn run(
    preset: &Preset,
    out: &Path,
    threads: Option<usize>,
    seed: u64,
) -> Result<PresetReport, CliError> {
    let mut results = Vec::new();
    for part in &preset.parts {
        let result = match part {
            Part::Trial { label, cfg } => {
                let trace = run_trial(cfg).map_err(|e| CliError::Config(e.to_string()))?;
                write_trial(&out.join(label), cfg, &trace)?;
                let met = match preset.expect {
                    Some(Expectation::Diverged) => Some(trace.outcome.is_diverged()),
                    _ => None,
                };
                PartResult {
                    label: label.clone(),
                    outcome: Some(trace.outcome),
                    monte_carlo: None,
                    met,
                }
            }
            Part::MonteCarlo {
                label,
                cfg,
                trials,
                tolerance,
            } => {
                let tol = *tolerance;
                let summary =
                    monte_carlo(cfg, *trials, threads, |t| consensus_reached(t, tol, tol))
                        .map_err(|e| CliError::Config(e.to_string()))?;
                write_mc(&out.join(label), &summary)?;
                let met = match preset.expect {
                    Some(Expectation::RateAtLeast { rate }) => Some(summary.rate >= rate),
                    _ => None,
                };
                PartResult {
                    label: label.clone(),
                    outcome: None,
                    monte_carlo: Some(mc_brief(&summary, tol)),
                    met,
                }
            }
        };
        results.push(result);
    }
    let met = results.iter().all(|r| r.met != Some(false));
    let report = PresetReport {
        preset: preset.name,
        seed,
        expectation: preset.expect,
        parts: results,
        met,
    };
    write_json_file(&out.join("report.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds_and_validates() {
        for name in PRESET_NAMES {
            let p = build(name, &PresetOptions::default()).unwrap();
            assert_eq!(p.name, name);
            assert!(!p.parts.is_empty());
        }
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        let err = build("fig9", &PresetOptions::default()).unwrap_err();
        assert!(matches!(err, CliError::Config(ref m) if m.contains("fig9")));
    }

    #[test]
    fn overrides_apply() {
        let opts = PresetOptions {
            seed: Some(9),
            trials: Some(7),
            threads: None,
            horizon: Some(3.0),
        };
        let p = build("mc-halfpi-ball", &opts).unwrap();
        for part in p.parts {
            let Part::MonteCarlo { cfg, trials, .. } = part else {
                panic!("expected a batch")
            };
            assert_eq!((cfg.seed, trials, cfg.horizon), (9, 7, 3.0));
        }
    }

    #[test]
    fn fig3_uses_sin_map_and_both_rotation_laws() {
        let p = build("fig3-rot-laws", &PresetOptions::default()).unwrap();
        let laws: Vec<LawKind> = p
            .parts
            .iter()
            .map(|part| match part {
                Part::Trial { cfg, .. } => {
                    assert_eq!(cfg.parameterization, Parameterization::SinMap);
                    assert_eq!(cfg.n, 5);
                    cfg.law
                }
                Part::MonteCarlo { .. } => panic!("no batches expected"),
            })
            .collect();
        assert_eq!(laws, vec![LawKind::RotAbsolute, LawKind::RotRelative]);
    }
}
