//! Trial configuration, read from TOML.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::controllers::{DynamicParams, LawFamily, LawKind};
use crate::se3::{FormationSpec, Pose};
use crate::so3::{exp_so3, sample_rotation_ball, Mat3, Parameterization, Vec3};
use crate::topology::{Digraph, SwitchRecord, SwitchingSchedule};

/// Default sampling frequency of kinematic trials.
pub const DEFAULT_SAMPLE_RATE: f64 = 10.0;
/// Default integration step of dynamic trials.
pub const DEFAULT_DYNAMIC_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Kinematic,
    Dynamic,
}

/// Where the graph signal comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// One graph for the whole trial.
    Fixed { adjacency: Digraph },
    /// The complete graph with unit weights.
    Complete,
    /// One random quasi-strongly connected graph drawn from the trial seed.
    RandomQsc,
    /// A fresh random quasi-strongly connected pattern every `period` seconds.
    RandomQscSwitching { period: f64 },
    /// `graphs` cycled with the given period, starting at time zero.
    Periodic { graphs: Vec<Digraph>, period: f64 },
    /// Explicit per-agent switch records and a master weight table.
    Schedule {
        records: Vec<SwitchRecord>,
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        dwell_floor: f64,
    },
}

/// Explicit initial condition of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentInit {
    /// Axis-angle vector of the initial rotation.
    pub rotation: Vec3,
    #[serde(default = "Vec3::zeros")]
    pub translation: Vec3,
    /// Body angular velocity; derived from a zero error variable when absent.
    #[serde(default)]
    pub omega: Option<Vec3>,
    #[serde(default)]
    pub v: Option<Vec3>,
}

/// Sampling of initial states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSpec {
    /// Radius in radians of the Haar-uniform rotation ball around `I`.
    pub rotation_radius: Option<f64>,
    /// Radius as a fraction of the injectivity radius of the parameterization.
    pub rotation_radius_factor: Option<f64>,
    /// Translations are uniform on `[0, translation_box]³`.
    pub translation_box: f64,
    /// Radius of the ball from which `ω̄` (or `ω̄′`) is drawn in dynamic mode.
    pub velocity_error_radius: f64,
    /// Radius of the ball from which `v̄` is drawn in dynamic mode.
    pub linear_velocity_error_radius: f64,
    pub agents: Option<Vec<AgentInit>>,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            rotation_radius: None,
            rotation_radius_factor: None,
            translation_box: 1.0,
            velocity_error_radius: 0.0,
            linear_velocity_error_radius: 0.0,
            agents: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetPose {
    pub rotation: Vec3,
    #[serde(default = "Vec3::zeros")]
    pub translation: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormationConfig {
    Targets {
        targets: Vec<TargetPose>,
    },
    /// Targets drawn from the trial seed.
    Random {
        rotation_radius: f64,
        translation_box: f64,
    },
}

/// Rigid-body parameters shared by all agents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    /// Principal moments of inertia.
    pub inertia: Vec3,
    pub mass: f64,
    pub gain: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let d = DynamicParams::default();
        DynamicsConfig {
            inertia: d.inertia.diagonal(),
            mass: d.mass,
            gain: d.gain,
        }
    }
}

impl DynamicsConfig {
    pub fn params(&self) -> DynamicParams {
        DynamicParams {
            inertia: Mat3::from_diagonal(&self.inertia),
            mass: self.mass,
            gain: self.gain,
        }
    }
}

fn default_parameterization() -> Parameterization {
    Parameterization::AxisAngle
}

fn default_stride() -> usize {
    1
}

/// Everything needed to run one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub n: usize,
    pub mode: Mode,
    pub law: LawKind,
    /// Second law acting on the other half of the twist or wrench.
    #[serde(default)]
    pub companion_law: Option<LawKind>,
    #[serde(default = "default_parameterization")]
    pub parameterization: Parameterization,
    /// Integration step in seconds.
    #[serde(default)]
    pub h: Option<f64>,
    pub horizon: f64,
    /// Control update frequency in Hz.
    #[serde(default)]
    pub sample_rate: Option<f64>,
    #[serde(default)]
    pub noise_magnitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_time: f64,
    /// Keep every `record_stride`-th sample in the trace; the last one is always kept.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// End a kinematic trial early once both formation-frame consensus
    /// errors are below this value.
    #[serde(default)]
    pub stop_tolerance: Option<f64>,
    pub topology: TopologySpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub formation: Option<FormationConfig>,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

/// Step sizes resolved from a configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub h: f64,
    pub sample_period: f64,
    pub steps_per_sample: usize,
    pub samples: usize,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> SimError {
    SimError::ConfigInvalid(format!("`{key}`: {msg}"))
}

impl TrialConfig {
    /// A kinematic trial with defaults for everything optional.
    pub fn kinematic(n: usize, law: LawKind, topology: TopologySpec, horizon: f64) -> Self {
        TrialConfig {
            n,
            mode: Mode::Kinematic,
            law,
            companion_law: None,
            parameterization: default_parameterization(),
            h: None,
            horizon,
            sample_rate: None,
            noise_magnitude: 0.0,
            seed: 0,
            start_time: 0.0,
            record_stride: 1,
            stop_tolerance: None,
            topology,
            init: InitSpec::default(),
            formation: None,
            dynamics: DynamicsConfig::default(),
        }
    }

    /// A dynamic trial with defaults for everything optional.
    pub fn dynamic(n: usize, law: LawKind, topology: TopologySpec, horizon: f64) -> Self {
        TrialConfig {
            mode: Mode::Dynamic,
            ..Self::kinematic(n, law, topology, horizon)
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let cfg: TrialConfig =
            toml::from_str(s).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// The laws in effect, primary first.
    pub fn laws(&self) -> Vec<LawKind> {
        std::iter::once(self.law)
            .chain(self.companion_law)
            .collect()
    }

    pub fn timing(&self) -> Result<Timing, SimError> {
        let (h, rate) = match self.mode {
            Mode::Kinematic => {
                let rate = self.sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE);
                (self.h.unwrap_or(1.0 / rate), rate)
            }
            Mode::Dynamic => {
                let h = self.h.unwrap_or(DEFAULT_DYNAMIC_STEP);
                (h, self.sample_rate.unwrap_or(1.0 / h))
            }
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", "must be positive"));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("sample_rate", "must be positive"));
        }
        let sample_period = 1.0 / rate;
        let ratio = sample_period / h;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-6 * ratio {
            return Err(invalid(
                "sample_rate",
                format!("sample period {sample_period} is not a multiple of h = {h}"),
            ));
        }
        let samples_f = self.horizon / sample_period;
        let samples = samples_f.round();
        if (samples_f - samples).abs() > 1e-6 * samples_f.max(1.0) || samples < 1.0 {
            return Err(invalid(
                "horizon",
                "must be a positive multiple of the sample period",
            ));
        }
        Ok(Timing {
            h: sample_period / steps,
            sample_period,
            steps_per_sample: steps as usize,
            samples: samples as usize,
        })
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.horizon
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !self.start_time.is_finite() || self.start_time < 0.0 {
            return Err(invalid("start_time", "must be nonnegative"));
        }
        if !(self.noise_magnitude >= 0.0 && self.noise_magnitude.is_finite()) {
            return Err(invalid("noise_magnitude", "must be nonnegative"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        if let Some(tol) = self.stop_tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(invalid("stop_tolerance", "must be positive"));
            }
        }
        self.timing()?;
        self.validate_laws()?;
        if self.mode == Mode::Dynamic {
            if self.noise_magnitude > 0.0 {
                return Err(invalid(
                    "noise_magnitude",
                    "noise is only supported in kinematic mode",
                ));
            }
            if self.stop_tolerance.is_some() {
                return Err(invalid(
                    "stop_tolerance",
                    "early stopping is only supported in kinematic mode",
                ));
            }
            self.dynamics
                .params()
                .validate()
                .map_err(|e| invalid("dynamics", e))?;
        }
        let init = &self.init;
        if init.rotation_radius.is_some() && init.rotation_radius_factor.is_some() {
            return Err(invalid(
                "init",
                "give rotation_radius or rotation_radius_factor, not both",
            ));
        }
        let radius = self.rotation_radius();
        if !(radius >= 0.0 && radius <= std::f64::consts::PI) {
            return Err(invalid("init.rotation_radius", "must lie in [0, π]"));
        }
        for (key, val) in [
            ("init.translation_box", init.translation_box),
            ("init.velocity_error_radius", init.velocity_error_radius),
            (
                "init.linear_velocity_error_radius",
                init.linear_velocity_error_radius,
            ),
        ] {
            if !(val >= 0.0 && val.is_finite()) {
                return Err(invalid(key, "must be nonnegative"));
            }
        }
        if let Some(agents) = &init.agents {
            if agents.len() != self.n {
                return Err(invalid(
                    "init.agents",
                    format!("expected {} entries, got {}", self.n, agents.len()),
                ));
            }
        }
        match &self.formation {
            Some(FormationConfig::Targets { targets }) if targets.len() != self.n => {
                return Err(invalid(
                    "formation.targets",
                    format!("expected {} entries, got {}", self.n, targets.len()),
                ));
            }
            Some(FormationConfig::Random {
                rotation_radius,
                translation_box,
            }) => {
                if !(*rotation_radius >= 0.0 && *rotation_radius <= std::f64::consts::PI) {
                    return Err(invalid("formation.rotation_radius", "must lie in [0, π]"));
                }
                if !(*translation_box >= 0.0) {
                    return Err(invalid("formation.translation_box", "must be nonnegative"));
                }
            }
            _ => {}
        }
        self.validate_topology()
    }

    fn validate_laws(&self) -> Result<(), SimError> {
        let kinematic = self.mode == Mode::Kinematic;
        for law in self.laws() {
            if law.is_kinematic() != kinematic {
                return Err(invalid(
                    "law",
                    format!("`{law}` is not a {:?} law", self.mode).to_lowercase(),
                ));
            }
        }
        if let Some(c) = self.companion_law {
            let (a, b) = (self.law.family(), c.family());
            let ok = matches!(
                (a, b),
                (LawFamily::AngularVelocity, LawFamily::LinearVelocity)
                    | (LawFamily::LinearVelocity, LawFamily::AngularVelocity)
                    | (LawFamily::Torque, LawFamily::Force)
                    | (LawFamily::Force, LawFamily::Torque)
            );
            if !ok {
                return Err(invalid(
                    "companion_law",
                    format!("`{c}` cannot be combined with `{}`", self.law),
                ));
            }
        }
        Ok(())
    }

    fn validate_topology(&self) -> Result<(), SimError> {
        let n = self.n;
        let check = |g: &Digraph, key: &str| {
            if g.n() != n {
                Err(invalid(
                    key,
                    format!("graph has {} nodes, expected {n}", g.n()),
                ))
            } else {
                Ok(())
            }
        };
        match &self.topology {
            TopologySpec::Fixed { adjacency } => check(adjacency, "topology.adjacency"),
            TopologySpec::Periodic { graphs, period } => {
                if graphs.is_empty() {
                    return Err(invalid("topology.graphs", "needs at least one graph"));
                }
                if !(*period > 0.0) {
                    return Err(invalid("topology.period", "must be positive"));
                }
                graphs.iter().try_for_each(|g| check(g, "topology.graphs"))
            }
            TopologySpec::RandomQscSwitching { period } if !(*period > 0.0) => {
                Err(invalid("topology.period", "must be positive"))
            }
            TopologySpec::Schedule { weights, .. } if weights.len() != n => {
                Err(invalid("topology.weights", format!("must be {n}x{n}")))
            }
            _ => Ok(()),
        }
    }

    /// Radius of the initial rotation ball in radians.
    pub fn rotation_radius(&self) -> f64 {
        match (self.init.rotation_radius, self.init.rotation_radius_factor) {
            (Some(r), _) => r,
            (None, Some(f)) => f * self.parameterization.r(),
            (None, None) => std::f64::consts::PI,
        }
    }

    /// Builds the switching schedule on `[0, end]`.
    pub fn build_schedule<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<SwitchingSchedule, SimError> {
        let (start, end) = (0.0, self.end_time().max(self.start_time + f64::EPSILON));
        let n = self.n;
        let sched = match &self.topology {
            TopologySpec::Fixed { adjacency } => SwitchingSchedule::constant(adjacency, start, end),
            TopologySpec::Complete => {
                SwitchingSchedule::constant(&Digraph::complete(n), start, end)
            }
            TopologySpec::RandomQsc => {
                let g = if n == 1 {
                    Digraph::complete(1)
                } else {
                    crate::topology::random_qsc_graph(n, rng)
                };
                SwitchingSchedule::constant(&g, start, end)
            }
            TopologySpec::RandomQscSwitching { period } => {
                if n == 1 {
                    SwitchingSchedule::constant(&Digraph::complete(1), start, end)
                } else {
                    SwitchingSchedule::random_qsc_switching(n, *period, start, end, rng)
                }
            }
            TopologySpec::Periodic { graphs, period } => {
                SwitchingSchedule::periodic(graphs, *period, start, end)
            }
            TopologySpec::Schedule {
                records,
                weights,
                dwell_floor,
            } => {
                if weights.len() != n || weights.iter().any(|row| row.len() != n) {
                    return Err(invalid("topology.weights", format!("must be {n}x{n}")));
                }
                let w = DMatrix::from_fn(n, n, |i, j| weights[i][j]);
                SwitchingSchedule::new(n, records, w, *dwell_floor, start, end)
            }
        };
        sched.map_err(|e| invalid("topology", e))
    }

    pub fn build_formation<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<FormationSpec> {
        match &self.formation {
            None => None,
            Some(FormationConfig::Targets { targets }) => Some(FormationSpec::new(
                targets
                    .iter()
                    .map(|t| Pose::new(exp_so3(&t.rotation), t.translation))
                    .collect(),
            )),
            Some(FormationConfig::Random {
                rotation_radius,
                translation_box,
            }) => Some(FormationSpec::new(
                (0..self.n)
                    .map(|_| {
                        let r = sample_rotation_ball(*rotation_radius, rng);
                        let t = Vec3::from_fn(|_, _| rng.random::<f64>() * translation_box);
                        Pose::new(r, t)
                    })
                    .collect(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
n = 3
mode = "kinematic"
law = "rot_rel"
companion_law = "trans_rel"
parameterization = "mrp"
horizon = 2.0
sample_rate = 10.0
seed = 7

[topology]
kind = "fixed"
adjacency = [[1, 1, 0], [0, 1, 1], [0, 0, 1]]

[init]
rotation_radius_factor = 0.45
"#;

    #[test]
    fn parses_sample_config() {
        let cfg = TrialConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.parameterization, Parameterization::ModifiedRodrigues);
        assert_eq!(
            cfg.laws(),
            vec![LawKind::RotRelative, LawKind::TransRelative]
        );
        let t = cfg.timing().unwrap();
        assert_eq!(t.samples, 20);
        assert_eq!(t.steps_per_sample, 1);
        assert!((cfg.rotation_radius() - 0.45 * std::f64::consts::PI).abs() < 1e-15);
        let back = TrialConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = SAMPLE.replace("seed = 7", "sead = 7");
        let err = TrialConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("sead"), "{err}");
    }

    #[test]
    fn rejects_mismatched_laws() {
        let bad = SAMPLE.replace(
            "companion_law = \"trans_rel\"",
            "companion_law = \"rot_abs\"",
        );
        let err = TrialConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("companion_law"), "{err}");
        let bad = SAMPLE.replace("mode = \"kinematic\"", "mode = \"dynamic\"");
        assert!(TrialConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_off_grid_timing() {
        let mut cfg = TrialConfig::from_toml_str(SAMPLE).unwrap();
        cfg.h = Some(0.03);
        assert!(cfg.validate().is_err());
        cfg.h = Some(0.025);
        assert_eq!(cfg.timing().unwrap().steps_per_sample, 4);
        cfg.horizon = 2.05;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn dynamic_defaults() {
        let cfg = TrialConfig::dynamic(2, LawKind::TorqueAbsolute, TopologySpec::Complete, 1.0);
        let t = cfg.timing().unwrap();
        assert_eq!(t.h, 1e-3);
        assert_eq!(t.steps_per_sample, 1);
        assert_eq!(t.samples, 1000);
        let mut noisy = cfg.clone();
        noisy.noise_magnitude = 0.1;
        assert!(noisy.validate().is_err());
    }

    #[test]
    fn wrong_graph_size_is_rejected() {
        let bad = SAMPLE.replace("n = 3", "n = 4");
        let err = TrialConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("topology"), "{err}");
    }
}
