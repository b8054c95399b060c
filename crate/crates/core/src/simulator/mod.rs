//! Closed-loop simulation under switching topologies.
//!
//! Controls are recomputed on the sampling grid and held in between. In
//! kinematic mode the held twist is integrated exactly; in dynamic mode the
//! rigid-body equations are integrated with a geometric Runge–Kutta step.
//! Switch times are snapped to the first grid point at or after them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::Serialize;
use thiserror::Error;

use crate::controllers::{ControlError, DynamicParams, LawKind};
use crate::se3::{FormationSpec, Pose, Twist};
use crate::so3::{
    exp_so3, sample_rotation_ball, Parameterization, Rotation, Vec3, ORTHONORMAL_TOL,
};
use crate::topology::{Digraph, SwitchingSchedule, TopologyError};

pub mod config;
pub mod controls;
pub mod integrate;
pub mod monte_carlo;
pub mod noise;

pub use config::*;
pub use controls::{Control, ErrorVars};
pub use integrate::{step_dynamic, step_kinematic, AgentState};
pub use monte_carlo::*;
pub use noise::*;

/// Any state norm above this marks the trial as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e9;
/// Steps between orthonormality checks of the rotations.
pub const REPROJECT_EVERY: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How a trial ended.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// A state norm exceeded [`DIVERGENCE_THRESHOLD`] at time `t`.
    Diverged {
        t: f64,
    },
    /// A law could not be evaluated at time `t`.
    LeftChart {
        t: f64,
        agent: usize,
        reason: String,
    },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, Outcome::Diverged { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Diverged { .. } => "diverged",
            Outcome::LeftChart { .. } => "left_chart",
        }
    }
}

/// State of one agent at a grid point, with the input applied from there on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgentRecord {
    pub pose: Pose,
    pub omega: Vec3,
    pub v: Vec3,
    pub control: Control,
    pub errors: ErrorVars,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
}

impl Snapshot {
    pub fn poses(&self) -> Vec<Pose> {
        self.agents.iter().map(|a| a.pose).collect()
    }
}

/// An effective neighborhood change, logged at the grid time it takes effect.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub agent: usize,
    pub neighbors: Vec<usize>,
}

/// Recorded trajectory of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trace {
    pub n: usize,
    pub mode: Mode,
    pub laws: Vec<LawKind>,
    pub parameterization: Parameterization,
    pub seed: u64,
    pub h: f64,
    pub sample_period: f64,
    pub targets: Option<FormationSpec>,
    pub dyn_params: Option<DynamicParams>,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<SwitchEvent>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("a trace holds at least one snapshot")
    }

    /// Poses in the formation frame, `G̃_i = G_i G_i*⁻¹`; the poses themselves
    /// without a formation.
    pub fn tilde_poses(&self, snap: &Snapshot) -> Vec<Pose> {
        let poses = snap.poses();
        match &self.targets {
            Some(spec) => crate::controllers::formation_poses(&poses, spec),
            None => poses,
        }
    }
}

fn ball_sample<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Vec3 {
    if radius == 0.0 {
        return Vec3::zeros();
    }
    let d: [f64; 3] = UnitSphere.sample(rng);
    radius * rng.random::<f64>().cbrt() * Vec3::from(d)
}

/// A running trial.
pub struct Simulation {
    cfg: TrialConfig,
    timing: Timing,
    schedule: SwitchingSchedule,
    spec: FormationSpec,
    has_formation: bool,
    params: Option<DynamicParams>,
    noise_rng: ChaCha8Rng,
    states: Vec<AgentState>,
    records: Vec<AgentRecord>,
    graph: Digraph,
    sample: usize,
    steps: u64,
    outcome: Option<Outcome>,
    settled: bool,
    events: Vec<SwitchEvent>,
}

impl Simulation {
    /// Validates `cfg`, draws the topology, targets and initial states and
    /// evaluates the controls at the first grid point.
    pub fn new(cfg: TrialConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let timing = cfg.timing()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut noise_rng = rng.clone();
        noise_rng.set_stream(1);
        let schedule = cfg.build_schedule(&mut rng)?;
        let formation = cfg.build_formation(&mut rng);
        let has_formation = formation.is_some();
        let spec = formation.unwrap_or_else(|| FormationSpec::new(vec![Pose::identity(); cfg.n]));
        let params = (cfg.mode == Mode::Dynamic).then(|| cfg.dynamics.params());

        let radius = cfg.rotation_radius();
        let poses: Vec<Pose> = match &cfg.init.agents {
            Some(agents) => agents
                .iter()
                .map(|a| Pose::new(exp_so3(&a.rotation), a.translation))
                .collect(),
            None => (0..cfg.n)
                .map(|_| {
                    let r = if radius > 0.0 {
                        sample_rotation_ball(radius, &mut rng)
                    } else {
                        Rotation::identity()
                    };
                    let t = Vec3::from_fn(|_, _| rng.random::<f64>() * cfg.init.translation_box);
                    Pose::new(r, t)
                })
                .collect(),
        };
        let graph = Self::graph_for(&schedule, &cfg, &timing, 0)?;
        let mut sim = Simulation {
            states: poses.iter().map(|p| AgentState::kinematic(*p)).collect(),
            records: Vec::new(),
            events: Vec::new(),
            cfg,
            timing,
            schedule,
            spec,
            has_formation,
            params,
            noise_rng,
            graph,
            sample: 0,
            steps: 0,
            outcome: None,
            settled: false,
        };
        if let Some(params) = params {
            let n = sim.cfg.n;
            let wb: Vec<Vec3> = (0..n)
                .map(|_| ball_sample(sim.cfg.init.velocity_error_radius, &mut rng))
                .collect();
            let vb: Vec<Vec3> = (0..n)
                .map(|_| ball_sample(sim.cfg.init.linear_velocity_error_radius, &mut rng))
                .collect();
            let derived = controls::velocities_from_errors(
                &poses,
                &sim.graph,
                &sim.cfg.laws(),
                sim.cfg.parameterization,
                &sim.spec,
                &wb,
                &vb,
            );
            let derived = match derived {
                Ok(d) => d,
                Err(f) => {
                    sim.fail(f);
                    vec![Twist::zero(); n]
                }
            };
            for i in 0..n {
                let explicit = sim.cfg.init.agents.as_ref().map(|a| &a[i]);
                let omega = explicit.and_then(|a| a.omega).unwrap_or(derived[i].omega);
                let v = explicit.and_then(|a| a.v).unwrap_or(derived[i].v);
                sim.states[i] = AgentState::dynamic(poses[i], omega, v, params);
            }
        }
        sim.log_events(None);
        if sim.outcome.is_none() {
            sim.update_controls();
        } else {
            sim.records = sim.zero_records();
        }
        Ok(sim)
    }

    fn graph_for(
        schedule: &SwitchingSchedule,
        cfg: &TrialConfig,
        timing: &Timing,
        k: usize,
    ) -> Result<Digraph, SimError> {
        let t = cfg.start_time + k as f64 * timing.sample_period;
        let query = (t + 1e-9 * timing.sample_period).min(schedule.end());
        Ok(schedule.graph_at(query)?)
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    pub fn timing(&self) -> Timing {
        self.timing
    }

    pub fn schedule(&self) -> &SwitchingSchedule {
        &self.schedule
    }

    pub fn time(&self) -> f64 {
        self.cfg.start_time + self.sample as f64 * self.timing.sample_period
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    /// Inputs held over the current sample interval.
    pub fn controls(&self) -> Vec<Control> {
        self.records.iter().map(|r| r.control).collect()
    }

    pub fn outcome(&self) -> Option<&Outcome> {
        self.outcome.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some() || self.settled || self.sample >= self.timing.samples
    }

    fn consensus_below(&self, tol: f64) -> bool {
        let poses: Vec<Pose> = self.states.iter().map(|s| s.pose).collect();
        let tilde = if self.has_formation {
            crate::controllers::formation_poses(&poses, &self.spec)
        } else {
            poses
        };
        let t: Vec<Vec3> = tilde.iter().map(|p| p.t).collect();
        crate::analysis::rotation_consensus_error(&tilde).is_ok_and(|e| e < tol)
            && crate::analysis::translation_consensus_error(&t) < tol
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.time(),
            agents: self.records.clone(),
        }
    }

    fn fail(&mut self, f: controls::ChartFailure) {
        self.outcome = Some(Outcome::LeftChart {
            t: self.time(),
            agent: f.agent,
            reason: f.error.to_string(),
        });
    }

    fn zero_records(&self) -> Vec<AgentRecord> {
        self.states
            .iter()
            .map(|s| AgentRecord {
                pose: s.pose,
                omega: s.omega,
                v: s.v,
                control: Control::default(),
                errors: ErrorVars::default(),
            })
            .collect()
    }

    fn log_events(&mut self, previous: Option<&Digraph>) {
        let t = self.time();
        for i in 0..self.cfg.n {
            let nb = self.graph.neighbor_indices(i);
            if previous.is_none_or(|p| p.neighbor_indices(i) != nb) {
                self.events.push(SwitchEvent {
                    t,
                    agent: i,
                    neighbors: nb,
                });
            }
        }
    }

    /// Evaluates the laws at the current grid point.
    fn update_controls(&mut self) {
        let laws = self.cfg.laws();
        let p = self.cfg.parameterization;
        match self.cfg.mode {
            Mode::Kinematic => {
                let poses: Vec<Pose> = self.states.iter().map(|s| s.pose).collect();
                let (g, noise, rng) = (&self.graph, self.cfg.noise_magnitude, &mut self.noise_rng);
                let result = if self.has_formation {
                    crate::controllers::kinematic_formation(&poses, &self.spec, |tilde| {
                        controls::kinematic_twists(tilde, g, &laws, p, noise, rng)
                    })
                } else {
                    controls::kinematic_twists(&poses, g, &laws, p, noise, rng)
                };
                match result {
                    Ok(twists) => {
                        for (s, xi) in self.states.iter_mut().zip(&twists) {
                            s.omega = xi.omega;
                            s.v = xi.v;
                        }
                        self.records = self
                            .states
                            .iter()
                            .map(|s| AgentRecord {
                                pose: s.pose,
                                omega: s.omega,
                                v: s.v,
                                control: Control {
                                    rot: s.omega,
                                    trans: s.v,
                                },
                                errors: ErrorVars::default(),
                            })
                            .collect();
                    }
                    Err(f) => {
                        self.fail(f);
                        self.records = self.zero_records();
                    }
                }
            }
            Mode::Dynamic => {
                let params = self.params.expect("dynamic mode has parameters");
                match controls::dynamic_wrenches(
                    &self.states,
                    &self.graph,
                    &laws,
                    p,
                    &params,
                    &self.spec,
                ) {
                    Ok(out) => {
                        self.records = self
                            .states
                            .iter()
                            .zip(out)
                            .map(|(s, (control, errors))| AgentRecord {
                                pose: s.pose,
                                omega: s.omega,
                                v: s.v,
                                control,
                                errors,
                            })
                            .collect();
                    }
                    Err(f) => {
                        self.fail(f);
                        self.records = self.zero_records();
                    }
                }
            }
        }
    }

    /// Advances to the next grid point. Returns `false` once the trial is over.
    pub fn advance(&mut self) -> Result<bool, SimError> {
        if self.is_finished() {
            return Ok(false);
        }
        let h = self.timing.h;
        let controls = self.controls();
        for _ in 0..self.timing.steps_per_sample {
            for (s, u) in self.states.iter_mut().zip(&controls) {
                *s = match self.cfg.mode {
                    Mode::Kinematic => step_kinematic(s, &Twist::new(u.rot, u.trans), h),
                    Mode::Dynamic => step_dynamic(s, &u.rot, &u.trans, h),
                };
            }
            self.steps += 1;
            if self.steps % REPROJECT_EVERY == 0 {
                for s in &mut self.states {
                    if s.pose.r.residual() > ORTHONORMAL_TOL {
                        s.pose = s.pose.reproject();
                    }
                }
            }
        }
        self.sample += 1;
        if self
            .states
            .iter()
            .any(|s| s.magnitude() > DIVERGENCE_THRESHOLD)
        {
            self.outcome = Some(Outcome::Diverged { t: self.time() });
            self.records = self.zero_records();
            return Ok(false);
        }
        let previous = std::mem::replace(
            &mut self.graph,
            Self::graph_for(&self.schedule, &self.cfg, &self.timing, self.sample)?,
        );
        self.log_events(Some(&previous));
        self.update_controls();
        if let Some(tol) = self.cfg.stop_tolerance {
            self.settled = self.outcome.is_none() && self.consensus_below(tol);
        }
        Ok(!self.is_finished())
    }

    /// Runs to the horizon (or until the trial fails) and returns the trace.
    pub fn run(mut self) -> Result<Trace, SimError> {
        let stride = self.cfg.record_stride;
        let mut snapshots = vec![self.snapshot()];
        while !self.is_finished() {
            self.advance()?;
            if self.sample % stride == 0 || self.is_finished() {
                snapshots.push(self.snapshot());
            }
        }
        Ok(Trace {
            n: self.cfg.n,
            mode: self.cfg.mode,
            laws: self.cfg.laws(),
            parameterization: self.cfg.parameterization,
            seed: self.cfg.seed,
            h: self.timing.h,
            sample_period: self.timing.sample_period,
            targets: self.has_formation.then(|| self.spec.clone()),
            dyn_params: self.params,
            snapshots,
            events: self.events,
            outcome: self.outcome.unwrap_or(Outcome::Completed),
        })
    }
}

/// Runs one trial to completion.
pub fn run_trial(cfg: &TrialConfig) -> Result<Trace, SimError> {
    Simulation::new(cfg.clone())?.run()
}

impl From<ControlError> for SimError {
    fn from(e: ControlError) -> Self {
        SimError::ConfigInvalid(e.to_string())
    }
}
