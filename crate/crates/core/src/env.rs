//! Reset/step environment over the engine: sensing, frame stacking,
//! observation encoding and masking per decision.
//!
//! Both the in-process evaluator and the step server drive episodes through
//! [`Environment`], so rollouts through either path are identical.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::encoding::{self, ActionMask, FrameHistory, ObservationSpec};
use crate::engine::{
    self, replay::ReplayRecord, Assignment, FireEvent, ImpactEvent, Kinematic, SimState,
};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::policies::PolicyInput;
use crate::scenario::{sample_episode, EpisodeSetup, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub damage_pct: f64,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub mask: Vec<Vec<bool>>,
    pub reward: f64,
    pub terminated: bool,
    pub info: StepInfo,
}

/// Per-effector flags for one engine step, enough to compute the episode
/// metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub tracking: Vec<bool>,
    /// Weapon in `Firing` or `Charging`.
    pub busy: Vec<bool>,
}

#[derive(Debug, Clone)]
struct Episode {
    setup: EpisodeSetup,
    state: SimState,
    frames: FrameHistory,
    observed: VecDeque<Vec<Vec3>>,
    observation: Vec<f64>,
    mask: ActionMask,
    velocities: Vec<Vec3>,
    episode_return: f64,
    trace: Vec<TraceStep>,
    impacts: Vec<ImpactEvent>,
    fires: Vec<FireEvent>,
    replay: Option<Vec<ReplayRecord>>,
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: ScenarioConfig,
    spec: ObservationSpec,
    record_replay: bool,
    episode: Option<Episode>,
}

impl Environment {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let spec = ObservationSpec::from_config(&config);
        Ok(Environment {
            config,
            spec,
            record_replay: false,
            episode: None,
        })
    }

    /// Keep a replay record for every engine step of later episodes.
    pub fn with_replay(mut self, on: bool) -> Self {
        self.record_replay = on;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn spec(&self) -> &ObservationSpec {
        &self.spec
    }

    /// Sample the episode for `seed` and return the first observation.
    pub fn reset(&mut self, seed: u64) -> Transition {
        let setup = sample_episode(&self.config, seed);
        self.reset_with_setup(setup)
            .expect("sampled setup matches its own config")
    }

    pub fn reset_with_setup(&mut self, setup: EpisodeSetup) -> Result<Transition> {
        if setup.drones.len() != self.spec.n_drones {
            return Err(Error::Contract(format!(
                "setup has {} drones, config expects {}",
                setup.drones.len(),
                self.spec.n_drones
            )));
        }
        let state = engine::init_state(&setup, &self.config);
        let mut ep = Episode {
            setup,
            state,
            frames: FrameHistory::new(self.spec.stack_frames),
            observed: VecDeque::with_capacity(self.spec.stack_frames),
            observation: Vec::new(),
            mask: ActionMask::all_valid(0, 0),
            velocities: Vec::new(),
            episode_return: 0.0,
            trace: Vec::new(),
            impacts: Vec::new(),
            fires: Vec::new(),
            replay: self.record_replay.then(Vec::new),
        };
        self.refresh(&mut ep)?;
        let t = self.transition(&ep, 0.0);
        self.episode = Some(ep);
        Ok(t)
    }

    /// Apply one decision for `decision_interval` engine steps, stopping early
    /// at a terminal state. The reward is the summed normalized reward.
    pub fn step(&mut self, assignment: &Assignment) -> Result<Transition> {
        let mut ep = self
            .episode
            .take()
            .ok_or_else(|| Error::Contract("no active episode; send reset first".into()))?;
        let out = self.step_episode(&mut ep, assignment);
        self.episode = Some(ep);
        out
    }

    fn step_episode(&self, ep: &mut Episode, assignment: &Assignment) -> Result<Transition> {
        if engine::is_terminal(&ep.state, &self.config) {
            return Err(Error::Contract("episode has terminated; send reset".into()));
        }
        let mut reward = 0.0;
        for _ in 0..self.config.decision_interval {
            let result = engine::step(&mut ep.state, assignment, &self.config, &ep.setup)?;
            reward += result.normalized_reward;
            ep.trace.push(TraceStep {
                tracking: ep
                    .state
                    .effectors
                    .iter()
                    .map(|e| e.kinematic == Kinematic::Tracking)
                    .collect(),
                busy: ep
                    .state
                    .effectors
                    .iter()
                    .map(|e| e.weapon.is_busy())
                    .collect(),
            });
            if let Some(replay) = ep.replay.as_mut() {
                replay.push(ReplayRecord::capture(&ep.state, &result));
            }
            ep.impacts.extend(result.impacts);
            ep.fires.extend(result.fires);
            if result.terminal {
                break;
            }
        }
        ep.episode_return += reward;
        self.refresh(ep)?;
        Ok(self.transition(ep, reward))
    }

    /// Push the current sensor picture into the histories and re-encode.
    fn refresh(&self, ep: &mut Episode) -> Result<()> {
        let positions: Vec<Vec3> = ep
            .state
            .tracks
            .iter()
            .map(|t| t.observed_position)
            .collect();
        ep.frames.push(encoding::position_frame(
            positions.iter().copied(),
            &self.config.domain_box,
        ));
        if ep.observed.len() == self.spec.stack_frames.max(1) {
            ep.observed.pop_front();
        }
        ep.observed.push_back(positions);
        ep.velocities = estimate_velocities(
            &ep.observed,
            self.config.dt * f64::from(self.config.decision_interval),
        );
        ep.mask = encoding::action_mask(&ep.state);
        ep.observation = encoding::encode_observation(
            &ep.state.tracks,
            &ep.state.effectors,
            &self.config.effectors,
            &ep.frames,
            &self.spec,
        )?;
        Ok(())
    }

    fn transition(&self, ep: &Episode, reward: f64) -> Transition {
        Transition {
            observation: ep.observation.clone(),
            mask: ep.mask.rows(),
            reward,
            terminated: engine::is_terminal(&ep.state, &self.config),
            info: StepInfo {
                damage_pct: damage_pct(ep.state.cumulative_damage, ep.setup.max_damage),
                step: ep.state.step_index,
            },
        }
    }

    fn current(&self) -> Result<&Episode> {
        self.episode
            .as_ref()
            .ok_or_else(|| Error::Contract("no active episode; send reset first".into()))
    }

    pub fn is_terminal(&self) -> bool {
        self.episode
            .as_ref()
            .is_some_and(|ep| engine::is_terminal(&ep.state, &self.config))
    }

    /// What a policy sees for the pending decision.
    pub fn policy_input(&self) -> Result<PolicyInput<'_>> {
        let ep = self.current()?;
        Ok(PolicyInput {
            tracks: &ep.state.tracks,
            effectors: &ep.state.effectors,
            effector_specs: &self.config.effectors,
            mask: &ep.mask,
            zones: &self.config.zones,
            d_max: self.config.d_max,
            dt: self.config.dt,
            velocities: &ep.velocities,
            observation: &ep.observation,
        })
    }

    pub fn state(&self) -> Result<&SimState> {
        Ok(&self.current()?.state)
    }

    pub fn setup(&self) -> Result<&EpisodeSetup> {
        Ok(&self.current()?.setup)
    }

    pub fn mask(&self) -> Result<&ActionMask> {
        Ok(&self.current()?.mask)
    }

    pub fn episode_return(&self) -> Result<f64> {
        Ok(self.current()?.episode_return)
    }

    pub fn trace(&self) -> Result<&[TraceStep]> {
        Ok(&self.current()?.trace)
    }

    pub fn impacts(&self) -> Result<&[ImpactEvent]> {
        Ok(&self.current()?.impacts)
    }

    pub fn fires(&self) -> Result<&[FireEvent]> {
        Ok(&self.current()?.fires)
    }

    /// Replay records of the current episode, if recording is on.
    pub fn replay(&self) -> Result<Option<&[ReplayRecord]>> {
        Ok(self.current()?.replay.as_deref())
    }
}

/// `100 · realized / max`, or 0 when nothing could be damaged.
pub fn damage_pct(realized: f64, max_damage: f64) -> f64 {
    if max_damage > 0.0 {
        100.0 * realized / max_damage
    } else {
        0.0
    }
}

/// Finite difference between the newest and oldest observed positions.
/// Zero until two fixes exist.
pub fn estimate_velocities(history: &VecDeque<Vec<Vec3>>, interval: f64) -> Vec<Vec3> {
    let (Some(oldest), Some(newest)) = (history.front(), history.back()) else {
        return Vec::new();
    };
    let span = (history.len() - 1) as f64 * interval;
    newest
        .iter()
        .zip(oldest)
        .map(|(&n, &o)| {
            if span > 0.0 {
                (n - o) * (1.0 / span)
            } else {
                Vec3::default()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::random_policy;
    use crate::rng;

    #[test]
    fn reset_is_deterministic_and_shaped() {
        let mut a = Environment::new(ScenarioConfig::default()).unwrap();
        let mut b = Environment::new(ScenarioConfig::default()).unwrap();
        let ta = a.reset(7);
        let tb = b.reset(7);
        assert_eq!(ta, tb);
        assert_eq!(ta.observation.len(), 924);
        assert_eq!(ta.mask.len(), 4);
        assert!(ta
            .mask
            .iter()
            .all(|r| r.len() == 50 && r.iter().all(|&v| v)));
        assert_eq!(ta.info.step, 0);
        assert_eq!(ta.reward, 0.0);
        assert!(!ta.terminated);
        assert!(a
            .policy_input()
            .unwrap()
            .velocities
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn step_before_reset_and_after_terminal_fail() {
        let c = ScenarioConfig {
            max_steps: 3,
            ..Default::default()
        };
        let mut env = Environment::new(c).unwrap();
        assert!(env.step(&Assignment(vec![0; 4])).is_err());
        env.reset(1);
        for _ in 0..3 {
            env.step(&Assignment(vec![0; 4])).unwrap();
        }
        assert!(env.is_terminal());
        let err = env.step(&Assignment(vec![0; 4])).unwrap_err().to_string();
        assert!(err.contains("reset"), "{err}");
        assert_eq!(env.trace().unwrap().len(), 3);
    }

    #[test]
    fn return_tracks_damage() {
        let mut env = Environment::new(ScenarioConfig::default()).unwrap();
        env.reset(3);
        let mut r = rng::policy_rng(3);
        let mut last = None;
        while !env.is_terminal() {
            let a = random_policy(&env.policy_input().unwrap(), &mut r);
            last = Some(env.step(&a).unwrap());
        }
        let last = last.unwrap();
        let ret = env.episode_return().unwrap();
        assert!((-1.0..=0.0).contains(&ret));
        assert!((last.info.damage_pct + 100.0 * ret).abs() < 1e-9);
    }

    #[test]
    fn decision_interval_groups_engine_steps() {
        let c = ScenarioConfig {
            decision_interval: 3,
            ..Default::default()
        };
        let mut env = Environment::new(c).unwrap().with_replay(true);
        env.reset(2);
        let t = env.step(&Assignment(vec![0, 1, 2, 3])).unwrap();
        assert_eq!(t.info.step, 3);
        assert_eq!(env.replay().unwrap().unwrap().len(), 3);
        assert_eq!(env.trace().unwrap().len(), 3);
    }

    #[test]
    fn velocities_from_position_history() {
        let mut h = VecDeque::new();
        h.push_back(vec![Vec3::new(0.0, 0.0, 0.0)]);
        assert_eq!(estimate_velocities(&h, 0.1), vec![Vec3::default()]);
        h.push_back(vec![Vec3::new(1.0, 0.0, 0.0)]);
        h.push_back(vec![Vec3::new(2.0, -1.0, 0.5)]);
        let v = estimate_velocities(&h, 0.1)[0];
        assert!((v - Vec3::new(10.0, -5.0, 2.5)).norm() < 1e-12);
    }

    #[test]
    fn damage_pct_handles_zero_max() {
        assert_eq!(damage_pct(0.0, 0.0), 0.0);
        assert_eq!(damage_pct(3.0, 12.0), 25.0);
    }
}
