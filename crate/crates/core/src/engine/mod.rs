//! Fixed-timestep world update.
//!
//! One call to [`step`] runs these phases in order:
//!
//! 1. store the per-effector assignment;
//! 2. advance every active drone along its path, scoring arrivals;
//! 3. redraw sensor noise, then for each effector slew toward its target's
//!    observed position, tick the weapon cycle and fire automatically when
//!    `Tracking` and `Ready`;
//! 4. compute the reward and the terminal flag.
//!
//! Firing lasts exactly one step; the following `ceil(T_recharge / dt)`
//! steps are `Charging`. Recharge proceeds whatever the kinematic state.

pub mod kinematics;
pub mod lethality;
pub mod replay;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::{self, SimRng};
use crate::scenario::{EffectorSpec, EpisodeSetup, ScenarioConfig};
use crate::sensing::{self, DroneTrack};

pub use kinematics::{aim_direction, miss_distance, slew_effector, Kinematic};
pub use lethality::{p_hit, PHitTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroneStatus {
    Active = 0,
    Neutralized = 1,
    Impacted = 2,
}

impl DroneStatus {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_active(self) -> bool {
        self == DroneStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weapon {
    Ready = 0,
    Firing = 1,
    Charging = 2,
}

impl Weapon {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_busy(self) -> bool {
        self != Weapon::Ready
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub index: usize,
    pub arc_position: f64,
    pub position: Vec3,
    pub status: DroneStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectorState {
    pub index: usize,
    pub azimuth: f64,
    pub elevation: f64,
    pub kinematic: Kinematic,
    pub weapon: Weapon,
    pub charge_steps_left: u32,
    pub assigned_drone: Option<usize>,
}

impl EffectorState {
    fn new(index: usize, spec: &EffectorSpec) -> Self {
        EffectorState {
            index,
            azimuth: 0.5 * (spec.az_limits[0] + spec.az_limits[1]),
            elevation: spec.el_limits[0],
            kinematic: Kinematic::Chasing,
            weapon: Weapon::Ready,
            charge_steps_left: 0,
            assigned_drone: None,
        }
    }

    /// Advance the weapon cycle by one step, before any firing decision.
    fn tick_weapon(&mut self, charge_steps: u32) {
        match self.weapon {
            Weapon::Ready => {}
            Weapon::Firing => {
                if charge_steps == 0 {
                    self.weapon = Weapon::Ready;
                } else {
                    self.weapon = Weapon::Charging;
                    self.charge_steps_left = charge_steps;
                }
            }
            Weapon::Charging => {
                self.charge_steps_left -= 1;
                if self.charge_steps_left == 0 {
                    self.weapon = Weapon::Ready;
                }
            }
        }
    }
}

/// Per-effector target drone indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn targets(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub step: u32,
    pub drone: usize,
    pub zone: Option<usize>,
    pub damage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireEvent {
    pub step: u32,
    pub effector: usize,
    pub drone: usize,
    pub miss_distance: f64,
    pub p_hit: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub raw_reward: f64,
    pub normalized_reward: f64,
    pub impacts: Vec<ImpactEvent>,
    pub neutralizations: Vec<usize>,
    pub fires: Vec<FireEvent>,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub step_index: u32,
    pub drones: Vec<DroneState>,
    pub effectors: Vec<EffectorState>,
    /// Sensor picture produced at the end of the latest step.
    pub tracks: Vec<DroneTrack>,
    pub cumulative_damage: f64,
    pub rng: SimRng,
}

impl SimState {
    pub fn active_count(&self) -> usize {
        self.drones.iter().filter(|d| d.status.is_active()).count()
    }

    pub fn statuses(&self) -> Vec<DroneStatus> {
        self.drones.iter().map(|d| d.status).collect()
    }

    fn observe(&mut self, setup: &EpisodeSetup, config: &ScenarioConfig) {
        for (track, (drone, spec)) in self
            .tracks
            .iter_mut()
            .zip(self.drones.iter().zip(&setup.drones))
        {
            track.observed_position =
                sensing::observe_position(&mut self.rng, drone.position, spec.size, &config.sensor);
            track.status = drone.status;
        }
    }
}

/// Fresh episode state: drones at the start of their paths, effectors at
/// mid-azimuth and minimum elevation, `Chasing`/`Ready`, unassigned.
///
/// Detected size and power labels are drawn here once, followed by the
/// first noisy position fix.
pub fn init_state(setup: &EpisodeSetup, config: &ScenarioConfig) -> SimState {
    let mut rng = rng::engine_rng(setup.seed);
    let drones: Vec<DroneState> = setup
        .drones
        .iter()
        .enumerate()
        .map(|(index, d)| DroneState {
            index,
            arc_position: 0.0,
            position: d.path[0],
            status: DroneStatus::Active,
        })
        .collect();
    let tracks = setup
        .drones
        .iter()
        .enumerate()
        .map(|(index, d)| DroneTrack {
            index,
            observed_position: d.path[0],
            detected_size: sensing::classify_size(&mut rng, d.size, &config.sensor),
            detected_power: sensing::classify_power(&mut rng, d.power, &config.sensor),
            status: DroneStatus::Active,
        })
        .collect();
    let effectors = config
        .effectors
        .iter()
        .enumerate()
        .map(|(i, spec)| EffectorState::new(i, spec))
        .collect();
    let mut state = SimState {
        step_index: 0,
        drones,
        effectors,
        tracks,
        cumulative_damage: 0.0,
        rng,
    };
    state.observe(setup, config);
    state
}

/// Point at arc length `s` along a piecewise-linear path. Waypoints are
/// returned exactly.
pub fn position_on_path(path: &[Vec3], s: f64) -> Vec3 {
    if s <= 0.0 {
        return path[0];
    }
    let mut acc = 0.0;
    for w in path.windows(2) {
        let seg = w[0].distance(w[1]);
        if s <= acc + seg {
            let t = (s - acc) / seg;
            return if t >= 1.0 { w[1] } else { w[0].lerp(w[1], t) };
        }
        acc += seg;
    }
    path[path.len() - 1]
}

/// Move an active drone `speed * dt` meters along its path. Reaching the
/// end clamps to the target point and marks the drone `Impacted`.
pub fn advance_drone(
    drone: &DroneState,
    dt: f64,
    speed: f64,
    path: &[Vec3],
    path_length: f64,
) -> DroneState {
    let arc = drone.arc_position + speed * dt;
    if arc >= path_length {
        DroneState {
            arc_position: path_length,
            position: path[path.len() - 1],
            status: DroneStatus::Impacted,
            ..drone.clone()
        }
    } else {
        DroneState {
            arc_position: arc,
            position: position_on_path(path, arc),
            ..drone.clone()
        }
    }
}

/// Fire `effector` at `drone`. A Bernoulli draw with the hit probability
/// of the true miss distance decides the outcome; either way the weapon
/// spends this step `Firing` and then recharges.
pub fn resolve_fire(
    rng: &mut SimRng,
    effector: &mut EffectorState,
    spec: &EffectorSpec,
    drone: &mut DroneState,
    config: &ScenarioConfig,
    step: u32,
) -> Result<FireEvent> {
    if effector.kinematic != Kinematic::Tracking || effector.weapon != Weapon::Ready {
        return Err(Error::Contract(format!(
            "effector {} cannot fire while {:?}/{:?}",
            effector.index, effector.kinematic, effector.weapon
        )));
    }
    if !drone.status.is_active() {
        return Err(Error::Contract(format!(
            "drone {} is not active",
            drone.index
        )));
    }
    let dir = aim_direction(effector.azimuth, effector.elevation);
    let miss = miss_distance(spec.position, dir, drone.position);
    let p = config.p_hit_table.p_hit(miss);
    let hit = rng.random::<f64>() < p;
    if hit {
        drone.status = DroneStatus::Neutralized;
    }
    effector.weapon = Weapon::Firing;
    effector.charge_steps_left = 0;
    Ok(FireEvent {
        step,
        effector: effector.index,
        drone: drone.index,
        miss_distance: miss,
        p_hit: p,
        hit,
    })
}

pub fn normalize_reward(raw_reward: f64, max_damage: f64) -> f64 {
    if max_damage > 0.0 {
        raw_reward / max_damage
    } else {
        0.0
    }
}

/// No active drone remains, or the step cap has been hit.
pub fn is_terminal(state: &SimState, config: &ScenarioConfig) -> bool {
    state.step_index >= config.max_steps || state.drones.iter().all(|d| !d.status.is_active())
}

pub fn validate_assignment(
    assignment: &Assignment,
    n_effectors: usize,
    n_drones: usize,
) -> Result<()> {
    if assignment.0.len() != n_effectors {
        return Err(Error::Contract(format!(
            "assignment has {} entries, expected {n_effectors}",
            assignment.0.len()
        )));
    }
    if let Some(&bad) = assignment.0.iter().find(|&&j| j >= n_drones) {
        return Err(Error::Contract(format!(
            "drone index {bad} out of range for {n_drones} drones"
        )));
    }
    Ok(())
}

/// Advance the world by one timestep.
pub fn step(
    state: &mut SimState,
    assignment: &Assignment,
    config: &ScenarioConfig,
    setup: &EpisodeSetup,
) -> Result<StepResult> {
    validate_assignment(assignment, state.effectors.len(), state.drones.len())?;
    if is_terminal(state, config) {
        return Err(Error::Contract("step called on a terminal state".into()));
    }
    let step_no = state.step_index + 1;
    let dt = config.dt;

    for (eff, &target) in state.effectors.iter_mut().zip(&assignment.0) {
        eff.assigned_drone = Some(target);
    }

    let mut impacts = Vec::new();
    for (drone, spec) in state.drones.iter_mut().zip(&setup.drones) {
        if !drone.status.is_active() {
            continue;
        }
        *drone = advance_drone(drone, dt, spec.speed, &spec.path, spec.path_length);
        if drone.status == DroneStatus::Impacted {
            let (zone, damage) = spec.impact_damage(&config.zones);
            impacts.push(ImpactEvent {
                step: step_no,
                drone: drone.index,
                zone,
                damage,
            });
        }
    }

    state.observe(setup, config);

    let mut fires = Vec::new();
    let mut neutralizations = Vec::new();
    for (eff, spec) in state.effectors.iter_mut().zip(&config.effectors) {
        let target = eff.assigned_drone.expect("assigned above");
        let aim_point = state.tracks[target].observed_position;
        let (az, el) = kinematics::desired_angles(spec, aim_point);
        let slew = slew_effector(eff.azimuth, eff.elevation, az, el, dt, spec);
        eff.azimuth = slew.azimuth;
        eff.elevation = slew.elevation;
        eff.kinematic = slew.kinematic;
        eff.tick_weapon(spec.charge_steps(dt));

        let drone = &mut state.drones[target];
        if eff.kinematic == Kinematic::Tracking
            && eff.weapon == Weapon::Ready
            && drone.status.is_active()
        {
            let ev = resolve_fire(&mut state.rng, eff, spec, drone, config, step_no)?;
            if ev.hit {
                neutralizations.push(target);
            }
            fires.push(ev);
        }
    }
    for (track, drone) in state.tracks.iter_mut().zip(&state.drones) {
        track.status = drone.status;
    }

    let damage: f64 = impacts.iter().map(|i| i.damage).sum();
    state.cumulative_damage += damage;
    state.step_index = step_no;
    let raw_reward = -damage;
    Ok(StepResult {
        raw_reward,
        normalized_reward: normalize_reward(raw_reward, setup.max_damage),
        impacts,
        neutralizations,
        fires,
        terminal: is_terminal(state, config),
    })
}
