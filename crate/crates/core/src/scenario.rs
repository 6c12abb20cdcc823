//! Static scenario configuration and seeded per-episode swarm sampling.
//!
//! A scenario is a single JSON document. Fields that have no published
//! value (the neutralization curve, tracking tolerance, decision interval,
//! episode cap, frame stack depth and the heuristic saturation distance)
//! fall back to defaults when absent.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::lethality::PHitTable;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::rng::{self, SimRng};

const PMF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Large];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerClass {
    Low,
    Medium,
    High,
}

impl PowerClass {
    pub const ALL: [PowerClass; 3] = [PowerClass::Low, PowerClass::Medium, PowerClass::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    /// Explosive multiplier: Low 1, Medium 2, High 3.
    pub fn scalar(self) -> f64 {
        (self.index() + 1) as f64
    }
}

/// Circular high-value area on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub center: Vec3,
    pub radius: f64,
    pub value: f64,
}

impl Zone {
    pub fn contains(&self, p: Vec3) -> bool {
        self.center.horizontal_distance(p) <= self.radius
    }
}

/// Index of the zone a ground point falls into. Overlaps resolve to the
/// most valuable zone, then the lowest index.
pub fn zone_at(zones: &[Zone], p: Vec3) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, z) in zones.iter().enumerate() {
        if z.contains(p) && best.is_none_or(|b| z.value > zones[b].value) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectorSpec {
    pub position: Vec3,
    pub az_limits: [f64; 2],
    pub el_limits: [f64; 2],
    pub az_rate_max: f64,
    pub el_rate_max: f64,
    pub recharge_time: f64,
    #[serde(default = "default_track_tolerance")]
    pub track_tolerance: f64,
}

impl EffectorSpec {
    /// Whether the azimuth range covers the full circle, so slewing may wrap.
    pub fn az_wraps(&self) -> bool {
        self.az_limits[1] - self.az_limits[0] >= 2.0 * PI - 1e-9
    }

    /// Number of steps spent in `Charging` after each shot.
    pub fn charge_steps(&self, dt: f64) -> u32 {
        // The epsilon keeps 0.5 / 0.1 from rounding up to 6.
        ((self.recharge_time / dt) - 1e-9).ceil().max(0.0) as u32
    }
}

/// Per-class values keyed by size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BySize {
    pub small: f64,
    pub medium: f64,
    pub large: f64,
}

impl BySize {
    pub fn get(&self, s: SizeClass) -> f64 {
        match s {
            SizeClass::Small => self.small,
            SizeClass::Medium => self.medium,
            SizeClass::Large => self.large,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.small, self.medium, self.large]
    }
}

/// Per-class values keyed by explosive power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ByPower {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl ByPower {
    pub fn to_array(self) -> [f64; 3] {
        [self.low, self.medium, self.high]
    }
}

/// Row-stochastic matrix, row = true class, column = detected class.
pub type ConfusionMatrix = [[f64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub pos_sigma_by_size: BySize,
    pub size_confusion: ConfusionMatrix,
    pub power_confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedBin {
    pub speed: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneTargetRule {
    /// Area-uniform over the target box footprint, zone discs included.
    #[default]
    UniformOverTargetVolumeAndZones,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmDistributions {
    pub n_drones: usize,
    pub speed_pmf: Vec<SpeedBin>,
    pub size_pmf: BySize,
    pub power_pmf: ByPower,
    #[serde(default = "default_waypoint_range")]
    pub waypoint_count_range: [usize; 2],
    #[serde(default)]
    pub zone_target_rule: ZoneTargetRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub domain_box: Aabb,
    pub target_box: Aabb,
    pub spawn_box: Aabb,
    pub dt: f64,
    pub zones: Vec<Zone>,
    pub effectors: Vec<EffectorSpec>,
    pub sensor: SensorSpec,
    pub swarm: SwarmDistributions,
    #[serde(default)]
    pub p_hit_table: PHitTable,
    #[serde(default = "default_decision_interval")]
    pub decision_interval: u32,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default = "default_stack_frames")]
    pub stack_frames: usize,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
}

fn default_track_tolerance() -> f64 {
    0.01
}
fn default_waypoint_range() -> [usize; 2] {
    [1, 3]
}
fn default_decision_interval() -> u32 {
    1
}
fn default_max_steps() -> u32 {
    1200
}
fn default_stack_frames() -> usize {
    4
}
fn default_d_max() -> f64 {
    100.0
}

impl Default for ScenarioConfig {
    /// The reference study: 3 zones, 50 drones, 4 effectors.
    fn default() -> Self {
        let effector = |y: f64| EffectorSpec {
            position: Vec3::new(0.0, y, 0.0),
            az_limits: [-PI, PI],
            el_limits: [0.0, FRAC_PI_2],
            az_rate_max: FRAC_PI_2,
            el_rate_max: FRAC_PI_3,
            recharge_time: 0.5,
            track_tolerance: default_track_tolerance(),
        };
        let zone = |x: f64, y: f64, radius: f64, value: f64| Zone {
            center: Vec3::new(x, y, 0.0),
            radius,
            value,
        };
        ScenarioConfig {
            domain_box: Aabb::new(
                Vec3::new(-100.0, -100.0, 0.0),
                Vec3::new(100.0, 100.0, 50.0),
            ),
            target_box: Aabb::new(Vec3::new(-100.0, -100.0, 0.0), Vec3::new(0.0, 100.0, 50.0)),
            spawn_box: Aabb::new(Vec3::new(95.0, -100.0, 25.0), Vec3::new(100.0, 100.0, 50.0)),
            dt: 0.1,
            zones: vec![
                zone(-30.0, -50.0, 10.0, 2.0),
                zone(-30.0, 50.0, 30.0, 5.0),
                zone(-60.0, -10.0, 20.0, 10.0),
            ],
            effectors: vec![
                effector(-60.0),
                effector(-20.0),
                effector(20.0),
                effector(60.0),
            ],
            sensor: SensorSpec {
                pos_sigma_by_size: BySize {
                    small: 0.75,
                    medium: 0.5,
                    large: 0.25,
                },
                size_confusion: [[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]],
                power_confusion: [[0.8, 0.1, 0.1], [0.3, 0.4, 0.3], [0.1, 0.2, 0.7]],
            },
            swarm: SwarmDistributions {
                n_drones: 50,
                speed_pmf: vec![
                    SpeedBin {
                        speed: 10.0,
                        probability: 0.4,
                    },
                    SpeedBin {
                        speed: 20.0,
                        probability: 0.4,
                    },
                    SpeedBin {
                        speed: 30.0,
                        probability: 0.2,
                    },
                ],
                size_pmf: BySize {
                    small: 0.3,
                    medium: 0.4,
                    large: 0.3,
                },
                power_pmf: ByPower {
                    low: 0.6,
                    medium: 0.3,
                    high: 0.1,
                },
                waypoint_count_range: default_waypoint_range(),
                zone_target_rule: ZoneTargetRule::default(),
            },
            p_hit_table: PHitTable::default(),
            decision_interval: default_decision_interval(),
            max_steps: default_max_steps(),
            stack_frames: default_stack_frames(),
            d_max: default_d_max(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn check_pmf(name: &str, probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid(format!("{name} entries must lie in [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(invalid(format!("{name} must sum to 1 (got {total})")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn n_drones(&self) -> usize {
        self.swarm.n_drones
    }

    pub fn n_effectors(&self) -> usize {
        self.effectors.len()
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("domain_box", &self.domain_box),
            ("target_box", &self.target_box),
            ("spawn_box", &self.spawn_box),
        ] {
            if !b.is_ordered() {
                return Err(invalid(format!(
                    "{name} min corner must not exceed max corner"
                )));
            }
        }
        if !self.domain_box.contains_box(&self.spawn_box) {
            return Err(invalid("spawn_box must lie inside domain_box"));
        }
        if !self.domain_box.contains_box(&self.target_box) {
            return Err(invalid("target_box must lie inside domain_box"));
        }
        if !(self.target_box.min.z <= 0.0 && 0.0 <= self.target_box.max.z) {
            return Err(invalid("target_box must include the ground plane z = 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        if self.max_steps < 1 {
            return Err(invalid("max_steps must be at least 1"));
        }
        if self.stack_frames < 1 {
            return Err(invalid("stack_frames must be at least 1"));
        }
        if self.decision_interval < 1 {
            return Err(invalid("decision_interval must be at least 1"));
        }
        if !(self.d_max > 0.0) {
            return Err(invalid("d_max must be positive"));
        }
        self.p_hit_table.validate()?;

        if self.zones.is_empty() {
            return Err(invalid("at least one zone is required"));
        }
        let tb = &self.target_box;
        for (i, z) in self.zones.iter().enumerate() {
            if !(z.radius > 0.0) {
                return Err(invalid(format!("zone {i}: radius must be positive")));
            }
            if !(z.value > 0.0) {
                return Err(invalid(format!("zone {i}: value must be positive")));
            }
            if z.center.z != 0.0 {
                return Err(invalid(format!(
                    "zone {i}: center must lie on the ground (z = 0)"
                )));
            }
            let c = z.center;
            if c.x - z.radius < tb.min.x
                || c.x + z.radius > tb.max.x
                || c.y - z.radius < tb.min.y
                || c.y + z.radius > tb.max.y
            {
                return Err(invalid(format!(
                    "zone {i}: circle must lie inside the target_box footprint"
                )));
            }
        }

        if self.effectors.is_empty() {
            return Err(invalid("at least one effector is required"));
        }
        for (i, e) in self.effectors.iter().enumerate() {
            if !(e.az_rate_max > 0.0 && e.el_rate_max > 0.0) {
                return Err(invalid(format!(
                    "effector {i}: slew rates must be positive"
                )));
            }
            if !(e.recharge_time >= 0.0) {
                return Err(invalid(format!(
                    "effector {i}: recharge_time must be non-negative"
                )));
            }
            if !(e.az_limits[0] < e.az_limits[1] && e.el_limits[0] < e.el_limits[1]) {
                return Err(invalid(format!(
                    "effector {i}: angle limits must be ordered"
                )));
            }
            if e.az_limits[1] - e.az_limits[0] > 2.0 * PI + 1e-9 {
                return Err(invalid(format!(
                    "effector {i}: azimuth range exceeds a full turn"
                )));
            }
            if !(e.track_tolerance > 0.0) {
                return Err(invalid(format!(
                    "effector {i}: track_tolerance must be positive"
                )));
            }
        }

        let s = &self.sensor;
        if s.pos_sigma_by_size.to_array().iter().any(|&v| !(v > 0.0)) {
            return Err(invalid(
                "position noise sigma must be positive for every size",
            ));
        }
        for (name, m) in [
            ("size_confusion", &s.size_confusion),
            ("power_confusion", &s.power_confusion),
        ] {
            for (r, row) in m.iter().enumerate() {
                check_pmf(&format!("{name} row {r}"), row)?;
            }
        }

        let w = &self.swarm;
        if w.n_drones < 1 {
            return Err(invalid("n_drones must be at least 1"));
        }
        if w.speed_pmf.is_empty() {
            return Err(invalid("speed_pmf must not be empty"));
        }
        if w.speed_pmf.iter().any(|b| !(b.speed > 0.0)) {
            return Err(invalid("speed_pmf speeds must be positive"));
        }
        let speed_probs: Vec<f64> = w.speed_pmf.iter().map(|b| b.probability).collect();
        check_pmf("speed_pmf", &speed_probs)?;
        check_pmf("size_pmf", &w.size_pmf.to_array())?;
        check_pmf("power_pmf", &w.power_pmf.to_array())?;
        if w.waypoint_count_range[0] > w.waypoint_count_range[1] {
            return Err(invalid("waypoint_count_range must be ordered"));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::parse(&e))?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_scenario(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub speed: f64,
    pub size: SizeClass,
    pub power: PowerClass,
    pub target: Vec3,
    /// Spawn point, intermediate waypoints, target.
    pub path: Vec<Vec3>,
    pub path_length: f64,
}

impl DroneSpec {
    /// Damage dealt on arrival: power scalar times the value of the zone
    /// hit, zero outside every zone.
    pub fn impact_damage(&self, zones: &[Zone]) -> (Option<usize>, f64) {
        match zone_at(zones, self.target) {
            Some(z) => (Some(z), self.power.scalar() * zones[z].value),
            None => (None, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub seed: u64,
    pub drones: Vec<DroneSpec>,
    pub max_damage: f64,
}

impl EpisodeSetup {
    /// Assemble a setup from explicit drones, computing `max_damage`.
    pub fn from_drones(seed: u64, drones: Vec<DroneSpec>, zones: &[Zone]) -> Self {
        let max_damage = drones.iter().map(|d| d.impact_damage(zones).1).sum();
        EpisodeSetup {
            seed,
            drones,
            max_damage,
        }
    }
}

pub fn path_length(path: &[Vec3]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

fn uniform_in(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn sample_point(rng: &mut SimRng, b: &Aabb) -> Vec3 {
    let x = uniform_in(rng, b.min.x, b.max.x);
    let y = uniform_in(rng, b.min.y, b.max.y);
    let z = uniform_in(rng, b.min.z, b.max.z);
    Vec3::new(x, y, z)
}

fn sample_target(rng: &mut SimRng, config: &ScenarioConfig) -> Vec3 {
    match config.swarm.zone_target_rule {
        // Zones lie inside the footprint, so area-uniform over the union of
        // discs and the remaining footprint is uniform over the footprint.
        ZoneTargetRule::UniformOverTargetVolumeAndZones => {
            let b = &config.target_box;
            let x = uniform_in(rng, b.min.x, b.max.x);
            let y = uniform_in(rng, b.min.y, b.max.y);
            Vec3::new(x, y, 0.0)
        }
    }
}

/// Piecewise-linear path from `spawn` to `target` through randomly placed
/// intermediate waypoints whose x coordinates progress monotonically
/// toward the target.
pub fn sample_trajectory(
    rng: &mut SimRng,
    spawn: Vec3,
    target: Vec3,
    config: &ScenarioConfig,
) -> Vec<Vec3> {
    let [lo, hi] = config.swarm.waypoint_count_range;
    let count = rng.random_range(lo..=hi);
    let d = &config.domain_box;

    let (x_near, x_far) = if spawn.x <= target.x {
        (spawn.x, target.x)
    } else {
        (target.x, spawn.x)
    };
    let mut xs: Vec<f64> = (0..count).map(|_| uniform_in(rng, x_near, x_far)).collect();
    if spawn.x > target.x {
        xs.sort_by(|a, b| b.total_cmp(a));
    } else {
        xs.sort_by(|a, b| a.total_cmp(b));
    }

    let mut path = Vec::with_capacity(count + 2);
    path.push(spawn);
    for x in xs {
        let y = uniform_in(rng, d.min.y, d.max.y);
        let z = uniform_in(rng, d.min.z.max(0.0), d.max.z);
        let wp = Vec3::new(x, y, z);
        if path.last() != Some(&wp) {
            path.push(wp);
        }
    }
    if path.last() != Some(&target) {
        path.push(target);
    }
    path
}

/// Sample the randomized swarm for one episode. Equal `(config, seed)`
/// pairs always produce identical setups.
pub fn sample_episode(config: &ScenarioConfig, seed: u64) -> EpisodeSetup {
    let mut rng = rng::setup_rng(seed);
    let speed_probs: Vec<f64> = config
        .swarm
        .speed_pmf
        .iter()
        .map(|b| b.probability)
        .collect();
    let size_probs = config.swarm.size_pmf.to_array();
    let power_probs = config.swarm.power_pmf.to_array();

    let drones = (0..config.swarm.n_drones)
        .map(|_| {
            let speed = config.swarm.speed_pmf[rng::categorical(&mut rng, &speed_probs)].speed;
            let size = SizeClass::from_index(rng::categorical(&mut rng, &size_probs));
            let power = PowerClass::from_index(rng::categorical(&mut rng, &power_probs));
            let spawn = sample_point(&mut rng, &config.spawn_box);
            let target = sample_target(&mut rng, config);
            let path = sample_trajectory(&mut rng, spawn, target, config);
            DroneSpec {
                speed,
                size,
                power,
                target,
                path_length: path_length(&path),
                path,
            }
        })
        .collect();
    EpisodeSetup::from_drones(seed, drones, &config.zones)
}
