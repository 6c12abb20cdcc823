//! The defender's noisy view of the swarm.
//!
//! Positions are perturbed with zero-mean Gaussian noise whose standard
//! deviation depends on the drone's true size, redrawn every step. Size
//! and power labels come from confusion-matrix rows and are drawn once per
//! drone per episode.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::DroneStatus;
use crate::geometry::Vec3;
use crate::rng;
use crate::scenario::{PowerClass, SensorSpec, SizeClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneTrack {
    pub index: usize,
    pub observed_position: Vec3,
    pub detected_size: SizeClass,
    pub detected_power: PowerClass,
    pub status: DroneStatus,
}

/// Perturb one true position.
pub fn observe_position<R: Rng + ?Sized>(
    rng: &mut R,
    position: Vec3,
    size: SizeClass,
    sensor: &SensorSpec,
) -> Vec3 {
    let sigma = sensor.pos_sigma_by_size.get(size);
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let nz: f64 = rng.sample(StandardNormal);
    position + Vec3::new(nx, ny, nz) * sigma
}

/// Perturb every `(true position, true size)` pair, in order.
pub fn observe_positions<R: Rng + ?Sized>(
    rng: &mut R,
    drones: &[(Vec3, SizeClass)],
    sensor: &SensorSpec,
) -> Vec<Vec3> {
    drones
        .iter()
        .map(|&(p, s)| observe_position(rng, p, s, sensor))
        .collect()
}

pub fn classify_size<R: Rng + ?Sized>(
    rng: &mut R,
    true_size: SizeClass,
    sensor: &SensorSpec,
) -> SizeClass {
    SizeClass::from_index(rng::categorical(
        rng,
        &sensor.size_confusion[true_size.index()],
    ))
}

pub fn classify_power<R: Rng + ?Sized>(
    rng: &mut R,
    true_power: PowerClass,
    sensor: &SensorSpec,
) -> PowerClass {
    PowerClass::from_index(rng::categorical(
        rng,
        &sensor.power_confusion[true_power.index()],
    ))
}
