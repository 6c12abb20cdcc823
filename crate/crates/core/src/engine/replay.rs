//! Line-delimited JSON replay log, one record per engine step.
//!
//! Field order is fixed by the struct layout, so identical runs produce
//! byte-identical logs that can be hashed.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DroneStatus, FireEvent, ImpactEvent, Kinematic, SimState, StepResult, Weapon};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneRecord {
    pub position: [f64; 3],
    pub status: DroneStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectorRecord {
    pub azimuth: f64,
    pub elevation: f64,
    pub kinematic: Kinematic,
    pub weapon: Weapon,
    pub charge_steps_left: u32,
    pub target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub step: u32,
    pub drones: Vec<DroneRecord>,
    pub effectors: Vec<EffectorRecord>,
    pub fires: Vec<FireEvent>,
    pub impacts: Vec<ImpactEvent>,
    pub raw_reward: f64,
    pub reward: f64,
}

impl ReplayRecord {
    /// Snapshot of `state` right after the step that produced `result`.
    pub fn capture(state: &SimState, result: &StepResult) -> Self {
        ReplayRecord {
            step: state.step_index,
            drones: state
                .drones
                .iter()
                .map(|d| DroneRecord {
                    position: d.position.to_array(),
                    status: d.status,
                })
                .collect(),
            effectors: state
                .effectors
                .iter()
                .map(|e| EffectorRecord {
                    azimuth: e.azimuth,
                    elevation: e.elevation,
                    kinematic: e.kinematic,
                    weapon: e.weapon,
                    charge_steps_left: e.charge_steps_left,
                    target: e.assigned_drone,
                })
                .collect(),
            fires: result.fires.clone(),
            impacts: result.impacts.clone(),
            raw_reward: result.raw_reward,
            reward: result.normalized_reward,
        }
    }
}

pub fn write_replay<W: Write>(mut out: W, records: &[ReplayRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn replay_bytes(records: &[ReplayRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_replay(&mut buf, records).expect("writing to memory");
    buf
}

pub fn read_replay(text: &str) -> Result<Vec<ReplayRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Into::into))
        .collect()
}

/// Hex SHA-256 of the serialized log.
pub fn replay_hash(records: &[ReplayRecord]) -> String {
    Sha256::digest(replay_bytes(records))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
