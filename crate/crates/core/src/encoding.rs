//! Flat observation vector, action mask and action decoding.
//!
//! Observation layout, in order:
//!
//! | block                        | length      | encoding                       |
//! |------------------------------|-------------|--------------------------------|
//! | stacked drone positions      | `3·N·stack` | box-scaled to `[-1, 0]`, oldest frame first |
//! | drone status                 | `3·N`       | one-hot (active, neutralized, impacted) |
//! | detected explosive power     | `3·N`       | one-hot (low, medium, high)    |
//! | effector azimuth, elevation  | `2·M`       | box-scaled over each effector's limits |
//! | effector kinematic state     | `M`         | raw flag, 1 = tracking         |
//! | effector weapon state        | `3·M`       | one-hot (ready, firing, charging) |
//!
//! The layout is frozen: weight files record [`ObservationSpec::fingerprint`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::{Assignment, DroneStatus, EffectorState, Kinematic};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scenario::{EffectorSpec, ScenarioConfig};
use crate::sensing::DroneTrack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub n_drones: usize,
    pub n_effectors: usize,
    pub stack_frames: usize,
}

impl ObservationSpec {
    pub fn new(n_drones: usize, n_effectors: usize, stack_frames: usize) -> Self {
        Self {
            n_drones,
            n_effectors,
            stack_frames,
        }
    }

    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self::new(config.n_drones(), config.n_effectors(), config.stack_frames)
    }

    pub fn frame_len(&self) -> usize {
        3 * self.n_drones
    }

    pub fn positions_len(&self) -> usize {
        self.frame_len() * self.stack_frames
    }

    pub fn status_len(&self) -> usize {
        3 * self.n_drones
    }

    pub fn power_len(&self) -> usize {
        3 * self.n_drones
    }

    pub fn angles_len(&self) -> usize {
        2 * self.n_effectors
    }

    pub fn kinematic_len(&self) -> usize {
        self.n_effectors
    }

    pub fn weapon_len(&self) -> usize {
        3 * self.n_effectors
    }

    pub fn total_len(&self) -> usize {
        self.positions_len()
            + self.status_len()
            + self.power_len()
            + self.angles_len()
            + self.kinematic_len()
            + self.weapon_len()
    }

    /// Stable identifier stored in weight files.
    pub fn fingerprint(&self) -> String {
        format!(
            "obs-v1:n_drones={}:n_effectors={}:stack={}:len={}",
            self.n_drones,
            self.n_effectors,
            self.stack_frames,
            self.total_len()
        )
    }

    pub fn action_dims(&self) -> [usize; 2] {
        [self.n_effectors, self.n_drones]
    }
}

/// Scale `value` from `[lo, hi]` onto `[-1, 0]`, clamping first.
pub fn normalize_box(value: f64, lo: f64, hi: f64) -> f64 {
    (value.clamp(lo, hi) - lo) / (hi - lo) - 1.0
}

pub fn one_hot(k: usize, cardinality: usize) -> Result<Vec<f64>> {
    if k >= cardinality {
        return Err(Error::Contract(format!(
            "category {k} out of range for cardinality {cardinality}"
        )));
    }
    let mut v = vec![0.0; cardinality];
    v[k] = 1.0;
    Ok(v)
}

fn push_one_hot(out: &mut Vec<f64>, k: usize) {
    let start = out.len();
    out.extend_from_slice(&[0.0; 3]);
    out[start + k] = 1.0;
}

/// Normalized position block for one frame, drones in index order.
pub fn position_frame(positions: impl IntoIterator<Item = Vec3>, domain: &Aabb) -> Vec<f64> {
    positions
        .into_iter()
        .flat_map(|p| {
            [
                normalize_box(p.x, domain.min.x, domain.max.x),
                normalize_box(p.y, domain.min.y, domain.max.y),
                normalize_box(p.z, domain.min.z, domain.max.z),
            ]
        })
        .collect()
}

/// The last `stack_frames` normalized position blocks.
///
/// The first push fills every slot with that frame, so episode start sees
/// identical stacked frames.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    capacity: usize,
    frames: VecDeque<Vec<f64>>,
}

impl FrameHistory {
    pub fn new(stack_frames: usize) -> Self {
        Self {
            capacity: stack_frames,
            frames: VecDeque::with_capacity(stack_frames),
        }
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        if self.frames.is_empty() {
            for _ in 1..self.capacity {
                self.frames.push_back(frame.clone());
            }
        } else if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frames oldest first.
    pub fn frames(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.frames.iter()
    }
}

/// Concatenate the observation blocks. `history` must already contain the
/// current frame.
pub fn encode_observation(
    tracks: &[DroneTrack],
    effectors: &[EffectorState],
    effector_specs: &[EffectorSpec],
    history: &FrameHistory,
    spec: &ObservationSpec,
) -> Result<Vec<f64>> {
    if tracks.len() != spec.n_drones
        || effectors.len() != spec.n_effectors
        || effector_specs.len() != spec.n_effectors
    {
        return Err(Error::Contract(format!(
            "observation spec expects {} drones and {} effectors, got {} and {}",
            spec.n_drones,
            spec.n_effectors,
            tracks.len(),
            effectors.len()
        )));
    }
    if history.len() != spec.stack_frames || history.frames().any(|f| f.len() != spec.frame_len()) {
        return Err(Error::Contract(format!(
            "frame history must hold {} frames of {} values",
            spec.stack_frames,
            spec.frame_len()
        )));
    }

    let mut out = Vec::with_capacity(spec.total_len());
    for frame in history.frames() {
        out.extend_from_slice(frame);
    }
    for t in tracks {
        push_one_hot(&mut out, t.status.index());
    }
    for t in tracks {
        push_one_hot(&mut out, t.detected_power.index());
    }
    for (e, s) in effectors.iter().zip(effector_specs) {
        out.push(normalize_box(e.azimuth, s.az_limits[0], s.az_limits[1]));
        out.push(normalize_box(e.elevation, s.el_limits[0], s.el_limits[1]));
    }
    for e in effectors {
        out.push(if e.kinematic == Kinematic::Tracking {
            1.0
        } else {
            0.0
        });
    }
    for e in effectors {
        push_one_hot(&mut out, e.weapon.index());
    }
    debug_assert_eq!(out.len(), spec.total_len());
    Ok(out)
}

/// `M × N` flags; entry `(m, j)` is true iff drone `j` is still active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask {
    pub n_effectors: usize,
    pub n_drones: usize,
    flags: Vec<bool>,
}

impl ActionMask {
    pub fn from_statuses(statuses: &[DroneStatus], n_effectors: usize) -> Self {
        let row: Vec<bool> = statuses.iter().map(|s| s.is_active()).collect();
        let flags = (0..n_effectors).flat_map(|_| row.iter().copied()).collect();
        ActionMask {
            n_effectors,
            n_drones: statuses.len(),
            flags,
        }
    }

    /// Mask that allows everything.
    pub fn all_valid(n_effectors: usize, n_drones: usize) -> Self {
        ActionMask {
            n_effectors,
            n_drones,
            flags: vec![true; n_effectors * n_drones],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let n_drones = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_drones) {
            return Err(Error::Shape("mask rows have different lengths".into()));
        }
        Ok(ActionMask {
            n_effectors: rows.len(),
            n_drones,
            flags: rows.concat(),
        })
    }

    pub fn get(&self, effector: usize, drone: usize) -> bool {
        self.flags[effector * self.n_drones + drone]
    }

    pub fn row(&self, effector: usize) -> &[bool] {
        &self.flags[effector * self.n_drones..(effector + 1) * self.n_drones]
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        (0..self.n_effectors)
            .map(|m| self.row(m).to_vec())
            .collect()
    }

    pub fn any_valid(&self, effector: usize) -> bool {
        self.row(effector).iter().any(|&b| b)
    }
}

pub fn action_mask(state: &crate::engine::SimState) -> ActionMask {
    ActionMask::from_statuses(&state.statuses(), state.effectors.len())
}

/// Per-effector target indices from the flat multi-discrete action.
pub fn decode_action(indices: &[usize], n_effectors: usize, n_drones: usize) -> Result<Assignment> {
    if indices.len() != n_effectors {
        return Err(Error::Contract(format!(
            "action has {} entries, expected {n_effectors}",
            indices.len()
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&j| j >= n_drones) {
        return Err(Error::Contract(format!(
            "action index {bad} out of range for {n_drones} drones"
        )));
    }
    Ok(Assignment(indices.to_vec()))
}
