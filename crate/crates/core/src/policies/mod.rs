//! Decision policies: given the defender's noisy picture, pick one target
//! drone per effector.
//!
//! Every policy sees the same [`PolicyInput`] built from sensor tracks, never
//! ground truth. Ties are always broken toward the lower drone index.

mod baselines;
mod mlp;

use std::path::Path;

pub use baselines::{
    closest_first, greedy_expected_loss, greedy_urgencies, heading_zone, heuristic_policy,
    heuristic_scores, random_assignment, random_policy, zone_weighted, zone_weighted_scores,
    ClosestFirst, GreedyExpectedLoss, HeuristicPolicy, RandomPolicy, ZoneWeighted,
};
pub use mlp::{
    load_policy_weights, masked_select, mlp_forward, save_policy_weights, Activation, DenseLayer,
    MlpPolicy, SelectMode, WeightFile, WEIGHT_FORMAT_VERSION,
};

use crate::encoding::{ActionMask, ObservationSpec};
use crate::engine::{Assignment, EffectorState};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::SimRng;
use crate::scenario::{EffectorSpec, Zone};
use crate::sensing::DroneTrack;

/// Everything a policy may look at for one decision.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub tracks: &'a [DroneTrack],
    pub effectors: &'a [EffectorState],
    pub effector_specs: &'a [EffectorSpec],
    pub mask: &'a ActionMask,
    pub zones: &'a [Zone],
    pub d_max: f64,
    pub dt: f64,
    /// Finite-difference velocity estimates from the observed position history.
    pub velocities: &'a [Vec3],
    /// Encoded observation vector.
    pub observation: &'a [f64],
}

impl PolicyInput<'_> {
    pub fn n_drones(&self) -> usize {
        self.tracks.len()
    }

    pub fn n_effectors(&self) -> usize {
        self.effectors.len()
    }
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn act(&self, input: &PolicyInput<'_>, rng: &mut SimRng) -> Result<Assignment>;
}

pub const POLICY_NAMES: [&str; 6] = [
    "random",
    "closest",
    "zone",
    "greedy",
    "heuristic",
    "mlp:<weights-path>",
];

/// Build a policy from its command-line name. `mlp:<path>` loads a weight
/// file and checks it against `spec`.
pub fn policy_from_name(name: &str, spec: &ObservationSpec) -> Result<Box<dyn Policy>> {
    Ok(match name {
        "random" => Box::new(RandomPolicy),
        "closest" => Box::new(ClosestFirst),
        "zone" => Box::new(ZoneWeighted),
        "greedy" => Box::new(GreedyExpectedLoss),
        "heuristic" => Box::new(HeuristicPolicy),
        _ => match name.strip_prefix("mlp:") {
            Some(path) if !path.is_empty() => {
                Box::new(load_policy_weights(Path::new(path), spec)?.with_name(name))
            }
            _ => return Err(Error::UnknownPolicy(name.to_string())),
        },
    })
}

/// Drone order by ascending `key`, ties toward the lower index.
pub(crate) fn rank_ascending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

/// Drone order by descending `key`, ties toward the lower index.
pub(crate) fn rank_descending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    order
}

/// Effector `m` takes the best-ranked valid drone not already taken. Once
/// every valid drone is taken, effectors cycle through the valid ranking
/// again; with no valid drone at all they fall back to the global ranking.
pub(crate) fn dispatch_ranked(ranked: &[usize], mask: &ActionMask) -> Assignment {
    let mut taken = vec![false; ranked.len()];
    let targets = (0..mask.n_effectors)
        .map(|m| {
            let valid: Vec<usize> = ranked.iter().copied().filter(|&j| mask.get(m, j)).collect();
            if valid.is_empty() {
                return ranked[0];
            }
            let pick = valid
                .iter()
                .copied()
                .find(|&j| !taken[j])
                .unwrap_or(valid[m % valid.len()]);
            taken[pick] = true;
            pick
        })
        .collect();
    Assignment(targets)
}
