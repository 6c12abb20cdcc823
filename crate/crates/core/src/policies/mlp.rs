//! Feed-forward policy loaded from an exported weight file, plus masked
//! action selection over its per-effector logits.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Policy, PolicyInput};
use crate::encoding::{ActionMask, ObservationSpec};
use crate::engine::Assignment;
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// `y = act(W x + b)` with `W` stored row-major as `rows × cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| {
                let z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
                match self.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Linear => z,
                }
            })
            .collect()
    }
}

/// On-disk weight file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format_version: u32,
    pub observation_fingerprint: String,
    pub layers: Vec<DenseLayer>,
    /// `[M, N]`: effectors, drones.
    pub action_dims: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    #[default]
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpPolicy {
    pub layers: Vec<DenseLayer>,
    pub observation_fingerprint: String,
    pub action_dims: [usize; 2],
    pub mode: SelectMode,
    name: String,
}

impl MlpPolicy {
    pub fn new(
        layers: Vec<DenseLayer>,
        observation_fingerprint: impl Into<String>,
        action_dims: [usize; 2],
    ) -> Result<Self> {
        let policy = MlpPolicy {
            layers,
            observation_fingerprint: observation_fingerprint.into(),
            action_dims,
            mode: SelectMode::Greedy,
            name: "mlp".into(),
        };
        policy.check_layers()?;
        Ok(policy)
    }

    pub fn with_mode(mut self, mode: SelectMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    fn check_layers(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::WeightFile("no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.rows == 0 || l.cols == 0 {
                return Err(Error::WeightFile(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.rows * l.cols {
                return Err(Error::WeightFile(format!(
                    "layer {i}: {} weights for a {}x{} matrix",
                    l.weights.len(),
                    l.rows,
                    l.cols
                )));
            }
            if l.bias.len() != l.rows {
                return Err(Error::WeightFile(format!(
                    "layer {i}: bias length {} != rows {}",
                    l.bias.len(),
                    l.rows
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::WeightFile(format!(
                    "layer {i} contains non-finite values"
                )));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(Error::Shape(format!(
                    "layer {} expects {} inputs but layer {i} produces {}",
                    i + 1,
                    pair[1].cols,
                    pair[0].rows
                )));
            }
        }
        let [m, n] = self.action_dims;
        if self.output_dim() != m * n {
            return Err(Error::Shape(format!(
                "network emits {} logits, action space needs {m}x{n}",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Check that this network fits observations described by `spec`.
    pub fn check_spec(&self, spec: &ObservationSpec) -> Result<()> {
        if self.observation_fingerprint != spec.fingerprint() {
            return Err(Error::Shape(format!(
                "weight file was trained for `{}`, environment is `{}`",
                self.observation_fingerprint,
                spec.fingerprint()
            )));
        }
        if self.input_dim() != spec.total_len() {
            return Err(Error::Shape(format!(
                "network input dim {} != observation length {}",
                self.input_dim(),
                spec.total_len()
            )));
        }
        if self.action_dims != spec.action_dims() {
            return Err(Error::Shape(format!(
                "action dims {:?} != environment {:?}",
                self.action_dims,
                spec.action_dims()
            )));
        }
        Ok(())
    }

    pub fn to_weight_file(&self) -> WeightFile {
        WeightFile {
            format_version: WEIGHT_FORMAT_VERSION,
            observation_fingerprint: self.observation_fingerprint.clone(),
            layers: self.layers.clone(),
            action_dims: self.action_dims,
        }
    }

    pub fn from_weight_file(file: WeightFile) -> Result<Self> {
        if file.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::WeightFile(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        MlpPolicy::new(file.layers, file.observation_fingerprint, file.action_dims)
    }
}

/// Logits for every (effector, drone) pair, effector-major.
pub fn mlp_forward(policy: &MlpPolicy, observation: &[f64]) -> Result<Vec<f64>> {
    if observation.len() != policy.input_dim() {
        return Err(Error::Shape(format!(
            "observation length {} != network input dim {}",
            observation.len(),
            policy.input_dim()
        )));
    }
    let mut x = observation.to_vec();
    for layer in &policy.layers {
        x = layer.forward(&x);
    }
    Ok(x)
}

/// Pick one drone per effector from `M × N` logits. Masked entries are
/// excluded as if their logit were negative infinity.
pub fn masked_select(
    logits: &[f64],
    mask: &ActionMask,
    mode: SelectMode,
    rng: &mut SimRng,
) -> Result<Assignment> {
    let (m_count, n) = (mask.n_effectors, mask.n_drones);
    if logits.len() != m_count * n {
        return Err(Error::Shape(format!(
            "{} logits for a {m_count}x{n} mask",
            logits.len()
        )));
    }
    let mut targets = Vec::with_capacity(m_count);
    for (m, row) in logits.chunks_exact(n).enumerate() {
        let valid = mask.row(m);
        let max = row
            .iter()
            .zip(valid)
            .filter(|(_, &ok)| ok)
            .map(|(&l, _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Contract(format!("effector {m} has no valid target")));
        }
        let pick = match mode {
            SelectMode::Greedy => (0..n)
                .find(|&j| valid[j] && row[j] == max)
                .expect("max attained"),
            SelectMode::Sample => {
                let weights: Vec<f64> = row
                    .iter()
                    .zip(valid)
                    .map(|(&l, &ok)| if ok { (l - max).exp() } else { 0.0 })
                    .collect();
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = None;
                for (j, w) in weights.iter().enumerate() {
                    if *w > 0.0 {
                        acc += w;
                        chosen = Some(j);
                        if u < acc {
                            break;
                        }
                    }
                }
                chosen.expect("some valid entry")
            }
        };
        targets.push(pick);
    }
    Ok(Assignment(targets))
}

impl Policy for MlpPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn act(&self, input: &PolicyInput<'_>, rng: &mut SimRng) -> Result<Assignment> {
        let logits = mlp_forward(self, input.observation)?;
        masked_select(&logits, input.mask, self.mode, rng)
    }
}

pub fn save_policy_weights(policy: &MlpPolicy, path: &Path) -> Result<()> {
    let json = serde_json::to_string(&policy.to_weight_file())?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Read a weight file and validate it against the current observation spec.
pub fn load_policy_weights(path: &Path, spec: &ObservationSpec) -> Result<MlpPolicy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: WeightFile = serde_json::from_str(&text)
        .map_err(|e| Error::WeightFile(format!("{}: {e}", path.display())))?;
    let policy = MlpPolicy::from_weight_file(file)?;
    policy.check_spec(spec)?;
    Ok(policy)
}
