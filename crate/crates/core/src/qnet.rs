//! Fully-connected Q-network: `input → 80 → 80 → actions`, relu hidden units,
//! linear output head, trained by plain SGD on the squared Bellman error.
//!
//! Everything is `f64` and hand-differentiated; there is no autodiff.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIDDEN_UNITS: usize = 80;

/// Affine layer `y = W·x + b`, `W` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.inputs..(i + 1) * self.inputs]
    }
}

/// Network parameters. Also used as the shape of a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetworkParams {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub output: Dense,
    pub seed: u64,
}

/// Gradient of the loss with respect to every parameter.
pub type Gradient = QNetworkParams;

/// Two hidden layers of [`HIDDEN_UNITS`] units.
pub fn init_params(input_dim: usize, action_count: usize, seed: u64) -> QNetworkParams {
    init_params_with_hidden(input_dim, HIDDEN_UNITS, action_count, seed)
}

/// Same scheme with a custom hidden width; draw order is W1, W2, W3 row-major.
pub fn init_params_with_hidden(input_dim: usize, hidden: usize, action_count: usize, seed: u64) -> QNetworkParams {
    assert!(input_dim >= 1 && hidden >= 1 && action_count >= 1, "network dimensions must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    QNetworkParams {
        hidden1: Dense::glorot(input_dim, hidden, &mut rng),
        hidden2: Dense::glorot(hidden, hidden, &mut rng),
        output: Dense::glorot(hidden, action_count, &mut rng),
        seed,
    }
}

impl QNetworkParams {
    pub fn input_dim(&self) -> usize {
        self.hidden1.inputs
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden1.outputs
    }

    pub fn action_count(&self) -> usize {
        self.output.outputs
    }

    /// All-zero parameters of the same shape.
    pub fn zeros_like(&self) -> Self {
        Self {
            hidden1: Dense::zeros(self.hidden1.inputs, self.hidden1.outputs),
            hidden2: Dense::zeros(self.hidden2.inputs, self.hidden2.outputs),
            output: Dense::zeros(self.output.inputs, self.output.outputs),
            seed: self.seed,
        }
    }

    /// Parameter blocks in storage order: W1, b1, W2, b2, W3, b3.
    pub fn blocks(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("W1", &self.hidden1.weights),
            ("b1", &self.hidden1.bias),
            ("W2", &self.hidden2.weights),
            ("b2", &self.hidden2.bias),
            ("W3", &self.output.weights),
            ("b3", &self.output.bias),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 6] {
        [
            ("W1", &mut self.hidden1.weights),
            ("b1", &mut self.hidden1.bias),
            ("W2", &mut self.hidden2.weights),
            ("b2", &mut self.hidden2.bias),
            ("W3", &mut self.output.weights),
            ("b3", &mut self.output.bias),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.blocks()
            .iter()
            .zip(other.blocks().iter())
            .all(|((_, a), (_, b))| a.len() == b.len())
            && self.input_dim() == other.input_dim()
            && self.action_count() == other.action_count()
    }
}

/// Hyperparameters of the learning rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyperparams {
    /// Discount factor in `[0, 1)`.
    pub gamma: f64,
    /// Learning rate of the first episode.
    pub lr0: f64,
    /// Multiplicative learning-rate decay applied once per episode.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lr0: 1e-3,
            lr_decay: 0.995,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainHyperparams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..1.0).contains(&self.gamma) {
            problems.push(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            problems.push(format!("lr0 must be > 0, got {}", self.lr0));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            problems.push(format!("lr_decay must be in (0, 1], got {}", self.lr_decay));
        }
        if self.batch_size < 1 {
            problems.push("batch_size must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    /// Learning rate used during `episode` (0-based).
    pub fn learning_rate(&self, episode: u64) -> f64 {
        self.lr0 * self.lr_decay.powf(episode as f64)
    }
}

/// One training example for the Q-network, in observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub terminal: bool,
}

struct Activations {
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    q: Vec<f64>,
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

fn check_input(params: &QNetworkParams, x: &[f64]) -> Result<()> {
    if x.len() != params.input_dim() {
        return Err(Error::Contract(format!(
            "observation has length {}, network expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    Ok(())
}

fn activations(params: &QNetworkParams, x: &[f64]) -> Activations {
    let mut z1 = Vec::with_capacity(params.hidden1.outputs);
    params.hidden1.apply(x, &mut z1);
    let h1 = relu(&z1);
    let mut z2 = Vec::with_capacity(params.hidden2.outputs);
    params.hidden2.apply(&h1, &mut z2);
    let h2 = relu(&z2);
    let mut q = Vec::with_capacity(params.output.outputs);
    params.output.apply(&h2, &mut q);
    Activations { z1, h1, z2, h2, q }
}

/// Q-values of every action for `observation`.
pub fn forward(params: &QNetworkParams, observation: &[f64]) -> Result<Vec<f64>> {
    check_input(params, observation)?;
    Ok(activations(params, observation).q)
}

fn check_batch(params: &QNetworkParams, batch: &[Sample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract("training batch is empty".into()));
    }
    for s in batch {
        check_input(params, &s.observation)?;
        check_input(params, &s.next_observation)?;
        if s.action >= params.action_count() {
            return Err(Error::Contract(format!(
                "action {} outside network output of {}",
                s.action,
                params.action_count()
            )));
        }
        if !s.reward.is_finite() {
            return Err(Error::Contract("reward must be finite".into()));
        }
    }
    Ok(())
}

/// Bellman targets `r` (terminal) or `r + γ·max_a' Q_target(s', a')`.
pub fn td_targets(target: &QNetworkParams, batch: &[Sample], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .map(|s| {
            if s.terminal {
                s.reward
            } else {
                let q_next = activations(target, &s.next_observation).q;
                s.reward + gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// Mean over the batch of `½·(target - Q(s, a))²`, targets from `params` itself.
pub fn loss(params: &QNetworkParams, batch: &[Sample], gamma: f64) -> Result<f64> {
    loss_with_target(params, params, batch, gamma)
}

/// As [`loss`] but with targets computed by a separate (frozen) network.
pub fn loss_with_target(params: &QNetworkParams, target: &QNetworkParams, batch: &[Sample], gamma: f64) -> Result<f64> {
    check_batch(params, batch)?;
    let targets = td_targets(target, batch, gamma);
    let total = batch.iter().zip(&targets).fold(0.0, |acc, (s, y)| {
        let q = activations(params, &s.observation).q[s.action];
        acc + 0.5 * (y - q) * (y - q)
    });
    Ok(total / batch.len() as f64)
}

/// Exact gradient of [`loss`]; targets are treated as constants.
pub fn gradient(params: &QNetworkParams, batch: &[Sample], gamma: f64) -> Result<Gradient> {
    gradient_with_target(params, params, batch, gamma)
}

pub fn gradient_with_target(
    params: &QNetworkParams,
    target: &QNetworkParams,
    batch: &[Sample],
    gamma: f64,
) -> Result<Gradient> {
    check_batch(params, batch)?;
    let targets = td_targets(target, batch, gamma);
    let scale = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let hidden2 = params.hidden2.outputs;
    let hidden1 = params.hidden1.outputs;
    let mut dz2 = vec![0.0; hidden2];
    let mut dz1 = vec![0.0; hidden1];

    for (s, y) in batch.iter().zip(&targets) {
        let act = activations(params, &s.observation);
        let g = (act.q[s.action] - y) * scale;
        if g == 0.0 {
            continue;
        }

        // output head: only the taken action's row receives gradient
        let a = s.action;
        grad.output.bias[a] += g;
        let w3_row = params.output.row(a);
        let gw3 = &mut grad.output.weights[a * hidden2..(a + 1) * hidden2];
        for j in 0..hidden2 {
            gw3[j] += g * act.h2[j];
            dz2[j] = if act.z2[j] > 0.0 { g * w3_row[j] } else { 0.0 };
        }

        // second hidden layer
        dz1.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..hidden2 {
            let d = dz2[j];
            if d == 0.0 {
                continue;
            }
            grad.hidden2.bias[j] += d;
            let row = params.hidden2.row(j);
            let grow = &mut grad.hidden2.weights[j * hidden1..(j + 1) * hidden1];
            for i in 0..hidden1 {
                grow[i] += d * act.h1[i];
                dz1[i] += d * row[i];
            }
        }

        // first hidden layer
        let inputs = params.hidden1.inputs;
        for i in 0..hidden1 {
            if act.z1[i] <= 0.0 {
                continue;
            }
            let d = dz1[i];
            grad.hidden1.bias[i] += d;
            let grow = &mut grad.hidden1.weights[i * inputs..(i + 1) * inputs];
            for (gw, x) in grow.iter_mut().zip(&s.observation) {
                *gw += d * x;
            }
        }
    }
    Ok(grad)
}

/// `params - lr·gradient`.
pub fn sgd_step(params: &QNetworkParams, gradient: &Gradient, learning_rate: f64) -> Result<QNetworkParams> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::Contract(format!("learning rate must be > 0, got {learning_rate}")));
    }
    if !params.same_shape(gradient) {
        return Err(Error::Contract("gradient shape does not match parameters".into()));
    }
    let mut next = params.clone();
    for ((name, p), (_, g)) in next.blocks_mut().into_iter().zip(gradient.blocks()) {
        for (pv, gv) in p.iter_mut().zip(g) {
            *pv -= learning_rate * gv;
            if !pv.is_finite() {
                return Err(Error::Numeric(format!("parameter block {name} diverged")));
            }
        }
    }
    Ok(next)
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"FFQN";
const CHECKPOINT_VERSION: u32 = 1;

/// Writes a checkpoint.
///
/// Layout, all little endian: magic `FFQN`, `u32` version (1), `u32`
/// input_dim, `u32` hidden units, `u32` action count, `u64` seed, then the
/// `f64` blocks W1, b1, W2, b2, W3, b3, each row-major.
pub fn write_checkpoint<W: Write>(params: &QNetworkParams, mut out: W) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    for v in [
        CHECKPOINT_VERSION,
        params.input_dim() as u32,
        params.hidden_units() as u32,
        params.action_count() as u32,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&params.seed.to_le_bytes())?;
    for (_, block) in params.blocks() {
        for v in block {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(mut input: R) -> Result<QNetworkParams> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Validation("not a Q-network checkpoint (bad magic)".into()));
    }
    let read_u32 = |input: &mut R| -> Result<u32> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    };
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Validation(format!("unsupported checkpoint version {version}")));
    }
    let input_dim = read_u32(&mut input)? as usize;
    let hidden = read_u32(&mut input)? as usize;
    let actions = read_u32(&mut input)? as usize;
    if input_dim == 0 || hidden == 0 || actions == 0 {
        return Err(Error::Validation("checkpoint has a zero dimension".into()));
    }
    let mut seed = [0u8; 8];
    input.read_exact(&mut seed)?;
    let mut params = QNetworkParams {
        hidden1: Dense::zeros(input_dim, hidden),
        hidden2: Dense::zeros(hidden, hidden),
        output: Dense::zeros(hidden, actions),
        seed: u64::from_le_bytes(seed),
    };
    for (_, block) in params.blocks_mut() {
        for v in block.iter_mut() {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
    }
    if !params.is_finite() {
        return Err(Error::Validation("checkpoint contains non-finite parameters".into()));
    }
    Ok(params)
}
