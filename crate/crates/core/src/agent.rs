//! Deep Q-learning over the coating environment.
//!
//! One run owns a single ChaCha8 stream (stream 1 of the run seed; the
//! network initialisation uses stream 0). Per environment step it draws, in
//! order: the exploration coin, the random action when the coin says explore,
//! then the minibatch indices when a gradient step is taken.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::environment::{trace_row, EnvConfig, EnvState, Environment, Transition};
use crate::error::{Error, Result};
use crate::optics::Rta;
use crate::qnet::{self, QNetworkParams, Sample, TrainHyperparams};
use crate::report::{CurvePoint, OptimizerKind, RunReport};

pub const DEFAULT_REPLAY_CAPACITY: usize = 10_000;

/// Bounded FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Validation("replay capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn store(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `batch_size` distinct entries chosen uniformly, or `None` while the
    /// memory holds fewer than that.
    pub fn sample_minibatch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.items.len(), batch_size);
        Some(picks.iter().map(|i| &self.items[i]).collect())
    }
}

/// Linear ε decay over global steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_steps: u64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_end: 0.1,
            decay_steps: 20_000,
        }
    }
}

impl ExplorationSchedule {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            problems.push(format!(
                "epsilon must satisfy 1 >= eps_start >= eps_end >= 0, got {} and {}",
                self.eps_start, self.eps_end
            ));
        }
        if self.decay_steps == 0 {
            problems.push("decay_steps must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.eps_end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Always draws the coin; draws a uniform action only when
/// exploring.
pub fn select_action<R: Rng + ?Sized>(
    params: &QNetworkParams,
    observation: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let coin: f64 = rng.random();
    if coin < epsilon {
        return Ok(rng.random_range(0..params.action_count()));
    }
    Ok(argmax(&qnet::forward(params, observation)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnSettings {
    pub hyper: TrainHyperparams,
    pub schedule: ExplorationSchedule,
    pub episodes: u64,
    pub replay_capacity: usize,
    /// Gradient steps start once the memory holds this many transitions
    /// (never fewer than a batch).
    pub warmup: usize,
    /// Copy the online network into a frozen target every this many gradient
    /// steps. `None` bootstraps from the online network.
    pub target_sync_interval: Option<u64>,
    /// Hard cap on optics evaluations, counting the initial design.
    pub max_evaluations: Option<u64>,
    pub record_trace: bool,
}

impl Default for DqnSettings {
    fn default() -> Self {
        let hyper = TrainHyperparams::default();
        Self {
            hyper,
            schedule: ExplorationSchedule::default(),
            episodes: 100,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            warmup: hyper.batch_size,
            target_sync_interval: None,
            max_evaluations: None,
            record_trace: false,
        }
    }
}

impl DqnSettings {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for r in [self.hyper.validate(), self.schedule.validate()] {
            if let Err(e) = r {
                problems.push(e.to_string());
            }
        }
        if self.replay_capacity < self.hyper.batch_size {
            problems.push(format!(
                "replay capacity {} is smaller than batch size {}",
                self.replay_capacity, self.hyper.batch_size
            ));
        }
        if self.target_sync_interval == Some(0) {
            problems.push("target_sync_interval must be >= 1".into());
        }
        if self.max_evaluations == Some(0) {
            problems.push("max_evaluations must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }
}

/// What one call to [`DqnTrainer::step`] did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub transition: Transition,
    pub epsilon: f64,
    /// `seq` tags of the minibatch used for the gradient step, empty if none.
    pub sampled_seqs: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Best {
    state: EnvState,
    aim: f64,
    means: Rta,
}

/// Stateful DQN run; drive it with [`train`](Self::train) or step by step.
#[derive(Debug, Clone)]
pub struct DqnTrainer {
    env: Environment,
    settings: DqnSettings,
    params: QNetworkParams,
    target: Option<QNetworkParams>,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    current: Option<EnvState>,
    episode: u64,
    episodes_started: u64,
    global_step: u64,
    updates: u64,
    best: Best,
    curve: Vec<CurvePoint>,
    trace: Vec<String>,
}

impl DqnTrainer {
    pub fn new(config: EnvConfig, settings: DqnSettings) -> Result<Self> {
        settings.validate()?;
        let env = Environment::new(config)?;
        let params = qnet::init_params(env.observation_dim(), env.action_count(), settings.hyper.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.hyper.seed);
        rng.set_stream(1);
        let initial = env.initial_state();
        let means = env.evaluator().means(&initial.thicknesses_nm)?;
        let best = Best {
            state: initial,
            aim: env.initial_aim(),
            means,
        };
        Ok(Self {
            target: settings.target_sync_interval.map(|_| params.clone()),
            memory: ReplayMemory::new(settings.replay_capacity)?,
            env,
            params,
            rng,
            current: None,
            episode: 0,
            episodes_started: 0,
            global_step: 0,
            updates: 0,
            best,
            curve: Vec::new(),
            trace: Vec::new(),
            settings,
        })
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn params(&self) -> &QNetworkParams {
        &self.params
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn gradient_steps(&self) -> u64 {
        self.updates
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn budget_exhausted(&self) -> bool {
        self.settings
            .max_evaluations
            .is_some_and(|cap| self.env.evaluations() >= cap)
    }

    /// Resets the environment for the next episode.
    pub fn begin_episode(&mut self) -> EnvState {
        if self.current.is_some() {
            self.finish_episode();
        }
        let s = self.env.reset();
        self.current = Some(s.clone());
        self.episodes_started += 1;
        s
    }

    fn finish_episode(&mut self) {
        self.current = None;
        self.curve.push(CurvePoint::new(self.episode, self.best.aim, &self.best.means));
        self.episode += 1;
    }

    /// One environment step plus at most one gradient step. `None` when no
    /// episode is running or the evaluation budget is spent.
    pub fn step(&mut self) -> Result<Option<StepOutcome>> {
        let Some(state) = self.current.clone() else {
            return Ok(None);
        };
        if self.budget_exhausted() {
            return Ok(None);
        }
        let epsilon = self.settings.schedule.epsilon_at(self.global_step);
        let obs = self.env.encode_observation(&state);
        let action = select_action(&self.params, &obs, epsilon, &mut self.rng)?;
        let tr = self.env.step(&state, action)?;
        self.global_step += 1;

        if tr.aim > self.best.aim {
            self.best = Best {
                state: tr.next_state.clone(),
                aim: tr.aim,
                means: tr.means,
            };
        }
        if self.settings.record_trace {
            self.trace.push(trace_row(self.global_step, self.env.actions(), &tr));
        }
        self.memory.store(tr.clone());
        let sampled_seqs = self.learn()?;

        self.current = if tr.terminal { None } else { Some(tr.next_state.clone()) };
        if tr.terminal {
            self.curve.push(CurvePoint::new(self.episode, self.best.aim, &self.best.means));
            self.episode += 1;
        }
        Ok(Some(StepOutcome {
            transition: tr,
            epsilon,
            sampled_seqs,
        }))
    }

    fn learn(&mut self) -> Result<Vec<u64>> {
        let batch_size = self.settings.hyper.batch_size;
        if self.memory.len() < self.settings.warmup.max(batch_size) {
            return Ok(Vec::new());
        }
        let Some(batch) = self.memory.sample_minibatch(batch_size, &mut self.rng) else {
            return Ok(Vec::new());
        };
        let norm = self.env.config().normalization_nm;
        let seqs = batch.iter().map(|t| t.seq).collect();
        let samples: Vec<Sample> = batch
            .iter()
            .map(|t| Sample {
                observation: crate::environment::encode_observation(&t.state, norm),
                action: t.action,
                reward: t.reward,
                next_observation: crate::environment::encode_observation(&t.next_state, norm),
                terminal: t.terminal,
            })
            .collect();
        let target = self.target.as_ref().unwrap_or(&self.params);
        let lr = self.settings.hyper.learning_rate(self.episode);
        let updated = qnet::gradient_with_target(&self.params, target, &samples, self.settings.hyper.gamma)
            .and_then(|g| qnet::sgd_step(&self.params, &g, lr))
            .map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!(
                    "training diverged in episode {}, global step {}: {m}",
                    self.episode, self.global_step
                )),
                other => other,
            })?;
        self.params = updated;
        self.updates += 1;
        if let Some(k) = self.settings.target_sync_interval {
            if self.updates % k == 0 {
                self.target = Some(self.params.clone());
            }
        }
        Ok(seqs)
    }

    /// Runs one full episode (or until the budget runs out).
    pub fn run_episode(&mut self) -> Result<()> {
        self.begin_episode();
        while self.step()?.is_some() {}
        if self.current.is_some() {
            // cut short by the budget
            self.finish_episode();
        }
        Ok(())
    }

    /// Runs the configured number of episodes and reports the best design.
    pub fn train(mut self) -> Result<RunReport> {
        for _ in 0..self.settings.episodes {
            if self.budget_exhausted() {
                break;
            }
            self.run_episode()?;
        }
        self.into_report()
    }

    pub fn into_report(mut self) -> Result<RunReport> {
        if self.current.is_some() {
            self.finish_episode();
        }
        let response = self.env.evaluator().response(&self.best.state.thicknesses_nm)?;
        Ok(RunReport {
            optimizer: OptimizerKind::Dqn,
            seed: self.settings.hyper.seed,
            episodes: self.episodes_started,
            total_steps: self.global_step,
            evaluations: self.env.evaluations(),
            best_thicknesses_nm: self.best.state.thicknesses_nm,
            best_aim: self.best.aim,
            mean_r: self.best.means.r,
            mean_t: self.best.means.t,
            mean_a: self.best.means.a,
            curve: self.curve,
            best_response: Some(response),
        })
    }
}

/// Trains from scratch and returns the report.
pub fn train(config: EnvConfig, settings: DqnSettings) -> Result<RunReport> {
    DqnTrainer::new(config, settings)?.train()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvState;
    use crate::materials::MaterialTable;
    use crate::optics::{AimWeights, SpectralGrid, StackTemplate};
    use std::sync::Arc;

    fn toy_config() -> EnvConfig {
        let film = Arc::new(MaterialTable::constant("film", 1.38, 0.0, 200.0, 2000.0).unwrap());
        let glass = Arc::new(MaterialTable::constant("glass", 1.5, 0.0, 200.0, 2000.0).unwrap());
        let template = StackTemplate {
            incident: Arc::new(MaterialTable::air()),
            free: vec![film],
            backing: vec![],
            substrate: glass,
        };
        EnvConfig::new(template, SpectralGrid::single(550.0).unwrap(), AimWeights::anti_reflection(), vec![50.0])
            .with_uniform_bounds(0.0, 200.0)
    }

    fn transition(seq: u64) -> Transition {
        Transition {
            seq,
            state: EnvState::new(vec![1.0]),
            action: 0,
            reward: 0.0,
            next_state: EnvState::new(vec![2.0]),
            terminal: false,
            aim: 0.0,
            means: Rta { r: 0.0, t: 1.0, a: 0.0 },
        }
    }

    #[test]
    fn schedule_values() {
        let s = ExplorationSchedule::default();
        assert_eq!(s.epsilon_at(0), 1.0);
        assert!((s.epsilon_at(10_000) - 0.55).abs() < 1e-15);
        assert_eq!(s.epsilon_at(20_000), 0.1);
        assert_eq!(s.epsilon_at(1_000_000), 0.1);
    }

    #[test]
    fn replay_fifo_eviction() {
        let mut m = ReplayMemory::new(3).unwrap();
        for i in 0..5 {
            m.store(transition(i));
        }
        assert_eq!(m.len(), 3);
        assert_eq!(m.iter().map(|t| t.seq).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn replay_sampling_needs_full_batch() {
        let mut m = ReplayMemory::new(10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..3 {
            m.store(transition(i));
        }
        assert!(m.sample_minibatch(4, &mut rng).is_none());
        let b = m.sample_minibatch(3, &mut rng).unwrap();
        let mut seqs: Vec<_> = b.iter().map(|t| t.seq).collect();
        seqs.sort();
        assert_eq!(seqs, vec![0, 1, 2]);
    }

    #[test]
    fn argmax_lowest_tie() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn zero_episodes_reports_initial_design() {
        let cfg = toy_config();
        let settings = DqnSettings {
            episodes: 0,
            ..DqnSettings::default()
        };
        let report = train(cfg.clone(), settings).unwrap();
        let env = Environment::new(cfg).unwrap();
        assert_eq!(report.best_thicknesses_nm, vec![50.0]);
        assert_eq!(report.best_aim, env.initial_aim());
        assert_eq!(report.total_steps, 0);
        assert_eq!(report.evaluations, 1);
        assert!(report.curve.is_empty());
    }

    #[test]
    fn budget_is_exact() {
        let settings = DqnSettings {
            episodes: 1000,
            max_evaluations: Some(137),
            ..DqnSettings::default()
        };
        let report = train(toy_config(), settings).unwrap();
        assert_eq!(report.evaluations, 137);
        assert_eq!(report.total_steps, 136);
    }

    #[test]
    fn same_seed_same_run() {
        let settings = DqnSettings {
            episodes: 5,
            ..DqnSettings::default()
        };
        let a = train(toy_config(), settings.clone()).unwrap();
        let b = train(toy_config(), settings).unwrap();
        assert_eq!(a, b);
    }
}
