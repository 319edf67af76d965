//! The coating problem as an episodic decision process.
//!
//! * State: thickness (nm) of every free layer, incident side first. Fixed
//!   backing layers are part of the optics but not of the state.
//! * Actions: add or remove `10^-K` nm on one layer, `K = 0..N-1` where `N` is
//!   the precision level, giving `2·N·layers` actions.
//! * Reward: the gain over the best aim seen so far in the episode, `0` when
//!   there is no gain, and `-1` when the aim drops below the configured
//!   threshold. An episode stops after `no_improve_window` steps in a row
//!   without a gain, on a threshold breach, or at `max_steps_per_episode`.
//!
//! Transitions are deterministic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{AimWeights, Rta, SpectralGrid, SpectralResponse, StackEvaluator, StackTemplate};

pub const DEFAULT_NO_IMPROVE_WINDOW: u32 = 50;
pub const DEFAULT_MAX_STEPS_PER_EPISODE: u64 = 10_000;
pub const DEFAULT_MIN_THICKNESS_NM: f64 = 0.0;
pub const DEFAULT_MAX_THICKNESS_NM: f64 = 500.0;
pub const DEFAULT_NORMALIZATION_NM: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub template: StackTemplate,
    pub grid: SpectralGrid,
    pub weights: AimWeights,
    pub initial_thicknesses_nm: Vec<f64>,
    /// Number of step sizes per direction: `1, 0.1, …, 10^-(N-1)` nm.
    pub precision_level: u32,
    pub no_improve_window: u32,
    /// Aims below this end the episode with reward `-1`. `-∞` disables the check.
    pub aim_threshold: f64,
    pub max_steps_per_episode: u64,
    pub min_thickness_nm: Vec<f64>,
    pub max_thickness_nm: Vec<f64>,
    /// Thicknesses are divided by this before entering the Q-network.
    pub normalization_nm: f64,
}

impl EnvConfig {
    /// Config with default step, window and bound settings.
    pub fn new(
        template: StackTemplate,
        grid: SpectralGrid,
        weights: AimWeights,
        initial_thicknesses_nm: Vec<f64>,
    ) -> Self {
        let layers = template.free_layer_count();
        Self {
            template,
            grid,
            weights,
            initial_thicknesses_nm,
            precision_level: 1,
            no_improve_window: DEFAULT_NO_IMPROVE_WINDOW,
            aim_threshold: f64::NEG_INFINITY,
            max_steps_per_episode: DEFAULT_MAX_STEPS_PER_EPISODE,
            min_thickness_nm: vec![DEFAULT_MIN_THICKNESS_NM; layers],
            max_thickness_nm: vec![DEFAULT_MAX_THICKNESS_NM; layers],
            normalization_nm: DEFAULT_NORMALIZATION_NM,
        }
    }

    pub fn with_uniform_bounds(mut self, min_nm: f64, max_nm: f64) -> Self {
        let layers = self.template.free_layer_count();
        self.min_thickness_nm = vec![min_nm; layers];
        self.max_thickness_nm = vec![max_nm; layers];
        self
    }

    pub fn free_layer_count(&self) -> usize {
        self.template.free_layer_count()
    }

    /// Collects every invariant violation into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let layers = self.free_layer_count();
        if layers == 0 {
            problems.push("stack needs at least one free layer".to_string());
        }
        if self.precision_level < 1 {
            problems.push("precision_level must be >= 1".into());
        }
        if self.precision_level > 15 {
            problems.push("precision_level above 15 is below f64 resolution".into());
        }
        if self.no_improve_window < 1 {
            problems.push("no_improve_window must be >= 1".into());
        }
        if self.max_steps_per_episode < 1 {
            problems.push("max_steps_per_episode must be >= 1".into());
        }
        if self.aim_threshold.is_nan() {
            problems.push("aim_threshold must not be NaN".into());
        }
        if !(self.normalization_nm.is_finite() && self.normalization_nm > 0.0) {
            problems.push("normalization_nm must be positive".into());
        }
        if let Err(e) = self.weights.validate() {
            problems.push(e.to_string());
        }
        for (what, v) in [
            ("initial_thicknesses_nm", &self.initial_thicknesses_nm),
            ("min_thickness_nm", &self.min_thickness_nm),
            ("max_thickness_nm", &self.max_thickness_nm),
        ] {
            if v.len() != layers {
                problems.push(format!("{what} has {} entries for {layers} free layers", v.len()));
            }
        }
        if problems.is_empty() {
            for i in 0..layers {
                let (lo, hi, init) = (
                    self.min_thickness_nm[i],
                    self.max_thickness_nm[i],
                    self.initial_thicknesses_nm[i],
                );
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                    problems.push(format!("layer {}: bounds must satisfy 0 <= min < max, got [{lo}, {hi}]", i + 1));
                } else if !(lo..=hi).contains(&init) {
                    problems.push(format!("layer {}: initial thickness {init} outside [{lo}, {hi}]", i + 1));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }
}

/// Free-layer thicknesses in nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub thicknesses_nm: Vec<f64>,
}

impl EnvState {
    pub fn new(thicknesses_nm: Vec<f64>) -> Self {
        Self { thicknesses_nm }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    /// 1-based, counted from the incident side.
    pub layer_index: usize,
    pub delta_nm: f64,
}

/// Enumerates actions layer-major, then by decreasing step size, `+` before `-`.
pub fn action_table(config: &EnvConfig) -> Vec<ActionSpec> {
    let mut actions = Vec::with_capacity(2 * config.precision_level as usize * config.free_layer_count());
    for layer in 1..=config.free_layer_count() {
        for k in 0..config.precision_level as i32 {
            let step = 1.0 / 10f64.powi(k);
            actions.push(ActionSpec { layer_index: layer, delta_nm: step });
            actions.push(ActionSpec { layer_index: layer, delta_nm: -step });
        }
    }
    actions
}

/// One step of experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Position in the environment's emission order.
    pub seq: u64,
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub next_state: EnvState,
    pub terminal: bool,
    /// Aim of `next_state`.
    pub aim: f64,
    /// Band means of `next_state`.
    pub means: Rta,
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    evaluator: StackEvaluator,
    actions: Vec<ActionSpec>,
    initial_aim: f64,
    episode_best: f64,
    episode_steps: u64,
    no_improve: u32,
    active: bool,
    emitted: u64,
    evaluations: u64,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let evaluator = StackEvaluator::new(&config.template, config.grid)?;
        let initial_aim = evaluator.aim(&config.initial_thicknesses_nm, &config.weights)?;
        let actions = action_table(&config);
        Ok(Self {
            config,
            evaluator,
            actions,
            initial_aim,
            episode_best: initial_aim,
            episode_steps: 0,
            no_improve: 0,
            active: false,
            emitted: 0,
            evaluations: 1,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn observation_dim(&self) -> usize {
        self.config.free_layer_count()
    }

    pub fn evaluator(&self) -> &StackEvaluator {
        &self.evaluator
    }

    pub fn initial_state(&self) -> EnvState {
        EnvState::new(self.config.initial_thicknesses_nm.clone())
    }

    pub fn initial_aim(&self) -> f64 {
        self.initial_aim
    }

    /// Best aim reached in the current episode.
    pub fn episode_best_aim(&self) -> f64 {
        self.episode_best
    }

    pub fn episode_steps(&self) -> u64 {
        self.episode_steps
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Number of optics evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Starts a new episode at the configured initial thicknesses.
    pub fn reset(&mut self) -> EnvState {
        self.episode_best = self.initial_aim;
        self.episode_steps = 0;
        self.no_improve = 0;
        self.active = true;
        self.initial_state()
    }

    fn check_state(&self, state: &EnvState) -> Result<()> {
        let n = self.config.free_layer_count();
        if state.thicknesses_nm.len() != n {
            return Err(Error::Contract(format!(
                "state has {} thicknesses, expected {n}",
                state.thicknesses_nm.len()
            )));
        }
        for (i, &d) in state.thicknesses_nm.iter().enumerate() {
            if !(self.config.min_thickness_nm[i]..=self.config.max_thickness_nm[i]).contains(&d) {
                return Err(Error::Contract(format!("layer {}: thickness {d} outside bounds", i + 1)));
            }
        }
        Ok(())
    }

    /// Applies `action` to `state`.
    pub fn step(&mut self, state: &EnvState, action: usize) -> Result<Transition> {
        if !self.active {
            return Err(Error::Contract("episode is over; call reset() first".into()));
        }
        let spec = *self.actions.get(action).ok_or_else(|| {
            Error::Contract(format!("action {action} outside table of {}", self.actions.len()))
        })?;
        self.check_state(state)?;

        let i = spec.layer_index - 1;
        let mut next = state.clone();
        next.thicknesses_nm[i] = (next.thicknesses_nm[i] + spec.delta_nm)
            .clamp(self.config.min_thickness_nm[i], self.config.max_thickness_nm[i]);
        let means = self.evaluator.means(&next.thicknesses_nm)?;
        let aim = self.config.weights.score(&means);
        self.evaluations += 1;
        self.episode_steps += 1;

        let (reward, mut terminal) = if aim < self.config.aim_threshold {
            (-1.0, true)
        } else if aim > self.episode_best {
            let gain = aim - self.episode_best;
            self.episode_best = aim;
            self.no_improve = 0;
            (gain, false)
        } else {
            self.no_improve += 1;
            (0.0, self.no_improve >= self.config.no_improve_window)
        };
        if self.episode_steps >= self.config.max_steps_per_episode {
            terminal = true;
        }
        if terminal {
            self.active = false;
        }

        let seq = self.emitted;
        self.emitted += 1;
        Ok(Transition {
            seq,
            state: state.clone(),
            action,
            reward,
            next_state: next,
            terminal,
            aim,
            means,
        })
    }

    /// Network input: thicknesses divided by the normalisation constant.
    pub fn encode_observation(&self, state: &EnvState) -> Vec<f64> {
        encode_observation(state, self.config.normalization_nm)
    }

    pub fn decode_observation(&self, observation: &[f64]) -> EnvState {
        decode_observation(observation, self.config.normalization_nm)
    }

    pub fn aim_of(&self, state: &EnvState) -> Result<f64> {
        self.evaluator.aim(&state.thicknesses_nm, &self.config.weights)
    }

    pub fn response_of(&self, state: &EnvState) -> Result<SpectralResponse> {
        self.evaluator.response(&state.thicknesses_nm)
    }
}

pub fn encode_observation(state: &EnvState, normalization_nm: f64) -> Vec<f64> {
    state.thicknesses_nm.iter().map(|d| d / normalization_nm).collect()
}

pub fn decode_observation(observation: &[f64], normalization_nm: f64) -> EnvState {
    EnvState::new(observation.iter().map(|x| x * normalization_nm).collect())
}

/// Running argmax over visited designs; the earliest of equal aims wins.
#[derive(Debug, Clone, Default)]
pub struct BestTracker {
    best: Option<(EnvState, f64)>,
}

impl BestTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, state: &EnvState, aim: f64) {
        if self.best.as_ref().is_none_or(|(_, best)| aim > *best) {
            self.best = Some((state.clone(), aim));
        }
    }

    pub fn best(&self) -> Option<(&EnvState, f64)> {
        self.best.as_ref().map(|(s, a)| (s, *a))
    }
}

/// Best design found, with its full spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct BestDesign {
    pub state: EnvState,
    pub aim: f64,
    pub response: SpectralResponse,
}

/// Picks the highest-aim design from a visit history (earliest on ties) and
/// evaluates its spectrum.
pub fn best_design<'a, I>(history: I, evaluator: &StackEvaluator) -> Result<BestDesign>
where
    I: IntoIterator<Item = (&'a EnvState, f64)>,
{
    let mut tracker = BestTracker::new();
    for (state, aim) in history {
        tracker.observe(state, aim);
    }
    let (state, aim) = tracker
        .best()
        .ok_or_else(|| Error::Contract("best_design needs at least one evaluated state".into()))?;
    Ok(BestDesign {
        state: state.clone(),
        aim,
        response: evaluator.response(&state.thicknesses_nm)?,
    })
}

/// Header of the episode trace CSV.
pub const TRACE_HEADER: &str = "step,layer,delta,aim,reward,terminal";

/// One trace row for `transition`.
pub fn trace_row(step: u64, actions: &[ActionSpec], transition: &Transition) -> String {
    let spec = actions[transition.action];
    let mut row = String::new();
    let _ = write!(
        row,
        "{step},{},{},{},{},{}",
        spec.layer_index, spec.delta_nm, transition.aim, transition.reward, transition.terminal
    );
    row
}
