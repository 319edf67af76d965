//! Real-coded genetic algorithm baseline over the same thickness space.
//!
//! Tournament selection, uniform crossover, per-gene Gaussian mutation clamped
//! to the bounds, and elitism. Fitness is the aim. The RNG is consumed only on
//! the main thread, so results do not depend on how fitness evaluation is
//! scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::environment::{DEFAULT_MAX_THICKNESS_NM, DEFAULT_MIN_THICKNESS_NM};
use crate::error::{Error, Result};
use crate::optics::{AimWeights, Rta, SpectralGrid, StackEvaluator, StackTemplate};
use crate::report::{CurvePoint, OptimizerKind, RunReport};

pub const TOURNAMENT_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: u64,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    pub mutation_sigma_nm: f64,
    pub elitism_count: usize,
    pub min_thickness_nm: Vec<f64>,
    pub max_thickness_nm: Vec<f64>,
    pub seed: u64,
    /// Stop before a generation that would exceed this many evaluations.
    pub max_evaluations: Option<u64>,
}

impl GaConfig {
    pub fn new(layers: usize) -> Self {
        Self {
            population_size: 50,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma_nm: 5.0,
            elitism_count: 2,
            min_thickness_nm: vec![DEFAULT_MIN_THICKNESS_NM; layers],
            max_thickness_nm: vec![DEFAULT_MAX_THICKNESS_NM; layers],
            seed: 0,
            max_evaluations: None,
        }
    }

    pub fn layers(&self) -> usize {
        self.min_thickness_nm.len()
    }

    /// Evaluations a full run uses.
    pub fn planned_evaluations(&self) -> u64 {
        self.population_size as u64 + self.generations * (self.population_size - self.elitism_count.min(self.population_size)) as u64
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.population_size < 2 {
            problems.push("population_size must be >= 2".to_string());
        }
        if self.elitism_count >= self.population_size {
            problems.push(format!(
                "elitism_count {} must be below population_size {}",
                self.elitism_count, self.population_size
            ));
        }
        for (what, v) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{what} must be in [0, 1], got {v}"));
            }
        }
        if !(self.mutation_sigma_nm.is_finite() && self.mutation_sigma_nm > 0.0) {
            problems.push(format!("mutation_sigma_nm must be > 0, got {}", self.mutation_sigma_nm));
        }
        if self.min_thickness_nm.is_empty() || self.min_thickness_nm.len() != self.max_thickness_nm.len() {
            problems.push("bounds need one entry per free layer".into());
        } else {
            for (i, (&lo, &hi)) in self.min_thickness_nm.iter().zip(&self.max_thickness_nm).enumerate() {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
                    problems.push(format!("layer {}: bounds must satisfy 0 <= min < max, got [{lo}, {hi}]", i + 1));
                }
            }
        }
        if let Some(cap) = self.max_evaluations {
            if cap < self.population_size as u64 {
                problems.push(format!(
                    "max_evaluations {cap} cannot cover the initial population of {}",
                    self.population_size
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub report: RunReport,
    pub final_population: Vec<Vec<f64>>,
    pub final_fitness: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Scored {
    aim: f64,
    means: Rta,
}

fn evaluate_all(evaluator: &StackEvaluator, weights: &AimWeights, genomes: &[Vec<f64>]) -> Result<Vec<Scored>> {
    genomes
        .par_iter()
        .map(|g| {
            let means = evaluator.means(g)?;
            Ok(Scored {
                aim: weights.score(&means),
                means,
            })
        })
        .collect()
}

fn tournament<R: Rng>(rng: &mut R, scores: &[Scored]) -> usize {
    let mut best = rng.random_range(0..scores.len());
    for _ in 1..TOURNAMENT_SIZE {
        let c = rng.random_range(0..scores.len());
        if scores[c].aim > scores[best].aim {
            best = c;
        }
    }
    best
}

/// Runs the GA from a uniformly random population.
pub fn run_ga(template: &StackTemplate, grid: SpectralGrid, weights: &AimWeights, config: &GaConfig) -> Result<GaOutcome> {
    config.validate()?;
    if template.free_layer_count() != config.layers() {
        return Err(Error::Validation(format!(
            "bounds given for {} layers, stack has {} free layers",
            config.layers(),
            template.free_layer_count()
        )));
    }
    let evaluator = StackEvaluator::new(template, grid)?;
    let mut rng = init_rng(config.seed);
    let population = (0..config.population_size)
        .map(|_| {
            config
                .min_thickness_nm
                .iter()
                .zip(&config.max_thickness_nm)
                .map(|(&lo, &hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect();
    evolve(&evaluator, weights, config, population, rng)
}

/// Runs the GA from a given initial population.
pub fn run_ga_from_population(
    evaluator: &StackEvaluator,
    weights: &AimWeights,
    config: &GaConfig,
    population: Vec<Vec<f64>>,
) -> Result<GaOutcome> {
    config.validate()?;
    if population.len() != config.population_size {
        return Err(Error::Validation(format!(
            "initial population has {} members, expected {}",
            population.len(),
            config.population_size
        )));
    }
    for (i, g) in population.iter().enumerate() {
        let inside = g.len() == evaluator.free_layer_count()
            && g.len() == config.layers()
            && g.iter()
                .enumerate()
                .all(|(l, d)| (config.min_thickness_nm[l]..=config.max_thickness_nm[l]).contains(d));
        if !inside {
            return Err(Error::Validation(format!("initial individual {i} is malformed or out of bounds")));
        }
    }
    evolve(evaluator, weights, config, population, init_rng(config.seed))
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn evolve(
    evaluator: &StackEvaluator,
    weights: &AimWeights,
    config: &GaConfig,
    mut population: Vec<Vec<f64>>,
    mut rng: ChaCha8Rng,
) -> Result<GaOutcome> {
    let mut scores = evaluate_all(evaluator, weights, &population)?;
    let mut evaluations = population.len() as u64;
    let mut offspring_total = 0u64;

    let mut best_idx = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.aim > scores[best_idx].aim {
            best_idx = i;
        }
    }
    let mut best_genome = population[best_idx].clone();
    let mut best = scores[best_idx];
    let mut curve = vec![CurvePoint::new(0, best.aim, &best.means)];

    let normal = Normal::new(0.0, config.mutation_sigma_nm)
        .map_err(|e| Error::Validation(format!("mutation_sigma_nm: {e}")))?;
    let pop = config.population_size;
    let children_per_gen = pop - config.elitism_count;
    let mut generations_run = 0;

    for generation in 1..=config.generations {
        if config
            .max_evaluations
            .is_some_and(|cap| evaluations + children_per_gen as u64 > cap)
        {
            break;
        }
        let mut order: Vec<usize> = (0..pop).collect();
        order.sort_by(|&a, &b| scores[b].aim.total_cmp(&scores[a].aim).then(a.cmp(&b)));

        let mut children: Vec<Vec<f64>> = Vec::with_capacity(children_per_gen);
        while children.len() < children_per_gen {
            let p1 = &population[tournament(&mut rng, &scores)];
            let p2 = &population[tournament(&mut rng, &scores)];
            let (mut c1, mut c2) = (p1.clone(), p2.clone());
            if rng.random::<f64>() < config.crossover_rate {
                for g in 0..c1.len() {
                    if rng.random::<f64>() < 0.5 {
                        std::mem::swap(&mut c1[g], &mut c2[g]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                for (g, gene) in child.iter_mut().enumerate() {
                    if rng.random::<f64>() < config.mutation_rate {
                        *gene = (*gene + normal.sample(&mut rng))
                            .clamp(config.min_thickness_nm[g], config.max_thickness_nm[g]);
                    }
                }
            }
            children.push(c1);
            if children.len() < children_per_gen {
                children.push(c2);
            }
        }

        let child_scores = evaluate_all(evaluator, weights, &children)?;
        evaluations += children.len() as u64;
        offspring_total += children.len() as u64;

        let mut next_pop = Vec::with_capacity(pop);
        let mut next_scores = Vec::with_capacity(pop);
        for &e in order.iter().take(config.elitism_count) {
            next_pop.push(population[e].clone());
            next_scores.push(scores[e]);
        }
        for (c, s) in children.into_iter().zip(child_scores) {
            if s.aim > best.aim {
                best = s;
                best_genome = c.clone();
            }
            next_pop.push(c);
            next_scores.push(s);
        }
        population = next_pop;
        scores = next_scores;
        generations_run = generation;
        curve.push(CurvePoint::new(generation, best.aim, &best.means));
    }

    let response = evaluator.response(&best_genome)?;
    Ok(GaOutcome {
        report: RunReport {
            optimizer: OptimizerKind::Ga,
            seed: config.seed,
            episodes: generations_run,
            total_steps: offspring_total,
            evaluations,
            best_thicknesses_nm: best_genome,
            best_aim: best.aim,
            mean_r: best.means.r,
            mean_t: best.means.t,
            mean_a: best.means.a,
            curve,
            best_response: Some(response),
        },
        final_population: population,
        final_fitness: scores.iter().map(|s| s.aim).collect(),
    })
}
