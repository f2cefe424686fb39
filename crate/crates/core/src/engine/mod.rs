//! Generic multiobjective evolutionary machinery.
//!
//! Everything here minimizes. Problems that maximize a quantity negate it
//! before handing the objective vector to the engine.

mod archive;
mod dominance;
mod nsga2;
mod operators;
mod rng;
mod sort;
mod spea2;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use archive::{InsertOutcome, ParetoArchive};
pub use dominance::{dominates, ObjectiveVector};
pub use nsga2::run_nsga2;
pub use operators::{
    binary_tournament, bit_flip_mutation, polynomial_mutation, sbx_crossover,
    single_point_crossover, single_point_crossover_at, tournament_pick, Bounds, SelectionGenome,
    WeightGenome,
};
pub(crate) use operators::{bit_flip_in_place, polynomial_mutation_in_place};
pub use rng::{derive_seed, stream_rng, EaRng, Stream};
pub use sort::{crowding_distance, fast_nondominated_sort, CROWDING_SENTINEL};
pub use spea2::{
    run_spea2, spea2_assign_fitness, spea2_environmental_selection, spea2_raw_fitness,
    spea2_strengths, Spea2Outcome,
};
pub use trace::TraceWriter;

/// Result of evaluating one genome: raw objective values plus an aggregate,
/// normalized constraint violation (0 when feasible).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub violation: f64,
}

impl Evaluation {
    pub fn feasible(objectives: Vec<f64>) -> Self {
        Evaluation {
            objectives,
            violation: 0.0,
        }
    }
}

/// Anything with a fixed genome length.
pub trait Genome: Clone + Send + Sync + std::fmt::Debug {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A problem the engine can optimize. Evaluation must be side-effect free,
/// since the engine evaluates a generation in parallel.
pub trait Problem: Sync {
    type Genome: Genome;

    fn objective_count(&self) -> usize;

    fn genome_len(&self) -> usize;

    fn evaluate(&self, genome: &Self::Genome) -> Evaluation;

    fn random_genome(&self, rng: &mut EaRng) -> Self::Genome;

    fn crossover(
        &self,
        a: &Self::Genome,
        b: &Self::Genome,
        params: &EaParams,
        rng: &mut EaRng,
    ) -> (Self::Genome, Self::Genome);

    fn mutate(&self, genome: &mut Self::Genome, params: &EaParams, rng: &mut EaRng);

    /// Fitness scaling applied before selection. Identity unless a problem
    /// overrides it.
    fn scale_fitness(&self, fitness: f64) -> f64 {
        fitness
    }
}

/// One member of a population.
#[derive(Debug, Clone)]
pub struct Individual<G> {
    pub genome: G,
    /// Penalized objectives; `None` until evaluated.
    pub objectives: Option<ObjectiveVector>,
    pub violation: f64,
    /// Algorithm-assigned scalar (SPEA2 fitness; unused by NSGA-II).
    pub fitness: f64,
}

impl<G> Individual<G> {
    pub fn new(genome: G) -> Self {
        Individual {
            genome,
            objectives: None,
            violation: 0.0,
            fitness: 0.0,
        }
    }

    pub fn evaluated(genome: G, objectives: ObjectiveVector) -> Self {
        Individual {
            genome,
            objectives: Some(objectives),
            violation: 0.0,
            fitness: 0.0,
        }
    }

    /// Panics on an unevaluated individual; the engine only exposes evaluated ones.
    pub fn objectives(&self) -> &ObjectiveVector {
        self.objectives
            .as_ref()
            .expect("individual has not been evaluated")
    }

    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }
}

fn default_crossover_rate() -> f64 {
    1.0
}
fn default_sbx_eta() -> f64 {
    15.0
}
fn default_pm_eta() -> f64 {
    20.0
}
fn default_penalty_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EaParams {
    pub population_size: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    /// SPEA2 only. Zero means "same as population_size".
    #[serde(default)]
    pub archive_size: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_crossover_rate")]
    pub crossover_rate: f64,
    #[serde(default = "default_sbx_eta")]
    pub sbx_eta: f64,
    #[serde(default = "default_pm_eta")]
    pub pm_eta: f64,
    /// Violation penalty, as a multiple of each objective's generation-zero range.
    #[serde(default = "default_penalty_factor")]
    pub penalty_factor: f64,
    #[serde(skip)]
    pub trace: Option<TraceWriter>,
}

impl EaParams {
    pub fn new(population_size: usize, generations: usize, mutation_rate: f64) -> Self {
        EaParams {
            population_size,
            generations,
            mutation_rate,
            archive_size: 0,
            rng_seed: 0,
            crossover_rate: default_crossover_rate(),
            sbx_eta: default_sbx_eta(),
            pm_eta: default_pm_eta(),
            penalty_factor: default_penalty_factor(),
            trace: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_archive_size(mut self, archive_size: usize) -> Self {
        self.archive_size = archive_size;
        self
    }

    pub fn effective_archive_size(&self) -> usize {
        if self.archive_size == 0 {
            self.population_size
        } else {
            self.archive_size
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.generations < 1 {
            return Err(Error::InvalidArgument(
                "generations must be at least 1".into(),
            ));
        }
        for (name, p) in [
            ("mutation_rate", self.mutation_rate),
            ("crossover_rate", self.crossover_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be in [0, 1], got {p}"
                )));
            }
        }
        if !(self.sbx_eta > 0.0 && self.pm_eta > 0.0) {
            return Err(Error::InvalidArgument(
                "distribution indices must be positive".into(),
            ));
        }
        if !(self.penalty_factor.is_finite() && self.penalty_factor > 0.0) {
            return Err(Error::InvalidArgument(
                "penalty_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-objective penalty scale, fixed from the generation-zero population so
/// that penalized objective values stay comparable across generations.
#[derive(Debug, Clone)]
pub(crate) struct PenaltyScale(Vec<f64>);

impl PenaltyScale {
    pub(crate) fn from_generation_zero(evals: &[Evaluation], factor: f64) -> Self {
        let m = evals.first().map_or(0, |e| e.objectives.len());
        let scales = (0..m)
            .map(|i| {
                let (lo, hi) = evals.iter().fold((f64::MAX, f64::MIN), |(lo, hi), e| {
                    (lo.min(e.objectives[i]), hi.max(e.objectives[i]))
                });
                let magnitude = lo.abs().max(hi.abs());
                let range = hi - lo;
                let base = if range > 1e-12 * magnitude.max(1e-300) {
                    range
                } else {
                    magnitude.max(1.0)
                };
                factor * base
            })
            .collect();
        PenaltyScale(scales)
    }

    pub(crate) fn apply(&self, eval: &Evaluation) -> ObjectiveVector {
        let values = eval
            .objectives
            .iter()
            .zip(&self.0)
            .map(|(&v, &s)| v + s * eval.violation)
            .collect();
        ObjectiveVector::new(values)
    }
}

pub(crate) fn check_seeds<G: Genome>(seeds: &[G], genome_len: usize) -> Result<()> {
    for (i, s) in seeds.iter().enumerate() {
        if s.len() != genome_len {
            return Err(Error::InvalidArgument(format!(
                "seed genome {i} has length {}, problem expects {genome_len}",
                s.len()
            )));
        }
    }
    Ok(())
}

pub(crate) fn evaluate_all<P: Problem>(problem: &P, genomes: &[P::Genome]) -> Vec<Evaluation> {
    use rayon::prelude::*;
    let m = problem.objective_count();
    genomes
        .par_iter()
        .map(|g| {
            let e = problem.evaluate(g);
            debug_assert_eq!(e.objectives.len(), m, "objective count mismatch");
            debug_assert!(
                e.objectives.iter().all(|v| v.is_finite()) && e.violation.is_finite(),
                "non-finite evaluation {e:?}"
            );
            e
        })
        .collect()
}

pub(crate) fn initial_genomes<P: Problem>(
    problem: &P,
    params: &EaParams,
    seeds: &[P::Genome],
) -> Vec<P::Genome> {
    let mut rng = stream_rng(params.rng_seed, 0, Stream::Init);
    let mut genomes: Vec<P::Genome> = seeds.iter().take(params.population_size).cloned().collect();
    while genomes.len() < params.population_size {
        genomes.push(problem.random_genome(&mut rng));
    }
    genomes
}

/// Per-objective minimum over a set of individuals, for trace output.
pub(crate) fn best_objectives<'a>(objs: impl Iterator<Item = &'a ObjectiveVector>) -> Vec<f64> {
    let mut best: Vec<f64> = Vec::new();
    for o in objs {
        if best.is_empty() {
            best = o.values().to_vec();
        } else {
            for (b, &v) in best.iter_mut().zip(o.values()) {
                *b = b.min(v);
            }
        }
    }
    best
}
