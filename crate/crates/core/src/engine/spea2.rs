//! SPEA2: strength/density fitness, truncating environmental selection, and
//! the main loop.

use std::borrow::Borrow;
use std::cmp::Ordering;

use rand::Rng;

use super::{
    best_objectives, binary_tournament, check_seeds, evaluate_all, initial_genomes, stream_rng,
    EaParams, Individual, ObjectiveVector, ParetoArchive, PenaltyScale, Problem, Stream,
};
use crate::error::Result;

/// Number of union members each member dominates.
pub fn spea2_strengths<O: Borrow<ObjectiveVector>>(union: &[O]) -> Vec<usize> {
    let n = union.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && union[i].borrow().dominates(union[j].borrow()))
                .count()
        })
        .collect()
}

/// Raw fitness: summed strengths of each member's dominators (0 when
/// non-dominated).
pub fn spea2_raw_fitness<O: Borrow<ObjectiveVector>>(union: &[O]) -> Vec<f64> {
    let strengths = spea2_strengths(union);
    let n = union.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i && union[j].borrow().dominates(union[i].borrow()))
                .map(|j| strengths[j] as f64)
                .sum()
        })
        .collect()
}

/// Euclidean distances in objective space, each objective normalized by its
/// range over the set. Objectives with zero range contribute nothing.
fn normalized_distances<O: Borrow<ObjectiveVector>>(points: &[O]) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let m = points[0].borrow().len();
    let inv_range: Vec<f64> = (0..m)
        .map(|k| {
            let (lo, hi) = points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                let v = p.borrow()[k];
                (lo.min(v), hi.max(v))
            });
            if hi > lo {
                1.0 / (hi - lo)
            } else {
                0.0
            }
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points[i].borrow(), points[j].borrow());
            let s: f64 = (0..m)
                .map(|k| ((a[k] - b[k]) * inv_range[k]).powi(2))
                .sum();
            let dist = s.sqrt();
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }
    d
}

/// SPEA2 fitness over `population ∪ archive` (population first): raw fitness
/// plus density `1 / (σ_k + 2)` with `k = ⌊√n⌋`. Non-dominated members end
/// up strictly below 1, dominated members at 1 or above.
pub fn spea2_assign_fitness<O: Borrow<ObjectiveVector>>(population: &[O], archive: &[O]) -> Vec<f64> {
    let union: Vec<&ObjectiveVector> = population
        .iter()
        .chain(archive)
        .map(|o| o.borrow())
        .collect();
    union_fitness(&union)
}

fn union_fitness(union: &[&ObjectiveVector]) -> Vec<f64> {
    let n = union.len();
    let raw = spea2_raw_fitness(union);
    let dist = normalized_distances(union);
    let k = ((n as f64).sqrt().floor() as usize).max(1);
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            row.sort_by(f64::total_cmp);
            let sigma = if row.is_empty() {
                0.0
            } else {
                row[(k - 1).min(row.len() - 1)]
            };
            raw[i] + 1.0 / (sigma + 2.0)
        })
        .collect()
}

/// Shrinks a point set to `target` members by repeatedly removing the member
/// whose sorted distances to the remaining members are lexicographically
/// smallest. Protected members are removed only if nothing else is left.
/// Returns kept indices in ascending order.
pub(crate) fn truncate_by_density(points: &[&ObjectiveVector], target: usize, protected: &[bool]) -> Vec<usize> {
    let n = points.len();
    if n <= target {
        return (0..n).collect();
    }
    let dist = normalized_distances(points);
    let neighbors: Vec<Vec<(f64, usize)>> = (0..n)
        .map(|i| {
            let mut row: Vec<(f64, usize)> =
                (0..n).filter(|&j| j != i).map(|j| (dist[i][j], j)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            row
        })
        .collect();
    let mut alive = vec![true; n];
    let mut remaining = n;

    let compare = |a: usize, b: usize, alive: &[bool]| -> Ordering {
        let mut ia = neighbors[a].iter().filter(|(_, j)| alive[*j]);
        let mut ib = neighbors[b].iter().filter(|(_, j)| alive[*j]);
        loop {
            match (ia.next(), ib.next()) {
                (Some(x), Some(y)) => match x.0.total_cmp(&y.0) {
                    Ordering::Equal => continue,
                    other => return other,
                },
                _ => return a.cmp(&b),
            }
        }
    };

    while remaining > target {
        let pool: Vec<usize> = {
            let unprotected: Vec<usize> = (0..n).filter(|&i| alive[i] && !protected[i]).collect();
            if unprotected.is_empty() {
                (0..n).filter(|&i| alive[i]).collect()
            } else {
                unprotected
            }
        };
        let mut victim = pool[0];
        for &c in &pool[1..] {
            if compare(c, victim, &alive) == Ordering::Less {
                victim = c;
            }
        }
        alive[victim] = false;
        remaining -= 1;
    }
    (0..n).filter(|&i| alive[i]).collect()
}

/// Environmental selection over a union: keeps every non-dominated member,
/// truncating by density when there are too many and filling with the best
/// dominated members (by fitness, then index) when there are too few.
/// Returns selected union indices in ascending order.
pub fn spea2_environmental_selection<O: Borrow<ObjectiveVector>>(union: &[O], archive_size: usize) -> Vec<usize> {
    let refs: Vec<&ObjectiveVector> = union.iter().map(|o| o.borrow()).collect();
    let fitness = union_fitness(&refs);
    select_with_fitness(&refs, &fitness, archive_size)
}

fn select_with_fitness(union: &[&ObjectiveVector], fitness: &[f64], archive_size: usize) -> Vec<usize> {
    let n = union.len();
    if n <= archive_size {
        return (0..n).collect();
    }
    let nondominated: Vec<usize> = (0..n).filter(|&i| fitness[i] < 1.0).collect();
    match nondominated.len().cmp(&archive_size) {
        Ordering::Equal => nondominated,
        Ordering::Greater => {
            let pts: Vec<&ObjectiveVector> = nondominated.iter().map(|&i| union[i]).collect();
            let protected = vec![false; pts.len()];
            truncate_by_density(&pts, archive_size, &protected)
                .into_iter()
                .map(|k| nondominated[k])
                .collect()
        }
        Ordering::Less => {
            let mut dominated: Vec<usize> = (0..n).filter(|&i| fitness[i] >= 1.0).collect();
            dominated.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
            let mut chosen = nondominated;
            chosen.extend(dominated.into_iter().take(archive_size - chosen.len()));
            chosen.sort_unstable();
            chosen
        }
    }
}

/// Final state of a SPEA2 run.
#[derive(Debug, Clone)]
pub struct Spea2Outcome<G> {
    /// Feasible non-dominated individuals found over the whole run.
    pub archive: ParetoArchive<G>,
    pub population: Vec<Individual<G>>,
}

/// SPEA2 with binary-tournament mating on the elite set. Every feasible
/// evaluated individual is also offered to a [`ParetoArchive`] of capacity
/// `archive_size`, which is what the run returns.
///
/// Generation zero is `seeds` verbatim followed by random genomes; the loop
/// then produces `generations` offspring populations.
pub fn run_spea2<P: Problem>(
    problem: &P,
    params: &EaParams,
    seeds: &[P::Genome],
) -> Result<Spea2Outcome<P::Genome>> {
    params.validate()?;
    check_seeds(seeds, problem.genome_len())?;
    let archive_size = params.effective_archive_size();

    let genomes = initial_genomes(problem, params, seeds);
    let evals = evaluate_all(problem, &genomes);
    let penalty = PenaltyScale::from_generation_zero(&evals, params.penalty_factor);
    let mut population = assemble(genomes, &evals, &penalty);
    let mut elite: Vec<Individual<P::Genome>> = Vec::new();
    let mut pareto = ParetoArchive::with_capacity(archive_size);

    for generation in 0..=params.generations {
        pareto.extend(population.iter().filter(|i| i.is_feasible()).cloned());
        debug_assert!(pareto.is_mutually_nondominated());

        let mut union: Vec<Individual<P::Genome>> = population.iter().cloned().chain(elite).collect();
        let objs: Vec<&ObjectiveVector> = union.iter().map(|i| i.objectives()).collect();
        let fitness = union_fitness(&objs);
        let keep = select_with_fitness(&objs, &fitness, archive_size);
        for (ind, f) in union.iter_mut().zip(&fitness) {
            ind.fitness = *f;
        }
        let mut keep_mask = vec![false; union.len()];
        for &k in &keep {
            keep_mask[k] = true;
        }
        elite = union
            .into_iter()
            .zip(keep_mask)
            .filter_map(|(ind, kept)| kept.then_some(ind))
            .collect();

        if let Some(trace) = &params.trace {
            let front0 = elite.iter().filter(|i| i.fitness < 1.0).count();
            let best = best_objectives(elite.iter().map(|i| i.objectives()));
            trace.record("spea2", generation, front0, &best);
        }
        if generation == params.generations {
            break;
        }

        let mut sel_rng = stream_rng(params.rng_seed, generation as u64 + 1, Stream::Selection);
        let mut var_rng = stream_rng(params.rng_seed, generation as u64 + 1, Stream::Variation);
        let scaled: Vec<f64> = elite.iter().map(|i| problem.scale_fitness(i.fitness)).collect();
        let cmp = |a: usize, b: usize| scaled[a].total_cmp(&scaled[b]);
        let mut offspring = Vec::with_capacity(params.population_size);
        while offspring.len() < params.population_size {
            let pa = &elite[binary_tournament(elite.len(), &mut sel_rng, cmp)].genome;
            let pb = &elite[binary_tournament(elite.len(), &mut sel_rng, cmp)].genome;
            let (mut c1, mut c2) = if var_rng.random::<f64>() < params.crossover_rate {
                problem.crossover(pa, pb, params, &mut var_rng)
            } else {
                (pa.clone(), pb.clone())
            };
            problem.mutate(&mut c1, params, &mut var_rng);
            problem.mutate(&mut c2, params, &mut var_rng);
            offspring.push(c1);
            if offspring.len() < params.population_size {
                offspring.push(c2);
            }
        }
        let evals = evaluate_all(problem, &offspring);
        population = assemble(offspring, &evals, &penalty);
    }
    if let Some(trace) = &params.trace {
        trace.flush();
    }

    Ok(Spea2Outcome {
        archive: pareto,
        population,
    })
}

pub(crate) fn assemble<G>(
    genomes: Vec<G>,
    evals: &[super::Evaluation],
    penalty: &PenaltyScale,
) -> Vec<Individual<G>> {
    genomes
        .into_iter()
        .zip(evals)
        .map(|(genome, e)| Individual {
            genome,
            objectives: Some(penalty.apply(e)),
            violation: e.violation,
            fitness: 0.0,
        })
        .collect()
}
