use rand::Rng;

use super::spea2::assemble;
use super::{
    best_objectives, binary_tournament, check_seeds, crowding_distance, evaluate_all,
    fast_nondominated_sort, initial_genomes, stream_rng, EaParams, Individual, ObjectiveVector,
    PenaltyScale, Problem, Stream,
};
use crate::error::Result;

/// Front rank and crowding distance for every member of a population.
fn rank_and_crowding<G>(population: &[Individual<G>]) -> (Vec<usize>, Vec<f64>) {
    let objs: Vec<&ObjectiveVector> = population.iter().map(|i| i.objectives()).collect();
    let mut rank = vec![0; population.len()];
    let mut crowd = vec![0.0; population.len()];
    for (r, front) in fast_nondominated_sort(&objs).into_iter().enumerate() {
        let pts: Vec<&ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Elitist NSGA-II. Generation zero is `seeds` verbatim followed by random
/// genomes; each of the `generations` iterations builds an offspring
/// population by binary tournament (lower rank, then larger crowding),
/// crossover and mutation, and keeps the best `population_size` of parents
/// plus offspring. Returns the final population's first front.
pub fn run_nsga2<P: Problem>(
    problem: &P,
    params: &EaParams,
    seeds: &[P::Genome],
) -> Result<Vec<Individual<P::Genome>>> {
    params.validate()?;
    check_seeds(seeds, problem.genome_len())?;
    let n = params.population_size;

    let genomes = initial_genomes(problem, params, seeds);
    let evals = evaluate_all(problem, &genomes);
    let penalty = PenaltyScale::from_generation_zero(&evals, params.penalty_factor);
    let mut population = assemble(genomes, &evals, &penalty);
    let (mut rank, mut crowd) = rank_and_crowding(&population);

    for generation in 0..params.generations {
        let mut sel_rng = stream_rng(params.rng_seed, generation as u64 + 1, Stream::Selection);
        let mut var_rng = stream_rng(params.rng_seed, generation as u64 + 1, Stream::Variation);
        let cmp = |a: usize, b: usize| rank[a].cmp(&rank[b]).then(crowd[b].total_cmp(&crowd[a]));

        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let pa = &population[binary_tournament(n, &mut sel_rng, cmp)].genome;
            let pb = &population[binary_tournament(n, &mut sel_rng, cmp)].genome;
            let (mut c1, mut c2) = if var_rng.random::<f64>() < params.crossover_rate {
                problem.crossover(pa, pb, params, &mut var_rng)
            } else {
                (pa.clone(), pb.clone())
            };
            problem.mutate(&mut c1, params, &mut var_rng);
            problem.mutate(&mut c2, params, &mut var_rng);
            offspring.push(c1);
            if offspring.len() < n {
                offspring.push(c2);
            }
        }
        let evals = evaluate_all(problem, &offspring);
        let mut union = population;
        union.extend(assemble(offspring, &evals, &penalty));

        let objs: Vec<&ObjectiveVector> = union.iter().map(|i| i.objectives()).collect();
        let mut chosen: Vec<usize> = Vec::with_capacity(n);
        for front in fast_nondominated_sort(&objs) {
            if chosen.len() + front.len() <= n {
                chosen.extend(&front);
            } else {
                let pts: Vec<&ObjectiveVector> = front.iter().map(|&i| objs[i]).collect();
                let d = crowding_distance(&pts);
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
                chosen.extend(order.into_iter().take(n - chosen.len()).map(|k| front[k]));
            }
            if chosen.len() == n {
                break;
            }
        }
        let mut slots: Vec<Option<Individual<P::Genome>>> = union.into_iter().map(Some).collect();
        population = chosen
            .into_iter()
            .map(|i| slots[i].take().expect("index chosen once"))
            .collect();
        (rank, crowd) = rank_and_crowding(&population);

        if let Some(trace) = &params.trace {
            let front0 = rank.iter().filter(|&&r| r == 0).count();
            let best = best_objectives(population.iter().map(|i| i.objectives()));
            trace.record("nsga2", generation + 1, front0, &best);
        }
    }
    if let Some(trace) = &params.trace {
        trace.flush();
    }

    Ok(population
        .into_iter()
        .zip(rank)
        .filter_map(|(ind, r)| (r == 0).then_some(ind))
        .collect())
}
