use moea_portfolio::engine::{
    fast_nondominated_sort, polynomial_mutation, run_nsga2, run_spea2, sbx_crossover, Bounds, EaParams, EaRng,
    Evaluation, ObjectiveVector, Problem, SelectionGenome, WeightGenome,
};
use proptest::prelude::*;
use rand::Rng;

/// Front index of each point by repeatedly peeling off the non-dominated set.
fn brute_force_ranks(points: &[ObjectiveVector]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; points.len()];
    let mut r = 0;
    while rank.contains(&usize::MAX) {
        let open: Vec<usize> = (0..points.len()).filter(|&i| rank[i] == usize::MAX).collect();
        let front: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&i| !open.iter().any(|&j| points[j].dominates(&points[i])))
            .collect();
        for i in front {
            rank[i] = r;
        }
        r += 1;
    }
    rank
}

proptest! {
    #[test]
    fn sort_matches_brute_force(pts in prop::collection::vec(prop::collection::vec(0u8..6, 3), 1..40)) {
        let objs: Vec<ObjectiveVector> = pts.iter().map(|p| ObjectiveVector::new(p.iter().map(|&x| x as f64).collect())).collect();
        let fronts = fast_nondominated_sort(&objs);
        let expected = brute_force_ranks(&objs);
        let mut got = vec![usize::MAX; objs.len()];
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                got[i] = r;
            }
        }
        prop_assert_eq!(got, expected);
    }
}

/// Ones in the first half, zeros in the second. The single optimum is
/// 11110000.
struct HalfOnes;

impl Problem for HalfOnes {
    type Genome = SelectionGenome;
    fn objective_count(&self) -> usize {
        2
    }
    fn genome_len(&self) -> usize {
        8
    }
    fn evaluate(&self, g: &SelectionGenome) -> Evaluation {
        let a = g.bits()[..4].iter().filter(|&&b| b).count() as f64;
        let b = g.bits()[4..].iter().filter(|&&b| !b).count() as f64;
        Evaluation::feasible(vec![-a, -b])
    }
    fn random_genome(&self, rng: &mut EaRng) -> SelectionGenome {
        SelectionGenome((0..8).map(|_| rng.random::<bool>()).collect())
    }
    fn crossover(&self, a: &SelectionGenome, b: &SelectionGenome, _: &EaParams, rng: &mut EaRng) -> (SelectionGenome, SelectionGenome) {
        moea_portfolio::engine::single_point_crossover(a, b, rng).unwrap()
    }
    fn mutate(&self, g: &mut SelectionGenome, p: &EaParams, rng: &mut EaRng) {
        *g = moea_portfolio::engine::bit_flip_mutation(g, p.mutation_rate, rng);
    }
}

#[test]
fn nsga2_reaches_the_bit_optimum() {
    let front = run_nsga2(&HalfOnes, &EaParams::new(20, 40, 0.1).with_seed(3), &[]).unwrap();
    assert!(front.iter().all(|i| i.objectives().values() == [-4.0, -4.0]));
}

/// Schaffer's problem on a scaled variable: f1 = x^2, f2 = (x - 2)^2 with
/// x = 4u - 1 for u in [0, 1]. The Pareto set is x in [0, 2].
struct Schaffer;

impl Problem for Schaffer {
    type Genome = WeightGenome;
    fn objective_count(&self) -> usize {
        2
    }
    fn genome_len(&self) -> usize {
        1
    }
    fn evaluate(&self, g: &WeightGenome) -> Evaluation {
        let x = 4.0 * g.genes()[0] - 1.0;
        Evaluation::feasible(vec![x * x, (x - 2.0) * (x - 2.0)])
    }
    fn random_genome(&self, rng: &mut EaRng) -> WeightGenome {
        WeightGenome(vec![rng.random::<f64>()])
    }
    fn crossover(&self, a: &WeightGenome, b: &WeightGenome, p: &EaParams, rng: &mut EaRng) -> (WeightGenome, WeightGenome) {
        sbx_crossover(a, b, p.sbx_eta, Bounds::unit(), rng).unwrap()
    }
    fn mutate(&self, g: &mut WeightGenome, p: &EaParams, rng: &mut EaRng) {
        *g = polynomial_mutation(g, p.mutation_rate, p.pm_eta, Bounds::unit(), rng);
    }
}

#[test]
fn spea2_converges_on_a_convex_front() {
    let out = run_spea2(&Schaffer, &EaParams::new(30, 60, 1.0).with_seed(8), &[]).unwrap();
    let members = out.archive.members();
    assert!(members.len() >= 10);
    for m in members {
        let x = 4.0 * m.genome.genes()[0] - 1.0;
        assert!((-1e-3..=2.0 + 1e-3).contains(&x), "{x}");
        let (f1, f2) = (m.objectives()[0], m.objectives()[1]);
        // on the front sqrt(f1) + sqrt(f2) = 2
        assert!((f1.sqrt() + f2.sqrt() - 2.0).abs() < 1e-6);
    }
}

#[test]
fn runs_are_reproducible_and_seed_sensitive() {
    let a = run_spea2(&Schaffer, &EaParams::new(20, 15, 1.0).with_seed(1), &[]).unwrap();
    let b = run_spea2(&Schaffer, &EaParams::new(20, 15, 1.0).with_seed(1), &[]).unwrap();
    let c = run_spea2(&Schaffer, &EaParams::new(20, 15, 1.0).with_seed(2), &[]).unwrap();
    let genes = |o: &moea_portfolio::engine::Spea2Outcome<WeightGenome>| -> Vec<f64> {
        o.archive.members().iter().map(|m| m.genome.genes()[0]).collect()
    };
    assert_eq!(genes(&a), genes(&b));
    assert_ne!(genes(&a), genes(&c));

    let x = run_nsga2(&HalfOnes, &EaParams::new(12, 5, 0.1).with_seed(4), &[]).unwrap();
    let y = run_nsga2(&HalfOnes, &EaParams::new(12, 5, 0.1).with_seed(4), &[]).unwrap();
    let bits = |v: &[moea_portfolio::engine::Individual<SelectionGenome>]| -> Vec<Vec<bool>> {
        v.iter().map(|i| i.genome.bits().to_vec()).collect()
    };
    assert_eq!(bits(&x), bits(&y));
}

#[test]
fn seeds_enter_generation_zero() {
    let seed = SelectionGenome(vec![true, true, true, true, false, false, false, false]);
    let front = run_nsga2(&HalfOnes, &EaParams::new(10, 1, 0.0).with_seed(1), std::slice::from_ref(&seed)).unwrap();
    assert!(front.iter().any(|i| i.genome == seed));
}
