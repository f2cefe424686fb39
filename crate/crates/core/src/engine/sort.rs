use std::borrow::Borrow;

use super::ObjectiveVector;

/// Crowding distance given to boundary solutions. Finite so that objective
/// and fitness values never become infinite.
pub const CROWDING_SENTINEL: f64 = f64::MAX;

/// Deb's fast non-dominated sort. Returns fronts of population indices;
/// front 0 is the non-dominated set and the fronts partition the input.
/// Indices within each front are ascending.
pub fn fast_nondominated_sort<O: Borrow<ObjectiveVector>>(population: &[O]) -> Vec<Vec<usize>> {
    let n = population.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];

    for i in 0..n {
        let a = population[i].borrow();
        for j in (i + 1)..n {
            let b = population[j].borrow();
            if a.dominates(b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if b.dominates(a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// NSGA-II crowding distance with per-objective range normalization. Output
/// order matches input order.
pub fn crowding_distance<O: Borrow<ObjectiveVector>>(front: &[O]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    if n <= 2 {
        return vec![CROWDING_SENTINEL; n];
    }
    let m = front[0].borrow().len();
    let mut distance = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();

    for k in 0..m {
        let value = |i: usize| front[i].borrow()[k];
        // stable: equal values keep index order
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let lo = value(order[0]);
        let hi = value(order[n - 1]);
        distance[order[0]] = CROWDING_SENTINEL;
        distance[order[n - 1]] = CROWDING_SENTINEL;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            let mid = w[1];
            if distance[mid] == CROWDING_SENTINEL {
                continue;
            }
            distance[mid] += (value(w[2]) - value(w[0])) / range;
        }
    }
    distance
}
