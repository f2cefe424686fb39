use super::spea2::truncate_by_density;
use super::{Individual, ObjectiveVector};

/// What happened to a candidate offered to a [`ParetoArchive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Added; `evicted` members it dominated were removed.
    Added { evicted: usize },
    /// Dominated by an existing member, not archived.
    Dominated,
    /// An identical objective vector is already archived.
    Duplicate,
}

/// Set of mutually non-dominated individuals maintained with the classic
/// archiving rules: a dominating newcomer evicts what it dominates, a
/// dominated newcomer is discarded, an incomparable newcomer joins.
///
/// With a capacity, overflow is resolved by removing the most crowded
/// members (normalized objective space), never the per-objective extremes.
#[derive(Debug, Clone)]
pub struct ParetoArchive<G> {
    members: Vec<Individual<G>>,
    capacity: Option<usize>,
}

impl<G: Clone> ParetoArchive<G> {
    pub fn unbounded() -> Self {
        ParetoArchive {
            members: Vec::new(),
            capacity: None,
        }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "archive capacity must be positive");
        ParetoArchive {
            members: Vec::new(),
            capacity: Some(capacity),
        }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn members(&self) -> &[Individual<G>] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Individual<G>> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Offers one evaluated individual, then enforces capacity.
    pub fn insert(&mut self, candidate: Individual<G>) -> InsertOutcome {
        let outcome = self.offer(candidate);
        self.enforce_capacity();
        outcome
    }

    /// Offers a batch and enforces capacity once at the end. Mutual
    /// non-domination holds after every individual offer either way.
    pub fn extend(&mut self, candidates: impl IntoIterator<Item = Individual<G>>) {
        for c in candidates {
            self.offer(c);
        }
        self.enforce_capacity();
    }

    fn offer(&mut self, candidate: Individual<G>) -> InsertOutcome {
        let obj = candidate.objectives();
        for m in &self.members {
            let mo = m.objectives();
            if mo.dominates(obj) {
                return InsertOutcome::Dominated;
            }
            if mo == obj {
                return InsertOutcome::Duplicate;
            }
        }
        let before = self.members.len();
        self.members.retain(|m| !obj.dominates(m.objectives()));
        let evicted = before - self.members.len();
        self.members.push(candidate);
        InsertOutcome::Added { evicted }
    }

    fn enforce_capacity(&mut self) {
        let Some(cap) = self.capacity else { return };
        if self.members.len() <= cap {
            return;
        }
        let objs: Vec<&ObjectiveVector> = self.members.iter().map(|m| m.objectives()).collect();
        let m = objs[0].len();
        let mut protected = vec![false; objs.len()];
        for k in 0..m {
            let best = (0..objs.len())
                .min_by(|&a, &b| objs[a][k].total_cmp(&objs[b][k]))
                .expect("non-empty");
            protected[best] = true;
        }
        let keep = truncate_by_density(&objs, cap, &protected);
        let mut keep_iter = keep.into_iter().peekable();
        let mut idx = 0;
        self.members.retain(|_| {
            let kept = keep_iter.peek() == Some(&idx);
            if kept {
                keep_iter.next();
            }
            idx += 1;
            kept
        });
    }

    /// True when no member dominates another.
    pub fn is_mutually_nondominated(&self) -> bool {
        self.members.iter().enumerate().all(|(i, a)| {
            self.members
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || !a.objectives().dominates(b.objectives()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(v: &[f64]) -> Individual<()> {
        Individual::evaluated((), ObjectiveVector::new(v.to_vec()))
    }

    fn points(a: &ParetoArchive<()>) -> Vec<Vec<f64>> {
        a.members().iter().map(|m| m.objectives().values().to_vec()).collect()
    }

    #[test]
    fn dominating_insertion_evicts() {
        let mut a = ParetoArchive::unbounded();
        a.insert(ind(&[1.0, 1.0]));
        assert_eq!(a.insert(ind(&[0.0, 0.0])), InsertOutcome::Added { evicted: 1 });
        assert_eq!(points(&a), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn dominated_insertion_rejected() {
        let mut a = ParetoArchive::unbounded();
        a.insert(ind(&[1.0, 1.0]));
        assert_eq!(a.insert(ind(&[2.0, 2.0])), InsertOutcome::Dominated);
        assert_eq!(points(&a), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn incomparable_insertion_coexists() {
        let mut a = ParetoArchive::unbounded();
        a.insert(ind(&[1.0, 1.0]));
        assert_eq!(a.insert(ind(&[0.0, 3.0])), InsertOutcome::Added { evicted: 0 });
        assert_eq!(points(&a), vec![vec![1.0, 1.0], vec![0.0, 3.0]]);
    }

    #[test]
    fn duplicates_kept_once() {
        let mut a = ParetoArchive::unbounded();
        a.insert(ind(&[1.0, 1.0]));
        assert_eq!(a.insert(ind(&[1.0, 1.0])), InsertOutcome::Duplicate);
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn capacity_keeps_extremes() {
        let mut a = ParetoArchive::with_capacity(3);
        a.extend((0..=10).map(|i| ind(&[i as f64, 10.0 - i as f64])));
        assert_eq!(a.len(), 3);
        let pts = points(&a);
        assert!(pts.contains(&vec![0.0, 10.0]));
        assert!(pts.contains(&vec![10.0, 0.0]));
        assert!(a.is_mutually_nondominated());
    }

    proptest! {
        #[test]
        fn random_streams_stay_nondominated(
            stream in prop::collection::vec(prop::collection::vec(0u8..20, 3), 1..200)
        ) {
            let mut a = ParetoArchive::unbounded();
            for p in &stream {
                a.insert(ind(&p.iter().map(|&x| x as f64).collect::<Vec<_>>()));
                prop_assert!(a.is_mutually_nondominated());
            }
        }
    }
}
