//! Problem-independent evolutionary machinery: hybrid encoding, constrained
//! dominance, non-dominated sorting and variation operators.

mod operators;

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use operators::{polynomial_mutation, sbx_crossover, MutationParams, SbxParams};

/// Bounds of a hybrid genome: continuous genes on closed intervals and
/// discrete genes as indices into grids of a given number of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneSpace {
    pub continuous: Vec<(f64, f64)>,
    pub levels: Vec<usize>,
}

impl GeneSpace {
    pub fn len(&self) -> usize {
        self.continuous.len() + self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Genes that can take more than one value.
    pub fn free_len(&self) -> usize {
        self.continuous.iter().filter(|(lo, hi)| hi > lo).count()
            + self.levels.iter().filter(|&&n| n > 1).count()
    }

    /// Whether `x` respects every bound and grid.
    pub fn contains(&self, x: &ControlVector) -> bool {
        x.continuous.len() == self.continuous.len()
            && x.discrete.len() == self.levels.len()
            && x.continuous
                .iter()
                .zip(&self.continuous)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
            && x.discrete.iter().zip(&self.levels).all(|(&i, &n)| i < n)
    }

    /// Continuous genes uniform within bounds, discrete indices uniform over
    /// their grids.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ControlVector {
        let continuous = self
            .continuous
            .iter()
            .map(|&(lo, hi)| (lo + rng.random::<f64>() * (hi - lo)).clamp(lo, hi))
            .collect();
        let discrete = self
            .levels
            .iter()
            .map(|&n| rng.random_range(0..n))
            .collect();
        ControlVector {
            continuous,
            discrete,
        }
    }
}

/// Hybrid genome. Discrete genes are grid indices, never floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector {
    pub continuous: Vec<f64>,
    pub discrete: Vec<usize>,
}

/// Outcome of evaluating one genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<D> {
    /// Objective values, all minimised.
    pub objectives: Vec<f64>,
    /// Total normalised constraint violation.
    pub violation: f64,
    pub feasible: bool,
    /// Problem-specific payload (e.g. the solved operating point).
    pub detail: D,
}

impl Evaluation<()> {
    /// Feasible evaluation without payload; handy for tests and metrics.
    pub fn feasible(objectives: Vec<f64>) -> Self {
        Self {
            objectives,
            violation: 0.0,
            feasible: true,
            detail: (),
        }
    }

    pub fn infeasible(objectives: Vec<f64>, violation: f64) -> Self {
        Self {
            objectives,
            violation,
            feasible: false,
            detail: (),
        }
    }
}

/// An optimisation problem over a hybrid genome.
pub trait Problem: Sync {
    type Detail: Clone + Send + Sync;

    fn gene_space(&self) -> &GeneSpace;

    fn num_objectives(&self) -> usize;

    /// Must be deterministic: equal genomes give equal evaluations.
    fn evaluate(&self, x: &ControlVector) -> Evaluation<Self::Detail>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual<D> {
    pub controls: ControlVector,
    pub evaluation: Option<Evaluation<D>>,
}

impl<D> Individual<D> {
    pub fn new(controls: ControlVector) -> Self {
        Self {
            controls,
            evaluation: None,
        }
    }

    pub fn is_evaluated(&self) -> bool {
        self.evaluation.is_some()
    }

    /// Panics when the individual has not been evaluated.
    pub fn eval(&self) -> &Evaluation<D> {
        self.evaluation
            .as_ref()
            .expect("individual used before evaluation")
    }

    pub fn objectives(&self) -> &[f64] {
        &self.eval().objectives
    }
}

/// A draw from [`GeneSpace::sample`] wrapped as an unevaluated individual.
pub fn random_individual<D, R: Rng + ?Sized>(space: &GeneSpace, rng: &mut R) -> Individual<D> {
    Individual::new(space.sample(rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population<D> {
    pub members: Vec<Individual<D>>,
    pub generation: usize,
}

/// Result of comparing two solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// The first argument dominates the second.
    First,
    /// The second argument dominates the first.
    Second,
    Incomparable,
}

/// Plain Pareto dominance, all objectives minimised.
pub fn pareto_dominance(a: &[f64], b: &[f64]) -> Dominance {
    let mut a_better = false;
    let mut b_better = false;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Less) => a_better = true,
            Some(Ordering::Greater) => b_better = true,
            _ => {}
        }
        if a_better && b_better {
            return Dominance::Incomparable;
        }
    }
    match (a_better, b_better) {
        (true, false) => Dominance::First,
        (false, true) => Dominance::Second,
        _ => Dominance::Incomparable,
    }
}

/// Feasibility-first dominance: feasible beats infeasible, infeasible pairs
/// compare by total violation, feasible pairs by Pareto dominance.
pub fn constrained_dominance<D>(a: &Evaluation<D>, b: &Evaluation<D>) -> Dominance {
    match (a.feasible, b.feasible) {
        (true, true) => pareto_dominance(&a.objectives, &b.objectives),
        (true, false) => Dominance::First,
        (false, true) => Dominance::Second,
        (false, false) => match a.violation.partial_cmp(&b.violation) {
            Some(Ordering::Less) => Dominance::First,
            Some(Ordering::Greater) => Dominance::Second,
            _ => Dominance::Incomparable,
        },
    }
}

/// Constrained dominance between two evaluated individuals.
pub fn dominates<D>(a: &Individual<D>, b: &Individual<D>) -> Dominance {
    constrained_dominance(a.eval(), b.eval())
}

/// Fast non-dominated sort under an arbitrary dominance relation. Returns
/// fronts of indices; front 0 is the non-dominated set.
pub fn nondominated_sort_by<T>(items: &[T], dom: impl Fn(&T, &T) -> Dominance) -> Vec<Vec<usize>> {
    let n = items.len();
    let mut dominated_by = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            match dom(&items[i], &items[j]) {
                Dominance::First => {
                    dominated_by[i].push(j);
                    counts[j] += 1;
                }
                Dominance::Second => {
                    dominated_by[j].push(i);
                    counts[i] += 1;
                }
                Dominance::Incomparable => {}
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
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

/// Non-dominated sort of evaluated individuals under constrained dominance.
pub fn fast_nondominated_sort<D>(pop: &[Individual<D>]) -> Vec<Vec<usize>> {
    nondominated_sort_by(pop, |a, b| dominates(a, b))
}

/// Indices of the Pareto non-dominated members of a point set.
pub fn nondominated_indices(points: &[Vec<f64>]) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    nondominated_sort_by(points, |a, b| pareto_dominance(a, b)).swap_remove(0)
}

/// Per-column min-max scaling to [0, 1]; constant columns map to zero.
pub fn normalize_columns(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let m = first.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in rows {
        for (k, &v) in row.iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let span = hi[k] - lo[k];
                    if span > 0.0 {
                        (v - lo[k]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feasible(f: &[f64]) -> Evaluation<()> {
        Evaluation::feasible(f.to_vec())
    }

    /// O(n²·m) reference: front k = points dominated only by earlier fronts.
    fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    !remaining.iter().any(|&j| {
                        let no_worse = points[j].iter().zip(&points[i]).all(|(a, b)| a <= b);
                        let better = points[j].iter().zip(&points[i]).any(|(a, b)| a < b);
                        no_worse && better
                    })
                })
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn dominance_examples() {
        let a = feasible(&[1.0, 1.0, 1.0, 1.0]);
        let b = feasible(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(constrained_dominance(&a, &b), Dominance::First);
        let c = feasible(&[1.0, 2.0, 1.0, 1.0]);
        let d = feasible(&[2.0, 1.0, 1.0, 1.0]);
        assert_eq!(constrained_dominance(&c, &d), Dominance::Incomparable);
        let bad = Evaluation::infeasible(vec![0.0; 4], 0.1);
        assert_eq!(constrained_dominance(&b, &bad), Dominance::First);
        assert_eq!(constrained_dominance(&bad, &b), Dominance::Second);
        let worse = Evaluation::infeasible(vec![0.0; 4], 0.2);
        assert_eq!(constrained_dominance(&bad, &worse), Dominance::First);
    }

    #[test]
    fn sort_examples() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        assert_eq!(
            nondominated_sort_by(&pts, |a, b| pareto_dominance(a, b)),
            vec![vec![0, 1, 2]]
        );
        let chain = vec![vec![2.0, 2.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        assert_eq!(
            nondominated_sort_by(&chain, |a, b| pareto_dominance(a, b)),
            vec![vec![2], vec![1], vec![0]]
        );
    }

    #[test]
    fn sort_matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|_| {
                    (0..4)
                        .map(|_| (rng.random::<f64>() * 5.0).floor())
                        .collect()
                })
                .collect();
            let fast = nondominated_sort_by(&pts, |a, b| pareto_dominance(a, b));
            assert_eq!(fast, brute_force_fronts(&pts));
        }
    }

    #[test]
    fn constant_columns_normalize_to_zero() {
        let rows = vec![vec![3.0, 1.0], vec![5.0, 1.0]];
        assert_eq!(
            normalize_columns(&rows),
            vec![vec![0.0, 0.0], vec![1.0, 0.0]]
        );
        assert_eq!(normalize_columns(&[vec![4.0, 2.0]]), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn sampling_respects_space() {
        let space = GeneSpace {
            continuous: vec![(0.5, 0.5), (0.0, 2.0)],
            levels: vec![17, 1],
        };
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = space.sample(&mut a);
            assert!(space.contains(&x));
            assert_eq!(x.continuous[0], 0.5);
            assert_eq!(x.discrete[1], 0);
            assert_eq!(x, space.sample(&mut b));
        }
    }

    proptest! {
        #[test]
        fn dominance_is_strict_partial_order(
            a in proptest::collection::vec(0u8..4, 4),
            b in proptest::collection::vec(0u8..4, 4),
            c in proptest::collection::vec(0u8..4, 4),
        ) {
            let f = |v: &Vec<u8>| feasible(&v.iter().map(|&x| x as f64).collect::<Vec<_>>());
            let (a, b, c) = (f(&a), f(&b), f(&c));
            prop_assert_ne!(constrained_dominance(&a, &a), Dominance::First);
            if constrained_dominance(&a, &b) == Dominance::First {
                prop_assert_eq!(constrained_dominance(&b, &a), Dominance::Second);
                if constrained_dominance(&b, &c) == Dominance::First {
                    prop_assert_eq!(constrained_dominance(&a, &c), Dominance::First);
                }
            }
        }

        #[test]
        fn first_front_invariant_under_monotone_transform(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..25),
            col in 0usize..3,
        ) {
            let before = nondominated_indices(&pts);
            let moved: Vec<Vec<f64>> = pts
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    q[col] = q[col].exp() * 3.0 + 1.0;
                    q
                })
                .collect();
            prop_assert_eq!(before, nondominated_indices(&moved));
        }
    }
}
