//! Knee-point driven evolutionary algorithm.
//!
//! Knee points of the first front, found with an adaptive neighbourhood,
//! act as the secondary selection criterion after constrained dominance in
//! both the mating tournament and the environmental selection. All distance
//! computations run on objectives min-max normalised over the set at hand.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moea::{
    constrained_dominance, fast_nondominated_sort, normalize_columns, pareto_dominance,
    polynomial_mutation, sbx_crossover, Dominance, Individual, MutationParams, Problem, SbxParams,
};

const WD_EPSILON: f64 = 1e-12;

/// What the knee fraction t is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KneeFractionBase {
    /// Knee count over the size of the first front.
    #[default]
    FirstFront,
    /// Knee count over the size of the whole combined population.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneaConfig {
    pub pop_size: usize,
    pub generations: usize,
    /// Target knee fraction TH in (0, 1).
    pub threshold: f64,
    /// Neighbour count for the weighted distance; `None` is `min(4, n − 1)`.
    pub neighbors: Option<usize>,
    pub crossover: SbxParams,
    pub mutation: MutationParams,
    pub knee_fraction_base: KneeFractionBase,
    pub seed: u64,
}

impl Default for KneaConfig {
    fn default() -> Self {
        Self {
            pop_size: 50,
            generations: 100,
            threshold: 0.5,
            neighbors: None,
            crossover: SbxParams::default(),
            mutation: MutationParams::default(),
            knee_fraction_base: KneeFractionBase::default(),
            seed: 0,
        }
    }
}

impl KneaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.pop_size < 4 || self.pop_size % 2 != 0 {
            return fail(format!(
                "population size must be even and at least 4, got {}",
                self.pop_size
            ));
        }
        if self.generations == 0 {
            return fail("at least one generation is required".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            ));
        }
        if self.neighbors == Some(0) {
            return fail("neighbour count must be positive".into());
        }
        let probability = |p: f64| (0.0..=1.0).contains(&p);
        if !probability(self.crossover.probability)
            || !probability(self.crossover.gene_probability)
            || !self.mutation.probability.is_none_or(probability)
        {
            return fail("operator probabilities must lie in [0, 1]".into());
        }
        if !(self.crossover.eta >= 0.0 && self.mutation.eta >= 0.0) {
            return fail("distribution indices must be non-negative".into());
        }
        Ok(())
    }

    fn neighbors_for(&self, n: usize) -> usize {
        self.neighbors.unwrap_or(4).min(n.saturating_sub(1))
    }
}

/// Adaptive state of the knee search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeState {
    /// Knee flags of the current population, index-aligned with it.
    pub knees: Vec<bool>,
    /// Neighbourhood ratio r.
    pub ratio: f64,
    /// Knee fraction t of the last identification.
    pub fraction: f64,
    pub threshold: f64,
}

impl KneeState {
    pub fn new(threshold: f64) -> Self {
        Self {
            knees: Vec::new(),
            ratio: 1.0,
            fraction: 0.0,
            threshold,
        }
    }

    /// Advances r with the previous fraction, then stores the new fraction.
    ///
    /// r shrinks while the previous fraction is below the threshold and
    /// grows once it exceeds it.
    pub fn advance(&mut self, new_fraction: f64, num_objectives: usize) {
        let exponent = -(1.0 - self.fraction / self.threshold) / num_objectives as f64;
        self.ratio *= exponent.exp();
        self.fraction = new_fraction;
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Weighted distance of `points[i]` to its `k` nearest neighbours.
///
/// Neighbours whose distance departs most from the mean distance get the
/// smallest weights: `rd_j = 1 / max(|dis_j − mean|, 1e−12)`, normalised to
/// sum to one. Fewer than `k` other points means all of them are used.
pub fn weighted_distance(points: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let mut dis: Vec<f64> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, q)| distance(&points[i], q))
        .collect();
    let k = k.min(dis.len());
    if k == 0 {
        return 0.0;
    }
    dis.sort_by(f64::total_cmp);
    dis.truncate(k);
    let mean = dis.iter().sum::<f64>() / k as f64;
    let rd: Vec<f64> = dis
        .iter()
        .map(|d| 1.0 / (d - mean).abs().max(WD_EPSILON))
        .collect();
    let total: f64 = rd.iter().sum();
    rd.iter().zip(&dis).map(|(r, d)| r / total * d).sum()
}

/// [`weighted_distance`] of every point.
pub fn weighted_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..points.len())
        .map(|i| weighted_distance(points, i, k))
        .collect()
}

/// Signed distances to the hyperplane through the per-objective maximisers,
/// positive on the side of the ideal point. `None` when all maximisers are
/// the same point.
pub fn hyperplane_distances(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = points.first()?.len();
    let extremes: Vec<usize> = (0..m)
        .map(|obj| {
            // First maximiser in index order.
            let mut best = 0;
            for (j, p) in points.iter().enumerate() {
                if p[obj] > points[best][obj] {
                    best = j;
                }
            }
            best
        })
        .collect();
    if extremes.iter().all(|&e| points[e] == points[extremes[0]]) {
        return None;
    }
    let e = DMatrix::from_fn(m, m, |r, c| points[extremes[r]][c]);
    let solved = e
        .lu()
        .solve(&DVector::from_element(m, 1.0))
        .filter(|a| a.iter().all(|v| v.is_finite()));
    let a: Vec<f64> = match solved {
        Some(a) => a.iter().copied().collect(),
        // Extremes span less than a hyperplane: fall back to axis
        // intercepts at the per-objective maxima.
        None => (0..m)
            .map(|obj| {
                let hi = points[extremes[obj]][obj];
                if hi > 0.0 {
                    1.0 / hi
                } else {
                    1.0
                }
            })
            .collect(),
    };
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    Some(
        points
            .iter()
            .map(|p| (1.0 - a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>()) / norm)
            .collect(),
    )
}

/// Knee flags of a non-dominated `front` for neighbourhood ratio `ratio`.
///
/// Members are scanned by descending hyperplane distance (index order on
/// ties); a member becomes a knee unless an earlier knee lies within its
/// box of half-widths `ratio × span` per objective.
pub fn identify_knee_points(front: &[Vec<f64>], ratio: f64) -> Vec<bool> {
    let n = front.len();
    let Some(dist) = hyperplane_distances(front) else {
        return vec![true; n];
    };
    let m = front[0].len();
    let radius: Vec<f64> = (0..m)
        .map(|obj| {
            let (lo, hi) = front
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[obj]), hi.max(p[obj]))
                });
            // A flat objective has no neighbourhood, whatever the ratio.
            if hi > lo {
                (hi - lo) * ratio
            } else {
                0.0
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    let mut flags = vec![false; n];
    for i in order {
        let covered = chosen
            .iter()
            .any(|&c| (0..m).all(|obj| (front[i][obj] - front[c][obj]).abs() <= radius[obj]));
        if !covered {
            chosen.push(i);
            flags[i] = true;
        }
    }
    flags
}

/// Winner of a binary tournament: constrained dominance, then knee
/// membership, then larger weighted distance, then a coin flip.
pub fn tournament<D, R: Rng + ?Sized>(
    pop: &[Individual<D>],
    knees: &[bool],
    wd: &[f64],
    a: usize,
    b: usize,
    rng: &mut R,
) -> usize {
    match constrained_dominance(pop[a].eval(), pop[b].eval()) {
        Dominance::First => return a,
        Dominance::Second => return b,
        Dominance::Incomparable => {}
    }
    match (knees[a], knees[b]) {
        (true, false) => return a,
        (false, true) => return b,
        _ => {}
    }
    match wd[a].partial_cmp(&wd[b]) {
        Some(Ordering::Greater) => a,
        Some(Ordering::Less) => b,
        _ => {
            if rng.random::<bool>() {
                a
            } else {
                b
            }
        }
    }
}

/// Parent indices chosen by `count` binary tournaments between distinct
/// random members.
pub fn mating_selection<D, R: Rng + ?Sized>(
    pop: &[Individual<D>],
    knees: &[bool],
    k: usize,
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    let normalized = normalize_columns(&objective_rows(pop));
    let wd = weighted_distances(&normalized, k);
    let indices: Vec<usize> = (0..pop.len()).collect();
    (0..count)
        .map(|_| {
            let pair: Vec<usize> = indices.choose_multiple(rng, 2).copied().collect();
            match pair[..] {
                [a, b] => tournament(pop, knees, &wd, a, b, rng),
                _ => pair[0],
            }
        })
        .collect()
}

fn objective_rows<D>(pop: &[Individual<D>]) -> Vec<Vec<f64>> {
    pop.iter().map(|ind| ind.objectives().to_vec()).collect()
}

fn gather(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

/// Picks `n` members of `union`: whole fronts while they fit, then from the
/// splitting front knees first, then larger hyperplane distance, then larger
/// weighted distance, then lower index. `knees` is index-aligned with
/// `union`. Returns the chosen indices in ascending order.
pub fn environmental_selection<D>(
    union: &[Individual<D>],
    knees: &[bool],
    n: usize,
    k: usize,
) -> Vec<usize> {
    let fronts = fast_nondominated_sort(union);
    let normalized = normalize_columns(&objective_rows(union));
    select_from_fronts(&fronts, &normalized, knees, n, k)
}

fn select_from_fronts(
    fronts: &[Vec<usize>],
    normalized: &[Vec<f64>],
    knees: &[bool],
    n: usize,
    k: usize,
) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(n);
    for front in fronts {
        let room = n - chosen.len();
        if room == 0 {
            break;
        }
        if front.len() <= room {
            chosen.extend_from_slice(front);
            continue;
        }
        let pts = gather(normalized, front);
        let dist = hyperplane_distances(&pts).unwrap_or_else(|| vec![0.0; pts.len()]);
        let wd = weighted_distances(&pts, k);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            knees[front[b]]
                .cmp(&knees[front[a]])
                .then(dist[b].total_cmp(&dist[a]))
                .then(wd[b].total_cmp(&wd[a]))
                .then(front[a].cmp(&front[b]))
        });
        chosen.extend(order[..room].iter().map(|&j| front[j]));
    }
    chosen.sort_unstable();
    chosen
}

/// One line of the per-generation progress log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub feasible: usize,
    pub objective_min: Vec<f64>,
    pub objective_max: Vec<f64>,
    pub knees: usize,
    pub ratio: f64,
    pub fraction: f64,
}

/// Outcome of a run: the mutually non-dominated members of the final
/// population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive<D> {
    pub members: Vec<Individual<D>>,
    /// False when no feasible solution was found and `members` holds the
    /// least-violating ones instead.
    pub feasible: bool,
    pub progress: Vec<GenerationRecord>,
}

fn evaluate_all<P: Problem>(problem: &P, members: &mut [Individual<P::Detail>]) {
    members.par_iter_mut().for_each(|ind| {
        if ind.evaluation.is_none() {
            ind.evaluation = Some(problem.evaluate(&ind.controls));
        }
    });
}

fn record<D>(generation: usize, pop: &[Individual<D>], state: &KneeState) -> GenerationRecord {
    let m = pop[0].objectives().len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for ind in pop {
        for (obj, &v) in ind.objectives().iter().enumerate() {
            lo[obj] = lo[obj].min(v);
            hi[obj] = hi[obj].max(v);
        }
    }
    GenerationRecord {
        generation,
        feasible: pop.iter().filter(|ind| ind.eval().feasible).count(),
        objective_min: lo,
        objective_max: hi,
        knees: state.knees.iter().filter(|&&f| f).count(),
        ratio: state.ratio,
        fraction: state.fraction,
    }
}

/// Runs the algorithm on `problem` for `cfg.generations` generations.
///
/// Variation draws from one seeded stream in a fixed order while
/// evaluation fans out over rayon, so the result depends on the seed only.
pub fn run_knea<P: Problem>(problem: &P, cfg: &KneaConfig) -> Result<ParetoArchive<P::Detail>> {
    cfg.validate()?;
    let space = problem.gene_space();
    let m = problem.num_objectives();
    let n = cfg.pop_size;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop: Vec<Individual<P::Detail>> = (0..n)
        .map(|_| Individual::new(space.sample(&mut rng)))
        .collect();
    evaluate_all(problem, &mut pop);
    let mut state = KneeState::new(cfg.threshold);
    state.knees = vec![false; n];
    let mut progress = vec![record(0, &pop, &state)];

    for generation in 1..=cfg.generations {
        let parents = mating_selection(&pop, &state.knees, cfg.neighbors_for(n), n, &mut rng);
        let mut offspring = Vec::with_capacity(n);
        for pair in parents.chunks(2) {
            let (a, b) = (&pop[pair[0]].controls, &pop[pair[1]].controls);
            let (c1, c2) = sbx_crossover(a, b, space, &cfg.crossover, &mut rng);
            for child in [c1, c2] {
                offspring.push(Individual::new(polynomial_mutation(
                    &child,
                    space,
                    &cfg.mutation,
                    &mut rng,
                )));
            }
        }
        evaluate_all(problem, &mut offspring);

        let mut union = pop;
        union.append(&mut offspring);
        let fronts = fast_nondominated_sort(&union);
        let normalized = normalize_columns(&objective_rows(&union));
        let first = &fronts[0];
        let flags = identify_knee_points(&gather(&normalized, first), state.ratio);
        let mut knees = vec![false; union.len()];
        for (&i, &f) in first.iter().zip(&flags) {
            knees[i] = f;
        }
        let knee_count = flags.iter().filter(|&&f| f).count();
        let base = match cfg.knee_fraction_base {
            KneeFractionBase::FirstFront => first.len(),
            KneeFractionBase::Population => union.len(),
        };
        state.advance(knee_count as f64 / base as f64, m);

        let chosen = select_from_fronts(&fronts, &normalized, &knees, n, cfg.neighbors_for(n));
        state.knees = chosen.iter().map(|&i| knees[i]).collect();
        let mut slots: Vec<Option<Individual<P::Detail>>> = union.into_iter().map(Some).collect();
        pop = chosen.iter().map(|&i| slots[i].take().unwrap()).collect();

        let rec = record(generation, &pop, &state);
        log::info!(
            "generation {} feasible {} knees {} r {:.6} t {:.4} min {:?} max {:?}",
            rec.generation,
            rec.feasible,
            rec.knees,
            rec.ratio,
            rec.fraction,
            rec.objective_min,
            rec.objective_max
        );
        progress.push(rec);
    }

    Ok(final_archive(pop, progress))
}

fn final_archive<D>(pop: Vec<Individual<D>>, progress: Vec<GenerationRecord>) -> ParetoArchive<D> {
    let fronts = fast_nondominated_sort(&pop);
    let first = &fronts[0];
    let feasible = pop[first[0]].eval().feasible;
    let mut slots: Vec<Option<Individual<D>>> = pop.into_iter().map(Some).collect();
    let mut members: Vec<Individual<D>> = Vec::with_capacity(first.len());
    for &i in first {
        let ind = slots[i].take().unwrap();
        let duplicate = members
            .iter()
            .any(|kept| kept.objectives() == ind.objectives());
        if !duplicate {
            members.push(ind);
        }
    }
    debug_assert!(members.iter().all(|a| members
        .iter()
        .all(|b| pareto_dominance(a.objectives(), b.objectives()) != Dominance::First)));
    ParetoArchive {
        members,
        feasible,
        progress,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::{ControlVector, Evaluation, GeneSpace};
    use crate::network::tests::two_bus_case;
    use crate::objectives::OpfProblem;

    fn pts(raw: &[&[f64]]) -> Vec<Vec<f64>> {
        raw.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn weighted_distance_examples() {
        // k = 1: the single nearest neighbour carries all the weight.
        let line = pts(&[&[0.0], &[0.3], &[1.0]]);
        assert!((weighted_distance(&line, 0, 1) - 0.3).abs() < 1e-12);
        // Distances {1, 3}: |d − mean| = 1 for both, so equal weights.
        let pair = pts(&[&[0.0], &[1.0], &[-3.0]]);
        assert!((weighted_distance(&pair, 0, 2) - 2.0).abs() < 1e-12);
        let dup = pts(&[&[0.5, 0.5], &[0.5, 0.5], &[1.0, 0.0]]);
        assert_eq!(weighted_distance(&dup, 0, 1), 0.0);
        // Asking for more neighbours than exist uses all of them.
        assert_eq!(
            weighted_distance(&pair, 0, 10),
            weighted_distance(&pair, 0, 2)
        );
        assert_eq!(weighted_distance(&pts(&[&[1.0]]), 0, 3), 0.0);
    }

    #[test]
    fn interior_point_is_the_knee() {
        let front = pts(&[&[0.0, 1.0], &[1.0, 0.0], &[0.2, 0.2]]);
        let d = hyperplane_distances(&front).unwrap();
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
        assert!((d[2] - 0.6 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(identify_knee_points(&front, 1.0), vec![false, false, true]);
    }

    #[test]
    fn extremes_only_front_has_one_knee() {
        let front = pts(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(identify_knee_points(&front, 1.0), vec![true, false]);
        let front3 = pts(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(identify_knee_points(&front3, 1.0), vec![true, false, false]);
        // A small neighbourhood lets every extreme stand on its own.
        assert_eq!(identify_knee_points(&front3, 0.1), vec![true, true, true]);
    }

    #[test]
    fn degenerate_fronts_are_all_knees() {
        assert_eq!(identify_knee_points(&pts(&[&[0.3, 0.4]]), 1.0), vec![true]);
        let same = pts(&[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]]);
        assert_eq!(identify_knee_points(&same, 0.5), vec![true; 3]);
    }

    #[test]
    fn ratio_follows_the_threshold() {
        let mut s = KneeState::new(0.5);
        s.advance(0.2, 2);
        assert!((s.ratio - (-0.5f64).exp()).abs() < 1e-15);
        let r = s.ratio;
        s.advance(0.8, 2);
        assert!(s.ratio < r, "t = 0.2 < TH shrinks r");
        let r = s.ratio;
        s.advance(0.5, 2);
        assert!(s.ratio > r, "t = 0.8 > TH grows r");
        let r = s.ratio;
        s.advance(0.1, 2);
        assert_eq!(s.ratio, r, "t = TH holds r");
    }

    fn evaluated(objs: &[(f64, f64)], feasible: &[bool]) -> Vec<Individual<()>> {
        objs.iter()
            .zip(feasible)
            .map(|(&(a, b), &ok)| Individual {
                controls: ControlVector {
                    continuous: vec![],
                    discrete: vec![],
                },
                evaluation: Some(if ok {
                    Evaluation::feasible(vec![a, b])
                } else {
                    Evaluation::infeasible(vec![a, b], a + b)
                }),
            })
            .collect()
    }

    /// The three-rule cascade written out independently.
    fn oracle_winner(
        pop: &[Individual<()>],
        knees: &[bool],
        wd: &[f64],
        a: usize,
        b: usize,
    ) -> Option<usize> {
        let (ea, eb) = (pop[a].eval(), pop[b].eval());
        let a_first = match (ea.feasible, eb.feasible) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            (false, false) if ea.violation != eb.violation => Some(ea.violation < eb.violation),
            (false, false) => None,
            (true, true) => {
                let le = ea
                    .objectives
                    .iter()
                    .zip(&eb.objectives)
                    .all(|(x, y)| x <= y);
                let ge = ea
                    .objectives
                    .iter()
                    .zip(&eb.objectives)
                    .all(|(x, y)| x >= y);
                let eq = ea.objectives == eb.objectives;
                if le && !eq {
                    Some(true)
                } else if ge && !eq {
                    Some(false)
                } else {
                    None
                }
            }
        };
        if let Some(first) = a_first {
            return Some(if first { a } else { b });
        }
        if knees[a] != knees[b] {
            return Some(if knees[a] { a } else { b });
        }
        if wd[a] != wd[b] {
            return Some(if wd[a] > wd[b] { a } else { b });
        }
        None
    }

    #[test]
    fn tournament_matches_rule_cascade() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = 8;
            let objs: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    (
                        (rng.random::<f64>() * 4.0).floor(),
                        (rng.random::<f64>() * 4.0).floor(),
                    )
                })
                .collect();
            let feasible: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
            let pop = evaluated(&objs, &feasible);
            let knees: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let wd: Vec<f64> = (0..n)
                .map(|_| (rng.random::<f64>() * 3.0).floor())
                .collect();
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let w = tournament(&pop, &knees, &wd, a, b, &mut rng);
                    assert!(w == a || w == b);
                    if let Some(expected) = oracle_winner(&pop, &knees, &wd, a, b) {
                        assert_eq!(w, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn dominance_beats_knee_and_knee_beats_distance() {
        let pop = evaluated(&[(0.0, 0.0), (1.0, 1.0), (0.0, 2.0)], &[true; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            tournament(
                &pop,
                &[false, true, false],
                &[0.0, 9.0, 0.0],
                0,
                1,
                &mut rng
            ),
            0
        );
        assert_eq!(
            tournament(
                &pop,
                &[false, true, false],
                &[0.0, 0.0, 9.0],
                1,
                2,
                &mut rng
            ),
            1
        );
        assert_eq!(
            tournament(&pop, &[false; 3], &[0.0, 1.0, 2.0], 1, 2, &mut rng),
            2
        );
    }

    #[test]
    fn selection_of_a_fitting_front_is_identity() {
        let pop = evaluated(
            &[(0.0, 1.0), (1.0, 0.0), (0.5, 0.5), (0.2, 0.9)],
            &[true; 4],
        );
        assert_eq!(
            environmental_selection(&pop, &[false; 4], 4, 3),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn split_front_prefers_deep_knees() {
        let pop = evaluated(
            &[
                (0.0, 1.0),
                (1.0, 0.0),
                (0.3, 0.3),
                (0.5, 0.2),
                (0.2, 0.5),
                (0.1, 0.65),
            ],
            &[true; 6],
        );
        // Three knees compete for two slots: distances to x + y = 1 are
        // 0.4/√2, 0.3/√2 and 0.25/√2.
        let knees = [false, false, true, true, false, true];
        assert_eq!(environmental_selection(&pop, &knees, 2, 3), vec![2, 3]);
        // Without knees the non-knee (0.2, 0.5) ties (0.5, 0.2) on distance.
        let chosen = environmental_selection(&pop, &[false; 6], 3, 3);
        assert_eq!(chosen.len(), 3);
        assert!(chosen.contains(&2));
    }

    #[test]
    fn whole_fronts_come_first() {
        let pop = evaluated(
            &[(2.0, 2.0), (0.0, 1.0), (1.0, 0.0), (3.0, 3.0), (0.5, 0.5)],
            &[true, true, true, true, false],
        );
        assert_eq!(
            environmental_selection(&pop, &[false; 5], 3, 2),
            vec![0, 1, 2]
        );
        assert_eq!(environmental_selection(&pop, &[false; 5], 5, 2).len(), 5);
    }

    #[test]
    fn duplicates_select_deterministically() {
        let pop = evaluated(&[(0.5, 0.5); 6], &[true; 6]);
        let first = environmental_selection(&pop, &[true; 6], 3, 2);
        assert_eq!(first, vec![0, 1, 2]);
        assert_eq!(environmental_selection(&pop, &[true; 6], 3, 2), first);
    }

    /// Minimise (x², (x − 2)²) on x ∈ [0, 2]; the whole interval is optimal.
    struct Parabolas {
        space: GeneSpace,
    }

    impl Parabolas {
        fn new() -> Self {
            Self {
                space: GeneSpace {
                    continuous: vec![(0.0, 2.0)],
                    levels: vec![],
                },
            }
        }
    }

    impl Problem for Parabolas {
        type Detail = ();

        fn gene_space(&self) -> &GeneSpace {
            &self.space
        }

        fn num_objectives(&self) -> usize {
            2
        }

        fn evaluate(&self, x: &ControlVector) -> Evaluation<()> {
            let v = x.continuous[0];
            Evaluation::feasible(vec![v * v, (v - 2.0) * (v - 2.0)])
        }
    }

    #[test]
    fn parabolas_converge_to_front() {
        let cfg = KneaConfig {
            pop_size: 20,
            generations: 30,
            seed: 3,
            ..Default::default()
        };
        let archive = run_knea(&Parabolas::new(), &cfg).unwrap();
        assert!(archive.feasible);
        assert_eq!(archive.progress.len(), 31);
        for ind in &archive.members {
            let f = ind.objectives();
            // On the front, sqrt(f1) + sqrt(f2) = 2.
            assert!((f[0].sqrt() + f[1].sqrt() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = KneaConfig {
            pop_size: 8,
            generations: 5,
            seed: 9,
            ..Default::default()
        };
        let a = run_knea(&Parabolas::new(), &cfg).unwrap();
        let b = run_knea(&Parabolas::new(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn minimal_opf_run() {
        let net = two_bus_case(0.1, 50.0, 20.0).into_network().unwrap();
        let problem = OpfProblem::new(&net);
        let cfg = KneaConfig {
            pop_size: 4,
            generations: 1,
            seed: 1,
            ..Default::default()
        };
        let archive = run_knea(&problem, &cfg).unwrap();
        assert!(!archive.members.is_empty());
        for a in &archive.members {
            for b in &archive.members {
                assert_ne!(
                    pareto_dominance(a.objectives(), b.objectives()),
                    Dominance::First
                );
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut KneaConfig)| {
            let mut c = KneaConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.pop_size = 3));
        assert!(bad(|c| c.pop_size = 7));
        assert!(bad(|c| c.generations = 0));
        assert!(bad(|c| c.threshold = 1.0));
        assert!(bad(|c| c.neighbors = Some(0)));
        assert!(KneaConfig::default().validate().is_ok());
    }
}
