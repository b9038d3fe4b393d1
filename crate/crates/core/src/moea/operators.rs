//! Simulated binary crossover and polynomial mutation on hybrid genomes.
//!
//! Discrete genes are recombined as real numbers on `[0, levels − 1]` and
//! rounded back to the nearest index; they mutate by one grid step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ControlVector, GeneSpace};

const MIN_GAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbxParams {
    /// Probability that a parent pair is recombined at all.
    pub probability: f64,
    /// Per-gene probability of recombination within a recombined pair.
    pub gene_probability: f64,
    /// Distribution index.
    pub eta: f64,
}

impl Default for SbxParams {
    fn default() -> Self {
        Self {
            probability: 0.9,
            gene_probability: 0.5,
            eta: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationParams {
    /// Per-gene mutation probability; `None` means one over the number of
    /// genes that can take more than one value.
    pub probability: Option<f64>,
    /// Distribution index.
    pub eta: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        Self {
            probability: None,
            eta: 20.0,
        }
    }
}

impl MutationParams {
    pub fn rate(&self, space: &GeneSpace) -> f64 {
        self.probability
            .unwrap_or_else(|| 1.0 / space.free_len().max(1) as f64)
    }
}

/// Bounded SBX on one gene pair. Returns the two children.
fn sbx_gene<R: Rng + ?Sized>(
    x1: f64,
    x2: f64,
    lo: f64,
    hi: f64,
    eta: f64,
    rng: &mut R,
) -> (f64, f64) {
    if (x1 - x2).abs() <= MIN_GAP || hi - lo <= 0.0 {
        return (x1, x2);
    }
    let (y1, y2) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    let u: f64 = rng.random();
    let spread = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
    let c1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
    let beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
    let c2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
    let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
    if rng.random::<f64>() <= 0.5 {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

/// Simulated binary crossover of two parents.
pub fn sbx_crossover<R: Rng + ?Sized>(
    a: &ControlVector,
    b: &ControlVector,
    space: &GeneSpace,
    params: &SbxParams,
    rng: &mut R,
) -> (ControlVector, ControlVector) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    if rng.random::<f64>() >= params.probability {
        return (c1, c2);
    }
    for (k, &(lo, hi)) in space.continuous.iter().enumerate() {
        if rng.random::<f64>() < params.gene_probability {
            let (x, y) = sbx_gene(a.continuous[k], b.continuous[k], lo, hi, params.eta, rng);
            c1.continuous[k] = x;
            c2.continuous[k] = y;
        }
    }
    for (k, &levels) in space.levels.iter().enumerate() {
        if rng.random::<f64>() < params.gene_probability {
            let top = (levels - 1) as f64;
            let (x, y) = sbx_gene(
                a.discrete[k] as f64,
                b.discrete[k] as f64,
                0.0,
                top,
                params.eta,
                rng,
            );
            c1.discrete[k] = x.round().clamp(0.0, top) as usize;
            c2.discrete[k] = y.round().clamp(0.0, top) as usize;
        }
    }
    (c1, c2)
}

/// Polynomial mutation of continuous genes and ±1-step moves (reflected at
/// the grid ends) of discrete genes.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &ControlVector,
    space: &GeneSpace,
    params: &MutationParams,
    rng: &mut R,
) -> ControlVector {
    let rate = params.rate(space);
    let mut out = x.clone();
    let power = 1.0 / (params.eta + 1.0);
    for (k, &(lo, hi)) in space.continuous.iter().enumerate() {
        if rng.random::<f64>() >= rate || hi - lo <= 0.0 {
            continue;
        }
        let y = out.continuous[k];
        let span = hi - lo;
        let u: f64 = rng.random();
        let delta = if u <= 0.5 {
            let xy = 1.0 - (y - lo) / span;
            let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(params.eta + 1.0);
            val.powf(power) - 1.0
        } else {
            let xy = 1.0 - (hi - y) / span;
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(params.eta + 1.0);
            1.0 - val.powf(power)
        };
        out.continuous[k] = (y + delta * span).clamp(lo, hi);
    }
    for (k, &levels) in space.levels.iter().enumerate() {
        if rng.random::<f64>() >= rate || levels < 2 {
            continue;
        }
        let i = out.discrete[k];
        let up = rng.random::<bool>();
        out.discrete[k] = match (i, up) {
            (0, _) => 1,
            (i, _) if i == levels - 1 => i - 1,
            (i, true) => i + 1,
            (i, false) => i - 1,
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> GeneSpace {
        GeneSpace {
            continuous: vec![(0.0, 1.0), (0.95, 1.1), (2.0, 2.0)],
            levels: vec![17, 51, 1],
        }
    }

    #[test]
    fn zero_probability_crossover_copies_parents() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = s.sample(&mut rng);
        let b = s.sample(&mut rng);
        let params = SbxParams {
            probability: 0.0,
            ..Default::default()
        };
        for _ in 0..100 {
            let (c1, c2) = sbx_crossover(&a, &b, &s, &params, &mut rng);
            assert_eq!((c1, c2), (a.clone(), b.clone()));
        }
    }

    #[test]
    fn identical_parents_give_identical_children() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = s.sample(&mut rng);
        for eta in [1.0, 5.0, 20.0, 100.0] {
            let params = SbxParams {
                probability: 1.0,
                gene_probability: 1.0,
                eta,
            };
            let (c1, c2) = sbx_crossover(&a, &a, &s, &params, &mut rng);
            assert_eq!(c1, a);
            assert_eq!(c2, a);
        }
    }

    #[test]
    fn crossover_stays_in_unit_box() {
        let s = GeneSpace {
            continuous: vec![(0.0, 1.0); 5],
            levels: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = SbxParams {
            probability: 1.0,
            gene_probability: 1.0,
            eta: 2.0,
        };
        for _ in 0..10_000 {
            let a = s.sample(&mut rng);
            let b = s.sample(&mut rng);
            let (c1, c2) = sbx_crossover(&a, &b, &s, &params, &mut rng);
            assert!(s.contains(&c1) && s.contains(&c2));
        }
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = s.sample(&mut rng);
        let params = MutationParams {
            probability: Some(0.0),
            eta: 20.0,
        };
        for _ in 0..100 {
            assert_eq!(polynomial_mutation(&a, &s, &params, &mut rng), a);
        }
    }

    #[test]
    fn degenerate_gene_never_moves() {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = MutationParams {
            probability: Some(1.0),
            eta: 20.0,
        };
        let a = s.sample(&mut rng);
        for _ in 0..1000 {
            let m = polynomial_mutation(&a, &s, &params, &mut rng);
            assert_eq!(m.continuous[2], 2.0);
            assert_eq!(m.discrete[2], 0);
        }
    }

    #[test]
    fn empirical_mutation_rate_within_three_sigma() {
        let s = GeneSpace {
            continuous: vec![(0.0, 1.0); 10],
            levels: vec![9; 10],
        };
        let params = MutationParams::default();
        let pm = params.rate(&s);
        assert!((pm - 0.05).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ControlVector {
            continuous: vec![0.5; 10],
            discrete: vec![4; 10],
        };
        let trials = 10_000;
        let mut changed = 0usize;
        for _ in 0..trials {
            let m = polynomial_mutation(&x, &s, &params, &mut rng);
            changed += m.continuous.iter().filter(|&&v| v != 0.5).count();
            changed += m.discrete.iter().filter(|&&i| i != 4).count();
        }
        let n = (trials * s.len()) as f64;
        let sigma = (n * pm * (1.0 - pm)).sqrt();
        assert!(
            (changed as f64 - n * pm).abs() <= 3.0 * sigma,
            "{changed} vs {}",
            n * pm
        );
    }

    #[test]
    fn default_rate_ignores_fixed_genes() {
        let s = space();
        assert_eq!(s.len(), 6);
        assert_eq!(s.free_len(), 4);
        assert_eq!(MutationParams::default().rate(&s), 0.25);
    }

    #[test]
    fn discrete_mutation_reflects_at_ends() {
        let s = GeneSpace {
            continuous: vec![],
            levels: vec![3, 3],
        };
        let params = MutationParams {
            probability: Some(1.0),
            eta: 20.0,
        };
        let x = ControlVector {
            continuous: vec![],
            discrete: vec![0, 2],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            assert_eq!(
                polynomial_mutation(&x, &s, &params, &mut rng).discrete,
                vec![1, 1]
            );
        }
    }

    proptest! {
        #[test]
        fn variation_preserves_bounds_and_grids(seed in any::<u64>()) {
            let s = space();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = s.sample(&mut rng);
            let b = s.sample(&mut rng);
            let (c1, c2) = sbx_crossover(&a, &b, &s, &SbxParams::default(), &mut rng);
            let m = MutationParams { probability: Some(0.5), eta: 5.0 };
            let c1 = polynomial_mutation(&c1, &s, &m, &mut rng);
            let c2 = polynomial_mutation(&c2, &s, &m, &mut rng);
            prop_assert!(s.contains(&c1));
            prop_assert!(s.contains(&c2));
        }
    }
}
