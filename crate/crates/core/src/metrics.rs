//! Front quality indicators: generational distance and spacing.

use crate::error::{Error, Result};
use crate::moea::{nondominated_indices, normalize_columns};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_front(front: &[Vec<f64>], what: &str) -> Result<usize> {
    let Some(first) = front.first() else {
        return Err(Error::Metrics(format!("{what} is empty")));
    };
    let dim = first.len();
    if front.iter().any(|p| p.len() != dim) {
        return Err(Error::Metrics(format!("{what} mixes dimensions")));
    }
    if front.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Metrics(format!("{what} has non-finite values")));
    }
    Ok(dim)
}

/// `sqrt(Σ D_i²) / N` with `D_i` the distance from obtained point i to its
/// nearest reference point, on the raw objective values.
pub fn generational_distance(obtained: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    let a = check_front(obtained, "obtained front")?;
    let b = check_front(reference, "reference front")?;
    if a != b {
        return Err(Error::Metrics(format!(
            "obtained front has {a} objectives, reference has {b}"
        )));
    }
    let sum: f64 = obtained
        .iter()
        .map(|p| {
            let d = reference
                .iter()
                .map(|q| distance(p, q))
                .fold(f64::INFINITY, f64::min);
            d * d
        })
        .sum();
    Ok(sum.sqrt() / obtained.len() as f64)
}

/// Spacing: sample standard deviation of each member's distance to its
/// nearest other member.
pub fn spacing(front: &[Vec<f64>]) -> Result<f64> {
    check_front(front, "front")?;
    let n = front.len();
    if n < 2 {
        return Err(Error::Metrics("spacing needs at least two points".into()));
    }
    let d: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| distance(&front[i], &front[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (mean - x) * (mean - x)).sum::<f64>() / (n - 1) as f64;
    Ok(var.sqrt())
}

/// Non-dominated subset of the union of `fronts`.
pub fn build_reference_front(fronts: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let union: Vec<Vec<f64>> = fronts.iter().flatten().cloned().collect();
    nondominated_indices(&union)
        .into_iter()
        .map(|i| union[i].clone())
        .collect()
}

/// Min-max scaling shared by every front: bounds come from their union.
pub fn normalize_together(fronts: &[&[Vec<f64>]]) -> Vec<Vec<Vec<f64>>> {
    let union: Vec<Vec<f64>> = fronts.iter().flat_map(|f| f.iter().cloned()).collect();
    let scaled = normalize_columns(&union);
    let mut out = Vec::with_capacity(fronts.len());
    let mut start = 0;
    for f in fronts {
        out.push(scaled[start..start + f.len()].to_vec());
        start += f.len();
    }
    out
}

/// GD after normalising both fronts over their union.
pub fn normalized_generational_distance(
    obtained: &[Vec<f64>],
    reference: &[Vec<f64>],
) -> Result<f64> {
    let scaled = normalize_together(&[obtained, reference]);
    generational_distance(&scaled[0], &scaled[1])
}

/// Best, mean and worst of a set of indicator values (smaller is better).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    pub best: f64,
    pub average: f64,
    pub worst: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            best: values.iter().copied().fold(f64::INFINITY, f64::min),
            average: values.iter().sum::<f64>() / values.len() as f64,
            worst: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}
