//! Picking best-compromise solutions from a Pareto archive: fuzzy c-means
//! clustering of the normalised objectives, then grey relational projection
//! onto the positive and negative ideal schemes to rank members.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moea::normalize_columns;

/// Distinguishing coefficient of the grey relational coefficient.
pub const RESOLUTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmOptions {
    pub clusters: usize,
    /// Fuzzifier m > 1.
    pub fuzzifier: f64,
    /// Stop once the loss changes by less than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for FcmOptions {
    fn default() -> Self {
        Self {
            clusters: 4,
            fuzzifier: 2.0,
            tolerance: 1e-6,
            max_iterations: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcmResult {
    pub centers: Vec<Vec<f64>>,
    /// Row i holds the membership of point i in each cluster.
    pub memberships: Vec<Vec<f64>>,
    /// Cluster of largest membership per point.
    pub hard_labels: Vec<usize>,
    /// Loss after every iteration; the last entry is the final loss.
    pub loss_history: Vec<f64>,
    pub iterations: usize,
}

impl FcmResult {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(0.0)
    }
}

/// Per-objective min-max scaling of the archive; constant columns become 0.
pub fn normalize_objectives(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    normalize_columns(rows)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn memberships_for(points: &[Vec<f64>], centers: &[Vec<f64>], m: f64) -> Vec<Vec<f64>> {
    let power = 1.0 / (m - 1.0);
    points
        .iter()
        .map(|p| {
            let d2: Vec<f64> = centers.iter().map(|c| sq_dist(p, c)).collect();
            let hits = d2.iter().filter(|&&d| d == 0.0).count();
            if hits > 0 {
                // Limit of the update as the point reaches a center.
                return d2
                    .iter()
                    .map(|&d| if d == 0.0 { 1.0 / hits as f64 } else { 0.0 })
                    .collect();
            }
            // (d_j / d_k)^(2/(m−1)) written with squared distances.
            d2.iter()
                .map(|&dj| 1.0 / d2.iter().map(|&dk| (dj / dk).powf(power)).sum::<f64>())
                .collect()
        })
        .collect()
}

fn centers_for(points: &[Vec<f64>], u: &[Vec<f64>], m: f64, n_c: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    (0..n_c)
        .map(|j| {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (p, row) in points.iter().zip(u) {
                let w = row[j].powf(m);
                den += w;
                for (acc, &x) in num.iter_mut().zip(p) {
                    *acc += w * x;
                }
            }
            num.iter().map(|v| v / den).collect()
        })
        .collect()
}

fn loss(points: &[Vec<f64>], centers: &[Vec<f64>], u: &[Vec<f64>], m: f64) -> f64 {
    points
        .iter()
        .zip(u)
        .map(|(p, row)| {
            centers
                .iter()
                .zip(row)
                .map(|(c, &mu)| mu.powf(m) * sq_dist(p, c))
                .sum::<f64>()
        })
        .sum()
}

/// Fuzzy c-means with centers seeded from distinct data points.
pub fn fcm_cluster(points: &[Vec<f64>], opts: &FcmOptions) -> Result<FcmResult> {
    let n_c = opts.clusters;
    let m = opts.fuzzifier;
    if n_c == 0 {
        return Err(Error::Decision("at least one cluster is required".into()));
    }
    if !(m > 1.0) {
        return Err(Error::Decision(format!("fuzzifier must exceed 1, got {m}")));
    }
    let mut distinct: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !distinct.iter().any(|&j| points[j] == *p) {
            distinct.push(i);
        }
    }
    if distinct.len() < n_c {
        return Err(Error::Decision(format!(
            "{} distinct solutions cannot form {n_c} clusters",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    distinct.shuffle(&mut rng);
    let mut centers: Vec<Vec<f64>> = distinct[..n_c].iter().map(|&i| points[i].clone()).collect();

    let mut loss_history = Vec::new();
    let mut u = memberships_for(points, &centers, m);
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        centers = centers_for(points, &u, m, n_c);
        let j = loss(points, &centers, &u, m);
        let done = loss_history
            .last()
            .is_some_and(|&prev: &f64| (prev - j).abs() < opts.tolerance);
        loss_history.push(j);
        if done {
            break;
        }
        u = memberships_for(points, &centers, m);
    }
    let hard_labels = u
        .iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    Ok(FcmResult {
        centers,
        memberships: u,
        hard_labels,
        loss_history,
        iterations,
    })
}

/// Deng's grey relational coefficients of each row against `reference`,
/// with the extreme deviations taken over the whole matrix.
pub fn grey_relational_coefficients(points: &[Vec<f64>], reference: &[f64]) -> Vec<Vec<f64>> {
    let delta: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(reference)
                .map(|(x, r)| (r - x).abs())
                .collect()
        })
        .collect();
    let flat = delta.iter().flatten();
    let lo = flat.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = flat.copied().fold(0.0, f64::max);
    delta
        .iter()
        .map(|row| {
            row.iter()
                .map(|&d| {
                    if hi == 0.0 {
                        1.0
                    } else {
                        (lo + RESOLUTION * hi) / (d + RESOLUTION * hi)
                    }
                })
                .collect()
        })
        .collect()
}

/// Checks that `weights` are non-negative, of the right length, and sum to 1.
pub fn check_weights(weights: &[f64], objectives: usize) -> Result<()> {
    if weights.len() != objectives {
        return Err(Error::Decision(format!(
            "expected {objectives} weights, got {}",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Decision("weights must be non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Decision(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Projection `V = Σ γ_k ω_k² / sqrt(Σ ω_k²)` of each coefficient row.
pub fn grp_projection(gamma: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Decision("weight vector is zero".into()));
    }
    Ok(gamma
        .iter()
        .map(|row| row.iter().zip(weights).map(|(g, w)| g * w * w).sum::<f64>() / norm)
        .collect())
}

/// Relative closeness `(V0 − V⁻)² / ((V0 − V⁻)² + (V0 − V⁺)²)`; 0.5 when
/// both terms vanish.
pub fn priority_membership(v_plus: &[f64], v_minus: &[f64], v0: f64) -> Vec<f64> {
    v_plus
        .iter()
        .zip(v_minus)
        .map(|(&vp, &vm)| {
            let near = (v0 - vm) * (v0 - vm);
            let far = (v0 - vp) * (v0 - vp);
            if near + far == 0.0 {
                0.5
            } else {
                near / (near + far)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpResult {
    pub gamma_plus: Vec<Vec<f64>>,
    pub gamma_minus: Vec<Vec<f64>>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub v0: f64,
    pub pm: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Grey relational projection of normalised `points` against the column
/// minima (positive ideal) and maxima (negative ideal).
pub fn grey_relational_projection(points: &[Vec<f64>], weights: &[f64]) -> Result<GrpResult> {
    let dim = points.first().map_or(0, Vec::len);
    check_weights(weights, dim)?;
    let column = |pick: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        (0..dim)
            .map(|k| points.iter().map(|p| p[k]).fold(init, pick))
            .collect()
    };
    let positive = column(f64::min, f64::INFINITY);
    let negative = column(f64::max, f64::NEG_INFINITY);
    let gamma_plus = grey_relational_coefficients(points, &positive);
    let gamma_minus = grey_relational_coefficients(points, &negative);
    let v_plus = grp_projection(&gamma_plus, weights)?;
    let v_minus = grp_projection(&gamma_minus, weights)?;
    let v0 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let pm = priority_membership(&v_plus, &v_minus, v0);
    Ok(GrpResult {
        gamma_plus,
        gamma_minus,
        v_plus,
        v_minus,
        v0,
        pm,
        weights: weights.to_vec(),
    })
}

/// Minimum-cost assignment of rows to distinct columns, or of columns to
/// distinct rows when there are more rows. Returns the column per row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let mut out = vec![None; rows];
        for (c, r) in min_cost_assignment(&transposed).into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }
    // Bitmask DP over used columns; rows are assigned in order.
    let full = 1usize << cols;
    let mut best = vec![f64::INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        let r = mask.count_ones() as usize;
        if r >= rows || best[mask].is_infinite() {
            continue;
        }
        for c in 0..cols {
            if mask & (1 << c) != 0 {
                continue;
            }
            let next = mask | (1 << c);
            let value = best[mask] + cost[r][c];
            if value < best[next] {
                best[next] = value;
                choice[next] = c;
            }
        }
    }
    let mut mask = (0..full)
        .filter(|m| m.count_ones() as usize == rows)
        .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut out = vec![None; rows];
    for r in (0..rows).rev() {
        let c = choice[mask];
        out[r] = Some(c);
        mask &= !(1 << c);
    }
    out
}

/// One nonempty cluster and its best-compromise member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterChoice {
    pub cluster: usize,
    /// Objective this cluster favours, from its center.
    pub prefers: Option<usize>,
    pub members: Vec<usize>,
    /// Archive index of the member with the largest priority membership.
    pub bcs: usize,
    pub pm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub weights: Vec<f64>,
    /// Nonempty clusters, ordered by favoured objective and then by index.
    pub clusters: Vec<ClusterChoice>,
    pub notes: Vec<String>,
}

/// Best member of each nonempty hard cluster by priority membership, ties
/// going to the lower first objective and then the lower index. Clusters
/// are labelled by a minimum-cost matching of center coordinates to
/// objectives.
pub fn select_bcs(raw: &[Vec<f64>], fcm: &FcmResult, grp: &GrpResult) -> DecisionReport {
    let mut notes = Vec::new();
    let mut nonempty = Vec::new();
    for j in 0..fcm.centers.len() {
        let members: Vec<usize> = (0..raw.len())
            .filter(|&i| fcm.hard_labels[i] == j)
            .collect();
        if members.is_empty() {
            notes.push(format!("cluster {j} is empty and was omitted"));
        } else {
            nonempty.push((j, members));
        }
    }
    let cost: Vec<Vec<f64>> = nonempty
        .iter()
        .map(|(j, _)| fcm.centers[*j].clone())
        .collect();
    let labels = min_cost_assignment(&cost);
    let mut clusters: Vec<ClusterChoice> = nonempty
        .into_iter()
        .zip(labels)
        .map(|((cluster, members), prefers)| {
            let mut bcs = members[0];
            for &i in &members[1..] {
                let better = grp.pm[i] > grp.pm[bcs]
                    || (grp.pm[i] == grp.pm[bcs] && raw[i][0] < raw[bcs][0]);
                if better {
                    bcs = i;
                }
            }
            ClusterChoice {
                cluster,
                prefers,
                members,
                bcs,
                pm: grp.pm[bcs],
            }
        })
        .collect();
    clusters.sort_by_key(|c| (c.prefers.unwrap_or(usize::MAX), c.cluster));
    for c in &clusters {
        let Some(k) = c.prefers else { continue };
        let worst = raw.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
        if raw.len() > 1 && raw[c.bcs][k] == worst {
            log::warn!(
                "the cluster preferring f{} chose a solution with the worst f{}",
                k + 1,
                k + 1
            );
        }
    }
    DecisionReport {
        weights: grp.weights.clone(),
        clusters,
        notes,
    }
}

/// Everything the decision stage computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub normalized: Vec<Vec<f64>>,
    pub fcm: FcmResult,
    pub grp: GrpResult,
    pub report: DecisionReport,
}

/// Normalise, cluster, project and select.
pub fn decide(raw: &[Vec<f64>], fcm_opts: &FcmOptions, weights: &[f64]) -> Result<Decision> {
    if raw.is_empty() {
        return Err(Error::Decision("archive is empty".into()));
    }
    if raw.len() < fcm_opts.clusters {
        return Err(Error::Decision(format!(
            "archive has {} solutions, fewer than the {} clusters requested",
            raw.len(),
            fcm_opts.clusters
        )));
    }
    let normalized = normalize_objectives(raw);
    let fcm = fcm_cluster(&normalized, fcm_opts)?;
    let grp = grey_relational_projection(&normalized, weights)?;
    let report = select_bcs(raw, &fcm, &grp);
    Ok(Decision {
        normalized,
        fcm,
        grp,
        report,
    })
}
