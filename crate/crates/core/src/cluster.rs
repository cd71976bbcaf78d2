//! Balanced clustering of ensemble basis columns and silhouette statistics.
//!
//! Each ensemble member contributes exactly K basis columns, and the
//! clustering must place exactly one column from every member into each of
//! the K clusters. That makes the per-member step a minimum-cost one-to-one
//! matching between the member's columns and the current centroids (solved
//! exactly with the Hungarian algorithm), alternated with centroid updates
//! until the assignment stabilizes.
//!
//! All distances are cosine distances on L2-normalized columns.

use crate::error::{Error, Result};

/// Result of balanced clustering: normalized points, their cluster ids, and
/// the unit-normalized centroids.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    k: usize,
    ensemble_size: usize,
    /// Normalized columns, member-major: index `member * k + column`.
    points: Vec<Vec<f64>>,
    /// Cluster id per point, same indexing as `points`.
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ensemble_size(&self) -> usize {
        self.ensemble_size
    }

    /// Cluster id assigned to `column` of `member`.
    pub fn label(&self, member: usize, column: usize) -> usize {
        self.labels[member * self.k + column]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Clusters `r` groups of `K` nonnegative columns into `K` balanced clusters.
///
/// Centroids start from member 0's columns; each refinement round matches
/// every member's columns one-to-one against the centroids by minimum total
/// cosine distance, then recomputes centroids as normalized cluster means.
/// Stops when the assignment stabilizes or after `max_iter` rounds.
pub fn balanced_cluster(members: &[Vec<Vec<f64>>], max_iter: usize) -> Result<ClusterAssignment> {
    let r = members.len();
    if r == 0 {
        return Err(Error::InvalidConfig { reason: "no ensemble members to cluster".into() });
    }
    let k = members[0].len();
    if k == 0 {
        return Err(Error::InvalidConfig { reason: "members contribute zero columns".into() });
    }
    let dim = members[0][0].len();
    for (i, group) in members.iter().enumerate() {
        if group.len() != k || group.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidConfig {
                reason: format!("member {i} does not contribute {k} columns of length {dim}"),
            });
        }
    }

    // normalize all columns up front; cosine distance is scale-free
    let mut points = Vec::with_capacity(r * k);
    for (i, group) in members.iter().enumerate() {
        for col in group {
            points.push(normalize(col).ok_or(Error::DegenerateColumns { member: i })?);
        }
    }

    if k == 1 {
        let centroid = normalized_mean(&points, &vec![0usize; r], 0, dim);
        return Ok(ClusterAssignment {
            k,
            ensemble_size: r,
            points,
            labels: vec![0; r],
            centroids: vec![centroid],
        });
    }

    let mut centroids: Vec<Vec<f64>> = points[..k].to_vec();
    let mut labels = vec![0usize; r * k];
    let mut cost = vec![0.0f64; k * k];

    for _round in 0..max_iter.max(1) {
        let mut changed = false;
        for member in 0..r {
            let base = member * k;
            for j in 0..k {
                for (c, centroid) in centroids.iter().enumerate() {
                    cost[j * k + c] = unit_cosine_distance(&points[base + j], centroid);
                }
            }
            let assignment = min_cost_assignment(&cost, k);
            for j in 0..k {
                if labels[base + j] != assignment[j] {
                    labels[base + j] = assignment[j];
                    changed = true;
                }
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            *centroid = normalized_mean(&points, &labels, c, dim);
        }
        if !changed {
            break;
        }
    }

    Ok(ClusterAssignment { k, ensemble_size: r, points, labels, centroids })
}

/// Per-point silhouette statistics of a balanced assignment under cosine
/// distance. Returns `(minimum, mean)` over all points.
///
/// For K = 1 there is no "other" cluster and both values are defined as 1.
/// A point whose silhouette denominator is zero (all distances vanish)
/// contributes 0.
pub fn silhouettes(assignment: &ClusterAssignment) -> (f64, f64) {
    let k = assignment.k;
    if k == 1 {
        return (1.0, 1.0);
    }
    let points = &assignment.points;
    let labels = &assignment.labels;
    let n = points.len();
    let sizes = assignment.cluster_sizes();

    let mut min_s = f64::INFINITY;
    let mut sum_s = 0.0;
    let mut mean_dist = vec![0.0f64; k];
    for i in 0..n {
        mean_dist.fill(0.0);
        for j in 0..n {
            if i != j {
                mean_dist[labels[j]] += unit_cosine_distance(&points[i], &points[j]);
            }
        }
        let own = labels[i];
        let a = if sizes[own] > 1 { mean_dist[own] / (sizes[own] - 1) as f64 } else { 0.0 };
        let mut b = f64::INFINITY;
        for (c, &size) in sizes.iter().enumerate() {
            if c != own && size > 0 {
                b = b.min(mean_dist[c] / size as f64);
            }
        }
        let denom = a.max(b);
        let s = if denom > 0.0 { (b - a) / denom } else { 0.0 };
        min_s = min_s.min(s);
        sum_s += s;
    }
    (min_s, sum_s / n as f64)
}

fn normalize(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| x / norm).collect())
}

fn normalized_mean(points: &[Vec<f64>], labels: &[usize], cluster: usize, dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0f64; dim];
    let mut count = 0usize;
    for (p, &l) in points.iter().zip(labels) {
        if l == cluster {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
            count += 1;
        }
    }
    if count > 0 {
        for m in &mut mean {
            *m /= count as f64;
        }
    }
    normalize(&mean).unwrap_or(mean)
}

/// Cosine distance between two unit-norm vectors.
fn unit_cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (1.0 - dot).clamp(0.0, 1.0)
}

/// Exact minimum-cost one-to-one assignment (Hungarian algorithm with
/// potentials, O(n^3)). `cost` is row-major `n * n`; returns for each row the
/// assigned column.
pub(crate) fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-indexed potentials; p[j] = row matched to column j (0 = none)
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
