//! Latent-space partitioning: K-means (Lloyd), diagonal Gaussian mixture
//! (EM) and Ward agglomerative clustering, plus nearest-center and
//! Student's-t soft assignment.
//!
//! Cluster labels are 0-based internally.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ClusteringAlgorithm;
use crate::error::{Error, Result};
use crate::tensor::{squared_distance, Tensor, Var};

const KMEANS_MAX_ITER: usize = 300;
/// Independent k-means++ starts; the lowest final SSE wins.
pub const KMEANS_RESTARTS: usize = 10;
const GMM_MAX_ITER: usize = 300;
const GMM_VARIANCE_FLOOR: f64 = 1e-6;
const GMM_TOL: f64 = 1e-10;

/// A fitted partition of one latent view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub algorithm: ClusteringAlgorithm,
    /// K×d cluster centers.
    pub centers: Tensor,
    /// Hard assignment per fitted row.
    pub assignments: Vec<usize>,
    /// Student's-t degrees of freedom used by soft assignment.
    pub nu: f64,
    /// Objective trace of the fit: within-cluster SSE per Lloyd iteration
    /// or log-likelihood per EM step. Empty for agglomerative fits.
    #[serde(default)]
    pub history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }
}

fn check_sizes(z: &Tensor, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("number of clusters must be >= 1".into()));
    }
    if z.rows() < k {
        return Err(Error::Usage(format!(
            "cannot form {k} clusters from {} points",
            z.rows()
        )));
    }
    Ok(())
}

/// Within-cluster sum of squared distances.
pub fn within_cluster_sse(z: &Tensor, centers: &Tensor, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(z.row(i), centers.row(c)))
        .sum()
}

fn cluster_means(z: &Tensor, assignments: &[usize], k: usize) -> (Tensor, Vec<usize>) {
    let d = z.cols();
    let mut centers = Tensor::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        for (m, v) in centers.row_mut(c).iter_mut().zip(z.row(i)) {
            *m += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            centers.row_mut(c).iter_mut().for_each(|m| *m /= n as f64);
        }
    }
    (centers, counts)
}

/// Nearest center for every row; ties go to the lowest index.
pub fn assign_nearest(z: &Tensor, centers: &Tensor) -> Vec<usize> {
    z.iter_rows()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for k in 0..centers.rows() {
                let d = squared_distance(row, centers.row(k));
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn kmeans_pp_init(z: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let n = z.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| squared_distance(z.row(i), z.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a chosen center
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(squared_distance(z.row(i), z.row(next)));
        }
    }
    z.select_rows(&chosen)
}

/// Moves each empty cluster's center onto the point farthest from its
/// current center, taking that point into the empty cluster.
fn repair_empty(z: &Tensor, centers: &mut Tensor, assignments: &mut [usize]) -> bool {
    let k = centers.rows();
    let mut repaired = false;
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return repaired;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &c) in assignments.iter().enumerate() {
            if counts[c] < 2 {
                continue;
            }
            let d = squared_distance(z.row(i), centers.row(c));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return repaired };
        assignments[i] = empty;
        centers.row_mut(empty).copy_from_slice(z.row(i));
        repaired = true;
    }
}

/// Lloyd's algorithm from `KMEANS_RESTARTS` seeded k-means++ starts,
/// keeping the run with the lowest within-cluster SSE (earliest on ties).
pub fn kmeans_fit(z: &Tensor, k: usize, seed: u64) -> Result<ClusterModel> {
    check_sizes(z, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(z, kmeans_pp_init(z, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.history.last() < b.history.last()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

fn lloyd(z: &Tensor, mut centers: Tensor) -> ClusterModel {
    let k = centers.rows();
    let mut assignments = assign_nearest(z, &centers);
    let mut history = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        repair_empty(z, &mut centers, &mut assignments);
        history.push(within_cluster_sse(z, &centers, &assignments));
        let (means, counts) = cluster_means(z, &assignments, k);
        for c in 0..k {
            if counts[c] > 0 {
                centers.row_mut(c).copy_from_slice(means.row(c));
            }
        }
        let next = assign_nearest(z, &centers);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    if repair_empty(z, &mut centers, &mut assignments) {
        let (means, _) = cluster_means(z, &assignments, k);
        centers = means;
    }
    history.push(within_cluster_sse(z, &centers, &assignments));
    ClusterModel {
        algorithm: ClusteringAlgorithm::Kmeans,
        centers,
        assignments,
        nu: 1.0,
        history,
    }
}

/// Diagonal-covariance Gaussian mixture parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Tensor,
    pub variances: Tensor,
    pub log_likelihood: Vec<f64>,
}

fn gmm_log_densities(z: &Tensor, g: &GaussianMixture) -> Tensor {
    let (n, k, d) = (z.rows(), g.weights.len(), z.cols());
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut out = Tensor::zeros(n, k);
    for c in 0..k {
        let mean = g.means.row(c);
        let var = g.variances.row(c);
        let norm: f64 = -0.5 * (d as f64 * ln2pi + var.iter().map(|v| v.ln()).sum::<f64>());
        let lw = g.weights[c].ln();
        for i in 0..n {
            let q: f64 = z
                .row(i)
                .iter()
                .zip(mean)
                .zip(var)
                .map(|((x, m), v)| (x - m) * (x - m) / v)
                .sum();
            out.set(i, c, lw + norm - 0.5 * q);
        }
    }
    out
}

/// EM for a diagonal Gaussian mixture, initialized from K-means.
pub fn gmm_em(z: &Tensor, k: usize, seed: u64) -> Result<(GaussianMixture, Tensor)> {
    check_sizes(z, k)?;
    let (n, d) = (z.rows(), z.cols());
    let init = kmeans_fit(z, k, seed)?;
    let counts = init.sizes();
    let mut variances = Tensor::zeros(k, d);
    for (i, &c) in init.assignments.iter().enumerate() {
        for ((v, x), m) in variances.row_mut(c).iter_mut().zip(z.row(i)).zip(init.centers.row(c)) {
            *v += (x - m) * (x - m);
        }
    }
    for c in 0..k {
        let nc = counts[c].max(1) as f64;
        variances.row_mut(c).iter_mut().for_each(|v| *v = (*v / nc).max(GMM_VARIANCE_FLOOR));
    }
    let mut g = GaussianMixture {
        weights: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        means: init.centers,
        variances,
        log_likelihood: Vec::new(),
    };

    let mut resp = Tensor::zeros(n, k);
    for _ in 0..GMM_MAX_ITER {
        // E-step
        let logd = gmm_log_densities(z, &g);
        let mut ll = 0.0;
        for i in 0..n {
            let row = logd.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            ll += lse;
            for c in 0..k {
                resp.set(i, c, (logd.get(i, c) - lse).exp());
            }
        }
        if !ll.is_finite() {
            return Err(Error::Numeric("gaussian mixture log-likelihood is not finite".into()));
        }
        let converged = g
            .log_likelihood
            .last()
            .is_some_and(|&prev| ll - prev <= GMM_TOL * ll.abs().max(1.0));
        g.log_likelihood.push(ll);
        if converged {
            break;
        }
        // M-step
        for c in 0..k {
            let nk: f64 = (0..n).map(|i| resp.get(i, c)).sum();
            if nk < 1e-10 {
                return Err(Error::Numeric(format!(
                    "gaussian mixture component {} collapsed",
                    c + 1
                )));
            }
            g.weights[c] = nk / n as f64;
            let mut mean = vec![0.0; d];
            for i in 0..n {
                let r = resp.get(i, c);
                for (m, x) in mean.iter_mut().zip(z.row(i)) {
                    *m += r * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for i in 0..n {
                let r = resp.get(i, c);
                for ((v, x), m) in var.iter_mut().zip(z.row(i)).zip(&mean) {
                    *v += r * (x - m) * (x - m);
                }
            }
            var.iter_mut().for_each(|v| *v = (*v / nk).max(GMM_VARIANCE_FLOOR));
            g.means.row_mut(c).copy_from_slice(&mean);
            g.variances.row_mut(c).copy_from_slice(&var);
        }
    }
    Ok((g, resp))
}

/// Gaussian mixture clustering; hard labels are the argmax responsibility.
pub fn gmm_fit(z: &Tensor, k: usize, seed: u64) -> Result<ClusterModel> {
    let (g, resp) = gmm_em(z, k, seed)?;
    let mut assignments: Vec<usize> = resp
        .iter_rows()
        .map(|r| {
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    // A component may win no argmax; give it its most responsible point.
    let mut counts = vec![0usize; k];
    for &c in &assignments {
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] == 0 {
            let donor = (0..z.rows())
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| resp.get(a, c).total_cmp(&resp.get(b, c)).then(b.cmp(&a)));
            if let Some(i) = donor {
                counts[assignments[i]] -= 1;
                assignments[i] = c;
                counts[c] += 1;
            }
        }
    }
    Ok(ClusterModel {
        algorithm: ClusteringAlgorithm::Gmm,
        centers: g.means,
        assignments,
        nu: 1.0,
        history: g.log_likelihood,
    })
}

/// Ward-linkage agglomerative clustering via Lance–Williams updates.
/// Deterministic; ties go to the lowest (i, j) pair.
pub fn agglomerative_fit(z: &Tensor, k: usize) -> Result<ClusterModel> {
    check_sizes(z, k)?;
    let n = z.rows();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_distance(z.row(i), z.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut parent: Vec<usize> = (0..n).collect();
    // nearest active neighbour (higher or lower index) per active cluster
    let nearest = |i: usize, active: &[bool], dist: &[f64]| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j != i && active[j] && dist[i * n + j] < best.0 {
                best = (dist[i * n + j], j);
            }
        }
        best
    };
    let mut nn: Vec<(f64, usize)> = (0..n).map(|i| nearest(i, &active, &dist)).collect();

    let mut clusters = n;
    while clusters > k {
        // global minimum over (d, lower index, higher index)
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            let (d, j) = nn[i];
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let better = match best {
                None => true,
                Some((bd, ba, bb)) => d < bd || (d == bd && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((d, a, b));
            }
        }
        let (dij, a, b) = best.expect("at least two active clusters");
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for m in 0..n {
            if !active[m] || m == a || m == b {
                continue;
            }
            let nm = size[m] as f64;
            let updated = ((nm + na) * dist[m * n + a] + (nm + nb) * dist[m * n + b] - nm * dij) / (nm + na + nb);
            dist[m * n + a] = updated;
            dist[a * n + m] = updated;
        }
        active[b] = false;
        size[a] += size[b];
        for p in parent.iter_mut() {
            if *p == b {
                *p = a;
            }
        }
        clusters -= 1;
        for m in 0..n {
            if !active[m] {
                continue;
            }
            let stale = m == a || nn[m].1 == a || nn[m].1 == b;
            if stale {
                nn[m] = nearest(m, &active, &dist);
            } else {
                let d = dist[m * n + a];
                if d < nn[m].0 || (d == nn[m].0 && a < nn[m].1) {
                    nn[m] = (d, a);
                }
            }
        }
    }

    // Labels in order of first appearance.
    let mut label_of = vec![usize::MAX; n];
    let mut next = 0;
    let assignments: Vec<usize> = parent
        .iter()
        .map(|&root| {
            if label_of[root] == usize::MAX {
                label_of[root] = next;
                next += 1;
            }
            label_of[root]
        })
        .collect();
    let (centers, _) = cluster_means(z, &assignments, k);
    Ok(ClusterModel {
        algorithm: ClusteringAlgorithm::Agglomerative,
        centers,
        assignments,
        nu: 1.0,
        history: Vec::new(),
    })
}

/// Fits the named algorithm.
pub fn fit(algorithm: ClusteringAlgorithm, z: &Tensor, k: usize, seed: u64) -> Result<ClusterModel> {
    match algorithm {
        ClusteringAlgorithm::Kmeans => kmeans_fit(z, k, seed),
        ClusteringAlgorithm::Gmm => gmm_fit(z, k, seed),
        ClusteringAlgorithm::Agglomerative => agglomerative_fit(z, k),
        ClusteringAlgorithm::Spectral => Err(Error::Config(
            "spectral clustering is not supported; use kmeans, gmm or agglomerative".into(),
        )),
    }
}

/// Student's-t soft assignment `q_ik ∝ (1 + ‖z_i − m_k‖²/ν)^(−(ν+1)/2)`.
pub fn soft_assign(z: &Tensor, centers: &Tensor, nu: f64) -> Result<Tensor> {
    if !(nu > 0.0) {
        return Err(Error::Usage(format!("degrees of freedom must be > 0, got {nu}")));
    }
    let k = centers.rows();
    let mut q = Tensor::zeros(z.rows(), k);
    let power = -(nu + 1.0) / 2.0;
    for i in 0..z.rows() {
        // log-domain normalisation keeps far-away points finite
        let logs: Vec<f64> = (0..k)
            .map(|c| power * (1.0 + squared_distance(z.row(i), centers.row(c)) / nu).ln())
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        for (c, l) in logs.iter().enumerate() {
            q.set(i, c, (l - m).exp() / s);
        }
    }
    Ok(q)
}

/// Differentiable soft assignment; `centers` is usually a constant.
pub fn soft_assign_var<'t>(z: Var<'t>, centers: Var<'t>, nu: f64) -> Result<Var<'t>> {
    if !(nu > 0.0) {
        return Err(Error::Usage(format!("degrees of freedom must be > 0, got {nu}")));
    }
    let logits = z
        .squared_distances(centers)?
        .scale(1.0 / nu)?
        .add_scalar(1.0)?
        .log()?
        .scale(-(nu + 1.0) / 2.0)?;
    logits.row_softmax()
}
