//! UMAP-style 2-D embedding: exact k-NN graph, fuzzy union of directed
//! memberships and an SGD layout with negative sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub k: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub epochs: usize,
    pub negative_samples: usize,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            k: 15,
            min_dist: 0.1,
            spread: 1.0,
            epochs: 500,
            negative_samples: 5,
            seed: 0,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        if !(self.min_dist > 0.0 && self.min_dist < self.spread) {
            return Err(Error::invalid("need 0 < min_dist < spread"));
        }
        Ok(())
    }
}

/// One neighbor of a point: (index, distance).
pub type Neighbor = (usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub neighbors: Vec<Vec<Neighbor>>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Symmetrized edges `(i, j, w)` with `i < j`, `w ∈ (0, 1]`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<[f64; 2]>,
    /// Points without any edge; they keep their random placement.
    pub isolated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

impl Embedding {
    pub fn records(&self) -> Vec<EmbeddingRecord> {
        self.coords
            .iter()
            .enumerate()
            .map(|(id, c)| EmbeddingRecord { id, x: c[0], y: c[1] })
            .collect()
    }

    /// `id,x,y` table with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,x,y\n");
        for r in self.records() {
            out.push_str(&format!("{},{},{}\n", r.id, r.x, r.y));
        }
        out
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact k nearest neighbors by brute force; ties go to the lower index.
pub fn knn(points: &[Vec<f64>], k: usize) -> Result<Vec<Vec<Neighbor>>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 0 < k < n = {n}")));
    }
    let cmp = |a: &Neighbor, b: &Neighbor| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    Ok((0..n)
        .map(|i| {
            let mut cand: Vec<Neighbor> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, dist(&points[i], &points[j])))
                .collect();
            cand.select_nth_unstable_by(k - 1, cmp);
            cand.truncate(k);
            cand.sort_by(cmp);
            cand
        })
        .collect())
}

/// Per-point `(rho, sigma)`: `rho` is the smallest positive distance and
/// `sigma` solves `Σ_j exp(-max(0, d_j - rho) / sigma) = log2(k)` by bisection.
pub fn smooth_knn(distances: &[f64], k: usize) -> (f64, f64) {
    let rho = distances.iter().copied().find(|d| *d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();
    let mean = if distances.is_empty() {
        0.0
    } else {
        distances.iter().sum::<f64>() / distances.len() as f64
    };
    let lower = if mean > 0.0 { 1e-6 * mean } else { 1e-6 };
    let upper = 1e6;
    let psum = |sigma: f64| -> f64 { distances.iter().map(|d| (-(d - rho).max(0.0) / sigma).exp()).sum() };
    if psum(lower) >= target {
        return (rho, lower);
    }
    if psum(upper) <= target {
        return (rho, upper);
    }
    let (mut lo, mut hi) = (lower, upper);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if psum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (rho, 0.5 * (lo + hi))
}

/// Probabilistic t-conorm `a + b - a·b`.
pub fn fuzzy_union(w_ij: f64, w_ji: f64) -> f64 {
    w_ij + w_ji - w_ij * w_ji
}

pub fn build_graph(points: &[Vec<f64>], k: usize) -> Result<NeighborGraph> {
    let neighbors = knn(points, k)?;
    let n = points.len();
    let mut rho = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for list in &neighbors {
        let d: Vec<f64> = list.iter().map(|(_, d)| *d).collect();
        let (r, s) = smooth_knn(&d, k);
        rho.push(r);
        sigma.push(s);
    }
    let mut directed: std::collections::BTreeMap<(usize, usize), (f64, f64)> = Default::default();
    for (i, list) in neighbors.iter().enumerate() {
        for &(j, d) in list {
            let w = (-(d - rho[i]).max(0.0) / sigma[i]).exp();
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let slot = directed.entry((a, b)).or_insert((0.0, 0.0));
            if i < j {
                slot.0 = w;
            } else {
                slot.1 = w;
            }
        }
    }
    let edges = directed
        .into_iter()
        .map(|((i, j), (wij, wji))| (i, j, fuzzy_union(wij, wji)))
        .filter(|(_, _, w)| *w > 0.0)
        .collect();
    Ok(NeighborGraph {
        neighbors,
        rho,
        sigma,
        edges,
    })
}

/// Least-squares fit of `1 / (1 + a x^{2b})` to the target curve (1 below
/// `min_dist`, exponential decay with scale `spread` above) on
/// 300 samples of `[0, 3·spread]`. Levenberg-Marquardt from `(1, 1)`.
pub fn fit_curve(min_dist: f64, spread: f64) -> Result<(f64, f64)> {
    if !(min_dist > 0.0 && min_dist < spread) {
        return Err(Error::invalid("need 0 < min_dist < spread"));
    }
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| if x < min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        // J^T J and J^T r
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x <= 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let m00 = jaa * (1.0 + lambda);
            let m11 = jbb * (1.0 + lambda);
            let det = m00 * m11 - jab * jab;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(m11 * ga - jab * gb) / det;
            let step_b = -(m00 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            if na > 0.0 && nb > 0.0 {
                let c = sse(na, nb);
                if c < cost {
                    let rel = (cost - c) / cost.max(1e-300);
                    a = na;
                    b = nb;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Numeric(format!("curve fit diverged: a = {a}, b = {b}")));
    }
    Ok((a, b))
}

fn clip(v: f64) -> f64 {
    v.clamp(-4.0, 4.0)
}

/// SGD layout. Each directed edge is sampled every `max_w / w` epochs and
/// is followed by `negative_samples` uniform negative samples; the learning
/// rate decays linearly from 1 to 0. Deterministic for a fixed seed.
pub fn embed(graph: &NeighborGraph, config: &EmbedConfig) -> Result<Embedding> {
    config.validate()?;
    let n = graph.len();
    let (a, b) = fit_curve(config.min_dist, config.spread)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)])
        .collect();

    let mut degree = vec![0usize; n];
    for &(i, j, _) in &graph.edges {
        degree[i] += 1;
        degree[j] += 1;
    }
    let isolated = degree.iter().filter(|d| **d == 0).count();
    if config.epochs == 0 || graph.edges.is_empty() {
        return Ok(Embedding { coords, isolated });
    }

    let max_w = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let epochs = config.epochs as f64;
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut per_sample = Vec::new();
    for &(i, j, w) in &graph.edges {
        let eps = max_w / w;
        if eps > epochs {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            per_sample.push(eps);
        }
    }
    let neg_rate = config.negative_samples as f64;
    let per_negative: Vec<f64> = per_sample.iter().map(|e| e / neg_rate.max(1e-12)).collect();
    let mut next_sample = per_sample.clone();
    let mut next_negative = per_negative.clone();

    for epoch in 0..config.epochs {
        let alpha = 1.0 - epoch as f64 / epochs;
        let e_f = epoch as f64;
        for e in 0..heads.len() {
            if next_sample[e] > e_f {
                continue;
            }
            let j = heads[e];
            let k = tails[e];
            let (dx, dy) = (coords[j][0] - coords[k][0], coords[j][1] - coords[k][1]);
            let d2 = dx * dx + dy * dy;
            if d2 > 0.0 {
                let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0);
                let gx = clip(coeff * dx) * alpha;
                let gy = clip(coeff * dy) * alpha;
                coords[j][0] += gx;
                coords[j][1] += gy;
                coords[k][0] -= gx;
                coords[k][1] -= gy;
            }
            next_sample[e] += per_sample[e];

            if config.negative_samples > 0 {
                let n_neg = ((e_f - next_negative[e]) / per_negative[e]).floor().max(0.0) as usize;
                for _ in 0..n_neg {
                    let k = rng.random_range(0..n);
                    if k == j {
                        continue;
                    }
                    let (dx, dy) = (coords[j][0] - coords[k][0], coords[j][1] - coords[k][1]);
                    let d2 = dx * dx + dy * dy;
                    let (gx, gy) = if d2 > 0.0 {
                        let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                        (clip(coeff * dx), clip(coeff * dy))
                    } else {
                        (4.0, 4.0)
                    };
                    coords[j][0] += gx * alpha;
                    coords[j][1] += gy * alpha;
                }
                next_negative[e] += n_neg as f64 * per_negative[e];
            }
        }
    }
    if coords.iter().any(|c| !c[0].is_finite() || !c[1].is_finite()) {
        return Err(Error::Numeric("embedding produced non-finite coordinates".into()));
    }
    Ok(Embedding { coords, isolated })
}

/// Graph construction followed by layout.
pub fn embed_points(points: &[Vec<f64>], config: &EmbedConfig) -> Result<(NeighborGraph, Embedding)> {
    config.validate()?;
    let graph = build_graph(points, config.k)?;
    let embedding = embed(&graph, config)?;
    Ok((graph, embedding))
}

fn ranked_neighbors(points: &[Vec<f64>], i: usize) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (j, dist(&points[i], p)))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(j, _)| j).collect()
}

/// Rank-based trustworthiness of an embedding in `[0, 1]`.
pub fn trustworthiness(original: &[Vec<f64>], embedded: &Embedding, k: usize) -> Result<f64> {
    let n = original.len();
    if embedded.coords.len() != n {
        return Err(Error::invalid("embedding and original differ in length"));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::invalid(format!("trustworthiness needs 0 < k < n/2 (k = {k}, n = {n})")));
    }
    let emb: Vec<Vec<f64>> = embedded.coords.iter().map(|c| c.to_vec()).collect();
    let mut penalty = 0.0;
    let mut rank = vec![0usize; n];
    for i in 0..n {
        let orig_order = ranked_neighbors(original, i);
        for (r, j) in orig_order.iter().enumerate() {
            rank[*j] = r + 1;
        }
        let emb_nn = knn_row(&emb, i, k);
        for j in emb_nn {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let t = 1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty;
    Ok(t.clamp(0.0, 1.0))
}

fn knn_row(points: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut order = ranked_neighbors(points, i);
    order.truncate(k);
    order
}

/// For each point, the fraction of its `k` nearest embedded neighbors that
/// carry the same label.
pub fn neighbor_label_agreement<L: PartialEq>(embedded: &Embedding, labels: &[L], k: usize) -> Result<Vec<f64>> {
    if labels.len() != embedded.coords.len() {
        return Err(Error::invalid("label count differs from embedding length"));
    }
    let emb: Vec<Vec<f64>> = embedded.coords.iter().map(|c| c.to_vec()).collect();
    let nn = knn(&emb, k)?;
    Ok(nn
        .iter()
        .enumerate()
        .map(|(i, list)| list.iter().filter(|(j, _)| labels[*j] == labels[i]).count() as f64 / k as f64)
        .collect())
}
