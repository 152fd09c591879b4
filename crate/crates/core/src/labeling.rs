//! Time-domain clustering and Gaussian weighted labeling.
//!
//! Mean execution times are clustered with 1-D k-means; clusters are
//! relabeled so their centers ascend, which makes label 0 the fastest time
//! range. Bucket edges sit halfway between the slowest member of one cluster
//! and the fastest member of the next. A trace whose time is modeled as
//! `Normal(mean, std)` then receives, for each bucket, the probability mass
//! that falls inside it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::std_normal_cdf;
use crate::trace::{Corpus, LabelDistribution, TimingSummary};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const KMEANS_RESTARTS: usize = 10;
pub const DEFAULT_K_RANGE: (usize, usize) = (2, 8);
const SILHOUETTE_TIE: f64 = 1e-12;

/// Result of clustering mean times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster means, strictly ascending.
    pub centers_s: Vec<f64>,
    /// `k - 1` bucket edges, strictly ascending.
    pub boundaries_s: Vec<f64>,
    /// Hard cluster index for each input point, in input order.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

impl Clustering {
    /// Bucket index of `t`: bucket `i` is `(b[i-1], b[i]]`.
    pub fn bucket_of(&self, t: f64) -> usize {
        bucket_of(t, &self.boundaries_s)
    }
}

pub fn bucket_of(t: f64, boundaries_s: &[f64]) -> usize {
    boundaries_s.iter().take_while(|b| t > **b).count()
}

fn distinct_count(points: &[f64]) -> usize {
    let mut v = points.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn nearest(x: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = (x - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn inertia(points: &[f64], centers: &[f64], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(x, &j)| (x - centers[j]).powi(2))
        .sum()
}

fn kmeans_plus_plus(points: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                if *w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < *w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        centers.push(c);
        for (w, x) in d2.iter_mut().zip(points) {
            *w = w.min((x - c).powi(2));
        }
    }
    centers
}

/// Lloyd iterations from `centers`. Returns final centers, assignment and the
/// objective after every assignment step.
pub(crate) fn lloyd(
    points: &[f64],
    mut centers: Vec<f64>,
    max_iter: usize,
) -> (Vec<f64>, Vec<usize>, Vec<f64>) {
    let k = centers.len();
    let mut assignment: Vec<usize> = points.iter().map(|x| nearest(*x, &centers)).collect();
    let mut history = vec![inertia(points, &centers, &assignment)];
    for _ in 0..max_iter {
        let mut sums = vec![0.0; k];
        let mut sizes = vec![0usize; k];
        for (x, &j) in points.iter().zip(&assignment) {
            sums[j] += x;
            sizes[j] += 1;
        }
        for j in 0..k {
            if sizes[j] > 0 {
                centers[j] = sums[j] / sizes[j] as f64;
            } else {
                // Reseed an empty cluster at the worst-fit point.
                let far = points
                    .iter()
                    .zip(&assignment)
                    .enumerate()
                    .max_by(|(_, (a, &ja)), (_, (b, &jb))| {
                        (*a - centers[ja])
                            .abs()
                            .total_cmp(&(*b - centers[jb]).abs())
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                centers[j] = points[far];
            }
        }
        let next: Vec<usize> = points.iter().map(|x| nearest(*x, &centers)).collect();
        history.push(inertia(points, &centers, &next));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    (centers, assignment, history)
}

/// 1-D k-means with k-means++ seeding and [`KMEANS_RESTARTS`] restarts.
pub fn kmeans_1d(points: &[f64], k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Clustering("k must be at least 1".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Clustering("non-finite time".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::Clustering(format!(
            "k = {k} exceeds the {distinct} distinct values"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let init = kmeans_plus_plus(points, k, &mut rng);
        let (centers, assignment, history) = lloyd(points, init, MAX_LLOYD_ITERATIONS);
        let obj = *history.last().expect("history is never empty");
        let nonempty = (0..k).all(|j| assignment.contains(&j));
        if !nonempty {
            continue;
        }
        if best.as_ref().is_none_or(|(_, _, b)| obj < *b) {
            best = Some((centers, assignment, obj));
        }
    }
    let (centers, assignment, obj) = best
        .ok_or_else(|| Error::Clustering(format!("no restart produced {k} nonempty clusters")))?;

    // Relabel by ascending center.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| centers[*a].total_cmp(&centers[*b]));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let centers_s: Vec<f64> = order.iter().map(|&j| centers[j]).collect();
    let assignment: Vec<usize> = assignment.iter().map(|&j| rank[j]).collect();
    let boundaries_s = bucket_boundaries(k, &assignment, points)?;
    Ok(Clustering {
        k,
        centers_s,
        boundaries_s,
        assignment,
        inertia: obj,
    })
}

/// Edge between clusters `i` and `i+1` = (max of `i` + min of `i+1`) / 2.
pub fn bucket_boundaries(k: usize, assignment: &[usize], points: &[f64]) -> Result<Vec<f64>> {
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for (x, &j) in points.iter().zip(assignment) {
        if j >= k {
            return Err(Error::Clustering(format!("cluster index {j} out of range")));
        }
        lo[j] = lo[j].min(*x);
        hi[j] = hi[j].max(*x);
    }
    if let Some(j) = (0..k).find(|&j| lo[j] > hi[j]) {
        return Err(Error::Clustering(format!("cluster {j} is empty")));
    }
    let boundaries: Vec<f64> = (0..k.saturating_sub(1))
        .map(|i| (hi[i] + lo[i + 1]) / 2.0)
        .collect();
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Clustering("bucket edges are not increasing".into()));
    }
    Ok(boundaries)
}

/// Mean silhouette coefficient of a 1-D partition.
///
/// Uses sorted per-cluster prefix sums so each point costs O(k log n).
/// Points in singleton clusters score 0.
pub fn silhouette_1d(points: &[f64], assignment: &[usize], k: usize) -> f64 {
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (x, &j) in points.iter().zip(assignment) {
        members[j].push(*x);
    }
    let prefix: Vec<Vec<f64>> = members
        .iter_mut()
        .map(|m| {
            m.sort_by(f64::total_cmp);
            let mut p = Vec::with_capacity(m.len() + 1);
            p.push(0.0);
            for x in m.iter() {
                p.push(p.last().unwrap() + x);
            }
            p
        })
        .collect();
    // Sum of |x - y| over y in cluster j.
    let abs_sum = |x: f64, j: usize| -> f64 {
        let m = &members[j];
        let p = &prefix[j];
        let below = m.partition_point(|y| *y <= x);
        let n = m.len();
        (x * below as f64 - p[below]) + (p[n] - p[below] - x * (n - below) as f64)
    };
    let total: f64 = points
        .iter()
        .zip(assignment)
        .map(|(&x, &own)| {
            let n_own = members[own].len();
            if n_own <= 1 {
                return 0.0;
            }
            let a = abs_sum(x, own) / (n_own - 1) as f64;
            let b = (0..k)
                .filter(|&j| j != own && !members[j].is_empty())
                .map(|j| abs_sum(x, j) / members[j].len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 && b.is_finite() {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .sum();
    total / points.len() as f64
}

/// The k in `k_range` (inclusive) maximizing the mean silhouette.
pub fn choose_k(points: &[f64], k_range: (usize, usize), seed: u64) -> Result<usize> {
    let lo = k_range.0.max(2);
    let hi = k_range.1.min(distinct_count(points));
    if lo > hi {
        return Err(Error::Clustering(format!(
            "no feasible k in [{}, {}] for {} distinct values",
            k_range.0,
            k_range.1,
            distinct_count(points)
        )));
    }
    let mut best_k = lo;
    let mut best_score = f64::NEG_INFINITY;
    for k in lo..=hi {
        let c = kmeans_1d(points, k, seed)?;
        let score = silhouette_1d(points, &c.assignment, k);
        if score > best_score + SILHOUETTE_TIE {
            best_k = k;
            best_score = score;
        }
    }
    Ok(best_k)
}

/// Probability mass of `Normal(t, σ)` in each bucket. σ = 0 gives a point
/// mass on the bucket containing `t`.
pub fn weighted_labels(summary: &TimingSummary, boundaries_s: &[f64]) -> LabelDistribution {
    let k = boundaries_s.len() + 1;
    let (t, sigma) = (summary.mean_s, summary.std_s);
    if sigma <= 0.0 {
        return LabelDistribution::point(bucket_of(t, boundaries_s), k);
    }
    let mut probs = Vec::with_capacity(k);
    let mut prev = 0.0;
    for b in boundaries_s {
        let c = std_normal_cdf((b - t) / sigma);
        probs.push((c - prev).max(0.0));
        prev = c;
    }
    probs.push((1.0 - prev).max(0.0));
    LabelDistribution::new(probs).expect("telescoping CDF differences form a distribution")
}

/// How the number of clusters is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto { min: usize, max: usize },
    Fixed(usize),
}

impl Default for KChoice {
    fn default() -> Self {
        KChoice::Auto {
            min: DEFAULT_K_RANGE.0,
            max: DEFAULT_K_RANGE.1,
        }
    }
}

/// Per-trace entry of a [`LabelFile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLabel {
    pub id: String,
    pub mean_s: f64,
    pub std_s: f64,
    pub cluster: usize,
    pub weights: LabelDistribution,
}

/// The clustering JSON exchanged between `cluster` and the learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelFile {
    pub k: usize,
    pub centers_s: Vec<f64>,
    pub boundaries_s: Vec<f64>,
    pub traces: Vec<TraceLabel>,
}

impl LabelFile {
    /// Label distributions aligned with `corpus` trace order.
    pub fn distributions_for(&self, corpus: &Corpus) -> Result<Vec<LabelDistribution>> {
        let by_id: std::collections::HashMap<&str, &TraceLabel> =
            self.traces.iter().map(|t| (t.id.as_str(), t)).collect();
        corpus
            .traces()
            .iter()
            .map(|t| {
                let entry = by_id.get(t.id.as_str()).ok_or_else(|| {
                    Error::Clustering(format!("trace {:?} has no label entry", t.id))
                })?;
                if entry.weights.num_labels() != self.k {
                    return Err(Error::Clustering(format!(
                        "trace {:?} has {} weights, expected {}",
                        t.id,
                        entry.weights.num_labels(),
                        self.k
                    )));
                }
                Ok(entry.weights.clone())
            })
            .collect()
    }

    /// Scatter rows `trace_id,mean_s,std_s,cluster`.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("trace_id,mean_s,std_s,cluster\n");
        for t in &self.traces {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.id, t.mean_s, t.std_s, t.cluster
            ));
        }
        out
    }
}

/// Clusters a corpus by mean time and attaches weighted labels to every trace.
pub fn label_corpus(corpus: &Corpus, k: KChoice, seed: u64) -> Result<LabelFile> {
    let means = corpus.mean_times();
    let k = match k {
        KChoice::Fixed(k) => k,
        KChoice::Auto { min, max } => choose_k(&means, (min, max), seed)?,
    };
    let clustering = kmeans_1d(&means, k, seed)?;
    let traces = corpus
        .traces()
        .iter()
        .zip(corpus.summaries())
        .zip(&clustering.assignment)
        .map(|((t, s), &cluster)| TraceLabel {
            id: t.id.clone(),
            mean_s: s.mean_s,
            std_s: s.std_s,
            cluster,
            weights: weighted_labels(s, &clustering.boundaries_s),
        })
        .collect();
    Ok(LabelFile {
        k,
        centers_s: clustering.centers_s,
        boundaries_s: clustering.boundaries_s,
        traces,
    })
}
