use std::collections::HashSet;

use rand::Rng;

use super::{nearest, squared_distance, Codebook, Priors};
use crate::error::{Error, Result};
use crate::types::{Embedding, Seed};

/// Row-major collection of equal-length fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSet {
    dim: usize,
    data: Vec<f64>,
}

impl FragmentSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("fragment dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        Ok(FragmentSet { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        Self::new(dim, rows.concat())
    }

    /// Pools every `d`-fragment of every embedding, in order.
    pub fn from_embeddings<'a, I>(embeddings: I, d: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Embedding>,
    {
        let mut data = Vec::new();
        for e in embeddings {
            if d == 0 || e.dim() % d != 0 {
                return Err(Error::NonDivisible { n: e.dim(), d });
            }
            data.extend_from_slice(e.values());
        }
        Self::new(d, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn has_distinct(&self, needed: usize) -> (bool, usize) {
        let mut seen = HashSet::new();
        for row in self.rows() {
            // +0.0 folds -0.0 onto 0.0
            seen.insert(row.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>());
            if seen.len() >= needed {
                return (true, seen.len());
            }
        }
        (false, seen.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once the relative inertia change drops below this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedCodebook {
    pub codebook: Codebook,
    /// Fraction of training fragments quantized to each centroid.
    pub priors: Priors,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl TrainedCodebook {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("at least one assignment step")
    }
}

/// Lloyd's k-means with k-means++ seeding, `k = 2^bits`.
pub fn train_codebook(
    fragments: &FragmentSet,
    bits: u32,
    seed: Seed,
    params: KMeansParams,
) -> Result<TrainedCodebook> {
    if bits == 0 || bits > crate::types::MAX_BITS {
        return Err(Error::BitsOutOfRange(bits));
    }
    if params.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be positive".into()));
    }
    let k = 1usize << bits;
    let (enough, found) = fragments.has_distinct(k);
    if !enough {
        return Err(Error::InsufficientData { needed: k, found });
    }
    let dim = fragments.dim();
    let mut centroids = seed_plus_plus(fragments, k, seed);
    let mut labels = vec![0usize; fragments.len()];
    let mut history = Vec::new();

    let mut iter = 0;
    loop {
        let inertia = assign(fragments, &centroids, &mut labels);
        let counts = cluster_sizes(&labels, k);
        let has_empty = counts.contains(&0);
        let converged = match history.last() {
            Some(&prev) => prev == 0.0 || (prev - inertia) / prev < params.tol,
            None => false,
        };
        history.push(inertia);
        iter += 1;
        // Past the budget, keep going only to repair empty cells; each repair
        // creates a singleton, so this terminates within k rounds.
        if !has_empty && (converged || iter >= params.max_iters) {
            break;
        }
        if iter >= params.max_iters + k {
            break;
        }
        if iter < params.max_iters {
            update(fragments, &labels, &counts, &mut centroids);
        }
        repair_empty(fragments, &counts, &mut centroids);
    }

    let counts = cluster_sizes(&labels, k);
    let n = fragments.len() as f64;
    let priors = Priors::new(counts.iter().map(|&c| c as f64 / n).collect())?;
    let codebook = Codebook::from_flat(dim, centroids)?;
    Ok(TrainedCodebook {
        codebook,
        priors,
        inertia_history: history,
    })
}

fn seed_plus_plus(fragments: &FragmentSet, k: usize, seed: Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    let n = fragments.len();
    let first = rng.random_range(0..n);
    let mut centroids = fragments.row(first).to_vec();
    let mut d2: Vec<f64> = fragments
        .rows()
        .map(|r| squared_distance(r, fragments.row(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        // At least k distinct fragments exist, so some weight is positive.
        let pick = pick.expect("positive D^2 weight");
        let chosen = fragments.row(pick).to_vec();
        for (w, r) in d2.iter_mut().zip(fragments.rows()) {
            *w = w.min(squared_distance(r, &chosen));
        }
        centroids.extend_from_slice(&chosen);
    }
    centroids
}

fn assign(fragments: &FragmentSet, centroids: &[f64], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (label, row) in labels.iter_mut().zip(fragments.rows()) {
        let (i, d) = nearest(centroids, fragments.dim(), row);
        *label = i;
        inertia += d;
    }
    inertia
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

fn update(fragments: &FragmentSet, labels: &[usize], counts: &[usize], centroids: &mut [f64]) {
    let dim = fragments.dim();
    let mut sums = vec![0.0; centroids.len()];
    for (&l, row) in labels.iter().zip(fragments.rows()) {
        for (s, v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            for j in c * dim..(c + 1) * dim {
                centroids[j] = sums[j] / count as f64;
            }
        }
    }
}

/// Moves each empty centroid onto the fragment farthest from its nearest
/// centroid, lowest fragment index on ties.
fn repair_empty(fragments: &FragmentSet, counts: &[usize], centroids: &mut [f64]) {
    let dim = fragments.dim();
    for (c, _) in counts.iter().enumerate().filter(|(_, &n)| n == 0) {
        let mut far = (0, -1.0);
        for (i, row) in fragments.rows().enumerate() {
            let (_, d) = nearest(centroids, dim, row);
            if d > far.1 {
                far = (i, d);
            }
        }
        centroids[c * dim..(c + 1) * dim].copy_from_slice(fragments.row(far.0));
    }
}
