//! Shared quantization codebook and channel-aware index assignment.
//!
//! A [`Codebook`] holds `k = 2^b` reference vectors learned by k-means over
//! pooled fragments. An [`IndexAssignment`] maps each centroid to a `b`-bit
//! codeword so that the bit flips a BSC is most likely to cause land on
//! nearby centroids.

mod assign;
mod format;
mod kmeans;

pub use assign::{assign_indices, DEFAULT_EFFORT};
pub use format::CodebookArtifact;
pub use kmeans::{train_codebook, FragmentSet, KMeansParams, TrainedCodebook};

use crate::error::{Error, Result};
use crate::types::BitSequence;

/// `k` distinct reference vectors of dimension `d`, `k` a power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    bits: u32,
    centroids: Vec<f64>,
}

impl Codebook {
    pub fn new(dim: usize, centroids: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("codebook dimension must be positive".into()));
        }
        if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.len(),
            });
        }
        Self::from_flat(dim, centroids.concat())
    }

    pub(crate) fn from_flat(dim: usize, centroids: Vec<f64>) -> Result<Self> {
        let k = centroids.len() / dim;
        if k < 2 || !k.is_power_of_two() || k * dim != centroids.len() {
            return Err(Error::InvalidParameter(format!(
                "codebook size must be a power of two >= 2, got {k}"
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("codebook has non-finite coordinates".into()));
        }
        let cb = Codebook {
            dim,
            bits: k.trailing_zeros(),
            centroids,
        };
        for i in 0..k {
            for j in 0..i {
                if cb.centroid(i) == cb.centroid(j) {
                    return Err(Error::InvalidParameter(format!(
                        "centroids {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(cb)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f64]> {
        self.centroids.chunks_exact(self.dim)
    }

    /// Index of the nearest centroid in squared L2; lowest index wins ties.
    pub fn nearest(&self, point: &[f64]) -> (usize, f64) {
        nearest(&self.centroids, self.dim, point)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn nearest(centroids: &[f64], dim: usize, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Bijection between centroid indices and `b`-bit codewords.
///
/// Codewords are stored as unsigned integers whose big-endian `b`-bit
/// expansion is the transmitted bit string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexAssignment {
    bits: u32,
    to_code: Vec<u32>,
    from_code: Vec<usize>,
}

impl IndexAssignment {
    pub fn identity(bits: u32) -> Self {
        let k = 1usize << bits;
        IndexAssignment {
            bits,
            to_code: (0..k as u32).collect(),
            from_code: (0..k).collect(),
        }
    }

    /// `to_code[i]` is the codeword of centroid `i`.
    pub fn new(bits: u32, to_code: Vec<u32>) -> Result<Self> {
        let k = 1usize << bits;
        if to_code.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                actual: to_code.len(),
            });
        }
        let mut from_code = vec![usize::MAX; k];
        for (i, &code) in to_code.iter().enumerate() {
            let slot = from_code.get_mut(code as usize).ok_or_else(|| {
                Error::InvalidParameter(format!("codeword {code} does not fit in {bits} bits"))
            })?;
            if *slot != usize::MAX {
                return Err(Error::InvalidParameter(format!("codeword {code} assigned twice")));
            }
            *slot = i;
        }
        Ok(IndexAssignment {
            bits,
            to_code,
            from_code,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.to_code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_code.is_empty()
    }

    pub fn to_code(&self, centroid: usize) -> u32 {
        self.to_code[centroid]
    }

    pub fn from_code(&self, code: u32) -> usize {
        self.from_code[code as usize]
    }

    pub fn codes(&self) -> &[u32] {
        &self.to_code
    }

    pub fn codeword(&self, centroid: usize) -> BitSequence {
        let mut bits = BitSequence::with_capacity(self.bits as usize);
        bits.push_word(self.to_code[centroid], self.bits);
        bits
    }
}

/// Centroid usage frequencies weighting the distortion objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors(Vec<f64>);

impl Priors {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty);
        }
        if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParameter("priors must be finite and non-negative".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("priors sum to {sum}, not 1")));
        }
        Ok(Priors(p))
    }

    pub fn uniform(k: usize) -> Self {
        Priors(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange(p))
    }
}

/// Probability that codeword `sent` arrives as `received` over a BSC.
pub fn flip_probability(sent: &BitSequence, received: &BitSequence, p_e: f64) -> Result<f64> {
    check_probability(p_e)?;
    let h = sent.hamming(received)?;
    let b = sent.len();
    Ok(p_e.powi(h as i32) * (1.0 - p_e).powi((b - h) as i32))
}

/// Expected squared-L2 error per fragment induced by channel flips:
/// `sum_i prior_i * sum_j P(code_i -> code_j) * |c_i - c_j|^2`.
pub fn expected_distortion(
    cb: &Codebook,
    asg: &IndexAssignment,
    p_e: f64,
    priors: &Priors,
) -> Result<f64> {
    let model = DistortionModel::new(cb, p_e, priors)?;
    if asg.len() != cb.len() {
        return Err(Error::LengthMismatch {
            expected: cb.len(),
            actual: asg.len(),
        });
    }
    Ok(model.total(asg.codes()))
}

/// Precomputed centroid distances and codeword transition probabilities.
pub(crate) struct DistortionModel {
    k: usize,
    dist: Vec<f64>,
    trans: Vec<f64>,
    priors: Vec<f64>,
}

impl DistortionModel {
    pub(crate) fn new(cb: &Codebook, p_e: f64, priors: &Priors) -> Result<Self> {
        check_probability(p_e)?;
        let k = cb.len();
        if priors.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                actual: priors.len(),
            });
        }
        let b = cb.bits() as i32;
        let by_hamming: Vec<f64> = (0..=b)
            .map(|h| p_e.powi(h) * (1.0 - p_e).powi(b - h))
            .collect();
        let mut dist = vec![0.0; k * k];
        let mut trans = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                dist[i * k + j] = squared_distance(cb.centroid(i), cb.centroid(j));
                trans[i * k + j] = by_hamming[(i ^ j).count_ones() as usize];
            }
        }
        Ok(DistortionModel {
            k,
            dist,
            trans,
            priors: priors.values().to_vec(),
        })
    }

    fn t(&self, a: u32, b: u32) -> f64 {
        self.trans[a as usize * self.k + b as usize]
    }

    fn row(&self, codes: &[u32], i: usize) -> f64 {
        let ci = codes[i];
        (0..self.k)
            .map(|j| self.t(ci, codes[j]) * self.dist[i * self.k + j])
            .sum::<f64>()
            * self.priors[i]
    }

    pub(crate) fn total(&self, codes: &[u32]) -> f64 {
        (0..self.k).map(|i| self.row(codes, i)).sum()
    }

    /// Sum of every term touching row or column `x` or `y`.
    #[cfg(test)]
    fn touching(&self, codes: &[u32], x: usize, y: usize) -> f64 {
        let mut s = self.row(codes, x) + self.row(codes, y);
        let (cx, cy) = (codes[x], codes[y]);
        for i in (0..self.k).filter(|&i| i != x && i != y) {
            let ci = codes[i];
            s += self.priors[i]
                * (self.t(ci, cx) * self.dist[i * self.k + x]
                    + self.t(ci, cy) * self.dist[i * self.k + y]);
        }
        s
    }

    /// Weight of centroid `m` in the swap delta of pair `(u, v)`.
    fn weight(&self, m: usize, u: usize, v: usize) -> f64 {
        let k = self.k;
        self.dist[m * k + u] * (self.priors[m] + self.priors[u])
            - self.dist[m * k + v] * (self.priors[m] + self.priors[v])
    }

    /// Change in total distortion if centroids `u` and `v` trade
    /// codewords, in O(k). Relies on the transition table being symmetric.
    pub(crate) fn pair_delta(&self, codes: &[u32], u: usize, v: usize) -> f64 {
        let (cu, cv) = (codes[u], codes[v]);
        (0..self.k)
            .filter(|&m| m != u && m != v)
            .map(|m| self.weight(m, u, v) * (self.t(codes[m], cv) - self.t(codes[m], cu)))
            .sum()
    }

    /// How swapping `r` and `s` shifts the pair delta of a disjoint pair
    /// `(u, v)`; `codes` is the assignment before the swap.
    pub(crate) fn delta_shift(&self, codes: &[u32], r: usize, s: usize, u: usize, v: usize) -> f64 {
        let (cu, cv) = (codes[u], codes[v]);
        let g = |c: u32| self.t(c, cv) - self.t(c, cu);
        (self.weight(r, u, v) - self.weight(s, u, v)) * (g(codes[s]) - g(codes[r]))
    }

    /// Change in total distortion if centroids `x` and `y` trade codewords.
    #[cfg(test)]
    pub(crate) fn swap_delta(&self, codes: &mut [u32], x: usize, y: usize) -> f64 {
        let before = self.touching(codes, x, y);
        codes.swap(x, y);
        let after = self.touching(codes, x, y);
        codes.swap(x, y);
        after - before
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }
}
