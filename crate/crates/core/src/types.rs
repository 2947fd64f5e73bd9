//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Upper bound on bits per fragment; keeps `2^b` codebook rows in memory.
pub const MAX_BITS: u32 = 16;

/// Root of every randomized operation.
///
/// Child seeds are derived by mixing `(parent, index)`, so work split across
/// threads draws from the same streams as a serial loop would.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub u64);

impl Seed {
    pub fn child(self, index: u64) -> Seed {
        let z = self
            .0
            .rotate_left(17)
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        Seed(splitmix(splitmix(z) ^ self.0))
    }

    /// Derives a seed along a path of indices, e.g. `[d, b, ber_bits, run]`.
    pub fn derive(self, path: &[u64]) -> Seed {
        path.iter().fold(self, |s, &i| s.child(i))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "embedding coordinate {v} is not finite"
            )));
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A validated `(d, b)` operating point for embeddings of dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FqiConfig {
    embedding_dim: usize,
    fragment_dim: usize,
    bits: u32,
}

impl FqiConfig {
    pub fn new(embedding_dim: usize, fragment_dim: usize, bits: u32) -> Result<Self> {
        validate_config(embedding_dim, fragment_dim, bits)
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    /// `d`
    pub fn fragment_dim(&self) -> usize {
        self.fragment_dim
    }

    /// `b`
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `F = N / d`
    pub fn fragment_count(&self) -> usize {
        self.embedding_dim / self.fragment_dim
    }

    /// `k = 2^b`
    pub fn codebook_size(&self) -> usize {
        1usize << self.bits
    }

    /// `F * b`
    pub fn code_length(&self) -> usize {
        self.fragment_count() * self.bits as usize
    }
}

/// Checks an `(N, d, b)` triple and derives fragment count, codebook size
/// and code length.
pub fn validate_config(embedding_dim: usize, fragment_dim: usize, bits: u32) -> Result<FqiConfig> {
    if embedding_dim == 0 || fragment_dim == 0 || bits == 0 {
        return Err(Error::InvalidParameter(format!(
            "N, d and b must be positive (got N={embedding_dim}, d={fragment_dim}, b={bits})"
        )));
    }
    if bits > MAX_BITS {
        return Err(Error::BitsOutOfRange(bits));
    }
    if embedding_dim % fragment_dim != 0 {
        return Err(Error::NonDivisible {
            n: embedding_dim,
            d: fragment_dim,
        });
    }
    Ok(FqiConfig {
        embedding_dim,
        fragment_dim,
        bits,
    })
}

/// An ordered string of binary symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitSequence(Vec<bool>);

impl BitSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        BitSequence(Vec::with_capacity(n))
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitSequence(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitSequence(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_word(&mut self, value: u32, width: u32) {
        for shift in (0..width).rev() {
            self.0.push((value >> shift) & 1 == 1);
        }
    }

    /// Reads `width` bits starting at `start` as a big-endian unsigned word.
    pub fn word_at(&self, start: usize, width: u32) -> u32 {
        self.0[start..start + width as usize]
            .iter()
            .fold(0u32, |acc, &bit| (acc << 1) | bit as u32)
    }

    pub fn hamming(&self, other: &BitSequence) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count())
    }

    /// Packs into octets MSB-first; the final partial octet is zero-padded.
    pub fn to_octets(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &bit)| acc | ((bit as u8) << (7 - i)))
            })
            .collect()
    }

    pub fn from_octets(octets: &[u8], nbits: usize) -> Result<Self> {
        if octets.len() != nbits.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: nbits.div_ceil(8),
                actual: octets.len(),
            });
        }
        let bits = (0..nbits)
            .map(|i| (octets[i / 8] >> (7 - i % 8)) & 1 == 1)
            .collect();
        Ok(BitSequence(bits))
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.0 {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidParameter(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitSequence)
    }
}

/// Embeddings paired with class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    num_classes: usize,
    embeddings: Vec<Embedding>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        num_classes: usize,
        embeddings: Vec<Embedding>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 || num_classes == 0 {
            return Err(Error::InvalidParameter(
                "dataset dim and class count must be positive".into(),
            ));
        }
        if embeddings.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: embeddings.len(),
                actual: labels.len(),
            });
        }
        if let Some(e) = embeddings.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: e.dim(),
            });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {l} outside [0, {num_classes})"
            )));
        }
        Ok(LabeledDataset {
            dim,
            num_classes,
            embeddings,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Embedding, usize)> {
        self.embeddings.iter().zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset with the same labels and transformed embeddings.
    pub fn map_embeddings<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Embedding) -> Result<Embedding>,
    {
        let embeddings = self.embeddings.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(self.dim, self.num_classes, embeddings, self.labels.clone())
    }

    pub(crate) fn subset(&self, indices: &[usize]) -> Self {
        LabeledDataset {
            dim: self.dim,
            num_classes: self.num_classes,
            embeddings: indices.iter().map(|&i| self.embeddings[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operating_point_2_1() {
        let cfg = validate_config(4096, 2, 1).unwrap();
        assert_eq!(cfg.fragment_count(), 2048);
        assert_eq!(cfg.codebook_size(), 2);
        assert_eq!(cfg.code_length(), 2048);
    }

    #[test]
    fn single_fragment() {
        let cfg = validate_config(4, 4, 2).unwrap();
        assert_eq!(cfg.fragment_count(), 1);
        assert_eq!(cfg.codebook_size(), 4);
        assert_eq!(cfg.code_length(), 2);
    }

    #[test]
    fn config_errors() {
        assert_eq!(
            validate_config(4096, 3, 2),
            Err(Error::NonDivisible { n: 4096, d: 3 })
        );
        assert_eq!(validate_config(16, 1, 17), Err(Error::BitsOutOfRange(17)));
        assert!(matches!(
            validate_config(0, 1, 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(validate_config(16, 1, 16).is_ok());
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
        assert!(Embedding::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Embedding::new(vec![]), Err(Error::Empty));
    }

    #[test]
    fn octet_packing_is_msb_first() {
        let bits: BitSequence = "1000000011".parse().unwrap();
        let octets = bits.to_octets();
        assert_eq!(octets, vec![0x80, 0xC0]);
        assert_eq!(BitSequence::from_octets(&octets, 10).unwrap(), bits);
        assert!(BitSequence::from_octets(&octets, 17).is_err());
    }

    #[test]
    fn words_round_trip() {
        let mut bits = BitSequence::new();
        bits.push_word(2, 2);
        bits.push_word(5, 3);
        assert_eq!(bits.to_string(), "10101");
        assert_eq!(bits.word_at(0, 2), 2);
        assert_eq!(bits.word_at(2, 3), 5);
    }

    #[test]
    fn child_seeds_differ_and_repeat() {
        let s = Seed(7);
        assert_eq!(s.child(3), s.child(3));
        assert_ne!(s.child(3), s.child(4));
        assert_ne!(s.derive(&[1, 2]), s.derive(&[2, 1]));
        assert_ne!(Seed(0).child(0), Seed(0));
    }

    #[test]
    fn dataset_validation() {
        let e = |v: &[f64]| Embedding::new(v.to_vec()).unwrap();
        assert!(LabeledDataset::new(2, 2, vec![e(&[1.0, 2.0])], vec![2]).is_err());
        assert!(LabeledDataset::new(2, 2, vec![e(&[1.0])], vec![0]).is_err());
        let ds = LabeledDataset::new(1, 2, vec![e(&[1.0]), e(&[2.0])], vec![0, 1]).unwrap();
        assert_eq!(ds.class_counts(), vec![1, 1]);
    }
}
