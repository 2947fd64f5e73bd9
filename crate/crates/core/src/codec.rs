//! Fragment, quantize, index: embeddings to bits and back.

use crate::codebook::{Codebook, CodebookArtifact, IndexAssignment};
use crate::error::{parse_err, Error, Result};
use crate::format::header_fields;
use crate::types::{BitSequence, Embedding, FqiConfig};

/// Splits `e` into contiguous `d`-dimensional fragments.
pub fn fragment(e: &Embedding, d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 0 || e.dim() % d != 0 {
        return Err(Error::NonDivisible { n: e.dim(), d });
    }
    Ok(e.values().chunks_exact(d).map(<[f64]>::to_vec).collect())
}

/// Concatenates fragments back into one embedding.
pub fn reassemble<F: AsRef<[f64]>>(fragments: &[F]) -> Result<Embedding> {
    let first = fragments.first().ok_or(Error::Empty)?.as_ref().len();
    if first == 0 {
        return Err(Error::Empty);
    }
    let mut values = Vec::with_capacity(first * fragments.len());
    for f in fragments {
        let f = f.as_ref();
        if f.len() != first {
            return Err(Error::DimensionMismatch {
                expected: first,
                actual: f.len(),
            });
        }
        values.extend_from_slice(f);
    }
    Embedding::new(values)
}

/// Nearest centroid in L2, lowest index on ties.
pub fn quantize_fragment(f: &[f64], cb: &Codebook) -> Result<usize> {
    if f.len() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            actual: f.len(),
        });
    }
    Ok(cb.nearest(f).0)
}

/// A configured FQI encoder/decoder shared by both link ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FqiCodec {
    config: FqiConfig,
    codebook: Codebook,
    assignment: IndexAssignment,
}

impl FqiCodec {
    pub fn new(config: FqiConfig, codebook: Codebook, assignment: IndexAssignment) -> Result<Self> {
        if codebook.dim() != config.fragment_dim() {
            return Err(Error::DimensionMismatch {
                expected: config.fragment_dim(),
                actual: codebook.dim(),
            });
        }
        if codebook.len() != config.codebook_size() || assignment.len() != config.codebook_size() {
            return Err(Error::LengthMismatch {
                expected: config.codebook_size(),
                actual: codebook.len().min(assignment.len()),
            });
        }
        Ok(FqiCodec {
            config,
            codebook,
            assignment,
        })
    }

    pub fn from_artifact(embedding_dim: usize, artifact: &CodebookArtifact) -> Result<Self> {
        let config = FqiConfig::new(
            embedding_dim,
            artifact.codebook.dim(),
            artifact.codebook.bits(),
        )?;
        Self::new(config, artifact.codebook.clone(), artifact.assignment.clone())
    }

    pub fn config(&self) -> &FqiConfig {
        &self.config
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn assignment(&self) -> &IndexAssignment {
        &self.assignment
    }

    fn check_dim(&self, e: &Embedding) -> Result<()> {
        if e.dim() != self.config.embedding_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.config.embedding_dim(),
                actual: e.dim(),
            });
        }
        Ok(())
    }

    /// Centroid index per fragment.
    pub fn quantize(&self, e: &Embedding) -> Result<Vec<usize>> {
        self.check_dim(e)?;
        Ok(e.values()
            .chunks_exact(self.config.fragment_dim())
            .map(|f| self.codebook.nearest(f).0)
            .collect())
    }

    pub fn encode(&self, e: &Embedding) -> Result<BitSequence> {
        let b = self.config.bits();
        let mut bits = BitSequence::with_capacity(self.config.code_length());
        for idx in self.quantize(e)? {
            bits.push_word(self.assignment.to_code(idx), b);
        }
        Ok(bits)
    }

    pub fn decode(&self, bits: &BitSequence) -> Result<Embedding> {
        let expected = self.config.code_length();
        if bits.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: bits.len(),
            });
        }
        let b = self.config.bits();
        let mut values = Vec::with_capacity(self.config.embedding_dim());
        for f in 0..self.config.fragment_count() {
            let code = bits.word_at(f * b as usize, b);
            values.extend_from_slice(self.codebook.centroid(self.assignment.from_code(code)));
        }
        Embedding::new(values)
    }

    /// Noiseless reconstruction error, `sqrt(sum_f |f - c_q(f)|^2)`.
    pub fn quantization_error(&self, e: &Embedding) -> Result<f64> {
        self.check_dim(e)?;
        Ok(e.values()
            .chunks_exact(self.config.fragment_dim())
            .map(|f| self.codebook.nearest(f).1)
            .sum::<f64>()
            .sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    pub l2_error: f64,
    pub cosine_similarity: f64,
}

pub fn reconstruction_metrics(original: &Embedding, received: &Embedding) -> Result<ReconstructionMetrics> {
    let (x, y) = (original.values(), received.values());
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let l2_error = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(ReconstructionMetrics {
        l2_error,
        cosine_similarity: dot / (nx * ny),
    })
}

/// Renders a payload as `FQI-PAYLOAD v1 nbits=<n>` plus a base16 line.
pub fn payload_to_text(bits: &BitSequence) -> String {
    format!(
        "FQI-PAYLOAD v1 nbits={}\n{}\n",
        bits.len(),
        hex::encode(bits.to_octets())
    )
}

/// Parses one or more consecutive payload blocks.
pub fn payloads_from_text(text: &str) -> Result<Vec<BitSequence>> {
    let mut out = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    while let Some((n, header)) = lines.next() {
        let fields = header_fields(header, "FQI-PAYLOAD", &["nbits"], n)?;
        let nbits: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(n, "nbits must be an unsigned integer"))?;
        // An empty payload still carries an (empty) octet line.
        let body = if nbits == 0 {
            match lines.clone().next() {
                Some((_, l)) if !l.starts_with("FQI-PAYLOAD") => {
                    lines.next();
                    l
                }
                _ => "",
            }
        } else {
            lines.next().ok_or_else(|| parse_err(n + 1, "missing payload octets"))?.1
        };
        let octets = hex::decode(body).map_err(|e| parse_err(n + 1, e.to_string()))?;
        let bits = BitSequence::from_octets(&octets, nbits).map_err(|e| parse_err(n + 1, e.to_string()))?;
        if octets.last().is_some_and(|last| nbits % 8 != 0 && last & (0xFF >> (nbits % 8)) != 0) {
            return Err(parse_err(n + 1, "padding bits must be zero"));
        }
        out.push(bits);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{transmit, BscChannel};
    use crate::types::Seed;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn line_codec(n: usize, points: &[f64]) -> FqiCodec {
        let cb = Codebook::new(1, points.iter().map(|&p| vec![p]).collect()).unwrap();
        let bits = cb.bits();
        FqiCodec::new(FqiConfig::new(n, 1, bits).unwrap(), cb, IndexAssignment::identity(bits)).unwrap()
    }

    #[test]
    fn fragment_examples() {
        let e = emb(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fragment(&e, 2).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(fragment(&e, 4).unwrap(), vec![vec![1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(fragment(&e, 3), Err(Error::NonDivisible { n: 4, d: 3 }));
    }

    #[test]
    fn reassemble_examples() {
        assert_eq!(reassemble(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(), emb(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(reassemble(&[vec![5.0]]).unwrap(), emb(&[5.0]));
        assert_eq!(reassemble::<Vec<f64>>(&[]), Err(Error::Empty));
        assert!(matches!(
            reassemble(&[vec![1.0], vec![2.0, 3.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantize_examples() {
        let cb = Codebook::new(1, vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(quantize_fragment(&[0.4], &cb).unwrap(), 0);
        assert_eq!(quantize_fragment(&[0.5], &cb).unwrap(), 0);
        assert!(quantize_fragment(&[0.5, 1.0], &cb).is_err());
        let cb4 = Codebook::new(1, vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(quantize_fragment(&[3.0], &cb4).unwrap(), 3);
    }

    #[test]
    fn encode_single_fragment_big_endian() {
        let cb = Codebook::new(
            4,
            vec![vec![0.0; 4], vec![1.0; 4], vec![2.0, 0.0, 0.0, 1.0], vec![3.0; 4]],
        )
        .unwrap();
        let codec = FqiCodec::new(FqiConfig::new(4, 4, 2).unwrap(), cb.clone(), IndexAssignment::identity(2)).unwrap();
        let bits = codec.encode(&emb(cb.centroid(2))).unwrap();
        assert_eq!(bits.to_string(), "10");
    }

    #[test]
    fn operating_point_2_1_length() {
        let cb = Codebook::new(2, vec![vec![-0.1, 0.0], vec![0.1, 0.0]]).unwrap();
        let codec = FqiCodec::new(FqiConfig::new(4096, 2, 1).unwrap(), cb, IndexAssignment::identity(1)).unwrap();
        let e = Embedding::new((0..4096).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(codec.encode(&e).unwrap().len(), 2048);
    }

    #[test]
    fn decode_lookup() {
        let codec = line_codec(2, &[0.0, 1.0]);
        assert_eq!(codec.decode(&"01".parse().unwrap()).unwrap(), emb(&[0.0, 1.0]));
        assert!(matches!(
            codec.decode(&"011".parse().unwrap()),
            Err(Error::LengthMismatch { expected: 2, actual: 3 })
        ));
        assert!(codec.encode(&emb(&[1.0])).is_err());
    }

    #[test]
    fn metrics_examples() {
        let x = emb(&[1.0, 0.0]);
        let m = reconstruction_metrics(&x, &x).unwrap();
        assert_eq!((m.l2_error, m.cosine_similarity), (0.0, 1.0));
        let m = reconstruction_metrics(&x, &emb(&[0.0, 1.0])).unwrap();
        assert_eq!(m.l2_error, 2f64.sqrt());
        assert_eq!(m.cosine_similarity, 0.0);
        let m = reconstruction_metrics(&x, &emb(&[-1.0, 0.0])).unwrap();
        assert_eq!(m.cosine_similarity, -1.0);
        assert_eq!(reconstruction_metrics(&x, &emb(&[0.0, 0.0])), Err(Error::ZeroVector));
        assert!(reconstruction_metrics(&x, &emb(&[1.0])).is_err());
    }

    #[test]
    fn payload_text_round_trip() {
        let a: BitSequence = "1010110011".parse().unwrap();
        let b = BitSequence::new();
        let c: BitSequence = "11111111".parse().unwrap();
        let text = [&a, &b, &c].map(payload_to_text).concat();
        assert!(text.starts_with("FQI-PAYLOAD v1 nbits=10\nacc0\n"));
        assert_eq!(payloads_from_text(&text).unwrap(), vec![a, b, c]);
        assert!(payloads_from_text("FQI-PAYLOAD v1 nbits=10\nacc1\n").is_err());
        assert!(payloads_from_text("FQI-PAYLOAD v1 nbits=10\nac\n").is_err());
        assert!(payloads_from_text("FQI-PAYLOAD v2 nbits=10\nacc0\n").is_err());
    }

    #[test]
    fn noiseless_channel_round_trip() {
        let codec = line_codec(6, &[-1.0, -0.2, 0.3, 1.1]);
        let e = emb(&[0.9, -0.5, 0.0, 0.1, -2.0, 3.0]);
        let bits = codec.encode(&e).unwrap();
        let via_channel = transmit(&bits, &BscChannel::noiseless(), Seed(3));
        assert_eq!(codec.decode(&via_channel).unwrap(), codec.decode(&bits).unwrap());
    }

    proptest! {
        #[test]
        fn fragment_reassemble_identity(v in prop::collection::vec(-1e6f64..1e6, 1..12usize).prop_map(|v| {
            let n = v.len() / 4 * 4;
            if n == 0 { v[..1].to_vec() } else { v[..n].to_vec() }
        }), d_choice in 0usize..3) {
            let e = Embedding::new(v).unwrap();
            let d = if e.dim() % 4 == 0 { [1, 2, 4][d_choice] } else { 1 };
            prop_assert_eq!(reassemble(&fragment(&e, d).unwrap()).unwrap(), e);
        }

        #[test]
        fn quantized_fixed_point(v in prop::collection::vec(-3.0f64..3.0, 8)) {
            let codec = line_codec(8, &[-2.0, -0.7, -0.1, 0.0, 0.4, 0.9, 1.5, 2.5]);
            let e = Embedding::new(v).unwrap();
            let bits = codec.encode(&e).unwrap();
            prop_assert_eq!(bits.len(), 24);
            prop_assert_eq!(codec.encode(&codec.decode(&bits).unwrap()).unwrap(), bits);
        }
    }
}
