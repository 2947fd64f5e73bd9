//! `FQI-CODEBOOK v1` text format.
//!
//! ```text
//! FQI-CODEBOOK v1 d=<d> b=<b> k=<k>
//! <k lines of d floats>
//! ASSIGN <k codewords as unsigned integers>
//! PRIORS <k floats>
//! ```

use std::fmt::Write as _;

use super::{Codebook, IndexAssignment, Priors};
use crate::error::{parse_err, Error, Result};
use crate::format::{header_fields, join_floats, parse_floats};

/// Everything both link ends must share to run the codec.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookArtifact {
    pub codebook: Codebook,
    pub assignment: IndexAssignment,
    pub priors: Priors,
}

impl CodebookArtifact {
    pub fn new(codebook: Codebook, assignment: IndexAssignment, priors: Priors) -> Result<Self> {
        let k = codebook.len();
        for len in [assignment.len(), priors.len()] {
            if len != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    actual: len,
                });
            }
        }
        Ok(CodebookArtifact {
            codebook,
            assignment,
            priors,
        })
    }

    pub fn to_text(&self) -> String {
        let cb = &self.codebook;
        let mut out = format!(
            "FQI-CODEBOOK v1 d={} b={} k={}\n",
            cb.dim(),
            cb.bits(),
            cb.len()
        );
        for c in cb.centroids() {
            out.push_str(&join_floats(c));
            out.push('\n');
        }
        out.push_str("ASSIGN");
        for code in self.assignment.codes() {
            let _ = write!(out, " {code}");
        }
        out.push_str("\nPRIORS ");
        out.push_str(&join_floats(self.priors.values()));
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty codebook file"))?;
        let fields = header_fields(header, "FQI-CODEBOOK", &["d", "b", "k"], 1)?;
        let [d, b, k] = [0, 1, 2].map(|i| fields[i].parse::<usize>());
        let (d, b, k) = match (d, b, k) {
            (Ok(d), Ok(b), Ok(k)) => (d, b, k),
            _ => return Err(parse_err(1, "header values must be unsigned integers")),
        };
        if b == 0 || b > 16 || k != 1 << b || d == 0 {
            return Err(parse_err(1, format!("inconsistent header d={d} b={b} k={k}")));
        }

        let mut centroids = Vec::with_capacity(k);
        for i in 0..k {
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_err(i + 2, format!("expected {k} centroid lines")))?;
            let row = parse_floats(line, n)?;
            if row.len() != d {
                return Err(parse_err(n, format!("expected {d} values, found {}", row.len())));
            }
            centroids.push(row);
        }
        let codebook = Codebook::new(d, centroids).map_err(|e| parse_err(2, e.to_string()))?;

        let (n, line) = lines.next().ok_or_else(|| parse_err(k + 2, "missing ASSIGN line"))?;
        let rest = line
            .strip_prefix("ASSIGN")
            .ok_or_else(|| parse_err(n, "expected ASSIGN"))?;
        let codes = rest
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| parse_err(n, format!("bad codeword {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if codes.len() != k {
            return Err(parse_err(n, format!("expected {k} codewords, found {}", codes.len())));
        }
        let assignment =
            IndexAssignment::new(b as u32, codes).map_err(|e| parse_err(n, e.to_string()))?;

        let (n, line) = lines.next().ok_or_else(|| parse_err(k + 3, "missing PRIORS line"))?;
        let rest = line
            .strip_prefix("PRIORS")
            .ok_or_else(|| parse_err(n, "expected PRIORS"))?;
        let priors = parse_floats(rest, n)?;
        if priors.len() != k {
            return Err(parse_err(n, format!("expected {k} priors, found {}", priors.len())));
        }
        let priors = Priors::new(priors).map_err(|e| parse_err(n, e.to_string()))?;

        if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(parse_err(n, format!("trailing content {extra:?}")));
        }
        CodebookArtifact::new(codebook, assignment, priors)
    }
}
