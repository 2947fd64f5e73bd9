//! Helpers shared by the line-oriented text formats.

use crate::error::{parse_err, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn join_floats(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_float(v)).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_floats(text: &str, line: usize) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(parse_err(line, format!("bad number {t:?}"))),
        })
        .collect()
}

/// Splits `MAGIC v1 k1=v1 k2=v2 ...`, requiring exactly `keys` in order.
pub(crate) fn header_fields<'a>(
    line: &'a str,
    magic: &str,
    keys: &[&str],
    line_no: usize,
) -> Result<Vec<&'a str>> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(magic) {
        return Err(parse_err(line_no, format!("expected {magic} header")));
    }
    match tokens.next() {
        Some("v1") => {}
        Some(v) => return Err(parse_err(line_no, format!("unsupported version {v:?}"))),
        None => return Err(parse_err(line_no, "missing version")),
    }
    let mut values = Vec::with_capacity(keys.len());
    for key in keys {
        let token = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, format!("missing {key}=")))?;
        let value = token
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| parse_err(line_no, format!("expected {key}=, found {token:?}")))?;
        values.push(value);
    }
    if let Some(extra) = tokens.next() {
        return Err(parse_err(line_no, format!("unexpected field {extra:?}")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -0.0, 1e-300, 6.02e23, 0.15] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(fmt_float(3.0), "3");
        assert_eq!(fmt_float(0.15), "0.15");
    }

    #[test]
    fn header_parsing() {
        let f = header_fields("X v1 a=1 b=two", "X", &["a", "b"], 1).unwrap();
        assert_eq!(f, vec!["1", "two"]);
        assert!(header_fields("X v2 a=1 b=2", "X", &["a", "b"], 1).is_err());
        assert!(header_fields("X v1 b=1 a=2", "X", &["a", "b"], 1).is_err());
        assert!(header_fields("X v1 a=1", "X", &["a", "b"], 1).is_err());
        assert!(header_fields("X v1 a=1 b=2 c=3", "X", &["a", "b"], 1).is_err());
        assert!(header_fields("Y v1 a=1 b=2", "X", &["a", "b"], 1).is_err());
    }

    #[test]
    fn rejects_non_finite_numbers() {
        assert!(parse_floats("1 NaN", 1).is_err());
        assert!(parse_floats("inf", 1).is_err());
        assert_eq!(parse_floats(" 1  2.5 ", 1).unwrap(), vec![1.0, 2.5]);
    }
}
