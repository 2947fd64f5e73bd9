use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{parse_err, Error, Result};
use crate::format::{header_fields, join_floats, parse_floats};
use crate::types::{Embedding, LabeledDataset, Seed};

/// Gaussian mixture with class means on the unit sphere.
///
/// Items are laid out class by class; each is `mean + spread * N(0, I)`.
pub fn gen_synthetic(
    num_classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    seed: Seed,
) -> Result<LabeledDataset> {
    if num_classes < 2 || dim < 2 || per_class < 2 || !spread.is_finite() || spread <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need classes >= 2, dim >= 2, per_class >= 2, spread > 0 \
             (got {num_classes}, {dim}, {per_class}, {spread})"
        )));
    }
    let mut rng = seed.rng();
    let mut gaussian = move || -> f64 { rng.sample(StandardNormal) };

    let means: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();

    let mut embeddings = Vec::with_capacity(num_classes * per_class);
    let mut labels = Vec::with_capacity(num_classes * per_class);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let v = mean.iter().map(|m| m + spread * gaussian()).collect();
            embeddings.push(Embedding::new(v)?);
            labels.push(c);
        }
    }
    LabeledDataset::new(dim, num_classes, embeddings, labels)
}

/// Stratified shuffle split; every class lands in both halves.
///
/// Per class, `round(fraction * n)` items (clamped to `[1, n - 1]`) go to
/// the training half. Both halves keep the original item order.
pub fn split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: Seed,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_class = vec![Vec::new(); ds.num_classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = seed.rng();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n < 2 {
            return Err(Error::ClassTooSmall(c));
        }
        members.shuffle(&mut rng);
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Renders the `FQI-DATASET v1` text format.
pub fn dataset_to_text(ds: &LabeledDataset) -> String {
    let mut out = format!(
        "FQI-DATASET v1 dim={} classes={} count={}\n",
        ds.dim(),
        ds.num_classes(),
        ds.len()
    );
    for (e, label) in ds.iter() {
        out.push_str(&label.to_string());
        out.push(' ');
        out.push_str(&join_floats(e.values()));
        out.push('\n');
    }
    out
}

pub fn dataset_from_text(text: &str) -> Result<LabeledDataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines.next().ok_or_else(|| parse_err(1, "empty dataset file"))?;
    let fields = header_fields(header, "FQI-DATASET", &["dim", "classes", "count"], n)?;
    let nums = fields
        .iter()
        .map(|f| f.parse::<usize>().map_err(|_| parse_err(n, format!("bad header value {f:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let (dim, classes, count) = (nums[0], nums[1], nums[2]);

    let mut embeddings = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for (n, line) in lines {
        let (label, rest) = line
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| parse_err(n, "expected `<label> <values>`"))?;
        let label: usize = label
            .parse()
            .map_err(|_| parse_err(n, format!("bad label {label:?}")))?;
        let values = parse_floats(rest, n)?;
        if values.len() != dim {
            return Err(parse_err(n, format!("expected {dim} values, found {}", values.len())));
        }
        embeddings.push(Embedding::new(values).map_err(|e| parse_err(n, e.to_string()))?);
        labels.push(label);
    }
    if embeddings.len() != count {
        return Err(parse_err(1, format!("header says {count} items, found {}", embeddings.len())));
    }
    LabeledDataset::new(dim, classes, embeddings, labels).map_err(|e| parse_err(1, e.to_string()))
}
