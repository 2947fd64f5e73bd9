//! Shared fixtures for the criterion benchmarks.

use fqi_core::bench::gen_synthetic;
use fqi_core::codebook::{assign_indices, train_codebook, FragmentSet, KMeansParams, DEFAULT_EFFORT};
use fqi_core::codec::FqiCodec;
use fqi_core::{validate_config, LabeledDataset, Seed};

/// The desk-scale mixture: 8 classes of 100 items in 64 dimensions.
pub fn desk_dataset() -> LabeledDataset {
    gen_synthetic(8, 64, 100, 0.3, Seed(1)).expect("valid parameters")
}

pub fn fragments(ds: &LabeledDataset, d: usize) -> FragmentSet {
    FragmentSet::from_embeddings(ds.embeddings(), d).expect("d divides the dimension")
}

/// Codec trained on every fragment of `ds`, assignment tuned for `p_e`.
pub fn trained_codec(ds: &LabeledDataset, d: usize, b: u32, p_e: f64) -> FqiCodec {
    let trained = train_codebook(&fragments(ds, d), b, Seed(2), KMeansParams::default())
        .expect("enough distinct fragments");
    let asg = assign_indices(&trained.codebook, p_e, &trained.priors, Seed(3), DEFAULT_EFFORT)
        .expect("valid codebook");
    let cfg = validate_config(ds.dim(), d, b).expect("valid config");
    FqiCodec::new(cfg, trained.codebook, asg).expect("consistent parts")
}
