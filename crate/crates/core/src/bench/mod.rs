//! Benchmark sweep engine: datasets, the downstream classifier, and
//! accuracy evaluation over a `(d, b, BER)` grid.
//!
//! The classifier only ever sees clean, unquantized training embeddings;
//! the FQI link is applied to test embeddings alone.

mod classifier;
mod dataset;
mod sweep;

pub use classifier::{evaluate, softmax, train_classifier, ClassifierModel, TrainParams};
pub use dataset::{dataset_from_text, dataset_to_text, gen_synthetic, split};
pub use sweep::{run_cell, sweep, BenchmarkCell, BenchmarkTable, PriorMode, SweepGrid, SweepParams};
