use rand::seq::SliceRandom;

use fqi_core::bench::{
    evaluate, gen_synthetic, run_cell, split, sweep, train_classifier, BenchmarkTable,
    ClassifierModel, SweepGrid, SweepParams, TrainParams,
};
use fqi_core::{Error, LabeledDataset, Seed};

fn pooled(a: f64, b: f64) -> f64 {
    ((a * a + b * b) / 2.0).sqrt()
}

fn quick() -> SweepParams {
    SweepParams {
        classifier: TrainParams {
            epochs: 200,
            ..TrainParams::default()
        },
        ..SweepParams::default()
    }
}

#[test]
fn tight_mixture_is_nearly_separable() {
    let ds = gen_synthetic(8, 64, 100, 0.1, Seed(1)).unwrap();
    assert_eq!(ds.len(), 800);
    let (train, test) = split(&ds, 0.75, Seed(2)).unwrap();
    let model = train_classifier(&train, &TrainParams::default()).unwrap();
    assert!(evaluate(&model, &test).unwrap() > 0.99);
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let ds = gen_synthetic(8, 16, 400, 0.3, Seed(3)).unwrap();
    let mut labels = ds.labels().to_vec();
    labels.shuffle(&mut Seed(4).rng());
    let ds = LabeledDataset::new(16, 8, ds.embeddings().to_vec(), labels).unwrap();
    let (train, test) = split(&ds, 0.5, Seed(5)).unwrap();
    let acc = evaluate(&train_classifier(&train, &TrainParams::default()).unwrap(), &test).unwrap();
    assert!((acc - 0.125).abs() <= 0.05, "{acc}");
}

#[test]
fn untrained_and_constant_models() {
    let ds = gen_synthetic(4, 8, 50, 0.3, Seed(6)).unwrap();
    let zero = TrainParams {
        epochs: 0,
        ..TrainParams::default()
    };
    let model = train_classifier(&ds, &zero).unwrap();
    assert_eq!(evaluate(&model, &ds).unwrap(), 0.25);
    // a large class-0 bias predicts class 0 everywhere
    let mut w = vec![0.0; 4 * 9];
    w[8] = 1e3;
    let always0 = ClassifierModel::from_weights(4, 8, w).unwrap();
    assert_eq!(evaluate(&always0, &ds).unwrap(), 0.25);
}

#[test]
fn rich_noiseless_codebook_tracks_nominal() {
    // d = dim with b = 10 needs at least 1024 distinct training embeddings
    let ds = gen_synthetic(4, 4, 400, 0.05, Seed(7)).unwrap();
    let params = quick();
    let cell = run_cell(&ds, 4, 10, 0.0, 2, Seed(8), &params).unwrap();
    let grid = SweepGrid {
        d: vec![4],
        b: vec![10],
        ber: vec![0.0],
    };
    let table = sweep(&ds, "rich", &grid, 2, Seed(8), &params, false).unwrap();
    assert_eq!(table.cells()[0], cell);
    assert!((cell.mean_accuracy - table.nominal_accuracy()).abs() <= 0.02);
}

#[test]
fn half_ber_is_rejected() {
    let ds = gen_synthetic(2, 4, 20, 0.1, Seed(9)).unwrap();
    assert!(matches!(
        run_cell(&ds, 2, 1, 0.5, 1, Seed(1), &quick()),
        Err(Error::OutOfRange(_))
    ));
}

#[test]
fn single_run_has_zero_std_and_repeats_exactly() {
    let ds = gen_synthetic(3, 8, 40, 0.3, Seed(10)).unwrap();
    let one = run_cell(&ds, 2, 2, 0.05, 1, Seed(11), &quick()).unwrap();
    assert_eq!(one.std_accuracy, 0.0);
    let a = run_cell(&ds, 2, 2, 0.05, 10, Seed(11), &quick()).unwrap();
    let b = run_cell(&ds, 2, 2, 0.05, 10, Seed(11), &quick()).unwrap();
    assert_eq!(a, b);
    assert!((0.0..=1.0).contains(&a.mean_accuracy));
}

fn small_table(parallel: bool) -> BenchmarkTable {
    let ds = gen_synthetic(4, 16, 60, 0.3, Seed(12)).unwrap();
    let grid = SweepGrid {
        d: vec![1, 2, 4],
        b: vec![1, 2, 4],
        ber: vec![0.0, 0.1, 0.25],
    };
    sweep(&ds, "small", &grid, 6, Seed(13), &quick(), parallel).unwrap()
}

#[test]
fn sweep_shape_and_determinism() {
    let serial = small_table(false);
    let parallel = small_table(true);
    assert_eq!(serial, parallel);
    assert_eq!(serial.to_text(), parallel.to_text());
    assert_eq!(serial.cells().len(), 27);

    for d in [1, 2, 4] {
        for b in [1, 2, 4] {
            let clean = serial.cell(d, b, 0.0).unwrap();
            let noisy = serial.cell(d, b, 0.25).unwrap();
            let margin = 2.0 * pooled(clean.std_accuracy, noisy.std_accuracy);
            assert!(clean.mean_accuracy >= noisy.mean_accuracy - margin, "({d}, {b})");
        }
        for w in [1, 2, 4].windows(2) {
            let lo = serial.cell(d, w[0], 0.0).unwrap();
            let hi = serial.cell(d, w[1], 0.0).unwrap();
            let margin = 2.0 * pooled(lo.std_accuracy, hi.std_accuracy);
            assert!(hi.mean_accuracy >= lo.mean_accuracy - margin, "d = {d}, b {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn small_grid_cardinality() {
    let ds = gen_synthetic(2, 4, 30, 0.2, Seed(14)).unwrap();
    let grid = SweepGrid {
        d: vec![1, 2],
        b: vec![1, 2],
        ber: vec![0.0, 0.1],
    };
    let t = sweep(&ds, "tiny", &grid, 2, Seed(15), &quick(), true).unwrap();
    assert_eq!(t.cells().len(), 8);
    assert!((0.0..=1.0).contains(&t.nominal_accuracy()));
    assert_eq!(BenchmarkTable::parse(&t.to_text()).unwrap().cells(), t.cells());
}
