use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng as _;
use seqmia::eval::roc;
use seqmia::nn::{Activation, Architecture, Matrix, MlpModel, Objective, Parameters, RnnAttentionModel, SequenceObjective};
use seqmia::pipeline::{Origin, SnapshotSeries};
use seqmia::rng::rng_from_seed;
use seqmia::signals::{build_sequences, MetricSet};

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn mlp_forward(c: &mut Criterion) {
    let arch = Architecture::new(vec![446, 128, 30], Activation::Relu);
    let model = MlpModel::new(arch, 1).unwrap();
    let x = random_matrix(256, 446, 2);
    c.bench_function("mlp_forward_256x446", |b| b.iter(|| model.forward(black_box(&x)).unwrap()));
}

fn rnn(c: &mut Criterion) {
    let model = RnnAttentionModel::new(5, 64, 64, 3).unwrap();
    let seqs: Vec<Matrix> = (0..16).map(|i| random_matrix(31, 5, 10 + i)).collect();
    let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
    c.bench_function("rnn_forward_31x5", |b| b.iter(|| model.forward(black_box(&seqs[0])).unwrap()));
    let obj = SequenceObjective {
        sequences: &seqs,
        labels: &labels,
    };
    c.bench_function("rnn_loss_and_grad_31x5", |b| {
        b.iter_batched(
            || model.zeros_like(),
            |mut g| {
                obj.loss_and_grad(&model, 0, &mut g);
                g
            },
            BatchSize::SmallInput,
        )
    });
}

fn roc_curve(c: &mut Criterion) {
    let mut rng = rng_from_seed(4);
    let scores: Vec<f64> = (0..1600).map(|_| rng.random()).collect();
    let truth: Vec<bool> = (0..1600).map(|i| i % 2 == 0).collect();
    c.bench_function("roc_1600", |b| b.iter(|| roc(black_box(&scores), &truth, &[0.001, 0.01, 0.1]).unwrap()));
}

fn sequences(c: &mut Criterion) {
    let arch = Architecture::new(vec![446, 128, 30], Activation::Relu);
    let snaps: Vec<MlpModel> = (0..31).map(|i| MlpModel::new(arch.clone(), 100 + i).unwrap()).collect();
    let series = SnapshotSeries::new(snaps, Origin::Target).unwrap();
    let x = random_matrix(200, 446, 5);
    let labels: Vec<usize> = (0..200).map(|i| i % 30).collect();
    let ids: Vec<usize> = (0..200).collect();
    let metrics = MetricSet::all();
    c.bench_function("build_sequences_200x31", |b| {
        b.iter(|| build_sequences(&series, black_box(&x), &labels, &ids, &metrics).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = mlp_forward, rnn, roc_curve, sequences
}
criterion_main!(benches);
