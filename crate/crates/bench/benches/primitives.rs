use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::Rng;

use consolid_core::data::{generate, AuxKind, GeneratorKind, GeneratorSpec};
use consolid_core::detect::{select_anchors, AnchorPrediction};
use consolid_core::distill::{consolidate, ConsolidationConfig, LossKind};
use consolid_core::nn::{backward, forward_logits, init_model, TrainConfig};
use consolid_core::rng::rng_from;
use consolid_core::{Matrix, MlpSpec};

fn batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from(seed);
    let rows: Vec<Vec<f32>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-3.0f32..3.0)).collect())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

fn bench_forward_backward(c: &mut Criterion) {
    let spec = MlpSpec::new(vec![2, 32, 8]).unwrap();
    let model = init_model(&spec, &(0..8).collect::<Vec<u32>>(), 1).unwrap();
    let inputs = batch(256, 2, 2);
    c.bench_function("forward_256x2_h32", |b| {
        b.iter(|| forward_logits(black_box(&model), black_box(&inputs)).unwrap())
    });
    let logits = forward_logits(&model, &inputs).unwrap();
    c.bench_function("backward_256x2_h32", |b| {
        b.iter(|| backward(black_box(&model), black_box(&inputs), black_box(&logits)).unwrap())
    });
}

fn bench_consolidate(c: &mut Criterion) {
    let gen = GeneratorSpec {
        kind: GeneratorKind::GaussianBlobs,
        classes: 4,
        samples_per_class: 20,
        test_samples_per_class: 5,
        dim: 2,
        dispersion: 0.2,
        seed: 9,
        aux_kind: AuxKind::BroadUniform,
        aux_size: 200,
    };
    let (_, _, aux) = generate(&gen).unwrap();
    let spec = MlpSpec::new(vec![2, 16, 2]).unwrap();
    let old = init_model(&spec, &[0, 2], 1).unwrap();
    let new = init_model(&spec, &[1, 3], 2).unwrap();
    let student = MlpSpec::new(vec![2, 16, 4]).unwrap();
    let cfg = ConsolidationConfig {
        train: TrainConfig {
            epochs: 5,
            batch_size: 32,
            lr0: 0.02,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_drop_points: vec![0.7, 0.9],
            seed: 0,
        },
        loss: LossKind::L2,
        aux_batch_size: 32,
    };
    c.bench_function("consolidate_4c_aux200_e5", |b| {
        b.iter(|| {
            consolidate(
                black_box(&old),
                black_box(&new),
                black_box(&aux),
                &cfg,
                &student,
                0,
            )
            .unwrap()
        })
    });
}

fn bench_select_anchors(c: &mut Criterion) {
    let mut rng = rng_from(7);
    let anchors: Vec<AnchorPrediction> = (0..1000)
        .map(|_| AnchorPrediction {
            logits_old: (0..3).map(|_| rng.gen_range(-4.0f32..4.0)).collect(),
            logits_new: (0..2).map(|_| rng.gen_range(-4.0f32..4.0)).collect(),
            box_old: [0.0; 4],
            box_new: [0.0; 4],
        })
        .collect();
    c.bench_function("select_anchors_1000_top100", |b| {
        b.iter(|| select_anchors(black_box(&anchors), 100))
    });
}

criterion_group!(
    benches,
    bench_forward_backward,
    bench_consolidate,
    bench_select_anchors
);
criterion_main!(benches);
